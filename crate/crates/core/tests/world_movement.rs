use std::collections::HashMap;

use nanoevo_core::config::SimConfig;
use nanoevo_core::kinetics::NanoAgentGenome;
use nanoevo_core::world::{init_world, GridWorld, Position};

fn empty_world(seed: u64) -> GridWorld {
    let mut cfg = SimConfig::default();
    cfg.world.width = 10;
    cfg.world.height = 10;
    cfg.world.cc_count = 0;
    cfg.world.hc_count = 0;
    init_world(&cfg, seed).unwrap()
}

/// Pearson statistic of observed counts against equal expected counts.
fn chi_square(counts: &HashMap<Position, u64>, cells: usize, n: u64) -> f64 {
    let expected = n as f64 / cells as f64;
    assert_eq!(counts.len(), cells, "some neighbour never visited");
    counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

fn hop_histogram(start: Position, n: u64, seed: u64) -> HashMap<Position, u64> {
    let mut world = empty_world(seed);
    world.spawn_agent(NanoAgentGenome::new(1, 0.0, 0.0, 0.0, 0.0), start);
    let mut counts = HashMap::new();
    for _ in 0..n {
        world.agents[0].position = start;
        *counts.entry(world.move_agent(0)).or_insert(0) += 1;
    }
    counts
}

#[test]
fn interior_hops_are_uniform_over_moore_neighbours() {
    let n = 16_000;
    let counts = hop_histogram(Position::new(5, 5), n, 1);
    for p in counts.keys() {
        assert!(p.row.abs_diff(5) <= 1 && p.col.abs_diff(5) <= 1 && *p != Position::new(5, 5));
    }
    // 7 degrees of freedom, 1% level.
    assert!(chi_square(&counts, 8, n) < 18.475);
}

#[test]
fn corner_hops_are_uniform_over_three_neighbours() {
    let n = 9_000;
    let counts = hop_histogram(Position::new(0, 0), n, 2);
    // 2 degrees of freedom, 1% level.
    assert!(chi_square(&counts, 3, n) < 9.210);
}

#[test]
fn speed_bounds_displacement() {
    let mut world = empty_world(3);
    for speed in 1..=3u32 {
        let start = Position::new(5, 5);
        world.agents.clear();
        world.spawn_agent(NanoAgentGenome::new(speed, 0.0, 0.0, 0.0, 0.0), start);
        for _ in 0..2000 {
            world.agents[0].position = start;
            let p = world.move_agent(0);
            let chebyshev = p.row.abs_diff(5).max(p.col.abs_diff(5));
            assert!(chebyshev <= speed as usize);
        }
    }
}
