//! Fitness, selection/mutation of nano-agents, and tumour counter-adaptation.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use crate::config::EvolutionConfig;
use crate::error::{Error, Result};
use crate::kinetics::{NanoAgentGenome, RateTarget, ResistanceModifier};
use crate::world::{AgentId, CellAgent, CellId, CellKind, GridWorld, NanoAgent};

/// Cancer cells killed minus healthy cells killed.
pub fn local_fitness(agent: &NanoAgent) -> i64 {
    agent.cc_killed as i64 - agent.hc_killed as i64
}

/// Indices of `population` ordered best first: fitness descending, ties by
/// ascending agent id.
pub fn rank_by_fitness(population: &[NanoAgent]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        local_fitness(&population[b])
            .cmp(&local_fitness(&population[a]))
            .then(population[a].id.cmp(&population[b].id))
    });
    order
}

/// Gaussian perturbation of every probability (clipped to `[0, 1]`) and a
/// ±1 speed step with probability `sigma` each (clipped to `[1, speed_max]`).
pub fn mutate_genome<R: Rng + ?Sized>(
    genome: &NanoAgentGenome,
    sigma: f64,
    speed_max: u32,
    rng: &mut R,
) -> NanoAgentGenome {
    if sigma <= 0.0 {
        return *genome;
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut perturb = |p: f64| (p + noise.sample(rng)).clamp(0.0, 1.0);
    let p_a = perturb(genome.p_a);
    let p_d = perturb(genome.p_d);
    let p_i = perturb(genome.p_i);
    let p_k = perturb(genome.p_k);
    let u: f64 = rng.random();
    let speed = if u < sigma {
        genome.speed.saturating_sub(1)
    } else if u < 2.0 * sigma {
        genome.speed + 1
    } else {
        genome.speed
    };
    NanoAgentGenome {
        speed: speed.clamp(1, speed_max.max(1)),
        p_a,
        p_d,
        p_i,
        p_k,
    }
}

/// Truncation selection with mutation, applied in place.
///
/// With `k = floor(replace_fraction * N)`, each of the `k` worst-ranked agents
/// whose fitness is strictly below the worst fitness in the top `k` is
/// replaced by a fresh agent carrying a mutated copy of a genome drawn
/// uniformly from the top `k`. The replacement keeps the position, gets a
/// new id from `next_id`, starts free with empty memory and zero counters.
/// Returns the number of agents replaced.
pub fn selection_mutation_round<R: Rng + ?Sized>(
    population: &mut [NanoAgent],
    cfg: &EvolutionConfig,
    speed_max: u32,
    mut next_id: impl FnMut() -> AgentId,
    rng: &mut R,
) -> usize {
    let n = population.len();
    if n < 2 {
        return 0;
    }
    let k = (cfg.replace_fraction * n as f64).floor() as usize;
    if k == 0 {
        return 0;
    }
    let order = rank_by_fitness(population);
    let top: Vec<NanoAgentGenome> = order[..k].iter().map(|&i| population[i].genome).collect();
    let top_floor = local_fitness(&population[order[k - 1]]);
    let mut replaced = 0;
    for &idx in &order[n - k..] {
        if local_fitness(&population[idx]) >= top_floor {
            continue;
        }
        let parent = top[rng.random_range(0..k)];
        let genome = mutate_genome(&parent, cfg.mutation_sigma, speed_max, rng);
        let old = &population[idx];
        population[idx] = NanoAgent::new(next_id(), genome, old.position, old.memory.capacity());
        replaced += 1;
    }
    replaced
}

/// Flips each signature bit of a cancer cell independently with `flip_prob`.
pub fn mutate_cc_signature<R: Rng + ?Sized>(cell: &mut CellAgent, flip_prob: f64, rng: &mut R) -> Result<()> {
    if cell.kind != CellKind::Cancer {
        return Err(Error::Contract(format!("cell {} is not a cancer cell", cell.id)));
    }
    for bit in 0..cell.signature.len() {
        if rng.random::<f64>() < flip_prob {
            cell.signature.flip(bit);
        }
    }
    Ok(())
}

/// Gives `round(resistance_fraction * |ccs|)` distinct cells one modifier
/// each, with a uniform target and a uniform strength on the configured range.
pub fn assign_resistance<R: Rng + ?Sized>(ccs: &mut [&mut CellAgent], cfg: &EvolutionConfig, rng: &mut R) {
    let count = (cfg.resistance_fraction * ccs.len() as f64).round() as usize;
    if count == 0 {
        return;
    }
    let [lo, hi] = cfg.resistance_strength_range;
    for idx in sample(rng, ccs.len(), count).into_vec() {
        let target = RateTarget::ALL[rng.random_range(0..RateTarget::ALL.len())];
        let strength = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        ccs[idx].resistance = Some(ResistanceModifier { target, strength });
    }
}

/// Division attempt of a living cancer cell.
///
/// With probability `division_prob` the daughter goes to a uniformly chosen
/// Moore neighbour without a living cell (no division if there is none). It
/// inherits the signature, mutated with `signature_flip_prob`, and the
/// resistance modifier verbatim.
pub fn divide_cell<R: Rng + ?Sized>(
    world: &mut GridWorld,
    cell: CellId,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Option<CellId> {
    let parent = world.cell(cell).clone();
    if !parent.alive || parent.kind != CellKind::Cancer {
        return None;
    }
    if rng.random::<f64>() >= cfg.division_prob {
        return None;
    }
    let free = world.empty_neighbours(parent.position);
    if free.is_empty() {
        return None;
    }
    let target = free[rng.random_range(0..free.len())];
    let mut daughter = parent.clone();
    mutate_cc_signature(&mut daughter, cfg.signature_flip_prob, rng).expect("parent is a cancer cell");
    let id = world.place_cell(
        CellKind::Cancer,
        daughter.signature,
        parent.resistance,
        target,
        Some(parent.founder),
    );
    world.counters.divisions += 1;
    Some(id)
}

/// One growth step: every cancer cell alive at the start of the step gets
/// one division attempt, in id order.
pub fn grow_tumour(world: &mut GridWorld, cfg: &EvolutionConfig) -> usize {
    let living: Vec<CellId> = world
        .cells
        .iter()
        .filter(|c| c.alive && c.kind == CellKind::Cancer)
        .map(|c| c.id)
        .collect();
    let mut rng = world.rng.clone();
    let born = living
        .into_iter()
        .filter(|&id| divide_cell(world, id, cfg, &mut rng).is_some())
        .count();
    world.rng = rng;
    born
}

/// Per-step signature drift of every living cancer cell.
pub fn drift_signatures(world: &mut GridWorld, flip_prob: f64) {
    let GridWorld { cells, rng, .. } = world;
    for c in cells.iter_mut().filter(|c| c.alive && c.kind == CellKind::Cancer) {
        mutate_cc_signature(c, flip_prob, rng).expect("filtered to cancer cells");
    }
}

/// Zeroes kill counters (per-round fitness window).
pub fn reset_fitness(population: &mut [NanoAgent]) {
    for a in population {
        a.cc_killed = 0;
        a.hc_killed = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::rng::rng_from_seed;
    use crate::kinetics::AgentState;
    use crate::world::{init_world, Position, VisibleSignature};
    use proptest::prelude::*;

    fn agent(id: AgentId, cc: u64, hc: u64, g: NanoAgentGenome) -> NanoAgent {
        let mut a = NanoAgent::new(id, g, Position::new(id as usize % 7, 0), 4);
        a.cc_killed = cc;
        a.hc_killed = hc;
        a
    }

    fn g(x: f64) -> NanoAgentGenome {
        NanoAgentGenome::new(2, x, x, x, x)
    }

    #[test]
    fn fitness_is_cc_minus_hc() {
        assert_eq!(local_fitness(&agent(0, 3, 1, g(0.1))), 2);
        assert_eq!(local_fitness(&agent(0, 0, 0, g(0.1))), 0);
        assert_eq!(local_fitness(&agent(0, 0, 4, g(0.1))), -4);
    }

    #[test]
    fn neutral_round_keeps_genomes() {
        let mut pop: Vec<NanoAgent> = (0..10).map(|i| agent(i, 1, 0, g(i as f64 / 10.0))).collect();
        let before: Vec<_> = pop.iter().map(|a| a.genome).collect();
        let cfg = EvolutionConfig {
            mutation_sigma: 0.0,
            ..EvolutionConfig::default()
        };
        let mut next = 100;
        let n = selection_mutation_round(&mut pop, &cfg, 3, || { next += 1; next }, &mut rng_from_seed(1));
        assert_eq!(n, 0);
        assert_eq!(pop.iter().map(|a| a.genome).collect::<Vec<_>>(), before);
    }

    #[test]
    fn replaces_floor_fraction() {
        let mut pop: Vec<NanoAgent> = (0..10).map(|i| agent(i, i as u64, 0, g(i as f64 / 10.0))).collect();
        let cfg = EvolutionConfig::default();
        let mut next = 100;
        let n = selection_mutation_round(&mut pop, &cfg, 3, || { next += 1; next }, &mut rng_from_seed(2));
        assert_eq!(n, 2);
        assert_eq!(pop.len(), 10);
        // Agents 0 and 1 (fitness 0, 1) were replaced in place.
        for slot in [0, 1] {
            assert!(pop[slot].id > 100);
            assert_eq!(pop[slot].state, AgentState::Free);
            assert_eq!((pop[slot].cc_killed, pop[slot].hc_killed), (0, 0));
            assert!(pop[slot].memory.is_empty());
            assert_eq!(pop[slot].position, Position::new(slot, 0));
        }
        assert!(pop[2..].iter().all(|a| a.id < 100));
    }

    #[test]
    fn null_mutation_copies_a_top_genome() {
        let mut pop: Vec<NanoAgent> = (0..10).map(|i| agent(i, i as u64, 0, g(i as f64 / 10.0))).collect();
        let cfg = EvolutionConfig {
            mutation_sigma: 0.0,
            ..EvolutionConfig::default()
        };
        let mut next = 100;
        selection_mutation_round(&mut pop, &cfg, 3, || { next += 1; next }, &mut rng_from_seed(3));
        for slot in [0, 1] {
            assert!(pop[slot].genome == g(0.9) || pop[slot].genome == g(0.8));
        }
    }

    #[test]
    fn tiny_population_is_untouched() {
        let mut pop = vec![agent(0, 0, 5, g(0.2))];
        let n = selection_mutation_round(&mut pop, &EvolutionConfig::default(), 3, || 9, &mut rng_from_seed(0));
        assert_eq!(n, 0);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let genome = NanoAgentGenome::new(2, 0.3, 0.4, 0.5, 0.6);
        assert_eq!(mutate_genome(&genome, 0.0, 3, &mut rng_from_seed(4)), genome);
    }

    #[test]
    fn mutation_clips_to_unit_interval() {
        let genome = NanoAgentGenome::new(3, 0.98, 0.02, 1.0, 0.0);
        let mut rng = rng_from_seed(5);
        for _ in 0..1000 {
            let m = mutate_genome(&genome, 0.5, 3, &mut rng);
            m.validate(3).unwrap();
        }
    }

    #[test]
    fn signature_flip_extremes() {
        let mut rng = rng_from_seed(6);
        let sig = VisibleSignature::new(0b1011_0010, 8);
        let mut c = CellAgent::new(0, CellKind::Cancer, sig, None, Position::new(0, 0));
        mutate_cc_signature(&mut c, 0.0, &mut rng).unwrap();
        assert_eq!(c.signature, sig);
        mutate_cc_signature(&mut c, 1.0, &mut rng).unwrap();
        assert_eq!(c.signature.bits(), 0b0100_1101);
    }

    #[test]
    fn healthy_signature_mutation_is_rejected() {
        let mut c = CellAgent::new(0, CellKind::Healthy, VisibleSignature::zeros(8), None, Position::new(0, 0));
        assert!(mutate_cc_signature(&mut c, 0.5, &mut rng_from_seed(0)).is_err());
    }

    fn cfg_world(cc: usize, hc: usize) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.world.width = 12;
        cfg.world.height = 12;
        cfg.world.cc_count = cc;
        cfg.world.hc_count = hc;
        cfg
    }

    #[test]
    fn resistant_daughter_inherits_modifier() {
        let mut cfg = cfg_world(1, 0);
        cfg.evolution.resistance_fraction = 1.0;
        cfg.evolution.division_prob = 1.0;
        let mut world = init_world(&cfg, 8).unwrap();
        let parent_mod = world.cells[0].resistance.expect("single cell is resistant");
        let mut rng = rng_from_seed(8);
        let d = divide_cell(&mut world, 0, &cfg.evolution, &mut rng).unwrap();
        assert_eq!(world.cell(d).resistance, Some(parent_mod));
        assert_eq!(world.cell(d).founder, 0);
        world.check_site_uniqueness().unwrap();
    }

    #[test]
    fn no_room_no_division() {
        let mut cfg = cfg_world(1, 8);
        // An odd grid puts the first cell on the exact centre, ringed by the rest.
        cfg.world.width = 11;
        cfg.world.height = 11;
        cfg.evolution.division_prob = 1.0;
        let mut world = init_world(&cfg, 9).unwrap();
        let mut rng = rng_from_seed(9);
        assert!(world.empty_neighbours(world.cells[0].position).is_empty());
        assert!(divide_cell(&mut world, 0, &cfg.evolution, &mut rng).is_none());
    }

    #[test]
    fn zero_division_probability_never_divides() {
        let mut cfg = cfg_world(20, 0);
        cfg.evolution.division_prob = 0.0;
        let mut world = init_world(&cfg, 10).unwrap();
        for _ in 0..100 {
            assert_eq!(grow_tumour(&mut world, &cfg.evolution), 0);
        }
    }

    #[test]
    fn resistance_assignment_counts() {
        let cfg = EvolutionConfig::default();
        let mut rng = rng_from_seed(11);
        let mut cells: Vec<CellAgent> = (0..200)
            .map(|i| CellAgent::new(i, CellKind::Cancer, VisibleSignature::zeros(8), None, Position::new(0, 0)))
            .collect();
        let mut refs: Vec<&mut CellAgent> = cells.iter_mut().collect();
        assign_resistance(&mut refs, &cfg, &mut rng);
        assert_eq!(cells.iter().filter(|c| c.resistance.is_some()).count(), 20);
        let mut empty: Vec<&mut CellAgent> = Vec::new();
        assign_resistance(&mut empty, &cfg, &mut rng);
    }

    proptest! {
        #[test]
        fn mutated_genomes_stay_in_domain(
            seed in 0u64..10_000,
            sigma in 0.0f64..1.0,
            rounds in 1usize..50,
            speed in 1u32..=3,
            p in prop::array::uniform4(0.0f64..=1.0),
        ) {
            let mut rng = rng_from_seed(seed);
            let mut genome = NanoAgentGenome::new(speed, p[0], p[1], p[2], p[3]);
            for _ in 0..rounds {
                genome = mutate_genome(&genome, sigma, 3, &mut rng);
                prop_assert!(genome.validate(3).is_ok());
            }
        }

        #[test]
        fn selection_preserves_population_size(
            seed in 0u64..10_000,
            fitness in prop::collection::vec((0u64..5, 0u64..3), 0..40),
            frac in 0.01f64..=0.5,
        ) {
            let mut pop: Vec<NanoAgent> = fitness.iter().enumerate().map(|(i, &(c, h))| agent(i as AgentId, c, h, g(0.5))).collect();
            let n = pop.len();
            let cfg = EvolutionConfig { replace_fraction: frac, ..EvolutionConfig::default() };
            let mut next = 1000;
            let replaced = selection_mutation_round(&mut pop, &cfg, 3, || { next += 1; next }, &mut rng_from_seed(seed));
            prop_assert_eq!(pop.len(), n);
            prop_assert!(replaced <= (frac * n as f64).floor() as usize);
        }

        #[test]
        fn equal_fitness_null_mutation_is_invariant(
            seed in 0u64..10_000,
            genomes in prop::collection::vec(0.0f64..1.0, 2..30),
            f in 0u64..5,
        ) {
            let mut pop: Vec<NanoAgent> = genomes.iter().enumerate().map(|(i, &x)| agent(i as AgentId, f, 0, g(x))).collect();
            let cfg = EvolutionConfig { mutation_sigma: 0.0, ..EvolutionConfig::default() };
            let mut before: Vec<f64> = pop.iter().map(|a| a.genome.p_a).collect();
            selection_mutation_round(&mut pop, &cfg, 3, || 0, &mut rng_from_seed(seed));
            let mut after: Vec<f64> = pop.iter().map(|a| a.genome.p_a).collect();
            before.sort_by(f64::total_cmp);
            after.sort_by(f64::total_cmp);
            prop_assert_eq!(before, after);
        }
    }
}
