//! Learning mode, simulation mode, and the injection / clearance schedule.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EntrySites, FitnessWindow, KineticsConfig, SignatureDrift, SimConfig};
use crate::error::{Error, Result};
use crate::evolution::{
    drift_signatures, grow_tumour, local_fitness, rank_by_fitness, reset_fitness, selection_mutation_round,
};
use crate::kinetics::{
    attempt_kill, effective_rates, kinetic_step, post_internalization_state, AgentState, KineticEvent, Mode,
    NanoAgentGenome,
};
use crate::stats;
use crate::unitmap;
use crate::world::{init_world, CellKind, GridWorld, NanoAgent, Position, WorldCounters};

/// Events produced by one sweep over the agents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub associations: u64,
    pub dissociations: u64,
    pub internalizations: u64,
    pub cc_killed: u64,
    pub hc_killed: u64,
}

fn advance_agent(world: &mut GridWorld, idx: usize, kin: &KineticsConfig, mode: Mode, ev: &mut StepEvents) {
    match world.agents[idx].state {
        AgentState::Free => {
            let pos = world.move_agent(idx);
            let Some(cell) = world.living_cell_at(pos) else {
                return;
            };
            let (cell_id, sig, modifier) = (cell.id, cell.signature, cell.resistance);
            let agent = &mut world.agents[idx];
            let familiar = agent.memory.is_familiar(&sig);
            if !familiar {
                agent.memory.memorize(sig).expect("unfamiliar signature is absent from memory");
            }
            let rates = effective_rates(
                &agent.genome,
                familiar,
                kin.curiosity,
                modifier.as_ref(),
                &kin.resistance_policy,
            );
            let (next, event) = kinetic_step(AgentState::Free, Some(cell_id), &rates, &mut world.rng);
            world.agents[idx].state = next;
            if event == Some(KineticEvent::Associated) {
                ev.associations += 1;
            }
        }
        AgentState::Bound(cell_id) => {
            let cell = world.cell(cell_id);
            if !cell.alive {
                world.agents[idx].state = AgentState::Free;
                ev.dissociations += 1;
                return;
            }
            let modifier = cell.resistance;
            let rates = effective_rates(
                &world.agents[idx].genome,
                true,
                kin.curiosity,
                modifier.as_ref(),
                &kin.resistance_policy,
            );
            let (next, event) = kinetic_step(AgentState::Bound(cell_id), Some(cell_id), &rates, &mut world.rng);
            world.agents[idx].state = next;
            match event {
                Some(KineticEvent::Internalized) => {
                    ev.internalizations += 1;
                    world.counters.internalizations += 1;
                }
                Some(KineticEvent::Dissociated) => ev.dissociations += 1,
                _ => {}
            }
        }
        AgentState::Internalized(cell_id) => {
            let GridWorld {
                agents,
                cells,
                rng,
                counters,
                ..
            } = world;
            let agent = &mut agents[idx];
            let cell = &mut cells[cell_id as usize];
            if !cell.alive {
                agent.state = post_internalization_state(mode);
                return;
            }
            let rates = effective_rates(
                &agent.genome,
                true,
                kin.curiosity,
                cell.resistance.as_ref(),
                &kin.resistance_policy,
            );
            let killed = attempt_kill(agent, cell, rates.pk_eff, mode, rng).expect("agent is internalized in a living cell");
            if killed {
                match cell.kind {
                    CellKind::Cancer => {
                        ev.cc_killed += 1;
                        counters.cc_killed += 1;
                    }
                    CellKind::Healthy => {
                        ev.hc_killed += 1;
                        counters.hc_killed += 1;
                    }
                }
            }
        }
        AgentState::Spent => {}
    }
}

/// Advances every agent by one step, in population order.
pub fn step_agents(world: &mut GridWorld, kin: &KineticsConfig, mode: Mode) -> StepEvents {
    let mut ev = StepEvents::default();
    for idx in 0..world.agents.len() {
        advance_agent(world, idx, kin, mode, &mut ev);
    }
    ev
}

fn tumour_dynamics(world: &mut GridWorld, config: &SimConfig, growth: bool) -> u64 {
    let born = if growth { grow_tumour(world, &config.evolution) as u64 } else { 0 };
    if config.evolution.signature_drift == SignatureDrift::PerStep {
        drift_signatures(world, config.evolution.signature_flip_prob);
    }
    born
}

/// Per-step learning-mode record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub step: u64,
    pub alive_cc: u64,
    pub alive_hc: u64,
    pub free: u64,
    pub bound: u64,
    pub internalized: u64,
    pub cc_killed_step: u64,
    pub hc_killed_step: u64,
    pub divisions_step: u64,
    pub mean_speed: f64,
    pub std_speed: f64,
    pub mean_p_a: f64,
    pub std_p_a: f64,
    pub mean_p_d: f64,
    pub std_p_d: f64,
    pub mean_p_i: f64,
    pub std_p_i: f64,
    pub mean_p_k: f64,
    pub std_p_k: f64,
    pub best_fitness: i64,
    pub median_fitness: f64,
}

impl RunStats {
    fn capture(world: &GridWorld, step: u64, ev: &StepEvents, born: u64) -> Self {
        let agents = &world.agents;
        let count = |pred: fn(&AgentState) -> bool| agents.iter().filter(|a| pred(&a.state)).count() as u64;
        let column = |f: fn(&NanoAgentGenome) -> f64| agents.iter().map(|a| f(&a.genome)).collect::<Vec<_>>();
        let speed = column(|g| g.speed as f64);
        let p_a = column(|g| g.p_a);
        let p_d = column(|g| g.p_d);
        let p_i = column(|g| g.p_i);
        let p_k = column(|g| g.p_k);
        let fitness: Vec<i64> = agents.iter().map(local_fitness).collect();
        RunStats {
            step,
            alive_cc: world.alive_count(CellKind::Cancer) as u64,
            alive_hc: world.alive_count(CellKind::Healthy) as u64,
            free: count(|s| matches!(s, AgentState::Free)),
            bound: count(|s| matches!(s, AgentState::Bound(_))),
            internalized: count(|s| matches!(s, AgentState::Internalized(_))),
            cc_killed_step: ev.cc_killed,
            hc_killed_step: ev.hc_killed,
            divisions_step: born,
            mean_speed: stats::mean(&speed),
            std_speed: stats::std_dev(&speed),
            mean_p_a: stats::mean(&p_a),
            std_p_a: stats::std_dev(&p_a),
            mean_p_d: stats::mean(&p_d),
            std_p_d: stats::std_dev(&p_d),
            mean_p_i: stats::mean(&p_i),
            std_p_i: stats::std_dev(&p_i),
            mean_p_k: stats::mean(&p_k),
            std_p_k: stats::std_dev(&p_k),
            best_fitness: fitness.iter().copied().max().unwrap_or(0),
            median_fitness: stats::median_i64(&fitness),
        }
    }
}

/// Draws one genome uniformly from the configured initial ranges.
pub fn sample_initial_genome<R: Rng + ?Sized>(kin: &KineticsConfig, rng: &mut R) -> NanoAgentGenome {
    let r = &kin.initial_genome;
    let mut draw = |[lo, hi]: [f64; 2]| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let (p_a, p_d, p_i, p_k) = (draw(r.p_a), draw(r.p_d), draw(r.p_i), draw(r.p_k));
    NanoAgentGenome {
        speed: rng.random_range(r.speed[0]..=r.speed[1]),
        p_a,
        p_d,
        p_i,
        p_k,
    }
}

#[derive(Clone, Debug)]
pub struct LearningRun {
    pub stats: Vec<RunStats>,
    pub population: Vec<NanoAgent>,
    pub counters: WorldCounters,
}

/// Builds the learning world: cells from [`init_world`], then
/// `world.agent_count` agents with sampled genomes on random sites.
pub fn init_learning_world(config: &SimConfig, seed: u64) -> Result<GridWorld> {
    let mut world = init_world(config, seed)?;
    let genomes: Vec<NanoAgentGenome> = (0..config.world.agent_count)
        .map(|_| sample_initial_genome(&config.kinetics, &mut world.rng))
        .collect();
    world.populate_random(&genomes);
    Ok(world)
}

/// Advances a learning world by one step and returns its record.
///
/// Order within a step: agent sweep, tumour growth and drift, record, then a
/// selection round when the step count reaches a multiple of the period.
pub fn learning_step(world: &mut GridWorld, config: &SimConfig) -> RunStats {
    let step = world.step_index;
    let ev = step_agents(world, &config.kinetics, Mode::Learning);
    let born = tumour_dynamics(world, config, config.evolution.tumour_growth);
    let record = RunStats::capture(world, step, &ev, born);
    world.step_index += 1;
    if world.step_index.is_multiple_of(config.evolution.round_period) {
        let GridWorld {
            agents,
            rng,
            next_agent_id,
            ..
        } = world;
        selection_mutation_round(
            agents,
            &config.evolution,
            config.kinetics.speed_max,
            || {
                let id = *next_agent_id;
                *next_agent_id += 1;
                id
            },
            rng,
        );
        if config.evolution.fitness_window == FitnessWindow::PerRound {
            reset_fitness(agents);
        }
    }
    record
}

/// Open-ended evolution for `learning.steps` steps.
pub fn run_learning(config: &SimConfig, seed: u64) -> Result<LearningRun> {
    let mut world = init_learning_world(config, seed)?;
    let mut stats = Vec::with_capacity(config.learning.steps as usize);
    for _ in 0..config.learning.steps {
        stats.push(learning_step(&mut world, config));
    }
    Ok(LearningRun {
        stats,
        population: world.agents,
        counters: world.counters,
    })
}

/// The `k` fittest genomes, ties broken by ascending agent id.
pub fn top_performers(population: &[NanoAgent], k: usize) -> Result<Vec<NanoAgentGenome>> {
    if k > population.len() {
        return Err(Error::Argument(format!(
            "requested {k} top performers from a population of {}",
            population.len()
        )));
    }
    Ok(rank_by_fitness(population)
        .into_iter()
        .take(k)
        .map(|i| population[i].genome)
        .collect())
}

/// Injection and clearance timing of a single dose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub total_dose: u64,
    pub ramp_steps: u64,
    pub decline_steps: u64,
    pub step_duration_s: f64,
}

impl Schedule {
    pub fn from_config(config: &SimConfig) -> Self {
        Self {
            total_dose: config.simulation.total_dose,
            ramp_steps: config.simulation.ramp_steps,
            decline_steps: config.simulation.decline_steps,
            step_duration_s: unitmap::configured_step_duration(&config.units),
        }
    }
}

/// Agents injected at `step`: the dose split evenly over the ramp, with the
/// remainder going one each to the earliest steps.
pub fn injection_count(step: u64, sched: &Schedule) -> u64 {
    if step >= sched.ramp_steps {
        return 0;
    }
    let base = sched.total_dose / sched.ramp_steps;
    let extra = sched.total_dose % sched.ramp_steps;
    base + u64::from(step < extra)
}

/// Free-agent ceiling during the decline: linear from `peak` at the end of
/// the ramp down to zero at `ramp_steps + decline_steps`, rounded half up.
pub fn clearance_cap(step: u64, peak: u64, sched: &Schedule) -> u64 {
    let end = sched.ramp_steps + sched.decline_steps;
    if step >= end || sched.decline_steps == 0 {
        return 0;
    }
    let remaining = (end - step.max(sched.ramp_steps)) as u128;
    let d = sched.decline_steps as u128;
    ((2 * peak as u128 * remaining + d) / (2 * d)) as u64
}

/// Per-step simulation-mode record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStepRecord {
    pub step: u64,
    pub time_s: f64,
    pub alive_cc: u64,
    pub alive_hc: u64,
    pub injected: u64,
    pub circulating_free: u64,
    pub bound: u64,
    /// Cumulative internalization events.
    pub internalized_total: u64,
    pub cleared: u64,
    pub cc_killed_total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentOutcome {
    pub total_dose: u64,
    pub cc_initial: u64,
    pub cc_final: u64,
    pub hc_initial: u64,
    pub hc_final: u64,
    pub kill_fraction_cc: f64,
    pub series: Vec<SimStepRecord>,
}

fn entry_site(world: &mut GridWorld, entry: EntrySites) -> Position {
    let (h, w) = (world.height(), world.width());
    let candidates: Vec<Position> = match entry {
        EntrySites::Border => (0..h)
            .flat_map(|r| (0..w).map(move |c| Position::new(r, c)))
            .filter(|p| p.row == 0 || p.col == 0 || p.row == h - 1 || p.col == w - 1)
            .collect(),
        EntrySites::LeftEdge => (0..h).map(|r| Position::new(r, 0)).collect(),
    };
    let open: Vec<Position> = candidates.iter().copied().filter(|&p| !world.has_living_cell(p)).collect();
    let pool = if open.is_empty() { &candidates } else { &open };
    pool[world.rng.random_range(0..pool.len())]
}

/// Removes uniformly chosen free agents until at most `cap` remain.
fn clear_excess(world: &mut GridWorld, cap: u64) -> u64 {
    let free: Vec<usize> = world
        .agents
        .iter()
        .enumerate()
        .filter(|(_, a)| a.state == AgentState::Free)
        .map(|(i, _)| i)
        .collect();
    let excess = (free.len() as u64).saturating_sub(cap) as usize;
    if excess == 0 {
        return 0;
    }
    let mut remove = vec![false; world.agents.len()];
    for k in sample(&mut world.rng, free.len(), excess) {
        remove[free[k]] = true;
    }
    let mut i = 0;
    world.agents.retain(|_| {
        let keep = !remove[i];
        i += 1;
        keep
    });
    excess as u64
}

fn count_state(world: &GridWorld, pred: impl Fn(&AgentState) -> bool) -> u64 {
    world.agents.iter().filter(|a| pred(&a.state)).count() as u64
}

/// Treatment evaluation with fixed genomes.
///
/// Each step: inject, advance agents (consumed after internalization), grow
/// the tumour, then, from `ramp_steps` on, clear free agents above
/// [`clearance_cap`]. The peak is the free count at the end of the ramp.
pub fn run_simulation(config: &SimConfig, genomes: &[NanoAgentGenome], seed: u64) -> Result<TreatmentOutcome> {
    if genomes.is_empty() {
        return Err(Error::Argument("simulation needs at least one genome".into()));
    }
    for g in genomes {
        g.validate(config.kinetics.speed_max)?;
    }
    let mut world = init_world(config, seed)?;
    let sched = Schedule::from_config(config);
    let sim = &config.simulation;
    let cc_initial = world.alive_count(CellKind::Cancer) as u64;
    let hc_initial = world.alive_count(CellKind::Healthy) as u64;
    let mut peak = 0;
    let mut series = Vec::new();

    for step in 0..sim.total_steps() {
        let injected = injection_count(step, &sched);
        for _ in 0..injected {
            let pos = entry_site(&mut world, sim.entry);
            let genome = genomes[world.rng.random_range(0..genomes.len())];
            world.spawn_agent(genome, pos);
        }
        step_agents(&mut world, &config.kinetics, Mode::Simulation);
        tumour_dynamics(&mut world, config, sim.tumour_growth);
        if step + 1 == sched.ramp_steps {
            peak = count_state(&world, |s| *s == AgentState::Free);
        }
        let cleared = if step >= sched.ramp_steps {
            clear_excess(&mut world, clearance_cap(step, peak, &sched))
        } else {
            0
        };
        world.step_index += 1;
        series.push(SimStepRecord {
            step,
            time_s: (step + 1) as f64 * sched.step_duration_s,
            alive_cc: world.alive_count(CellKind::Cancer) as u64,
            alive_hc: world.alive_count(CellKind::Healthy) as u64,
            injected,
            circulating_free: count_state(&world, |s| *s == AgentState::Free),
            bound: count_state(&world, |s| matches!(s, AgentState::Bound(_))),
            internalized_total: world.counters.internalizations,
            cleared,
            cc_killed_total: world.counters.cc_killed,
        });
    }

    let cc_final = world.alive_count(CellKind::Cancer) as u64;
    let kill_fraction_cc = if cc_initial > 0 {
        (cc_initial as f64 - cc_final as f64) / cc_initial as f64
    } else {
        0.0
    };
    Ok(TreatmentOutcome {
        total_dose: sched.total_dose,
        cc_initial,
        cc_final,
        hc_initial,
        hc_final: world.alive_count(CellKind::Healthy) as u64,
        kill_fraction_cc,
        series,
    })
}
