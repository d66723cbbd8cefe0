//! Subcommand implementations: run, collect, and write every artifact.
//!
//! Replicates may run on several threads, but all files are written here
//! by the calling thread once every replicate has finished, in replicate
//! order, so outputs are byte-identical for a given config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::evolution::local_fitness;
use crate::kinetics::NanoAgentGenome;
use crate::replicate::{replicate_seeds, run_replicates};
use crate::report;
use crate::runner::{run_learning, run_simulation, RunStats, SimStepRecord, TreatmentOutcome};
use crate::ssa::{self, analysis, Trajectory};
use crate::stats;
use crate::unitmap::KineticConstants;
use crate::world::{AgentId, NanoAgent};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Integration step of the mean-field cross-check written by `validate`.
const MEANFIELD_DT_S: f64 = 10.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub replicate_seeds: Vec<u64>,
    pub config: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genomes: Option<Vec<NanoAgentGenome>>,
}

impl RunManifest {
    fn new(command: &str, config: &SimConfig) -> Self {
        Self {
            command: command.to_owned(),
            version: VERSION.to_owned(),
            master_seed: config.master_seed,
            replicate_seeds: replicate_seeds(config.master_seed, config.replicates),
            config: config.clone(),
            genomes: None,
        }
    }
}

fn prepare_out(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
}

fn check_replicates(config: &SimConfig) -> Result<()> {
    if config.replicates == 0 {
        return Err(Error::config("replicates", "must be at least 1"));
    }
    Ok(())
}

/// Long-format CSV with a leading `replicate` column.
fn write_replicated_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[(usize, &T)]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(std::iter::once("replicate").chain(header.iter().copied()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const RUN_STATS_HEADER: &[&str] = &[
    "step",
    "alive_cc",
    "alive_hc",
    "free",
    "bound",
    "internalized",
    "cc_killed_step",
    "hc_killed_step",
    "divisions_step",
    "mean_speed",
    "std_speed",
    "mean_p_a",
    "std_p_a",
    "mean_p_d",
    "std_p_d",
    "mean_p_i",
    "std_p_i",
    "mean_p_k",
    "std_p_k",
    "best_fitness",
    "median_fitness",
];

const SIM_STEP_HEADER: &[&str] = &[
    "step",
    "time_s",
    "alive_cc",
    "alive_hc",
    "injected",
    "circulating_free",
    "bound",
    "internalized_total",
    "cleared",
    "cc_killed_total",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub replicate: usize,
    pub id: AgentId,
    pub genome: NanoAgentGenome,
    pub cc_killed: u64,
    pub hc_killed: u64,
    pub fitness: i64,
}

/// Contents of `final_population.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalPopulation {
    /// The `simulation.top_k` fittest agents across all replicates.
    pub top_performers: Vec<NanoAgentGenome>,
    pub agents: Vec<AgentRecord>,
}

/// Fittest `k` records; ties broken by replicate, then agent id.
pub fn pooled_top(agents: &[AgentRecord], k: usize) -> Vec<NanoAgentGenome> {
    let mut order: Vec<&AgentRecord> = agents.iter().collect();
    order.sort_by(|a, b| {
        b.fitness
            .cmp(&a.fitness)
            .then(a.replicate.cmp(&b.replicate))
            .then(a.id.cmp(&b.id))
    });
    order.into_iter().take(k).map(|a| a.genome).collect()
}

#[derive(Clone, Debug)]
pub struct LearnSummary {
    pub files: Vec<PathBuf>,
    pub best_fitness: Vec<i64>,
}

pub fn cmd_learn(config: &SimConfig, out_dir: &Path, jobs: Option<usize>) -> Result<LearnSummary> {
    config.validate()?;
    check_replicates(config)?;
    prepare_out(out_dir)?;
    let runs = run_replicates(config.master_seed, config.replicates, jobs, |_, seed| {
        run_learning(config, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let stats_path = out_dir.join("stats.csv");
    let rows: Vec<(usize, &RunStats)> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, run)| run.stats.iter().map(move |s| (r, s)))
        .collect();
    write_replicated_csv(&stats_path, RUN_STATS_HEADER, &rows)?;

    let agents: Vec<AgentRecord> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, run)| run.population.iter().map(move |a| agent_record(r, a)))
        .collect();
    let population = FinalPopulation {
        top_performers: pooled_top(&agents, config.simulation.top_k.min(agents.len())),
        agents,
    };
    let pop_path = out_dir.join("final_population.json");
    report::write_json(&pop_path, &population)?;

    let manifest_path = out_dir.join("run_manifest.json");
    report::write_json(&manifest_path, &RunManifest::new("learn", config))?;

    let fitness_path = out_dir.join("fitness.svg");
    report::write_text(&fitness_path, &fitness_svg(&runs.iter().map(|r| &r.stats[..]).collect::<Vec<_>>()))?;

    let hist_path = out_dir.join("param_hist.svg");
    report::write_text(&hist_path, &param_hist_svg(&population.agents, config))?;

    Ok(LearnSummary {
        files: vec![stats_path, pop_path, manifest_path, fitness_path, hist_path],
        best_fitness: runs
            .iter()
            .map(|r| r.population.iter().map(local_fitness).max().unwrap_or(0))
            .collect(),
    })
}

fn agent_record(replicate: usize, a: &NanoAgent) -> AgentRecord {
    AgentRecord {
        replicate,
        id: a.id,
        genome: a.genome,
        cc_killed: a.cc_killed,
        hc_killed: a.hc_killed,
        fitness: local_fitness(a),
    }
}

fn fitness_svg(runs: &[&[RunStats]]) -> String {
    let first = runs.first().copied().unwrap_or(&[]);
    let pts = |f: fn(&RunStats) -> f64| first.iter().map(|s| (s.step as f64, f(s))).collect::<Vec<_>>();
    let mut series = vec![
        ("best (replicate 0)", pts(|s| s.best_fitness as f64)),
        ("median (replicate 0)", pts(|s| s.median_fitness)),
    ];
    if runs.len() > 1 {
        let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
        let mean_best = (0..len)
            .map(|i| {
                let xs: Vec<f64> = runs.iter().map(|r| r[i].best_fitness as f64).collect();
                (runs[0][i].step as f64, stats::mean(&xs))
            })
            .collect();
        series.push(("best (replicate mean)", mean_best));
    }
    report::line_chart_svg("Local fitness during learning", "step", "CC killed - HC killed", &series)
}

fn param_hist_svg(agents: &[AgentRecord], config: &SimConfig) -> String {
    let col = |f: fn(&NanoAgentGenome) -> f64| agents.iter().map(|a| f(&a.genome)).collect::<Vec<_>>();
    let speed_hi = config.kinetics.speed_max as f64 + 1.0;
    report::histograms_svg(
        "Final genome distribution",
        &[
            ("speed", col(|g| g.speed as f64), [1.0, speed_hi]),
            ("p_a", col(|g| g.p_a), [0.0, 1.0]),
            ("p_d", col(|g| g.p_d), [0.0, 1.0]),
            ("p_i", col(|g| g.p_i), [0.0, 1.0]),
            ("p_k", col(|g| g.p_k), [0.0, 1.0]),
        ],
        20,
    )
}

/// Reads genomes from a `final_population.json` (its `top_performers`) or
/// from a bare JSON list of genomes.
pub fn load_genomes(path: &Path) -> Result<Vec<NanoAgentGenome>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let list = match value {
        serde_json::Value::Object(mut map) => map.remove("top_performers").ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "expected a genome list or an object with `top_performers`".into(),
        })?,
        other => other,
    };
    serde_json::from_value(list).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub total_dose: u64,
    pub cc_initial: u64,
    pub cc_final: u64,
    pub hc_initial: u64,
    pub hc_final: u64,
    pub kill_fraction_cc: f64,
}

impl ReplicateOutcome {
    fn new(replicate: usize, seed: u64, o: &TreatmentOutcome) -> Self {
        Self {
            replicate,
            seed,
            total_dose: o.total_dose,
            cc_initial: o.cc_initial,
            cc_final: o.cc_final,
            hc_initial: o.hc_initial,
            hc_final: o.hc_final,
            kill_fraction_cc: o.kill_fraction_cc,
        }
    }
}

/// Contents of `outcome.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub total_dose: u64,
    /// Median over replicates.
    pub kill_fraction_cc: f64,
    pub replicates: Vec<ReplicateOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoseResponseRow {
    pub total_dose: u64,
    pub replicates: usize,
    pub median_kill_fraction_cc: f64,
    pub mean_kill_fraction_cc: f64,
    pub min_kill_fraction_cc: f64,
    pub max_kill_fraction_cc: f64,
}

fn simulate_all(
    config: &SimConfig,
    genomes: &[NanoAgentGenome],
    jobs: Option<usize>,
) -> Result<Vec<TreatmentOutcome>> {
    run_replicates(config.master_seed, config.replicates, jobs, |_, seed| {
        run_simulation(config, genomes, seed)
    })
    .into_iter()
    .collect()
}

pub fn cmd_simulate(
    config: &SimConfig,
    genomes: &[NanoAgentGenome],
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<OutcomeReport> {
    config.validate()?;
    check_replicates(config)?;
    if genomes.is_empty() {
        return Err(Error::Argument("genome list is empty".into()));
    }
    prepare_out(out_dir)?;
    let seeds = replicate_seeds(config.master_seed, config.replicates);
    let outcomes = simulate_all(config, genomes, jobs)?;

    let summaries: Vec<ReplicateOutcome> = outcomes
        .iter()
        .enumerate()
        .map(|(r, o)| ReplicateOutcome::new(r, seeds[r], o))
        .collect();
    let kf: Vec<f64> = summaries.iter().map(|s| s.kill_fraction_cc).collect();
    let report_ = OutcomeReport {
        total_dose: config.simulation.total_dose,
        kill_fraction_cc: stats::median(&kf),
        replicates: summaries,
    };
    report::write_json(&out_dir.join("outcome.json"), &report_)?;

    let rows: Vec<(usize, &SimStepRecord)> = outcomes
        .iter()
        .enumerate()
        .flat_map(|(r, o)| o.series.iter().map(move |s| (r, s)))
        .collect();
    write_replicated_csv(&out_dir.join("timeseries.csv"), SIM_STEP_HEADER, &rows)?;

    if !config.simulation.dose_sweep.is_empty() {
        let mut table = Vec::new();
        for &dose in &config.simulation.dose_sweep {
            let mut cfg = config.clone();
            cfg.simulation.total_dose = dose;
            let kf: Vec<f64> = simulate_all(&cfg, genomes, jobs)?
                .iter()
                .map(|o| o.kill_fraction_cc)
                .collect();
            table.push(DoseResponseRow {
                total_dose: dose,
                replicates: kf.len(),
                median_kill_fraction_cc: stats::median(&kf),
                mean_kill_fraction_cc: stats::mean(&kf),
                min_kill_fraction_cc: kf.iter().copied().fold(f64::INFINITY, f64::min),
                max_kill_fraction_cc: kf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        report::write_csv(&out_dir.join("dose_response.csv"), &table)?;
    }

    let mut manifest = RunManifest::new("simulate", config);
    manifest.genomes = Some(genomes.to_vec());
    report::write_json(&out_dir.join("run_manifest.json"), &manifest)?;
    Ok(report_)
}

/// Contents of `depth.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub t_end_s: f64,
    pub threshold_fraction: f64,
    /// Per replicate; `null` where the wall compartment holds no signal.
    pub depths: Vec<Option<usize>>,
    pub median_depth: Option<f64>,
    /// Depth of the mean-field solution.
    pub meanfield_depth: Option<usize>,
    /// Replicate 0, per compartment.
    pub kill_report: Vec<bool>,
    pub np_internal: Vec<u64>,
    /// Every compartment with internalized particles is killed, in every
    /// replicate.
    pub internalized_cells_killed: bool,
}

#[derive(Serialize)]
struct AggregateRow {
    time_s: f64,
    compartment: usize,
    np_free_mean: f64,
    receptors_free_mean: f64,
    complexes_mean: f64,
    np_internal_mean: f64,
    alive_fraction: f64,
}

fn write_aggregate(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = trajs.len() as f64;
    let first = &trajs[0];
    for (k, &t) in first.times.iter().enumerate() {
        for c in 0..first.states[k].len() {
            let mean = |f: fn(&ssa::Snapshot, usize) -> f64| trajs.iter().map(|tr| f(&tr.states[k], c)).sum::<f64>() / n;
            w.serialize(AggregateRow {
                time_s: t,
                compartment: c,
                np_free_mean: mean(|s, c| s.np_free[c]),
                receptors_free_mean: mean(|s, c| s.receptors_free[c]),
                complexes_mean: mean(|s, c| s.complexes[c]),
                np_internal_mean: mean(|s, c| s.np_internal[c]),
                alive_fraction: mean(|s, c| if s.cell_alive[c] { 1.0 } else { 0.0 }),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn optional_depth(result: Result<usize>) -> Result<Option<usize>> {
    match result {
        Ok(d) => Ok(Some(d)),
        Err(Error::UndefinedDepth) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn cmd_validate(config: &SimConfig, out_dir: &Path, jobs: Option<usize>) -> Result<DepthReport> {
    config.validate()?;
    check_replicates(config)?;
    prepare_out(out_dir)?;
    let v = &config.validation;
    let chain = ssa::build_chain(v, &config.units)?;
    let runs = run_replicates(config.master_seed, config.replicates, jobs, |_, seed| {
        let mut ch = chain.clone();
        let traj = ssa::run_ssa(&mut ch, v.t_end_s, v.sample_dt_s, &mut crate::rng::rng_from_seed(seed))?;
        Ok((ch, traj))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    report::write_trajectory_csv(&out_dir.join("trajectory.csv"), &runs[0].1)?;
    if runs.len() > 1 {
        let dir = out_dir.join("trajectories");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (r, (_, traj)) in runs.iter().enumerate() {
            report::write_trajectory_csv(&dir.join(format!("rep_{r:03}.csv")), traj)?;
        }
        let trajs: Vec<Trajectory> = runs.iter().map(|(_, t)| t.clone()).collect();
        write_aggregate(&out_dir.join("aggregate.csv"), &trajs)?;
    }
    report::write_text(
        &out_dir.join("penetration.svg"),
        &report::penetration_heatmap_svg("Bound + internalized particles by compartment", &runs[0].1),
    )?;

    let depths = runs
        .iter()
        .map(|(_, t)| optional_depth(ssa::penetration_depth(t, v.threshold_fraction)))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = depths.iter().flatten().map(|&d| d as f64).collect();
    let ode = ssa::meanfield_ode(&chain, v.t_end_s, MEANFIELD_DT_S, v.sample_dt_s)?;
    let internalized_cells_killed = runs.iter().all(|(ch, _)| {
        ch.np_internal
            .iter()
            .zip(ssa::kill_report(ch))
            .all(|(&n, killed)| n == 0 || killed)
    });
    let depth = DepthReport {
        t_end_s: v.t_end_s,
        threshold_fraction: v.threshold_fraction,
        median_depth: (!defined.is_empty()).then(|| stats::median(&defined)),
        depths,
        meanfield_depth: optional_depth(ssa::penetration_depth(&ode, v.threshold_fraction))?,
        kill_report: analysis::kill_report(&runs[0].0),
        np_internal: runs[0].0.np_internal.clone(),
        internalized_cells_killed,
    };
    report::write_json(&out_dir.join("depth.json"), &depth)?;
    report::write_json(&out_dir.join("run_manifest.json"), &RunManifest::new("validate", config))?;
    Ok(depth)
}

/// Maps probabilities to physical constants, writes `units.json`, and
/// returns the constants with a printable table.
pub fn cmd_map_units(
    p_a: f64,
    p_d: f64,
    p_i: f64,
    config: &SimConfig,
    out_dir: Option<&Path>,
) -> Result<(KineticConstants, String)> {
    let k = KineticConstants::from_probabilities(p_a, p_d, p_i, &config.units)?;
    let rows = [
        ("step duration".to_owned(), k.step_duration, "s".to_owned()),
        ("NA concentration".to_owned(), k.na_molar, "M".to_owned()),
        (format!("ka (p_a = {p_a})"), k.ka, format!("1/(M s)  [{:?} 1e4..1e6]", k.ka_flag)),
        ("ka per step".to_owned(), k.ka_particles_per_step, "particles/step".to_owned()),
        (format!("kd (p_d = {p_d})"), k.kd, "1/s".to_owned()),
        (format!("ki (p_i = {p_i})"), k.ki, "1/s".to_owned()),
    ];
    let mut table = format!("{:<24} {:<14} {}\n", "quantity", "value", "unit");
    for (name, value, unit) in rows {
        table.push_str(&format!("{name:<24} {:<14} {unit}\n", format!("{value:.6e}")));
    }
    if let Some(dir) = out_dir {
        prepare_out(dir)?;
        report::write_json(&dir.join("units.json"), &k)?;
    }
    Ok((k, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(replicate: usize, id: AgentId, fitness: i64, p_a: f64) -> AgentRecord {
        AgentRecord {
            replicate,
            id,
            genome: NanoAgentGenome::new(1, p_a, 0.0, 0.0, 0.0),
            cc_killed: fitness.max(0) as u64,
            hc_killed: 0,
            fitness,
        }
    }

    #[test]
    fn pooled_ranking_breaks_ties_by_replicate_then_id() {
        let agents = [rec(1, 0, 3, 0.1), rec(0, 5, 3, 0.2), rec(0, 2, 3, 0.3), rec(0, 1, 9, 0.4)];
        let top: Vec<f64> = pooled_top(&agents, 3).iter().map(|g| g.p_a).collect();
        assert_eq!(top, vec![0.4, 0.3, 0.2]);
    }

    #[test]
    fn genomes_from_either_format() {
        let dir = tempfile::tempdir().unwrap();
        let g = NanoAgentGenome::new(2, 0.1, 0.2, 0.3, 0.4);
        let bare = dir.path().join("bare.json");
        report::write_json(&bare, &vec![g]).unwrap();
        assert_eq!(load_genomes(&bare).unwrap(), vec![g]);
        let pop = dir.path().join("pop.json");
        report::write_json(&pop, &FinalPopulation { top_performers: vec![g, g], agents: vec![] }).unwrap();
        assert_eq!(load_genomes(&pop).unwrap().len(), 2);
        let bad = dir.path().join("bad.json");
        fs::write(&bad, "{\"x\": 1}").unwrap();
        assert!(matches!(load_genomes(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn map_units_table_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let (k, table) = cmd_map_units(0.3, 1.0, 0.5, &SimConfig::default(), Some(dir.path())).unwrap();
        assert!((k.ka / 361.0 - 1.0).abs() < 5e-3);
        assert!(table.contains("Below"));
        assert!(dir.path().join("units.json").exists());
        assert!(cmd_map_units(1.3, 0.0, 0.0, &SimConfig::default(), None).is_err());
    }
}
