use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nanoevo_core::commands::{self, load_genomes};
use nanoevo_core::SimConfig;

/// Evolvable nano-agent drug delivery: learning, treatment simulation,
/// compartment-chain validation and unit mapping.
#[derive(Parser, Debug)]
#[command(name = "nanoevo", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config, or a run_manifest.json from an earlier run. Built-in
    /// defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `replicates`.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Maximum worker threads for replicates.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Open-ended evolution of the nano-agent population.
    Learn {
        /// Overrides `learning.steps`.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Single-dose treatment with fixed genomes.
    Simulate {
        /// final_population.json from `learn`, or a JSON list of genomes.
        #[arg(long, value_name = "PATH")]
        genomes: PathBuf,
        /// Overrides `simulation.total_dose`.
        #[arg(long)]
        dose: Option<u64>,
    },
    /// Stochastic compartment-chain penetration run.
    Validate,
    /// Converts per-step probabilities to physical rate constants.
    MapUnits(MapUnits),
}

#[derive(Args, Debug)]
struct MapUnits {
    #[arg(long, default_value_t = 0.0)]
    pa: f64,
    #[arg(long, default_value_t = 0.0)]
    pd: f64,
    #[arg(long, default_value_t = 0.0)]
    pi: f64,
    /// Diffusion coefficient, cm²/s.
    #[arg(long)]
    diffusion: Option<f64>,
    /// Cell diameter, cm.
    #[arg(long)]
    diameter: Option<f64>,
    /// Particles represented by one agent.
    #[arg(long)]
    particles: Option<f64>,
    /// Step duration in seconds, bypassing the diffusive derivation.
    #[arg(long)]
    step_s: Option<f64>,
}

fn load_config(common: &Common) -> Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(path) => SimConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => SimConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = common.replicates {
        cfg.replicates = r;
    }
    Ok(cfg)
}

fn finish(cfg: &SimConfig) -> Result<SimConfig> {
    cfg.validate()?;
    Ok(cfg.clone())
}

fn report_files(out: &Path, names: &[&str]) {
    for n in names {
        println!("wrote {}", out.join(n).display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let mut cfg = load_config(common)?;
    match cli.command {
        Command::Learn { steps } => {
            if let Some(s) = steps {
                cfg.learning.steps = s;
            }
            let cfg = finish(&cfg)?;
            let summary = commands::cmd_learn(&cfg, &common.out, common.jobs)?;
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            println!("final best fitness per replicate: {:?}", summary.best_fitness);
        }
        Command::Simulate { genomes, dose } => {
            if let Some(d) = dose {
                cfg.simulation.total_dose = d;
            }
            let cfg = finish(&cfg)?;
            let pool = load_genomes(&genomes).with_context(|| format!("loading genomes {}", genomes.display()))?;
            let outcome = commands::cmd_simulate(&cfg, &pool, &common.out, common.jobs)?;
            let mut files = vec!["outcome.json", "timeseries.csv", "run_manifest.json"];
            if !cfg.simulation.dose_sweep.is_empty() {
                files.push("dose_response.csv");
            }
            report_files(&common.out, &files);
            println!(
                "dose {}: CC kill fraction {:.4} (median of {})",
                outcome.total_dose,
                outcome.kill_fraction_cc,
                outcome.replicates.len()
            );
        }
        Command::Validate => {
            let cfg = finish(&cfg)?;
            let depth = commands::cmd_validate(&cfg, &common.out, common.jobs)?;
            let mut files = vec!["trajectory.csv", "penetration.svg", "depth.json", "run_manifest.json"];
            if cfg.replicates > 1 {
                files.extend(["trajectories/", "aggregate.csv"]);
            }
            report_files(&common.out, &files);
            match depth.median_depth {
                Some(d) => println!("median penetration depth: {d} cells"),
                None => println!("penetration depth undefined: no signal at the wall"),
            }
        }
        Command::MapUnits(m) => {
            let u = &mut cfg.units;
            if let Some(d) = m.diffusion {
                u.diffusion_cm2_s = d;
            }
            if let Some(d) = m.diameter {
                u.cell_diameter_cm = d;
            }
            if let Some(p) = m.particles {
                u.particles_per_na = p;
            }
            if m.step_s.is_some() {
                u.step_duration_s = m.step_s;
            }
            let (_, table) = commands::cmd_map_units(m.pa, m.pd, m.pi, &cfg, Some(&common.out))?;
            print!("{table}");
            report_files(&common.out, &["units.json"]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
