//! Run configuration.
//!
//! A [`SimConfig`] is a nested key-value document (TOML on disk) with one
//! section per subsystem. Every key has a default, every key is range-checked
//! by [`SimConfig::validate`], and unknown keys are rejected at parse time.
//! A `run_manifest.json` written by a previous run is also accepted as a
//! config source; its `config` object is used verbatim.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::ResistancePolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub master_seed: u64,
    pub replicates: usize,
    pub world: WorldConfig,
    pub kinetics: KineticsConfig,
    pub evolution: EvolutionConfig,
    pub learning: LearningConfig,
    pub simulation: SimulationConfig,
    pub units: UnitsConfig,
    pub validation: ValidationConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            master_seed: 2021,
            replicates: 1,
            world: WorldConfig::default(),
            kinetics: KineticsConfig::default(),
            evolution: EvolutionConfig::default(),
            learning: LearningConfig::default(),
            simulation: SimulationConfig::default(),
            units: UnitsConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

/// Grid geometry and populations.
///
/// Cancer cells fill the `cc_count` sites closest to the grid centre (a
/// disk); healthy cells fill the next `hc_count` sites (an annulus).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub width: usize,
    pub height: usize,
    pub cc_count: usize,
    pub hc_count: usize,
    pub signature_bits: u8,
    pub memory_capacity: usize,
    /// Learning-mode nano-agent population size.
    pub agent_count: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            cc_count: 200,
            hc_count: 400,
            signature_bits: 8,
            memory_capacity: 4,
            agent_count: 200,
        }
    }
}

/// Sampling ranges of the initial learning population. Each parameter is
/// drawn uniformly and independently from its closed range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenomeRanges {
    pub speed: [u32; 2],
    pub p_a: [f64; 2],
    pub p_d: [f64; 2],
    pub p_i: [f64; 2],
    pub p_k: [f64; 2],
}

impl Default for GenomeRanges {
    fn default() -> Self {
        Self {
            speed: [1, 3],
            p_a: [0.0, 1.0],
            p_d: [0.0, 1.0],
            p_i: [0.0, 1.0],
            p_k: [0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticsConfig {
    /// Association multiplier for cells absent from an agent's memory.
    pub curiosity: f64,
    pub speed_max: u32,
    pub resistance_policy: ResistancePolicy,
    pub initial_genome: GenomeRanges,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        Self {
            curiosity: 0.5,
            speed_max: 3,
            resistance_policy: ResistancePolicy::default(),
            initial_genome: GenomeRanges::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureDrift {
    /// Signature bits mutate only in daughters at division.
    Division,
    /// Additionally, every living cancer cell drifts every step.
    PerStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessWindow {
    Cumulative,
    /// Kill counters reset after every selection round.
    PerRound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub round_period: u64,
    pub replace_fraction: f64,
    pub mutation_sigma: f64,
    pub signature_flip_prob: f64,
    pub division_prob: f64,
    pub resistance_fraction: f64,
    pub resistance_strength_range: [f64; 2],
    pub signature_drift: SignatureDrift,
    pub fitness_window: FitnessWindow,
    /// Whether cancer cells divide during learning mode.
    pub tumour_growth: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            round_period: 10,
            replace_fraction: 0.2,
            mutation_sigma: 0.05,
            signature_flip_prob: 0.02,
            division_prob: 0.001,
            resistance_fraction: 0.10,
            resistance_strength_range: [0.30, 0.80],
            signature_drift: SignatureDrift::Division,
            fitness_window: FitnessWindow::Cumulative,
            tumour_growth: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub steps: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self { steps: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrySites {
    /// Uniformly random border sites not holding a living cell.
    Border,
    /// Uniformly random sites of column 0 not holding a living cell.
    LeftEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Nano-agents injected over the ramp phase. The default is calibrated so
    /// that top learning-mode genomes remove a few percent of the tumour.
    pub total_dose: u64,
    pub ramp_steps: u64,
    pub decline_steps: u64,
    /// Steps to simulate; defaults to `ramp_steps + decline_steps + 1`.
    pub steps: Option<u64>,
    pub entry: EntrySites,
    /// Number of top learning-mode genomes injected.
    pub top_k: usize,
    /// Off by default so the outcome counts drug kills only.
    pub tumour_growth: bool,
    /// When non-empty, `simulate` also runs a dose-response sweep.
    pub dose_sweep: Vec<u64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            total_dose: 22_400,
            ramp_steps: 14,
            decline_steps: 72,
            steps: None,
            entry: EntrySites::Border,
            top_k: 10,
            tumour_growth: false,
            dose_sweep: Vec::new(),
        }
    }
}

impl SimulationConfig {
    pub fn total_steps(&self) -> u64 {
        self.steps.unwrap_or(self.ramp_steps + self.decline_steps + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsConfig {
    pub diffusion_cm2_s: f64,
    pub cell_diameter_cm: f64,
    pub particles_per_na: f64,
    /// `d^2 = factor * D * t`; 2 reproduces the 5000 s step.
    pub msd_dimension_factor: f64,
    /// Overrides the diffusion-derived step duration.
    pub step_duration_s: Option<f64>,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self {
            diffusion_cm2_s: 1e-10,
            cell_diameter_cm: 1e-3,
            particles_per_na: 1e5,
            msd_dimension_factor: 2.0,
            step_duration_s: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Bolus,
    Source,
}

/// Compartment-chain validation run. Rates come from the listed
/// probabilities through the unit map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_compartments: usize,
    pub receptors_per_cell: u64,
    pub boundary: BoundaryKind,
    /// Particles placed in compartment 0 (bolus) or held there (source).
    pub dose_particles: u64,
    pub kill_threshold: u64,
    pub t_end_s: f64,
    pub sample_dt_s: f64,
    pub threshold_fraction: f64,
    pub p_a: f64,
    pub p_d: f64,
    pub p_i: f64,
    /// Multiplies the mapped association constant.
    pub ka_scale: f64,
    pub hop_rate_override: Option<f64>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            n_compartments: 22,
            receptors_per_cell: 10_000,
            boundary: BoundaryKind::Bolus,
            dose_particles: 100_000,
            kill_threshold: 1,
            t_end_s: 11.0 * 3600.0,
            sample_dt_s: 600.0,
            threshold_fraction: 0.02,
            p_a: 0.3,
            p_d: 0.1,
            p_i: 0.5,
            ka_scale: 1.0,
            hop_rate_override: None,
        }
    }
}

fn check(ok: bool, key: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, reason()))
    }
}

fn check_prob(key: &str, p: f64) -> Result<()> {
    check((0.0..=1.0).contains(&p), key, || format!("{p} is not a probability in [0, 1]"))
}

fn check_prob_range(key: &str, r: [f64; 2]) -> Result<()> {
    check_prob(key, r[0])?;
    check_prob(key, r[1])?;
    check(r[0] <= r[1], key, || format!("range [{}, {}] is reversed", r[0], r[1]))
}

fn check_positive(key: &str, x: f64) -> Result<()> {
    check(x.is_finite() && x > 0.0, key, || format!("{x} must be finite and > 0"))
}

impl SimConfig {
    /// Reads a TOML config, or a JSON run manifest / config document.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: SimConfig = if is_json {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        } else {
            Self::from_toml_str(&text).map_err(|e| match e {
                Error::Parse { message, .. } => Error::Parse {
                    path: path.to_path_buf(),
                    message,
                },
                other => other,
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(self.replicates >= 1, "replicates", || "must be at least 1".into())?;
        check(w.width >= 8, "world.width", || format!("{} is below the minimum of 8", w.width))?;
        check(w.height >= 8, "world.height", || format!("{} is below the minimum of 8", w.height))?;
        let sites = w.width * w.height;
        check(w.cc_count <= sites, "world.cc_count", || format!("{} exceeds {sites} grid sites", w.cc_count))?;
        check(w.cc_count + w.hc_count <= sites, "world.hc_count", || {
            format!("cc_count + hc_count = {} exceeds {sites} grid sites", w.cc_count + w.hc_count)
        })?;
        check((1..=64).contains(&w.signature_bits), "world.signature_bits", || {
            format!("{} outside [1, 64]", w.signature_bits)
        })?;
        check(w.memory_capacity >= 1, "world.memory_capacity", || "must be at least 1".into())?;

        let k = &self.kinetics;
        check(k.curiosity > 0.0 && k.curiosity <= 1.0, "kinetics.curiosity", || {
            format!("{} outside (0, 1]", k.curiosity)
        })?;
        check(k.speed_max >= 1, "kinetics.speed_max", || "must be at least 1".into())?;
        let g = &k.initial_genome;
        check(
            g.speed[0] >= 1 && g.speed[0] <= g.speed[1] && g.speed[1] <= k.speed_max,
            "kinetics.initial_genome.speed",
            || format!("range {:?} must lie within [1, speed_max={}]", g.speed, k.speed_max),
        )?;
        check_prob_range("kinetics.initial_genome.p_a", g.p_a)?;
        check_prob_range("kinetics.initial_genome.p_d", g.p_d)?;
        check_prob_range("kinetics.initial_genome.p_i", g.p_i)?;
        check_prob_range("kinetics.initial_genome.p_k", g.p_k)?;

        let e = &self.evolution;
        check(e.round_period >= 1, "evolution.round_period", || "must be at least 1".into())?;
        check(e.replace_fraction > 0.0 && e.replace_fraction <= 0.5, "evolution.replace_fraction", || {
            format!("{} outside (0, 0.5]", e.replace_fraction)
        })?;
        check(e.mutation_sigma >= 0.0 && e.mutation_sigma.is_finite(), "evolution.mutation_sigma", || {
            format!("{} must be finite and >= 0", e.mutation_sigma)
        })?;
        check_prob("evolution.signature_flip_prob", e.signature_flip_prob)?;
        check_prob("evolution.division_prob", e.division_prob)?;
        check_prob("evolution.resistance_fraction", e.resistance_fraction)?;
        let r = e.resistance_strength_range;
        check(
            0.30 <= r[0] && r[0] <= r[1] && r[1] <= 0.80,
            "evolution.resistance_strength_range",
            || format!("{r:?} must lie within [0.30, 0.80]"),
        )?;

        let s = &self.simulation;
        check(s.ramp_steps >= 1, "simulation.ramp_steps", || "must be at least 1".into())?;
        check(s.top_k >= 1, "simulation.top_k", || "must be at least 1".into())?;

        let u = &self.units;
        check_positive("units.diffusion_cm2_s", u.diffusion_cm2_s)?;
        check_positive("units.cell_diameter_cm", u.cell_diameter_cm)?;
        check_positive("units.particles_per_na", u.particles_per_na)?;
        check_positive("units.msd_dimension_factor", u.msd_dimension_factor)?;
        if let Some(dt) = u.step_duration_s {
            check_positive("units.step_duration_s", dt)?;
        }

        let v = &self.validation;
        check(v.n_compartments >= 1, "validation.n_compartments", || "must be at least 1".into())?;
        check_positive("validation.t_end_s", v.t_end_s)?;
        check_positive("validation.sample_dt_s", v.sample_dt_s)?;
        check(
            v.threshold_fraction > 0.0 && v.threshold_fraction <= 1.0,
            "validation.threshold_fraction",
            || format!("{} outside (0, 1]", v.threshold_fraction),
        )?;
        check_prob("validation.p_a", v.p_a)?;
        check_prob("validation.p_d", v.p_d)?;
        check_prob("validation.p_i", v.p_i)?;
        check(v.ka_scale.is_finite() && v.ka_scale >= 0.0, "validation.ka_scale", || {
            format!("{} must be finite and >= 0", v.ka_scale)
        })?;
        if let Some(h) = v.hop_rate_override {
            check(h.is_finite() && h >= 0.0, "validation.hop_rate_override", || {
                format!("{h} must be finite and >= 0")
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_of_defaults() {
        let text = SimConfig::default().to_toml_string();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), SimConfig::default());
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg = SimConfig::from_toml_str("master_seed = 9\n[world]\nwidth = 20\n").unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.world.width, 20);
        assert_eq!(cfg.world.height, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(SimConfig::from_toml_str("[world]\nwidht = 20\n").is_err());
        assert!(SimConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let mut cfg = SimConfig::default();
        cfg.world.width = 4;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("world.width"), "{msg}");

        let mut cfg = SimConfig::default();
        cfg.world.hc_count = 2500;
        assert!(cfg.validate().unwrap_err().to_string().contains("world.hc_count"));

        let mut cfg = SimConfig::default();
        cfg.evolution.replace_fraction = 0.6;
        assert!(cfg.validate().unwrap_err().to_string().contains("evolution.replace_fraction"));

        let mut cfg = SimConfig::default();
        cfg.kinetics.curiosity = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("kinetics.curiosity"));
    }

    #[test]
    fn shipped_default_config_matches_built_in_defaults() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
        let cfg = SimConfig::load(Path::new(path)).unwrap();
        assert_eq!(cfg, SimConfig::default());
    }
}
