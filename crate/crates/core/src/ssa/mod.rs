//! One-dimensional compartment-chain reaction-diffusion validator.
//!
//! A chain of well-mixed cubic compartments, one cell wide each, runs from
//! the vessel wall (compartment 0) into tissue. Each compartment holds one
//! cell's receptors and follows
//!
//! ```text
//! NP + R <-> C -> NP_int + R
//! ```
//!
//! while free particles hop between neighbouring compartments. The exact
//! stochastic engine lives in [`direct`], its deterministic mean-field
//! counterpart in [`meanfield`], and depth/kill analytics in [`analysis`].

pub mod analysis;
pub mod direct;
pub mod meanfield;

pub use analysis::{kill_report, penetration_depth, signal};
pub use direct::{run_ssa, DirectMethod, ReactionSystem};
pub use meanfield::meanfield_ode;

use serde::{Deserialize, Serialize};

use crate::config::{BoundaryKind, UnitsConfig, ValidationConfig};
use crate::error::{Error, Result};
use crate::unitmap;

/// Boundary condition at compartment 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// A single injection of this many free particles at t = 0.
    Bolus(u64),
    /// Free particles at compartment 0 are held at this level.
    Source(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRates {
    /// Per particle-receptor pair, 1/s.
    pub ka_stoch: f64,
    pub kd: f64,
    pub ki: f64,
    /// Per free particle and direction, 1/s.
    pub k_hop: f64,
}

impl ChainRates {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ka_stoch", self.ka_stoch),
            ("kd", self.kd),
            ("ki", self.ki),
            ("k_hop", self.k_hop),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("rate {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Species counts of every compartment plus the kinetic parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompartmentChain {
    pub np_free: Vec<u64>,
    pub receptors_free: Vec<u64>,
    pub complexes: Vec<u64>,
    pub np_internal: Vec<u64>,
    pub cell_alive: Vec<bool>,
    pub receptors_per_cell: u64,
    pub rates: ChainRates,
    pub boundary: Boundary,
    pub kill_threshold: u64,
}

impl CompartmentChain {
    pub fn new(
        n_compartments: usize,
        receptors_per_cell: u64,
        rates: ChainRates,
        boundary: Boundary,
        kill_threshold: u64,
    ) -> Result<Self> {
        if n_compartments == 0 {
            return Err(Error::config("validation.n_compartments", "must be at least 1"));
        }
        rates.validate()?;
        let mut np_free = vec![0; n_compartments];
        np_free[0] = match boundary {
            Boundary::Bolus(n) | Boundary::Source(n) => n,
        };
        Ok(Self {
            np_free,
            receptors_free: vec![receptors_per_cell; n_compartments],
            complexes: vec![0; n_compartments],
            np_internal: vec![0; n_compartments],
            cell_alive: vec![true; n_compartments],
            receptors_per_cell,
            rates,
            boundary,
            kill_threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.np_free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.np_free.is_empty()
    }

    /// Particles present in the chain (free, bound and internalized).
    pub fn total_particles(&self) -> u64 {
        (0..self.len())
            .map(|i| self.np_free[i] + self.complexes[i] + self.np_internal[i])
            .sum()
    }

    pub fn snapshot(&self) -> Snapshot {
        let f = |v: &[u64]| v.iter().map(|&x| x as f64).collect();
        Snapshot {
            np_free: f(&self.np_free),
            receptors_free: f(&self.receptors_free),
            complexes: f(&self.complexes),
            np_internal: f(&self.np_internal),
            cell_alive: self.cell_alive.clone(),
        }
    }

    /// Whether compartment `i` exchanges particles with `i - 1` / `i + 1`.
    pub(crate) fn hop_directions(&self, i: usize) -> (bool, bool) {
        (i > 0, i + 1 < self.len())
    }
}

/// Builds the chain described by a validation section.
///
/// Rates come from the probabilities through the unit map: `ka` per molar
/// concentration becomes a per-pair rate by dividing by the compartment
/// volume times Avogadro's number, and hops use the one-dimensional lattice
/// rate `D / d²`.
pub fn build_chain(cfg: &ValidationConfig, units: &UnitsConfig) -> Result<CompartmentChain> {
    let kc = unitmap::KineticConstants::from_probabilities(cfg.p_a, cfg.p_d, cfg.p_i, units)?;
    let volume = unitmap::cell_volume_litres(units.cell_diameter_cm)?;
    let ka = kc.ka * cfg.ka_scale;
    let k_hop = match cfg.hop_rate_override {
        Some(k) => k,
        None => units.diffusion_cm2_s / (units.cell_diameter_cm * units.cell_diameter_cm),
    };
    let rates = ChainRates {
        ka_stoch: ka / (volume * unitmap::AVOGADRO),
        kd: kc.kd,
        ki: kc.ki,
        k_hop,
    };
    let boundary = match cfg.boundary {
        BoundaryKind::Bolus => Boundary::Bolus(cfg.dose_particles),
        BoundaryKind::Source => Boundary::Source(cfg.dose_particles),
    };
    CompartmentChain::new(cfg.n_compartments, cfg.receptors_per_cell, rates, boundary, cfg.kill_threshold)
}

/// Species amounts of every compartment at one instant. Stochastic runs
/// store whole numbers; the mean-field oracle stores real amounts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub np_free: Vec<f64>,
    pub receptors_free: Vec<f64>,
    pub complexes: Vec<f64>,
    pub np_internal: Vec<f64>,
    pub cell_alive: Vec<bool>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.np_free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.np_free.is_empty()
    }

    pub fn total_particles(&self) -> f64 {
        (0..self.len())
            .map(|i| self.np_free[i] + self.complexes[i] + self.np_internal[i])
            .sum()
    }
}

/// Sampled states on a strictly increasing time grid starting at zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Snapshot>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Snapshot> {
        self.states.last()
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s >= t - 1e-9 * t.abs().max(1.0))
    }
}

/// `0, dt, 2 dt, …` up to `t_end`, with `t_end` appended when it is not on
/// the grid.
pub(crate) fn sample_times(t_end: f64, sample_dt: f64) -> Result<Vec<f64>> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Argument(format!("t_end must be finite and > 0, got {t_end}")));
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::Argument(format!("sample interval must be finite and > 0, got {sample_dt}")));
    }
    let n = (t_end / sample_dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * sample_dt).collect();
    let last = *times.last().expect("n >= 0");
    if t_end - last > 1e-9 * t_end {
        times.push(t_end);
    }
    Ok(times)
}
