//! Nano-agent / cell interaction kinetics.
//!
//! A free nano-agent co-located with a living cell may associate with one of
//! its receptors, forming a complex. A complex either dissociates (the agent
//! becomes free again) or is internalized, which releases the receptor. An
//! internalized agent gets one chance to kill its host cell.
//!
//! ```text
//! NA_f + R  <-- p_a, p_d -->  C  -- p_i -->  NA_i + R
//! ```
//!
//! All functions here are pure over an explicit RNG.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{CellAgent, CellId, CellKind, NanoAgent};

/// Evolvable per-lineage interaction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NanoAgentGenome {
    /// Sites per step, at least 1.
    pub speed: u32,
    pub p_a: f64,
    pub p_d: f64,
    pub p_i: f64,
    pub p_k: f64,
}

impl NanoAgentGenome {
    pub fn new(speed: u32, p_a: f64, p_d: f64, p_i: f64, p_k: f64) -> Self {
        Self {
            speed,
            p_a,
            p_d,
            p_i,
            p_k,
        }
    }

    pub fn probabilities(&self) -> [f64; 4] {
        [self.p_a, self.p_d, self.p_i, self.p_k]
    }

    pub fn validate(&self, speed_max: u32) -> Result<()> {
        if self.speed < 1 || self.speed > speed_max {
            return Err(Error::Domain(format!(
                "genome speed {} outside [1, {speed_max}]",
                self.speed
            )));
        }
        for (name, p) in [("p_a", self.p_a), ("p_d", self.p_d), ("p_i", self.p_i), ("p_k", self.p_k)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("genome {name}={p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Interaction parameter a resistance modifier acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateTarget {
    #[serde(rename = "p_a")]
    Association,
    #[serde(rename = "p_d")]
    Dissociation,
    #[serde(rename = "p_i")]
    Internalization,
    #[serde(rename = "p_k")]
    Killing,
}

impl RateTarget {
    pub const ALL: [RateTarget; 4] = [
        RateTarget::Association,
        RateTarget::Dissociation,
        RateTarget::Internalization,
        RateTarget::Killing,
    ];
}

/// Per-cell perturbation of one interaction parameter, strength in `[0.30, 0.80]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResistanceModifier {
    pub target: RateTarget,
    pub strength: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceDirection {
    /// Multiply by `1 - strength`.
    Reduce,
    /// Multiply by `1 + strength`, clipped to 1.
    Increase,
}

impl ResistanceDirection {
    fn apply(self, p: f64, strength: f64) -> f64 {
        match self {
            ResistanceDirection::Reduce => p * (1.0 - strength),
            ResistanceDirection::Increase => p * (1.0 + strength),
        }
        .clamp(0.0, 1.0)
    }
}

/// Direction in which a modifier moves each target. The default is
/// detrimental to the nano-agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistancePolicy {
    pub p_a: ResistanceDirection,
    pub p_d: ResistanceDirection,
    pub p_i: ResistanceDirection,
    pub p_k: ResistanceDirection,
}

impl Default for ResistancePolicy {
    fn default() -> Self {
        Self {
            p_a: ResistanceDirection::Reduce,
            p_d: ResistanceDirection::Increase,
            p_i: ResistanceDirection::Reduce,
            p_k: ResistanceDirection::Reduce,
        }
    }
}

impl ResistancePolicy {
    pub fn direction(&self, target: RateTarget) -> ResistanceDirection {
        match target {
            RateTarget::Association => self.p_a,
            RateTarget::Dissociation => self.p_d,
            RateTarget::Internalization => self.p_i,
            RateTarget::Killing => self.p_k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveRates {
    pub pa_eff: f64,
    pub pd_eff: f64,
    pub pi_eff: f64,
    pub pk_eff: f64,
}

/// Interaction probabilities seen by `genome` at a particular cell.
///
/// Unfamiliar cells scale association by `curiosity`; a resistance modifier
/// then moves its single target in the direction given by `policy`.
pub fn effective_rates(
    genome: &NanoAgentGenome,
    familiar: bool,
    curiosity: f64,
    modifier: Option<&ResistanceModifier>,
    policy: &ResistancePolicy,
) -> EffectiveRates {
    let mut rates = EffectiveRates {
        pa_eff: genome.p_a * if familiar { 1.0 } else { curiosity },
        pd_eff: genome.p_d,
        pi_eff: genome.p_i,
        pk_eff: genome.p_k,
    };
    if let Some(m) = modifier {
        let dir = policy.direction(m.target);
        let slot = match m.target {
            RateTarget::Association => &mut rates.pa_eff,
            RateTarget::Dissociation => &mut rates.pd_eff,
            RateTarget::Internalization => &mut rates.pi_eff,
            RateTarget::Killing => &mut rates.pk_eff,
        };
        *slot = dir.apply(*slot, m.strength);
    }
    rates.pa_eff = rates.pa_eff.clamp(0.0, 1.0);
    rates
}

/// Interaction state of a nano-agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentState {
    Free,
    Bound(CellId),
    Internalized(CellId),
    /// Consumed after internalization (simulation mode only).
    Spent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KineticEvent {
    Associated,
    Dissociated,
    Internalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Agents recycle to `Free` after an internalization.
    Learning,
    /// Agents are consumed after an internalization.
    Simulation,
}

/// Weights of the (internalize, dissociate) exits from the bound state,
/// rescaled proportionally when their sum exceeds one.
pub fn bound_exit_weights(rates: &EffectiveRates) -> (f64, f64) {
    let (pi, pd) = (rates.pi_eff, rates.pd_eff);
    let sum = pi + pd;
    if sum > 1.0 {
        (pi / sum, pd / sum)
    } else {
        (pi, pd)
    }
}

/// One step of the association / dissociation / internalization chain.
///
/// `contact` is the living cell sharing the agent's site, if any. A free agent
/// without contact stays free; internalized and spent agents are left alone
/// (see [`attempt_kill`]).
pub fn kinetic_step<R: Rng + ?Sized>(
    state: AgentState,
    contact: Option<CellId>,
    rates: &EffectiveRates,
    rng: &mut R,
) -> (AgentState, Option<KineticEvent>) {
    match state {
        AgentState::Free => match contact {
            Some(cell) if rng.random::<f64>() < rates.pa_eff => {
                (AgentState::Bound(cell), Some(KineticEvent::Associated))
            }
            _ => (AgentState::Free, None),
        },
        AgentState::Bound(cell) => {
            let (w_int, w_diss) = bound_exit_weights(rates);
            let u = rng.random::<f64>();
            if u < w_int {
                (AgentState::Internalized(cell), Some(KineticEvent::Internalized))
            } else if u < w_int + w_diss {
                (AgentState::Free, Some(KineticEvent::Dissociated))
            } else {
                (state, None)
            }
        }
        AgentState::Internalized(_) | AgentState::Spent => (state, None),
    }
}

/// State an agent takes after its post-internalization kill attempt.
pub fn post_internalization_state(mode: Mode) -> AgentState {
    match mode {
        Mode::Learning => AgentState::Free,
        Mode::Simulation => AgentState::Spent,
    }
}

/// One Bernoulli(`pk_eff`) kill trial by an internalized agent on its host.
///
/// On success the cell dies and the agent's kill counter for the cell's kind
/// is incremented. The agent leaves the internalized state either way.
pub fn attempt_kill<R: Rng + ?Sized>(
    agent: &mut NanoAgent,
    cell: &mut CellAgent,
    pk_eff: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<bool> {
    if agent.state != AgentState::Internalized(cell.id) {
        return Err(Error::Contract(format!(
            "agent {} is not internalized in cell {}",
            agent.id, cell.id
        )));
    }
    if !cell.alive {
        return Err(Error::Contract(format!("cell {} is already dead", cell.id)));
    }
    let killed = rng.random::<f64>() < pk_eff;
    if killed {
        cell.alive = false;
        match cell.kind {
            CellKind::Cancer => agent.cc_killed += 1,
            CellKind::Healthy => agent.hc_killed += 1,
        }
    }
    agent.state = post_internalization_state(mode);
    Ok(killed)
}
