//! Penetration depth and kill analytics on chain states.

use super::{CompartmentChain, Snapshot, Trajectory};
use crate::error::{Error, Result};

/// Bound-plus-internalized particles per compartment.
pub fn signal(state: &Snapshot) -> Vec<f64> {
    state
        .complexes
        .iter()
        .zip(&state.np_internal)
        .map(|(c, i)| c + i)
        .collect()
}

/// Number of compartments, counted from the wall, up to and including the
/// deepest one whose final signal reaches `threshold_fraction` of the wall
/// compartment's.
pub fn penetration_depth(traj: &Trajectory, threshold_fraction: f64) -> Result<usize> {
    if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "threshold fraction must lie in (0, 1], got {threshold_fraction}"
        )));
    }
    let last = traj
        .last()
        .ok_or_else(|| Error::Argument("trajectory has no samples".into()))?;
    depth_of(&signal(last), threshold_fraction)
}

pub(crate) fn depth_of(signal: &[f64], threshold_fraction: f64) -> Result<usize> {
    let wall = *signal.first().ok_or(Error::UndefinedDepth)?;
    if wall <= 0.0 {
        return Err(Error::UndefinedDepth);
    }
    let cut = threshold_fraction * wall;
    Ok(signal.iter().rposition(|&s| s >= cut).expect("the wall meets its own cut") + 1)
}

/// Per compartment: killed iff at least `kill_threshold` particles were
/// internalized there.
pub fn kill_report(chain: &CompartmentChain) -> Vec<bool> {
    kill_flags(&chain.np_internal, chain.kill_threshold)
}

pub fn kill_flags(np_internal: &[u64], kill_threshold: u64) -> Vec<bool> {
    np_internal.iter().map(|&n| n >= kill_threshold).collect()
}
