//! Deterministic rate equations of the chain, integrated with classic RK4.

use super::{sample_times, Boundary, CompartmentChain, Snapshot, Trajectory};
use crate::error::{Error, Result};

/// State layout: four species per compartment, `[F, R, C, I]`.
const SPECIES: usize = 4;

struct Rhs<'a> {
    chain: &'a CompartmentChain,
    source: bool,
}

impl Rhs<'_> {
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let r = &self.chain.rates;
        let n = self.chain.len();
        for i in 0..n {
            let (f, rec, c) = (y[i * SPECIES], y[i * SPECIES + 1], y[i * SPECIES + 2]);
            let bind = r.ka_stoch * f * rec;
            let unbind = r.kd * c;
            let internalize = r.ki * c;
            let mut hop = 0.0;
            if i > 0 {
                hop += r.k_hop * (y[(i - 1) * SPECIES] - f);
            }
            if i + 1 < n {
                hop += r.k_hop * (y[(i + 1) * SPECIES] - f);
            }
            dy[i * SPECIES] = if i == 0 && self.source {
                0.0
            } else {
                -bind + unbind + hop
            };
            dy[i * SPECIES + 1] = -bind + unbind + internalize;
            dy[i * SPECIES + 2] = bind - unbind - internalize;
            dy[i * SPECIES + 3] = internalize;
        }
    }
}

fn snapshot(y: &[f64], threshold: u64) -> Snapshot {
    let col = |k: usize| y.iter().skip(k).step_by(SPECIES).copied().collect::<Vec<f64>>();
    let np_internal = col(3);
    Snapshot {
        np_free: col(0),
        receptors_free: col(1),
        complexes: col(2),
        cell_alive: np_internal.iter().map(|&x| x < threshold as f64).collect(),
        np_internal,
    }
}

/// Integrates the mean-field counterpart of every SSA channel from the
/// chain's current state, with step at most `dt`, sampling every
/// `sample_dt` seconds up to `t_end`.
///
/// Each sample interval is split into `ceil(interval / dt)` equal steps so
/// samples land exactly on the grid. A non-finite state is reported as a
/// numerical error.
pub fn meanfield_ode(chain: &CompartmentChain, t_end: f64, dt: f64, sample_dt: f64) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Argument(format!("integration step must be finite and > 0, got {dt}")));
    }
    let times = sample_times(t_end, sample_dt)?;
    let n = chain.len();
    let rhs = Rhs {
        chain,
        source: matches!(chain.boundary, Boundary::Source(_)),
    };
    let mut y = vec![0.0; n * SPECIES];
    for i in 0..n {
        y[i * SPECIES] = chain.np_free[i] as f64;
        y[i * SPECIES + 1] = chain.receptors_free[i] as f64;
        y[i * SPECIES + 2] = chain.complexes[i] as f64;
        y[i * SPECIES + 3] = chain.np_internal[i] as f64;
    }
    let dim = y.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);

    let mut states = vec![snapshot(&y, chain.kill_threshold)];
    for w in times.windows(2) {
        let interval = w[1] - w[0];
        let steps = (interval / dt).ceil().max(1.0) as usize;
        let h = interval / steps as f64;
        for _ in 0..steps {
            rhs.eval(&y, &mut k1);
            for j in 0..dim {
                tmp[j] = y[j] + 0.5 * h * k1[j];
            }
            rhs.eval(&tmp, &mut k2);
            for j in 0..dim {
                tmp[j] = y[j] + 0.5 * h * k2[j];
            }
            rhs.eval(&tmp, &mut k3);
            for j in 0..dim {
                tmp[j] = y[j] + h * k3[j];
            }
            rhs.eval(&tmp, &mut k4);
            for j in 0..dim {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        if let Some(j) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "state component {j} became non-finite by t = {}; reduce the step {dt}",
                w[1]
            )));
        }
        states.push(snapshot(&y, chain.kill_threshold));
    }
    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssa::ChainRates;
    use approx::assert_relative_eq;

    fn rates(ka: f64, kd: f64, ki: f64, hop: f64) -> ChainRates {
        ChainRates { ka_stoch: ka, kd, ki, k_hop: hop }
    }

    #[test]
    fn inert_state_is_constant() {
        let c = CompartmentChain::new(3, 20, rates(0.0, 0.0, 0.0, 0.0), Boundary::Bolus(50), 1).unwrap();
        let traj = meanfield_ode(&c, 100.0, 1.0, 10.0).unwrap();
        assert!(traj.states.iter().all(|s| *s == traj.states[0]));
    }

    #[test]
    fn pseudo_first_order_half_life() {
        let (ka, r0) = (1e-6, 1_000_000);
        let c = CompartmentChain::new(1, r0, rates(ka, 0.0, 0.0, 0.0), Boundary::Bolus(10), 1).unwrap();
        let half = std::f64::consts::LN_2 / (ka * r0 as f64);
        let traj = meanfield_ode(&c, half, 1e-3, half).unwrap();
        assert_relative_eq!(traj.last().unwrap().np_free[0], 5.0, max_relative = 1e-3);
    }

    #[test]
    fn step_halving_converges() {
        let c = CompartmentChain::new(5, 500, rates(2e-7, 5e-5, 5e-5, 1e-4), Boundary::Bolus(2000), 1).unwrap();
        let a = meanfield_ode(&c, 4e4, 100.0, 1e4).unwrap();
        let b = meanfield_ode(&c, 4e4, 50.0, 1e4).unwrap();
        let (sa, sb) = (a.last().unwrap(), b.last().unwrap());
        for i in 0..5 {
            for (x, y) in [
                (sa.np_free[i], sb.np_free[i]),
                (sa.complexes[i], sb.complexes[i]),
                (sa.np_internal[i], sb.np_internal[i]),
            ] {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1e-12), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn conserves_mass_and_receptors() {
        let c = CompartmentChain::new(4, 300, rates(1e-5, 1e-3, 1e-3, 1e-2), Boundary::Bolus(1000), 1).unwrap();
        let traj = meanfield_ode(&c, 1000.0, 0.5, 100.0).unwrap();
        for s in &traj.states {
            assert_relative_eq!(s.total_particles(), 1000.0, max_relative = 1e-10);
            for i in 0..4 {
                assert_relative_eq!(s.receptors_free[i] + s.complexes[i], 300.0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn explosive_step_is_reported() {
        let c = CompartmentChain::new(3, 10, rates(0.0, 0.0, 0.0, 1e3), Boundary::Bolus(10), 1).unwrap();
        assert!(matches!(meanfield_ode(&c, 1e4, 10.0, 1e4), Err(Error::Numerical(_))));
    }
}
