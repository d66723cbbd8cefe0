//! Gillespie direct method.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{sample_times, Boundary, CompartmentChain, Trajectory};
use crate::error::Result;

/// A reaction network the direct method can drive.
pub trait ReactionSystem {
    fn channel_count(&self) -> usize;

    /// Current propensity of `channel`, 1/s.
    fn propensity(&self, channel: usize) -> f64;

    /// Applies one firing of `channel` and appends every channel whose
    /// propensity may have changed to `touched`.
    fn fire(&mut self, channel: usize, touched: &mut Vec<usize>);
}

/// Cached propensities with incremental updates.
///
/// The running total is re-summed from scratch periodically so rounding
/// error from the incremental updates cannot accumulate.
#[derive(Clone, Debug)]
pub struct DirectMethod {
    props: Vec<f64>,
    total: f64,
    touched: Vec<usize>,
    since_resum: u32,
}

const RESUM_EVERY: u32 = 4096;

impl DirectMethod {
    pub fn new<S: ReactionSystem + ?Sized>(system: &S) -> Self {
        let props: Vec<f64> = (0..system.channel_count()).map(|c| system.propensity(c)).collect();
        let total = props.iter().sum();
        Self {
            props,
            total,
            touched: Vec::new(),
            since_resum: 0,
        }
    }

    pub fn total_propensity(&self) -> f64 {
        self.total
    }

    /// Waiting time and channel of the next reaction, or `None` when no
    /// channel can fire.
    pub fn next_event<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(f64, usize)> {
        if self.total <= 0.0 {
            return None;
        }
        let e: f64 = Exp1.sample(rng);
        let tau = e / self.total;
        let target = rng.random::<f64>() * self.total;
        let mut acc = 0.0;
        let mut last_live = None;
        for (c, &a) in self.props.iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            acc += a;
            last_live = Some(c);
            if target < acc {
                return Some((tau, c));
            }
        }
        // Rounding left `target` just past the cumulative sum.
        last_live.map(|c| (tau, c))
    }

    pub fn fire<S: ReactionSystem + ?Sized>(&mut self, system: &mut S, channel: usize) {
        self.touched.clear();
        system.fire(channel, &mut self.touched);
        for &c in &self.touched {
            let new = system.propensity(c);
            self.total += new - self.props[c];
            self.props[c] = new;
        }
        self.since_resum += 1;
        if self.since_resum >= RESUM_EVERY {
            self.total = self.props.iter().sum();
            self.since_resum = 0;
        }
        if self.total < 0.0 {
            self.total = 0.0;
        }
    }
}

/// Channels per compartment.
const PER: usize = 5;
const BIND: usize = 0;
const UNBIND: usize = 1;
const INTERNALIZE: usize = 2;
const HOP_LEFT: usize = 3;
const HOP_RIGHT: usize = 4;

impl CompartmentChain {
    fn touch_compartment(i: usize, touched: &mut Vec<usize>) {
        touched.extend((0..PER).map(|k| i * PER + k));
    }

    fn is_reservoir(&self, i: usize) -> bool {
        i == 0 && matches!(self.boundary, Boundary::Source(_))
    }

    fn remove_free(&mut self, i: usize) {
        if !self.is_reservoir(i) {
            self.np_free[i] -= 1;
        }
    }

    fn add_free(&mut self, i: usize) {
        if !self.is_reservoir(i) {
            self.np_free[i] += 1;
        }
    }
}

impl ReactionSystem for CompartmentChain {
    fn channel_count(&self) -> usize {
        self.len() * PER
    }

    fn propensity(&self, channel: usize) -> f64 {
        let (i, kind) = (channel / PER, channel % PER);
        let r = &self.rates;
        let free = self.np_free[i] as f64;
        let (left, right) = self.hop_directions(i);
        match kind {
            BIND => r.ka_stoch * free * self.receptors_free[i] as f64,
            UNBIND => r.kd * self.complexes[i] as f64,
            INTERNALIZE => r.ki * self.complexes[i] as f64,
            HOP_LEFT if left => r.k_hop * free,
            HOP_RIGHT if right => r.k_hop * free,
            _ => 0.0,
        }
    }

    fn fire(&mut self, channel: usize, touched: &mut Vec<usize>) {
        let (i, kind) = (channel / PER, channel % PER);
        Self::touch_compartment(i, touched);
        match kind {
            BIND => {
                self.remove_free(i);
                self.receptors_free[i] -= 1;
                self.complexes[i] += 1;
            }
            UNBIND => {
                self.complexes[i] -= 1;
                self.receptors_free[i] += 1;
                self.add_free(i);
            }
            INTERNALIZE => {
                self.complexes[i] -= 1;
                self.receptors_free[i] += 1;
                self.np_internal[i] += 1;
                if self.np_internal[i] >= self.kill_threshold {
                    self.cell_alive[i] = false;
                }
            }
            HOP_LEFT | HOP_RIGHT => {
                let j = if kind == HOP_LEFT { i - 1 } else { i + 1 };
                self.remove_free(i);
                self.add_free(j);
                Self::touch_compartment(j, touched);
            }
            _ => unreachable!("channel kind {kind}"),
        }
    }
}

/// Exact stochastic simulation of `chain` up to `t_end`, sampled every
/// `sample_dt` seconds. The chain is left in its state at `t_end`.
pub fn run_ssa<R: Rng + ?Sized>(
    chain: &mut CompartmentChain,
    t_end: f64,
    sample_dt: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let times = sample_times(t_end, sample_dt)?;
    let mut states = Vec::with_capacity(times.len());
    let mut engine = DirectMethod::new(chain);
    let mut t = 0.0;
    let mut next = 0;
    while next < times.len() {
        let Some((tau, channel)) = engine.next_event(rng) else {
            break;
        };
        let t_new = t + tau;
        while next < times.len() && times[next] < t_new {
            states.push(chain.snapshot());
            next += 1;
        }
        if next == times.len() {
            break;
        }
        engine.fire(chain, channel);
        t = t_new;
    }
    while states.len() < times.len() {
        states.push(chain.snapshot());
    }
    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::ssa::ChainRates;

    fn chain(n: usize, rates: ChainRates, boundary: Boundary) -> CompartmentChain {
        CompartmentChain::new(n, 50, rates, boundary, 1).unwrap()
    }

    #[test]
    fn no_transport_keeps_particles_home() {
        let rates = ChainRates { ka_stoch: 1e-3, kd: 1e-2, ki: 1e-2, k_hop: 0.0 };
        let mut c = chain(4, rates, Boundary::Bolus(200));
        let traj = run_ssa(&mut c, 1000.0, 100.0, &mut rng_from_seed(1)).unwrap();
        for s in &traj.states {
            for i in 1..4 {
                assert_eq!(s.np_free[i] + s.complexes[i] + s.np_internal[i], 0.0);
            }
        }
    }

    #[test]
    fn bolus_conserves_particles_and_receptors() {
        let rates = ChainRates { ka_stoch: 1e-3, kd: 1e-2, ki: 5e-3, k_hop: 0.05 };
        let mut c = chain(6, rates, Boundary::Bolus(300));
        let traj = run_ssa(&mut c, 2000.0, 50.0, &mut rng_from_seed(2)).unwrap();
        assert_eq!(traj.times.len(), traj.states.len());
        for s in &traj.states {
            assert_eq!(s.total_particles(), 300.0);
            for i in 0..6 {
                assert_eq!(s.receptors_free[i] + s.complexes[i], 50.0);
            }
        }
    }

    #[test]
    fn source_holds_the_wall_level() {
        let rates = ChainRates { ka_stoch: 1e-3, kd: 1e-2, ki: 5e-3, k_hop: 0.05 };
        let mut c = chain(3, rates, Boundary::Source(40));
        let traj = run_ssa(&mut c, 500.0, 50.0, &mut rng_from_seed(3)).unwrap();
        assert!(traj.states.iter().all(|s| s.np_free[0] == 40.0));
        assert!(traj.last().unwrap().np_free[1] > 0.0);
    }

    #[test]
    fn internalization_kills_at_threshold() {
        let rates = ChainRates { ka_stoch: 1.0, kd: 0.0, ki: 1.0, k_hop: 0.0 };
        let mut c = CompartmentChain::new(1, 10, rates, Boundary::Bolus(3), 3).unwrap();
        run_ssa(&mut c, 1e3, 1e3, &mut rng_from_seed(4)).unwrap();
        assert_eq!(c.np_internal[0], 3);
        assert!(!c.cell_alive[0]);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let rates = ChainRates { ka_stoch: 1e-3, kd: 1e-2, ki: 5e-3, k_hop: 0.05 };
        let run = |seed| {
            let mut c = chain(5, rates, Boundary::Bolus(100));
            run_ssa(&mut c, 300.0, 10.0, &mut rng_from_seed(seed)).unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn inert_system_only_samples() {
        let rates = ChainRates { ka_stoch: 0.0, kd: 0.0, ki: 0.0, k_hop: 0.0 };
        let mut c = chain(2, rates, Boundary::Bolus(7));
        let traj = run_ssa(&mut c, 10.0, 1.0, &mut rng_from_seed(5)).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!(traj.states.iter().all(|s| s.np_free == vec![7.0, 0.0]));
    }
}
