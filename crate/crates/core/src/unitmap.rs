//! Conversions between per-step probabilities and physical rate constants.
//!
//! A step is the time a particle needs to diffuse one cell diameter,
//! `d² = factor · D · t`. One grid agent stands for a fixed number of
//! particles, which in one cell volume gives a molar concentration `C`.
//! An association probability `p_a` then maps to `ka = p_a / (C · Δt)`,
//! and first-order probabilities map to rates as `k = p / Δt`.

use serde::{Deserialize, Serialize};

use crate::config::UnitsConfig;
use crate::error::{Error, Result};

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Litres per cubic centimetre.
const LITRES_PER_CM3: f64 = 1e-3;

/// Association constants outside this band (1/(M·s)) are flagged.
pub const KA_RANGE: (f64, f64) = (1e4, 1e6);

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and > 0, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and >= 0, got {x}")))
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Time for a particle with diffusivity `d_cm2_s` to cover `diameter_cm`,
/// using `d² = 2 D t`.
pub fn step_duration(d_cm2_s: f64, diameter_cm: f64) -> Result<f64> {
    step_duration_with_factor(d_cm2_s, diameter_cm, 2.0)
}

/// As [`step_duration`] with an explicit mean-squared-displacement factor
/// (4 is the textbook two-dimensional value).
pub fn step_duration_with_factor(d_cm2_s: f64, diameter_cm: f64, factor: f64) -> Result<f64> {
    positive("diffusion coefficient", d_cm2_s)?;
    positive("cell diameter", diameter_cm)?;
    positive("msd dimension factor", factor)?;
    Ok(diameter_cm * diameter_cm / (factor * d_cm2_s))
}

/// Step duration implied by a units section; an explicit override wins.
///
/// The config is validated at load, so the diffusive fallback cannot fail.
pub fn configured_step_duration(units: &UnitsConfig) -> f64 {
    units.step_duration_s.unwrap_or_else(|| {
        step_duration_with_factor(units.diffusion_cm2_s, units.cell_diameter_cm, units.msd_dimension_factor)
            .expect("validated units")
    })
}

/// Volume of a cube with edge `diameter_cm`, in litres.
pub fn cell_volume_litres(diameter_cm: f64) -> Result<f64> {
    positive("cell diameter", diameter_cm)?;
    Ok(diameter_cm.powi(3) * LITRES_PER_CM3)
}

/// Molar concentration of `particles` in `volume_l` litres.
pub fn na_molar_concentration(particles: f64, volume_l: f64) -> Result<f64> {
    non_negative("particle count", particles)?;
    positive("volume", volume_l)?;
    Ok(particles / (AVOGADRO * volume_l))
}

/// Association constant in 1/(M·s) for a per-step probability.
pub fn pa_to_ka(p_a: f64, na_molar: f64, step_s: f64) -> Result<f64> {
    probability("p_a", p_a)?;
    positive("concentration", na_molar)?;
    positive("step duration", step_s)?;
    Ok(p_a / (na_molar * step_s))
}

/// Inverse of [`pa_to_ka`]. The result is not clamped to `[0, 1]`.
pub fn ka_to_pa(ka: f64, na_molar: f64, step_s: f64) -> Result<f64> {
    non_negative("ka", ka)?;
    positive("concentration", na_molar)?;
    positive("step duration", step_s)?;
    Ok(ka * na_molar * step_s)
}

/// Association events per step implied by `ka` at one agent's concentration.
pub fn ka_to_particles_per_step(ka: f64, na_molar: f64, step_s: f64) -> Result<f64> {
    non_negative("ka", ka)?;
    positive("concentration", na_molar)?;
    positive("step duration", step_s)?;
    Ok(ka * na_molar * step_s)
}

/// First-order rate (1/s) for a per-step probability; used for kd and ki.
pub fn prob_to_rate(p: f64, step_s: f64) -> Result<f64> {
    probability("probability", p)?;
    positive("step duration", step_s)?;
    Ok(p / step_s)
}

/// Inverse of [`prob_to_rate`].
pub fn rate_to_prob(rate: f64, step_s: f64) -> Result<f64> {
    non_negative("rate", rate)?;
    positive("step duration", step_s)?;
    Ok(rate * step_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeFlag {
    Below,
    Within,
    Above,
}

/// Where `ka` sits relative to [`KA_RANGE`].
pub fn ka_range_flag(ka: f64) -> RangeFlag {
    if ka < KA_RANGE.0 {
        RangeFlag::Below
    } else if ka > KA_RANGE.1 {
        RangeFlag::Above
    } else {
        RangeFlag::Within
    }
}

/// Physical constants for one genome under one units section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticConstants {
    /// 1/(M·s)
    pub ka: f64,
    /// 1/s
    pub kd: f64,
    /// 1/s
    pub ki: f64,
    /// cm²/s
    pub diffusion: f64,
    /// cm
    pub cell_diameter: f64,
    pub particles_per_na: f64,
    /// M
    pub na_molar: f64,
    /// s
    pub step_duration: f64,
    pub ka_particles_per_step: f64,
    pub ka_flag: RangeFlag,
}

impl KineticConstants {
    pub fn from_probabilities(p_a: f64, p_d: f64, p_i: f64, units: &UnitsConfig) -> Result<Self> {
        let step = match units.step_duration_s {
            Some(s) => {
                positive("step duration", s)?;
                s
            }
            None => step_duration_with_factor(units.diffusion_cm2_s, units.cell_diameter_cm, units.msd_dimension_factor)?,
        };
        let volume = cell_volume_litres(units.cell_diameter_cm)?;
        let na_molar = na_molar_concentration(units.particles_per_na, volume)?;
        let ka = pa_to_ka(p_a, na_molar, step)?;
        Ok(Self {
            ka,
            kd: prob_to_rate(p_d, step)?,
            ki: prob_to_rate(p_i, step)?,
            diffusion: units.diffusion_cm2_s,
            cell_diameter: units.cell_diameter_cm,
            particles_per_na: units.particles_per_na,
            na_molar,
            step_duration: step,
            ka_particles_per_step: ka_to_particles_per_step(ka, na_molar, step)?,
            ka_flag: ka_range_flag(ka),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const C: f64 = 1.66e-7;

    #[test]
    fn default_step_is_5000_s() {
        assert_eq!(step_duration(1e-10, 1e-3).unwrap(), 5000.0);
        assert_eq!(step_duration(2e-10, 1e-3).unwrap(), 2500.0);
        assert_eq!(step_duration_with_factor(1e-10, 1e-3, 4.0).unwrap(), 2500.0);
    }

    #[test]
    fn step_rejects_degenerate_inputs() {
        assert!(matches!(step_duration(1e-10, 0.0), Err(Error::Domain(_))));
        assert!(step_duration(-1.0, 1e-3).is_err());
        assert!(step_duration(f64::NAN, 1e-3).is_err());
    }

    #[test]
    fn one_agent_concentration() {
        let c = na_molar_concentration(1e5, 1e-12).unwrap();
        assert_relative_eq!(c, 1.66e-7, max_relative = 5e-3);
        assert_eq!(na_molar_concentration(0.0, 1e-12).unwrap(), 0.0);
        assert_relative_eq!(na_molar_concentration(2e5, 1e-12).unwrap(), 2.0 * c);
        assert!(na_molar_concentration(1.0, 0.0).is_err());
    }

    #[test]
    fn ten_micron_cube_is_a_picolitre() {
        assert_relative_eq!(cell_volume_litres(1e-3).unwrap(), 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn worked_association_example() {
        assert_relative_eq!(pa_to_ka(0.3, C, 5000.0).unwrap(), 361.0, max_relative = 5e-3);
        assert_eq!(pa_to_ka(0.0, C, 5000.0).unwrap(), 0.0);
        assert!(pa_to_ka(1.5, C, 5000.0).is_err());
    }

    #[test]
    fn ka_band_in_particles_per_step() {
        assert_relative_eq!(ka_to_particles_per_step(1e4, C, 5000.0).unwrap(), 8.3, max_relative = 5e-3);
        assert_relative_eq!(ka_to_particles_per_step(1e6, C, 5000.0).unwrap(), 830.0, max_relative = 5e-3);
        assert_eq!(ka_to_particles_per_step(0.0, C, 5000.0).unwrap(), 0.0);
    }

    #[test]
    fn first_order_rates() {
        assert_eq!(prob_to_rate(1.0, 5000.0).unwrap(), 2e-4);
        assert_eq!(prob_to_rate(0.0, 5000.0).unwrap(), 0.0);
        assert_eq!(prob_to_rate(0.5, 5000.0).unwrap(), 1e-4);
    }

    #[test]
    fn range_flags() {
        assert_eq!(ka_range_flag(0.0), RangeFlag::Below);
        assert_eq!(ka_range_flag(1e5), RangeFlag::Within);
        assert_eq!(ka_range_flag(2e6), RangeFlag::Above);
    }

    #[test]
    fn constants_from_default_units() {
        let k = KineticConstants::from_probabilities(0.3, 1.0, 0.5, &UnitsConfig::default()).unwrap();
        assert_eq!(k.step_duration, 5000.0);
        assert_relative_eq!(k.ka, 361.0, max_relative = 5e-3);
        assert_eq!(k.kd, 2e-4);
        assert_eq!(k.ki, 1e-4);
        assert_eq!(k.ka_flag, RangeFlag::Below);
        assert_relative_eq!(k.ka_particles_per_step, 0.3, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn association_roundtrip(p in 0.0f64..=1.0, c in 1e-9f64..1e-5, dt in 1.0f64..1e5) {
            let back = ka_to_pa(pa_to_ka(p, c, dt).unwrap(), c, dt).unwrap();
            prop_assert!((back - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn rate_roundtrip(p in 0.0f64..=1.0, dt in 1.0f64..1e5) {
            let back = rate_to_prob(prob_to_rate(p, dt).unwrap(), dt).unwrap();
            prop_assert!((back - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn association_is_linear(p in 0.0f64..=0.5, a in 0.0f64..=2.0) {
            let lhs = pa_to_ka(a * p, C, 5000.0).unwrap();
            let rhs = a * pa_to_ka(p, C, 5000.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }

        #[test]
        fn per_step_chain_recovers_probability(p in 0.0f64..=1.0) {
            let ka = pa_to_ka(p, C, 5000.0).unwrap();
            let per_step = ka_to_particles_per_step(ka, C, 5000.0).unwrap();
            prop_assert!((per_step - p).abs() <= 1e-12);
        }
    }
}
