//! Pathwise statistics of detection records and their model-side
//! expectations.
//!
//! The pathwise side works on one sampled record: detection currents
//! `I_t = Σ_s γ(t - s)`, their time-averaged products, and multi-time
//! coincidence counts. The model side evaluates the non-exclusive densities
//! `g_n = tr(J T J ⋯ J ρ)`, their box integrals, and moment bounds. Agreement
//! between the two sides along a single long record is exactly what
//! ergodicity of the counting process promises.

mod coincidence;
mod current;
mod density;
mod ensemble;

pub use coincidence::{coincidence_time_average, subset_sum_identity_check, SubsetSumCheck};
pub use current::{
    current, current_autocorrelation_spectrum, time_average_current_product, Spectrum, TimeAverage,
};
pub use density::{
    gn_box_integral, moment_bound, nonexclusive_density, nonexclusive_density_multi,
    QuadratureEstimate,
};
pub use ensemble::{ensemble_expectation_product, EnsembleEstimate};

use crate::error::{Error, Result};

/// A causal detector response kernel `γ ≥ 0` with exact norm accessors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResponseFunction {
    /// `γ(x) = A e^{-x/τ_r}` for `x ≥ 0`.
    Exponential { amplitude: f64, decay_time: f64 },
    /// `γ(x) = A` for `0 ≤ x < w`.
    Rectangular { amplitude: f64, width: f64 },
}

impl ResponseFunction {
    pub fn exponential(amplitude: f64, decay_time: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !(decay_time > 0.0) {
            return Err(Error::Domain(
                "exponential response needs amplitude ≥ 0 and decay time > 0".into(),
            ));
        }
        Ok(Self::Exponential {
            amplitude,
            decay_time,
        })
    }

    pub fn rectangular(amplitude: f64, width: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !(width > 0.0) {
            return Err(Error::Domain(
                "rectangular response needs amplitude ≥ 0 and width > 0".into(),
            ));
        }
        Ok(Self::Rectangular { amplitude, width })
    }

    /// `γ(x)`; zero for `x < 0` (causality).
    pub fn evaluate(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential {
                amplitude,
                decay_time,
            } => amplitude * (-x / decay_time).exp(),
            Self::Rectangular { amplitude, width } => {
                if x < width {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact `‖γ‖₁`.
    pub fn l1_norm(&self) -> f64 {
        match *self {
            Self::Exponential {
                amplitude,
                decay_time,
            } => amplitude * decay_time,
            Self::Rectangular { amplitude, width } => amplitude * width,
        }
    }

    /// Exact `‖γ‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            Self::Exponential { amplitude, .. } => amplitude,
            Self::Rectangular { amplitude, .. } => amplitude,
        }
    }

    /// Exact tail mass `∫_b^∞ γ`.
    pub fn tail_mass(&self, b: f64) -> f64 {
        let b = b.max(0.0);
        match *self {
            Self::Exponential {
                amplitude,
                decay_time,
            } => amplitude * decay_time * (-b / decay_time).exp(),
            Self::Rectangular { amplitude, width } => amplitude * (width - b).max(0.0),
        }
    }

    /// The probe-sum kernel `φ(t) = Σ_j γ(t_j - t)` behind the moment
    /// integrability argument; integrable with `‖φ‖₁ = n ‖γ‖₁`.
    pub fn probe_sum(&self, probe_times: &[f64], t: f64) -> f64 {
        probe_times.iter().map(|&tj| self.evaluate(tj - t)).sum()
    }

    /// Exact `‖φ‖₁` for `n` probe times.
    pub fn probe_sum_l1(&self, n: usize) -> f64 {
        n as f64 * self.l1_norm()
    }

    /// `M = max(1, ‖γ‖_∞)`, the prefactor scale of the moment bound.
    pub fn moment_scale(&self) -> f64 {
        self.sup_norm().max(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm() == 0.0
    }
}

/// Parameters of a multi-time correlation check: the probe times, the
/// coincidence box width, the averaging window, and the stationarizing
/// burn-in.
#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    pub times: Vec<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub burn_in: f64,
}

impl CorrelationSpec {
    pub fn new(times: Vec<f64>, epsilon: f64, tau: f64, burn_in: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("at least one probe time is required".into()));
        }
        check_sorted_times(&times)?;
        if !(tau > 0.0) {
            return Err(Error::Domain(format!(
                "averaging window {tau} must be positive"
            )));
        }
        if !(burn_in >= 0.0) {
            return Err(Error::Domain("burn-in must be nonnegative".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "box width {epsilon} must be positive"
            )));
        }
        let min_gap = times
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g > 0.0)
            .fold(f64::INFINITY, f64::min);
        if epsilon >= min_gap {
            return Err(Error::Domain(format!(
                "box width {epsilon} must stay below the smallest positive time gap {min_gap}"
            )));
        }
        Ok(Self {
            times,
            epsilon,
            tau,
            burn_in,
        })
    }
}

pub(crate) fn check_sorted_times(times: &[f64]) -> Result<()> {
    let mut prev = 0.0f64;
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!(
                "time {t} must be finite and nonnegative"
            )));
        }
        if t < prev {
            return Err(Error::Domain("times must be nondecreasing".into()));
        }
        prev = t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn response_norms_are_exact() {
        let e = ResponseFunction::exponential(2.0, 0.5).unwrap();
        assert_relative_eq!(e.l1_norm(), 1.0);
        assert_relative_eq!(e.sup_norm(), 2.0);
        assert_relative_eq!(e.evaluate(0.0), 2.0);
        assert_eq!(e.evaluate(-0.1), 0.0);
        assert_relative_eq!(e.tail_mass(1.0), 1.0 * (-2.0f64).exp());

        let r = ResponseFunction::rectangular(3.0, 0.2).unwrap();
        assert_relative_eq!(r.l1_norm(), 0.6);
        assert_eq!(r.evaluate(0.19), 3.0);
        assert_eq!(r.evaluate(0.2), 0.0);
        assert_relative_eq!(r.tail_mass(0.15), 3.0 * 0.05, epsilon = 1e-14);
        assert_eq!(r.tail_mass(0.5), 0.0);
    }

    #[test]
    fn probe_sum_kernel_integrates_to_n_l1() {
        // Quadrature oracle: ∫ φ over a long window recovers n‖γ‖₁. The
        // kernel jumps at each probe time, so integrate piecewise between
        // them.
        let gamma = ResponseFunction::exponential(1.5, 0.4).unwrap();
        let probes = [2.0, 5.0, 9.0];
        let mut integral = 0.0;
        for (a, b) in [(-40.0, 2.0), (2.0, 5.0), (5.0, 9.0)] {
            let (xs, ws) = crate::quad::gauss_legendre_on(60, a, b);
            integral += xs
                .iter()
                .zip(&ws)
                .map(|(x, w)| w * gamma.probe_sum(&probes, *x))
                .sum::<f64>();
        }
        assert_relative_eq!(integral, gamma.probe_sum_l1(probes.len()), epsilon = 1e-9);
        // Pointwise bound by n ‖γ‖_∞ and the moment scale clamp.
        assert!(gamma.probe_sum(&probes, 1.9) <= 3.0 * gamma.sup_norm());
        assert_eq!(gamma.moment_scale(), 1.5);
        let weak = ResponseFunction::exponential(0.3, 1.0).unwrap();
        assert_eq!(weak.moment_scale(), 1.0);
    }

    #[test]
    fn correlation_spec_validates_epsilon() {
        assert!(CorrelationSpec::new(vec![0.0, 5.0], 0.1, 100.0, 5.0).is_ok());
        assert!(CorrelationSpec::new(vec![0.0, 5.0], 5.0, 100.0, 5.0).is_err());
        assert!(CorrelationSpec::new(vec![5.0, 0.0], 0.1, 100.0, 5.0).is_err());
        assert!(CorrelationSpec::new(vec![0.0], 0.1, 0.0, 5.0).is_err());
    }
}
