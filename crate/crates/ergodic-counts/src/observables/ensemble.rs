//! Ensemble (many-record) estimates of stationary current products.

use rayon::prelude::*;

use super::{check_sorted_times, current, ResponseFunction};
use crate::error::{Error, Result};
use crate::lindblad::DensityMatrix;
use crate::stats;
use crate::trajectory::{sample_record, RngStream};
use crate::unraveling::Unraveling;

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Monte Carlo estimate of the stationary expectation
/// `E(I_{t_1} ⋯ I_{t_n})` over records started in `rho_ss`.
///
/// The two-sided stationary process is approximated by starting each record
/// a burn-in before time zero: clicks older than the burn-in would contribute
/// at most a `1e-6` fraction of `‖γ‖₁` to any current value, and the
/// configuration is rejected if the burn-in is too short for the response
/// tail.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_expectation_product(
    u: &Unraveling,
    rho_ss: &DensityMatrix,
    gamma: &ResponseFunction,
    times: &[f64],
    n_traj: usize,
    master_seed: u64,
    first_stream: u64,
    burn_in: f64,
    dt: f64,
) -> Result<EnsembleEstimate> {
    if times.is_empty() {
        return Err(Error::Domain("at least one probe time is required".into()));
    }
    check_sorted_times(times)?;
    if n_traj < 2 {
        return Err(Error::Domain(
            "at least two trajectories are required".into(),
        ));
    }
    let l1 = gamma.l1_norm();
    if gamma.tail_mass(burn_in) > 1e-6 * l1 {
        return Err(Error::Config(format!(
            "burn-in {burn_in} leaves a response tail of {:.3e} (limit {:.3e})",
            gamma.tail_mass(burn_in),
            1e-6 * l1
        )));
    }
    let horizon = burn_in + times.last().unwrap();
    if horizon <= dt {
        return Err(Error::Config(format!(
            "burn-in {burn_in} plus probe span leaves no room for sampling at dt = {dt}"
        )));
    }

    let values: Vec<f64> = (0..n_traj as u64)
        .into_par_iter()
        .map(|k| {
            let record = sample_record(
                u,
                rho_ss,
                horizon,
                RngStream::new(master_seed, first_stream + k),
                dt,
            )?;
            Ok(times
                .iter()
                .map(|&tj| current(&record, gamma, burn_in + tj))
                .product())
        })
        .collect::<Result<Vec<f64>>>()?;

    let mean = stats::mean(&values);
    let std_error = (stats::sample_variance(&values) / values.len() as f64).sqrt();
    Ok(EnsembleEstimate {
        mean,
        std_error,
        n: values.len(),
    })
}
