//! Repeated Kraus measurements: the discrete-time counting process.
//!
//! A measurement is a family `a_1..a_k` with `Σ a_i†a_i = 1`. Outcome `i`
//! maps `ρ` to `a_i ρ a_i†` up to normalization, and the probability of a
//! whole outcome sequence is the trace of the corresponding operator chain.
//! When the channel `T(ρ) = Σ a_i ρ a_i†` has a unique fixed point, long-run
//! outcome statistics along one sequence match the fixed-point expectations;
//! that is the discrete analogue of the continuous-time ergodic average.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::lindblad::{ComplexOperator, DensityMatrix, Superoperator, TraceBehavior};
use crate::stats;
use crate::trajectory::RngStream;

/// A complete Kraus family: `Σ a_i†a_i = 1` to `1e-10`.
#[derive(Clone, Debug)]
pub struct KrausFamily {
    dim: usize,
    ops: Vec<ComplexOperator>,
}

impl KrausFamily {
    pub fn new(ops: Vec<ComplexOperator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidModel(
                "a Kraus family needs at least one operator".into(),
            ));
        }
        let dim = ops[0].dim();
        if ops.iter().any(|a| a.dim() != dim) {
            return Err(Error::InvalidModel(
                "Kraus operators must share one dimension".into(),
            ));
        }
        let mut sum = CMat::zeros(dim, dim);
        for a in &ops {
            sum.add_assign(&a.matrix().adjoint().matmul(a.matrix()));
        }
        let defect = sum.sub(&CMat::identity(dim)).max_abs();
        if defect > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "Kraus completeness fails: ‖Σa†a − 1‖ = {defect:.3e}"
            )));
        }
        Ok(Self { dim, ops })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[ComplexOperator] {
        &self.ops
    }

    pub fn outcome_count(&self) -> usize {
        self.ops.len()
    }

    /// The measurement channel `T(ρ) = Σ a_i ρ a_i†` as a superoperator.
    pub fn channel(&self) -> Superoperator {
        let mut total = Superoperator::zero(self.dim);
        for a in &self.ops {
            total = total.add(&Superoperator::sandwich(a.matrix()));
        }
        Superoperator::from_matrix(self.dim, total.matrix().clone(), TraceBehavior::Preserving)
    }

    /// The unique fixed point of the channel, via the null space of `T − id`.
    /// A degenerate fixed space is reported with its dimension.
    pub fn fixed_point(&self, tol: f64) -> Result<DensityMatrix> {
        let t = self.channel();
        let gen = t.sub(&Superoperator::identity(self.dim));
        crate::lindblad::stationary_state(
            &Superoperator::from_matrix(
                self.dim,
                gen.matrix().clone(),
                TraceBehavior::Annihilating,
            ),
            tol,
        )
    }
}

/// A finite sequence of one-based measurement outcomes (zero-based indices
/// in memory).
pub type OutcomeSequence = Vec<usize>;

/// Probability of observing the outcome sequence from `theta`:
/// `tr(a_{i_m} ⋯ a_{i_1} θ a_{i_1}† ⋯ a_{i_m}†)`.
pub fn sequence_probability(
    fam: &KrausFamily,
    theta: &DensityMatrix,
    seq: &[usize],
) -> Result<f64> {
    let mut rho = theta.matrix().clone();
    for &i in seq {
        let a = fam
            .ops
            .get(i)
            .ok_or_else(|| Error::Domain(format!("outcome index {i} out of range")))?
            .matrix();
        rho = a.matmul(&rho).matmul(&a.adjoint());
    }
    Ok(rho.trace().re.clamp(0.0, 1.0))
}

/// Sample `m` outcomes by repeated measurement with posterior updates.
pub fn sample_outcomes(
    fam: &KrausFamily,
    theta: &DensityMatrix,
    m: usize,
    stream: RngStream,
) -> OutcomeSequence {
    let mut rng = stream.rng();
    let mut rho = theta.matrix().clone();
    let mut seq = Vec::with_capacity(m);
    for _ in 0..m {
        let posts: Vec<CMat> = fam
            .ops
            .iter()
            .map(|a| a.matrix().matmul(&rho).matmul(&a.matrix().adjoint()))
            .collect();
        let weights: Vec<f64> = posts.iter().map(|p| p.trace().re.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        let draw: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut outcome = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                outcome = i;
                break;
            }
        }
        rho = posts[outcome].scale_re(1.0 / weights[outcome].max(1e-300));
        seq.push(outcome);
    }
    seq
}

/// Long-run average of a window statistic along one sampled outcome chain,
/// compared against its expectation in the channel's unique fixed point.
#[derive(Clone, Debug)]
pub struct DiscreteAverage {
    /// `(1/n) Σ_j f(outcomes j .. j+w-1)` along the sampled chain.
    pub time_average: f64,
    /// `Σ_seq f(seq) · P_fix(seq)` over all length-w windows.
    pub stationary_expectation: f64,
    /// Block-bootstrap standard error of the time average.
    pub std_error: f64,
    pub samples: usize,
}

/// Sample one chain of `n_steps` outcomes and average `f` over all length-`w`
/// windows; the stationary expectation is enumerated exactly over the `k^w`
/// windows weighted by their fixed-point probabilities. Errors out when the
/// fixed point is degenerate (the ergodicity hypothesis fails).
pub fn discrete_time_average(
    fam: &KrausFamily,
    theta: &DensityMatrix,
    f: impl Fn(&[usize]) -> f64,
    window: usize,
    n_steps: usize,
    stream: RngStream,
) -> Result<DiscreteAverage> {
    if window == 0 || n_steps < window {
        return Err(Error::Domain(
            "need a window of at least 1 and n_steps ≥ window".into(),
        ));
    }
    let k = fam.outcome_count();
    if k == 1 {
        // The outcome chain is the constant sequence whatever the state, so
        // the window distribution is a point mass; no fixed point needed.
        let value = f(&vec![0usize; window]);
        return Ok(DiscreteAverage {
            time_average: value,
            stationary_expectation: value,
            std_error: 0.0,
            samples: n_steps - window + 1,
        });
    }
    let fixed = fam.fixed_point(1e-8)?;

    let chain = sample_outcomes(fam, theta, n_steps, stream);
    let values: Vec<f64> = chain.windows(window).map(&f).collect();
    let time_average = stats::mean(&values);
    let std_error = stats::block_bootstrap_se(
        &values,
        200.min(values.len()),
        200,
        stream.master_seed ^ 0x9e3779b97f4a7c15,
    );

    // Exact expectation over all k^w windows in the stationary chain.
    let mut seq = vec![0usize; window];
    let mut stationary_expectation = 0.0;
    loop {
        stationary_expectation += f(&seq) * sequence_probability(fam, &fixed, &seq)?;
        let mut j = 0;
        loop {
            if j == window {
                return Ok(DiscreteAverage {
                    time_average,
                    stationary_expectation,
                    std_error,
                    samples: values.len(),
                });
            }
            seq[j] += 1;
            if seq[j] < k {
                break;
            }
            seq[j] = 0;
            j += 1;
        }
    }
}

/// Sample many independent outcome sequences in parallel, ordered by stream.
pub fn sample_outcome_ensemble(
    fam: &KrausFamily,
    theta: &DensityMatrix,
    m: usize,
    master_seed: u64,
    first_stream: u64,
    count: usize,
) -> Vec<OutcomeSequence> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| sample_outcomes(fam, theta, m, RngStream::new(master_seed, first_stream + k)))
        .collect()
}

/// The amplitude-damping family at strength `p`:
/// `a_1 = diag(1, √(1-p))`, `a_2 = √p |0⟩⟨1|`.
pub fn amplitude_damping(p: f64) -> Result<KrausFamily> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidModel(format!(
            "damping strength {p} must lie in [0, 1]"
        )));
    }
    let mut a1 = CMat::zeros(2, 2);
    a1[(0, 0)] = Complex64::new(1.0, 0.0);
    a1[(1, 1)] = Complex64::new((1.0 - p).sqrt(), 0.0);
    let mut a2 = CMat::zeros(2, 2);
    a2[(0, 1)] = Complex64::new(p.sqrt(), 0.0);
    KrausFamily::new(vec![ComplexOperator::new(a1)?, ComplexOperator::new(a2)?])
}

/// The projective measurement in the computational basis; its channel fixes
/// every diagonal state, so the fixed point is degenerate.
pub fn projective_family(dim: usize) -> Result<KrausFamily> {
    let ops = (0..dim)
        .map(|k| {
            let mut m = CMat::zeros(dim, dim);
            m[(k, k)] = Complex64::new(1.0, 0.0);
            ComplexOperator::new(m)
        })
        .collect::<Result<Vec<_>>>()?;
    KrausFamily::new(ops)
}

/// A two-outcome unitary mixture `a_1 = H/√2`, `a_2 = S/√2` (Hadamard and
/// phase); the generated group acts irreducibly, so the maximally mixed
/// state is the unique fixed point.
pub fn unitary_mixture() -> KrausFamily {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = CMat::zeros(2, 2);
    h[(0, 0)] = Complex64::new(s, 0.0);
    h[(0, 1)] = Complex64::new(s, 0.0);
    h[(1, 0)] = Complex64::new(s, 0.0);
    h[(1, 1)] = Complex64::new(-s, 0.0);
    let mut phase = CMat::zeros(2, 2);
    phase[(0, 0)] = Complex64::new(1.0, 0.0);
    phase[(1, 1)] = Complex64::new(0.0, 1.0);
    KrausFamily::new(vec![
        ComplexOperator::new(h.scale_re(s)).unwrap(),
        ComplexOperator::new(phase.scale_re(s)).unwrap(),
    ])
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn incomplete_families_are_rejected() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = Complex64::new(1.0, 0.0);
        let op = ComplexOperator::new(a).unwrap();
        assert!(matches!(
            KrausFamily::new(vec![op]),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn projective_repetition_freezes_the_outcome() {
        let fam = projective_family(2).unwrap();
        let theta = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        // P(1,1,1) = p, mixed strings impossible.
        assert_relative_eq!(sequence_probability(&fam, &theta, &[0, 0, 0]).unwrap(), 0.3);
        assert_relative_eq!(sequence_probability(&fam, &theta, &[1, 1, 1]).unwrap(), 0.7);
        assert_eq!(sequence_probability(&fam, &theta, &[0, 1, 0]).unwrap(), 0.0);
        let seq = sample_outcomes(&fam, &theta, 10, RngStream::new(3, 0));
        assert!(
            seq.windows(2).all(|w| w[0] == w[1]),
            "projective chain changed outcome: {seq:?}"
        );
    }

    #[test]
    fn amplitude_damping_first_passage_is_geometric() {
        let p = 0.3;
        let fam = amplitude_damping(p).unwrap();
        let excited = DensityMatrix::basis_state(2, 1);
        for m in 1..=5usize {
            // First outcome-2 at step m: (1-p)^{m-1} p.
            let mut seq = vec![0usize; m - 1];
            seq.push(1);
            let prob = sequence_probability(&fam, &excited, &seq).unwrap();
            assert_relative_eq!(prob, (1.0 - p).powi(m as i32 - 1) * p, epsilon = 1e-12);
        }
    }

    #[test]
    fn sequence_probabilities_are_normalized() {
        let fam = amplitude_damping(0.3).unwrap();
        let theta = DensityMatrix::from_diagonal(&[0.4, 0.6]).unwrap();
        for m in 1..=4usize {
            let k = fam.outcome_count();
            let mut seq = vec![0usize; m];
            let mut total = 0.0;
            'outer: loop {
                total += sequence_probability(&fam, &theta, &seq).unwrap();
                let mut j = 0;
                loop {
                    if j == m {
                        break 'outer;
                    }
                    seq[j] += 1;
                    if seq[j] < k {
                        break;
                    }
                    seq[j] = 0;
                    j += 1;
                }
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn out_of_range_outcome_is_rejected() {
        let fam = amplitude_damping(0.3).unwrap();
        let theta = DensityMatrix::basis_state(2, 1);
        assert!(matches!(
            sequence_probability(&fam, &theta, &[0, 2]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_outcome_family_is_deterministic() {
        let fam = KrausFamily::new(vec![ComplexOperator::new(CMat::identity(2)).unwrap()]).unwrap();
        let theta = DensityMatrix::maximally_mixed(2);
        let seq = sample_outcomes(&fam, &theta, 6, RngStream::new(1, 1));
        assert_eq!(seq, vec![0; 6]);
        // Any window statistic averages to its value on the constant window.
        let avg = discrete_time_average(
            &fam,
            &theta,
            |w| w[0] as f64 + 2.0,
            1,
            100,
            RngStream::new(1, 2),
        )
        .unwrap();
        assert_relative_eq!(avg.time_average, 2.0);
        assert_relative_eq!(avg.stationary_expectation, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn empirical_frequencies_match_sequence_probabilities() {
        // χ² over the 8 outcome triples of the damping family.
        let fam = amplitude_damping(0.3).unwrap();
        let theta = DensityMatrix::from_diagonal(&[0.25, 0.75]).unwrap();
        let n = 40_000usize;
        let chains = sample_outcome_ensemble(&fam, &theta, 3, 12, 0, n);
        let mut observed = [0u64; 8];
        for c in &chains {
            observed[c[0] * 4 + c[1] * 2 + c[2]] += 1;
        }
        let mut expected = [0.0f64; 8];
        for (cell, e) in expected.iter_mut().enumerate() {
            let seq = [cell / 4, (cell / 2) % 2, cell % 2];
            *e = n as f64 * sequence_probability(&fam, &theta, &seq).unwrap();
        }
        let chi2 = stats::chi_square_statistic(&observed, &expected);
        let dof = expected.iter().filter(|&&e| e > 0.0).count() - 1;
        let p = stats::chi_square_sf(chi2, dof);
        assert!(p > 0.001, "χ² = {chi2} over {dof} dof gives p = {p}");
    }

    #[test]
    fn damping_long_run_average_matches_fixed_point() {
        // The fixed point is the ground state, where outcome 2 never fires.
        let fam = amplitude_damping(0.3).unwrap();
        let fixed = fam.fixed_point(1e-9).unwrap();
        assert_relative_eq!(fixed.matrix()[(0, 0)].re, 1.0, epsilon = 1e-10);
        let theta = DensityMatrix::basis_state(2, 1);
        let avg = discrete_time_average(
            &fam,
            &theta,
            |w| if w[0] == 1 { 1.0 } else { 0.0 },
            1,
            100_000,
            RngStream::new(8, 0),
        )
        .unwrap();
        assert_relative_eq!(avg.stationary_expectation, 0.0, epsilon = 1e-12);
        // The chain leaves the excited state after finitely many steps, so
        // the time average is O(1/n).
        assert!(avg.time_average < 3.0 * (1.0 / avg.samples as f64).sqrt() + 1e-4);
    }

    #[test]
    fn unitary_mixture_outcome_rate_is_half() {
        let fam = unitary_mixture();
        let fixed = fam.fixed_point(1e-9).unwrap();
        assert!(fixed.trace_distance(&DensityMatrix::maximally_mixed(2)) < 1e-9);
        let theta = DensityMatrix::basis_state(2, 0);
        let avg = discrete_time_average(
            &fam,
            &theta,
            |w| if w[0] == 0 { 1.0 } else { 0.0 },
            1,
            100_000,
            RngStream::new(9, 0),
        )
        .unwrap();
        assert_relative_eq!(avg.stationary_expectation, 0.5, epsilon = 1e-10);
        assert!(
            (avg.time_average - 0.5).abs() < 3.0 * avg.std_error.max(1e-3),
            "time average {} (se {})",
            avg.time_average,
            avg.std_error
        );
    }

    #[test]
    fn projective_family_has_degenerate_fixed_point() {
        let fam = projective_family(2).unwrap();
        match fam.fixed_point(1e-9) {
            Err(Error::NonUniqueEquilibrium { dim }) => assert_eq!(dim, 2),
            other => panic!("expected degenerate fixed point, got {other:?}"),
        }
        let theta = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            discrete_time_average(&fam, &theta, |w| w[0] as f64, 1, 100, RngStream::new(1, 0)),
            Err(Error::NonUniqueEquilibrium { .. })
        ));
    }

    #[test]
    fn time_average_is_insensitive_to_the_initial_state() {
        let fam = amplitude_damping(0.45).unwrap();
        let f = |w: &[usize]| if w == [0, 1] { 1.0 } else { 0.0 };
        let mut results = Vec::new();
        for (idx, theta) in [
            DensityMatrix::basis_state(2, 0),
            DensityMatrix::basis_state(2, 1),
            DensityMatrix::maximally_mixed(2),
        ]
        .iter()
        .enumerate()
        {
            let avg =
                discrete_time_average(&fam, theta, f, 2, 60_000, RngStream::new(14, idx as u64))
                    .unwrap();
            assert!(
                (avg.time_average - avg.stationary_expectation).abs()
                    < 3.0 * avg.std_error.max(1e-4),
                "initial state {idx}: {} vs {}",
                avg.time_average,
                avg.stationary_expectation
            );
            results.push(avg.time_average);
        }
    }
}
