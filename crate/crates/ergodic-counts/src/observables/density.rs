//! Non-exclusive click densities `g_n` and their integrals and bounds.

use std::collections::HashMap;

use num_complex::Complex64;

use super::check_sorted_times;
use super::ResponseFunction;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::lindblad::DensityMatrix;
use crate::quad;
use crate::unraveling::Unraveling;

/// Memoized `e^{ΔL}` on the full generator, keyed by the gap's bit pattern.
struct GapCache<'a> {
    u: &'a Unraveling,
    cache: HashMap<u64, CMat>,
}

impl<'a> GapCache<'a> {
    fn new(u: &'a Unraveling) -> Self {
        Self {
            u,
            cache: HashMap::new(),
        }
    }

    fn apply(&mut self, gap: f64, v: &[Complex64]) -> Vec<Complex64> {
        if gap == 0.0 {
            return v.to_vec();
        }
        let key = gap.to_bits();
        let mat = self
            .cache
            .entry(key)
            .or_insert_with(|| linalg::expm(&self.u.full().matrix().scale_re(gap)));
        mat.matvec(v)
    }
}

fn gn_value(
    u: &Unraveling,
    rho: &DensityMatrix,
    times: &[f64],
    jumps: &[usize],
    cache: &mut GapCache,
) -> f64 {
    let mut w = u.jumps()[jumps[0]]
        .matrix()
        .matvec(&linalg::vectorize(rho.matrix()));
    for i in 1..times.len() {
        w = cache.apply(times[i] - times[i - 1], &w);
        w = u.jumps()[jumps[i]].matrix().matvec(&w);
    }
    linalg::vec_trace(&w, u.dim()).re.max(0.0)
}

/// The stationary non-exclusive density
/// `g_n(t_1..t_n) = tr(J e^{(t_n-t_{n-1})L} J ⋯ J e^{(t_2-t_1)L} J(ρ))`
/// for a single-detector unraveling. It obeys `0 ≤ g_n ≤ ‖J‖ⁿ`.
///
/// The trace formula gives the stationary click correlation when `ρ` is the
/// equilibrium state; that is the caller's responsibility.
pub fn nonexclusive_density(u: &Unraveling, rho: &DensityMatrix, times: &[f64]) -> Result<f64> {
    if u.jump_count() != 1 {
        return Err(Error::Domain(
            "nonexclusive_density needs a single detector; use nonexclusive_density_multi".into(),
        ));
    }
    let detectors = vec![0usize; times.len()];
    nonexclusive_density_multi(u, rho, times, &detectors)
}

/// Multi-detector extension of [`nonexclusive_density`]: one jump channel
/// index per probe time.
pub fn nonexclusive_density_multi(
    u: &Unraveling,
    rho: &DensityMatrix,
    times: &[f64],
    detectors: &[usize],
) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Domain("at least one probe time is required".into()));
    }
    if detectors.len() != times.len() {
        return Err(Error::Domain(
            "one detector index per probe time is required".into(),
        ));
    }
    check_sorted_times(times)?;
    for &d in detectors {
        if d >= u.jump_count() {
            return Err(Error::Domain(format!("detector index {d} out of range")));
        }
    }
    let mut cache = GapCache::new(u);
    Ok(gn_value(u, rho, times, detectors, &mut cache))
}

/// A quadrature value with its node-doubling error estimate.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error: f64,
}

fn gn_box_integral_at(
    u: &Unraveling,
    rho: &DensityMatrix,
    times: &[f64],
    epsilon: f64,
    nodes: usize,
    cache: &mut GapCache,
) -> f64 {
    let n = times.len();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = times
        .iter()
        .map(|&t| quad::gauss_legendre_on(nodes, t, t + epsilon))
        .collect();
    // Tensor product over the boxes by an index odometer.
    let mut idx = vec![0usize; n];
    let mut total = 0.0f64;
    loop {
        let mut weight = 1.0f64;
        let mut pts = Vec::with_capacity(n);
        for (j, &i) in idx.iter().enumerate() {
            weight *= rules[j].1[i];
            pts.push(rules[j].0[i]);
        }
        let dets = vec![0usize; n];
        total += weight * gn_value(u, rho, &pts, &dets, cache);
        let mut k = 0;
        loop {
            if k == n {
                return total;
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `∫_{t_n}^{t_n+ε} ⋯ ∫_{t_1}^{t_1+ε} g_n(s_1..s_n) ds` by tensor-product
/// Gauss–Legendre quadrature over the boxes, with a node-doubling error
/// estimate. Boxes must not overlap (`ε` below the smallest time gap).
pub fn gn_box_integral(
    u: &Unraveling,
    rho: &DensityMatrix,
    times: &[f64],
    epsilon: f64,
    nodes: usize,
) -> Result<QuadratureEstimate> {
    if u.jump_count() != 1 {
        return Err(Error::Domain(
            "gn_box_integral needs a single detector".into(),
        ));
    }
    if times.is_empty() || !(epsilon > 0.0) || nodes == 0 {
        return Err(Error::Domain(
            "need probe times, a positive box width, and nodes ≥ 1".into(),
        ));
    }
    check_sorted_times(times)?;
    for w in times.windows(2) {
        if w[1] - w[0] < epsilon {
            return Err(Error::Domain(format!(
                "boxes of width {epsilon} starting at {} and {} overlap",
                w[0], w[1]
            )));
        }
    }
    let mut cache = GapCache::new(u);
    let coarse = gn_box_integral_at(u, rho, times, epsilon, nodes, &mut cache);
    let fine = gn_box_integral_at(u, rho, times, epsilon, 2 * nodes, &mut cache);
    Ok(QuadratureEstimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// The integrability bound on stationary current moments:
/// `E(I_{t_1} ⋯ I_{t_n}) ≤ Mⁿ n^{n+1} e^{n ‖J‖ ‖γ‖₁}` with `M = max(1, ‖γ‖_∞)`.
pub fn moment_bound(n: usize, jump_norm: f64, gamma: &ResponseFunction) -> f64 {
    assert!(n >= 1);
    let m = gamma.moment_scale();
    let nf = n as f64;
    m.powi(n as i32) * nf.powf(nf + 1.0) * (nf * jump_norm * gamma.l1_norm()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{driven_atom, propagate, pure_decay, stationary_state};
    use crate::unraveling::{unravel, ClickPattern};
    use approx::assert_relative_eq;

    #[test]
    fn g1_of_decay_equilibrium_vanishes() {
        let u = unravel(&pure_decay(1.0));
        let ground = DensityMatrix::basis_state(2, 0);
        let g1 = nonexclusive_density(&u, &ground, &[0.3]).unwrap();
        assert_eq!(g1, 0.0);
    }

    #[test]
    fn g1_of_driven_atom_is_third() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        let g1 = nonexclusive_density(&u, &rho, &[0.0]).unwrap();
        assert_relative_eq!(g1, 1.0 / 3.0, epsilon = 1e-10);
        // Stationarity: the same value at any probe time.
        let g1_later = nonexclusive_density(&u, &rho, &[4.2]).unwrap();
        assert_relative_eq!(g1, g1_later, epsilon = 1e-12);
    }

    #[test]
    fn equal_time_g2_vanishes_by_nilpotency() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        for t in [0.0f64, 1.0, 3.7] {
            let g2 = nonexclusive_density(&u, &rho, &[t, t]).unwrap();
            assert!(g2 < 1e-14, "g2({t},{t}) = {g2}");
        }
    }

    #[test]
    fn gn_respects_the_jump_norm_bound() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        let norm = u.jump_norms()[0];
        for times in [vec![0.0], vec![0.0, 0.8], vec![0.0, 1.1, 2.9]] {
            let g = nonexclusive_density(&u, &rho, &times).unwrap();
            let bound = norm.powi(times.len() as i32);
            assert!(
                (0.0..=bound + 1e-12).contains(&g),
                "g_{} = {g} > {bound}",
                times.len()
            );
        }
    }

    #[test]
    fn g2_factorizes_at_large_separation() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        let g1 = nonexclusive_density(&u, &rho, &[0.0]).unwrap();
        let g2 = nonexclusive_density(&u, &rho, &[0.0, 30.0]).unwrap();
        assert_relative_eq!(g2, g1 * g1, max_relative = 1e-8);
    }

    #[test]
    fn multi_detector_mode_is_an_explicit_extension() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        use rand::SeedableRng;
        let model = crate::lindblad::LindbladModel::random(2, 2, &mut rng);
        let u = unravel(&model);
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(nonexclusive_density(&u, &rho, &[0.0]).is_err());
        let g = nonexclusive_density_multi(&u, &rho, &[0.0, 0.5], &[0, 1]).unwrap();
        assert!(g >= 0.0);
    }

    #[test]
    fn g1_box_integral_is_exact_for_constant_integrand() {
        // In equilibrium g1 is constant, so ∫ g1 = g1 ε exactly.
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        let eps = 0.37;
        let est = gn_box_integral(&u, &rho, &[1.0], eps, 16).unwrap();
        assert_relative_eq!(est.value, eps / 3.0, epsilon = 1e-12);
        assert!(est.error < 1e-12);
    }

    #[test]
    fn box_integral_shrinks_like_epsilon_power() {
        // ∫∫ g2 / ε² → g2(t1, t2) as ε → 0, with a Richardson-style trend.
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        let times = [0.0, 2.0];
        let g2 = nonexclusive_density(&u, &rho, &times).unwrap();
        let mut errs = Vec::new();
        for eps in [0.1f64, 0.05, 0.025] {
            let est = gn_box_integral(&u, &rho, &times, eps, 8).unwrap();
            errs.push((est.value / (eps * eps) - g2).abs());
        }
        assert!(
            errs[1] < errs[0] && errs[2] < errs[1],
            "no convergence trend: {errs:?}"
        );
        assert!(errs[2] < 0.05 * g2.max(1e-12));
    }

    #[test]
    fn overlapping_boxes_are_rejected() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        assert!(matches!(
            gn_box_integral(&u, &rho, &[0.0, 0.05], 0.1, 8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn moment_bound_closed_forms() {
        let gamma = ResponseFunction::exponential(1.0, 0.5).unwrap();
        // M = 1, n = 1: 1 · 1 · e^{0.5}.
        assert_relative_eq!(moment_bound(1, 1.0, &gamma), 0.5f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(
            moment_bound(1, 1.0, &gamma),
            1.648_721_270_700_128_2,
            epsilon = 1e-12
        );
        // Zero response: bound reduces to n^{n+1}.
        let zero = ResponseFunction::Exponential {
            amplitude: 0.0,
            decay_time: 1.0,
        };
        assert_relative_eq!(moment_bound(2, 1.0, &zero), 8.0, epsilon = 1e-12);
        assert_relative_eq!(moment_bound(3, 5.0, &zero), 81.0, epsilon = 1e-12);
    }

    /// Integrate the exclusive density over `mb` extra clicks before the
    /// pinned click and `ma` after it, on `[0, t]`; the click-expansion route
    /// to g₁, independent of the trace formula.
    fn g1_from_exclusive_densities(
        u: &Unraveling,
        rho: &DensityMatrix,
        t1: f64,
        t: f64,
        max_extra: usize,
        nodes: usize,
    ) -> f64 {
        let mut total = 0.0;
        for mb in 0..=max_extra {
            for ma in 0..=(max_extra - mb) {
                total += pinned_simplex_integral(u, rho, t1, t, mb, ma, nodes);
            }
        }
        total
    }

    /// ∫ over mb ordered clicks in [0, t1] and ma ordered clicks in [t1, t]
    /// of f^t({clicks} ∪ {t1}).
    fn pinned_simplex_integral(
        u: &Unraveling,
        rho: &DensityMatrix,
        t1: f64,
        t: f64,
        mb: usize,
        ma: usize,
        nodes: usize,
    ) -> f64 {
        let (xs, ws) = quad::gauss_legendre_on(nodes, 0.0, 1.0);
        let dims = mb + ma;
        if dims == 0 {
            let pattern = ClickPattern::new(&[(t1, 0)]).unwrap();
            return crate::unraveling::exclusive_density(u, &pattern, t, rho).unwrap();
        }
        let mut idx = vec![0usize; dims];
        let mut total = 0.0;
        loop {
            let mut weight = 1.0f64;
            // Ordered clicks in [0, t1] by the nested-product map.
            let mut before = vec![0.0f64; mb];
            let mut upper = t1;
            for k in (0..mb).rev() {
                let v = xs[idx[k]];
                weight *= ws[idx[k]] * upper;
                upper *= v;
                before[k] = upper;
            }
            // Ordered clicks in [t1, t].
            let mut after = vec![0.0f64; ma];
            let mut span = t - t1;
            for k in (0..ma).rev() {
                let v = xs[idx[mb + k]];
                weight *= ws[idx[mb + k]] * span;
                span *= v;
                after[k] = t1 + span;
            }
            let mut clicks: Vec<(f64, usize)> = Vec::with_capacity(dims + 1);
            clicks.extend(before.iter().map(|&s| (s, 0usize)));
            clicks.push((t1, 0));
            clicks.extend(after.iter().map(|&s| (s, 0usize)));
            let pattern = ClickPattern::new(&clicks).unwrap();
            total += weight * crate::unraveling::exclusive_density(u, &pattern, t, rho).unwrap();
            let mut k = 0;
            loop {
                if k == dims {
                    return total;
                }
                idx[k] += 1;
                if idx[k] < nodes {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn g1_matches_the_click_expansion_of_exclusive_densities() {
        // The non-exclusive density integrates the exclusive ones over all
        // extra clicks: check g₁ against that expansion truncated at four
        // added clicks on Γt ≤ 2.
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = stationary_state(u.full(), 1e-9).unwrap();
        let (t1, t) = (0.8, 2.0);
        let trace_route = nonexclusive_density(&u, &rho, &[t1]).unwrap();
        // Propagating ρ_ss through e^{t₁L} leaves it invariant, so the same
        // g₁ value must emerge from the expansion.
        let _ = propagate(u.full(), t1).unwrap();
        let expansion_route = g1_from_exclusive_densities(&u, &rho, t1, t, 4, 8);
        assert!(
            (trace_route - expansion_route).abs() < 1e-3,
            "trace route {trace_route} vs expansion {expansion_route}"
        );
    }
}
