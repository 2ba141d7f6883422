//! One-sided Jacobi singular value decomposition.
//!
//! Columns of the input are orthogonalized by right rotations. Small singular
//! values come out near the rounding floor rather than smeared to sqrt(eps),
//! which is what the rank decisions in the stationary-state solver rely on.

use num_complex::Complex64;

use super::CMat;

/// Result of [`svd`]: `a * v = u * diag(sigma)` with singular values sorted
/// in descending order; `u` columns are orthonormal where `sigma > 0`.
pub struct Svd {
    pub sigma: Vec<f64>,
    pub v: CMat,
}

/// One-sided Jacobi SVD of an m×n matrix with m ≥ n.
pub fn svd(a: &CMat) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "svd expects at least as many rows as columns");
    let mut w = a.clone();
    let mut v = CMat::identity(n);

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0f64;
                let mut beta = 0.0f64;
                let mut gamma = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    let wip = w[(i, p)];
                    let wiq = w[(i, q)];
                    alpha += wip.norm_sqr();
                    beta += wiq.norm_sqr();
                    gamma += wip.conj() * wiq;
                }
                let mag = gamma.norm();
                if mag <= f64::EPSILON * (alpha * beta).sqrt() || mag <= 1e-300 {
                    continue;
                }
                rotated = true;
                let u = gamma.conj() / mag;
                let theta = (beta - alpha) / (2.0 * mag);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let gc = Complex64::new(c, 0.0);
                let gs = Complex64::new(s, 0.0);
                let gu_s = -u * s;
                let gu_c = u * c;
                for i in 0..m {
                    let wip = w[(i, p)];
                    let wiq = w[(i, q)];
                    w[(i, p)] = wip * gc + wiq * gu_s;
                    w[(i, q)] = wip * gs + wiq * gu_c;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * gc + viq * gu_s;
                    v[(i, q)] = vip * gs + viq * gu_c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    sigma = order.iter().map(|&j| sigma[j]).collect();
    let v_sorted = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Svd { sigma, v: v_sorted }
}
