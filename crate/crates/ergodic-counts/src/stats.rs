//! Statistical helpers: block bootstrap errors, Kolmogorov–Smirnov
//! distances, and chi-square tail probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean of an autocorrelated series by the circular
/// block bootstrap: resample whole blocks of `block_len` consecutive points
/// (wrapping around) until the original length is reached, and take the
/// standard deviation of the resampled means.
pub fn block_bootstrap_se(series: &[f64], block_len: usize, resamples: usize, seed: u64) -> f64 {
    let n = series.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let block_len = block_len.clamp(1, n);
    // Prefix sums over two copies make every wrapped block sum O(1).
    let mut prefix = vec![0.0f64; 2 * n + 1];
    for i in 0..2 * n {
        prefix[i + 1] = prefix[i] + series[i % n];
    }
    let block_sum = |start: usize, len: usize| prefix[start + len] - prefix[start];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut total = 0.0f64;
        let mut filled = 0usize;
        while filled < n {
            let start = rng.gen_range(0..n);
            let take = block_len.min(n - filled);
            total += block_sum(start, take);
            filled += take;
        }
        means.push(total / n as f64);
    }
    sample_variance(&means).sqrt()
}

/// Kolmogorov–Smirnov distance between observed values and a reference CDF.
/// `total` may exceed `samples.len()` when some observations are censored
/// beyond every sample (they then count in the denominator only).
pub fn ks_statistic(samples: &[f64], total: usize, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = total.max(sorted.len()) as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((f - i as f64 / n).abs());
        worst = worst.max(((i + 1) as f64 / n - f).abs());
    }
    worst
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Survival function of the chi-square distribution with `dof` degrees of
/// freedom: `P(X ≥ x) = Q(dof/2, x/2)`.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(dof as f64 / 2.0, x / 2.0)
}

/// Regularized upper incomplete gamma `Q(a, x)`, by the series for the lower
/// function when `x < a + 1` and a Lentz continued fraction otherwise.
fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // Lower series: P(a,x) = x^a e^-x / Γ(a) · Σ x^n Γ(a)/Γ(a+1+n).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * log_prefactor.exp()
    } else {
        // Upper continued fraction (modified Lentz).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        log_prefactor.exp() * h
    }
}

/// Lanczos approximation of ln Γ(x) for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for g in G {
        y += 1.0;
        ser += g / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}
