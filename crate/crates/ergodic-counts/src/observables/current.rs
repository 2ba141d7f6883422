//! Detection currents and their time averages along one record.

use super::{check_sorted_times, ResponseFunction};
use crate::error::{Error, Result};
use crate::trajectory::DetectionRecord;

/// The detection current `I_t = Σ_{s ∈ ω, s ≤ t} γ(t - s)`, summed exactly
/// over the clicks.
pub fn current(record: &DetectionRecord, gamma: &ResponseFunction, t: f64) -> f64 {
    let mut total = 0.0;
    // Clicks are sorted; walk backwards and stop once the kernel is dead.
    for &(s, _) in record.clicks().iter().rev() {
        if s > t {
            continue;
        }
        let x = t - s;
        match *gamma {
            ResponseFunction::Exponential { decay_time, .. } => {
                if x > 46.0 * decay_time {
                    break;
                }
            }
            ResponseFunction::Rectangular { width, .. } => {
                if x >= width {
                    break;
                }
            }
        }
        total += gamma.evaluate(x);
    }
    total
}

/// Tabulate `I_{t0 + j h}` for `j = 0..count` with one forward sweep.
///
/// For the exponential kernel the carried sum decays by an exact factor per
/// step; for the rectangular kernel a sliding window count is kept. Both
/// reproduce [`current`] up to accumulated rounding.
fn current_on_grid(
    record: &DetectionRecord,
    gamma: &ResponseFunction,
    t0: f64,
    h: f64,
    count: usize,
) -> Vec<f64> {
    let clicks = record.clicks();
    let mut out = Vec::with_capacity(count);
    match *gamma {
        ResponseFunction::Exponential {
            amplitude,
            decay_time,
        } => {
            let decay = (-h / decay_time).exp();
            let mut value = current(record, gamma, t0);
            out.push(value);
            let mut next = clicks.partition_point(|&(s, _)| s <= t0);
            let mut t = t0;
            for _ in 1..count {
                t += h;
                value *= decay;
                while next < clicks.len() && clicks[next].0 <= t {
                    value += amplitude * (-(t - clicks[next].0) / decay_time).exp();
                    next += 1;
                }
                out.push(value);
            }
        }
        ResponseFunction::Rectangular { amplitude, width } => {
            // Count clicks with t - w < s ≤ t via two pointers.
            let mut lo = clicks.partition_point(|&(s, _)| s <= t0 - width);
            let mut hi = clicks.partition_point(|&(s, _)| s <= t0);
            out.push(amplitude * (hi - lo) as f64);
            let mut t = t0;
            for _ in 1..count {
                t += h;
                while hi < clicks.len() && clicks[hi].0 <= t {
                    hi += 1;
                }
                while lo < clicks.len() && clicks[lo].0 <= t - width {
                    lo += 1;
                }
                out.push(amplitude * (hi - lo) as f64);
            }
        }
    }
    out
}

/// A composite-trapezoid time average with its step-halving error estimate
/// and the raw integrand samples (for resampling-based error bars).
#[derive(Clone, Debug)]
pub struct TimeAverage {
    pub value: f64,
    /// `|trapezoid(h) - trapezoid(2h)| / 3`, the Richardson error estimate.
    pub integration_error: f64,
    /// Integrand samples on the uniform grid.
    pub series: Vec<f64>,
    /// Grid step actually used.
    pub step: f64,
}

pub(super) fn trapezoid_mean(series: &[f64], stride: usize) -> f64 {
    let pts: Vec<f64> = series.iter().step_by(stride).copied().collect();
    let n = pts.len() - 1;
    let inner: f64 = pts[1..n].iter().sum();
    (0.5 * (pts[0] + pts[n]) + inner) / n as f64
}

/// `(1/τ) ∫_0^τ I_{t_1+t} ⋯ I_{t_n+t} dt` along one record, by the composite
/// trapezoid rule with step `dt_int` (rounded to an even number of intervals
/// so the halved grid reuses the same samples).
pub fn time_average_current_product(
    record: &DetectionRecord,
    gamma: &ResponseFunction,
    times: &[f64],
    tau: f64,
    dt_int: f64,
) -> Result<TimeAverage> {
    if times.is_empty() {
        return Err(Error::Domain("at least one probe time is required".into()));
    }
    check_sorted_times(times)?;
    if !(tau > 0.0) || !(dt_int > 0.0) {
        return Err(Error::Domain(
            "averaging window and step must be positive".into(),
        ));
    }
    let t_last = *times.last().unwrap();
    if record.horizon() < t_last + tau {
        return Err(Error::Domain(format!(
            "record horizon {} is shorter than t_n + tau = {}",
            record.horizon(),
            t_last + tau
        )));
    }
    let intervals = ((tau / dt_int).round() as usize).next_multiple_of(2).max(2);
    let h = tau / intervals as f64;

    let mut series = vec![1.0f64; intervals + 1];
    for &ti in times {
        let grid = current_on_grid(record, gamma, ti, h, intervals + 1);
        for (acc, v) in series.iter_mut().zip(&grid) {
            *acc *= v;
        }
    }
    let fine = trapezoid_mean(&series, 1);
    let coarse = trapezoid_mean(&series, 2);
    Ok(TimeAverage {
        value: fine,
        integration_error: (fine - coarse).abs() / 3.0,
        series,
        step: h,
    })
}

/// Tabulated current autocovariance and its cosine-transform spectrum.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// `(lag, autocovariance)` rows.
    pub autocovariance: Vec<(f64, f64)>,
    /// `(frequency, power)` rows from the type-I discrete cosine transform
    /// of the autocovariance table.
    pub power: Vec<(f64, f64)>,
}

/// Time-averaged `I_t I_{t+lag}` minus the squared mean, per lag, plus the
/// cosine-transform power table. Lags must start at zero and be uniformly
/// spaced.
pub fn current_autocorrelation_spectrum(
    record: &DetectionRecord,
    gamma: &ResponseFunction,
    lags: &[f64],
    tau: f64,
    dt_int: f64,
) -> Result<Spectrum> {
    if lags.len() < 2 || lags[0] != 0.0 {
        return Err(Error::Domain(
            "lags must start at 0 and contain at least two points".into(),
        ));
    }
    let dl = lags[1] - lags[0];
    for w in lags.windows(2) {
        if ((w[1] - w[0]) - dl).abs() > 1e-9 * dl.max(1.0) {
            return Err(Error::Domain("lags must be uniformly spaced".into()));
        }
    }
    let mean = time_average_current_product(record, gamma, &[0.0], tau, dt_int)?.value;
    let mut autocovariance = Vec::with_capacity(lags.len());
    for &lag in lags {
        let avg = time_average_current_product(record, gamma, &[0.0, lag], tau, dt_int)?.value;
        autocovariance.push((lag, avg - mean * mean));
    }

    let m = autocovariance.len();
    let mut power = Vec::with_capacity(m);
    for k in 0..m {
        let mut s = autocovariance[0].1;
        for (j, &(_, c)) in autocovariance.iter().enumerate().skip(1) {
            let w = if j == m - 1 { 1.0 } else { 2.0 };
            s += w * c * (std::f64::consts::PI * (j * k) as f64 / (m - 1) as f64).cos();
        }
        let freq = k as f64 / (2.0 * (m - 1) as f64 * dl);
        power.push((freq, s * dl));
    }
    Ok(Spectrum {
        autocovariance,
        power,
    })
}
