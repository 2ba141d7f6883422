//! Multi-time coincidence counts along a record.

use super::current::{trapezoid_mean, TimeAverage};
use crate::error::{Error, Result};
use crate::trajectory::DetectionRecord;

/// Group consecutive equal probe times; returns `(time, multiplicity)` and
/// checks that distinct groups are separated by more than `epsilon`, so the
/// coincidence boxes never overlap.
fn group_times(times: &[f64], epsilon: f64) -> Result<Vec<(f64, usize)>> {
    if times.is_empty() {
        return Err(Error::Domain("at least one probe time is required".into()));
    }
    super::check_sorted_times(times)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!(
            "box width {epsilon} must be positive"
        )));
    }
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &t in times {
        match groups.last_mut() {
            Some((t0, m)) if t == *t0 => *m += 1,
            _ => {
                if let Some(&(t0, _)) = groups.last() {
                    if t - t0 <= epsilon {
                        return Err(Error::Domain(format!(
                            "boxes of width {epsilon} at {t0} and {t} overlap"
                        )));
                    }
                }
                groups.push((t, 1));
            }
        }
    }
    Ok(groups)
}

/// Falling binomial `C(n, m)` as a float (counts of unordered coincidences).
fn binomial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    let mut v = 1.0f64;
    for j in 0..m {
        v *= (n - j) as f64 / (j + 1) as f64;
    }
    v
}

/// `(1/τ) ∫_0^τ Π_j N_{[t_j+t, t_j+t+ε]} dt` along one record.
///
/// For pairwise distinct probe times this is the literal product of interval
/// counts. Repeated probe times share one box; their factor counts the ways
/// to pick that many distinct clicks from it, `C(N, m)`, so coincidences at
/// equal times require genuinely distinct clicks (the count that vanishes
/// under antibunching).
pub fn coincidence_time_average(
    record: &DetectionRecord,
    times: &[f64],
    epsilon: f64,
    tau: f64,
    dt_int: f64,
) -> Result<TimeAverage> {
    let groups = group_times(times, epsilon)?;
    if !(tau > 0.0) || !(dt_int > 0.0) {
        return Err(Error::Domain(
            "averaging window and step must be positive".into(),
        ));
    }
    let t_last = groups.last().unwrap().0;
    if record.horizon() < t_last + tau + epsilon {
        return Err(Error::Domain(format!(
            "record horizon {} is shorter than t_n + tau + epsilon = {}",
            record.horizon(),
            t_last + tau + epsilon
        )));
    }
    let intervals = ((tau / dt_int).round() as usize).next_multiple_of(2).max(2);
    let h = tau / intervals as f64;

    let clicks = record.clicks();
    let mut series = vec![1.0f64; intervals + 1];
    for &(tg, mult) in &groups {
        // Window [tg + jh, tg + jh + ε] slides right; two monotone pointers.
        let mut lo = clicks.partition_point(|&(s, _)| s < tg);
        let mut hi = clicks.partition_point(|&(s, _)| s <= tg + epsilon);
        for (j, acc) in series.iter_mut().enumerate() {
            let t = tg + h * j as f64;
            while lo < clicks.len() && clicks[lo].0 < t {
                lo += 1;
            }
            if hi < lo {
                hi = lo;
            }
            while hi < clicks.len() && clicks[hi].0 <= t + epsilon {
                hi += 1;
            }
            *acc *= binomial(hi - lo, mult);
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

/// Both sides of the subset/product counting identity on one record.
#[derive(Clone, Copy, Debug)]
pub struct SubsetSumCheck {
    /// `Σ_{α ⊂ ω} K(α)` over all subsets of the record's clicks, where `K`
    /// accepts exactly one click in each box.
    pub subset_sum: u64,
    /// `Π_j N_{[t_j, t_j+ε]}`.
    pub count_product: u64,
    pub equal: bool,
}

/// Enumerate every subset of the record's clicks and compare the number of
/// box-matching subsets with the product of box counts. The two are equal
/// integers whenever the boxes are disjoint.
pub fn subset_sum_identity_check(
    record: &DetectionRecord,
    times: &[f64],
    epsilon: f64,
) -> Result<SubsetSumCheck> {
    if record.len() > 20 {
        return Err(Error::Domain(format!(
            "subset enumeration is limited to 20 clicks, record has {}",
            record.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::Domain("at least one box is required".into()));
    }
    super::check_sorted_times(times)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain("box width must be positive".into()));
    }
    for w in times.windows(2) {
        if w[1] - w[0] <= epsilon {
            return Err(Error::Domain(format!(
                "boxes of width {epsilon} at {} and {} must be disjoint",
                w[0], w[1]
            )));
        }
    }

    let n = times.len();
    let clicks = record.clicks();
    let m = clicks.len();

    let mut subset_sum = 0u64;
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() as usize != n {
            continue;
        }
        // K(α) = 1 iff each box holds exactly one of the subset's clicks.
        let mut ok = true;
        for &tj in times {
            let mut hits = 0usize;
            for (k, &(s, _)) in clicks.iter().enumerate() {
                if mask & (1 << k) != 0 && s >= tj && s <= tj + epsilon {
                    hits += 1;
                }
            }
            if hits != 1 {
                ok = false;
                break;
            }
        }
        // Any stray subset click outside every box disqualifies the subset
        // via the size constraint: n box hits plus a stray needs > n clicks.
        if ok {
            let in_any_box = (0..m).filter(|&k| mask & (1 << k) != 0).all(|k| {
                times
                    .iter()
                    .any(|&tj| clicks[k].0 >= tj && clicks[k].0 <= tj + epsilon)
            });
            if in_any_box {
                subset_sum += 1;
            }
        }
    }

    let count_product: u64 = times
        .iter()
        .map(|&tj| record.count_in_interval(tj, tj + epsilon) as u64)
        .product();

    Ok(SubsetSumCheck {
        subset_sum,
        count_product,
        equal: subset_sum == count_product,
    })
}
