//! Subcommand implementations.

use std::path::Path;

use serde_json::json;

use ergodic_counts::error::{Error, Result};
use ergodic_counts::linalg;
use ergodic_counts::lindblad::DensityMatrix;
use ergodic_counts::observables::{
    coincidence_time_average, current_autocorrelation_spectrum, ensemble_expectation_product,
    gn_box_integral, moment_bound, nonexclusive_density, subset_sum_identity_check,
    time_average_current_product, CorrelationSpec, TimeAverage,
};
use ergodic_counts::stats;
use ergodic_counts::trajectory::{sample_ensemble, sample_record, DetectionRecord, RngStream};
use ergodic_counts::unraveling::{check_markov, CylinderEvent};
use ergodic_counts::{kraus, lindblad};

use crate::config::{resolve_state, ResolvedExperiment};
use crate::output::{write_pairs_csv, write_text, CheckOutcome, ResultRow, RunReport};

// Stream index blocks keep the random inputs of different run phases
// independent of each other.
const STREAM_SIMULATE: u64 = 0;
const STREAM_RECORD: u64 = 1 << 32;
const STREAM_ENSEMBLE: u64 = 2 << 32;
const STREAM_WAITING: u64 = 3 << 32;
const STREAM_KRAUS: u64 = 4 << 32;

fn fmt_times(times: &[f64]) -> String {
    times
        .iter()
        .map(|t| format!("{t}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Bootstrap standard error of a time average, with the block length taken
/// from the config (in time units).
fn bootstrap_se(exp: &ResolvedExperiment, avg: &TimeAverage, seed: u64) -> f64 {
    let block = ((exp.config.block_length / avg.step).round() as usize).max(1);
    stats::block_bootstrap_se(&avg.series, block, 200, seed)
}

pub fn simulate(
    exp: &ResolvedExperiment,
    out_dir: &Path,
    n_records: Option<usize>,
) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    let rho0 = exp.initial_state(&u)?;
    let count = n_records.unwrap_or(config.n_traj);
    let records = sample_ensemble(
        &u,
        &rho0,
        config.horizon,
        config.seed,
        STREAM_SIMULATE,
        count,
        config.dt,
    )?;

    let records_dir = out_dir.join("records");
    std::fs::create_dir_all(&records_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", records_dir.display())))?;
    let config_line = format!(
        "# config={}\n",
        serde_json::to_string(&config.echo()).unwrap()
    );
    for (k, record) in records.iter().enumerate() {
        let mut buf = Vec::new();
        record
            .write_csv(&mut buf, config.seed, STREAM_SIMULATE + k as u64)
            .map_err(|e| Error::Config(format!("record serialization: {e}")))?;
        let text = format!("{config_line}{}", String::from_utf8(buf).unwrap());
        write_text(&records_dir.join(format!("record_{k:05}.csv")), &text)?;
    }

    let clicks: usize = records.iter().map(|r| r.len()).sum();
    let mut report = RunReport::new("simulate", config.seed, config.echo());
    report.rows.push(ResultRow {
        statistic: "records".into(),
        parameters: format!("horizon={}", config.horizon),
        value: records.len() as f64,
        std_error: 0.0,
        n_samples: records.len(),
    });
    report.rows.push(ResultRow {
        statistic: "total_clicks".into(),
        parameters: format!("horizon={}", config.horizon),
        value: clicks as f64,
        std_error: 0.0,
        n_samples: records.len(),
    });
    Ok(report)
}

pub fn verify_normalisation(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    let tol = config.tolerance("normalisation", 1e-10);
    let mut rng = RngStream::new(config.seed, 0).rng();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rho = DensityMatrix::random(u.dim(), &mut rng);
        worst = worst.max(u.full().apply(&rho).trace().re.abs());
    }
    // The splitting identity comes along for free.
    let mut rebuilt = u.no_click().clone();
    for j in u.jumps() {
        rebuilt = rebuilt.add(j);
    }
    let split_defect = rebuilt.matrix().sub(u.full().matrix()).max_abs();

    let mut report = RunReport::new("verify normalisation", config.seed, config.echo());
    report.checks.push(CheckOutcome::new(
        "trace_annihilation",
        worst < tol,
        worst,
        tol,
    ));
    report.checks.push(CheckOutcome::new(
        "unraveling_splitting",
        split_defect < 1e-12,
        split_defect,
        1e-12,
    ));
    Ok(report)
}

pub fn verify_markov(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    let rho = exp.initial_state(&u)?;
    let quad_ctl = config.quad_controls();
    let tol = config.tolerance("markov", 1e-5);

    let pairs: Vec<(&str, f64, f64, CylinderEvent, CylinderEvent)> = vec![
        (
            "markov_sure_events",
            0.5,
            0.5,
            CylinderEvent::omega(0.5),
            CylinderEvent::omega(0.5),
        ),
        (
            "markov_no_clicks",
            0.7,
            0.9,
            CylinderEvent::no_clicks(0.7),
            CylinderEvent::no_clicks(0.9),
        ),
        (
            "markov_one_click_boxes",
            0.5,
            0.6,
            CylinderEvent::new(0.5, vec![(0.1, 0.3)], vec![0], true)?,
            CylinderEvent::new(0.6, vec![(0.2, 0.5)], vec![0], true)?,
        ),
    ];

    let mut report = RunReport::new("verify markov", config.seed, config.echo());
    for (name, s, t, e, f) in pairs {
        let result = check_markov(&u, s, t, &e, &f, &rho, &quad_ctl)?;
        let bound = result.quadrature_error + result.truncation_error + tol;
        report.checks.push(
            CheckOutcome::new(name, result.discrepancy <= bound, result.discrepancy, bound)
                .with("quadrature_error", json!(result.quadrature_error))
                .with("truncation_error", json!(result.truncation_error)),
        );
    }
    Ok(report)
}

pub fn verify_waiting_time(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    let rho0 = exp.initial_state(&u)?;
    let records = sample_ensemble(
        &u,
        &rho0,
        config.horizon,
        config.seed,
        STREAM_WAITING,
        config.n_traj,
        config.dt,
    )?;
    let mut first: Vec<f64> = records
        .iter()
        .filter_map(|r| r.first_click_time())
        .collect();
    if (first.len() as f64) < 0.5 * records.len() as f64 {
        return Err(Error::Config(format!(
            "only {} of {} records clicked before the horizon; extend the horizon or pick a \
             different initial state",
            first.len(),
            records.len()
        )));
    }
    first.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Exact first-click CDF: 1 - tr(e^{tL0} ρ0), evaluated by stepping the
    // no-click propagator between consecutive sample times.
    let mut cdf = Vec::with_capacity(first.len());
    let mut state = linalg::vectorize(rho0.matrix());
    let mut prev = 0.0f64;
    for &t in &first {
        let gap = t - prev;
        if gap > 0.0 {
            state = lindblad::propagate(u.no_click(), gap)?
                .matrix()
                .matvec(&state);
        }
        prev = t;
        cdf.push(1.0 - linalg::vec_trace(&state, u.dim()).re);
    }
    let n = records.len();
    let clicked = first.len();
    let mut ks = 0.0f64;
    for (i, &f) in cdf.iter().enumerate() {
        ks = ks.max((f - i as f64 / n as f64).abs());
        ks = ks.max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let default_tol = 1.63 / (n as f64).sqrt();
    let tol = config.tolerance("waiting_time", default_tol);

    let mut report = RunReport::new("verify waiting-time", config.seed, config.echo());
    report.checks.push(
        CheckOutcome::new("waiting_time_ks", ks < tol, ks, tol)
            .with("records", json!(n))
            .with("clicked", json!(clicked)),
    );
    Ok(report)
}

pub fn verify_subset_sum(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let mut rng = RngStream::new(config.seed, STREAM_KRAUS + 1).rng();
    use rand::Rng;
    let cases = 1000usize;
    let mut failures = 0usize;
    for _ in 0..cases {
        let m = rng.gen_range(0..=12);
        let mut times: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let record = DetectionRecord::new(10.0, times.into_iter().map(|t| (t, 0)).collect())?;
        let n = rng.gen_range(1..=3usize);
        let eps = rng.gen_range(0.05..0.5);
        let mut boxes = Vec::with_capacity(n);
        let mut t = rng.gen_range(0.0..2.0);
        for _ in 0..n {
            boxes.push(t);
            t += eps + rng.gen_range(0.01..2.0);
        }
        if !subset_sum_identity_check(&record, &boxes, eps)?.equal {
            failures += 1;
        }
    }
    let mut report = RunReport::new("verify subset-sum", config.seed, config.echo());
    report.checks.push(
        CheckOutcome::new("subset_sum_identity", failures == 0, failures as f64, 0.0)
            .with("cases", json!(cases)),
    );
    Ok(report)
}

pub fn verify_moment_bound(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    if u.jump_count() != 1 {
        return Err(Error::Config(
            "moment bounds are defined for single-detector models".into(),
        ));
    }
    let gamma = config.response.build()?;
    let rho_ss = lindblad::stationary_state(u.full(), 1e-8)?;
    let jump_norm = u.jump_norms()[0];

    let mut report = RunReport::new("verify moment-bound", config.seed, config.echo());
    for n in 1..=3usize {
        let times = vec![0.0; n];
        let est = ensemble_expectation_product(
            &u,
            &rho_ss,
            &gamma,
            &times,
            config.n_traj,
            config.seed,
            STREAM_ENSEMBLE + (n as u64) * (1 << 24),
            config.burn_in,
            config.dt,
        )?;
        let bound = moment_bound(n, jump_norm, &gamma);
        report.checks.push(
            CheckOutcome::new(
                &format!("moment_bound_n{n}"),
                est.mean <= bound,
                est.mean,
                bound,
            )
            .with("std_error", json!(est.std_error)),
        );
        report.rows.push(ResultRow {
            statistic: format!("current_moment_{n}"),
            parameters: format!("burn_in={}", config.burn_in),
            value: est.mean,
            std_error: est.std_error,
            n_samples: est.n,
        });
    }
    Ok(report)
}

/// Both sides of the current-average identity for `n = 1` and the full probe
/// vector, from one long record and one ensemble.
pub fn correlate_current(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    if u.jump_count() != 1 {
        return Err(Error::Config(
            "correlate current needs a single-detector model".into(),
        ));
    }
    let gamma = config.response.build()?;
    let rho_ss = lindblad::stationary_state(u.full(), 1e-8)?;
    let theta = exp.initial_state(&u)?;
    let dt_int = config.dt_int();

    let t_last = config.times.last().copied().unwrap_or(0.0);
    let horizon = t_last + config.tau + 1.0;
    let record = sample_record(
        &u,
        &theta,
        horizon,
        RngStream::new(config.seed, STREAM_RECORD),
        config.dt,
    )?;

    let g1 = nonexclusive_density(&u, &rho_ss, &[0.0])?;
    let mut report = RunReport::new("correlate current", config.seed, config.echo());

    let mut probe_sets: Vec<Vec<f64>> = vec![vec![config.times[0]]];
    if config.times.len() > 1 {
        probe_sets.push(config.times.clone());
    }
    for times in &probe_sets {
        let n = times.len();
        let avg = time_average_current_product(&record, &gamma, times, config.tau, dt_int)?;
        let se_time = bootstrap_se(exp, &avg, config.seed ^ n as u64);
        let ens = ensemble_expectation_product(
            &u,
            &rho_ss,
            &gamma,
            times,
            config.n_traj,
            config.seed,
            STREAM_ENSEMBLE,
            config.burn_in,
            config.dt,
        )?;
        let combined = (se_time * se_time + ens.std_error * ens.std_error).sqrt();
        let diff = (avg.value - ens.mean).abs();
        let sigmas = config.tolerance("current_sigmas", 3.0);
        report.checks.push(
            CheckOutcome::new(
                &format!("current_average_n{n}"),
                diff <= sigmas * combined + avg.integration_error,
                diff,
                sigmas * combined + avg.integration_error,
            )
            .with("time_average", json!(avg.value))
            .with("ensemble_mean", json!(ens.mean))
            .with("combined_std_error", json!(combined))
            .with("discrepancy_sigmas", json!(diff / combined.max(1e-300))),
        );
        report.rows.push(ResultRow {
            statistic: format!("time_average_current_product_n{n}"),
            parameters: format!("times={};tau={}", fmt_times(times), config.tau),
            value: avg.value,
            std_error: se_time,
            n_samples: avg.series.len(),
        });
        report.rows.push(ResultRow {
            statistic: format!("ensemble_expectation_n{n}"),
            parameters: format!("times={};burn_in={}", fmt_times(times), config.burn_in),
            value: ens.mean,
            std_error: ens.std_error,
            n_samples: ens.n,
        });
        if n == 1 {
            // Analytic stationary mean: E(I) = g₁ ‖γ‖₁.
            let analytic = g1 * gamma.l1_norm();
            let diff = (avg.value - analytic).abs();
            report.checks.push(
                CheckOutcome::new(
                    "current_mean_analytic",
                    diff <= sigmas * se_time + avg.integration_error,
                    diff,
                    sigmas * se_time + avg.integration_error,
                )
                .with("analytic", json!(analytic)),
            );
            report.rows.push(ResultRow {
                statistic: "analytic_stationary_mean".into(),
                parameters: "g1*l1".into(),
                value: analytic,
                std_error: 0.0,
                n_samples: 0,
            });
        }
    }
    Ok(report)
}

/// Coincidence averages along one record against the box integrals of the
/// non-exclusive densities, plus the equal-time antibunching ratio.
pub fn correlate_coincidence(exp: &ResolvedExperiment) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    if u.jump_count() != 1 {
        return Err(Error::Config(
            "correlate coincidence needs a single-detector model".into(),
        ));
    }
    if config.times.len() < 2 {
        return Err(Error::Config(
            "correlate coincidence needs at least two probe times".into(),
        ));
    }
    let spec = CorrelationSpec::new(
        config.times.clone(),
        config.epsilon,
        config.tau,
        config.burn_in,
    )?;
    let rho_ss = lindblad::stationary_state(u.full(), 1e-8)?;
    let theta = exp.initial_state(&u)?;
    let eps = spec.epsilon;
    let dt_int = config.dt_int();

    let t_last = *config.times.last().unwrap();
    let horizon = t_last + config.tau + eps + 1.0;
    let record = sample_record(
        &u,
        &theta,
        horizon,
        RngStream::new(config.seed, STREAM_RECORD),
        config.dt,
    )?;

    let avg = coincidence_time_average(&record, &config.times, eps, config.tau, dt_int)?;
    let se = bootstrap_se(exp, &avg, config.seed ^ 0xc01c);
    let integral = gn_box_integral(&u, &rho_ss, &config.times, eps, config.quad_nodes)?;
    let sigmas = config.tolerance("coincidence_sigmas", 3.0);
    let bound = sigmas * se + integral.error + avg.integration_error;
    let diff = (avg.value - integral.value).abs();

    let mut report = RunReport::new("correlate coincidence", config.seed, config.echo());
    report.checks.push(
        CheckOutcome::new("coincidence_vs_gn_integral", diff <= bound, diff, bound)
            .with("time_average", json!(avg.value))
            .with("gn_box_integral", json!(integral.value))
            .with("bootstrap_std_error", json!(se)),
    );
    report.rows.push(ResultRow {
        statistic: "coincidence_time_average".into(),
        parameters: format!(
            "times={};eps={eps};tau={}",
            fmt_times(&config.times),
            config.tau
        ),
        value: avg.value,
        std_error: se,
        n_samples: avg.series.len(),
    });
    report.rows.push(ResultRow {
        statistic: "gn_box_integral".into(),
        parameters: format!("times={};eps={eps}", fmt_times(&config.times)),
        value: integral.value,
        std_error: integral.error,
        n_samples: 0,
    });

    // Equal-time coincidences need two distinct clicks inside one box; an
    // antibunched source suppresses them far below the separated rate.
    let t0 = config.times[0];
    let equal = coincidence_time_average(&record, &[t0, t0], eps, config.tau, dt_int)?;
    let ratio_tol = config.tolerance("antibunching_ratio", 0.05);
    let ratio = equal.value / avg.value.max(1e-300);
    report.checks.push(
        CheckOutcome::new(
            "equal_time_suppression",
            ratio < ratio_tol,
            ratio,
            ratio_tol,
        )
        .with("equal_time_average", json!(equal.value)),
    );
    report.rows.push(ResultRow {
        statistic: "equal_time_coincidence_average".into(),
        parameters: format!("t={t0};eps={eps};tau={}", config.tau),
        value: equal.value,
        std_error: 0.0,
        n_samples: equal.series.len(),
    });
    Ok(report)
}

pub fn correlate_spectrum(exp: &ResolvedExperiment, out_dir: &Path) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    if u.jump_count() != 1 {
        return Err(Error::Config(
            "correlate spectrum needs a single-detector model".into(),
        ));
    }
    let gamma = config.response.build()?;
    let theta = exp.initial_state(&u)?;
    let dt_int = config.dt_int();
    let lags: Vec<f64> = (0..config.lag_count)
        .map(|k| k as f64 * config.lag_step)
        .collect();
    let lag_max = *lags.last().unwrap();
    let horizon = lag_max + config.tau + 1.0;
    let record = sample_record(
        &u,
        &theta,
        horizon,
        RngStream::new(config.seed, STREAM_RECORD),
        config.dt,
    )?;

    let spectrum = current_autocorrelation_spectrum(&record, &gamma, &lags, config.tau, dt_int)?;
    write_pairs_csv(
        &out_dir.join("autocovariance.csv"),
        &config.echo(),
        "lag",
        "autocovariance",
        &spectrum.autocovariance,
    )?;
    write_pairs_csv(
        &out_dir.join("spectrum.csv"),
        &config.echo(),
        "frequency",
        "power",
        &spectrum.power,
    )?;

    // Definitional consistency at lag 0 and decorrelation at the last lag.
    let mean = time_average_current_product(&record, &gamma, &[0.0], config.tau, dt_int)?;
    let second = time_average_current_product(&record, &gamma, &[0.0, 0.0], config.tau, dt_int)?;
    let lag0_defect =
        (spectrum.autocovariance[0].1 - (second.value - mean.value * mean.value)).abs();

    let far = time_average_current_product(&record, &gamma, &[0.0, lag_max], config.tau, dt_int)?;
    let se_far = bootstrap_se(exp, &far, config.seed ^ 0x5bec);
    let c0 = spectrum.autocovariance[0].1;
    let far_cov = spectrum.autocovariance.last().unwrap().1.abs();
    let decay_frac = config.tolerance("spectrum_decay_fraction", 0.15);
    let far_bound = decay_frac * c0.abs() + 3.0 * se_far;

    let mut report = RunReport::new("correlate spectrum", config.seed, config.echo());
    report.checks.push(CheckOutcome::new(
        "lag_zero_consistency",
        lag0_defect < 1e-9,
        lag0_defect,
        1e-9,
    ));
    report.checks.push(
        CheckOutcome::new(
            "long_lag_decorrelation",
            far_cov <= far_bound,
            far_cov,
            far_bound,
        )
        .with("lag", json!(lag_max)),
    );
    Ok(report)
}

pub fn tabulate_gn(exp: &ResolvedExperiment, out_dir: &Path) -> Result<RunReport> {
    let config = &exp.config;
    let u = exp.unraveling()?;
    if u.jump_count() != 1 {
        return Err(Error::Config(
            "gn tabulation needs a single-detector model".into(),
        ));
    }
    let rho_ss = lindblad::stationary_state(u.full(), 1e-8)?;
    let norm = u.jump_norms()[0];

    let mut report = RunReport::new("gn", config.seed, config.echo());
    let mut worst_excess = 0.0f64;
    for n in 1..=config.times.len() {
        let times = &config.times[..n];
        let g = nonexclusive_density(&u, &rho_ss, times)?;
        worst_excess = worst_excess.max(g - norm.powi(n as i32));
        report.rows.push(ResultRow {
            statistic: format!("g{n}"),
            parameters: format!("times={}", fmt_times(times)),
            value: g,
            std_error: 0.0,
            n_samples: 0,
        });
    }
    if config.times.len() >= 2 {
        let est = gn_box_integral(
            &u,
            &rho_ss,
            &config.times,
            config.epsilon,
            config.quad_nodes,
        )?;
        report.rows.push(ResultRow {
            statistic: format!("g{}_box_integral", config.times.len()),
            parameters: format!("times={};eps={}", fmt_times(&config.times), config.epsilon),
            value: est.value,
            std_error: est.error,
            n_samples: 0,
        });

        // The pair-correlation sweep g₂(0, Δ) over the probe span: the
        // antibunching dip and its Rabi ringing in one table.
        let span = config.times.last().unwrap() - config.times[0];
        let steps = (config.lag_count - 1).max(1);
        let sweep: Vec<(f64, f64)> = (0..config.lag_count)
            .map(|k| {
                let gap = span * k as f64 / steps as f64;
                let g2 = nonexclusive_density(&u, &rho_ss, &[0.0, gap])?;
                Ok((gap, g2))
            })
            .collect::<Result<_>>()?;
        write_pairs_csv(
            &out_dir.join("g2_sweep.csv"),
            &config.echo(),
            "gap",
            "g2",
            &sweep,
        )?;
    }
    report.checks.push(CheckOutcome::new(
        "gn_jump_norm_bound",
        worst_excess <= 1e-12,
        worst_excess,
        1e-12,
    ));
    Ok(report)
}

pub fn kraus_suite(exp: &ResolvedExperiment, out_dir: &Path) -> Result<RunReport> {
    let config = &exp.config;
    let fam = exp.document.require_kraus()?;
    let dim = fam.dim();
    let theta = resolve_state(&config.initial_state, dim, || fam.fixed_point(1e-8))?;

    // Empirical length-3 sequence frequencies against the exact chain
    // probabilities, scored by chi-square.
    let m = 3usize;
    let chains =
        kraus::sample_outcome_ensemble(fam, &theta, m, config.seed, STREAM_KRAUS, config.n_traj);
    let k = fam.outcome_count();
    let cells = k.pow(m as u32);
    let mut observed = vec![0u64; cells];
    for chain in &chains {
        let mut idx = 0usize;
        for &o in chain {
            idx = idx * k + o;
        }
        observed[idx] += 1;
    }
    let mut expected = vec![0.0f64; cells];
    for (cell, e) in expected.iter_mut().enumerate() {
        let mut seq = vec![0usize; m];
        let mut rem = cell;
        for j in (0..m).rev() {
            seq[j] = rem % k;
            rem /= k;
        }
        *e = config.n_traj as f64 * kraus::sequence_probability(fam, &theta, &seq)?;
    }
    let chi2 = stats::chi_square_statistic(&observed, &expected);
    let dof = expected
        .iter()
        .filter(|&&e| e > 0.0)
        .count()
        .saturating_sub(1);
    let p = stats::chi_square_sf(chi2, dof.max(1));
    let p_tol = config.tolerance("chi_square_p", 0.001);
    // Cells with zero probability are excluded from the statistic, so any
    // sampled mass there must fail the check outright.
    let impossible_hits: u64 = observed
        .iter()
        .zip(&expected)
        .filter(|(_, &e)| e == 0.0)
        .map(|(&o, _)| o)
        .sum();

    let mut text = format!(
        "# config={}\n",
        serde_json::to_string(&config.echo()).unwrap()
    );
    for chain in &chains {
        let row: Vec<String> = chain.iter().map(|o| (o + 1).to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_text(&out_dir.join("sequences.csv"), &text)?;

    let mut report = RunReport::new("kraus", config.seed, config.echo());
    report.checks.push(
        CheckOutcome::new(
            "sequence_frequency_chi_square",
            p > p_tol && impossible_hits == 0,
            p,
            p_tol,
        )
        .with("chi_square", json!(chi2))
        .with("dof", json!(dof))
        .with("impossible_sequence_hits", json!(impossible_hits)),
    );

    // Long-run averages of outcome indicators against the fixed point.
    let steps = (config.tau.round() as usize).max(1000);
    for outcome in 0..k {
        let avg = kraus::discrete_time_average(
            fam,
            &theta,
            |w| if w[0] == outcome { 1.0 } else { 0.0 },
            1,
            steps,
            RngStream::new(config.seed, STREAM_KRAUS + 777),
        )?;
        let diff = (avg.time_average - avg.stationary_expectation).abs();
        let bound = 3.0 * avg.std_error.max(1.0 / (steps as f64).sqrt());
        report.checks.push(
            CheckOutcome::new(
                &format!("ergodic_average_outcome_{}", outcome + 1),
                diff <= bound,
                diff,
                bound,
            )
            .with("time_average", json!(avg.time_average))
            .with("stationary_expectation", json!(avg.stationary_expectation)),
        );
        report.rows.push(ResultRow {
            statistic: format!("outcome_{}_rate", outcome + 1),
            parameters: format!("steps={steps}"),
            value: avg.time_average,
            std_error: avg.std_error,
            n_samples: avg.samples,
        });
    }
    Ok(report)
}
