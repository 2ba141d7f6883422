//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test -- --nocapture`).
//!
//! Criteria 1-10 exercise the library on the desk-scale reference models;
//! the byte-level CLI determinism criterion lives in the CLI crate's own
//! acceptance test.

use ergodic_counts::kraus::{self, amplitude_damping, projective_family};
use ergodic_counts::lindblad::{
    build_generator, driven_atom, propagate, pure_decay, stationary_state, DensityMatrix,
    LindbladModel,
};
use ergodic_counts::observables::{
    coincidence_time_average, ensemble_expectation_product, gn_box_integral, moment_bound,
    nonexclusive_density, subset_sum_identity_check, time_average_current_product,
    ResponseFunction,
};
use ergodic_counts::stats;
use ergodic_counts::trajectory::{sample_ensemble, sample_record, DetectionRecord, RngStream};
use ergodic_counts::unraveling::{
    check_markov, event_operation, unravel, CylinderEvent, QuadratureControls,
};
use ergodic_counts::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}

#[test]
fn criterion_01_generator_normalisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let dim = 2 + k % 3; // 2, 3, 4
        let model = LindbladModel::random(dim, 1 + k % 3, &mut rng);
        let gen = build_generator(&model);
        for _ in 0..50 {
            let rho = DensityMatrix::random(dim, &mut rng);
            worst = worst.max(gen.apply(&rho).trace().re.abs());
        }
    }
    verdict(
        "criterion 1 (generator annihilates the trace)",
        worst < 1e-10,
        &format!("max |tr L(rho)| = {worst:.3e} over 100 models x 50 states, tolerance 1e-10"),
    );
}

#[test]
fn criterion_02_unraveling_identity() {
    let shipped = [
        driven_atom(1.0, 1.0),
        pure_decay(1.0),
        driven_atom(2.0, 0.5),
    ];
    let mut worst = 0.0f64;
    for model in &shipped {
        let u = unravel(model);
        let mut rebuilt = u.no_click().clone();
        for j in u.jumps() {
            rebuilt = rebuilt.add(j);
        }
        worst = worst.max(rebuilt.matrix().sub(u.full().matrix()).max_abs());
    }
    verdict(
        "criterion 2 (unraveling splits the generator)",
        worst < 1e-12,
        &format!("max entrywise |L - (L0 + sum J)| = {worst:.3e}, tolerance 1e-12"),
    );
}

#[test]
fn criterion_03_measure_reproduces_semigroup() {
    let u = unravel(&driven_atom(1.0, 1.0));
    let rho = DensityMatrix::basis_state(2, 1);
    let quad = QuadratureControls::default();
    let mut worst = 0.0f64;
    for t in [0.25f64, 0.5, 1.0, 1.5, 2.0] {
        let dyson = event_operation(&u, &CylinderEvent::omega(t), t, &rho, &quad).unwrap();
        let direct = propagate(u.full(), t).unwrap().apply(&rho);
        worst = worst.max(dyson.state.matrix().sub(&direct).max_abs());
    }
    verdict(
        "criterion 3 (truncated click expansion matches e^(tL))",
        worst < 1e-6,
        &format!("max entrywise deviation {worst:.3e} for t <= 2, n_max = 8, tolerance 1e-6"),
    );
}

#[test]
fn criterion_04_waiting_time_law() {
    let u = unravel(&pure_decay(1.0));
    let excited = DensityMatrix::basis_state(2, 1);
    let records = sample_ensemble(&u, &excited, 15.0, 404, 0, 100_000, 0.01).unwrap();
    let first: Vec<f64> = records
        .iter()
        .filter_map(|r| r.first_click_time())
        .collect();
    let ks = stats::ks_statistic(&first, records.len(), |t| 1.0 - (-t).exp());
    verdict(
        "criterion 4 (waiting-time law)",
        ks < 0.006,
        &format!("KS distance {ks:.5} over 1e5 records, tolerance 0.006"),
    );
}

#[test]
fn criterion_05_markov_property() {
    let u = unravel(&driven_atom(1.0, 1.0));
    let rho = DensityMatrix::basis_state(2, 1);
    let quad = QuadratureControls::default();
    let pairs = [
        (
            "sure events",
            0.5,
            0.5,
            CylinderEvent::omega(0.5),
            CylinderEvent::omega(0.5),
        ),
        (
            "no-click events",
            0.7,
            0.9,
            CylinderEvent::no_clicks(0.7),
            CylinderEvent::no_clicks(0.9),
        ),
        (
            "one-click boxes",
            0.5,
            0.6,
            CylinderEvent::new(0.5, vec![(0.1, 0.3)], vec![0], true).unwrap(),
            CylinderEvent::new(0.6, vec![(0.2, 0.5)], vec![0], true).unwrap(),
        ),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (name, s, t, e, f) in pairs {
        let report = check_markov(&u, s, t, &e, &f, &rho, &quad).unwrap();
        let bound = report.quadrature_error + 1e-5;
        pass &= report.discrepancy <= bound;
        detail.push_str(&format!(
            "{name}: {:.3e} <= {bound:.3e}; ",
            report.discrepancy
        ));
    }
    verdict(
        "criterion 5 (Markov composition law)",
        pass,
        detail.trim_end_matches("; "),
    );
}

/// Shared setup for the current-average criteria: the driven atom with the
/// exponential response of unit amplitude and half-unit decay time.
fn current_setup() -> (
    ergodic_counts::unraveling::Unraveling,
    DensityMatrix,
    ResponseFunction,
) {
    let u = unravel(&driven_atom(1.0, 1.0));
    let rho_ss = stationary_state(u.full(), 1e-9).unwrap();
    let gamma = ResponseFunction::exponential(1.0, 0.5).unwrap();
    (u, rho_ss, gamma)
}

fn bootstrap_se_of(avg: &ergodic_counts::observables::TimeAverage, seed: u64) -> f64 {
    let block = ((50.0 / avg.step).round() as usize).max(1);
    stats::block_bootstrap_se(&avg.series, block, 200, seed)
}

#[test]
fn criterion_06_time_averages_match_ensemble() {
    let (u, rho_ss, gamma) = current_setup();
    let tau = 10_000.0;
    let dt_int = 0.005;
    let times2 = [0.0, 0.5];
    let times3 = [0.0, 0.5, 1.0];

    // Ensemble (model-side) references, one per product order.
    let analytic1 = nonexclusive_density(&u, &rho_ss, &[0.0]).unwrap() * gamma.l1_norm();
    let ens2 =
        ensemble_expectation_product(&u, &rho_ss, &gamma, &times2, 20_000, 606, 0, 8.0, 0.01)
            .unwrap();
    let ens3 = ensemble_expectation_product(
        &u,
        &rho_ss,
        &gamma,
        &times3,
        20_000,
        606,
        1 << 20,
        8.0,
        0.01,
    )
    .unwrap();

    let initial_states = [
        ("ground", DensityMatrix::basis_state(2, 0)),
        ("excited", DensityMatrix::basis_state(2, 1)),
        ("maximally mixed", DensityMatrix::maximally_mixed(2)),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (idx, (name, theta)) in initial_states.iter().enumerate() {
        let record = sample_record(
            &u,
            theta,
            times3.last().unwrap() + tau + 1.0,
            RngStream::new(707, idx as u64),
            0.01,
        )
        .unwrap();

        let avg1 = time_average_current_product(&record, &gamma, &[0.0], tau, dt_int).unwrap();
        let se1 = bootstrap_se_of(&avg1, 1 + idx as u64);
        let d1 = (avg1.value - analytic1).abs();
        let b1 = 3.0 * se1 + avg1.integration_error;
        pass &= d1 <= b1;
        detail.push_str(&format!(
            "{name} n=1: |{:.4} - {analytic1:.4}| = {d1:.1e} <= {b1:.1e}; ",
            avg1.value
        ));

        let avg2 = time_average_current_product(&record, &gamma, &times2, tau, dt_int).unwrap();
        let se2 = bootstrap_se_of(&avg2, 11 + idx as u64);
        let c2 = (se2 * se2 + ens2.std_error * ens2.std_error).sqrt();
        let d2 = (avg2.value - ens2.mean).abs();
        let b2 = 3.0 * c2 + avg2.integration_error;
        pass &= d2 <= b2;
        detail.push_str(&format!("{name} n=2: {d2:.1e} <= {b2:.1e}; ",));

        let avg3 = time_average_current_product(&record, &gamma, &times3, tau, dt_int).unwrap();
        let se3 = bootstrap_se_of(&avg3, 21 + idx as u64);
        let c3 = (se3 * se3 + ens3.std_error * ens3.std_error).sqrt();
        let d3 = (avg3.value - ens3.mean).abs();
        let b3 = 3.0 * c3 + avg3.integration_error;
        pass &= d3 <= b3;
        detail.push_str(&format!("{name} n=3: {d3:.1e} <= {b3:.1e}; "));
    }
    verdict(
        "criterion 6 (single-record averages match ensemble values, 3 initial states, n=1..3)",
        pass,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn criterion_07_coincidences_match_density_integrals() {
    let (u, rho_ss, _) = current_setup();
    let tau = 10_000.0;
    let times = [0.0, 5.0];
    let eps = 0.1;
    let record = sample_record(&u, &rho_ss, 5.0 + tau + 2.0, RngStream::new(717, 0), 0.01).unwrap();

    let avg = coincidence_time_average(&record, &times, eps, tau, 0.01).unwrap();
    let se = bootstrap_se_of(&avg, 3);
    let integral = gn_box_integral(&u, &rho_ss, &times, eps, 16).unwrap();
    let diff = (avg.value - integral.value).abs();
    let bound = 3.0 * se + integral.error + avg.integration_error;

    let equal = coincidence_time_average(&record, &[0.0, 0.0], eps, tau, 0.01).unwrap();
    let suppressed = equal.value < 0.05 * avg.value;

    verdict(
        "criterion 7 (coincidence averages match g2 box integrals; equal-time antibunching)",
        diff <= bound && suppressed,
        &format!(
            "|{:.3e} - {:.3e}| = {diff:.3e} <= {bound:.3e}; equal-time {:.3e} < 5% of {:.3e}",
            avg.value, integral.value, equal.value, avg.value
        ),
    );
}

#[test]
fn criterion_08_subset_sum_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut failures = 0usize;
    let cases = 1000usize;
    for _ in 0..cases {
        let m = rng.gen_range(0..=12);
        let mut times: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let record =
            DetectionRecord::new(10.0, times.into_iter().map(|t| (t, 0)).collect()).unwrap();
        let n = rng.gen_range(1..=3usize);
        let eps = rng.gen_range(0.05..0.5);
        let mut boxes = Vec::with_capacity(n);
        let mut t = rng.gen_range(0.0..2.0);
        for _ in 0..n {
            boxes.push(t);
            t += eps + rng.gen_range(0.01..2.0);
        }
        let check = subset_sum_identity_check(&record, &boxes, eps).unwrap();
        if !check.equal {
            failures += 1;
        }
    }
    verdict(
        "criterion 8 (subset-sum counting identity)",
        failures == 0,
        &format!("{failures} failures in {cases} fuzzed records (exact integer equality)"),
    );
}

#[test]
fn criterion_09_moment_bounds() {
    let (u, rho_ss, gamma) = current_setup();
    let jump_norm = u.jump_norms()[0];
    let mut detail = String::new();
    let mut pass = true;
    for n in 1..=3usize {
        let times = vec![0.0; n];
        let est = ensemble_expectation_product(
            &u,
            &rho_ss,
            &gamma,
            &times,
            20_000,
            909,
            (n as u64) << 20,
            8.0,
            0.01,
        )
        .unwrap();
        let bound = moment_bound(n, jump_norm, &gamma);
        pass &= est.mean <= bound;
        detail.push_str(&format!("E(I^{n}) = {:.4} <= {bound:.4}; ", est.mean));
    }
    verdict(
        "criterion 9 (current moments below the integrability bound)",
        pass,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn criterion_10_discrete_time_suite() {
    // Empirical length-3 sequence frequencies against exact probabilities.
    let fam = amplitude_damping(0.3).unwrap();
    let theta = DensityMatrix::basis_state(2, 1);
    let chains = kraus::sample_outcome_ensemble(&fam, &theta, 3, 1010, 0, 100_000);
    let mut observed = [0u64; 8];
    for c in &chains {
        observed[c[0] * 4 + c[1] * 2 + c[2]] += 1;
    }
    let mut expected = [0.0f64; 8];
    for (cell, e) in expected.iter_mut().enumerate() {
        let seq = [cell / 4, (cell / 2) % 2, cell % 2];
        *e = chains.len() as f64 * kraus::sequence_probability(&fam, &theta, &seq).unwrap();
    }
    let chi2 = stats::chi_square_statistic(&observed, &expected);
    let dof = expected.iter().filter(|&&e| e > 0.0).count() - 1;
    let p = stats::chi_square_sf(chi2, dof);
    // Impossible sequences must never be sampled.
    let impossible_hits: u64 = observed
        .iter()
        .zip(&expected)
        .filter(|(_, &e)| e == 0.0)
        .map(|(&o, _)| o)
        .sum();
    assert_eq!(
        impossible_hits, 0,
        "sampler produced zero-probability sequences"
    );

    // Long-run outcome-2 rate against the fixed point (ground state: never).
    let avg = kraus::discrete_time_average(
        &fam,
        &theta,
        |w| if w[0] == 1 { 1.0 } else { 0.0 },
        1,
        100_000,
        RngStream::new(1010, 7),
    )
    .unwrap();
    let ergodic_ok = (avg.time_average - avg.stationary_expectation).abs()
        <= 3.0 * avg.std_error.max(1.0 / (avg.samples as f64).sqrt());

    // The projective family must surface the degenerate fixed point.
    let projective = projective_family(2).unwrap();
    let degenerate = matches!(
        projective.fixed_point(1e-9),
        Err(Error::NonUniqueEquilibrium { dim: 2 })
    );

    verdict(
        "criterion 10 (discrete-time Kraus suite)",
        p > 0.001 && ergodic_ok && degenerate,
        &format!(
            "chi2 = {chi2:.2} (dof {dof}) p = {p:.4} > 0.001; ergodic diff {:.2e}; projective family degenerate: {degenerate}",
            (avg.time_average - avg.stationary_expectation).abs()
        ),
    );
}
