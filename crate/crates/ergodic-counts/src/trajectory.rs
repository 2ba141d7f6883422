//! Jump Monte Carlo sampling of detection records.
//!
//! A record is sampled by evolving the unnormalized state with the no-click
//! semigroup `e^{dt L0}` and watching its trace (the survival probability)
//! cross a fresh uniform draw. The crossing step is then refined by bisection
//! with precomputed half-step propagators down to an absolute time tolerance
//! of 1e-10, which removes the first-order step bias from the waiting-time
//! law. At a click, a detector is selected with probability proportional to
//! `tr J_i(ρ̃)` and the matching jump channel is applied.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::lindblad::DensityMatrix;
use crate::unraveling::Unraveling;

/// Absolute tolerance for the bisection refinement of click times.
const CLICK_TIME_TOL: f64 = 1e-10;

/// A finite detection record: ordered clicks `(time, detector)` in
/// `[0, horizon]`. Detector indices are zero-based in memory and one-based in
/// the CSV serialization.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    horizon: f64,
    clicks: Vec<(f64, usize)>,
}

impl DetectionRecord {
    pub fn new(horizon: f64, clicks: Vec<(f64, usize)>) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!(
                "horizon {horizon} must be finite and nonnegative"
            )));
        }
        let mut prev = 0.0f64;
        for &(t, _) in &clicks {
            if !t.is_finite() || t < 0.0 || t > horizon {
                return Err(Error::Domain(format!(
                    "click time {t} outside [0, {horizon}]"
                )));
            }
            if t < prev {
                return Err(Error::Domain("click times must be nondecreasing".into()));
            }
            prev = t;
        }
        Ok(Self { horizon, clicks })
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            horizon,
            clicks: Vec::new(),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn clicks(&self) -> &[(f64, usize)] {
        &self.clicks
    }

    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }

    pub fn first_click_time(&self) -> Option<f64> {
        self.clicks.first().map(|c| c.0)
    }

    /// Drop everything up to time `t` and shift the remainder to start at 0.
    /// A click exactly at `t` is dropped; shifting past the horizon leaves an
    /// empty record of horizon 0.
    pub fn shift(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("shift {t} must be nonnegative")));
        }
        if t > self.horizon {
            return Ok(Self::empty(0.0));
        }
        let clicks = self
            .clicks
            .iter()
            .filter(|(s, _)| *s > t)
            .map(|&(s, d)| (s - t, d))
            .collect();
        Ok(Self {
            horizon: self.horizon - t,
            clicks,
        })
    }

    /// Number of clicks with `a ≤ time ≤ b`, any detector.
    pub fn count_in_interval(&self, a: f64, b: f64) -> usize {
        self.clicks
            .iter()
            .filter(|(t, _)| *t >= a && *t <= b)
            .count()
    }

    /// Serialize as CSV: a comment header with the horizon and seeding, then
    /// one `time,detector` row per click (detector one-based). Times carry 17
    /// significant digits so the round trip is bit exact.
    pub fn write_csv(&self, w: &mut impl Write, seed: u64, stream: u64) -> std::io::Result<()> {
        writeln!(
            w,
            "# horizon={:.16e} seed={} stream={}",
            self.horizon, seed, stream
        )?;
        for &(t, d) in &self.clicks {
            writeln!(w, "{:.16e},{}", t, d + 1)?;
        }
        Ok(())
    }

    /// Parse the format written by [`Self::write_csv`]. Unknown comment lines
    /// are ignored. Returns the record together with its seed and stream.
    pub fn read_csv(r: impl BufRead) -> Result<(Self, u64, u64)> {
        let mut horizon: Option<f64> = None;
        let mut seed = 0u64;
        let mut stream = 0u64;
        let mut clicks = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("horizon=") {
                        horizon = Some(v.parse().map_err(|_| {
                            Error::Parse(format!("line {}: bad horizon {v:?}", lineno + 1))
                        })?);
                    } else if let Some(v) = field.strip_prefix("seed=") {
                        seed = v.parse().map_err(|_| {
                            Error::Parse(format!("line {}: bad seed {v:?}", lineno + 1))
                        })?;
                    } else if let Some(v) = field.strip_prefix("stream=") {
                        stream = v.parse().map_err(|_| {
                            Error::Parse(format!("line {}: bad stream {v:?}", lineno + 1))
                        })?;
                    }
                }
                continue;
            }
            let (ts, ds) = line.split_once(',').ok_or_else(|| {
                Error::Parse(format!("line {}: expected time,detector", lineno + 1))
            })?;
            let t: f64 = ts
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad time {ts:?}", lineno + 1)))?;
            let d: usize = ds
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad detector {ds:?}", lineno + 1)))?;
            if d == 0 {
                return Err(Error::Parse(format!(
                    "line {}: detector indices are one-based in CSV",
                    lineno + 1
                )));
            }
            clicks.push((t, d - 1));
        }
        let horizon =
            horizon.ok_or_else(|| Error::Parse("missing '# horizon=...' header".into()))?;
        Ok((Self::new(horizon, clicks)?, seed, stream))
    }
}

/// A reproducible random stream: `(master_seed, stream_index)` fully
/// determines the generator, independent of thread scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Precomputed propagators for one (unraveling, dt) pair, reused across an
/// ensemble.
struct Stepper {
    dim: usize,
    dt: f64,
    full_step: CMat,
    /// `e^{(dt/2^k) L0}` for k = 1..=levels.
    half_steps: Vec<CMat>,
    jump_mats: Vec<CMat>,
}

impl Stepper {
    fn new(u: &Unraveling, dt: f64) -> Self {
        let l0 = u.no_click().matrix();
        let levels = ((dt / CLICK_TIME_TOL).log2().ceil() as usize).max(1);
        let half_steps = (1..=levels)
            .map(|k| linalg::expm(&l0.scale_re(dt / (1u64 << k) as f64)))
            .collect();
        Stepper {
            dim: u.dim(),
            dt,
            full_step: linalg::expm(&l0.scale_re(dt)),
            half_steps,
            jump_mats: u.jumps().iter().map(|j| j.matrix().clone()).collect(),
        }
    }

    fn trace(&self, state: &[Complex64]) -> f64 {
        linalg::vec_trace(state, self.dim).re
    }

    /// Locate the survival crossing inside one full `dt` step starting from
    /// `state` (survival above `target` at offset 0). Returns the offset of
    /// the crossing and the state just before it. The level count is sized so
    /// the final interval is at most `CLICK_TIME_TOL` wide.
    fn bisect(&self, state: &[Complex64], target: f64) -> (f64, Vec<Complex64>) {
        let mut offset = 0.0f64;
        let mut current = state.to_vec();
        for (k, half_step) in self.half_steps.iter().enumerate() {
            let half = self.dt / (1u64 << (k + 1)) as f64;
            let candidate = half_step.matvec(&current);
            if self.trace(&candidate) > target {
                current = candidate;
                offset += half;
            }
        }
        debug_assert!(self.dt / (1u64 << self.half_steps.len()) as f64 <= CLICK_TIME_TOL);
        (offset, current)
    }
}

/// Sample one detection record distributed according to the exclusive click
/// densities of the unraveling, starting from `rho0`.
pub fn sample_record(
    u: &Unraveling,
    rho0: &DensityMatrix,
    horizon: f64,
    stream: RngStream,
    dt: f64,
) -> Result<DetectionRecord> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon {horizon} must be positive")));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step {dt} must be positive")));
    }
    if dt >= horizon {
        return Err(Error::Domain(format!(
            "step {dt} must be smaller than the horizon {horizon}"
        )));
    }
    let stepper = Stepper::new(u, dt);
    sample_with_stepper(u, &stepper, rho0, horizon, stream)
}

fn sample_with_stepper(
    u: &Unraveling,
    stepper: &Stepper,
    rho0: &DensityMatrix,
    horizon: f64,
    stream: RngStream,
) -> Result<DetectionRecord> {
    let mut rng = stream.rng();
    let mut state = linalg::vectorize(rho0.matrix());
    let trace0 = stepper.trace(&state);
    if trace0 > 1e-300 {
        for z in state.iter_mut() {
            *z /= trace0;
        }
    }
    let mut clicks: Vec<(f64, usize)> = Vec::new();
    let mut t = 0.0f64;
    let mut target: f64 = rng.gen();

    while t < horizon {
        let remaining = horizon - t;
        let step_len = stepper.dt.min(remaining);
        let standard = step_len == stepper.dt;
        let next = if standard {
            stepper.full_step.matvec(&state)
        } else {
            linalg::expm(&u.no_click().matrix().scale_re(step_len)).matvec(&state)
        };
        let survival = stepper.trace(&next);
        if survival > target {
            state = next;
            t += step_len;
            if survival < 1e-300 {
                return Err(Error::Numerical(format!(
                    "state trace underflow at t = {t}"
                )));
            }
            continue;
        }

        // The crossing lies inside this step: refine by bisection.
        let (offset, at_click) = if standard {
            stepper.bisect(&state, target)
        } else {
            bisect_fresh(u, &state, step_len, target, stepper.dim)
        };
        let click_time = t + offset;

        // Detector selection by cumulative weight in index order.
        let weights: Vec<f64> = stepper
            .jump_mats
            .iter()
            .map(|j| {
                linalg::vec_trace(&j.matvec(&at_click), stepper.dim)
                    .re
                    .max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numerical(format!(
                "no detector has positive click weight at t = {click_time}"
            )));
        }
        let draw: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut detector = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                detector = i;
                break;
            }
        }

        state = stepper.jump_mats[detector].matvec(&at_click);
        let tr = stepper.trace(&state);
        if tr <= 1e-300 {
            return Err(Error::Numerical(format!(
                "jump produced a zero-trace state at t = {click_time}"
            )));
        }
        for z in state.iter_mut() {
            *z /= tr;
        }
        clicks.push((click_time.min(horizon), detector));
        t = click_time;
        target = rng.gen();
    }

    DetectionRecord::new(horizon, clicks)
}

/// Bisection with freshly computed half-step propagators, for the one
/// off-grid partial step at the end of the horizon.
fn bisect_fresh(
    u: &Unraveling,
    state: &[Complex64],
    len: f64,
    target: f64,
    dim: usize,
) -> (f64, Vec<Complex64>) {
    let l0 = u.no_click().matrix();
    let mut offset = 0.0f64;
    let mut current = state.to_vec();
    let mut half = len / 2.0;
    // Stop once the *resulting* interval (the last applied half) is within
    // tolerance.
    while half > 0.5 * CLICK_TIME_TOL {
        let candidate = linalg::expm(&l0.scale_re(half)).matvec(&current);
        if linalg::vec_trace(&candidate, dim).re > target {
            current = candidate;
            offset += half;
        }
        half /= 2.0;
    }
    (offset, current)
}

/// Sample `count` records on consecutive streams, in parallel; the result
/// order follows the stream indices, so it is independent of scheduling.
pub fn sample_ensemble(
    u: &Unraveling,
    rho0: &DensityMatrix,
    horizon: f64,
    master_seed: u64,
    first_stream: u64,
    count: usize,
    dt: f64,
) -> Result<Vec<DetectionRecord>> {
    if !(horizon > 0.0) || !(dt > 0.0) || dt >= horizon {
        return Err(Error::Domain("ensemble needs 0 < dt < horizon".into()));
    }
    let stepper = Stepper::new(u, dt);
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            sample_with_stepper(
                u,
                &stepper,
                rho0,
                horizon,
                RngStream::new(master_seed, first_stream + k),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{
        driven_atom, propagate, pure_decay, stationary_state, ComplexOperator, LindbladModel,
    };
    use crate::unraveling::{unravel, CylinderEvent, QuadratureControls};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_jump_model_never_clicks() {
        let model = LindbladModel::new(
            ComplexOperator::hermitian(CMat::zeros(2, 2)).unwrap(),
            vec![ComplexOperator::new(CMat::zeros(2, 2)).unwrap()],
        )
        .unwrap();
        let u = unravel(&model);
        let rho = DensityMatrix::maximally_mixed(2);
        let record = sample_record(&u, &rho, 5.0, RngStream::new(1, 0), 0.01).unwrap();
        assert!(record.is_empty());
        assert_eq!(record.horizon(), 5.0);
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = DensityMatrix::basis_state(2, 1);
        let a = sample_record(&u, &rho, 50.0, RngStream::new(42, 7), 0.01).unwrap();
        let b = sample_record(&u, &rho, 50.0, RngStream::new(42, 7), 0.01).unwrap();
        assert_eq!(a, b);
        let c = sample_record(&u, &rho, 50.0, RngStream::new(42, 8), 0.01).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ensemble_matches_serial_sampling() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = DensityMatrix::basis_state(2, 0);
        let ensemble = sample_ensemble(&u, &rho, 5.0, 9, 100, 20, 0.01).unwrap();
        for (k, record) in ensemble.iter().enumerate() {
            let solo =
                sample_record(&u, &rho, 5.0, RngStream::new(9, 100 + k as u64), 0.01).unwrap();
            assert_eq!(record, &solo);
        }
    }

    #[test]
    fn degenerate_steps_are_rejected() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = DensityMatrix::basis_state(2, 0);
        assert!(matches!(
            sample_record(&u, &rho, 1.0, RngStream::new(0, 0), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            sample_record(&u, &rho, 0.0, RngStream::new(0, 0), 0.01),
            Err(Error::Domain(_))
        ));
    }

    /// Kolmogorov–Smirnov distance between sampled first-click times and a
    /// reference CDF; records without a click count in the denominator but
    /// produce no jump point.
    fn ks_first_click(records: &[DetectionRecord], cdf: impl Fn(f64) -> f64) -> f64 {
        let times: Vec<f64> = records
            .iter()
            .filter_map(|r| r.first_click_time())
            .collect();
        crate::stats::ks_statistic(&times, records.len(), cdf)
    }

    #[test]
    fn decay_waiting_time_is_exponential() {
        let u = unravel(&pure_decay(1.0));
        let rho = DensityMatrix::basis_state(2, 1);
        let records = sample_ensemble(&u, &rho, 12.0, 2024, 0, 20_000, 0.01).unwrap();
        let ks = ks_first_click(&records, |t| 1.0 - (-t).exp());
        assert!(ks < 0.012, "KS distance {ks} against Exp(1)");
    }

    #[test]
    fn click_times_invert_the_survival_function_to_tolerance() {
        // Pure decay has S(t) = e^{-t}, so the first click must land at
        // -ln(u) for the stream's first uniform draw, to the bisection
        // tolerance. This pins the waiting-time inversion deterministically.
        let u = unravel(&pure_decay(1.0));
        let excited = DensityMatrix::basis_state(2, 1);
        let mut checked = 0;
        for idx in 0..20u64 {
            let stream = RngStream::new(55, idx);
            let record = sample_record(&u, &excited, 30.0, stream, 0.01).unwrap();
            let target: f64 = rand::Rng::gen(&mut stream.rng());
            let expected = -target.ln();
            if expected < 30.0 {
                let t1 = record
                    .first_click_time()
                    .expect("decay clicks before t = 30");
                assert!(
                    (t1 - expected).abs() <= 2e-10,
                    "stream {idx}: click at {t1} vs analytic {expected}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 19);
    }

    #[test]
    fn no_click_probability_matches_conditional_semigroup() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = DensityMatrix::basis_state(2, 1);
        let t = 1.0;
        let records = sample_ensemble(&u, &rho, t + 0.01, 7, 0, 20_000, 0.01).unwrap();
        let empirical = records
            .iter()
            .filter(|r| r.count_in_interval(0.0, t) == 0)
            .count() as f64
            / records.len() as f64;
        let exact = propagate(u.no_click(), t).unwrap().apply(&rho).trace().re;
        let se = (exact * (1.0 - exact) / records.len() as f64).sqrt();
        assert!(
            (empirical - exact).abs() < 3.0 * se,
            "no-click frequency {empirical} vs survival {exact} (se {se})"
        );
    }

    #[test]
    fn click_rate_matches_stationary_intensity() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let gen = u.full().clone();
        let rho_ss = stationary_state(&gen, 1e-9).unwrap();
        let record = sample_record(&u, &rho_ss, 1000.0, RngStream::new(5, 0), 0.01).unwrap();
        let rate = record.len() as f64 / record.horizon();
        // g1 = tr J(ρ_ss) = Γ ρ_ee = 1/3; Poisson-scale error bars are
        // conservative for an antibunched process.
        let g1 = u.jumps()[0].apply(&rho_ss).trace().re;
        assert_relative_eq!(g1, 1.0 / 3.0, epsilon = 1e-10);
        let se = (g1 / record.horizon()).sqrt();
        assert!(
            (rate - g1).abs() < 3.0 * se,
            "rate {rate} vs g1 {g1} (se {se})"
        );
    }

    #[test]
    fn empirical_event_frequencies_match_quadrature_probabilities() {
        // The Monte Carlo / operation-measure cross-oracle: frequencies of
        // cylinder events against tr M_t(E)(ρ).
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = DensityMatrix::basis_state(2, 1);
        let quad_ctl = QuadratureControls::default();
        let t = 1.0;
        let records = sample_ensemble(&u, &rho, t, 11, 0, 50_000, 0.01).unwrap();
        let events = [
            CylinderEvent::new(t, vec![(0.2, 0.4)], vec![0], false).unwrap(),
            CylinderEvent::new(t, vec![(0.2, 0.4)], vec![0], true).unwrap(),
            CylinderEvent::new(t, vec![(0.1, 0.3), (0.5, 0.9)], vec![0, 0], false).unwrap(),
            CylinderEvent::no_clicks(t),
        ];
        for event in &events {
            let p = crate::unraveling::event_probability(&u, event, t, &rho, &quad_ctl).unwrap();
            let hits = records
                .iter()
                .filter(|r| event.contains(r.clicks()))
                .count() as f64;
            let freq = hits / records.len() as f64;
            let se = (p * (1.0 - p) / records.len() as f64).sqrt().max(1e-6);
            assert!(
                (freq - p).abs() < 3.0 * se,
                "event {event:?}: frequency {freq} vs probability {p} (se {se})"
            );
        }
    }

    #[test]
    fn shift_examples() {
        let r = DetectionRecord::new(4.0, vec![(1.0, 0), (2.5, 0)]).unwrap();
        assert_eq!(r.shift(0.0).unwrap(), r);
        let shifted = r.shift(2.0).unwrap();
        assert_eq!(shifted.clicks(), &[(0.5, 0)]);
        assert_relative_eq!(shifted.horizon(), 2.0);
        let past = r.shift(5.0).unwrap();
        assert!(past.is_empty());
        assert_eq!(past.horizon(), 0.0);
        assert!(r.shift(-1.0).is_err());
    }

    #[test]
    fn count_examples() {
        let empty = DetectionRecord::empty(1.0);
        assert_eq!(empty.count_in_interval(0.0, 1.0), 0);
        let r = DetectionRecord::new(3.0, vec![(0.5, 0), (0.55, 0), (2.0, 0)]).unwrap();
        assert_eq!(r.count_in_interval(0.4, 0.6), 2);
        assert_eq!(r.count_in_interval(0.0, 0.5), 1);
        // Additivity over adjacent intervals that avoid click times.
        assert_eq!(
            r.count_in_interval(0.0, 1.2),
            r.count_in_interval(0.0, 0.7) + r.count_in_interval(0.7, 1.2)
        );
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let u = unravel(&driven_atom(1.0, 1.0));
        let rho = DensityMatrix::basis_state(2, 1);
        let record = sample_record(&u, &rho, 20.0, RngStream::new(77, 3), 0.01).unwrap();
        let mut buf = Vec::new();
        record.write_csv(&mut buf, 77, 3).unwrap();
        let (parsed, seed, stream) = DetectionRecord::read_csv(&buf[..]).unwrap();
        assert_eq!(parsed, record);
        assert_eq!((seed, stream), (77, 3));
    }

    proptest! {
        #[test]
        fn shift_flow_property(
            times in proptest::collection::vec(0.0f64..10.0, 0..8),
            s in 0.0f64..5.0,
            t in 0.0f64..5.0,
        ) {
            let mut sorted = times.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let clicks: Vec<(f64, usize)> = sorted.into_iter().map(|x| (x, 0)).collect();
            let record = DetectionRecord::new(10.0, clicks).unwrap();
            let double = record.shift(s).unwrap().shift(t).unwrap();
            let single = record.shift(s + t).unwrap();
            prop_assert_eq!(double.clicks().len(), single.clicks().len());
            for (a, b) in double.clicks().iter().zip(single.clicks()) {
                prop_assert!((a.0 - b.0).abs() < 1e-9);
            }
        }

        #[test]
        fn csv_round_trip_random_records(
            times in proptest::collection::vec(0.0f64..100.0, 0..20),
            dets in proptest::collection::vec(0usize..3, 20),
        ) {
            let mut sorted = times.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let clicks: Vec<(f64, usize)> =
                sorted.into_iter().zip(dets).collect();
            let record = DetectionRecord::new(100.0, clicks).unwrap();
            let mut buf = Vec::new();
            record.write_csv(&mut buf, 1, 2).unwrap();
            let (parsed, _, _) = DetectionRecord::read_csv(&buf[..]).unwrap();
            prop_assert_eq!(parsed, record);
        }
    }
}
