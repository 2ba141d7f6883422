//! Unravelings of a Lindblad generator and the counting-process kernel.
//!
//! An unraveling splits `L = L0 + Σ_i J_i` into the no-click evolution `L0`
//! and one completely positive jump channel `J_i(ρ) = V_i ρ V_i†` per
//! detector. On top of that splitting this module evaluates
//!
//! - conditional states and exclusive click densities `f^t` (the chain
//!   `e^{(t-t_n)L0} J_{i_n} ⋯ J_{i_1} e^{t_1 L0}`),
//! - the operation-valued measure `M_t(E)` on cylinder events, by a Dyson
//!   expansion truncated at a click budget together with Gauss–Legendre
//!   quadrature over the event's boxes,
//! - event probabilities `tr M_t(E)(ρ)`, and
//! - the Markov composition law `M_{s+t}(F ∩ σ_t^{-1}E) = M_s(E) ∘ M_t(F)`,
//!   as a numerical discrepancy report.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::lindblad::{build_generator, DensityMatrix, LindbladModel, Superoperator};
use crate::quad;

/// A Lindblad generator split into no-click evolution and jump channels.
#[derive(Clone, Debug)]
pub struct Unraveling {
    model: LindbladModel,
    full: Superoperator,
    no_click: Superoperator,
    jumps: Vec<Superoperator>,
    jump_norms: Vec<f64>,
}

/// Split a model's generator: `J_i(ρ) = V_i ρ V_i†`, `L0 = L − Σ J_i`.
pub fn unravel(model: &LindbladModel) -> Unraveling {
    let full = build_generator(model);
    let jumps: Vec<Superoperator> = model
        .jump_ops()
        .iter()
        .map(|v| Superoperator::sandwich(v.matrix()))
        .collect();
    let mut no_click = full.clone();
    for j in &jumps {
        no_click = no_click.sub(j);
    }
    // The trace-norm-induced norm of ρ ↦ VρV† is the largest eigenvalue of V†V.
    let jump_norms = model
        .jump_ops()
        .iter()
        .map(|v| {
            let gram = v.matrix().adjoint().matmul(v.matrix());
            linalg::eigvalsh(&gram)
                .last()
                .copied()
                .unwrap_or(0.0)
                .max(0.0)
        })
        .collect();
    Unraveling {
        model: model.clone(),
        full,
        no_click,
        jumps,
        jump_norms,
    }
}

impl Unraveling {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn model(&self) -> &LindbladModel {
        &self.model
    }

    /// The full generator `L`.
    pub fn full(&self) -> &Superoperator {
        &self.full
    }

    /// The no-click generator `L0`.
    pub fn no_click(&self) -> &Superoperator {
        &self.no_click
    }

    pub fn jumps(&self) -> &[Superoperator] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Trace-norm-induced norms `‖J_i‖ = λ_max(V_i†V_i)`.
    pub fn jump_norms(&self) -> &[f64] {
        &self.jump_norms
    }

    /// `Σ_i ‖J_i‖`, the click rate scale used by truncation bounds.
    pub fn total_jump_norm(&self) -> f64 {
        self.jump_norms.iter().sum()
    }

    /// The combined click channel `Σ_i J_i`.
    pub fn total_jump(&self) -> Superoperator {
        let mut total = Superoperator::zero(self.dim());
        for j in &self.jumps {
            total = total.add(j);
        }
        total
    }
}

/// A finite, time-ordered list of clicks `(time, detector)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickPattern {
    times: Vec<f64>,
    detectors: Vec<usize>,
}

impl ClickPattern {
    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            detectors: Vec::new(),
        }
    }

    /// Build from `(time, detector)` pairs; times must be nonnegative and
    /// nondecreasing.
    pub fn new(clicks: &[(f64, usize)]) -> Result<Self> {
        let mut prev = 0.0f64;
        for &(t, _) in clicks {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Domain(format!(
                    "click time {t} must be finite and nonnegative"
                )));
            }
            if t < prev {
                return Err(Error::Domain("click times must be nondecreasing".into()));
            }
            prev = t;
        }
        Ok(Self {
            times: clicks.iter().map(|c| c.0).collect(),
            detectors: clicks.iter().map(|c| c.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn detectors(&self) -> &[usize] {
        &self.detectors
    }
}

/// The conditional (unnormalized) state after the clicks of `pattern` and no
/// others up to time `t`:
/// `e^{(t-t_n)L0} J_{i_n} ⋯ J_{i_1} e^{t_1 L0}(ρ)`.
pub fn conditional_state(
    u: &Unraveling,
    pattern: &ClickPattern,
    t: f64,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("horizon {t} must be nonnegative")));
    }
    if let Some(&last) = pattern.times.last() {
        if last > t {
            return Err(Error::Domain(format!(
                "click at {last} lies beyond the horizon {t}"
            )));
        }
    }
    for &d in &pattern.detectors {
        if d >= u.jump_count() {
            return Err(Error::Domain(format!(
                "detector index {d} out of range for {} detectors",
                u.jump_count()
            )));
        }
    }

    let mut state = linalg::vectorize(rho.matrix());
    let mut prev = 0.0f64;
    for (&time, &det) in pattern.times.iter().zip(&pattern.detectors) {
        let gap = crate::lindblad::propagate(u.no_click(), time - prev)?;
        state = gap.matrix().matvec(&state);
        state = u.jumps[det].matrix().matvec(&state);
        prev = time;
    }
    let tail = crate::lindblad::propagate(u.no_click(), t - prev)?;
    state = tail.matrix().matvec(&state);

    let mat = linalg::unvectorize(&state, u.dim()).hermitian_part();
    DensityMatrix::unnormalized(mat)
}

/// The exclusive density `f^t(pattern)`: the trace of the conditional state,
/// clamped at zero against rounding.
pub fn exclusive_density(
    u: &Unraveling,
    pattern: &ClickPattern,
    t: f64,
    rho: &DensityMatrix,
) -> Result<f64> {
    let state = conditional_state(u, pattern, t, rho)?;
    Ok(state.trace().max(0.0))
}

/// A cylinder event over the window `[0, window]`: exactly one click of the
/// stated detector in each box, boxes disjoint and ordered. With
/// `exact = true` no other clicks occur inside the window; with
/// `exact = false` clicks outside the boxes are unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderEvent {
    window: f64,
    boxes: Vec<(f64, f64)>,
    detectors: Vec<usize>,
    exact: bool,
}

impl CylinderEvent {
    pub fn new(
        window: f64,
        boxes: Vec<(f64, f64)>,
        detectors: Vec<usize>,
        exact: bool,
    ) -> Result<Self> {
        if !(window >= 0.0) || !window.is_finite() {
            return Err(Error::Domain(format!(
                "event window {window} must be finite and nonnegative"
            )));
        }
        if boxes.len() != detectors.len() {
            return Err(Error::Domain(
                "one detector index per box is required".into(),
            ));
        }
        let mut prev_end = 0.0f64;
        for &(a, b) in &boxes {
            if !(a >= 0.0 && b <= window) {
                return Err(Error::Domain(format!(
                    "box [{a}, {b}] exceeds the window [0, {window}]"
                )));
            }
            if !(a < b) {
                return Err(Error::Domain(format!(
                    "box [{a}, {b}] must have positive width"
                )));
            }
            if a < prev_end {
                return Err(Error::Domain("boxes must be disjoint and ordered".into()));
            }
            prev_end = b;
        }
        Ok(Self {
            window,
            boxes,
            detectors,
            exact,
        })
    }

    /// The sure event: no constraint at all on `[0, window]`.
    pub fn omega(window: f64) -> Self {
        Self {
            window,
            boxes: Vec::new(),
            detectors: Vec::new(),
            exact: false,
        }
    }

    /// No clicks anywhere in `[0, window]`.
    pub fn no_clicks(window: f64) -> Self {
        Self {
            window,
            boxes: Vec::new(),
            detectors: Vec::new(),
            exact: true,
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn boxes(&self) -> &[(f64, f64)] {
        &self.boxes
    }

    pub fn detectors(&self) -> &[usize] {
        &self.detectors
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn n(&self) -> usize {
        self.boxes.len()
    }

    /// Does a click list satisfy this event? Only the part of the record
    /// inside the window is examined.
    pub fn contains(&self, clicks: &[(f64, usize)]) -> bool {
        let inside: Vec<(f64, usize)> = clicks
            .iter()
            .copied()
            .filter(|(t, _)| *t <= self.window)
            .collect();
        let mut in_boxes = 0usize;
        for ((a, b), &det) in self.boxes.iter().zip(&self.detectors) {
            let mut hits = 0usize;
            for &(t, d) in &inside {
                if t >= *a && t <= *b {
                    if d != det {
                        return false;
                    }
                    hits += 1;
                }
            }
            if hits != 1 {
                return false;
            }
            in_boxes += 1;
        }
        if self.exact && inside.len() != in_boxes {
            return false;
        }
        true
    }
}

/// Controls for the Dyson/quadrature evaluation of `M_t(E)`.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureControls {
    /// Gauss–Legendre nodes per box segment.
    pub nodes_per_box: usize,
    /// Target length of one composite segment inside a box.
    pub segment_length: f64,
    /// Total click budget for the truncated Dyson expansion.
    pub n_max: usize,
    /// Acceptable truncation bound; exceeding it is an accuracy error.
    pub tolerance: f64,
}

impl Default for QuadratureControls {
    fn default() -> Self {
        Self {
            nodes_per_box: 16,
            segment_length: 0.5,
            n_max: 8,
            tolerance: 1e-6,
        }
    }
}

/// Result of applying `M_t(E)`: the transformed (unnormalized) state and the
/// estimated quadrature and truncation errors.
#[derive(Clone, Debug)]
pub struct EventOperation {
    pub state: DensityMatrix,
    pub quadrature_error: f64,
    pub truncation_error: f64,
}

/// Sum of the Dyson terms with `0..=budget` clicks over a gap of length `s`,
/// built from `L0` and the total jump channel only. One exponential of the
/// click-graded block generator yields every time-ordered integral at once.
/// Returns the truncated map and the tail bound `Σ_{m>budget} (‖J‖s)^m / m!`.
fn free_gap(u: &Unraveling, s: f64, budget: usize) -> (CMat, f64) {
    let d2 = u.dim() * u.dim();
    if s == 0.0 {
        return (CMat::identity(d2), 0.0);
    }
    let blocks = budget + 1;
    let l0 = u.no_click().matrix();
    let jtot = u.total_jump();
    let jmat = jtot.matrix();
    let mut big = CMat::zeros(blocks * d2, blocks * d2);
    for m in 0..blocks {
        for i in 0..d2 {
            for j in 0..d2 {
                big[(m * d2 + i, m * d2 + j)] = l0[(i, j)] * Complex64::new(s, 0.0);
                if m > 0 {
                    big[(m * d2 + i, (m - 1) * d2 + j)] = jmat[(i, j)] * Complex64::new(s, 0.0);
                }
            }
        }
    }
    let e = linalg::expm(&big);
    let mut sum = CMat::zeros(d2, d2);
    let mut last = CMat::zeros(d2, d2);
    for m in 0..blocks {
        for i in 0..d2 {
            for j in 0..d2 {
                sum[(i, j)] += e[(m * d2 + i, j)];
                if m == budget {
                    last[(i, j)] = e[(m * d2 + i, j)];
                }
            }
        }
    }

    // A priori tail: Σ_{m>budget} (‖J‖s)^m / m!.
    let x = u.total_jump_norm() * s;
    let mut term = 1.0f64;
    for m in 1..=(budget + 1) {
        term *= x / m as f64;
    }
    let mut a_priori = 0.0f64;
    for m in (budget + 1)..(budget + 400) {
        a_priori += term;
        term *= x / (m as f64 + 1.0);
        if term < 1e-300 {
            break;
        }
    }
    // A posteriori refinement: each further order inserts one more click,
    // shrinking the last computed order by at most x/(order). The measured
    // size of that order is usually far below its factorial bound.
    let mut a_posteriori = 0.0f64;
    let mut factor = last.one_norm();
    for j in 1..400 {
        factor *= x / (budget + j) as f64;
        a_posteriori += factor;
        if !(1e-300..=1e300).contains(&factor) {
            break;
        }
    }
    (sum, a_priori.min(a_posteriori))
}

/// `∫_a^b e^{(b-s)L0} J_det e^{(s-a)L0} ds` by composite Gauss–Legendre
/// quadrature with `nodes` points per segment.
fn box_integral(u: &Unraveling, a: f64, b: f64, det: usize, nodes: usize, seg_len: f64) -> CMat {
    let d2 = u.dim() * u.dim();
    let segments = ((b - a) / seg_len).ceil().max(1.0) as usize;
    let mut acc = CMat::zeros(d2, d2);
    let jmat = u.jumps[det].matrix();
    for seg in 0..segments {
        let sa = a + (b - a) * seg as f64 / segments as f64;
        let sb = a + (b - a) * (seg + 1) as f64 / segments as f64;
        let (xs, ws) = quad::gauss_legendre_on(nodes, sa, sb);
        for (s, w) in xs.iter().zip(&ws) {
            let left = linalg::expm(&u.no_click().matrix().scale_re(b - s));
            let right = linalg::expm(&u.no_click().matrix().scale_re(s - a));
            acc.add_assign(&left.matmul(jmat).matmul(&right).scale_re(*w));
        }
    }
    acc
}

/// Assemble the matrix of `M_t(E)` for one node count, tracking the
/// truncation tail over unconstrained gaps.
fn event_matrix(
    u: &Unraveling,
    event: &CylinderEvent,
    t: f64,
    quad_ctl: &QuadratureControls,
    nodes: usize,
) -> Result<(CMat, f64)> {
    let n = event.n();
    if !event.exact && quad_ctl.n_max < n {
        return Err(Error::Accuracy {
            achieved: f64::INFINITY,
            required: quad_ctl.tolerance,
        });
    }
    let budget = quad_ctl.n_max.saturating_sub(n);
    let d2 = u.dim() * u.dim();
    let mut op = CMat::identity(d2);
    let mut truncation = 0.0f64;

    let apply_gap = |op: &mut CMat, len: f64, free: bool, trunc: &mut f64| {
        if len <= 0.0 {
            return;
        }
        if free {
            let (g, tail) = free_gap(u, len, budget);
            *trunc += tail;
            *op = g.matmul(op);
        } else {
            let g = linalg::expm(&u.no_click().matrix().scale_re(len));
            *op = g.matmul(op);
        }
    };

    let mut prev = 0.0f64;
    for (&(a, b), &det) in event.boxes.iter().zip(&event.detectors) {
        apply_gap(&mut op, a - prev, !event.exact, &mut truncation);
        let bx = box_integral(u, a, b, det, nodes, quad_ctl.segment_length);
        op = bx.matmul(&op);
        prev = b;
    }
    // The rest of the window obeys the exact flag; anything between the
    // window and the evaluation horizon is unconstrained by the event.
    apply_gap(&mut op, event.window - prev, !event.exact, &mut truncation);
    apply_gap(&mut op, t - event.window, true, &mut truncation);

    Ok((op, truncation))
}

/// The operation-valued measure `M_t(E)` applied to `rho`.
///
/// Unconstrained stretches are expanded in click number up to
/// `quad_ctl.n_max` clicks; each box is integrated by composite
/// Gauss–Legendre rules, and the quadrature error is estimated by a
/// Richardson comparison against the doubled node count.
pub fn event_operation(
    u: &Unraveling,
    event: &CylinderEvent,
    t: f64,
    rho: &DensityMatrix,
    quad_ctl: &QuadratureControls,
) -> Result<EventOperation> {
    if event.window > t {
        return Err(Error::Domain(format!(
            "event window {} exceeds the evaluation horizon {t}",
            event.window
        )));
    }
    for &d in &event.detectors {
        if d >= u.jump_count() {
            return Err(Error::Domain(format!("detector index {d} out of range")));
        }
    }

    let (fine, truncation) = event_matrix(u, event, t, quad_ctl, 2 * quad_ctl.nodes_per_box)?;
    let quadrature_error = if event.n() > 0 {
        let coarse = event_matrix(u, event, t, quad_ctl, quad_ctl.nodes_per_box)?.0;
        fine.sub(&coarse).max_abs()
    } else {
        0.0
    };
    if truncation > quad_ctl.tolerance {
        return Err(Error::Accuracy {
            achieved: truncation,
            required: quad_ctl.tolerance,
        });
    }

    let out = linalg::unvectorize(&fine.matvec(&linalg::vectorize(rho.matrix())), u.dim());
    let state = DensityMatrix::unnormalized(out.hermitian_part())?;
    Ok(EventOperation {
        state,
        quadrature_error,
        truncation_error: truncation,
    })
}

/// `tr M_t(E)(ρ)`, clamped to `[0, 1]`.
pub fn event_probability(
    u: &Unraveling,
    event: &CylinderEvent,
    t: f64,
    rho: &DensityMatrix,
    quad_ctl: &QuadratureControls,
) -> Result<f64> {
    let op = event_operation(u, event, t, rho, quad_ctl)?;
    let p = op.state.trace();
    debug_assert!(
        p > -1e-9 && p < rho.trace() + 1e-9,
        "probability {p} outside band"
    );
    Ok(p.clamp(0.0, 1.0))
}

/// Numerical check of the Markov composition law.
#[derive(Clone, Debug)]
pub struct MarkovReport {
    /// Entrywise max difference between the two sides, applied to `rho`.
    pub discrepancy: f64,
    pub quadrature_error: f64,
    pub truncation_error: f64,
    /// `discrepancy ≤ quadrature + truncation + 1e-6`.
    pub pass: bool,
}

/// Compare `M_{s+t}(F ∩ σ_t^{-1}E)(ρ)` against `M_s(E)(M_t(F)(ρ))`.
///
/// `e` must span `Σ_s` (window `s`) and `f` must span `Σ_t` (window `t`);
/// both must carry the same `exact` flag so the intersection is again a
/// cylinder event.
pub fn check_markov(
    u: &Unraveling,
    s: f64,
    t: f64,
    e: &CylinderEvent,
    f: &CylinderEvent,
    rho: &DensityMatrix,
    quad_ctl: &QuadratureControls,
) -> Result<MarkovReport> {
    if (e.window - s).abs() > 1e-12 || (f.window - t).abs() > 1e-12 {
        return Err(Error::Domain(
            "events must span their σ-algebra windows (e over [0,s], f over [0,t])".into(),
        ));
    }
    if e.exact != f.exact {
        return Err(Error::Domain(
            "mixed exact/non-exact event pairs do not form a cylinder intersection".into(),
        ));
    }

    let mut boxes = f.boxes.clone();
    let mut detectors = f.detectors.clone();
    for (&(a, b), &d) in e.boxes.iter().zip(&e.detectors) {
        boxes.push((a + t, b + t));
        detectors.push(d);
    }
    let combined = CylinderEvent::new(s + t, boxes, detectors, e.exact)?;

    let lhs = event_operation(u, &combined, s + t, rho, quad_ctl)?;
    let mid = event_operation(u, f, t, rho, quad_ctl)?;
    let rhs = event_operation(u, e, s, &mid.state, quad_ctl)?;

    let discrepancy = lhs.state.matrix().sub(rhs.state.matrix()).max_abs();
    let quadrature_error = lhs.quadrature_error + mid.quadrature_error + rhs.quadrature_error;
    let truncation_error = lhs.truncation_error + mid.truncation_error + rhs.truncation_error;
    Ok(MarkovReport {
        discrepancy,
        quadrature_error,
        truncation_error,
        pass: discrepancy <= quadrature_error + truncation_error + 1e-6,
    })
}
