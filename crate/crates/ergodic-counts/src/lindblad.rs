//! Lindblad generators and their semigroups.
//!
//! The generator convention is fixed as
//! `L(ρ) = -i[H, ρ] + Σ_i (V_i ρ V_i† − ½{V_i†V_i, ρ})`,
//! which makes `tr L(ρ) = 0` identically. Superoperators are stored as
//! `d²×d²` matrices acting on column-stacked operators.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Largest accepted Hilbert-space dimension; keeps the dense `d²×d²`
/// superoperator matrices affordable.
pub const MAX_DIM: usize = 64;

const HERMITIAN_TOL: f64 = 1e-12;
const EIGENVALUE_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A dense complex operator on the system Hilbert space.
#[derive(Clone, Debug)]
pub struct ComplexOperator {
    mat: CMat,
    hermitian: bool,
}

impl ComplexOperator {
    /// Wrap a square matrix with finite entries.
    pub fn new(mat: CMat) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidModel("operator matrix must be square".into()));
        }
        if !mat.is_finite() {
            return Err(Error::InvalidModel(
                "operator has non-finite entries".into(),
            ));
        }
        Ok(Self {
            mat,
            hermitian: false,
        })
    }

    /// Wrap a matrix that must be Hermitian to within `1e-12` entrywise.
    pub fn hermitian(mat: CMat) -> Result<Self> {
        let mut op = Self::new(mat)?;
        let defect = op.mat.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidModel(format!(
                "operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMat::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }
}

/// A system state: Hermitian, positive semidefinite, trace one when
/// `normalized` (conditional states keep their decayed trace).
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: ComplexOperator,
    normalized: bool,
}

impl DensityMatrix {
    /// A normalized state: trace must be 1 to `1e-10`.
    pub fn new(mat: CMat) -> Result<Self> {
        let state = Self::unnormalized(mat)?;
        let tr = state.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidModel(format!("state trace {tr} is not 1")));
        }
        Ok(Self {
            normalized: true,
            ..state
        })
    }

    /// An unnormalized (conditional) state: Hermitian to `1e-12`, eigenvalues
    /// at least `-1e-10`, nonnegative trace.
    pub fn unnormalized(mat: CMat) -> Result<Self> {
        if !mat.is_square() || !mat.is_finite() {
            return Err(Error::InvalidModel(
                "state matrix must be square and finite".into(),
            ));
        }
        let defect = mat.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidModel(format!(
                "state is not Hermitian (defect {defect:.3e})"
            )));
        }
        let eigs = linalg::eigvalsh(&mat);
        if let Some(min) = eigs.first() {
            if *min < -EIGENVALUE_TOL {
                return Err(Error::InvalidModel(format!(
                    "state has negative eigenvalue {min:.3e}"
                )));
            }
        }
        let tr = mat.trace().re;
        if tr < -1e-12 {
            return Err(Error::InvalidModel(format!(
                "state trace {tr:.3e} is negative"
            )));
        }
        Ok(Self {
            op: ComplexOperator {
                mat,
                hermitian: true,
            },
            normalized: false,
        })
    }

    /// |k⟩⟨k| in the computational basis.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut m = CMat::zeros(dim, dim);
        m[(k, k)] = c(1.0, 0.0);
        Self {
            op: ComplexOperator {
                mat: m,
                hermitian: true,
            },
            normalized: true,
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut m = CMat::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = c(1.0 / dim as f64, 0.0);
        }
        Self {
            op: ComplexOperator {
                mat: m,
                hermitian: true,
            },
            normalized: true,
        }
    }

    pub fn from_diagonal(populations: &[f64]) -> Result<Self> {
        let dim = populations.len();
        let mut m = CMat::zeros(dim, dim);
        for (i, &p) in populations.iter().enumerate() {
            m[(i, i)] = c(p, 0.0);
        }
        Self::new(m)
    }

    /// A random full-rank state, `G G† / tr(G G†)`.
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        let g = CMat::from_fn(dim, dim, |_, _| {
            c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        });
        let gg = g.matmul(&g.adjoint());
        let tr = gg.trace().re;
        let mat = gg.scale_re(1.0 / tr);
        Self {
            op: ComplexOperator {
                mat,
                hermitian: true,
            },
            normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.op.mat
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.op.mat.trace().re
    }

    /// Rescale to trace one. Fails on (numerically) zero trace.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 1e-300 {
            return Err(Error::Numerical(
                "cannot normalize a state with vanishing trace".into(),
            ));
        }
        Ok(Self {
            op: ComplexOperator {
                mat: self.op.mat.scale_re(1.0 / tr),
                hermitian: true,
            },
            normalized: true,
        })
    }

    /// Half the trace norm of the difference, the standard distinguishability
    /// metric between states.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = self.op.mat.sub(&other.op.mat);
        let eigs = linalg::eigvalsh(&diff.hermitian_part());
        0.5 * eigs.iter().map(|e| e.abs()).sum::<f64>()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::eigvalsh(&self.op.mat)[0]
    }
}

/// What a superoperator is known to do to the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceBehavior {
    /// `tr(S(ρ)) = tr(ρ)`; semigroup maps `e^{tL}`.
    Preserving,
    /// `tr(S(ρ)) = 0`; full generators.
    Annihilating,
    /// No claim; jump parts and no-click generators.
    Unknown,
}

/// Linear map on operators, stored on column-stacked vectors.
#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    mat: CMat,
    trace: TraceBehavior,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, mat: CMat, trace: TraceBehavior) -> Self {
        assert_eq!(mat.rows(), dim * dim);
        assert!(mat.is_square());
        Self { dim, mat, trace }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: CMat::identity(dim * dim),
            trace: TraceBehavior::Preserving,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            mat: CMat::zeros(dim * dim, dim * dim),
            trace: TraceBehavior::Annihilating,
        }
    }

    /// ρ ↦ A ρ B as a superoperator matrix (`Bᵀ ⊗ A` on column stacking).
    pub fn conjugation(a: &CMat, b: &CMat) -> Self {
        assert!(a.is_square() && b.is_square());
        assert_eq!(a.rows(), b.rows());
        Self {
            dim: a.rows(),
            mat: b.transpose().kron(a),
            trace: TraceBehavior::Unknown,
        }
    }

    /// ρ ↦ V ρ V†, the jump channel of a single detector.
    pub fn sandwich(v: &CMat) -> Self {
        Self::conjugation(v, &v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn trace_behavior(&self) -> TraceBehavior {
        self.trace
    }

    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        let v = linalg::vectorize(rho);
        linalg::unvectorize(&self.mat.matvec(&v), self.dim)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> CMat {
        self.apply_matrix(rho.matrix())
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let trace = match (self.trace, other.trace) {
            (TraceBehavior::Preserving, TraceBehavior::Preserving) => TraceBehavior::Preserving,
            (TraceBehavior::Preserving, TraceBehavior::Annihilating) => TraceBehavior::Annihilating,
            _ => TraceBehavior::Unknown,
        };
        Self {
            dim: self.dim,
            mat: self.mat.matmul(&other.mat),
            trace,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let trace = match (self.trace, other.trace) {
            (TraceBehavior::Annihilating, TraceBehavior::Annihilating) => {
                TraceBehavior::Annihilating
            }
            _ => TraceBehavior::Unknown,
        };
        Self {
            dim: self.dim,
            mat: self.mat.add(&other.mat),
            trace,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let trace = match (self.trace, other.trace) {
            (TraceBehavior::Annihilating, TraceBehavior::Annihilating) => {
                TraceBehavior::Annihilating
            }
            _ => TraceBehavior::Unknown,
        };
        Self {
            dim: self.dim,
            mat: self.mat.sub(&other.mat),
            trace,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        let trace = match self.trace {
            TraceBehavior::Annihilating => TraceBehavior::Annihilating,
            _ => TraceBehavior::Unknown,
        };
        Self {
            dim: self.dim,
            mat: self.mat.scale_re(a),
            trace,
        }
    }

    /// Worst trace defect over random states, judged against the claimed
    /// [`TraceBehavior`]. `Unknown` maps report 0.
    pub fn verify_trace_behavior(&self, samples: usize, rng: &mut impl Rng) -> f64 {
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let rho = DensityMatrix::random(self.dim, rng);
            let out = self.apply(&rho).trace().re;
            let defect = match self.trace {
                TraceBehavior::Preserving => (out - rho.trace()).abs(),
                TraceBehavior::Annihilating => out.abs(),
                TraceBehavior::Unknown => 0.0,
            };
            worst = worst.max(defect);
        }
        worst
    }
}

/// Hamiltonian plus jump operators; the raw data of a master equation.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: ComplexOperator,
    jump_ops: Vec<ComplexOperator>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexOperator, jump_ops: Vec<ComplexOperator>) -> Result<Self> {
        let dim = hamiltonian.dim();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "dimension {dim} out of range 1..={MAX_DIM}"
            )));
        }
        if !hamiltonian.is_hermitian_flagged() {
            return Err(Error::InvalidModel("Hamiltonian must be Hermitian".into()));
        }
        if jump_ops.is_empty() {
            return Err(Error::InvalidModel(
                "at least one jump operator is required".into(),
            ));
        }
        for (i, v) in jump_ops.iter().enumerate() {
            if v.dim() != dim {
                return Err(Error::InvalidModel(format!(
                    "jump operator {i} has dimension {} but the Hamiltonian has {dim}",
                    v.dim()
                )));
            }
        }
        Ok(Self {
            dim,
            hamiltonian,
            jump_ops,
        })
    }

    /// A random bounded model, for property checks: random Hermitian H and
    /// `n_jumps` random jump operators with entries in the unit box.
    pub fn random(dim: usize, n_jumps: usize, rng: &mut impl Rng) -> Self {
        let raw = CMat::from_fn(dim, dim, |_, _| {
            c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        });
        let h = ComplexOperator::hermitian(raw.hermitian_part()).unwrap();
        let jumps = (0..n_jumps.max(1))
            .map(|_| {
                ComplexOperator::new(CMat::from_fn(dim, dim, |_, _| {
                    c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
                }))
                .unwrap()
            })
            .collect();
        Self::new(h, jumps).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexOperator {
        &self.hamiltonian
    }

    pub fn jump_ops(&self) -> &[ComplexOperator] {
        &self.jump_ops
    }
}

/// The full generator `L(ρ) = -i[H, ρ] + Σ_i (V_i ρ V_i† − ½{V_i†V_i, ρ})`.
pub fn build_generator(model: &LindbladModel) -> Superoperator {
    let dim = model.dim;
    let d2 = dim * dim;
    let id = CMat::identity(dim);
    let h = model.hamiltonian.matrix();

    // -i(Hρ - ρH) = -i[(I ⊗ H) - (Hᵀ ⊗ I)] vec(ρ).
    let mut mat = id.kron(h).sub(&h.transpose().kron(&id)).scale(c(0.0, -1.0));

    for v in &model.jump_ops {
        let vm = v.matrix();
        let vdv = vm.adjoint().matmul(vm);
        mat.add_assign(&vm.conj().kron(vm));
        mat.add_assign(&id.kron(&vdv).scale_re(-0.5));
        mat.add_assign(&vdv.transpose().kron(&id).scale_re(-0.5));
    }

    debug_assert_eq!(mat.rows(), d2);
    Superoperator::from_matrix(dim, mat, TraceBehavior::Annihilating)
}

/// `e^{tS}`, exact identity at `t = 0`; negative times are rejected.
pub fn propagate(s: &Superoperator, t: f64) -> Result<Superoperator> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "propagation time {t} must be nonnegative"
        )));
    }
    if t == 0.0 {
        return Ok(Superoperator::identity(s.dim));
    }
    let mat = linalg::expm(&s.mat.scale_re(t));
    let trace = match s.trace {
        TraceBehavior::Annihilating => TraceBehavior::Preserving,
        _ => TraceBehavior::Unknown,
    };
    Ok(Superoperator {
        dim: s.dim,
        mat,
        trace,
    })
}

/// The stationary state of a trace-preserving generator, from the null space
/// of its matrix. Singular values below `1e-10 · σ_max` count as zero; a null
/// space of dimension other than one is an error carrying that dimension.
pub fn stationary_state(gen: &Superoperator, tol: f64) -> Result<DensityMatrix> {
    let decomposition = linalg::svd(&gen.mat);
    let sigma_max = decomposition.sigma.first().copied().unwrap_or(0.0);
    let threshold = 1e-10 * sigma_max;
    let kernel: Vec<usize> = (0..decomposition.sigma.len())
        .filter(|&i| decomposition.sigma[i] <= threshold)
        .collect();
    if kernel.len() != 1 {
        return Err(Error::NonUniqueEquilibrium { dim: kernel.len() });
    }

    let v = decomposition.v.column(kernel[0]);
    let raw = linalg::unvectorize(&v, gen.dim);
    // Rotate the arbitrary global phase so the trace is real and positive,
    // then project onto Hermitian matrices and normalize.
    let tr = raw.trace();
    if tr.norm() < 1e-8 {
        return Err(Error::Numerical(
            "stationary null vector is traceless".into(),
        ));
    }
    let phase = tr / tr.norm();
    let hermitian = raw.scale(phase.conj()).hermitian_part();
    let rho = hermitian.scale_re(1.0 / hermitian.trace().re);

    let residual = gen.apply_matrix(&rho).frobenius_norm();
    if residual > tol {
        return Err(Error::Accuracy {
            achieved: residual,
            required: tol,
        });
    }
    DensityMatrix::new(rho)
}

/// Cesàro (time-mean) average `(1/τ) ∫_0^τ e^{tL} ϑ dt` by the composite
/// trapezoid rule on a uniform grid with `steps` intervals.
pub fn cesaro_average(
    gen: &Superoperator,
    theta: &DensityMatrix,
    tau: f64,
    steps: usize,
) -> Result<DensityMatrix> {
    if steps < 2 {
        return Err(Error::Domain(format!(
            "cesaro_average needs at least 2 steps, got {steps}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "averaging window {tau} must be positive"
        )));
    }
    if theta.dim() != gen.dim {
        return Err(Error::Domain(
            "state dimension does not match the generator".into(),
        ));
    }
    let h = tau / steps as f64;
    let step = propagate(gen, h)?;
    let mut state = linalg::vectorize(theta.matrix());
    let mut acc: Vec<Complex64> = state.iter().map(|z| z * 0.5).collect();
    for j in 1..=steps {
        state = step.mat.matvec(&state);
        let w = if j == steps { 0.5 } else { 1.0 };
        for (a, s) in acc.iter_mut().zip(&state) {
            *a += s * c(w, 0.0);
        }
    }
    let avg = linalg::unvectorize(&acc, gen.dim).scale_re(1.0 / steps as f64);
    DensityMatrix::new(avg.hermitian_part())
}

/// σ₋ = |0⟩⟨1| at dimension 2: the canonical decay jump.
pub fn sigma_minus() -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(0, 1)] = c(1.0, 0.0);
    m
}

/// The resonantly driven two-level atom: `H = (Ω/2) σ_x`, `V = √Γ σ₋`.
///
/// Its stationary excited-state population is `Ω² / (Γ² + 2Ω²)`.
pub fn driven_atom(omega: f64, gamma: f64) -> LindbladModel {
    let mut h = CMat::zeros(2, 2);
    h[(0, 1)] = c(omega / 2.0, 0.0);
    h[(1, 0)] = c(omega / 2.0, 0.0);
    let v = sigma_minus().scale_re(gamma.sqrt());
    LindbladModel::new(
        ComplexOperator::hermitian(h).unwrap(),
        vec![ComplexOperator::new(v).unwrap()],
    )
    .unwrap()
}

/// Spontaneous decay with no drive: `H = 0`, `V = √Γ σ₋`.
pub fn pure_decay(gamma: f64) -> LindbladModel {
    LindbladModel::new(
        ComplexOperator::hermitian(CMat::zeros(2, 2)).unwrap(),
        vec![ComplexOperator::new(sigma_minus().scale_re(gamma.sqrt())).unwrap()],
    )
    .unwrap()
}
