//! Truncated Fock-space linear algebra for a single bosonic mode.
//!
//! Every state built here is checked against the truncation guard: the
//! population of the two highest retained levels must stay below
//! [`TRUNCATION_TOL`]. A state that leaks to the edge of the space is an
//! error, never a silently clipped result.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FlywheelError, Result};
use crate::C64;

pub type ComplexMatrix = DMatrix<C64>;

/// Maximum elementwise `|A - A^dagger|` accepted for a density matrix.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Maximum `|tr(rho) - 1|` accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for an unconditional density matrix.
pub const EIGENVALUE_TOL: f64 = 1e-9;
/// Population allowed in the top two Fock levels.
pub const TRUNCATION_TOL: f64 = 1e-10;
/// Tail mass of the Gibbs distribution beyond the working space.
pub const GIBBS_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(FlywheelError::InvalidDimension(dim));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `|alpha|^2` accepted by [`displacement`].
    pub fn displacement_limit(&self) -> f64 {
        self.dim as f64 / 4.0
    }

    pub fn identity(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.dim, self.dim)
    }
}

/// Lowering operator with `<n-1|c|n> = sqrt(n)`.
pub fn annihilation(space: FockSpace) -> ComplexMatrix {
    let d = space.dim();
    let mut c = ComplexMatrix::zeros(d, d);
    for n in 1..d {
        c[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    c
}

pub fn creation(space: FockSpace) -> ComplexMatrix {
    annihilation(space).adjoint()
}

pub fn number(space: FockSpace) -> ComplexMatrix {
    let d = space.dim();
    ComplexMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// The quadrature pair `x = (c^dagger + c)/sqrt 2`, `y = i (c^dagger - c)/sqrt 2`.
pub fn quadratures(space: FockSpace) -> (ComplexMatrix, ComplexMatrix) {
    let c = annihilation(space);
    let cd = c.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&cd + &c) * C64::new(s, 0.0);
    let y = (&cd - &c) * C64::new(0.0, s);
    (x, y)
}

/// `D(alpha) = exp(alpha c^dagger - alpha* c)` exponentiated inside the
/// truncated space, hence exactly unitary.
pub fn displacement(space: FockSpace, alpha: C64) -> Result<ComplexMatrix> {
    let alpha_sq = alpha.norm_sqr();
    if alpha_sq >= space.displacement_limit() {
        return Err(FlywheelError::DisplacementTooLargeForTruncation {
            alpha_sq,
            limit: space.displacement_limit(),
        });
    }
    Ok(displacement_unguarded(space, alpha))
}

fn displacement_unguarded(space: FockSpace, alpha: C64) -> ComplexMatrix {
    if alpha == C64::new(0.0, 0.0) {
        return space.identity();
    }
    let c = annihilation(space);
    let generator = c.adjoint() * alpha - c * alpha.conj();
    generator.exp()
}

/// Thermal state `exp(-beta_omega c^dagger c)/Z`.
pub fn thermal(space: FockSpace, beta_omega: f64) -> Result<DensityMatrix> {
    displaced_thermal(space, beta_omega, C64::new(0.0, 0.0))
}

/// Vacuum projector.
pub fn ground_state(space: FockSpace) -> DensityMatrix {
    fock_state(space, 0).expect("level 0 always exists")
}

/// Number-state projector `|n><n|`.
pub fn fock_state(space: FockSpace, n: usize) -> Result<DensityMatrix> {
    let d = space.dim();
    if n >= d {
        return Err(FlywheelError::InvalidParameter(format!(
            "level {n} outside a {d}-level space"
        )));
    }
    let mut m = ComplexMatrix::zeros(d, d);
    m[(n, n)] = C64::new(1.0, 0.0);
    let rho = DensityMatrix::from_raw(m);
    check_truncation(&rho, space)?;
    Ok(rho)
}

/// Coherent state `D(alpha)|0><0|D^dagger(alpha)`.
pub fn coherent(space: FockSpace, alpha: C64) -> Result<DensityMatrix> {
    displaced_thermal(space, f64::INFINITY, alpha)
}

/// Displaced Gibbs state `N D(alpha) exp(-beta_omega c^dagger c) D^dagger(alpha)`.
///
/// The state is assembled in an enlarged working space, where the
/// displacement is accurate on the retained levels, and then restricted and
/// renormalized. Fails if either the Gibbs tail beyond the working space or
/// the population of the two top retained levels exceeds tolerance.
pub fn displaced_thermal(space: FockSpace, beta_omega: f64, alpha: C64) -> Result<DensityMatrix> {
    if !(beta_omega > 0.0) {
        return Err(FlywheelError::InvalidParameter(format!(
            "beta_omega must be positive, got {beta_omega}"
        )));
    }
    let alpha_sq = alpha.norm_sqr();
    if alpha_sq >= space.displacement_limit() {
        return Err(FlywheelError::DisplacementTooLargeForTruncation {
            alpha_sq,
            limit: space.displacement_limit(),
        });
    }
    let d = space.dim();
    let q = (-beta_omega).exp();
    let work_dim = 2 * d + 32;
    let tail = q.powi(work_dim as i32);
    if tail > GIBBS_TAIL_TOL {
        return Err(FlywheelError::TruncationInsufficient { population: tail });
    }
    let work = FockSpace::new(work_dim)?;
    let mut gibbs = ComplexMatrix::zeros(work_dim, work_dim);
    for n in 0..work_dim {
        gibbs[(n, n)] = C64::new((1.0 - q) * q.powi(n as i32), 0.0);
    }
    let full = if alpha_sq == 0.0 {
        gibbs
    } else {
        let disp = displacement_unguarded(work, alpha);
        &disp * gibbs * disp.adjoint()
    };
    let mut block = full.view((0, 0), (d, d)).into_owned();
    let tr = block.trace().re;
    block /= C64::new(tr, 0.0);
    hermitize(&mut block);
    let rho = DensityMatrix::from_raw(block);
    check_truncation(&rho, space)?;
    Ok(rho)
}

/// `tr(rho op)`.
pub fn expectation(rho: &DensityMatrix, op: &ComplexMatrix) -> Result<C64> {
    rho.expectation(op)
}

/// Trace distance `1/2 ||a - b||_1` from the eigenvalues of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(FlywheelError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut diff = a.matrix() - b.matrix();
    hermitize(&mut diff);
    let eig = SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Population of the two highest levels of a Fock-space state (never
/// counting the vacuum, so a two-level space only watches its top level).
pub fn edge_population(rho: &ComplexMatrix) -> f64 {
    let d = rho.nrows();
    (d.saturating_sub(2).max(1)..d)
        .map(|n| rho[(n, n)].re.abs())
        .sum()
}

fn check_truncation(rho: &DensityMatrix, space: FockSpace) -> Result<()> {
    if rho.dim() != space.dim() {
        return Err(FlywheelError::DimensionMismatch {
            expected: space.dim(),
            found: rho.dim(),
        });
    }
    let population = edge_population(rho.matrix());
    if population > TRUNCATION_TOL {
        return Err(FlywheelError::TruncationInsufficient { population });
    }
    Ok(())
}

/// Replace `m` by its Hermitian part.
pub fn hermitize(m: &mut ComplexMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Largest elementwise `|A - A^dagger|`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    let mut h = m.clone();
    hermitize(&mut h);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// within tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::with_eigenvalue_tolerance(mat, EIGENVALUE_TOL)
    }

    /// Validate with a custom floor on the smallest eigenvalue (conditional
    /// states use a looser one).
    pub fn with_eigenvalue_tolerance(mat: ComplexMatrix, tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(FlywheelError::InvalidState(format!(
                "{}x{} matrix is not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(FlywheelError::InvalidState("non-finite entry".into()));
        }
        let defect = hermiticity_defect(&mat);
        if defect > HERMITICITY_TOL {
            return Err(FlywheelError::InvalidState(format!(
                "Hermiticity defect {defect:e}"
            )));
        }
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(FlywheelError::InvalidState(format!("trace {tr}")));
        }
        let min = min_eigenvalue(&mat);
        if min < -tol {
            return Err(FlywheelError::InvalidState(format!(
                "eigenvalue {min:e} below -{tol:e}"
            )));
        }
        Ok(Self { mat })
    }

    /// Wrap a matrix whose invariants hold by construction.
    pub(crate) fn from_raw(mat: ComplexMatrix) -> Self {
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        let d = self.dim();
        if op.nrows() != d || op.ncols() != d {
            return Err(FlywheelError::DimensionMismatch {
                expected: d,
                found: op.nrows(),
            });
        }
        // tr(rho op) without forming the product
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += self.mat[(i, k)] * op[(k, i)];
            }
        }
        Ok(acc)
    }

    /// `<c>` on a Fock-space state.
    pub fn mean_amplitude(&self) -> C64 {
        ladder_mean(&self.mat)
    }

    /// `<c^dagger c>` on a Fock-space state.
    pub fn occupation(&self) -> f64 {
        occupation_of(&self.mat)
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn edge_population(&self) -> f64 {
        edge_population(&self.mat)
    }
}

/// `tr(c rho)` for the ladder operator of the space `rho` lives in.
pub fn ladder_mean(rho: &ComplexMatrix) -> C64 {
    let d = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for n in 1..d {
        acc += rho[(n, n - 1)] * (n as f64).sqrt();
    }
    acc
}

/// `tr(c^dagger c rho)`.
pub fn occupation_of(rho: &ComplexMatrix) -> f64 {
    (0..rho.nrows()).map(|n| n as f64 * rho[(n, n)].re).sum()
}
