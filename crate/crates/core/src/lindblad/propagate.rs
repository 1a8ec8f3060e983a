use super::Generator;
use crate::error::{FlywheelError, Result};
use crate::fock::{hermitize, ComplexMatrix, DensityMatrix, TRUNCATION_TOL};
use crate::linalg::{diagonal_ordering, null_vector};
use crate::C64;

/// Largest `dt * ||L||_1` accepted by the RK4 integrator. The stability
/// region of classical RK4 reaches 2.78 on the real axis and 2.83 on the
/// imaginary one; the 1-norm bounds the spectral radius.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

const STEADY_RESIDUAL_TOL: f64 = 1e-10;

fn to_vec(m: &ComplexMatrix) -> Vec<C64> {
    m.as_slice().to_vec()
}

fn to_matrix(v: &[C64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v)
}

/// Integrate with fixed-step RK4 up to `t_end`, calling `observe` at `t = 0`,
/// every `stride` steps and at the end. The step is shrunk so the grid lands
/// on `t_end`. The truncation guard is checked after every step.
pub fn evolve<F>(
    gen: &Generator,
    rho0: &DensityMatrix,
    t_end: f64,
    dt: f64,
    stride: usize,
    mut observe: F,
) -> Result<DensityMatrix>
where
    F: FnMut(f64, &ComplexMatrix),
{
    gen.check_propagatable()?;
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(FlywheelError::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("t_end must be nonnegative, got {t_end}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let stride = stride.max(1);
    let op = gen.superoperator();
    let norm = op.norm_one();
    if dt * norm > RK4_STABILITY_LIMIT {
        return Err(FlywheelError::StepTooLarge {
            dt,
            limit: RK4_STABILITY_LIMIT / norm,
        });
    }
    observe(0.0, rho0.matrix());
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(rho0.clone());
    }
    let h = t_end / steps as f64;
    let n = d * d;
    let mut x = to_vec(rho0.matrix());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
    );
    let edge: Vec<usize> = gen.edge_diagonal().iter().map(|&k| k + k * d).collect();
    for step in 1..=steps {
        op.mul_vec(&x, &mut k1);
        axpy_into(&x, 0.5 * h, &k1, &mut tmp);
        op.mul_vec(&tmp, &mut k2);
        axpy_into(&x, 0.5 * h, &k2, &mut tmp);
        op.mul_vec(&tmp, &mut k3);
        axpy_into(&x, h, &k3, &mut tmp);
        op.mul_vec(&tmp, &mut k4);
        let s = h / 6.0;
        for i in 0..n {
            x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * s;
        }
        let t = step as f64 * h;
        let population: f64 = edge.iter().map(|&k| x[k].re.abs()).sum();
        if population > TRUNCATION_TOL {
            return Err(FlywheelError::TruncationBreached { time: t, population });
        }
        if step % stride == 0 || step == steps {
            let m = to_matrix(&x, d);
            observe(t, &m);
        }
    }
    let mut m = to_matrix(&x, d);
    hermitize(&mut m);
    DensityMatrix::new(m)
}

fn axpy_into(x: &[C64], a: f64, y: &[C64], out: &mut [C64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

/// State at time `t`.
pub fn propagate(gen: &Generator, rho0: &DensityMatrix, t: f64, dt: f64) -> Result<DensityMatrix> {
    evolve(gen, rho0, t, dt, usize::MAX, |_, _| {})
}

/// Stationary state from the null vector of the vectorized generator.
pub fn steady_state(gen: &Generator) -> Result<DensityMatrix> {
    gen.check_propagatable()?;
    if let Some(r) = gen.composite() {
        if !r.is_thermalizing() {
            return Err(FlywheelError::NoSteadyState(format!(
                "total downward rate {} does not exceed upward rate {}; feedback is not above threshold",
                r.down, r.up
            )));
        }
    }
    let d = gen.dim();
    let op = gen.superoperator();
    let perm = diagonal_ordering(d);
    let reordered = op.permuted(&perm);
    let band = |m: &crate::linalg::CsrMatrix| {
        let (l, u) = m.bandwidths();
        l.max(u)
    };
    let v = if band(&reordered) < band(op) {
        let w = null_vector(&reordered, 4);
        let mut v = vec![C64::default(); d * d];
        for (new, &old) in perm.iter().enumerate() {
            v[old] = w[new];
        }
        v
    } else {
        null_vector(op, 4)
    };
    let mut m = to_matrix(&v, d);
    let tr = m.trace();
    if !(tr.norm() > 1e-8) || !tr.re.is_finite() {
        return Err(FlywheelError::NoSteadyState(format!("null vector has trace {tr}")));
    }
    m /= tr;
    hermitize(&mut m);
    let mut r = vec![C64::default(); d * d];
    op.mul_vec(m.as_slice(), &mut r);
    let residual: f64 = r.iter().map(|z| z.norm()).sum();
    if !(residual < STEADY_RESIDUAL_TOL) {
        return Err(FlywheelError::SolverResidual { residual });
    }
    let rho = DensityMatrix::new(m)?;
    let population = gen.edge_population(rho.matrix());
    if population > TRUNCATION_TOL {
        return Err(FlywheelError::TruncationInsufficient { population });
    }
    Ok(rho)
}
