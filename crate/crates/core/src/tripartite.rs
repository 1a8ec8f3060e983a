//! Two qubits between a hot and a cold bath, coupled to the oscillator by
//! `K = -i g a b^dagger c^dagger + h.c.`, and the same engine driven by a
//! classical field instead.
//!
//! Composite basis index: `(ih * 2 + ic) * dim + n` with `ih, ic` the qubit
//! excitations and `n` the oscillator level. Everything is in the
//! interaction picture at resonance `omega_o = omega_h - omega_c`.

use serde::{Deserialize, Serialize};

use crate::engine::{reduce, weak_coupling_margin, EngineSpec};
use crate::error::{FlywheelError, Result};
use crate::fock::{annihilation, coherent, trace_distance, ComplexMatrix, DensityMatrix, FockSpace};
use crate::lindblad::{build_engine_dissipator, evolve, steady_state, Channel, DissipatorTerm, Generator, JumpKind};
use crate::C64;

/// Lowering operator of one qubit.
fn sigma_minus() -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(2, 2);
    s[(0, 1)] = C64::new(1.0, 0.0);
    s
}

fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

fn eye(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Thermal state of a qubit with excitation probability `n`.
fn qubit_gibbs(n: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = C64::new(1.0 - n, 0.0);
    m[(1, 1)] = C64::new(n, 0.0);
    m
}

/// Thermalizing dissipators of both qubits, embedded with identity `rest`.
fn qubit_baths(spec: &EngineSpec, rest: usize) -> Vec<DissipatorTerm> {
    let sm = sigma_minus();
    let id2 = eye(2);
    let idr = eye(rest);
    let a = kron(&kron(&sm, &id2), &idr);
    let b = kron(&kron(&id2, &sm), &idr);
    let mut terms = Vec::new();
    for (op, gamma, bw) in [
        (a, spec.gamma_h, spec.beta_h * spec.omega_h),
        (b, spec.gamma_c, spec.beta_c * spec.omega_c),
    ] {
        terms.push(DissipatorTerm {
            channel: Channel::Other,
            kind: JumpKind::Other,
            jump: op.clone(),
            rate: gamma,
        });
        terms.push(DissipatorTerm {
            channel: Channel::Other,
            kind: JumpKind::Other,
            jump: op.adjoint(),
            rate: gamma * (-bw).exp(),
        });
    }
    terms
}

/// State on qubit_h (x) qubit_c (x) Fock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripartiteState {
    pub mat: DensityMatrix,
    pub dim: usize,
}

impl TripartiteState {
    /// `rho_h^inf (x) rho_c^inf (x) rho`.
    pub fn engine_product(spec: &EngineSpec, rho: &DensityMatrix) -> Result<Self> {
        let hc = kron(&qubit_gibbs(spec.n_h()), &qubit_gibbs(spec.n_c()));
        Ok(Self {
            mat: DensityMatrix::new(kron(&hc, rho.matrix()))?,
            dim: rho.dim(),
        })
    }

    pub fn from_matrix(mat: DensityMatrix, dim: usize) -> Result<Self> {
        if mat.dim() != 4 * dim {
            return Err(FlywheelError::DimensionMismatch {
                expected: 4 * dim,
                found: mat.dim(),
            });
        }
        Ok(Self { mat, dim })
    }

    pub fn oscillator(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(partial_trace_qubits(self.mat.matrix(), self.dim))
    }

    /// Marginals of the hot and cold qubit.
    pub fn qubits(&self) -> (ComplexMatrix, ComplexMatrix) {
        let d = self.dim;
        let m = self.mat.matrix();
        let mut h = ComplexMatrix::zeros(2, 2);
        let mut c = ComplexMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for n in 0..d {
                        h[(i, j)] += m[((i * 2 + k) * d + n, (j * 2 + k) * d + n)];
                        c[(i, j)] += m[((k * 2 + i) * d + n, (k * 2 + j) * d + n)];
                    }
                }
            }
        }
        (h, c)
    }
}

/// Trace out both qubits of a `4 dim` matrix.
pub fn partial_trace_qubits(m: &ComplexMatrix, dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim, dim);
    for q in 0..4 {
        out += m.view((q * dim, q * dim), (dim, dim));
    }
    out
}

/// `K = -i g a b^dagger c^dagger + h.c.` on the composite space.
pub fn coupling_hamiltonian(g: f64, space: FockSpace) -> ComplexMatrix {
    let sm = sigma_minus();
    let c = annihilation(space);
    let x = kron(&kron(&sm, &sm.adjoint()), &c.adjoint()) * C64::new(0.0, -g);
    let xd = x.adjoint();
    x + xd
}

/// Full generator `L_h + L_c - i[K, .]`; the two highest oscillator levels
/// of every qubit block are watched by the truncation guard.
pub fn build_tripartite_generator(spec: &EngineSpec, space: FockSpace) -> Result<Generator> {
    spec.validate()?;
    let d = space.dim();
    let top = d.saturating_sub(2).max(1);
    let edge = (0..4).flat_map(|q| (top..d).map(move |n| q * d + n)).collect();
    Generator::new(coupling_hamiltonian(spec.g, space), qubit_baths(spec, d), edge)
}

/// Comparison of the full dynamics with the effective bath at one coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub g: f64,
    pub weak_coupling_margin: f64,
    pub max_trace_distance: f64,
    /// `d<c^dagger c>/dt` over the second half of the horizon.
    pub slope_full: f64,
    pub slope_reduced: f64,
}

impl ReductionPoint {
    pub fn slope_mismatch(&self) -> f64 {
        (self.slope_full - self.slope_reduced).abs() / self.slope_reduced.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub horizon: f64,
    pub dim: usize,
    pub points: Vec<ReductionPoint>,
    /// Distances strictly decrease along `points`.
    pub monotone: bool,
}

/// Initial oscillator amplitude used for reduction checks.
pub const REDUCTION_AMPLITUDE: f64 = 0.5;

/// Propagate `rho_hc^inf (x) rho(0)` under the full generator and `rho(0)`
/// under the reduced engine bath for `g`, `g/2`, `g/4`.
pub fn validate_reduction(spec: &EngineSpec, space: FockSpace, horizon: f64) -> Result<ReductionReport> {
    let rho0 = coherent(space, C64::new(REDUCTION_AMPLITUDE, 0.0))?;
    let mut points = Vec::new();
    for k in 0..3 {
        let s = EngineSpec {
            g: spec.g / f64::from(1 << k),
            ..*spec
        };
        points.push(compare(&s, space, horizon, &rho0)?);
    }
    let monotone = points
        .windows(2)
        .all(|w| w[1].max_trace_distance < w[0].max_trace_distance);
    Ok(ReductionReport {
        horizon,
        dim: space.dim(),
        points,
        monotone,
    })
}

const SAMPLES: usize = 60;

fn compare(spec: &EngineSpec, space: FockSpace, horizon: f64, rho0: &DensityMatrix) -> Result<ReductionPoint> {
    let d = space.dim();
    let full = build_tripartite_generator(spec, space)?;
    let reduced = build_engine_dissipator(&reduce(spec)?, space);
    let start = TripartiteState::engine_product(spec, rho0)?;
    let dt_full = 0.5 / full.norm_one();
    let dt_red = 0.5 / reduced.norm_one().max(1e-12);
    let grid = |dt: f64| {
        let steps = (horizon / SAMPLES as f64 / dt).ceil().max(1.0) as usize;
        (horizon / SAMPLES as f64 / steps as f64, steps)
    };
    let mut full_states = Vec::with_capacity(SAMPLES + 1);
    let (h, stride) = grid(dt_full);
    evolve(&full, &start.mat, horizon, h, stride, |_, m| {
        full_states.push(partial_trace_qubits(m, d))
    })?;
    let mut red_states = Vec::with_capacity(SAMPLES + 1);
    let (h, stride) = grid(dt_red);
    evolve(&reduced, rho0, horizon, h, stride, |_, m| red_states.push(m.clone()))?;
    if full_states.len() != red_states.len() {
        return Err(FlywheelError::InvalidParameter("observation grids differ".into()));
    }
    let mut max_distance = 0.0f64;
    for (a, b) in full_states.iter().zip(&red_states) {
        let dist = trace_distance(&DensityMatrix::new(a.clone())?, &DensityMatrix::new(b.clone())?)?;
        max_distance = max_distance.max(dist);
    }
    let occ = |m: &ComplexMatrix| crate::fock::occupation_of(m);
    let half = SAMPLES / 2;
    let span = horizon / 2.0;
    Ok(ReductionPoint {
        g: spec.g,
        weak_coupling_margin: weak_coupling_margin(spec, occ(rho0.matrix())),
        max_trace_distance: max_distance,
        slope_full: (occ(&full_states[SAMPLES]) - occ(&full_states[half])) / span,
        slope_reduced: (occ(&red_states[SAMPLES]) - occ(&red_states[half])) / span,
    })
}

/// Engine driven by a classical field of amplitude `eps` at `omega_o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalDriveSpec {
    /// `g` is ignored.
    pub engine: EngineSpec,
    pub eps: f64,
}

/// Two-qubit generator `-[eps (a b^dagger - a^dagger b), .] + L_h + L_c`.
pub fn build_classical_drive_generator(spec: &ClassicalDriveSpec) -> Result<Generator> {
    spec.engine.validate()?;
    if !(spec.eps.is_finite() && spec.eps >= 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("eps must be nonnegative, got {}", spec.eps)));
    }
    let x = drive_operator();
    Generator::new(x * C64::new(0.0, -spec.eps), qubit_baths(&spec.engine, 1), Vec::new())
}

/// `a b^dagger - a^dagger b`
fn drive_operator() -> ComplexMatrix {
    let sm = sigma_minus();
    let ab = kron(&sm, &sm.adjoint());
    &ab - ab.adjoint()
}

/// Output power `-P` of the classically driven engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalPower {
    pub closed_form: f64,
    /// `-eps omega_o tr[rho_inf (a b^dagger + a^dagger b)]` at the numerical
    /// stationary state.
    pub numerical: f64,
}

impl ClassicalPower {
    pub fn relative_mismatch(&self) -> f64 {
        let scale = self.closed_form.abs().max(self.numerical.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.closed_form - self.numerical).abs() / scale
        }
    }
}

/// Weak-driving closed form of the stationary output power.
pub fn classical_drive_power_closed_form(spec: &ClassicalDriveSpec) -> f64 {
    let e = &spec.engine;
    let (n_h, n_c) = (e.n_h(), e.n_c());
    let eps2 = spec.eps * spec.eps;
    let den = 4.0 * eps2 * ((1.0 - n_h) / e.gamma_h + (1.0 - n_c) / e.gamma_c)
        + e.gamma_h * (1.0 + (-e.beta_h * e.omega_h).exp())
        + e.gamma_c * (1.0 + (-e.beta_c * e.omega_c).exp());
    4.0 * eps2 * e.omega_o() * (n_h - n_c) / den
}

pub fn classical_drive_power(spec: &ClassicalDriveSpec) -> Result<ClassicalPower> {
    let gen = build_classical_drive_generator(spec)?;
    let rho = steady_state(&gen)?;
    let sm = sigma_minus();
    let ab = kron(&sm, &sm.adjoint());
    let flow = &ab + ab.adjoint();
    let numerical = -spec.eps * spec.engine.omega_o() * (rho.matrix() * flow).trace().re;
    Ok(ClassicalPower {
        closed_form: classical_drive_power_closed_form(spec),
        numerical,
    })
}

#[cfg(test)]
mod tests;
