//! Unconditional generators on the truncated oscillator space, their
//! propagation, stationary states and closed-form moments.
//!
//! The computational frame is the interaction picture with respect to
//! `omega_o c^dagger c`; driving then enters as a static Hamiltonian.

mod moments;
mod propagate;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use moments::{moment_flow, unstable_temperature, Moments};
pub(crate) use moments::upward_total;
pub use propagate::{evolve, propagate, steady_state, RK4_STABILITY_LIMIT};

use crate::engine::EffectiveBath;
use crate::error::{FlywheelError, Result};
use crate::fock::{annihilation, number, ComplexMatrix, FockSpace};
use crate::linalg::{CsrMatrix, SuperopBuilder};
use crate::{ControlSpec, C64};

/// Which physical process a dissipator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Engine,
    Monitoring,
    Feedback,
    /// Qubit baths and anything else built by hand.
    Other,
}

/// Direction of a ladder-operator jump, used to total the composite rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    Lower,
    Raise,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    Interaction,
    Schroedinger,
}

/// `rate * (L rho L^dagger - {L^dagger L, rho}/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipatorTerm {
    pub channel: Channel,
    pub kind: JumpKind,
    pub jump: ComplexMatrix,
    pub rate: f64,
}

impl DissipatorTerm {
    /// A negative coefficient only makes sense inside a composite generator.
    pub fn is_formally_negative(&self) -> bool {
        self.rate < 0.0
    }

    /// Dense action on `rho`.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        if self.rate == 0.0 {
            return ComplexMatrix::zeros(rho.nrows(), rho.ncols());
        }
        let l = &self.jump;
        let ld = l.adjoint();
        let ldl = &ld * l;
        let anti = &ldl * rho + rho * &ldl;
        (l * rho * &ld - anti * C64::new(0.5, 0.0)) * C64::new(self.rate, 0.0)
    }
}

/// Total ladder rates of a composite generator: `down = Gamma`,
/// `up = Gamma exp(-beta omega_o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeRates {
    pub down: f64,
    pub up: f64,
    pub omega_o: f64,
}

impl CompositeRates {
    #[allow(non_snake_case)]
    pub fn Gamma(&self) -> f64 {
        self.down
    }

    /// Amplitude damping rate `(down - up)/2`.
    pub fn kappa(&self) -> f64 {
        0.5 * (self.down - self.up)
    }

    /// Effective inverse temperature; `+inf` when nothing drives upward,
    /// negative when the composite amplifies.
    pub fn beta(&self) -> f64 {
        if self.up == 0.0 {
            return f64::INFINITY;
        }
        (self.down / self.up).ln() / self.omega_o
    }

    /// Standard (thermalizing) form: the downward rate exceeds the upward one.
    pub fn is_thermalizing(&self) -> bool {
        self.down > self.up
    }
}

/// `d rho/dt = -i[H, rho] + sum_k D_k rho`.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    hamiltonian: ComplexMatrix,
    terms: Vec<DissipatorTerm>,
    picture: Picture,
    fock: Option<FockSpace>,
    omega_o: Option<f64>,
    composite: Option<CompositeRates>,
    eps_d: f64,
    edge_diagonal: Vec<usize>,
    superop: OnceLock<CsrMatrix>,
}

impl Generator {
    /// Generic generator on a `dim`-dimensional space. `edge_diagonal` lists
    /// the diagonal entries whose population the truncation guard watches.
    pub fn new(
        hamiltonian: ComplexMatrix,
        terms: Vec<DissipatorTerm>,
        edge_diagonal: Vec<usize>,
    ) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if hamiltonian.ncols() != dim {
            return Err(FlywheelError::InvalidParameter("Hamiltonian is not square".into()));
        }
        for t in &terms {
            if t.jump.nrows() != dim || t.jump.ncols() != dim {
                return Err(FlywheelError::DimensionMismatch {
                    expected: dim,
                    found: t.jump.nrows(),
                });
            }
        }
        if edge_diagonal.iter().any(|&k| k >= dim) {
            return Err(FlywheelError::InvalidParameter("edge index outside the space".into()));
        }
        Ok(Self {
            dim,
            hamiltonian,
            terms,
            picture: Picture::Interaction,
            fock: None,
            omega_o: None,
            composite: None,
            eps_d: 0.0,
            edge_diagonal,
            superop: OnceLock::new(),
        })
    }

    fn on_fock(space: FockSpace, terms: Vec<DissipatorTerm>) -> Self {
        let d = space.dim();
        Self {
            dim: d,
            hamiltonian: ComplexMatrix::zeros(d, d),
            terms,
            picture: Picture::Interaction,
            fock: Some(space),
            omega_o: None,
            composite: None,
            eps_d: 0.0,
            edge_diagonal: (d.saturating_sub(2).max(1)..d).collect(),
            superop: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn terms(&self) -> &[DissipatorTerm] {
        &self.terms
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn fock_space(&self) -> Option<FockSpace> {
        self.fock
    }

    pub fn omega_o(&self) -> Option<f64> {
        self.omega_o
    }

    /// Total rates when this generator came out of [`compose`].
    pub fn composite(&self) -> Option<CompositeRates> {
        self.composite
    }

    pub fn eps_d(&self) -> f64 {
        self.eps_d
    }

    pub fn edge_diagonal(&self) -> &[usize] {
        &self.edge_diagonal
    }

    /// Population on the watched diagonal entries.
    pub fn edge_population(&self, rho: &ComplexMatrix) -> f64 {
        self.edge_diagonal.iter().map(|&k| rho[(k, k)].re.abs()).sum()
    }

    /// Vectorized (column-major) superoperator, built on first use.
    pub fn superoperator(&self) -> &CsrMatrix {
        self.superop.get_or_init(|| {
            let mut b = SuperopBuilder::new(self.dim);
            let i = C64::new(0.0, 1.0);
            b.left(&self.hamiltonian, -i);
            b.right(&self.hamiltonian, i);
            for t in &self.terms {
                if t.rate == 0.0 {
                    continue;
                }
                let ld = t.jump.adjoint();
                let ldl = &ld * &t.jump;
                b.sandwich(&t.jump, &ld, C64::new(t.rate, 0.0));
                b.left(&ldl, C64::new(-0.5 * t.rate, 0.0));
                b.right(&ldl, C64::new(-0.5 * t.rate, 0.0));
            }
            b.build()
        })
    }

    /// Induced 1-norm of the superoperator; sets the time-step scale.
    pub fn norm_one(&self) -> f64 {
        self.superoperator().norm_one()
    }

    /// Step size used when the caller does not pick one.
    pub fn recommended_dt(&self) -> f64 {
        let n = self.norm_one();
        if n > 0.0 {
            1.0 / n
        } else {
            1.0
        }
    }

    /// Dense action `L rho`.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let i = C64::new(0.0, 1.0);
        let mut out = (&self.hamiltonian * rho - rho * &self.hamiltonian) * (-i);
        for t in &self.terms {
            out += t.apply(rho);
        }
        out
    }

    /// Dense action of the dissipators of one channel only.
    pub fn apply_channel(&self, channel: Channel, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for t in self.terms.iter().filter(|t| t.channel == channel) {
            out += t.apply(rho);
        }
        out
    }

    /// Dense action of the Hamiltonian part only.
    pub fn apply_hamiltonian(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        (&self.hamiltonian * rho - rho * &self.hamiltonian) * C64::new(0.0, -1.0)
    }

    /// Negative coefficients are only admitted inside a thermalizing or
    /// amplifying composite with nonnegative totals.
    pub fn check_propagatable(&self) -> Result<()> {
        let negative = self.terms.iter().any(|t| t.rate < 0.0);
        match self.composite {
            None if negative => Err(FlywheelError::NegativeRateStandalone),
            Some(r) if r.down < 0.0 || r.up < 0.0 => Err(FlywheelError::NonStandardComposite {
                down: r.down,
                up: r.up,
            }),
            _ => Ok(()),
        }
    }

    /// Same dynamics seen in the lab frame: adds `omega_o c^dagger c`.
    /// The driving Hamiltonian is static only in the rotating frame, so a
    /// driven generator cannot be converted.
    pub fn to_schroedinger(&self, omega_o: f64) -> Result<Self> {
        let space = self.fock.ok_or_else(|| {
            FlywheelError::InvalidParameter("lab-frame conversion needs a Fock-space generator".into())
        })?;
        if self.eps_d != 0.0 {
            return Err(FlywheelError::InvalidParameter(
                "a driven generator is time dependent in the lab frame".into(),
            ));
        }
        if self.picture == Picture::Schroedinger {
            return Ok(self.clone());
        }
        let mut g = self.clone();
        g.hamiltonian += number(space) * C64::new(omega_o, 0.0);
        g.picture = Picture::Schroedinger;
        g.omega_o = Some(omega_o);
        g.superop = OnceLock::new();
        Ok(g)
    }
}

fn ladder_terms(space: FockSpace, channel: Channel, down: f64, up: f64) -> Vec<DissipatorTerm> {
    let c = annihilation(space);
    let cd = c.adjoint();
    vec![
        DissipatorTerm {
            channel,
            kind: JumpKind::Lower,
            jump: c,
            rate: down,
        },
        DissipatorTerm {
            channel,
            kind: JumpKind::Raise,
            jump: cd,
            rate: up,
        },
    ]
}

/// Effective engine bath: `Gamma_e D[c] + Gamma_e exp(-beta_e omega_o) D[c^dagger]`.
pub fn build_engine_dissipator(bath: &EffectiveBath, space: FockSpace) -> Generator {
    let mut g = Generator::on_fock(space, ladder_terms(space, Channel::Engine, bath.gamma_e, bath.up_rate()));
    g.omega_o = Some(bath.omega_o);
    g
}

/// Back-action of monitoring both quadratures: an infinite-temperature bath
/// with rate `gamma_m/4` each way.
pub fn build_monitoring_dissipator(gamma_m: f64, space: FockSpace) -> Result<Generator> {
    if !(gamma_m.is_finite() && gamma_m >= 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("gamma_m must be nonnegative, got {gamma_m}")));
    }
    let r = 0.25 * gamma_m;
    Ok(Generator::on_fock(space, ladder_terms(space, Channel::Monitoring, r, r)))
}

/// Averaged feedback: `(k^2/g + k) D[c] + (k^2/g - k) D[c^dagger]`. The
/// upward coefficient is negative for `kappa_f < gamma_m`; such a generator
/// may only be propagated after [`compose`].
pub fn build_feedback_dissipator(gamma_m: f64, kappa_f: f64, space: FockSpace) -> Result<Generator> {
    if !(kappa_f.is_finite() && kappa_f >= 0.0) {
        return Err(FlywheelError::InvalidParameter(format!("kappa_f must be nonnegative, got {kappa_f}")));
    }
    if kappa_f == 0.0 {
        return Ok(Generator::on_fock(space, ladder_terms(space, Channel::Feedback, 0.0, 0.0)));
    }
    if !(gamma_m.is_finite() && gamma_m > 0.0) {
        return Err(FlywheelError::FeedbackWithoutMeasurement { kappa_f });
    }
    let q = kappa_f * kappa_f / gamma_m;
    Ok(Generator::on_fock(
        space,
        ladder_terms(space, Channel::Feedback, q + kappa_f, q - kappa_f),
    ))
}

/// Unconditional generator of the monitored, fed-back, driven flywheel.
/// Driving enters as `-eps_d [c^dagger - c, rho]`.
pub fn compose(bath: &Generator, monitoring: &Generator, feedback: &Generator, eps_d: f64) -> Result<Generator> {
    let d = bath.dim;
    for g in [monitoring, feedback] {
        if g.dim != d {
            return Err(FlywheelError::DimensionMismatch {
                expected: d,
                found: g.dim,
            });
        }
    }
    if !eps_d.is_finite() {
        return Err(FlywheelError::InvalidParameter(format!("eps_d must be finite, got {eps_d}")));
    }
    let space = bath
        .fock
        .ok_or_else(|| FlywheelError::InvalidParameter("composition needs Fock-space generators".into()))?;
    let omega_o = bath
        .omega_o
        .ok_or_else(|| FlywheelError::InvalidParameter("bath generator carries no omega_o".into()))?;
    let mut terms = Vec::new();
    for g in [bath, monitoring, feedback] {
        terms.extend(g.terms.iter().cloned());
    }
    let total = |kind| terms.iter().filter(|t| t.kind == kind).map(|t| t.rate).sum::<f64>();
    let rates = CompositeRates {
        down: total(JumpKind::Lower),
        up: total(JumpKind::Raise),
        omega_o,
    };
    let c = annihilation(space);
    // H = -i eps_d (c^dagger - c)
    let hamiltonian = (c.adjoint() - &c) * C64::new(0.0, -eps_d)
        + &bath.hamiltonian
        + &monitoring.hamiltonian
        + &feedback.hamiltonian;
    let mut g = Generator::on_fock(space, terms);
    g.hamiltonian = hamiltonian;
    g.omega_o = Some(omega_o);
    g.composite = Some(rates);
    g.eps_d = eps_d;
    g.check_propagatable()?;
    Ok(g)
}

/// Shortcut for `compose` from physical parameters.
pub fn unconditional(bath: &EffectiveBath, control: &ControlSpec, space: FockSpace) -> Result<Generator> {
    control.validate()?;
    compose(
        &build_engine_dissipator(bath, space),
        &build_monitoring_dissipator(control.gamma_m, space)?,
        &build_feedback_dissipator(control.gamma_m, control.kappa_f, space)?,
        control.eps_d,
    )
}

#[cfg(test)]
mod tests;
