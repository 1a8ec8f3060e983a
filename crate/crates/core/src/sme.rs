//! Conditional dynamics under simultaneous monitoring of both quadratures
//! with signal feedback, integrated by Euler-Maruyama in the rotating frame.
//!
//! One step reads
//!
//! `sigma' = sigma + L sigma dt + sqrt(g) H[(c - <c>) dxi* + h.c.] sigma - (k/sqrt(g)) [c^dagger dxi - c dxi*, sigma]`
//!
//! with `L` the full unconditional generator, `H[A]sigma = (A sigma + sigma A^dagger)/2`,
//! `g = gamma_m` and `k = kappa_f`. The stochastic part is traceless, so the
//! trace correction applied after each step only removes roundoff.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::EffectiveBath;
use crate::error::{FlywheelError, Result};
use crate::fock::{hermitize, ladder_mean, min_eigenvalue, occupation_of, ComplexMatrix, DensityMatrix, FockSpace, TRUNCATION_TOL};
use crate::linalg::CsrMatrix;
use crate::lindblad::{unconditional, Generator};
use crate::{ControlSpec, C64};

/// Most negative eigenvalue tolerated in a conditional state.
pub const CONDITIONAL_EIGENVALUE_TOL: f64 = 1e-6;
/// Largest `dt * ||L||_1` accepted by the stepper.
pub const SME_STABILITY_LIMIT: f64 = 1.0;
/// Default `dt * ||L||_1`.
pub const SME_DEFAULT_STEP_FACTOR: f64 = 0.25;
/// Trajectories per work unit in ensembles. Fixed so that the reduction
/// order, and hence every output bit, does not depend on the worker count.
pub const ENSEMBLE_BLOCK: usize = 64;

/// Real Wiener increments of the two quadrature signals, each of variance `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement {
    pub dxi_x: f64,
    pub dxi_y: f64,
}

impl NoiseIncrement {
    pub const ZERO: Self = Self { dxi_x: 0.0, dxi_y: 0.0 };

    /// Complex increment `(dxi_x + i dxi_y)/sqrt 2`: `|dxi|^2 = dt`, `dxi^2 = 0` on average.
    pub fn complex(&self) -> C64 {
        C64::new(self.dxi_x, self.dxi_y) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn from_complex(dxi: C64) -> Self {
        let s = std::f64::consts::SQRT_2;
        Self {
            dxi_x: dxi.re * s,
            dxi_y: dxi.im * s,
        }
    }

    /// Box-Muller pair from two uniform draws; no rejection loop, so the
    /// stream consumption per step is fixed.
    pub fn draw<R: RngCore>(rng: &mut R, dt: f64) -> Self {
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * u1.ln() * dt).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        Self {
            dxi_x: r * c,
            dxi_y: r * s,
        }
    }
}

/// Random stream of trajectory `stream` under master seed `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub bath: EffectiveBath,
    pub control: ControlSpec,
    pub space: FockSpace,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Index of the random stream under `seed`.
    pub stream: u64,
    /// Steps between recorded points.
    pub record_stride: usize,
    /// Keep every step's signal and noise.
    pub keep_signals: bool,
    pub keep_final_state: bool,
}

impl TrajectoryConfig {
    /// Configuration with the default step for this generator.
    pub fn with_default_step(
        bath: EffectiveBath,
        control: ControlSpec,
        space: FockSpace,
        t_end: f64,
        seed: u64,
    ) -> Result<Self> {
        let gen = unconditional(&bath, &control, space)?;
        Ok(Self {
            bath,
            control,
            space,
            dt: SME_DEFAULT_STEP_FACTOR / gen.norm_one(),
            t_end,
            seed,
            stream: 0,
            record_stride: 1,
            keep_signals: false,
            keep_final_state: false,
        })
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Why a trajectory stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuardEvent {
    TruncationBreached { time: f64, population: f64 },
    NonPositiveEigenvalue { time: f64, min_eigenvalue: f64 },
}

impl GuardEvent {
    pub fn time(&self) -> f64 {
        match *self {
            Self::TruncationBreached { time, .. } | Self::NonPositiveEigenvalue { time, .. } => time,
        }
    }

    pub fn into_error(self) -> FlywheelError {
        match self {
            Self::TruncationBreached { time, population } => FlywheelError::TruncationBreached { time, population },
            Self::NonPositiveEigenvalue { min_eigenvalue, .. } => {
                FlywheelError::NonPositiveEigenvalueBeyondTolerance { min_eigenvalue }
            }
        }
    }
}

/// Per-step measurement record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    /// `<c>` of the state the step started from.
    pub mean_c_before: Vec<C64>,
    pub signal: Vec<C64>,
    pub noise: Vec<NoiseIncrement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub mean_c: Vec<C64>,
    pub occupation: Vec<f64>,
    /// Signal of the step ending at each recorded time (none at `t = 0` or
    /// without monitoring).
    pub signal: Vec<Option<C64>>,
    pub signals: Option<SignalTrace>,
    pub final_state: Option<DensityMatrix>,
    pub guard: Option<GuardEvent>,
    /// Accumulated `|tr - 1|` removed by renormalization.
    pub trace_drift: f64,
}

/// Precomputed pieces of the conditional update for one configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    generator: Generator,
    dt: f64,
    /// `sqrt(gamma_m)/2`
    a: f64,
    /// `kappa_f/sqrt(gamma_m)`
    b: f64,
    monitored: bool,
    sqrt_n: Vec<f64>,
}

/// Outcome of one conditional step.
#[derive(Debug, Clone, Copy)]
struct StepInfo {
    mean_c_before: C64,
    signal: Option<C64>,
    trace_error: f64,
}

impl Stepper {
    pub fn new(cfg: &TrajectoryConfig) -> Result<Self> {
        cfg.control.validate()?;
        if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
            return Err(FlywheelError::InvalidParameter(format!("dt must be positive, got {}", cfg.dt)));
        }
        if !(cfg.t_end.is_finite() && cfg.t_end >= 0.0) {
            return Err(FlywheelError::InvalidParameter(format!("t_end must be nonnegative, got {}", cfg.t_end)));
        }
        if cfg.record_stride == 0 {
            return Err(FlywheelError::InvalidParameter("record_stride must be positive".into()));
        }
        let generator = unconditional(&cfg.bath, &cfg.control, cfg.space)?;
        let norm = generator.norm_one();
        if cfg.dt * norm > SME_STABILITY_LIMIT {
            return Err(FlywheelError::StepTooLarge {
                dt: cfg.dt,
                limit: SME_STABILITY_LIMIT / norm,
            });
        }
        let g = cfg.control.gamma_m;
        let monitored = g > 0.0;
        let (a, b) = if monitored {
            (0.5 * g.sqrt(), cfg.control.kappa_f / g.sqrt())
        } else {
            (0.0, 0.0)
        };
        let d = cfg.space.dim();
        Ok(Self {
            generator,
            dt: cfg.dt,
            a,
            b,
            monitored,
            sqrt_n: (0..=d).map(|n| (n as f64).sqrt()).collect(),
        })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    fn op(&self) -> &CsrMatrix {
        self.generator.superoperator()
    }

    /// One step in place. `lsig` and `v` are scratch buffers of length `d^2`.
    fn advance(&self, s: &mut ComplexMatrix, noise: &NoiseIncrement, lsig: &mut [C64], v: &mut [C64]) -> StepInfo {
        let d = s.nrows();
        let dt = self.dt;
        let mean = ladder_mean(s);
        self.op().mul_vec(s.as_slice(), lsig);
        let mut signal = None;
        let data = s.as_mut_slice();
        if self.monitored {
            let dxi = noise.complex();
            let dxi_c = dxi.conj();
            let up = dxi_c * (self.a + self.b);
            let down = dxi * (self.a - self.b);
            let centre = -(mean * dxi_c + mean.conj() * dxi) * self.a;
            for n in 0..d {
                let col = n * d;
                for m in 0..d {
                    let mut x = centre * data[col + m];
                    if m + 1 < d {
                        x += up * self.sqrt_n[m + 1] * data[col + m + 1];
                    }
                    if m > 0 {
                        x += down * self.sqrt_n[m] * data[col + m - 1];
                    }
                    v[col + m] = x;
                }
            }
            for n in 0..d {
                for m in 0..d {
                    let k = m + n * d;
                    data[k] += lsig[k] * dt + v[k] + v[n + m * d].conj();
                }
            }
            signal = Some(mean + dxi / (2.0 * self.a * dt));
        } else {
            for (x, l) in data.iter_mut().zip(lsig.iter()) {
                *x += l * dt;
            }
        }
        hermitize(s);
        let tr = s.trace().re;
        *s /= C64::new(tr, 0.0);
        StepInfo {
            mean_c_before: mean,
            signal,
            trace_error: (tr - 1.0).abs(),
        }
    }

    /// Validated single step: returns the new state and the measurement
    /// signal (none without monitoring).
    pub fn step(&self, sigma: &DensityMatrix, noise: &NoiseIncrement) -> Result<(DensityMatrix, Option<C64>)> {
        let d = self.generator.dim();
        if sigma.dim() != d {
            return Err(FlywheelError::DimensionMismatch {
                expected: d,
                found: sigma.dim(),
            });
        }
        let mut s = sigma.matrix().clone();
        let mut lsig = vec![C64::default(); d * d];
        let mut v = vec![C64::default(); d * d];
        let info = self.advance(&mut s, noise, &mut lsig, &mut v);
        let population = self.generator.edge_population(&s);
        if population > TRUNCATION_TOL {
            return Err(FlywheelError::TruncationBreached {
                time: self.dt,
                population,
            });
        }
        let min = min_eigenvalue(&s);
        if min < -CONDITIONAL_EIGENVALUE_TOL {
            return Err(FlywheelError::NonPositiveEigenvalueBeyondTolerance { min_eigenvalue: min });
        }
        Ok((DensityMatrix::from_raw(s), info.signal))
    }
}

/// One conditional step from `sigma` (builds the stepper on every call; use
/// [`Stepper`] in loops).
pub fn step(sigma: &DensityMatrix, cfg: &TrajectoryConfig, noise: &NoiseIncrement) -> Result<(DensityMatrix, Option<C64>)> {
    Stepper::new(cfg)?.step(sigma, noise)
}

fn check_initial(cfg: &TrajectoryConfig, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != cfg.space.dim() {
        return Err(FlywheelError::DimensionMismatch {
            expected: cfg.space.dim(),
            found: rho0.dim(),
        });
    }
    Ok(())
}

/// Integrate one trajectory. Guard violations stop the run and are reported
/// in the record rather than returned as errors.
pub fn run_trajectory(cfg: &TrajectoryConfig, rho0: &DensityMatrix) -> Result<TrajectoryRecord> {
    let stepper = Stepper::new(cfg)?;
    check_initial(cfg, rho0)?;
    Ok(run_with(&stepper, cfg, cfg.stream, rho0, |_, _, _| {}))
}

/// Core loop; `at_record(index, time, state)` sees every recorded state.
fn run_with<F>(stepper: &Stepper, cfg: &TrajectoryConfig, stream: u64, rho0: &DensityMatrix, mut at_record: F) -> TrajectoryRecord
where
    F: FnMut(usize, f64, &ComplexMatrix),
{
    let d = cfg.space.dim();
    let steps = cfg.steps();
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut s = rho0.matrix().clone();
    let mut lsig = vec![C64::default(); d * d];
    let mut v = vec![C64::default(); d * d];
    let n_rec = steps / cfg.record_stride + 1;
    let mut rec = TrajectoryRecord {
        seed: cfg.seed,
        stream,
        dt: cfg.dt,
        times: Vec::with_capacity(n_rec),
        mean_c: Vec::with_capacity(n_rec),
        occupation: Vec::with_capacity(n_rec),
        signal: Vec::with_capacity(n_rec),
        signals: cfg.keep_signals.then(SignalTrace::default),
        final_state: None,
        guard: None,
        trace_drift: 0.0,
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, s: &ComplexMatrix, sig: Option<C64>| {
        rec.times.push(t);
        rec.mean_c.push(ladder_mean(s));
        rec.occupation.push(occupation_of(s));
        rec.signal.push(sig);
    };
    push(&mut rec, 0.0, &s, None);
    at_record(0, 0.0, &s);
    let mut halted = false;
    for k in 1..=steps {
        let noise = NoiseIncrement::draw(&mut rng, cfg.dt);
        let info = stepper.advance(&mut s, &noise, &mut lsig, &mut v);
        rec.trace_drift += info.trace_error;
        if let Some(trace) = rec.signals.as_mut() {
            trace.mean_c_before.push(info.mean_c_before);
            trace.signal.push(info.signal.unwrap_or_default());
            trace.noise.push(noise);
        }
        let t = k as f64 * cfg.dt;
        let population = stepper.generator.edge_population(&s);
        if population > TRUNCATION_TOL || !population.is_finite() {
            rec.guard = Some(GuardEvent::TruncationBreached { time: t, population });
            halted = true;
            break;
        }
        if k % cfg.record_stride == 0 {
            let min = min_eigenvalue(&s);
            if min < -CONDITIONAL_EIGENVALUE_TOL {
                rec.guard = Some(GuardEvent::NonPositiveEigenvalue { time: t, min_eigenvalue: min });
                halted = true;
                break;
            }
            push(&mut rec, t, &s, info.signal);
            at_record(rec.times.len() - 1, t, &s);
        }
    }
    if cfg.keep_final_state && !halted {
        rec.final_state = Some(DensityMatrix::from_raw(s));
    }
    rec
}

/// Sample mean with its standard error (undefined for fewer than two samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moment {
    sum: f64,
    sum_sq: f64,
}

impl Moment {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Self) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn estimate(&self, n: usize) -> Estimate {
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                se: None,
                count: 0,
            };
        }
        let nf = n as f64;
        let mean = self.sum / nf;
        let se = (n >= 2).then(|| {
            let var = ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        });
        Estimate { mean, se, count: n }
    }
}

#[derive(Debug, Clone)]
struct CheckpointAcc {
    count: usize,
    re: Moment,
    im: Moment,
    occupation: Moment,
    abs_sq: Moment,
    state: ComplexMatrix,
}

impl CheckpointAcc {
    fn new(d: usize) -> Self {
        Self {
            count: 0,
            re: Moment::default(),
            im: Moment::default(),
            occupation: Moment::default(),
            abs_sq: Moment::default(),
            state: ComplexMatrix::zeros(d, d),
        }
    }

    fn add(&mut self, s: &ComplexMatrix) {
        let c = ladder_mean(s);
        self.count += 1;
        self.re.add(c.re);
        self.im.add(c.im);
        self.occupation.add(occupation_of(s));
        self.abs_sq.add(c.norm_sqr());
        self.state += s;
    }

    fn merge(&mut self, o: &Self) {
        self.count += o.count;
        self.re.merge(&o.re);
        self.im.merge(&o.im);
        self.occupation.merge(&o.occupation);
        self.abs_sq.merge(&o.abs_sq);
        self.state += &o.state;
    }
}

/// Ensemble statistics at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub time: f64,
    pub mean_c_re: Estimate,
    pub mean_c_im: Estimate,
    pub occupation: Estimate,
    /// `|<c>_sigma|^2`
    pub abs_c_sq: Estimate,
    /// Average conditional state.
    pub mean_state: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGuard {
    pub stream: u64,
    pub event: GuardEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub n_traj: usize,
    pub dim: usize,
    pub dt: f64,
    pub checkpoints: Vec<CheckpointSummary>,
    pub guard_events: Vec<TrajectoryGuard>,
    pub max_trace_drift: f64,
}

struct BlockResult {
    checkpoints: Vec<CheckpointAcc>,
    guards: Vec<TrajectoryGuard>,
    max_drift: f64,
}

/// Run `n_traj` trajectories on streams `0..n_traj` of `cfg.seed` and reduce
/// them at every recorded time. The result is independent of `workers`.
pub fn run_ensemble(cfg: &TrajectoryConfig, rho0: &DensityMatrix, n_traj: usize, workers: usize) -> Result<EnsembleSummary> {
    if n_traj == 0 {
        return Err(FlywheelError::InvalidParameter("n_traj must be positive".into()));
    }
    if workers == 0 {
        return Err(FlywheelError::InvalidParameter("workers must be positive".into()));
    }
    let stepper = Stepper::new(cfg)?;
    check_initial(cfg, rho0)?;
    let d = cfg.space.dim();
    let n_rec = cfg.steps() / cfg.record_stride + 1;
    let times: Vec<f64> = (0..n_rec).map(|k| (k * cfg.record_stride) as f64 * cfg.dt).collect();
    let blocks: Vec<(usize, usize)> = (0..n_traj)
        .step_by(ENSEMBLE_BLOCK)
        .map(|lo| (lo, (lo + ENSEMBLE_BLOCK).min(n_traj)))
        .collect();
    let run_block = |&(lo, hi): &(usize, usize)| {
        let mut acc: Vec<CheckpointAcc> = (0..n_rec).map(|_| CheckpointAcc::new(d)).collect();
        let mut guards = Vec::new();
        let mut max_drift: f64 = 0.0;
        for i in lo..hi {
            let rec = run_with(&stepper, cfg, i as u64, rho0, |k, _, s| acc[k].add(s));
            if let Some(event) = rec.guard {
                guards.push(TrajectoryGuard {
                    stream: i as u64,
                    event,
                });
            }
            max_drift = max_drift.max(rec.trace_drift);
        }
        BlockResult {
            checkpoints: acc,
            guards,
            max_drift,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| FlywheelError::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<BlockResult> = pool.install(|| blocks.par_iter().map(run_block).collect());
    let mut total: Vec<CheckpointAcc> = (0..n_rec).map(|_| CheckpointAcc::new(d)).collect();
    let mut guard_events = Vec::new();
    let mut max_trace_drift: f64 = 0.0;
    for r in &results {
        for (t, b) in total.iter_mut().zip(&r.checkpoints) {
            t.merge(b);
        }
        guard_events.extend(r.guards.iter().cloned());
        max_trace_drift = max_trace_drift.max(r.max_drift);
    }
    let checkpoints = total
        .into_iter()
        .zip(times)
        .map(|(a, time)| {
            let n = a.count;
            let mean_state = if n > 0 {
                a.state / C64::new(n as f64, 0.0)
            } else {
                a.state
            };
            CheckpointSummary {
                time,
                mean_c_re: a.re.estimate(n),
                mean_c_im: a.im.estimate(n),
                occupation: a.occupation.estimate(n),
                abs_c_sq: a.abs_sq.estimate(n),
                mean_state,
            }
        })
        .collect();
    Ok(EnsembleSummary {
        seed: cfg.seed,
        n_traj,
        dim: d,
        dt: cfg.dt,
        checkpoints,
        guard_events,
        max_trace_drift,
    })
}
