use flywheel_core::energy::{driving_power, ledger};
use flywheel_core::engine::{weak_coupling_check, WeakCouplingCheck};
use flywheel_core::fock::{displaced_thermal, ground_state, ladder_mean, occupation_of, trace_distance, DensityMatrix};
use flywheel_core::lindblad::{evolve, moment_flow, steady_state, unconditional, unstable_temperature};
use flywheel_core::sme::{run_ensemble, run_trajectory, TrajectoryConfig};
use flywheel_core::steady::{efficiency_surface, optimal_monitoring, predict, threshold, SurfaceGrid};
use flywheel_core::tripartite::{classical_drive_power, validate_reduction, ClassicalDriveSpec};
use flywheel_core::{ControlSpec, EffectiveBath, FlywheelError, FockSpace, C64};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{json_artifact, num, opt, strip_states, text_artifact, Artifact, Csv};
use crate::CliError;

const PLOT_SCRIPT: &str = include_str!("../assets/plot_surface.py");

pub fn run(kind: Experiment, cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    cfg.check_numerics()?;
    match kind {
        Experiment::Steady => steady(cfg),
        Experiment::Sweep => sweep(cfg),
        Experiment::Sme => sme(cfg),
        Experiment::Ensemble => ensemble(cfg),
        Experiment::Tripartite => tripartite(cfg),
        Experiment::Classical => classical(cfg),
        Experiment::Energy => energy(cfg),
        Experiment::Instability => instability(cfg),
    }
}

/// Check the configuration and the regime without running anything.
pub fn validate(kind: Experiment, cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    cfg.check_numerics()?;
    let mut lines = vec![format!("experiment: {}", kind.name())];
    match kind {
        Experiment::Tripartite | Experiment::Classical => {
            let e = cfg.engine_spec()?;
            lines.push(format!("engine regime: {:?}", e.regime()));
            if kind == Experiment::Classical {
                classical_spec(cfg)?;
            }
            let w = weak_coupling_check(&e, 0.0, cfg.weak_coupling_threshold);
            lines.push(weak_line(&w));
        }
        _ => {
            let bath = cfg.effective_bath()?;
            let ctl = cfg.control.spec()?;
            lines.push(format!(
                "Gamma_e {} beta_e {} kappa_e {} threshold {}",
                bath.gamma_e,
                bath.beta_e,
                bath.kappa_e,
                threshold(&bath)
            ));
            let occupation = match kind {
                Experiment::Instability | Experiment::Sweep => None,
                _ => {
                    let p = predict(&bath, &ctl)?;
                    lines.push(format!(
                        "above threshold: c_inf {} n_o {} eta {}",
                        p.c_inf.re, p.n_o, p.efficiency
                    ));
                    Some(p.n_o + p.c_inf.norm_sqr())
                }
            };
            if let (Some(e), Some(n)) = (cfg.engine, occupation) {
                lines.push(weak_line(&weak_coupling_check(&e, n, cfg.weak_coupling_threshold)));
            }
        }
    }
    Ok(lines)
}

fn weak_line(w: &WeakCouplingCheck) -> String {
    match &w.warning {
        Some(msg) => format!("warning: {msg}"),
        None => format!("weak-coupling margin {:.4} (threshold {})", w.margin, w.threshold),
    }
}

fn warn_weak(cfg: &ExperimentConfig, occupation: f64) -> Option<WeakCouplingCheck> {
    let e = cfg.engine?;
    let w = weak_coupling_check(&e, occupation, cfg.weak_coupling_threshold);
    if let Some(msg) = &w.warning {
        eprintln!("warning: {msg}");
    }
    Some(w)
}

fn space(cfg: &ExperimentConfig) -> Result<FockSpace, CliError> {
    Ok(FockSpace::new(cfg.numerics.dim)?)
}

fn steady(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let bath = cfg.effective_bath()?;
    let ctl = cfg.control.spec()?;
    let p = predict(&bath, &ctl)?;
    let s = space(cfg)?;
    let rho = steady_state(&unconditional(&bath, &ctl, s)?)?;
    let oracle = displaced_thermal(s, p.beta_omega, p.c_inf)?;
    let c = rho.mean_amplitude();
    let n = rho.occupation();
    let eta_numerical = c.norm_sqr() / n;
    let weak = warn_weak(cfg, p.n_o + p.c_inf.norm_sqr());
    let result = json!({
        "bath": bath,
        "prediction": p,
        "c_inf": p.c_inf.re,
        "eta": p.efficiency,
        "numerical": {
            "mean_c": c,
            "occupation": n,
            "efficiency": eta_numerical,
            "edge_population": rho.edge_population(),
        },
        "residuals": {
            "trace_distance_to_prediction": trace_distance(&rho, &oracle)?,
            "mean_c_relative": (c - p.c_inf).norm() / p.c_inf.norm(),
            "occupation_relative": (n - p.n_o - p.c_inf.norm_sqr()).abs() / (p.n_o + p.c_inf.norm_sqr()),
            "efficiency_relative": (eta_numerical - p.efficiency).abs() / p.efficiency,
        },
        "weak_coupling": weak,
    });
    Ok(vec![json_artifact("steady.json", "steady", cfg, &result)?])
}

fn sweep(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let bath = cfg.effective_bath()?;
    let eps = cfg.control.spec()?.eps_d;
    let sw = &cfg.sweep;
    let grid = SurfaceGrid::around_threshold(&bath, sw.n_kappa, sw.kappa_span, sw.n_ratio, sw.ratio_span)?;
    let surface = efficiency_surface(&bath, eps, &grid)?;
    let mut csv = Csv::new(cfg, &["kappa_f", "gamma_m", "eta", "work", "above_threshold", "ridge"])?;
    for p in &surface {
        csv.row(&[
            num(p.kappa_f),
            num(p.gamma_m),
            opt(p.efficiency),
            opt(p.work),
            p.above_threshold.to_string(),
            p.ridge.to_string(),
        ]);
    }
    let rows: Vec<_> = grid
        .kappa_f
        .iter()
        .map(|&k| optimal_monitoring(&bath, k, eps))
        .collect::<Result<_, _>>()?;
    let result = json!({
        "threshold": threshold(&bath),
        "grid": grid,
        "optimal_monitoring": rows,
    });
    Ok(vec![
        csv.finish("efficiency_surface.csv"),
        json_artifact("sweep.json", "sweep", cfg, &result)?,
        text_artifact("plot_surface.py", PLOT_SCRIPT),
    ])
}

fn trajectory_config(cfg: &ExperimentConfig, bath: EffectiveBath, ctl: ControlSpec) -> Result<TrajectoryConfig, CliError> {
    let n = &cfg.numerics;
    let mut t = TrajectoryConfig::with_default_step(bath, ctl, space(cfg)?, n.t_end, n.seed)?;
    if let Some(dt) = n.dt {
        t.dt = dt;
    }
    t.record_stride = n.record_stride;
    Ok(t)
}

fn initial_state(cfg: &ExperimentConfig, bath: &EffectiveBath, ctl: &ControlSpec) -> Result<DensityMatrix, CliError> {
    let s = space(cfg)?;
    if cfg.numerics.start_stationary {
        let p = predict(bath, ctl)?;
        Ok(displaced_thermal(s, p.beta_omega, p.c_inf)?)
    } else {
        Ok(ground_state(s))
    }
}

fn sme(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let bath = cfg.effective_bath()?;
    let ctl = cfg.control.spec()?;
    let tc = trajectory_config(cfg, bath, ctl)?;
    let rho0 = initial_state(cfg, &bath, &ctl)?;
    let rec = run_trajectory(&tc, &rho0)?;
    if let Some(g) = rec.guard {
        return Err(g.into_error().into());
    }
    let mut csv = Csv::new(cfg, &["time", "mean_c_re", "mean_c_im", "occupation", "signal_re", "signal_im"])?;
    for k in 0..rec.times.len() {
        let sig = rec.signal.get(k).copied().flatten();
        csv.row(&[
            num(rec.times[k]),
            num(rec.mean_c[k].re),
            num(rec.mean_c[k].im),
            num(rec.occupation[k]),
            opt(sig.map(|z| z.re)),
            opt(sig.map(|z| z.im)),
        ]);
    }
    let last = rec.times.len().saturating_sub(1);
    let result = json!({
        "seed": rec.seed,
        "stream": rec.stream,
        "dt": rec.dt,
        "steps": tc.steps(),
        "final_time": rec.times.get(last),
        "final_mean_c": rec.mean_c.get(last),
        "final_occupation": rec.occupation.get(last),
        "trace_drift": rec.trace_drift,
    });
    Ok(vec![csv.finish("trajectory.csv"), json_artifact("sme.json", "sme", cfg, &result)?])
}

fn ensemble(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let bath = cfg.effective_bath()?;
    let ctl = cfg.control.spec()?;
    let tc = trajectory_config(cfg, bath, ctl)?;
    let rho0 = initial_state(cfg, &bath, &ctl)?;
    let e = run_ensemble(&tc, &rho0, cfg.numerics.n_traj, cfg.numerics.workers)?;
    if let Some(g) = e.guard_events.first() {
        eprintln!("{} of {} trajectories hit a guard", e.guard_events.len(), e.n_traj);
        return Err(g.event.into_error().into());
    }
    let (c0, n0) = (rho0.mean_amplitude(), rho0.occupation());
    let mut csv = Csv::new(
        cfg,
        &[
            "time",
            "mean_c_re",
            "mean_c_re_se",
            "mean_c_im",
            "mean_c_im_se",
            "occupation",
            "occupation_se",
            "abs_c_sq",
            "abs_c_sq_se",
            "unconditional_c_re",
            "unconditional_c_im",
            "unconditional_occupation",
        ],
    )?;
    for cp in &e.checkpoints {
        let m = moment_flow(&bath, &ctl, c0, n0, cp.time)?;
        csv.row(&[
            num(cp.time),
            num(cp.mean_c_re.mean),
            opt(cp.mean_c_re.se),
            num(cp.mean_c_im.mean),
            opt(cp.mean_c_im.se),
            num(cp.occupation.mean),
            opt(cp.occupation.se),
            num(cp.abs_c_sq.mean),
            opt(cp.abs_c_sq.se),
            num(m.mean_c.re),
            num(m.mean_c.im),
            num(m.occupation),
        ]);
    }
    let summary = serde_json::to_value(&e).map_err(|err| CliError::Io(err.to_string()))?;
    Ok(vec![
        csv.finish("ensemble.csv"),
        json_artifact("ensemble.json", "ensemble", cfg, &strip_states(summary))?,
    ])
}

fn tripartite(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let spec = cfg.engine_spec()?;
    let rep = validate_reduction(&spec, space(cfg)?, cfg.numerics.t_end)?;
    let result = json!({
        "report": rep,
        "weak_coupling": weak_coupling_check(&spec, 0.0, cfg.weak_coupling_threshold),
    });
    Ok(vec![json_artifact("tripartite.json", "tripartite", cfg, &result)?])
}

fn classical_spec(cfg: &ExperimentConfig) -> Result<ClassicalDriveSpec, CliError> {
    let eps = cfg
        .classical
        .as_ref()
        .ok_or_else(|| CliError::Config("a [classical] section with eps is required".into()))?
        .eps;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(CliError::Config(format!("classical.eps must be nonnegative, got {eps}")));
    }
    Ok(ClassicalDriveSpec {
        engine: cfg.engine_spec()?,
        eps,
    })
}

fn classical(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let spec = classical_spec(cfg)?;
    let p = classical_drive_power(&spec)?;
    let result = json!({
        "output_power": p,
        "relative_mismatch": p.relative_mismatch(),
        "n_h": spec.engine.n_h(),
        "n_c": spec.engine.n_c(),
    });
    Ok(vec![json_artifact("classical.json", "classical", cfg, &result)?])
}

fn energy(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let bath = cfg.effective_bath()?;
    let ctl = cfg.control.spec()?;
    let p = predict(&bath, &ctl)?;
    let mut tc = trajectory_config(cfg, bath, ctl)?;
    tc.record_stride = tc.steps().max(1);
    let s = space(cfg)?;
    let rho_inf = displaced_thermal(s, p.beta_omega, p.c_inf)?;
    let e = run_ensemble(&tc, &rho_inf, cfg.numerics.n_traj, cfg.numerics.workers)?;
    if let Some(g) = e.guard_events.first() {
        return Err(g.event.into_error().into());
    }
    let l = ledger(&bath, &ctl, s, Some(&e))?;
    let weak = warn_weak(cfg, p.n_o + p.c_inf.norm_sqr());
    let result = json!({
        "ledger": l,
        "consumable_power": l.consumable_power(),
        "feedback_bound_holds_3se": l.feedback_bound_holds(3.0),
        "driving_power_from_prediction": driving_power(&rho_inf, p.c_inf, ctl.eps_d, bath.omega_o)?,
        "note": "the feedback flow is reported as J_f_total; P_f_det is the deterministic-feedback trajectory estimate",
        "weak_coupling": weak,
    });
    Ok(vec![json_artifact("energy.json", "energy", cfg, &result)?])
}

fn instability(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, CliError> {
    let bath = cfg.effective_bath()?;
    let ctl = cfg.control.spec()?;
    let s = space(cfg)?;
    let gen = unconditional(&bath, &ctl, s)?;
    let dt = cfg.numerics.dt.unwrap_or_else(|| gen.recommended_dt());
    let mut rows: Vec<(f64, C64, f64)> = Vec::new();
    let res = evolve(&gen, &ground_state(s), cfg.numerics.t_end, dt, cfg.numerics.record_stride, |t, m| {
        rows.push((t, ladder_mean(m), occupation_of(m)))
    });
    let guard = match res {
        Ok(_) => None,
        Err(FlywheelError::TruncationBreached { time, population }) => Some(json!({"time": time, "population": population})),
        Err(e) => return Err(e.into()),
    };
    let mut csv = Csv::new(
        cfg,
        &[
            "time",
            "mean_c_re",
            "mean_c_im",
            "occupation",
            "closed_c_re",
            "closed_c_im",
            "closed_occupation",
            "temperature",
        ],
    )?;
    for &(t, c, n) in &rows {
        let m = moment_flow(&bath, &ctl, C64::new(0.0, 0.0), 0.0, t)?;
        let temp = if n > 0.0 { Some(unstable_temperature(n, bath.omega_o)?) } else { None };
        csv.row(&[
            num(t),
            num(c.re),
            num(c.im),
            num(n),
            num(m.mean_c.re),
            num(m.mean_c.im),
            num(m.occupation),
            opt(temp),
        ]);
    }
    // undriven: n = A exp(rt) + C, read off three equally spaced records
    let rate = if ctl.eps_d == 0.0 { growth_rate(&rows) } else { None };
    let result = json!({
        "kappa_e": bath.kappa_e,
        "expected_growth_rate": -2.0 * bath.kappa_e,
        "measured_growth_rate": rate,
        "guard": guard,
        "records": rows.len(),
    });
    Ok(vec![
        csv.finish("instability.csv"),
        json_artifact("instability.json", "instability", cfg, &result)?,
    ])
}

fn growth_rate(rows: &[(f64, C64, f64)]) -> Option<f64> {
    let mut k = rows.len().checked_sub(1)?;
    while k >= 2 {
        let k2 = k - k % 2;
        let (t0, t1, t2) = (rows[0].0, rows[k2 / 2].0, rows[k2].0);
        if ((t2 - t1) - (t1 - t0)).abs() <= 1e-9 * t2 {
            let (n0, n1, n2) = (rows[0].2, rows[k2 / 2].2, rows[k2].2);
            return Some(((n2 - n1) / (n1 - n0)).ln() / (t2 - t1));
        }
        k -= 1;
    }
    None
}
