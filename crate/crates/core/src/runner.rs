//! Experiment orchestration: single runs, parameter sweeps and their files.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    chattering_band, chattering_metrics, default_eps_band, lyapunov_monotonicity, verify_reaching_bound, ChatterReport,
    MonotonicityReport, ReachReport,
};
use crate::config::{config_from_value, RunConfig, ScenarioSpec};
use crate::controller::ControllerConfig;
use crate::dynamics::{DisturbanceSignal, SlidingSurface, SystemModel};
use crate::error::{Result, SmcError};
use crate::io::{format_number, write_json, write_trajectory_file};
use crate::scalar::dot;
use crate::simulator::{simulate, IntegratorConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStanza {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: ScenarioSpec,
    pub model: String,
    pub surface: String,
    pub controller: ControllerConfig<f64>,
    pub integrator: IntegratorConfig<f64>,
    pub disturbance: DisturbanceSignal<f64>,
    pub unmatched: DisturbanceSignal<f64>,
    pub samples: usize,
    /// Bound on `|s'|` along the run, used for `eps_band` and `tol_V`.
    pub sdot_bound: f64,
    pub chattering_band: f64,
    pub tol_v: f64,
    pub reach: Option<ReachReport<f64>>,
    pub reaching_bound_verified: bool,
    pub chatter: Option<ChatterReport<f64>>,
    pub lyapunov: Option<MonotonicityReport<f64>>,
    pub error: Option<ErrorStanza>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory<f64>,
    pub report: RunReport,
}

#[derive(Debug, Clone)]
pub struct RunFiles {
    pub trajectory_csv: PathBuf,
    pub report_json: PathBuf,
}

pub fn build_plant(cfg: &RunConfig) -> Result<(SystemModel<f64>, SlidingSurface<f64>)> {
    cfg.scenario.name.build(&cfg.scenario.parameters, cfg.disturbance.clone(), cfg.unmatched.clone())
}

/// Largest `|ds/dx . b|` and `sum_i |ds/dx_i| w_um_i` over the visited states.
fn gain_extremes(
    traj: &Trajectory<f64>,
    model: &SystemModel<f64>,
    surface: &SlidingSurface<f64>,
) -> Result<(f64, f64)> {
    let mut b_max = 0.0f64;
    let mut w_max = 0.0f64;
    for p in &traj.samples {
        let g = surface.gradient(&p.x)?;
        b_max = b_max.max(dot(&g, &model.input_vector(&p.x)?).abs());
        let w: f64 = g.iter().zip(model.unmatched_bound()).map(|(gi, wi)| gi.abs() * wi).sum();
        w_max = w_max.max(w);
    }
    Ok((b_max, w_max))
}

/// Simulates and analyses `cfg` without touching the filesystem. Simulator
/// failures are recorded in the report and the partial trajectory is kept.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let (model, surface) = build_plant(cfg)?;
    let (trajectory, error) =
        match simulate(&model, &surface, &cfg.controller, &cfg.integrator, &cfg.scenario.initial_state) {
            Ok(t) => (t, None),
            Err(e) => {
                let stanza = ErrorStanza { kind: e.cause.kind().into(), message: e.cause.to_string() };
                (e.partial, Some(stanza))
            }
        };

    let c = &cfg.controller;
    let step = cfg.integrator.step;
    let sup_d = cfg.disturbance.sup_abs();
    let (b_max, w_max) = gain_extremes(&trajectory, &model, &surface)?;
    let sdot_bound = c.n + (c.d_m + c.w_uim + sup_d) * b_max + w_max;
    let tol_v = 10.0 * step * sdot_bound * sdot_bound;
    let eps_band = cfg.eps_band.unwrap_or_else(|| default_eps_band(step, sdot_bound));

    let mut report = RunReport {
        scenario: cfg.scenario.clone(),
        model: model.label.clone(),
        surface: surface.description.clone(),
        controller: c.clone(),
        integrator: cfg.integrator.clone(),
        disturbance: cfg.disturbance.clone(),
        unmatched: cfg.unmatched.clone(),
        samples: trajectory.len(),
        sdot_bound,
        chattering_band: chattering_band(step, c, b_max, sup_d),
        tol_v,
        reach: None,
        reaching_bound_verified: false,
        chatter: None,
        lyapunov: None,
        error,
    };

    if !trajectory.is_empty() {
        let (verified, reach) = verify_reaching_bound(&trajectory, c, eps_band)?;
        report.reaching_bound_verified = verified;
        report.chatter = chattering_metrics(&trajectory, &reach).ok();
        report.reach = Some(reach);
        report.lyapunov = Some(lyapunov_monotonicity(&trajectory, tol_v)?);
    }
    Ok(RunOutcome { trajectory, report })
}

/// Runs `cfg` and writes the trajectory CSV and report JSON into its output
/// directory. The files are written even when the simulation failed.
pub fn run_scenario(cfg: &RunConfig) -> Result<(RunOutcome, RunFiles)> {
    let outcome = execute(cfg)?;
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| SmcError::Io(format!("{}: {e}", cfg.output.dir.display())))?;
    let files = RunFiles { trajectory_csv: cfg.trajectory_path(), report_json: cfg.report_path() };
    write_trajectory_file(&outcome.trajectory, &files.trajectory_csv)?;
    write_json(&outcome.report, &files.report_json)?;
    Ok((outcome, files))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub t_reach: Option<f64>,
    pub band_amplitude: Option<f64>,
    pub bound_satisfied: bool,
    pub status: String,
}

impl SweepRow {
    pub fn from_outcome(value: f64, outcome: &RunOutcome) -> Self {
        let reach = outcome.report.reach.as_ref();
        Self {
            value,
            t_reach: reach.and_then(|r| r.t_reach_measured),
            band_amplitude: outcome.report.chatter.map(|c| c.band_amplitude),
            bound_satisfied: reach.and_then(|r| r.bound_satisfied).unwrap_or(false),
            status: outcome.report.error.as_ref().map_or_else(|| "ok".to_string(), |e| e.kind.clone()),
        }
    }
}

pub const SWEEP_HEADER: &str = "value,t_reach,band_amplitude,bound_satisfied,status";

/// Resolves a dotted parameter path (`controller.n`, `scenario.initial_state.0`)
/// to a numeric field and returns the config with that field set to `value`.
pub fn with_parameter(cfg: &RunConfig, path: &str, value: f64) -> Result<RunConfig> {
    let invalid = |why: &str| SmcError::ConfigValidation(vec![format!("{path}: {why}")]);
    if path.is_empty() {
        return Err(invalid("empty parameter path"));
    }
    let mut doc = serde_json::to_value(cfg).map_err(|e| SmcError::Io(e.to_string()))?;
    let pointer = format!("/{}", path.replace('.', "/"));
    let slot = doc.pointer_mut(&pointer).ok_or_else(|| invalid("no such field"))?;
    let numeric_slot = slot.is_number() || (path == "eps_band" && slot.is_null());
    if !numeric_slot {
        return Err(invalid("not a numeric field"));
    }
    *slot = if slot.is_u64() {
        if value < 0.0 || value.fract() != 0.0 {
            return Err(invalid("integer field needs a nonnegative whole value"));
        }
        serde_json::Value::from(value as u64)
    } else {
        serde_json::Number::from_f64(value)
            .map(serde_json::Value::Number)
            .ok_or_else(|| invalid("value must be finite"))?
    };
    config_from_value(doc)
}

/// One independent run per value; rows come back in input order.
pub fn sweep(cfg: &RunConfig, path: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    // Resolve every config first so a bad path fails before any run starts.
    let configs = values.iter().map(|&v| with_parameter(cfg, path, v)).collect::<Result<Vec<_>>>()?;
    configs.par_iter().zip(values.par_iter()).map(|(c, &v)| execute(c).map(|o| SweepRow::from_outcome(v, &o))).collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_number(r.value),
            opt(r.t_reach),
            opt(r.band_amplitude),
            r.bound_satisfied,
            r.status
        )?;
    }
    Ok(())
}

pub fn write_sweep_file(rows: &[SweepRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| SmcError::Io(format!("{}: {e}", path.display())))?;
    write_sweep_csv(rows, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::ScenarioKind;

    #[test]
    fn parameter_paths() {
        let cfg = RunConfig::for_scenario(ScenarioKind::DoubleIntegrator, 1.0);
        assert_eq!(with_parameter(&cfg, "controller.n", 2.0).unwrap().controller.n, 2.0);
        assert_eq!(
            with_parameter(&cfg, "scenario.initial_state.1", -3.0).unwrap().scenario.initial_state,
            vec![1.0, -3.0]
        );
        assert_eq!(with_parameter(&cfg, "eps_band", 0.01).unwrap().eps_band, Some(0.01));
        assert_eq!(with_parameter(&cfg, "disturbance.seed", 5.0).unwrap().disturbance.seed, 5);
        for bad in ["controller.gain", "scenario.name", "integrator.crossing_refine", "", "scenario.initial_state.7"] {
            assert!(matches!(with_parameter(&cfg, bad, 1.0), Err(SmcError::ConfigValidation(_))), "{bad}");
        }
        // Values that break an invariant are reported like any other config problem.
        assert!(matches!(with_parameter(&cfg, "controller.n", -1.0), Err(SmcError::ConfigValidation(_))));
    }

    #[test]
    fn empty_sweep_has_header_only() {
        let cfg = RunConfig::for_scenario(ScenarioKind::PureIntegrator, 1.0);
        let rows = sweep(&cfg, "controller.n", &[]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{SWEEP_HEADER}\n"));
    }

    #[test]
    fn failed_run_keeps_partial_data() {
        let mut cfg = RunConfig::for_scenario(ScenarioKind::PureIntegrator, 1.0);
        cfg.controller.sing_tol = 2.0;
        let out = execute(&cfg).unwrap();
        assert_eq!(out.report.error.as_ref().unwrap().kind, "singular-surface-gain");
        assert!(out.trajectory.is_empty());
        assert!(!out.report.reaching_bound_verified);
    }
}
