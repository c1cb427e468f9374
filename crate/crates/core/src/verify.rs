//! Built-in verification suites behind `smc verify`.
//!
//! Each check runs a fixed experiment and compares one measured number
//! against a pinned threshold.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    chattering_band, chattering_metrics, compare_closed_form, lyapunov_monotonicity, measure_reaching_time,
};
use crate::config::RunConfig;
use crate::controller::{implied_w_uim, reaching_residual_with, ControllerConfig};
use crate::dynamics::{gradient_rel_error, DisturbanceSignal, FD_STEP};
use crate::error::{Result, SmcError};
use crate::runner::{build_plant, execute, RunOutcome};
use crate::scenarios::ScenarioKind;
use crate::simulator::{simulate_reaching_law, IntegratorConfig, Trajectory};

/// Fixed step for every verification run.
pub const STEP: f64 = 1e-4;
/// Reach band used by the reaching-time checks.
pub const EPS_BAND: f64 = 1e-3;
/// Reaching gain of the double-integrator disturbance experiments. It sits
/// below the 0.5 excess of the undersized-bound case so that case loses
/// sliding rather than only slowing down.
pub const DISTURBANCE_GAIN: f64 = 0.4;
pub const RANDOM_STATES: usize = 1000;
pub const SAMPLE_SEED: u64 = 0x5EED_2017;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Reaching,
    Disturbance,
    Gradients,
    Lyapunov,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["reaching", "disturbance", "gradients", "lyapunov", "all"];
}

impl FromStr for Suite {
    type Err = SmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reaching" => Ok(Self::Reaching),
            "disturbance" => Ok(Self::Disturbance),
            "gradients" => Ok(Self::Gradients),
            "lyapunov" => Ok(Self::Lyapunov),
            "all" => Ok(Self::All),
            _ => Err(SmcError::Parameter(format!("unknown suite '{s}' (known: {})", Self::NAMES.join(", ")))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: &'static str,
    pub measured: f64,
    pub expected: String,
    pub tolerance: String,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: Suite) -> Vec<CriterionResult> {
    let checks: &[fn() -> Result<CriterionResult>] = match suite {
        Suite::Reaching => &[reach_time, reach_time_sweep, closed_form, reaching_condition, discretization_order],
        Suite::Disturbance => &[matched_invariance, bound_necessity, unmatched_compensation],
        Suite::Gradients => &[gradient_oracle],
        Suite::Lyapunov => &[lyapunov_decrease],
        Suite::All => &[
            reach_time,
            reach_time_sweep,
            closed_form,
            reaching_condition,
            matched_invariance,
            bound_necessity,
            unmatched_compensation,
            lyapunov_decrease,
            gradient_oracle,
            discretization_order,
        ],
    };
    checks
        .iter()
        .map(|check| {
            check().unwrap_or_else(|e| CriterionResult {
                id: "error",
                measured: f64::NAN,
                expected: "run completes".into(),
                tolerance: "-".into(),
                passed: false,
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn render_table(results: &[CriterionResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>14} {:>26} {:>14}  result", "criterion", "measured", "expected", "tolerance");
    for r in results {
        let _ = writeln!(
            out,
            "{:<24} {:>14.6e} {:>26} {:>14}  {}",
            r.id,
            r.measured,
            r.expected,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
        if !r.detail.is_empty() {
            let _ = writeln!(out, "    {}", r.detail);
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(out, "{passed}/{} passed", results.len());
    out
}

fn pure_integrator(n: f64, s0: f64, t_end: f64) -> RunConfig {
    let mut cfg = RunConfig::for_scenario(ScenarioKind::PureIntegrator, n);
    cfg.scenario.initial_state = vec![s0];
    cfg.integrator = IntegratorConfig::rk4(STEP, t_end);
    cfg.eps_band = Some(EPS_BAND);
    cfg
}

/// Double integrator from `(1, 1)` (so `s0 = 2`) under the matched disturbance `d`.
pub fn disturbance_config(d: DisturbanceSignal<f64>, d_m: f64) -> RunConfig {
    let mut cfg = RunConfig::for_scenario(ScenarioKind::DoubleIntegrator, DISTURBANCE_GAIN);
    cfg.controller.d_m = d_m;
    cfg.disturbance = d;
    cfg.integrator = IntegratorConfig::rk4(STEP, 10.0);
    cfg.eps_band = Some(EPS_BAND);
    cfg
}

/// Double integrator with `w = 0.5 sin(2t)` on the first state.
pub fn unmatched_config(w_uim: f64) -> RunConfig {
    let mut cfg = disturbance_config(DisturbanceSignal::zero(), 0.0);
    cfg.unmatched = DisturbanceSignal::sinusoid(0.5, 2.0);
    cfg.controller.w_uim = w_uim;
    cfg
}

/// Largest `|s|` once the loop is sliding: the chattering amplitude when the
/// surface was reached, otherwise everything after the predicted reach time.
pub fn post_reach_band(traj: &Trajectory<f64>, eps_band: f64) -> Result<f64> {
    let reach = measure_reaching_time(traj, eps_band)?;
    match chattering_metrics(traj, &reach) {
        Ok(c) => Ok(c.band_amplitude),
        Err(SmcError::NotReached) => Ok(traj.max_abs_s_after(reach.t_r_predicted)),
        Err(e) => Err(e),
    }
}

fn run_ok(cfg: &RunConfig) -> Result<RunOutcome> {
    let out = execute(cfg)?;
    match &out.report.error {
        Some(e) => Err(SmcError::Numerics(format!("simulation failed: {}", e.message))),
        None => Ok(out),
    }
}

fn reach_time() -> Result<CriterionResult> {
    let out = run_ok(&pure_integrator(1.0, 2.0, 3.0))?;
    let t = out.report.reach.and_then(|r| r.t_reach_measured).unwrap_or(f64::NAN);
    Ok(CriterionResult {
        id: "reach-time",
        measured: t,
        expected: "[1.997, 2.003]".into(),
        tolerance: "3e-3".into(),
        passed: (1.997..=2.003).contains(&t),
        detail: String::new(),
    })
}

fn reach_time_sweep() -> Result<CriterionResult> {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for n in [0.5, 1.0, 2.0, 4.0] {
        let out = run_ok(&pure_integrator(n, 2.0, 10.0))?;
        let t = out.report.reach.and_then(|r| r.t_reach_measured).unwrap_or(f64::NAN);
        let err = (t - 2.0 / n).abs();
        worst = if err.is_nan() { f64::NAN } else { worst.max(err) };
        detail.push(format!("n={n}: {t:.6}"));
    }
    Ok(CriterionResult {
        id: "reach-time-sweep",
        measured: worst,
        expected: "|t - 2/n| for n=.5,1,2,4".into(),
        tolerance: "<= 2e-3".into(),
        passed: worst <= 2e-3,
        detail: detail.join(", "),
    })
}

fn closed_form() -> Result<CriterionResult> {
    let integ = IntegratorConfig::rk4(STEP, 3.0);
    let a = compare_closed_form(&simulate_reaching_law(1.0, 2.0, &integ).map_err(|e| e.cause)?, 1.0, 2.0)?;
    let b = compare_closed_form(&simulate_reaching_law(2.0, -3.0, &integ).map_err(|e| e.cause)?, 2.0, -3.0)?;
    let z = compare_closed_form(&simulate_reaching_law(1.0, 0.0, &integ).map_err(|e| e.cause)?, 1.0, 0.0)?;
    Ok(CriterionResult {
        id: "closed-form",
        measured: a.max(b),
        expected: "max |s - s_closed|".into(),
        tolerance: "<= 1e-3".into(),
        passed: a <= 1e-3 && b <= 1e-3 && z <= STEP * 1.0,
        detail: format!("(1,2): {a:.3e}, (2,-3): {b:.3e}, s0=0: {z:.3e} (<= {STEP:e})"),
    })
}

fn reaching_condition() -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let d_m = 1.0;
    let w_bound = 0.5;
    let mut worst_disturbed = f64::NEG_INFINITY;
    let mut worst_nominal = 0.0f64;
    for kind in ScenarioKind::ALL {
        let unmatched =
            if kind.supports_unmatched() { DisturbanceSignal::constant(w_bound) } else { DisturbanceSignal::zero() };
        let mut cfg = RunConfig::for_scenario(kind, 1.0);
        cfg.unmatched = unmatched;
        let (model, surface) = build_plant(&cfg)?;
        let w_um = model.unmatched_bound().to_vec();
        let nominal = ControllerConfig::new(1.0);
        let mut checked = 0;
        while checked < RANDOM_STATES {
            let x: Vec<f64> = (0..kind.dimension()).map(|_| rng.gen_range(-10.0..=10.0)).collect();
            if surface.value(&x)? == 0.0 {
                continue;
            }
            let t = rng.gen_range(0.0..=10.0);
            let grad = surface.gradient(&x)?;
            let w_uim = implied_w_uim(&grad, &model.input_vector(&x)?, &w_um)?;
            let bounded = nominal.clone().with_bounds(d_m, w_uim);
            let d = rng.gen_range(-d_m..=d_m);
            let w: Vec<f64> = w_um.iter().map(|&b| if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 }).collect();
            let r = reaching_residual_with(&bounded, &model, &surface, &x, t, d, &w)?;
            worst_disturbed = worst_disturbed.max(r);
            let zero = vec![0.0; x.len()];
            let r0 = reaching_residual_with(&nominal, &model, &surface, &x, t, 0.0, &zero)?;
            worst_nominal = worst_nominal.max(r0.abs());
            checked += 1;
        }
    }
    Ok(CriterionResult {
        id: "reaching-condition",
        measured: worst_disturbed,
        expected: "max s*s' + n|s|".into(),
        tolerance: "<= 1e-9".into(),
        passed: worst_disturbed <= 1e-9 && worst_nominal <= 1e-12,
        detail: format!("nominal max |residual| = {worst_nominal:.3e} (<= 1e-12)"),
    })
}

fn matched_invariance() -> Result<CriterionResult> {
    let out = run_ok(&disturbance_config(DisturbanceSignal::sinusoid(0.8, 5.0), 1.0))?;
    let band = post_reach_band(&out.trajectory, EPS_BAND)?;
    let ok = out.report.reaching_bound_verified;
    Ok(CriterionResult {
        id: "matched-invariance",
        measured: band,
        expected: "bound ok, band".into(),
        tolerance: "<= 1e-3".into(),
        passed: ok && band <= 1e-3,
        detail: format!("reaching bound satisfied: {ok}"),
    })
}

fn bound_necessity() -> Result<CriterionResult> {
    let cfg = disturbance_config(DisturbanceSignal::constant(1.5), 1.0);
    let out = execute(&cfg)?;
    let reach = measure_reaching_time(&out.trajectory, EPS_BAND)?;
    let excursion = out.trajectory.max_abs_s_after(reach.t_r_predicted);
    let nominal = chattering_band(STEP, &cfg.controller, 1.0, 1.5);
    let bound_ok = out.report.reaching_bound_verified;
    Ok(CriterionResult {
        id: "bound-necessity",
        measured: excursion / nominal,
        expected: "|s| / band".into(),
        tolerance: "> 10".into(),
        passed: excursion > 10.0 * nominal && !bound_ok,
        detail: format!("max |s| after t_r = {excursion:.4}, reaching bound satisfied: {bound_ok}"),
    })
}

fn unmatched_compensation() -> Result<CriterionResult> {
    let with = run_ok(&unmatched_config(0.5))?;
    let without = execute(&unmatched_config(0.0))?;
    let band_with = post_reach_band(&with.trajectory, EPS_BAND)?;
    let band_without = post_reach_band(&without.trajectory, EPS_BAND)?;
    Ok(CriterionResult {
        id: "unmatched-compensation",
        measured: band_with,
        expected: "band with w_uim = 0.5".into(),
        tolerance: "<= 1e-3".into(),
        passed: band_with <= 1e-3 && band_without >= 5.0 * 1e-3,
        detail: format!("band with w_uim = 0: {band_without:.4e} (>= 5e-3)"),
    })
}

fn lyapunov_decrease() -> Result<CriterionResult> {
    let mut total = 0;
    let mut detail = Vec::new();
    let integ = IntegratorConfig::rk4(STEP, 3.0);
    for (n, s0) in [(1.0, 2.0), (2.0, -3.0)] {
        let traj = simulate_reaching_law(n, s0, &integ).map_err(|e| e.cause)?;
        let r = lyapunov_monotonicity(&traj, 10.0 * STEP * n * n)?;
        total += r.violations;
        detail.push(format!("law n={n}: {}", r.violations));
    }
    for (name, cfg) in [
        ("pure", pure_integrator(1.0, 2.0, 3.0)),
        ("matched", disturbance_config(DisturbanceSignal::sinusoid(0.8, 5.0), 1.0)),
        ("unmatched", unmatched_config(0.5)),
    ] {
        let out = run_ok(&cfg)?;
        let v = out.report.lyapunov.map_or(usize::MAX, |l| l.violations);
        total = total.saturating_add(v);
        detail.push(format!("{name}: {v}"));
    }
    Ok(CriterionResult {
        id: "lyapunov-decrease",
        measured: total as f64,
        expected: "violations".into(),
        tolerance: "== 0".into(),
        passed: total == 0,
        detail: detail.join(", "),
    })
}

fn gradient_oracle() -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ 1);
    let mut worst = 0.0f64;
    for kind in ScenarioKind::ALL {
        let (_, surface) = build_plant(&RunConfig::for_scenario(kind, 1.0))?;
        for _ in 0..RANDOM_STATES {
            let x: Vec<f64> = (0..kind.dimension()).map(|_| rng.gen_range(-10.0..=10.0)).collect();
            let err = gradient_rel_error(&surface.gradient(&x)?, &surface.gradient_fd(&x, FD_STEP)?);
            worst = worst.max(err);
        }
    }
    Ok(CriterionResult {
        id: "gradient-oracle",
        measured: worst,
        expected: "max relative error".into(),
        tolerance: "<= 1e-6".into(),
        passed: worst <= 1e-6,
        detail: String::new(),
    })
}

fn discretization_order() -> Result<CriterionResult> {
    let coarse = simulate_reaching_law(1.0, 2.0, &IntegratorConfig::euler(1e-3, 3.0)).map_err(|e| e.cause)?;
    let fine = simulate_reaching_law(1.0, 2.0, &IntegratorConfig::euler(5e-4, 3.0)).map_err(|e| e.cause)?;
    let dc = compare_closed_form(&coarse, 1.0, 2.0)?;
    let df = compare_closed_form(&fine, 1.0, 2.0)?;
    let ratio = dc / df;
    Ok(CriterionResult {
        id: "discretization-order",
        measured: ratio,
        expected: "dev(h) / dev(h/2)".into(),
        tolerance: ">= 1.8".into(),
        passed: ratio >= 1.8,
        detail: format!("h=1e-3: {dc:.3e}, h=5e-4: {df:.3e}"),
    })
}
