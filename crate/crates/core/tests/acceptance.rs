//! Acceptance criteria for the reaching law, disturbance handling, Lyapunov
//! decrease, surface gradients and discretization order.
//!
//! Run with `cargo test -p smc-core --test acceptance -- --nocapture` to see
//! one PASS/FAIL line per criterion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smc_core::analysis::{chattering_metrics, measure_reaching_time};
use smc_core::controller::{implied_w_uim, reaching_residual_with};
use smc_core::dynamics::{gradient_rel_error, FD_STEP};
use smc_core::runner::build_plant;
use smc_core::{
    compare_closed_form, execute, lyapunov_monotonicity, simulate_reaching_law, ControllerConfig, DisturbanceSignal,
    IntegratorConfig, RunConfig, RunOutcome, ScenarioKind, Trajectory,
};

const STEP: f64 = 1e-4;
const EPS_BAND: f64 = 1e-3;
// Gain for the double-integrator disturbance runs; below the 0.5 excess of the
// undersized-bound case.
const N_DIST: f64 = 0.4;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { name, passed, detail }
}

fn pure(n: f64, s0: f64, t_end: f64) -> RunConfig {
    let mut cfg = RunConfig::for_scenario(ScenarioKind::PureIntegrator, n);
    cfg.scenario.initial_state = vec![s0];
    cfg.integrator = IntegratorConfig::rk4(STEP, t_end);
    cfg.eps_band = Some(EPS_BAND);
    cfg
}

fn double(d: DisturbanceSignal<f64>, d_m: f64) -> RunConfig {
    let mut cfg = RunConfig::for_scenario(ScenarioKind::DoubleIntegrator, N_DIST);
    cfg.scenario.initial_state = vec![1.0, 1.0];
    cfg.controller.d_m = d_m;
    cfg.disturbance = d;
    cfg.integrator = IntegratorConfig::rk4(STEP, 10.0);
    cfg.eps_band = Some(EPS_BAND);
    cfg
}

fn unmatched(w_uim: f64) -> RunConfig {
    let mut cfg = double(DisturbanceSignal::zero(), 0.0);
    cfg.unmatched = DisturbanceSignal::sinusoid(0.5, 2.0);
    cfg.controller.w_uim = w_uim;
    cfg
}

fn run(cfg: &RunConfig) -> RunOutcome {
    execute(cfg).expect("run executes")
}

fn t_reach(out: &RunOutcome) -> f64 {
    out.report.reach.as_ref().and_then(|r| r.t_reach_measured).unwrap_or(f64::NAN)
}

/// Chattering amplitude once sliding, or the largest `|s|` after the predicted
/// reach time when the band was never entered.
fn band(traj: &Trajectory<f64>) -> f64 {
    let reach = measure_reaching_time(traj, EPS_BAND).unwrap();
    match chattering_metrics(traj, &reach) {
        Ok(c) => c.band_amplitude,
        Err(_) => traj.max_abs_s_after(reach.t_r_predicted),
    }
}

fn reaching_time() -> Outcome {
    let t = t_reach(&run(&pure(1.0, 2.0, 3.0)));
    let mut passed = (1.997..=2.003).contains(&t);
    let mut detail = format!("t_reach {t:.6} in [1.997, 2.003]; sweep");
    for n in [0.5, 1.0, 2.0, 4.0] {
        let tn = t_reach(&run(&pure(n, 2.0, 6.0)));
        passed &= (tn - 2.0 / n).abs() <= 2e-3;
        detail += &format!(" n={n}:{tn:.4}");
    }
    outcome("reaching time", passed, detail)
}

fn closed_form_equivalence() -> Outcome {
    let integ = IntegratorConfig::rk4(STEP, 3.0);
    let dev = |n: f64, s0: f64| compare_closed_form(&simulate_reaching_law(n, s0, &integ).unwrap(), n, s0).unwrap();
    let (a, b) = (dev(1.0, 2.0), dev(2.0, -3.0));
    let zero = simulate_reaching_law(1.0, 0.0, &integ).unwrap().samples.iter().map(|p| p.s.abs()).fold(0.0, f64::max);
    outcome(
        "closed-form equivalence",
        a <= 1e-3 && b <= 1e-3 && zero <= STEP,
        format!("max dev {a:.2e}, {b:.2e} <= 1e-3; s0=0 max |s| {zero:.1e} <= {STEP:e}"),
    )
}

fn reaching_condition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (d_m, w_bound) = (1.0, 0.5);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_nominal = 0.0f64;
    for kind in [ScenarioKind::PureIntegrator, ScenarioKind::DoubleIntegrator, ScenarioKind::Pendulum] {
        let mut cfg = RunConfig::for_scenario(kind, 1.0);
        if kind.supports_unmatched() {
            cfg.unmatched = DisturbanceSignal::constant(w_bound);
        }
        let (model, surface) = build_plant(&cfg).unwrap();
        let w_um = model.unmatched_bound().to_vec();
        let nominal = ControllerConfig::new(1.0);
        let mut checked = 0;
        while checked < 1000 {
            let x: Vec<f64> = (0..kind.dimension()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            if surface.value(&x).unwrap() == 0.0 {
                continue;
            }
            let t = rng.gen_range(0.0..10.0);
            let w_uim = implied_w_uim(&surface.gradient(&x).unwrap(), &model.input_vector(&x).unwrap(), &w_um).unwrap();
            let bounded = nominal.clone().with_bounds(d_m, w_uim);
            let d = rng.gen_range(-d_m..=d_m);
            let w: Vec<f64> = w_um.iter().map(|&b| if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 }).collect();
            worst = worst.max(reaching_residual_with(&bounded, &model, &surface, &x, t, d, &w).unwrap());
            let r0 = reaching_residual_with(&nominal, &model, &surface, &x, t, 0.0, &vec![0.0; x.len()]).unwrap();
            worst_nominal = worst_nominal.max(r0.abs());
            checked += 1;
        }
    }
    outcome(
        "reaching condition",
        worst <= 1e-9 && worst_nominal <= 1e-12,
        format!("max residual {worst:.3e} <= 1e-9; nominal max |residual| {worst_nominal:.2e} <= 1e-12"),
    )
}

fn matched_invariance() -> Outcome {
    let out = run(&double(DisturbanceSignal::sinusoid(0.8, 5.0), 1.0));
    let b = band(&out.trajectory);
    let bound = out.report.reach.as_ref().and_then(|r| r.bound_satisfied) == Some(true);
    outcome(
        "matched disturbance invariance",
        out.report.error.is_none() && bound && b <= 1e-3,
        format!("bound_satisfied {bound}; band {b:.3e} <= 1e-3"),
    )
}

fn bound_necessity() -> Outcome {
    let out = run(&double(DisturbanceSignal::constant(1.5), 1.0));
    let reach = measure_reaching_time(&out.trajectory, EPS_BAND).unwrap();
    let excursion = out.trajectory.max_abs_s_after(reach.t_r_predicted);
    let nominal_band = out.report.chattering_band;
    let bound = reach.bound_satisfied == Some(true);
    outcome(
        "undersized bound loses sliding",
        excursion > 10.0 * nominal_band && !bound,
        format!("max |s| after t_r {excursion:.3} > 10 x {nominal_band:.2e}; bound_satisfied {bound}"),
    )
}

fn unmatched_compensation() -> Outcome {
    let with = run(&unmatched(0.5));
    let without = run(&unmatched(0.0));
    let (bw, bo) = (band(&with.trajectory), band(&without.trajectory));
    outcome(
        "unmatched compensation",
        with.report.error.is_none() && bw <= 1e-3 && bo >= 5.0 * 1e-3,
        format!("band {bw:.3e} <= 1e-3; uncompensated {bo:.3e} >= 5e-3"),
    )
}

fn lyapunov_decrease() -> Outcome {
    let mut violations = 0;
    let mut detail = Vec::new();
    let integ = IntegratorConfig::rk4(STEP, 3.0);
    for (n, s0) in [(1.0, 2.0), (2.0, -3.0)] {
        let traj = simulate_reaching_law(n, s0, &integ).unwrap();
        let v = lyapunov_monotonicity(&traj, 10.0 * STEP * n * n).unwrap().violations;
        violations += v;
        detail.push(format!("law({n},{s0}):{v}"));
    }
    let mut runs: Vec<(String, RunConfig)> =
        [0.5, 1.0, 2.0, 4.0].iter().map(|&n| (format!("pure n={n}"), pure(n, 2.0, 6.0))).collect();
    runs.push(("matched".into(), double(DisturbanceSignal::sinusoid(0.8, 5.0), 1.0)));
    runs.push(("unmatched".into(), unmatched(0.5)));
    for (name, cfg) in runs {
        let out = run(&cfg);
        // The report's check uses tol_V = 10 * step * sup|s'|^2.
        let v = out.report.lyapunov.map_or(usize::MAX, |l| l.violations);
        violations = violations.saturating_add(v);
        detail.push(format!("{name}:{v}"));
    }
    outcome("lyapunov decrease", violations == 0, format!("violations {violations} == 0 ({})", detail.join(" ")))
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for kind in [ScenarioKind::PureIntegrator, ScenarioKind::DoubleIntegrator, ScenarioKind::Pendulum] {
        let (_, surface) = build_plant(&RunConfig::for_scenario(kind, 1.0)).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..kind.dimension()).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let err = gradient_rel_error(&surface.gradient(&x).unwrap(), &surface.gradient_fd(&x, FD_STEP).unwrap());
            worst = worst.max(err);
        }
    }
    outcome("surface gradient oracle", worst <= 1e-6, format!("max relative error {worst:.2e} <= 1e-6"))
}

fn discretization_order() -> Outcome {
    let dev = |h: f64| {
        let traj = simulate_reaching_law(1.0, 2.0, &IntegratorConfig::euler(h, 3.0)).unwrap();
        compare_closed_form(&traj, 1.0, 2.0).unwrap()
    };
    let (coarse, fine) = (dev(1e-3), dev(5e-4));
    let ratio = coarse / fine;
    outcome(
        "euler discretization order",
        ratio >= 1.8,
        format!("dev(1e-3)/dev(5e-4) = {coarse:.3e}/{fine:.3e} = {ratio:.3} >= 1.8"),
    )
}

#[test]
fn acceptance() {
    let checks: [fn() -> Outcome; 9] = [
        reaching_time,
        closed_form_equivalence,
        reaching_condition,
        matched_invariance,
        bound_necessity,
        unmatched_compensation,
        lyapunov_decrease,
        gradient_oracle,
        discretization_order,
    ];
    let results: Vec<Outcome> = checks.iter().map(|c| c()).collect();
    println!();
    for r in &results {
        println!("{} {:<32} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
