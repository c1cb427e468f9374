//! Verification quantities extracted from trajectories.

use serde::{Deserialize, Serialize};

use crate::controller::{closed_form_s, reaching_time_predicted, ControllerConfig};
use crate::dynamics::sgn_unchecked;
use crate::error::{Result, SmcError};
use crate::scalar::Scalar;
use crate::simulator::Trajectory;

/// Consecutive in-band samples required before the surface counts as reached.
pub const PERSISTENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachReport<S> {
    pub t_reach_measured: Option<S>,
    pub eps_band: S,
    pub t_r_predicted: S,
    /// `t_reach_measured <= t_r_predicted + step`; `None` when never reached.
    pub bound_satisfied: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatterReport<S> {
    pub band_amplitude: S,
    pub switch_count: usize,
    pub mean_switch_freq: S,
}

/// Slack in the reaching condition at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport<S> {
    /// `-(s s' + n |s|)`; nonnegative where the reaching condition holds.
    pub m: S,
    /// `m / (|s| |B|)`; `None` on the surface or for a vanishing gain.
    pub rate: Option<S>,
}

impl<S: Scalar> MarginReport<S> {
    pub fn from_residual(residual: S, s: S, big_b: S) -> Self {
        let m = -residual;
        let scale = s.abs() * big_b.abs();
        let rate = if scale > S::zero() { Some(m / scale) } else { None };
        Self { m, rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport<S> {
    pub violations: usize,
    pub worst_excess: S,
    pub pairs_checked: usize,
}

/// Discrete chattering band `2 h (n + (d_m + w_uim + sup|d|) |B|_max)`.
pub fn chattering_band<S: Scalar>(step: S, config: &ControllerConfig<S>, b_max: S, sup_d: S) -> S {
    S::lit(2.0) * step * (config.n + (config.d_m + config.w_uim + sup_d) * b_max)
}

/// `max(1e-3, 4 h sup|s'|)`.
pub fn default_eps_band<S: Scalar>(step: S, sdot_sup: S) -> S {
    S::lit(1e-3).max(S::lit(4.0) * step * sdot_sup)
}

fn reach_index<S: Scalar>(traj: &Trajectory<S>, eps_band: S) -> Option<usize> {
    let inside: Vec<bool> = traj.samples.iter().map(|p| p.s.abs() <= eps_band).collect();
    let mut run_start = None;
    for (i, &ok) in inside.iter().enumerate() {
        match (ok, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(_)) => run_start = None,
            _ => {}
        }
        if let Some(start) = run_start {
            if i + 1 - start >= PERSISTENCE {
                return Some(start);
            }
        }
    }
    // A run that lasts to the end of the record also counts.
    run_start
}

/// First entry into `|s| <= eps_band` that persists for [`PERSISTENCE`]
/// samples (or until the end of the record).
pub fn measure_reaching_time<S: Scalar>(traj: &Trajectory<S>, eps_band: S) -> Result<ReachReport<S>> {
    if !(eps_band > S::zero()) {
        return Err(SmcError::Parameter(format!("eps_band must be > 0, got {eps_band}")));
    }
    let first = traj.samples.first().ok_or_else(|| SmcError::Data("empty trajectory".into()))?;
    let t_r_predicted = reaching_time_predicted(traj.controller.n, first.s)?;
    let t_reach_measured = reach_index(traj, eps_band).map(|i| traj.samples[i].t);
    let bound_satisfied = t_reach_measured.map(|t| t <= t_r_predicted + traj.integrator.step);
    Ok(ReachReport { t_reach_measured, eps_band, t_r_predicted, bound_satisfied })
}

/// Index from which the loop is considered to be sliding: the first sample
/// at or after the reach time where `|s|` stops strictly decreasing.
fn sliding_start<S: Scalar>(traj: &Trajectory<S>, reach_idx: usize) -> usize {
    let s = &traj.samples;
    (reach_idx..s.len()).find(|&k| k + 1 >= s.len() || s[k + 1].s.abs() >= s[k].s.abs()).unwrap_or(reach_idx)
}

/// Oscillation of `s` about zero once the surface is reached.
///
/// Amplitude is measured from the point where `|s|` stops shrinking, so the
/// tail of the approach inside `eps_band` is not mistaken for chattering.
pub fn chattering_metrics<S: Scalar>(traj: &Trajectory<S>, reach: &ReachReport<S>) -> Result<ChatterReport<S>> {
    let t_reach = reach.t_reach_measured.ok_or(SmcError::NotReached)?;
    let reach_idx = traj
        .samples
        .iter()
        .position(|p| p.t >= t_reach)
        .ok_or_else(|| SmcError::Data("reach time lies beyond the trajectory".into()))?;
    let start = sliding_start(traj, reach_idx);

    let band_amplitude = traj.samples[start..].iter().fold(S::zero(), |acc, p| acc.max(p.s.abs()));

    let mut switch_count = 0;
    let mut last_sign = 0i8;
    for p in &traj.samples[reach_idx..] {
        let sg = sgn_unchecked(p.s);
        if sg != 0 {
            if last_sign != 0 && sg != last_sign {
                switch_count += 1;
            }
            last_sign = sg;
        }
    }
    let elapsed = traj.samples.last().map_or(S::zero(), |p| p.t) - t_reach;
    let mean_switch_freq = if elapsed > S::zero() { S::from_usize(switch_count).unwrap() / elapsed } else { S::zero() };
    Ok(ChatterReport { band_amplitude, switch_count, mean_switch_freq })
}

/// Checks `t_reach <= |s(0)| / n + 2 h`. Returns `false` when never reached.
pub fn verify_reaching_bound<S: Scalar>(
    traj: &Trajectory<S>,
    config: &ControllerConfig<S>,
    eps_band: S,
) -> Result<(bool, ReachReport<S>)> {
    let mut report = measure_reaching_time(traj, eps_band)?;
    report.t_r_predicted = reaching_time_predicted(config.n, traj.samples[0].s)?;
    let ok = report.t_reach_measured.is_some_and(|t| t <= report.t_r_predicted + S::lit(2.0) * traj.integrator.step);
    Ok((ok, report))
}

/// Counts consecutive sample pairs in the reaching phase where `V` rises by
/// more than `tol_v`. The reaching phase ends at the first sample where `s`
/// touches zero or changes sign.
pub fn lyapunov_monotonicity<S: Scalar>(traj: &Trajectory<S>, tol_v: S) -> Result<MonotonicityReport<S>> {
    if !(tol_v > S::zero()) {
        return Err(SmcError::Parameter(format!("tol_V must be > 0, got {tol_v}")));
    }
    let samples = &traj.samples;
    let Some(first) = samples.first() else {
        return Ok(MonotonicityReport { violations: 0, worst_excess: S::zero(), pairs_checked: 0 });
    };
    let initial_sign = sgn_unchecked(first.s);
    let end = if initial_sign == 0 {
        0
    } else {
        samples.iter().position(|p| sgn_unchecked(p.s) != initial_sign).unwrap_or(samples.len())
    };

    let mut report = MonotonicityReport { violations: 0, worst_excess: S::zero(), pairs_checked: 0 };
    for w in samples[..end].windows(2) {
        report.pairs_checked += 1;
        let excess = w[1].v - w[0].v - tol_v;
        if excess > S::zero() {
            report.violations += 1;
            report.worst_excess = report.worst_excess.max(excess);
        }
    }
    Ok(report)
}

/// Largest deviation of the recorded `s` from the straight-line solution.
pub fn compare_closed_form<S: Scalar>(traj: &Trajectory<S>, n: S, s0: S) -> Result<S> {
    traj.samples.iter().try_fold(S::zero(), |acc, p| Ok(acc.max((p.s - closed_form_s(n, s0, p.t)?).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{lyapunov_of, simulate_reaching_law, IntegratorConfig, TrajectorySample};

    fn manufactured(s: &[f64], step: f64, n: f64) -> Trajectory<f64> {
        Trajectory {
            samples: s
                .iter()
                .enumerate()
                .map(|(k, &s)| TrajectorySample {
                    t: k as f64 * step,
                    x: vec![s],
                    s,
                    u: 0.0,
                    v: lyapunov_of(s),
                    d: 0.0,
                    w_norm: 0.0,
                })
                .collect(),
            model: "manual".into(),
            surface: "s = x1".into(),
            controller: ControllerConfig::new(n),
            integrator: IntegratorConfig::rk4(step, step * s.len().max(1) as f64),
        }
    }

    #[test]
    fn reach_time_of_pure_integrator() {
        let traj = simulate_reaching_law(1.0f64, 2.0, &IntegratorConfig::rk4(1e-4, 3.0)).unwrap();
        let r = measure_reaching_time(&traj, 1e-3).unwrap();
        let t = r.t_reach_measured.unwrap();
        assert!((t - 2.0).abs() <= 2e-3, "t_reach {t}");
        assert_eq!(r.t_r_predicted, 2.0);
        assert_eq!(r.bound_satisfied, Some(true));
    }

    #[test]
    fn reach_time_when_starting_inside() {
        let traj = manufactured(&[1e-4; 20], 0.1, 1.0);
        assert_eq!(measure_reaching_time(&traj, 1e-3).unwrap().t_reach_measured, Some(0.0));
    }

    #[test]
    fn transversal_crossing_is_not_reach() {
        let mut s: Vec<f64> = vec![1.0, 0.5, 0.0005, -0.5, -1.0];
        s.extend(std::iter::repeat_n(-1.0, 20));
        let r = measure_reaching_time(&manufactured(&s, 0.1, 1.0), 1e-3).unwrap();
        assert_eq!(r.t_reach_measured, None);
        assert_eq!(r.bound_satisfied, None);
    }

    #[test]
    fn empty_trajectory_is_data_error() {
        let traj = manufactured(&[], 0.1, 1.0);
        assert!(matches!(measure_reaching_time(&traj, 1e-3), Err(SmcError::Data(_))));
        assert!(matches!(measure_reaching_time(&manufactured(&[1.0], 0.1, 1.0), 0.0), Err(SmcError::Parameter(_))));
    }

    #[test]
    fn chattering_requires_reach() {
        let traj = manufactured(&[1.0; 5], 0.1, 1.0);
        let r = measure_reaching_time(&traj, 1e-3).unwrap();
        assert_eq!(chattering_metrics(&traj, &r), Err(SmcError::NotReached));
    }

    #[test]
    fn chattering_counts_switches() {
        let mut s = vec![0.5, 0.2, 0.01];
        s.extend([1e-4, -1e-4].iter().cycle().take(20));
        let traj = manufactured(&s, 0.1, 1.0);
        let r = measure_reaching_time(&traj, 1e-3).unwrap();
        assert!((r.t_reach_measured.unwrap() - 0.3).abs() < 1e-12);
        let c = chattering_metrics(&traj, &r).unwrap();
        assert_eq!(c.switch_count, 19);
        assert_eq!(c.band_amplitude, 1e-4);
        assert!(c.mean_switch_freq > 0.0);
    }

    #[test]
    fn lyapunov_detector() {
        let traj = manufactured(&[0.1, 0.2, 0.4, 0.8], 0.1, 1.0);
        let r = lyapunov_monotonicity(&traj, 1e-6).unwrap();
        assert_eq!(r.violations, 3);
        assert!(r.worst_excess > 0.0);

        let traj = manufactured(&[0.0; 10], 0.1, 1.0);
        assert_eq!(lyapunov_monotonicity(&traj, 1e-6).unwrap().violations, 0);

        assert!(lyapunov_monotonicity(&traj, 0.0).is_err());
    }

    #[test]
    fn nominal_run_has_monotone_v() {
        let h = 1e-4;
        let traj = simulate_reaching_law(1.0f64, 2.0, &IntegratorConfig::rk4(h, 3.0)).unwrap();
        let r = lyapunov_monotonicity(&traj, 10.0 * h * 1.0).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.pairs_checked > 19_000);
    }

    #[test]
    fn closed_form_deviation() {
        let traj = simulate_reaching_law(1.0f64, 2.0, &IntegratorConfig::rk4(1e-4, 3.0)).unwrap();
        assert!(compare_closed_form(&traj, 1.0, 2.0).unwrap() <= 1e-3);
        let traj = simulate_reaching_law(1.0, 0.0, &IntegratorConfig::rk4(1e-4, 1.0)).unwrap();
        assert!(compare_closed_form(&traj, 1.0, 0.0).unwrap() <= 1e-4);
    }

    #[test]
    fn reaching_bound_verification() {
        let traj = simulate_reaching_law(1.0f64, 2.0, &IntegratorConfig::rk4(1e-4, 3.0)).unwrap();
        let (ok, _) = verify_reaching_bound(&traj, &ControllerConfig::new(1.0), 1e-3).unwrap();
        assert!(ok);
        // Claiming a faster gain than was used fails the bound.
        let (ok, r) = verify_reaching_bound(&traj, &ControllerConfig::new(2.0), 1e-3).unwrap();
        assert!(!ok);
        assert_eq!(r.t_r_predicted, 1.0);
    }

    #[test]
    fn margin_rate_guard() {
        assert_eq!(MarginReport::from_residual(0.0, 0.0, 1.0).rate, None);
        assert_eq!(MarginReport::from_residual(-2.0, 2.0, 1.0), MarginReport { m: 2.0, rate: Some(1.0) });
    }

    #[test]
    fn band_helpers() {
        let cfg = ControllerConfig::new(1.0).with_bounds(1.0, 0.0);
        assert!((chattering_band(1e-4f64, &cfg, 1.0, 0.8) - 2e-4 * 2.8).abs() < 1e-18);
        assert_eq!(default_eps_band(1e-4, 1.0), 1e-3);
        assert!((default_eps_band(1e-3f64, 2.0) - 8e-3).abs() < 1e-15);
    }
}
