//! Fixed-step closed-loop integration with sign-crossing refinement.

use serde::{Deserialize, Serialize};

use crate::controller::{control, ControllerConfig};
use crate::dynamics::{sgn_unchecked, SlidingSurface, SystemModel};
use crate::error::{Result, SmcError};
use crate::scalar::{max_abs, Scalar};

/// Max-norm beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig<S> {
    pub method: Method,
    pub step: S,
    pub t_end: S,
    pub crossing_refine: bool,
    pub refine_iters: u32,
}

impl<S: Scalar> IntegratorConfig<S> {
    pub fn new(method: Method, step: S, t_end: S) -> Self {
        Self { method, step, t_end, crossing_refine: true, refine_iters: 50 }
    }

    pub fn rk4(step: S, t_end: S) -> Self {
        Self::new(Method::Rk4, step, t_end)
    }

    pub fn euler(step: S, t_end: S) -> Self {
        Self::new(Method::ExplicitEuler, step, t_end)
    }

    pub fn without_refinement(mut self) -> Self {
        self.crossing_refine = false;
        self
    }

    pub fn validate(&self, path: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.step > S::zero()) || !self.step.is_finite() {
            errs.push(format!("{path}.step: must be > 0, got {}", self.step));
        }
        if !(self.t_end > S::zero()) || !self.t_end.is_finite() {
            errs.push(format!("{path}.t_end: must be > 0, got {}", self.t_end));
        } else if self.step > self.t_end {
            errs.push(format!("{path}.step: must not exceed t_end ({} > {})", self.step, self.t_end));
        }
        if self.refine_iters == 0 {
            errs.push(format!("{path}.refine_iters: must be >= 1"));
        }
        errs
    }

    /// Number of full steps; the last grid point is `steps() * step <= t_end`.
    pub fn steps(&self) -> usize {
        let ratio = (self.t_end / self.step).as_f64();
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.floor() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample<S> {
    pub t: S,
    pub x: Vec<S>,
    pub s: S,
    pub u: S,
    /// Lyapunov value `s^2 / 4`.
    #[serde(rename = "V")]
    pub v: S,
    pub d: S,
    /// `|w_u|_inf` at the sample.
    pub w_norm: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub samples: Vec<TrajectorySample<S>>,
    pub model: String,
    pub surface: String,
    pub controller: ControllerConfig<S>,
    pub integrator: IntegratorConfig<S>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn max_abs_s_after(&self, t0: S) -> S {
        self.samples.iter().filter(|p| p.t >= t0).fold(S::zero(), |acc, p| acc.max(p.s.abs()))
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, Clone)]
pub struct SimulationError<S> {
    pub cause: SmcError,
    pub partial: Trajectory<S>,
}

impl<S: Scalar> std::fmt::Display for SimulationError<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} samples)", self.cause, self.partial.samples.len())
    }
}

impl<S: Scalar> std::error::Error for SimulationError<S> {}

pub fn lyapunov_of<S: Scalar>(s: S) -> S {
    S::lit(0.25) * s * s
}

struct ClosedLoop<'a, S> {
    model: &'a SystemModel<S>,
    surface: &'a SlidingSurface<S>,
    config: &'a ControllerConfig<S>,
}

impl<S: Scalar> ClosedLoop<'_, S> {
    fn rhs(&self, x: &[S], t: S) -> Result<Vec<S>> {
        let u = control(self.config, self.model, self.surface, x, t)?.u;
        self.model.plant_derivative(x, t, u)
    }

    fn advance(&self, method: Method, x: &[S], t: S, h: S) -> Result<Vec<S>> {
        match method {
            Method::ExplicitEuler => {
                let k = self.rhs(x, t)?;
                Ok(axpy(x, h, &k))
            }
            Method::Rk4 => {
                let half = h / S::lit(2.0);
                let k1 = self.rhs(x, t)?;
                let k2 = self.rhs(&axpy(x, half, &k1), t + half)?;
                let k3 = self.rhs(&axpy(x, half, &k2), t + half)?;
                let k4 = self.rhs(&axpy(x, h, &k3), t + h)?;
                let sixth = h / S::lit(6.0);
                let two = S::lit(2.0);
                Ok(x.iter()
                    .enumerate()
                    .map(|(i, &xi)| xi + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                    .collect())
            }
        }
    }

    fn sample(&self, x: Vec<S>, t: S) -> Result<TrajectorySample<S>> {
        let decision = control(self.config, self.model, self.surface, &x, t)?;
        let w = self.model.unmatched(&x, t)?;
        Ok(TrajectorySample {
            t,
            s: decision.s,
            u: decision.u,
            v: lyapunov_of(decision.s),
            d: self.model.matched_disturbance().value(t),
            w_norm: max_abs(&w),
            x,
        })
    }

    /// Bisects the sub-step length in `(0, h)` for the sign change of `s`.
    /// Returns the sub-step and state with the smallest `|s|` seen.
    #[allow(clippy::too_many_arguments)]
    fn locate_crossing(
        &self,
        method: Method,
        x: &[S],
        t: S,
        h: S,
        s_start: S,
        s_end: S,
        iters: u32,
    ) -> Result<(S, Vec<S>, S)> {
        let band = S::lit(16.0) * S::epsilon() * (S::one() + s_start.abs() + s_end.abs());
        let start_sign = sgn_unchecked(s_start);
        let (mut lo, mut hi) = (S::zero(), h);
        let mut best: Option<(S, Vec<S>, S)> = None;
        for _ in 0..iters {
            let mid = (lo + hi) / S::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let x_mid = self.advance(method, x, t, mid)?;
            let s_mid = self.surface.value(&x_mid)?;
            if best.as_ref().is_none_or(|b| s_mid.abs() < b.2.abs()) {
                best = Some((mid, x_mid, s_mid));
            }
            if s_mid.abs() <= band {
                break;
            }
            if sgn_unchecked(s_mid) == start_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best.ok_or_else(|| SmcError::Numerics("crossing refinement made no progress".into()))
    }
}

fn axpy<S: Scalar>(x: &[S], a: S, y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(&xi, &yi)| xi + a * yi).collect()
}

fn check_divergence<S: Scalar>(x: &[S], t: S) -> Result<()> {
    let norm = max_abs(x);
    if !crate::scalar::all_finite(x) || norm > S::lit(DIVERGENCE_LIMIT) {
        return Err(SmcError::Divergence { t: t.as_f64(), norm: norm.as_f64() });
    }
    Ok(())
}

/// Integrates the closed loop from `x0` at `t = 0`.
///
/// The control is re-evaluated at every integrator stage. When `s` changes
/// sign over a step and refinement is on, the crossing is bisected, the
/// refined point is recorded, and the remainder of the step is integrated
/// from it so later samples stay on the regular grid.
pub fn simulate<S: Scalar>(
    model: &SystemModel<S>,
    surface: &SlidingSurface<S>,
    config: &ControllerConfig<S>,
    integ: &IntegratorConfig<S>,
    x0: &[S],
) -> std::result::Result<Trajectory<S>, Box<SimulationError<S>>> {
    let mut traj = Trajectory {
        samples: Vec::with_capacity(integ.steps() + 1),
        model: model.label.clone(),
        surface: surface.description.clone(),
        controller: config.clone(),
        integrator: integ.clone(),
    };
    match run(model, surface, config, integ, x0, &mut traj) {
        Ok(()) => Ok(traj),
        Err(cause) => Err(Box::new(SimulationError { cause, partial: traj })),
    }
}

fn run<S: Scalar>(
    model: &SystemModel<S>,
    surface: &SlidingSurface<S>,
    config: &ControllerConfig<S>,
    integ: &IntegratorConfig<S>,
    x0: &[S],
    traj: &mut Trajectory<S>,
) -> Result<()> {
    let mut errs = integ.validate("integrator");
    errs.extend(config.validate("controller"));
    if !errs.is_empty() {
        return Err(SmcError::Parameter(errs.join("; ")));
    }
    if x0.len() != model.dimension() {
        return Err(SmcError::Dimension { expected: model.dimension(), got: x0.len() });
    }
    check_divergence(x0, S::zero())?;

    let sys = ClosedLoop { model, surface, config };
    let h = integ.step;
    let first = sys.sample(x0.to_vec(), S::zero())?;
    let mut s_cur = first.s;
    let mut x_cur = first.x.clone();
    traj.samples.push(first);

    for k in 0..integ.steps() {
        let t_k = S::from_usize(k).unwrap() * h;
        let t_next = S::from_usize(k + 1).unwrap() * h;
        let dt = t_next - t_k;
        let mut x_next = sys.advance(integ.method, &x_cur, t_k, dt)?;
        check_divergence(&x_next, t_next)?;
        let s_next = surface.value(&x_next)?;

        if integ.crossing_refine && sgn_unchecked(s_cur) * sgn_unchecked(s_next) < 0 {
            let (tau, x_star, _) =
                sys.locate_crossing(integ.method, &x_cur, t_k, dt, s_cur, s_next, integ.refine_iters)?;
            let t_star = t_k + tau;
            if t_star > t_k && t_star < t_next {
                check_divergence(&x_star, t_star)?;
                let refined = sys.sample(x_star, t_star)?;
                x_next = sys.advance(integ.method, &refined.x, t_star, t_next - t_star)?;
                check_divergence(&x_next, t_next)?;
                traj.samples.push(refined);
            }
        }

        let sample = sys.sample(x_next, t_next)?;
        s_cur = sample.s;
        x_cur = sample.x.clone();
        traj.samples.push(sample);
    }
    Ok(())
}

/// Integrates the bare reaching law `s' = -n sgn(s)` as a one-state loop
/// (`x' = u`, `s = x`).
pub fn simulate_reaching_law<S: Scalar>(
    n: S,
    s0: S,
    integ: &IntegratorConfig<S>,
) -> std::result::Result<Trajectory<S>, Box<SimulationError<S>>> {
    let model = SystemModel::new(1, |_: &[S], _| vec![S::zero()], |_: &[S]| vec![S::one()])
        .expect("static model")
        .with_label("reaching-law");
    let surface = SlidingSurface::linear(vec![S::one()]).expect("static surface");
    simulate(&model, &surface, &ControllerConfig::new(n), integ, &[s0])
}
