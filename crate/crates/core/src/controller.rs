//! Classic sliding mode control law.
//!
//! With `B = ds/dx . b`, `F = ds/dx . f` the law is
//!
//! ```text
//! u = -F / B - [ n / B + (d_m + w_uim) sgn(B) ] sgn(s)
//! ```
//!
//! which enforces `s s' <= -n |s|` whenever `|d| <= d_m` and
//! `|(ds/dx . b)^-1 (ds/dx . w_u)| <= w_uim`. In the nominal case the closed
//! loop obeys the reaching law `s' = -n sgn(s)` exactly, so `s` travels in a
//! straight line to zero and arrives at `t_r = |s(0)| / n`.

use serde::{Deserialize, Serialize};

use crate::analysis::MarginReport;
use crate::dynamics::{sgn_scalar, SlidingSurface, SystemModel};
use crate::error::{Result, SmcError};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_SING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig<S> {
    /// Reaching gain, `n > 0`.
    pub n: S,
    /// Bound estimate on the matched disturbance `|d|`.
    pub d_m: S,
    /// Bound estimate on `|(ds/dx . b)^-1 (ds/dx . w_u)|`.
    pub w_uim: S,
    /// Smallest admissible `|ds/dx . b|`.
    pub sing_tol: S,
    /// Half-width of the saturated surrogate for `sgn`; 0 selects pure `sgn`.
    pub boundary_layer: S,
}

impl<S: Scalar> ControllerConfig<S> {
    pub fn new(n: S) -> Self {
        Self { n, d_m: S::zero(), w_uim: S::zero(), sing_tol: S::lit(DEFAULT_SING_TOL), boundary_layer: S::zero() }
    }

    pub fn with_bounds(mut self, d_m: S, w_uim: S) -> Self {
        self.d_m = d_m;
        self.w_uim = w_uim;
        self
    }

    pub fn with_boundary_layer(mut self, width: S) -> Self {
        self.boundary_layer = width;
        self
    }

    /// Lists every violated invariant, prefixed with `path`.
    pub fn validate(&self, path: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.n > S::zero()) || !self.n.is_finite() {
            errs.push(format!("{path}.n: reaching gain must be > 0, got {}", self.n));
        }
        for (name, v) in [("d_m", self.d_m), ("w_uim", self.w_uim), ("boundary_layer", self.boundary_layer)] {
            if !(v >= S::zero()) || !v.is_finite() {
                errs.push(format!("{path}.{name}: must be finite and >= 0, got {v}"));
            }
        }
        if !(self.sing_tol > S::zero()) || !self.sing_tol.is_finite() {
            errs.push(format!("{path}.sing_tol: must be > 0, got {}", self.sing_tol));
        }
        errs
    }

    fn ensure_valid(&self) -> Result<()> {
        let errs = self.validate("controller");
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SmcError::Parameter(errs.join("; ")))
        }
    }

    /// `sgn(s)`, or `sat(s / boundary_layer)` when a boundary layer is set.
    pub fn sgn_eff(&self, s: S) -> S {
        if self.boundary_layer > S::zero() {
            (s / self.boundary_layer).max(-S::one()).min(S::one())
        } else {
            sgn_scalar(s)
        }
    }
}

/// Everything the law computed at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ControlDecision<S> {
    pub u: S,
    /// `ds/dx . b`
    pub B: S,
    /// `ds/dx . f`
    pub F: S,
    /// `ds/dx . w_u`
    pub W: S,
    pub s: S,
    /// Coefficient of `sgn(s)`: `n / B + (d_m + w_uim) sgn(B)`.
    pub switching_term: S,
    /// Matched-disturbance guess `d_m sgn(s) sgn(B)`.
    pub d_g_term: S,
    /// Unmatched-disturbance guess `w_uim sgn(s) sgn(B)`.
    pub w_uig_term: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachPrediction<S> {
    pub t_r: S,
    pub s0: S,
    pub n: S,
}

impl<S: Scalar> ReachPrediction<S> {
    pub fn new(n: S, s0: S) -> Result<Self> {
        Ok(Self { t_r: reaching_time_predicted(n, s0)?, s0, n })
    }
}

fn require_positive_gain<S: Scalar>(n: S) -> Result<()> {
    if n > S::zero() && n.is_finite() {
        Ok(())
    } else {
        Err(SmcError::Parameter(format!("reaching gain must be > 0, got {n}")))
    }
}

/// Evaluates the control law at `(x, t)`.
pub fn control<S: Scalar>(
    config: &ControllerConfig<S>,
    model: &SystemModel<S>,
    surface: &SlidingSurface<S>,
    x: &[S],
    t: S,
) -> Result<ControlDecision<S>> {
    config.ensure_valid()?;
    let s = surface.value(x)?;
    let grad = surface.gradient(x)?;
    let b = model.input_vector(x)?;
    let f = model.drift(x, t)?;
    let w = model.unmatched(x, t)?;
    let big_b = dot(&grad, &b);
    let big_f = dot(&grad, &f);
    let big_w = dot(&grad, &w);

    // Also catches NaN.
    if !(big_b.abs() >= config.sing_tol) {
        return Err(SmcError::SingularSurfaceGain { gain: big_b.as_f64(), tol: config.sing_tol.as_f64() });
    }

    let sw = config.sgn_eff(s);
    let sign_b = sgn_scalar(big_b);
    let d_g = config.d_m * sw * sign_b;
    let w_uig = config.w_uim * sw * sign_b;
    let u = -(config.n * sw + big_f) / big_b - w_uig - d_g;

    let switching_term = config.n / big_b + (config.d_m + config.w_uim) * sign_b;
    let equivalent = -big_f / big_b;
    let rebuilt = equivalent - switching_term * sw;
    let scale = equivalent.abs() + switching_term.abs() + S::one();
    if !u.is_finite() || !rebuilt.is_finite() {
        return Err(SmcError::Numerics(format!("control is not finite (B={big_b}, F={big_f})")));
    }
    if (u - rebuilt).abs() > S::lit(64.0) * S::epsilon() * scale {
        return Err(SmcError::Numerics(format!("control reconstruction mismatch: {u} vs {rebuilt}")));
    }

    Ok(ControlDecision { u, B: big_b, F: big_f, W: big_w, s, switching_term, d_g_term: d_g, w_uig_term: w_uig })
}

/// Solution of `s' = -n sgn(s)`: a straight line to zero, then zero.
pub fn closed_form_s<S: Scalar>(n: S, s0: S, t: S) -> Result<S> {
    require_positive_gain(n)?;
    if !(t >= S::zero()) {
        return Err(SmcError::Parameter(format!("time must be >= 0, got {t}")));
    }
    if t >= s0.abs() / n {
        return Ok(S::zero());
    }
    Ok(-n * t * sgn_scalar(s0) + s0)
}

/// `|s0| / n`.
pub fn reaching_time_predicted<S: Scalar>(n: S, s0: S) -> Result<S> {
    require_positive_gain(n)?;
    Ok(s0.abs() / n)
}

/// `s s' + n |s|` along the closed loop with the matched disturbance forced to
/// `d_value`. Nonpositive values certify the reaching condition.
pub fn reaching_residual<S: Scalar>(
    config: &ControllerConfig<S>,
    model: &SystemModel<S>,
    surface: &SlidingSurface<S>,
    x: &[S],
    t: S,
    d_value: S,
) -> Result<S> {
    let w = model.unmatched(x, t)?;
    reaching_residual_with(config, model, surface, x, t, d_value, &w)
}

/// As [`reaching_residual`], with an explicit unmatched disturbance sample.
pub fn reaching_residual_with<S: Scalar>(
    config: &ControllerConfig<S>,
    model: &SystemModel<S>,
    surface: &SlidingSurface<S>,
    x: &[S],
    t: S,
    d_value: S,
    w_value: &[S],
) -> Result<S> {
    let decision = control(config, model, surface, x, t)?;
    let xdot = model.plant_derivative_with(x, t, decision.u, d_value, w_value)?;
    let sdot = dot(&surface.gradient(x)?, &xdot);
    Ok(decision.s * sdot + config.n * decision.s.abs())
}

/// Margin `m = -(s s' + n |s|)` and its normalisation by `|s| |B|`.
pub fn margin_report<S: Scalar>(
    config: &ControllerConfig<S>,
    model: &SystemModel<S>,
    surface: &SlidingSurface<S>,
    x: &[S],
    t: S,
    d_value: S,
) -> Result<MarginReport<S>> {
    let decision = control(config, model, surface, x, t)?;
    let residual = reaching_residual(config, model, surface, x, t, d_value)?;
    Ok(MarginReport::from_residual(residual, decision.s, decision.B))
}

/// Smallest `w_uim` covering every `w_u` inside the elementwise bound box:
/// `sum_i |ds/dx_i| w_um_i / |B|`.
pub fn implied_w_uim<S: Scalar>(gradient: &[S], input_vector: &[S], unmatched_bound: &[S]) -> Result<S> {
    if gradient.len() != input_vector.len() || gradient.len() != unmatched_bound.len() {
        return Err(SmcError::Dimension { expected: gradient.len(), got: unmatched_bound.len() });
    }
    let big_b = dot(gradient, input_vector).abs();
    if big_b == S::zero() {
        return Err(SmcError::SingularSurfaceGain { gain: 0.0, tol: 0.0 });
    }
    let num = gradient.iter().zip(unmatched_bound).fold(S::zero(), |acc, (&g, &w)| acc + g.abs() * w);
    Ok(num / big_b)
}
