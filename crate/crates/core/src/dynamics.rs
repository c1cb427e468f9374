//! Control-affine SISO plants and sliding surfaces.
//!
//! A plant is described by
//!
//! ```text
//! x' = f(x, t) + b(x) u + b(x) d(t) + w_u(x, t)
//! ```
//!
//! where the matched disturbance `d` shares the input channel `b` with the
//! control and `w_u` collects everything that does not. The sliding surface
//! is the scalar output `s(x)` together with its analytic gradient.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmcError};
use crate::scalar::{all_finite, Scalar};

pub type DriftFn<S> = Arc<dyn Fn(&[S], S) -> Vec<S> + Send + Sync>;
pub type InputFn<S> = Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;
pub type UnmatchedFn<S> = Arc<dyn Fn(&[S], S) -> Vec<S> + Send + Sync>;
pub type SurfaceFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
pub type GradientFn<S> = Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;

/// Step used by the central-difference gradient oracle.
pub const FD_STEP: f64 = 1e-5;

/// A finite, non-empty plant state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector<S>(Vec<S>);

impl<S: Scalar> StateVector<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(SmcError::Parameter("state vector must have dimension >= 1".into()));
        }
        if !all_finite(&values) {
            return Err(SmcError::Parameter("state vector entries must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }
}

impl<S> Deref for StateVector<S> {
    type Target = [S];

    fn deref(&self) -> &[S] {
        &self.0
    }
}

/// Returns -1, 0 or 1. Zero is compared exactly: only `v == 0.0` maps to 0.
pub fn sgn<S: Scalar>(v: S) -> Result<i8> {
    if !v.is_finite() {
        return Err(SmcError::Parameter(format!("sgn of non-finite value {v}")));
    }
    Ok(sgn_unchecked(v))
}

pub(crate) fn sgn_unchecked<S: Scalar>(v: S) -> i8 {
    if v > S::zero() {
        1
    } else if v < S::zero() {
        -1
    } else {
        0
    }
}

pub(crate) fn sgn_scalar<S: Scalar>(v: S) -> S {
    match sgn_unchecked(v) {
        1 => S::one(),
        -1 => -S::one(),
        _ => S::zero(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    Zero,
    Constant,
    Sinusoid,
    SeededRandom,
}

/// Time-only disturbance with a known supremum.
///
/// * `constant`: `offset + amplitude`
/// * `sinusoid`: `offset + amplitude * sin(frequency * t)`
/// * `seeded-random`: `offset + amplitude * r(t)`, where `r` interpolates
///   linearly between uniform `[-1, 1]` knots spaced `1 / frequency` apart.
///   Knot values depend only on `(seed, knot index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceSignal<S> {
    pub kind: DisturbanceKind,
    pub amplitude: S,
    pub frequency: S,
    pub offset: S,
    pub seed: u64,
}

impl<S: Scalar> Default for DisturbanceSignal<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> DisturbanceSignal<S> {
    pub fn zero() -> Self {
        Self { kind: DisturbanceKind::Zero, amplitude: S::zero(), frequency: S::zero(), offset: S::zero(), seed: 0 }
    }

    pub fn constant(value: S) -> Self {
        Self { kind: DisturbanceKind::Constant, amplitude: value, ..Self::zero() }
    }

    pub fn sinusoid(amplitude: S, frequency: S) -> Self {
        Self { kind: DisturbanceKind::Sinusoid, amplitude, frequency, ..Self::zero() }
    }

    pub fn seeded_random(amplitude: S, frequency: S, seed: u64) -> Self {
        Self { kind: DisturbanceKind::SeededRandom, amplitude, frequency, seed, ..Self::zero() }
    }

    pub fn with_offset(mut self, offset: S) -> Self {
        self.offset = offset;
        self
    }

    /// Lists every invalid field, prefixed with `path`.
    pub fn validate(&self, path: &str) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [("amplitude", self.amplitude), ("frequency", self.frequency), ("offset", self.offset)] {
            if !v.is_finite() {
                errs.push(format!("{path}.{name}: must be finite"));
            }
        }
        if self.kind == DisturbanceKind::SeededRandom && !(self.frequency > S::zero()) {
            errs.push(format!("{path}.frequency: seeded-random signals need frequency > 0"));
        }
        errs
    }

    pub fn value(&self, t: S) -> S {
        match self.kind {
            DisturbanceKind::Zero => S::zero(),
            DisturbanceKind::Constant => self.offset + self.amplitude,
            DisturbanceKind::Sinusoid => self.offset + self.amplitude * (self.frequency * t).sin(),
            DisturbanceKind::SeededRandom => {
                let pos = (t * self.frequency).as_f64();
                let k = pos.floor();
                let frac = pos - k;
                let a = self.knot(k as i64);
                let b = self.knot(k as i64 + 1);
                let r = (a + (b - a) * frac).clamp(-1.0, 1.0);
                self.offset + self.amplitude * S::lit(r)
            }
        }
    }

    /// Analytic bound on `|value(t)|` over all `t`.
    pub fn sup_abs(&self) -> S {
        match self.kind {
            DisturbanceKind::Zero => S::zero(),
            _ => self.offset.abs() + self.amplitude.abs(),
        }
    }

    fn knot(&self, index: i64) -> f64 {
        let mix = (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ mix);
        rng.gen_range(-1.0..=1.0)
    }
}

/// Control-affine SISO plant.
#[derive(Clone)]
pub struct SystemModel<S> {
    dimension: usize,
    drift: DriftFn<S>,
    input_vector: InputFn<S>,
    matched: DisturbanceSignal<S>,
    unmatched: Option<UnmatchedFn<S>>,
    unmatched_bound: Vec<S>,
    pub label: String,
}

impl<S: Scalar> fmt::Debug for SystemModel<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("label", &self.label)
            .field("dimension", &self.dimension)
            .field("matched", &self.matched)
            .field("unmatched_bound", &self.unmatched_bound)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> SystemModel<S> {
    /// Plant without disturbances.
    pub fn new<F, B>(dimension: usize, drift: F, input_vector: B) -> Result<Self>
    where
        F: Fn(&[S], S) -> Vec<S> + Send + Sync + 'static,
        B: Fn(&[S]) -> Vec<S> + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(SmcError::Parameter("model dimension must be >= 1".into()));
        }
        Ok(Self {
            dimension,
            drift: Arc::new(drift),
            input_vector: Arc::new(input_vector),
            matched: DisturbanceSignal::zero(),
            unmatched: None,
            unmatched_bound: vec![S::zero(); dimension],
            label: String::from("custom"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_matched(mut self, signal: DisturbanceSignal<S>) -> Self {
        self.matched = signal;
        self
    }

    /// Attaches `w_u` with its elementwise absolute bound.
    pub fn with_unmatched<W>(mut self, w: W, bound: Vec<S>) -> Result<Self>
    where
        W: Fn(&[S], S) -> Vec<S> + Send + Sync + 'static,
    {
        if bound.len() != self.dimension {
            return Err(SmcError::Dimension { expected: self.dimension, got: bound.len() });
        }
        if bound.iter().any(|b| !b.is_finite() || *b < S::zero()) {
            return Err(SmcError::Parameter("unmatched bounds must be finite and nonnegative".into()));
        }
        self.unmatched = Some(Arc::new(w));
        self.unmatched_bound = bound;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn matched_disturbance(&self) -> &DisturbanceSignal<S> {
        &self.matched
    }

    pub fn unmatched_bound(&self) -> &[S] {
        &self.unmatched_bound
    }

    pub fn has_unmatched(&self) -> bool {
        self.unmatched.is_some()
    }

    fn check_dim(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(SmcError::Dimension { expected: self.dimension, got: x.len() });
        }
        Ok(())
    }

    fn checked(&self, v: Vec<S>, what: &str) -> Result<Vec<S>> {
        if v.len() != self.dimension {
            return Err(SmcError::Dimension { expected: self.dimension, got: v.len() });
        }
        if !all_finite(&v) {
            return Err(SmcError::Numerics(format!("{what} returned a non-finite value")));
        }
        Ok(v)
    }

    pub fn drift(&self, x: &[S], t: S) -> Result<Vec<S>> {
        self.check_dim(x)?;
        self.checked((self.drift)(x, t), "drift")
    }

    pub fn input_vector(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_dim(x)?;
        self.checked((self.input_vector)(x), "input vector")
    }

    pub fn unmatched(&self, x: &[S], t: S) -> Result<Vec<S>> {
        self.check_dim(x)?;
        match &self.unmatched {
            Some(w) => self.checked(w(x, t), "unmatched disturbance"),
            None => Ok(vec![S::zero(); self.dimension]),
        }
    }

    /// `f(x,t) + b(x) u + b(x) d(t) + w_u(x,t)` with the model's own disturbances.
    pub fn plant_derivative(&self, x: &[S], t: S, u: S) -> Result<Vec<S>> {
        let w = self.unmatched(x, t)?;
        self.plant_derivative_with(x, t, u, self.matched.value(t), &w)
    }

    /// Same as [`plant_derivative`](Self::plant_derivative) with the
    /// disturbances supplied by the caller.
    pub fn plant_derivative_with(&self, x: &[S], t: S, u: S, d: S, w: &[S]) -> Result<Vec<S>> {
        if !u.is_finite() || !d.is_finite() {
            return Err(SmcError::Numerics(format!("non-finite input u={u}, d={d}")));
        }
        if w.len() != self.dimension {
            return Err(SmcError::Dimension { expected: self.dimension, got: w.len() });
        }
        let f = self.drift(x, t)?;
        let b = self.input_vector(x)?;
        let out: Vec<S> = f.iter().zip(&b).zip(w).map(|((&fi, &bi), &wi)| fi + bi * u + bi * d + wi).collect();
        if !all_finite(&out) {
            return Err(SmcError::Numerics("plant derivative is not finite".into()));
        }
        Ok(out)
    }
}

/// Switching function `s(x)` with its analytic gradient.
#[derive(Clone)]
pub struct SlidingSurface<S> {
    dimension: usize,
    value: SurfaceFn<S>,
    gradient: GradientFn<S>,
    pub description: String,
}

impl<S: Scalar> fmt::Debug for SlidingSurface<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlidingSurface")
            .field("description", &self.description)
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> SlidingSurface<S> {
    pub fn new<V, G>(dimension: usize, value: V, gradient: G, description: impl Into<String>) -> Result<Self>
    where
        V: Fn(&[S]) -> S + Send + Sync + 'static,
        G: Fn(&[S]) -> Vec<S> + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(SmcError::Parameter("surface dimension must be >= 1".into()));
        }
        Ok(Self { dimension, value: Arc::new(value), gradient: Arc::new(gradient), description: description.into() })
    }

    /// `s(x) = c . x`.
    pub fn linear(coefficients: Vec<S>) -> Result<Self> {
        let dim = coefficients.len();
        let desc = format!(
            "s = {}",
            coefficients.iter().enumerate().map(|(i, c)| format!("{c}*x{i}")).collect::<Vec<_>>().join(" + ")
        );
        let c = coefficients.clone();
        Self::new(dim, move |x| crate::scalar::dot(&c, x), move |_| coefficients.clone(), desc)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn check_dim(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(SmcError::Dimension { expected: self.dimension, got: x.len() });
        }
        Ok(())
    }

    pub fn value(&self, x: &[S]) -> Result<S> {
        self.check_dim(x)?;
        let s = (self.value)(x);
        if !s.is_finite() {
            return Err(SmcError::Numerics("surface value is not finite".into()));
        }
        Ok(s)
    }

    pub fn gradient(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_dim(x)?;
        let g = (self.gradient)(x);
        if g.len() != self.dimension {
            return Err(SmcError::Dimension { expected: self.dimension, got: g.len() });
        }
        if !all_finite(&g) {
            return Err(SmcError::Numerics("surface gradient is not finite".into()));
        }
        Ok(g)
    }

    /// Central-difference gradient. Test oracle only; the control law uses
    /// [`gradient`](Self::gradient).
    pub fn gradient_fd(&self, x: &[S], h: S) -> Result<Vec<S>> {
        if !(h > S::zero()) || !h.is_finite() {
            return Err(SmcError::Parameter(format!("finite-difference step must be > 0, got {h}")));
        }
        self.check_dim(x)?;
        let two = S::lit(2.0);
        let mut probe = x.to_vec();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let plus = (self.value)(&probe);
            probe[i] = x[i] - h;
            let minus = (self.value)(&probe);
            probe[i] = x[i];
            out.push((plus - minus) / (two * h));
        }
        Ok(out)
    }
}

/// Normwise relative error `|a - b|_inf / max(|a|_inf, 1)`.
///
/// The floor of 1 keeps the measure meaningful where the gradient vanishes.
pub fn gradient_rel_error<S: Scalar>(analytic: &[S], numeric: &[S]) -> S {
    let diff = analytic.iter().zip(numeric).fold(S::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
    diff / crate::scalar::max_abs(analytic).max(S::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_surface() -> SlidingSurface<f64> {
        SlidingSurface::linear(vec![1.0, 1.0]).unwrap()
    }

    fn quad_surface() -> SlidingSurface<f64> {
        SlidingSurface::new(2, |x: &[f64]| x[0] * x[0] + x[1], |x: &[f64]| vec![2.0 * x[0], 1.0], "x1^2 + x2").unwrap()
    }

    fn double_integrator() -> SystemModel<f64> {
        SystemModel::new(2, |x: &[f64], _| vec![x[1], 0.0], |_: &[f64]| vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn surface_values() {
        assert_eq!(sum_surface().value(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(sum_surface().value(&[2.0, -2.0]).unwrap(), 0.0);
        assert_eq!(quad_surface().value(&[3.0, 0.0]).unwrap(), 9.0);
    }

    #[test]
    fn surface_dimension_mismatch() {
        assert_eq!(sum_surface().value(&[1.0]).unwrap_err(), SmcError::Dimension { expected: 2, got: 1 });
        assert!(matches!(sum_surface().gradient(&[1.0, 2.0, 3.0]), Err(SmcError::Dimension { .. })));
    }

    #[test]
    fn analytic_gradients() {
        assert_eq!(sum_surface().gradient(&[5.0, -7.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(quad_surface().gradient(&[3.0, 0.0]).unwrap(), vec![6.0, 1.0]);
    }

    #[test]
    fn finite_difference_gradients() {
        let g = sum_surface().gradient_fd(&[0.0, 0.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9 && (g[1] - 1.0).abs() < 1e-9);

        let sq = SlidingSurface::new(2, |x: &[f64]| x[0] * x[0], |x: &[f64]| vec![2.0 * x[0], 0.0], "x1^2").unwrap();
        let g = sq.gradient_fd(&[2.0, 0.3], 1e-5).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-8);

        assert!(matches!(sum_surface().gradient_fd(&[0.0, 0.0], 0.0), Err(SmcError::Parameter(_))));
        assert!(matches!(sum_surface().gradient_fd(&[0.0, 0.0], -1e-5), Err(SmcError::Parameter(_))));
    }

    #[test]
    fn sgn_cases() {
        assert_eq!(sgn(3.2).unwrap(), 1);
        assert_eq!(sgn(0.0).unwrap(), 0);
        assert_eq!(sgn(-0.0).unwrap(), 0);
        assert_eq!(sgn(-0.5).unwrap(), -1);
        assert_eq!(sgn(f64::MIN_POSITIVE * 1e-10).unwrap(), 1);
        assert!(matches!(sgn(f64::NAN), Err(SmcError::Parameter(_))));
        assert!(matches!(sgn(f64::INFINITY), Err(SmcError::Parameter(_))));
    }

    #[test]
    fn plant_derivative_examples() {
        let m = double_integrator();
        assert_eq!(m.plant_derivative(&[1.0, 1.0], 0.0, -2.0).unwrap(), vec![1.0, -2.0]);
        assert_eq!(m.plant_derivative(&[0.0, 0.0], 0.0, 0.0).unwrap(), vec![0.0, 0.0]);

        let m = double_integrator().with_matched(DisturbanceSignal::constant(1.0));
        assert_eq!(m.plant_derivative(&[0.0, 0.0], 0.0, 0.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn plant_derivative_rejects_non_finite() {
        let m = SystemModel::new(1, |x: &[f64], _| vec![1e308 * x[0]], |_: &[f64]| vec![1.0]).unwrap();
        assert!(matches!(m.plant_derivative(&[10.0], 0.0, 0.0), Err(SmcError::Numerics(_))));
        assert!(matches!(double_integrator().plant_derivative(&[0.0, 0.0], 0.0, f64::NAN), Err(SmcError::Numerics(_))));
    }

    #[test]
    fn unmatched_bound_dimension_checked() {
        let r = double_integrator().with_unmatched(|_: &[f64], _| vec![0.0, 0.0], vec![1.0]);
        assert!(matches!(r, Err(SmcError::Dimension { .. })));
        let r = double_integrator().with_unmatched(|_: &[f64], _| vec![0.0, 0.0], vec![-1.0, 0.0]);
        assert!(matches!(r, Err(SmcError::Parameter(_))));
    }

    #[test]
    fn state_vector_invariants() {
        assert!(StateVector::<f64>::new(vec![]).is_err());
        assert!(StateVector::new(vec![1.0, f64::NAN]).is_err());
        let x = StateVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(x.dim(), 2);
        assert_eq!(x[1], 2.0);
    }

    #[test]
    fn disturbance_shapes() {
        let c = DisturbanceSignal::constant(1.5);
        assert_eq!(c.value(3.0), 1.5);
        assert_eq!(c.sup_abs(), 1.5);

        let s = DisturbanceSignal::sinusoid(0.8, 5.0);
        assert!((s.value(0.1) - 0.8 * 0.5f64.sin()).abs() < 1e-15);
        assert_eq!(s.sup_abs(), 0.8);

        let r = DisturbanceSignal::seeded_random(0.5, 10.0, 7).with_offset(0.1);
        assert_eq!(r.sup_abs(), 0.6);
        assert_eq!(r.value(1.234), DisturbanceSignal::seeded_random(0.5, 10.0, 7).with_offset(0.1).value(1.234));
        assert_ne!(r.value(1.234), DisturbanceSignal::seeded_random(0.5, 10.0, 8).with_offset(0.1).value(1.234));

        assert_eq!(DisturbanceSignal::<f64>::zero().value(1.0), 0.0);
        assert!(!DisturbanceSignal::seeded_random(1.0, 0.0, 1).validate("d").is_empty());
    }

    #[test]
    fn works_in_single_precision() {
        let s = SlidingSurface::<f32>::linear(vec![1.0, 1.0]).unwrap();
        assert_eq!(s.value(&[1.5, 0.5]).unwrap(), 2.0f32);
        assert_eq!(sgn(-2.0f32).unwrap(), -1);
    }
}
