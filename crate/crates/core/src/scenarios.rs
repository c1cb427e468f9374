//! Built-in benchmark plants.
//!
//! | name                | dynamics                                   | surface           |
//! |---------------------|--------------------------------------------|-------------------|
//! | `pure-integrator`   | `x' = u + d`                               | `s = x`           |
//! | `double-integrator` | `x1' = x2 + w`, `x2' = u + d`              | `s = c x1 + x2`   |
//! | `pendulum`          | `x1' = x2 + w`, `x2' = -a sin(x1) + u + d` | `s = c x1 + x2`   |
//!
//! `w` is the optional unmatched disturbance; it is absent unless a non-zero
//! signal is supplied.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DisturbanceKind, DisturbanceSignal, SlidingSurface, SystemModel};
use crate::error::{Result, SmcError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    PureIntegrator,
    DoubleIntegrator,
    Pendulum,
}

pub const DEFAULT_SLOPE: f64 = 1.0;
pub const DEFAULT_GRAVITY: f64 = 9.81;

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::PureIntegrator, Self::DoubleIntegrator, Self::Pendulum];

    pub fn name(self) -> &'static str {
        match self {
            Self::PureIntegrator => "pure-integrator",
            Self::DoubleIntegrator => "double-integrator",
            Self::Pendulum => "pendulum",
        }
    }

    pub fn known_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }

    pub fn dimension(self) -> usize {
        match self {
            Self::PureIntegrator => 1,
            Self::DoubleIntegrator | Self::Pendulum => 2,
        }
    }

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Self::PureIntegrator => &[],
            Self::DoubleIntegrator => &["c"],
            Self::Pendulum => &["a", "c"],
        }
    }

    pub fn default_initial_state(self) -> Vec<f64> {
        match self {
            Self::PureIntegrator => vec![2.0],
            Self::DoubleIntegrator => vec![1.0, 1.0],
            Self::Pendulum => vec![0.5, 0.2],
        }
    }

    pub fn supports_unmatched(self) -> bool {
        self != Self::PureIntegrator
    }

    /// Lists every problem with `parameters`, prefixed with `path`.
    pub fn validate_parameters(self, parameters: &BTreeMap<String, f64>, path: &str) -> Vec<String> {
        let mut errs = Vec::new();
        for (k, v) in parameters {
            if !self.parameter_names().contains(&k.as_str()) {
                errs.push(format!(
                    "{path}.{k}: unknown parameter for {} (accepted: [{}])",
                    self.name(),
                    self.parameter_names().join(", ")
                ));
            } else if !v.is_finite() {
                errs.push(format!("{path}.{k}: must be finite"));
            }
        }
        errs
    }

    /// Builds the plant and its surface.
    pub fn build<S: Scalar>(
        self,
        parameters: &BTreeMap<String, f64>,
        matched: DisturbanceSignal<S>,
        unmatched: DisturbanceSignal<S>,
    ) -> Result<(SystemModel<S>, SlidingSurface<S>)> {
        let errs = self.validate_parameters(parameters, "parameters");
        if !errs.is_empty() {
            return Err(SmcError::Parameter(errs.join("; ")));
        }
        let get = |k: &str, default: f64| S::lit(parameters.get(k).copied().unwrap_or(default));
        let has_w = unmatched.kind != DisturbanceKind::Zero;
        if has_w && !self.supports_unmatched() {
            return Err(SmcError::Parameter(format!("{} has no unmatched channel", self.name())));
        }

        let (model, surface) = match self {
            Self::PureIntegrator => (
                SystemModel::new(1, |_: &[S], _| vec![S::zero()], |_: &[S]| vec![S::one()])?,
                SlidingSurface::linear(vec![S::one()])?,
            ),
            Self::DoubleIntegrator => (
                SystemModel::new(2, |x: &[S], _| vec![x[1], S::zero()], |_: &[S]| vec![S::zero(), S::one()])?,
                SlidingSurface::linear(vec![get("c", DEFAULT_SLOPE), S::one()])?,
            ),
            Self::Pendulum => {
                let a = get("a", DEFAULT_GRAVITY);
                (
                    SystemModel::new(
                        2,
                        move |x: &[S], _| vec![x[1], -a * x[0].sin()],
                        |_: &[S]| vec![S::zero(), S::one()],
                    )?,
                    SlidingSurface::linear(vec![get("c", DEFAULT_SLOPE), S::one()])?,
                )
            }
        };

        let mut model = model.with_label(self.name()).with_matched(matched);
        if has_w {
            let bound = vec![unmatched.sup_abs(), S::zero()];
            model = model.with_unmatched(move |_: &[S], t| vec![unmatched.value(t), S::zero()], bound)?;
        }
        Ok((model, surface))
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = SmcError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SmcError::Parameter(format!("unknown scenario '{s}' (known: {})", Self::known_names())))
    }
}
