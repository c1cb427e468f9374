//! JSON run configuration.
//!
//! Only `scenario.name` and `controller.n` are required:
//!
//! ```json
//! { "scenario": { "name": "pure-integrator" }, "controller": { "n": 1.0 } }
//! ```
//!
//! Everything else falls back to the defaults below. Validation reports all
//! problems at once, each tagged with its field path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, DEFAULT_SING_TOL};
use crate::dynamics::{DisturbanceKind, DisturbanceSignal};
use crate::error::{Result, SmcError};
use crate::scenarios::ScenarioKind;
use crate::simulator::{IntegratorConfig, Method};

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_REFINE_ITERS: u32 = 50;
pub const SEED_ENV: &str = "SMC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    pub parameters: BTreeMap<String, f64>,
    pub initial_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trajectory_csv: String,
    pub report_json: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("."), trajectory_csv: "trajectory.csv".into(), report_json: "report.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub controller: ControllerConfig<f64>,
    pub integrator: IntegratorConfig<f64>,
    pub disturbance: DisturbanceSignal<f64>,
    pub unmatched: DisturbanceSignal<f64>,
    /// `None` selects `max(1e-3, 4 h sup|s'|)` at run time.
    pub eps_band: Option<f64>,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Validated config for a named scenario with default settings.
    pub fn for_scenario(kind: ScenarioKind, n: f64) -> Self {
        Self {
            scenario: ScenarioSpec {
                name: kind,
                parameters: BTreeMap::new(),
                initial_state: kind.default_initial_state(),
            },
            controller: ControllerConfig::new(n),
            integrator: IntegratorConfig::rk4(DEFAULT_STEP, DEFAULT_T_END),
            disturbance: DisturbanceSignal::zero(),
            unmatched: DisturbanceSignal::zero(),
            eps_band: None,
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SmcError::ConfigValidation(errs))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let kind = self.scenario.name;
        errs.extend(kind.validate_parameters(&self.scenario.parameters, "scenario.parameters"));
        if self.scenario.initial_state.len() != kind.dimension() {
            errs.push(format!(
                "scenario.initial_state: {} expects {} entries, got {}",
                kind,
                kind.dimension(),
                self.scenario.initial_state.len()
            ));
        }
        if self.scenario.initial_state.iter().any(|v| !v.is_finite()) {
            errs.push("scenario.initial_state: entries must be finite".into());
        }
        errs.extend(self.controller.validate("controller"));
        errs.extend(self.integrator.validate("integrator"));
        errs.extend(self.disturbance.validate("disturbance"));
        errs.extend(self.unmatched.validate("unmatched"));
        if self.unmatched.kind != DisturbanceKind::Zero && !kind.supports_unmatched() {
            errs.push(format!("unmatched: {kind} has no unmatched channel"));
        }
        if let Some(e) = self.eps_band {
            if !(e > 0.0) || !e.is_finite() {
                errs.push(format!("eps_band: must be > 0, got {e}"));
            }
        }
        errs
    }

    /// Replaces the seed of both disturbance signals.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.disturbance.seed = seed;
        self.unmatched.seed = seed;
        self
    }

    /// Applies `SMC_SEED` when it is set.
    pub fn with_env_seed(self) -> Result<Self> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let seed = v.trim().parse::<u64>().map_err(|_| {
                    SmcError::ConfigValidation(vec![format!("{SEED_ENV}: not an unsigned integer: {v:?}")])
                })?;
                Ok(self.with_seed(seed))
            }
            Err(_) => Ok(self),
        }
    }

    pub fn trajectory_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.trajectory_csv)
    }

    pub fn report_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.report_json)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    initial_state: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    n: Option<f64>,
    d_m: Option<f64>,
    w_uim: Option<f64>,
    sing_tol: Option<f64>,
    boundary_layer: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    method: Option<String>,
    step: Option<f64>,
    t_end: Option<f64>,
    crossing_refine: Option<bool>,
    refine_iters: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    kind: Option<String>,
    amplitude: Option<f64>,
    frequency: Option<f64>,
    offset: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    trajectory_csv: Option<String>,
    report_json: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<RawScenario>,
    controller: Option<RawController>,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    disturbance: RawSignal,
    #[serde(default)]
    unmatched: RawSignal,
    eps_band: Option<f64>,
    #[serde(default)]
    output: RawOutput,
}

fn parse_method(s: &str) -> Option<Method> {
    match s {
        "rk4" => Some(Method::Rk4),
        "explicit-euler" => Some(Method::ExplicitEuler),
        _ => None,
    }
}

fn parse_kind(s: &str) -> Option<DisturbanceKind> {
    match s {
        "zero" => Some(DisturbanceKind::Zero),
        "constant" => Some(DisturbanceKind::Constant),
        "sinusoid" => Some(DisturbanceKind::Sinusoid),
        "seeded-random" => Some(DisturbanceKind::SeededRandom),
        _ => None,
    }
}

fn resolve_signal(raw: RawSignal, path: &str, errs: &mut Vec<String>) -> DisturbanceSignal<f64> {
    let kind = match raw.kind.as_deref() {
        None => DisturbanceKind::Zero,
        Some(k) => parse_kind(k).unwrap_or_else(|| {
            errs.push(format!("{path}.kind: unknown kind '{k}' (known: zero, constant, sinusoid, seeded-random)"));
            DisturbanceKind::Zero
        }),
    };
    DisturbanceSignal {
        kind,
        amplitude: raw.amplitude.unwrap_or(0.0),
        frequency: raw.frequency.unwrap_or(0.0),
        offset: raw.offset.unwrap_or(0.0),
        seed: raw.seed.unwrap_or(0),
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let mut errs = Vec::new();

    let raw_scenario = raw.scenario.unwrap_or_default();
    let kind = match raw_scenario.name.as_deref() {
        None => {
            errs.push("scenario.name: required".to_string());
            None
        }
        Some(name) => match name.parse::<ScenarioKind>() {
            Ok(k) => Some(k),
            Err(_) => {
                errs.push(format!("scenario.name: unknown scenario '{name}' (known: {})", ScenarioKind::known_names()));
                None
            }
        },
    };

    let rc = raw.controller.unwrap_or_default();
    if rc.n.is_none() {
        errs.push("controller.n: required".to_string());
    }
    let controller = ControllerConfig {
        n: rc.n.unwrap_or(f64::NAN),
        d_m: rc.d_m.unwrap_or(0.0),
        w_uim: rc.w_uim.unwrap_or(0.0),
        sing_tol: rc.sing_tol.unwrap_or(DEFAULT_SING_TOL),
        boundary_layer: rc.boundary_layer.unwrap_or(0.0),
    };

    let ri = raw.integrator;
    let method = match ri.method.as_deref() {
        None => Method::Rk4,
        Some(m) => parse_method(m).unwrap_or_else(|| {
            errs.push(format!("integrator.method: unknown method '{m}' (known: rk4, explicit-euler)"));
            Method::Rk4
        }),
    };
    let integrator = IntegratorConfig {
        method,
        step: ri.step.unwrap_or(DEFAULT_STEP),
        t_end: ri.t_end.unwrap_or(DEFAULT_T_END),
        crossing_refine: ri.crossing_refine.unwrap_or(true),
        refine_iters: ri.refine_iters.unwrap_or(DEFAULT_REFINE_ITERS),
    };

    let disturbance = resolve_signal(raw.disturbance, "disturbance", &mut errs);
    let unmatched = resolve_signal(raw.unmatched, "unmatched", &mut errs);
    let defaults = OutputConfig::default();
    let output = OutputConfig {
        dir: raw.output.dir.unwrap_or(defaults.dir),
        trajectory_csv: raw.output.trajectory_csv.unwrap_or(defaults.trajectory_csv),
        report_json: raw.output.report_json.unwrap_or(defaults.report_json),
    };

    let cfg = RunConfig {
        scenario: ScenarioSpec {
            name: kind.unwrap_or(ScenarioKind::PureIntegrator),
            parameters: raw_scenario.parameters,
            initial_state: raw_scenario
                .initial_state
                .unwrap_or_else(|| kind.map(|k| k.default_initial_state()).unwrap_or_default()),
        },
        controller,
        integrator,
        disturbance,
        unmatched,
        eps_band: raw.eps_band,
        output,
    };
    // Scenario checks are meaningless without a scenario, and a missing gain
    // has already been reported.
    errs.extend(cfg.problems().into_iter().filter(|e| {
        !(kind.is_none() && (e.starts_with("scenario.") || e.starts_with("unmatched:")))
            && !(rc.n.is_none() && e.starts_with("controller.n"))
    }));
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(SmcError::ConfigValidation(errs))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| SmcError::ConfigSyntax(e.to_string()))?;
    resolve(raw)
}

pub fn config_from_value(value: serde_json::Value) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_value(value).map_err(|e| SmcError::ConfigSyntax(e.to_string()))?;
    resolve(raw)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SmcError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn config_to_string(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

pub fn write_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config_to_string(cfg) + "\n")?;
    Ok(())
}
