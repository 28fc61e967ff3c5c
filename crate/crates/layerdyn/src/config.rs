//! Run configuration, read from a JSON document.

use std::path::{Path, PathBuf};

use layerdyn_core::integrate::IntegratorConfig;
use layerdyn_core::layer::DEFAULT_EPS_LAYER;
use layerdyn_core::scenarios::{CircuitParams, DuffingParams, DuffingVariant, Example1Variant, Example2Variant};
use layerdyn_core::sigmoid::{SigmoidKind, SigmoidSpec};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmoid: Option<SigmoidConfig>,
    pub t_span: [f64; 2],
    /// Physical coordinates: `(I, V)` for the circuit, `x₁..xₙ` otherwise.
    pub initial_state: Vec<f64>,
    /// Starting multiplier for `layer_only` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_lambda: Option<f64>,
    /// Integrate `dx/ds = −f(x, −s)`; reported times are `s`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub reverse_time: bool,
    #[serde(default = "default_eps_layer")]
    pub eps_layer: f64,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn default_eps_layer() -> f64 {
    DEFAULT_EPS_LAYER
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Hybrid,
    Regularized,
    LayerOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Example1 {
        #[serde(default = "nonlinear")]
        variant: Variant,
    },
    Example2 {
        #[serde(default = "nonlinear")]
        variant: Variant,
    },
    Circuit {
        #[serde(default)]
        params: CircuitConfig,
    },
    Duffing {
        #[serde(default)]
        params: DuffingConfig,
    },
}

fn nonlinear() -> Variant {
    Variant::Nonlinear
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Nonlinear,
    /// Filippov (Example 1) or continuous (Example 2).
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub l: f64,
    pub c: f64,
    pub r: f64,
    pub v0: f64,
    pub vb: f64,
    pub sigma: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        let p = CircuitParams::default();
        CircuitConfig { l: p.l, c: p.c, r: p.r, v0: p.v0, vb: p.vb, sigma: p.sigma }
    }
}

impl From<CircuitConfig> for CircuitParams {
    fn from(c: CircuitConfig) -> Self {
        CircuitParams { l: c.l, c: c.c, r: c.r, v0: c.v0, vb: c.vb, sigma: c.sigma }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuffingConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub variant: Variant,
    /// Adds the tracking state `x₃`.
    pub tracker: bool,
    /// Tracker time constant; defaults to `eps_layer`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracker_mu: Option<f64>,
}

impl Default for DuffingConfig {
    fn default() -> Self {
        let p = DuffingParams::default();
        DuffingConfig { a: p.a, b: p.b, c: p.c, variant: Variant::Nonlinear, tracker: false, tracker_mu: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmoidConfig {
    pub kind: SigmoidName,
    pub eps: f64,
    /// Hill threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmoidName {
    PiecewiseLinear,
    ArctanUnit,
    Arctan01,
    Tanh,
    Erf,
    Hill,
}

impl SigmoidConfig {
    pub fn spec(&self) -> Result<SigmoidSpec, CliError> {
        let kind = match self.kind {
            SigmoidName::PiecewiseLinear => SigmoidKind::PiecewiseLinear,
            SigmoidName::ArctanUnit => SigmoidKind::ArctanUnit,
            SigmoidName::Arctan01 => SigmoidKind::Arctan01,
            SigmoidName::Tanh => SigmoidKind::Tanh,
            SigmoidName::Erf => SigmoidKind::Erf,
            SigmoidName::Hill => {
                SigmoidKind::Hill { theta: self.theta.ok_or_else(|| config_err("hill sigmoid needs theta"))? }
            }
        };
        SigmoidSpec::new(kind, self.eps).map_err(|e| config_err(format!("sigmoid: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        IntegratorSettings {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_step: c.max_step,
            event_tol: c.event_tol,
            max_steps: c.max_steps,
        }
    }
}

impl From<IntegratorSettings> for IntegratorConfig {
    fn from(s: IntegratorSettings) -> Self {
        IntegratorConfig {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            max_step: s.max_step,
            event_tol: s.event_tol,
            max_steps: s.max_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::ReadConfig { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        match &self.scenario {
            ScenarioConfig::Duffing { params } if params.tracker => 3,
            _ => 2,
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.into()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let [t0, t1] = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(config_err("t_span must be finite and increasing"));
        }
        if self.initial_state.len() != self.dim() {
            return Err(config_err(format!(
                "initial_state has {} components, scenario needs {}",
                self.initial_state.len(),
                self.dim()
            )));
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(config_err("initial_state must be finite"));
        }
        match (self.mode, &self.sigmoid) {
            (Mode::Regularized, None) => return Err(config_err("regularized mode needs a sigmoid")),
            (Mode::Regularized, Some(s)) => {
                s.spec()?;
            }
            (_, Some(_)) => return Err(config_err("sigmoid is only used in regularized mode")),
            _ => {}
        }
        if self.initial_lambda.is_some() && self.mode != Mode::LayerOnly {
            return Err(config_err("initial_lambda is only used in layer_only mode"));
        }
        if let Some(l) = self.initial_lambda {
            if !(-1.0..=1.0).contains(&l) {
                return Err(config_err("initial_lambda must lie in [-1, 1]"));
            }
        }
        if !(self.eps_layer > 0.0 && self.eps_layer.is_finite()) {
            return Err(config_err("eps_layer must be positive"));
        }
        self.integrator().validate().map_err(|e| config_err(format!("integrator: {e}")))?;
        self.circuit_params().map(|p| p.validate()).transpose().map_err(|e| config_err(e.to_string()))?;
        if let Some(p) = self.duffing_params() {
            p.validate().map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn circuit_params(&self) -> Option<CircuitParams> {
        match &self.scenario {
            ScenarioConfig::Circuit { params } => Some((*params).into()),
            _ => None,
        }
    }

    pub fn duffing_params(&self) -> Option<DuffingParams> {
        match &self.scenario {
            ScenarioConfig::Duffing { params } => Some(DuffingParams {
                a: params.a,
                b: params.b,
                c: params.c,
                variant: match params.variant {
                    Variant::Nonlinear => DuffingVariant::NonlinearCubic,
                    Variant::Linear => DuffingVariant::Linear,
                },
                tracker_mu: params.tracker.then(|| params.tracker_mu.unwrap_or(self.eps_layer)),
            }),
            _ => None,
        }
    }

    pub fn example1_variant(variant: Variant) -> Example1Variant {
        match variant {
            Variant::Nonlinear => Example1Variant::Nonlinear,
            Variant::Linear => Example1Variant::Filippov,
        }
    }

    pub fn example2_variant(variant: Variant) -> Example2Variant {
        match variant {
            Variant::Nonlinear => Example2Variant::Nonlinear,
            Variant::Linear => Example2Variant::Continuous,
        }
    }

    /// Returns a copy with one named parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<RunConfig, CliError> {
        let mut cfg = self.clone();
        let unknown = || config_err(format!("parameter `{name}` does not apply to this configuration"));
        match name {
            "eps" => cfg.sigmoid.as_mut().ok_or_else(unknown)?.eps = value,
            "theta" => cfg.sigmoid.as_mut().ok_or_else(unknown)?.theta = Some(value),
            "eps_layer" => cfg.eps_layer = value,
            "t_end" => cfg.t_span[1] = value,
            "initial_lambda" => cfg.initial_lambda = Some(value),
            _ => match &mut cfg.scenario {
                ScenarioConfig::Circuit { params } => match name {
                    "l" => params.l = value,
                    "c" => params.c = value,
                    "r" => params.r = value,
                    "v0" => params.v0 = value,
                    "vb" => params.vb = value,
                    "sigma" => params.sigma = value,
                    _ => return Err(unknown()),
                },
                ScenarioConfig::Duffing { params } => match name {
                    "a" => params.a = value,
                    "b" => params.b = value,
                    "c" => params.c = value,
                    "tracker_mu" => params.tracker_mu = Some(value),
                    _ => return Err(unknown()),
                },
                _ => return Err(unknown()),
            },
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
