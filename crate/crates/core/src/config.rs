//! Experiment configuration: JSON in, fully defaulted and validated struct out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::shape::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    NoiseCheck,
    SheMean,
    PdeConvergence,
    SamplerCheck,
    DualityGap,
    MomentsMartingale,
    Gronwall,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::NoiseCheck => "noise-check",
            Experiment::SheMean => "she-mean",
            Experiment::PdeConvergence => "pde-convergence",
            Experiment::SamplerCheck => "sampler-check",
            Experiment::DualityGap => "duality-gap",
            Experiment::MomentsMartingale => "moments-martingale",
            Experiment::Gronwall => "gronwall",
        }
    }
}

/// Settings for the Laplace-transform check of the noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSettings {
    pub lambdas: Vec<f64>,
    /// Time length of the space-time box.
    pub t: f64,
    /// Spatial area of the box.
    pub area: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            lambdas: vec![0.0, 0.25, 0.5, 1.0],
            t: 1.0,
            area: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentSettings {
    pub q: f64,
    pub times: Vec<f64>,
}

impl Default for MomentSettings {
    fn default() -> Self {
        MomentSettings {
            q: 1.3,
            times: vec![0.1, 0.2, 0.3, 0.4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GronwallSettings {
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
    pub horizon: f64,
    /// Points at which bound and oracle are compared.
    pub points: usize,
    /// Nodes of the Picard oracle's time grid.
    pub oracle_nodes: usize,
    pub picard_iterations: usize,
}

impl Default for GronwallSettings {
    fn default() -> Self {
        GronwallSettings {
            gammas: vec![0.3, 0.6, 0.9],
            cs: vec![0.5, 1.0, 2.0],
            horizon: 1.0,
            points: 100,
            oracle_nodes: 1000,
            picard_iterations: 50,
        }
    }
}

/// Additive tolerances for discretization error, in the units of the
/// compared quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Allowances {
    pub gap: f64,
    pub mean_field: f64,
    /// Largest tolerated fraction of aborted replicas.
    pub abort_fraction: f64,
}

impl Default for Allowances {
    fn default() -> Self {
        Allowances {
            gap: 0.02,
            mean_field: 0.01,
            abort_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u64>,
    /// Times at which `Y` is stored; the duality gap uses the last one.
    #[serde(default = "default_output_times")]
    pub output_times: Vec<f64>,
    #[serde(default)]
    pub phi: Shape,
    #[serde(default)]
    pub psi: Shape,
    #[serde(default)]
    pub allowances: Allowances,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default)]
    pub moments: MomentSettings,
    #[serde(default)]
    pub gronwall: GronwallSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_replicas() -> u64 {
    2000
}

fn default_n_list() -> Vec<u64> {
    vec![4, 16, 64]
}

fn default_output_times() -> Vec<f64> {
    vec![0.1, 0.25]
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            seed: 0,
            model: ModelParams::default(),
            replicas: default_replicas(),
            n_list: default_n_list(),
            output_times: default_output_times(),
            phi: Shape::default(),
            psi: Shape::default(),
            allowances: Allowances::default(),
            noise: NoiseSettings::default(),
            moments: MomentSettings::default(),
            gronwall: GronwallSettings::default(),
            out: None,
        }
    }

    /// Last configured output time (the duality gap's evaluation time).
    pub fn final_time(&self) -> f64 {
        self.output_times.iter().cloned().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| prefix("model", e))?;
        if self.replicas == 0 {
            return Err(config_err("replicas", "must be positive"));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(config_err("n_list", "need at least one positive n"));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("n_list", "must be strictly increasing"));
        }
        for (i, &t) in self.output_times.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(config_err(format!("output_times[{i}]"), "must be finite and non-negative"));
            }
        }
        crate::she::output_steps(&self.output_times, self.model.dt).map_err(|e| retag("output_times", e))?;
        if self.output_times.is_empty() {
            return Err(config_err("output_times", "need at least one time"));
        }
        self.phi.validate().map_err(|e| prefix("phi", e))?;
        self.psi.validate().map_err(|e| prefix("psi", e))?;
        let g = &self.model.grid;
        for (name, s) in [("phi", &self.phi), ("psi", &self.psi)] {
            if s.tail_mass(g) > 1e-8 {
                return Err(config_err(name, "shape has mass > 1e-8 outside the grid"));
            }
        }
        let a = &self.allowances;
        for (name, v) in [
            ("allowances.gap", a.gap),
            ("allowances.mean_field", a.mean_field),
            ("allowances.abort_fraction", a.abort_fraction),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(name, "must be finite and non-negative"));
            }
        }
        let n = &self.noise;
        if n.lambdas.is_empty() {
            return Err(config_err("noise.lambdas", "need at least one lambda"));
        }
        if n.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(config_err("noise.lambdas", "must be finite and non-negative"));
        }
        if !(n.t > 0.0 && n.t.is_finite() && n.area > 0.0 && n.area.is_finite()) {
            return Err(config_err("noise", "t and area must be positive"));
        }
        let m = &self.moments;
        if !(m.q >= 1.0 && m.q < self.model.alpha) {
            return Err(config_err("moments.q", "need 1 <= q < alpha"));
        }
        if m.times.is_empty() {
            return Err(config_err("moments.times", "need at least one time"));
        }
        crate::she::output_steps(&m.times, self.model.dt).map_err(|e| retag("moments.times", e))?;
        let gr = &self.gronwall;
        if gr.gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return Err(config_err("gronwall.gammas", "each gamma must lie in (0, 1)"));
        }
        if gr.cs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(config_err("gronwall.cs", "each c must be positive"));
        }
        if !(gr.horizon > 0.0 && gr.horizon.is_finite()) {
            return Err(config_err("gronwall.horizon", "must be positive"));
        }
        if gr.points < 2 || gr.oracle_nodes < gr.points || gr.picard_iterations == 0 {
            return Err(config_err(
                "gronwall",
                "need points >= 2, oracle_nodes >= points and picard_iterations >= 1",
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn prefix(scope: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => config_err(format!("{scope}.{field}"), reason),
        Error::Config { path, message } => config_err(format!("{scope}.{path}"), message),
        other => config_err(scope, other.to_string()),
    }
}

/// Keeps the message of `e` but files it under `path`.
fn retag(path: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { reason, .. } => config_err(path, reason),
        other => config_err(path, other.to_string()),
    }
}

/// Parses and validates a config document. A run manifest (an object with a
/// `config` member) is accepted too, so any manifest can be re-run as is.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;
    let value = match value {
        serde_json::Value::Object(mut map) if map.contains_key("config") && !map.contains_key("experiment") => {
            map.remove("config").unwrap_or_default()
        }
        other => other,
    };
    let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}
