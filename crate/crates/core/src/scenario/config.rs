//! Scenario configuration: a strict TOML schema.
//!
//! Every file has four tables: `scenario` (a name), `[model]`, `[protocol]`,
//! `[numerics]`, and an optional `[output]`. Unknown keys anywhere are
//! rejected, as are model keys that do not belong to the chosen scenario, so
//! a misspelling fails before any computation starts.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::EncodingKind;

/// Spec default: each stage is divided into this many integrator steps.
pub const DEFAULT_STEPS_PER_STAGE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    FlowField,
    OpoUndepleted,
    PumpDepletion,
    Kerr,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::FlowField => "flow-field",
            ScenarioKind::OpoUndepleted => "opo-undepleted",
            ScenarioKind::PumpDepletion => "pump-depletion",
            ScenarioKind::Kerr => "kerr",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ScenarioKind::FlowField => {
                "subsampled trajectory points and their parametric-derivative arrows \
                 at t = 0, t1, and the rewound t = 0"
            }
            ScenarioKind::OpoUndepleted => {
                "undepleted parametric amplifier + phase encoding; trajectory QFI \
                 against the closed-form reference over a gain grid"
            }
            ScenarioKind::PumpDepletion => {
                "two-mode cavity/pump amplifier + phase encoding; trajectory QFI, \
                 generator-variance QFI, and per-mode partial contributions"
            }
            ScenarioKind::Kerr => {
                "Kerr oscillator + displacement encoding; trajectory QFI against the \
                 exact Fock-space reference and the moment-based sensitivity"
            }
        }
    }

    pub fn all() -> [ScenarioKind; 4] {
        [
            ScenarioKind::FlowField,
            ScenarioKind::OpoUndepleted,
            ScenarioKind::PumpDepletion,
            ScenarioKind::Kerr,
        ]
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingName {
    Phase,
    Displacement,
}

impl EncodingName {
    pub fn kind(&self) -> EncodingKind {
        match self {
            EncodingName::Phase => EncodingKind::PhaseRotation,
            EncodingName::Displacement => EncodingKind::QuadratureDisplacement,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vartheta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolTable {
    /// Preparation durations, one CSV row per value; strictly ascending.
    pub t1_grid: Vec<f64>,
    /// Encoding duration.
    pub delta_t: f64,
    /// Operating value of the encoded parameter.
    pub omega_op: f64,
    pub encoding: EncodingName,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsTable {
    pub trajectories: usize,
    pub seed: u64,
    #[serde(default = "default_steps_per_stage")]
    pub steps_per_stage: usize,
    /// Finite-difference step for the encoding parameter. Defaults to
    /// 1e-4 / delta_t for phase encodings and 1e-4 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_omega: Option<f64>,
    /// Fock truncation for the exact reference (kerr and oracle runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cut: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_threshold: Option<f64>,
}

fn default_steps_per_stage() -> usize {
    DEFAULT_STEPS_PER_STAGE
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub model: ModelTable,
    pub protocol: ProtocolTable,
    pub numerics: NumericsTable,
    #[serde(default)]
    pub output: OutputTable,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require(value: Option<f64>, key: &str, scenario: ScenarioKind) -> Result<f64> {
    let v = value.ok_or_else(|| config_err(format!("{scenario}: missing model key `{key}`")))?;
    if !v.is_finite() {
        return Err(config_err(format!("{scenario}: `{key}` must be finite")));
    }
    Ok(v)
}

fn forbid(value: Option<f64>, key: &str, scenario: ScenarioKind) -> Result<()> {
    if value.is_some() {
        return Err(config_err(format!(
            "{scenario}: model key `{key}` does not apply"
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| config_err(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Resolved finite-difference step.
    pub fn delta_omega(&self) -> f64 {
        if let Some(dw) = self.numerics.delta_omega {
            return dw;
        }
        match self.protocol.encoding {
            EncodingName::Phase if self.protocol.delta_t > 0.0 => 1e-4 / self.protocol.delta_t,
            _ => 1e-4,
        }
    }

    /// Integrator step for a stage of the given duration.
    pub fn stage_step(&self, duration: f64) -> f64 {
        if duration > 0.0 {
            duration / self.numerics.steps_per_stage as f64
        } else {
            1.0
        }
    }

    pub fn escape_threshold(&self) -> f64 {
        self.numerics
            .escape_threshold
            .unwrap_or(crate::estimator::DEFAULT_ESCAPE_THRESHOLD)
    }

    /// Fock truncation for the exact reference: the configured value, or the
    /// coherent-state guideline |a0|^2 + 8 |a0| + 10.
    pub fn n_cut_for(&self, alpha0: f64) -> usize {
        self.numerics
            .n_cut
            .unwrap_or_else(|| (alpha0 * alpha0 + 8.0 * alpha0.abs() + 10.0).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario;
        let p = &self.protocol;
        if p.t1_grid.is_empty() {
            return Err(config_err(format!("{scenario}: t1_grid must be non-empty")));
        }
        if p.t1_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(config_err(format!(
                "{scenario}: t1_grid entries must be finite and >= 0"
            )));
        }
        if p.t1_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err(format!(
                "{scenario}: t1_grid must be strictly ascending"
            )));
        }
        if !p.delta_t.is_finite() || p.delta_t <= 0.0 {
            // QFI columns are reported per delta_t^2, so a zero-length
            // encoding stage has no meaningful normalisation
            return Err(config_err(format!(
                "{scenario}: delta_t must be finite and > 0"
            )));
        }
        if !p.omega_op.is_finite() {
            return Err(config_err(format!("{scenario}: omega_op must be finite")));
        }
        let n = &self.numerics;
        if n.trajectories < 2 {
            return Err(config_err(format!(
                "{scenario}: trajectories must be >= 2"
            )));
        }
        if n.steps_per_stage == 0 {
            return Err(config_err(format!(
                "{scenario}: steps_per_stage must be >= 1"
            )));
        }
        if let Some(dw) = n.delta_omega {
            if !(dw > 0.0) || !dw.is_finite() {
                return Err(config_err(format!(
                    "{scenario}: delta_omega must be positive and finite"
                )));
            }
        }
        if let Some(t) = n.escape_threshold {
            if !(t > 0.0) {
                return Err(config_err(format!(
                    "{scenario}: escape_threshold must be positive"
                )));
            }
        }
        let m = &self.model;
        match scenario {
            ScenarioKind::FlowField => {
                require(m.g, "g", scenario)?;
                require(m.theta, "theta", scenario)?;
                forbid(m.chi, "chi", scenario)?;
                forbid(m.omega0, "omega0", scenario)?;
                forbid(m.beta0, "beta0", scenario)?;
                if p.encoding != EncodingName::Phase {
                    return Err(config_err(format!("{scenario}: encoding must be \"phase\"")));
                }
                if p.t1_grid.len() != 1 {
                    return Err(config_err(format!(
                        "{scenario}: t1_grid must hold exactly one duration"
                    )));
                }
            }
            ScenarioKind::OpoUndepleted => {
                require(m.g, "g", scenario)?;
                require(m.theta, "theta", scenario)?;
                require(m.alpha0, "alpha0", scenario)?;
                forbid(m.chi, "chi", scenario)?;
                forbid(m.omega0, "omega0", scenario)?;
                forbid(m.beta0, "beta0", scenario)?;
                if p.encoding != EncodingName::Phase {
                    return Err(config_err(format!("{scenario}: encoding must be \"phase\"")));
                }
            }
            ScenarioKind::PumpDepletion => {
                require(m.chi, "chi", scenario)?;
                require(m.theta, "theta", scenario)?;
                require(m.alpha0, "alpha0", scenario)?;
                require(m.beta0, "beta0", scenario)?;
                forbid(m.g, "g", scenario)?;
                forbid(m.omega0, "omega0", scenario)?;
                if p.encoding != EncodingName::Phase {
                    return Err(config_err(format!("{scenario}: encoding must be \"phase\"")));
                }
            }
            ScenarioKind::Kerr => {
                require(m.chi, "chi", scenario)?;
                require(m.alpha0, "alpha0", scenario)?;
                forbid(m.g, "g", scenario)?;
                forbid(m.theta, "theta", scenario)?;
                forbid(m.beta0, "beta0", scenario)?;
                if p.encoding != EncodingName::Displacement {
                    return Err(config_err(format!(
                        "{scenario}: encoding must be \"displacement\""
                    )));
                }
            }
        }
        if let Some(vartheta) = m.vartheta {
            if !vartheta.is_finite() {
                return Err(config_err(format!("{scenario}: vartheta must be finite")));
            }
        }
        if let Some(omega0) = m.omega0 {
            if !omega0.is_finite() {
                return Err(config_err(format!("{scenario}: omega0 must be finite")));
            }
        }
        Ok(())
    }
}

/// One canonical config per scenario, embedded so `twqfi list` and the docs
/// always agree with the shipped files.
pub fn canonical_example(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::FlowField => include_str!("../../../../configs/flow-field.toml"),
        ScenarioKind::OpoUndepleted => include_str!("../../../../configs/opo-undepleted.toml"),
        ScenarioKind::PumpDepletion => include_str!("../../../../configs/pump-depletion.toml"),
        ScenarioKind::Kerr => include_str!("../../../../configs/kerr.toml"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_opo() -> String {
        r#"
scenario = "opo-undepleted"

[model]
g = 1.0
theta = 0.0
alpha0 = 10.0

[protocol]
t1_grid = [0.0, 0.5]
delta_t = 1.0
omega_op = 0.0
encoding = "phase"

[numerics]
trajectories = 100
seed = 1
"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = ScenarioConfig::from_toml(&minimal_opo()).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::OpoUndepleted);
        assert_eq!(cfg.numerics.steps_per_stage, DEFAULT_STEPS_PER_STAGE);
        assert_eq!(cfg.delta_omega(), 1e-4);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = minimal_opo().replace("seed = 1", "seed = 1\ntypo_key = 3");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn misspelled_model_key_is_rejected() {
        let text = minimal_opo().replace("g = 1.0", "gg = 1.0");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn inapplicable_model_key_is_rejected() {
        let text = minimal_opo().replace("g = 1.0", "g = 1.0\nchi = 1.0");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("chi"), "{err}");
    }

    #[test]
    fn missing_required_key_is_rejected() {
        let text = minimal_opo().replace("alpha0 = 10.0", "");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("alpha0"), "{err}");
    }

    #[test]
    fn non_ascending_grid_is_rejected() {
        let text = minimal_opo().replace("[0.0, 0.5]", "[0.5, 0.5]");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn wrong_encoding_for_scenario_is_rejected() {
        let text = minimal_opo().replace("\"phase\"", "\"displacement\"");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn canonical_examples_validate() {
        for kind in ScenarioKind::all() {
            let cfg = ScenarioConfig::from_toml(canonical_example(kind))
                .unwrap_or_else(|e| panic!("{kind}: {e}"));
            assert_eq!(cfg.scenario, kind);
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml(&minimal_opo()).unwrap();
        let echoed = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(echoed.numerics.trajectories, cfg.numerics.trajectories);
        assert_eq!(echoed.protocol.t1_grid, cfg.protocol.t1_grid);
    }
}
