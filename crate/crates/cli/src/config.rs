//! Layered configuration: the shipped defaults, then an optional user file,
//! then `--set key=value` overrides, all merged as TOML tables before a
//! single strict deserialization.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tbnode::integrator::{IntegratorConfig, Method};
use tbnode::model::{EpiState, ModelParams, SlirtExtension};
use tbnode::scenarios::ScenarioConfig;
use tbnode::training::TrainConfig;
use toml::{Table, Value};

use crate::Failure;

pub const DEFAULT_CONFIG: &str = include_str!("../default.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub model: ModelSection,
    pub slirt: SlirtSection,
    pub initial: InitialSection,
    pub integrator: IntegratorSection,
    pub simulate: SimulateSection,
    pub train: TrainSection,
    pub scenario: ScenarioSection,
    pub gradcheck: GradcheckSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub recruitment: f64,
    pub natural_mortality: f64,
    pub tb_mortality: f64,
    pub transmission: f64,
    pub progression: f64,
    pub recovery: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlirtSection {
    pub treatment_initiation: f64,
    pub relapse: f64,
    pub treatment_completion: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Dp45,
    Rk4,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: MethodName,
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Slir,
    Slirt,
    Pgnode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub model: ModelKind,
    pub model_file: PathBuf,
    pub t_start: f64,
    pub t_end: f64,
    pub output_step: f64,
    pub svg: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub observations: PathBuf,
    pub t_start: f64,
    pub horizon: f64,
    pub hidden: Vec<usize>,
    pub correction_cap: f64,
    pub learning_rate: f64,
    pub lambda_phys: f64,
    pub lambda_reg: f64,
    pub epochs: usize,
    pub grad_tolerance: f64,
    pub gradcheck: bool,
    pub gradcheck_probes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub horizon: f64,
    pub seasonal_amplitude: f64,
    pub intervention_onset: f64,
    pub intervention_end: f64,
    pub final_beta_multiplier: f64,
    pub strategy_ramp: f64,
    pub forecast_horizon: f64,
    pub incidence: String,
    pub output_step: f64,
    pub observation_step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub hidden: Vec<usize>,
    pub horizon: f64,
    pub observation_step: f64,
    pub beta_scale: f64,
    pub jitter: f64,
    pub probes: usize,
    pub sweep_rtols: Vec<f64>,
}

impl Config {
    /// Defaults, overlaid with `file` (if any), then `overrides`, then
    /// `seed` (if any).
    pub fn load(file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, Failure> {
        let mut table: Table = DEFAULT_CONFIG
            .parse()
            .map_err(|e| Failure::Internal(format!("built-in config is invalid: {e}")))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::User(format!("cannot read config {}: {e}", path.display())))?;
            let user: Table = text
                .parse()
                .map_err(|e| Failure::User(format!("malformed config {}: {e}", path.display())))?;
            merge(&mut table, user, "").map_err(Failure::User)?;
        }
        for item in overrides {
            apply_override(&mut table, item).map_err(Failure::User)?;
        }
        if let Some(seed) = seed {
            table.insert("seed".into(), Value::Integer(seed as i64));
        }
        let config: Config = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Failure::User(format!("invalid config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Failure> {
        self.params().validate()?;
        self.slirt().validate()?;
        self.integrator().validate()?;
        self.initial_state()?;
        self.scenario()?.validate()?;
        if !(self.simulate.output_step > 0.0) || !(self.simulate.t_end >= self.simulate.t_start) {
            return Err(Failure::User("simulate needs output_step > 0 and t_end >= t_start".into()));
        }
        if self.train.hidden.contains(&0) || self.gradcheck.hidden.contains(&0) {
            return Err(Failure::User("hidden layer widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            recruitment: m.recruitment,
            natural_mortality: m.natural_mortality,
            tb_mortality: m.tb_mortality,
            transmission: m.transmission,
            progression: m.progression,
            recovery: m.recovery,
        }
    }

    pub fn slirt(&self) -> SlirtExtension {
        SlirtExtension {
            treatment_initiation: self.slirt.treatment_initiation,
            relapse: self.slirt.relapse,
            treatment_completion: self.slirt.treatment_completion,
        }
    }

    /// The SLIR part of `[initial]`; `T` is only used by SLIRT runs.
    pub fn initial_state(&self) -> Result<EpiState, Failure> {
        let x = &self.initial;
        let state = EpiState::slir(x.s, x.l, x.i, x.r);
        if !state.is_non_negative() || !(x.t >= 0.0) || !(state.total() > 0.0) {
            return Err(Failure::User("initial compartments must be >= 0 with S+L+I+R > 0".into()));
        }
        Ok(state)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let i = &self.integrator;
        IntegratorConfig {
            method: match i.method {
                MethodName::Dp45 => Method::Dp45,
                MethodName::Rk4 => Method::Rk4,
            },
            rtol: i.rtol,
            atol: i.atol,
            h_init: i.h_init,
            h_max: i.h_max,
            max_steps: i.max_steps,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            lambda_phys: t.lambda_phys,
            lambda_reg: t.lambda_reg,
            epochs: t.epochs,
            grad_tolerance: t.grad_tolerance,
            seed: self.seed,
            integrator: self.integrator(),
            ..TrainConfig::default()
        }
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, Failure> {
        let s = &self.scenario;
        Ok(ScenarioConfig {
            params: self.params(),
            slirt: self.slirt(),
            initial: self.initial_state()?,
            horizon: s.horizon,
            seasonal_amplitude: s.seasonal_amplitude,
            intervention_onset: s.intervention_onset,
            intervention_end: s.intervention_end,
            final_beta_multiplier: s.final_beta_multiplier,
            strategy_ramp: s.strategy_ramp,
            forecast_horizon: s.forecast_horizon,
            incidence: s.incidence.parse()?,
            output_step: s.output_step,
            observation_step: s.observation_step,
            seed: self.seed,
        })
    }
}

fn merge(base: &mut Table, overlay: Table, prefix: &str) -> Result<(), String> {
    for (key, value) in overlay {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (Some(Value::Table(inner)), Value::Table(over)) => merge(inner, over, &path)?,
            (Some(Value::Table(_)), _) => return Err(format!("`{path}` must be a table")),
            (Some(slot), value) => *slot = value,
            (None, _) => return Err(format!("unknown config key `{path}`")),
        }
    }
    Ok(())
}

/// Applies one `section.key=value` override. The value is read as a TOML
/// literal, falling back to a bare string.
fn apply_override(table: &mut Table, item: &str) -> Result<(), String> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| format!("override `{item}` is not of the form key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| format!("empty key in `{item}`"))?;
    let mut cursor = table;
    for key in keys {
        cursor = match cursor.get_mut(key) {
            Some(Value::Table(inner)) => inner,
            _ => return Err(format!("unknown config key `{path}`")),
        };
    }
    match cursor.get_mut(last) {
        Some(Value::Table(_)) => Err(format!("`{path}` is a table, not a value")),
        Some(slot) => {
            *slot = coerce(slot, value);
            Ok(())
        }
        None => Err(format!("unknown config key `{path}`")),
    }
}

/// `--set model.transmission=5` should mean 5.0, not a type error.
fn coerce(existing: &Value, value: Value) -> Value {
    match (existing, value) {
        (Value::Float(_), Value::Integer(n)) => Value::Float(n as f64),
        (_, v) => v,
    }
}
