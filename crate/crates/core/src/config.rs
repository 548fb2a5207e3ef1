//! Experiment configuration: file format, defaults, validation, and the
//! stable config hash stamped into output files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CoreError;
use crate::network::OutputFn;
use crate::selection::SpeciationParams;
use crate::task::{SegmentLengthMode, TaskKind};
use crate::variation::OperatorOverrides;

/// Feature toggles for the four mechanisms plus the two network variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureFlags {
    pub freezing: bool,
    pub scaffolding: bool,
    pub new_pathway: bool,
    pub output_fn: OutputFn,
    pub ctrnn: bool,
    pub sine_hidden: bool,
}

impl Default for FeatureFlags {
    fn default() -> Self {
        Self {
            freezing: true,
            scaffolding: true,
            new_pathway: true,
            output_fn: OutputFn::Sine,
            ctrnn: false,
            sine_hidden: false,
        }
    }
}

/// Which selection scheme drives reproduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub scheme: SelectionScheme,
    /// Parent fraction for truncation selection.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionScheme {
    Truncation,
    Speciation,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            scheme: SelectionScheme::Truncation,
            fraction: 0.05,
        }
    }
}

/// Everything a run needs; the TOML file mirrors this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub segment_length_mode: SegmentLengthMode,
    pub population: usize,
    pub generations: u64,
    pub seed: u64,
    /// Evaluate individuals in parallel; never changes results.
    pub parallel: bool,
    pub selection: SelectionConfig,
    pub features: FeatureFlags,
    pub parameters: Parameters,
    pub operators: OperatorOverrides,
}

/// Numeric parameters of the method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    /// Window size `c_m`: mutations touch only this many newest genes per group.
    pub mutable_window: usize,
    /// Steps each scaffolding input stays active.
    pub scaffold_period: u32,
    /// Scaffolding inputs are released this many at a time.
    pub scaffold_batch: u32,
    /// Segments generated before evolution starts.
    pub initial_segments: usize,
    /// Independent per-connection selection probability in weight change.
    /// The source method says only "a fraction"; 0.5 measured best here
    /// (grid over 0.1..1.0), and anything in 0.3..0.6 is close.
    pub weight_select_prob: f64,
    /// Best-genome snapshot interval in generations.
    pub snapshot_every: u64,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            mutable_window: 25,
            scaffold_period: 20,
            scaffold_batch: 5,
            initial_segments: 50,
            weight_select_prob: 0.5,
            snapshot_every: 100,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Planar,
            segment_length_mode: SegmentLengthMode::Fixed,
            population: 300,
            generations: 3500,
            seed: 1,
            parallel: true,
            selection: SelectionConfig::default(),
            features: FeatureFlags::default(),
            parameters: Parameters::default(),
            operators: OperatorOverrides::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML config, applying defaults for missing keys.
    pub fn from_toml_str(text: &str) -> Result<Self, CoreError> {
        let config: Self =
            toml::from_str(text).map_err(|e| CoreError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a TOML config and applies `key = value` overrides on top,
    /// where keys use dotted paths (`features.output_fn`). Values parse as
    /// TOML scalars, falling back to strings for bare words like `tanh`.
    pub fn from_toml_with_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<Self, CoreError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CoreError::InvalidConfig(e.to_string()))?;
        for (path, raw) in overrides {
            set_path(&mut table, path, raw)?;
        }
        let merged = toml::to_string(&table).expect("table serializes");
        Self::from_toml_str(&merged)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |msg: &str| Err(CoreError::InvalidConfig(msg.into()));
        if self.population == 0 {
            return bad("population must be at least 1");
        }
        if self.generations == 0 {
            return bad("generations must be at least 1");
        }
        if !(self.selection.fraction > 0.0 && self.selection.fraction <= 1.0) {
            return bad("selection.fraction must be in (0, 1]");
        }
        if self.parameters.mutable_window == 0 {
            return bad("parameters.mutable_window must be at least 1");
        }
        if self.parameters.scaffold_period == 0 {
            return bad("parameters.scaffold_period must be at least 1");
        }
        if self.parameters.scaffold_batch == 0 {
            return bad("parameters.scaffold_batch must be at least 1");
        }
        if self.parameters.initial_segments == 0 {
            return bad("parameters.initial_segments must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.parameters.weight_select_prob) {
            return bad("parameters.weight_select_prob must be in [0, 1]");
        }
        if self.parameters.snapshot_every == 0 {
            return bad("parameters.snapshot_every must be at least 1");
        }
        Ok(())
    }

    pub fn speciation_params(&self) -> SpeciationParams {
        SpeciationParams::default()
    }

    /// Short stable digest of the effective configuration. Covers only
    /// result-determining fields: the parallel/serial switch is normalized
    /// away since it never changes results.
    pub fn hash(&self) -> String {
        let mut canonical_config = self.clone();
        canonical_config.parallel = true;
        let canonical = serde_json::to_string(&canonical_config).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(24);
        for byte in digest.iter().take(6) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Parses `raw` as a TOML scalar, quoting it as a string when it is a bare
/// word (`tanh`, `2d`).
fn parse_scalar(raw: &str) -> Result<toml::Value, CoreError> {
    let try_parse = |text: &str| -> Option<toml::Value> {
        toml::from_str::<toml::Table>(&format!("v = {text}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
    };
    try_parse(raw)
        .or_else(|| try_parse(&format!("\"{}\"", raw.replace('"', "\\\""))))
        .ok_or_else(|| CoreError::InvalidConfig(format!("cannot parse override value {raw:?}")))
}

fn set_path(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), CoreError> {
    let mut current = table;
    let mut parts = path.split('.').peekable();
    loop {
        let part = parts
            .next()
            .ok_or_else(|| CoreError::InvalidConfig("empty override key".into()))?;
        if part.is_empty() {
            return Err(CoreError::InvalidConfig(format!("bad override key {path:?}")));
        }
        if parts.peek().is_none() {
            current.insert(part.to_string(), parse_scalar(raw)?);
            return Ok(());
        }
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CoreError::InvalidConfig(format!("override key {path:?} crosses a non-table value"))
            })?;
    }
}
