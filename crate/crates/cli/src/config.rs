//! Run configuration and its JSON schema.

use std::path::{Path, PathBuf};

use pdeup_core::dataset::DatasetConfig;
use pdeup_core::loss::LossWeights;
use pdeup_nn::RdnConfig;
use pdeup_train::{Stage, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: &str = include_str!("../schema/run_config.schema.json");

/// Architecture shared by the spatial and temporal banks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub n_blocks: usize,
    pub layers_per_block: usize,
    pub feature_channels: usize,
    pub growth_channels: usize,
    pub kernel_size: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let d = RdnConfig::default();
        Self {
            n_blocks: d.n_blocks,
            layers_per_block: d.layers_per_block,
            feature_channels: d.feature_channels,
            growth_channels: d.growth_channels,
            kernel_size: d.kernel_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub spatial_dir: PathBuf,
    pub temporal_dir: PathBuf,
    pub prediction: PathBuf,
    pub eval_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            spatial_dir: "runs/spatial".into(),
            temporal_dir: "runs/temporal".into(),
            prediction: "runs/prediction.fld".into(),
            eval_dir: "runs/eval".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ArchConfig,
    #[serde(default)]
    pub spatial: StageSettings,
    #[serde(default)]
    pub temporal: StageSettings,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub seed: u64,
}

/// A training section without `seed` and `stage`, which the run decides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    pub plateau_threshold: f64,
    pub overlap_consistency: bool,
    pub zero_init_head: bool,
    pub normalize_inputs: bool,
    pub checkpoint_every: usize,
}

impl Default for StageSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            plateau_patience: t.plateau_patience,
            plateau_factor: t.plateau_factor,
            min_lr: t.min_lr,
            plateau_threshold: t.plateau_threshold,
            overlap_consistency: t.overlap_consistency,
            zero_init_head: t.zero_init_head,
            normalize_inputs: t.normalize_inputs,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

impl StageSettings {
    pub fn train_config(&self, stage: Stage, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            plateau_patience: self.plateau_patience,
            plateau_factor: self.plateau_factor,
            min_lr: self.min_lr,
            plateau_threshold: self.plateau_threshold,
            seed,
            stage,
            overlap_consistency: self.overlap_consistency,
            zero_init_head: self.zero_init_head,
            normalize_inputs: self.normalize_inputs,
            checkpoint_every: self.checkpoint_every,
        }
    }
}


impl RunConfig {
    pub fn spatial_rdn(&self) -> RdnConfig {
        RdnConfig {
            n_blocks: self.model.n_blocks,
            layers_per_block: self.model.layers_per_block,
            feature_channels: self.model.feature_channels,
            growth_channels: self.model.growth_channels,
            kernel_size: self.model.kernel_size,
            upsample_ratio: self.dataset.upsample_ratio(),
            in_channels: 2,
            out_channels: 2,
        }
    }

    pub fn temporal_rdn(&self) -> RdnConfig {
        RdnConfig {
            upsample_ratio: 1,
            out_channels: self.dataset.k + 1,
            ..self.spatial_rdn()
        }
    }

    pub fn train_config(&self, stage: Stage) -> TrainConfig {
        match stage {
            Stage::Spatial => self.spatial.train_config(stage, self.seed),
            Stage::Temporal => self.temporal.train_config(stage, self.seed),
        }
    }

    /// Every semantic problem at once, one line per field.
    pub fn semantic_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if let Err(e) = self.dataset.validate() {
            errs.push(format!("dataset: {e}"));
        }
        if self.model.kernel_size.is_multiple_of(2) {
            errs.push(format!("model.kernel_size: must be odd, got {}", self.model.kernel_size));
        }
        for stage in [Stage::Spatial, Stage::Temporal] {
            if let Err(e) = self.train_config(stage).validate() {
                errs.push(format!("{}: {e}", stage.name()));
            }
        }
        if !self.weights.is_valid() {
            errs.push("weights: must be finite and non-negative".into());
        }
        errs
    }
}

fn type_ok(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "integer" => v.is_u64() || v.is_i64(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "string" => v.is_string(),
        _ => true,
    }
}

fn resolve<'a>(root: &'a Value, schema: &'a Value) -> &'a Value {
    match schema.get("$ref").and_then(Value::as_str) {
        Some(r) => r
            .strip_prefix("#/")
            .map(|p| p.split('/').fold(root, |node, key| &node[key]))
            .unwrap_or(schema),
        None => schema,
    }
}

fn check(root: &Value, schema: &Value, v: &Value, path: &str, errs: &mut Vec<String>) {
    let schema = resolve(root, schema);
    let at = if path.is_empty() { "<root>" } else { path };
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        if !type_ok(ty, v) {
            errs.push(format!("{at}: expected {ty}, got {v}"));
            return;
        }
    }
    if let (Some(min), Some(x)) = (schema.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        if x < min {
            errs.push(format!("{at}: must be >= {min}, got {v}"));
        }
    }
    if let (Some(min), Some(x)) = (schema.get("exclusiveMinimum").and_then(Value::as_f64), v.as_f64()) {
        if x <= min {
            errs.push(format!("{at}: must be > {min}, got {v}"));
        }
    }
    let Some(obj) = v.as_object() else { return };
    let props = schema.get("properties").and_then(Value::as_object);
    for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
        let key = key.as_str().unwrap_or_default();
        if !obj.contains_key(key) {
            errs.push(format!("{}: missing required key", join(path, key)));
        }
    }
    for (key, val) in obj {
        match props.and_then(|p| p.get(key)) {
            Some(sub) => check(root, sub, val, &join(path, key), errs),
            None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                errs.push(format!("{}: unknown key", join(path, key)));
            }
            None => {}
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Schema violations of a parsed JSON document, all of them.
pub fn schema_errors(v: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let mut errs = Vec::new();
    check(&schema, &schema, v, "", &mut errs);
    errs
}

/// Parses and checks a configuration document. Every violation found is
/// reported, one per line.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<String>> {
    let v: Value = serde_json::from_str(text).map_err(|e| vec![format!("invalid JSON: {e}")])?;
    let errs = schema_errors(&v);
    if !errs.is_empty() {
        return Err(errs);
    }
    let cfg: RunConfig = serde_json::from_value(v).map_err(|e| vec![e.to_string()])?;
    let errs = cfg.semantic_errors();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
    parse_config(&text).map_err(|errs| errs.into_iter().map(|e| format!("{}: {e}", path.display())).collect())
}
