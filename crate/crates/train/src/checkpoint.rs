//! Checkpoint directories: a JSON sidecar `model.json` plus `params.bin`,
//! which holds parameters and both Adam moments of every model as
//! little-endian f64, in variable order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pdeup_core::loss::{LossBreakdown, LossWeights};
use pdeup_core::{Grid2D, Variable, NUM_VARIABLES};
use pdeup_nn::{Adam, AffineNorm, ModelBank, ModelKind, RdnConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::TrainConfig;
use crate::error::{Result, TrainError};
use crate::schedule::ReduceOnPlateau;

pub const FORMAT_VERSION: u32 = 1;
pub const SIDECAR_FILE: &str = "model.json";
pub const BLOB_FILE: &str = "params.bin";

/// Grids and step of the data a bank was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub input_grid: Grid2D,
    pub output_grid: Grid2D,
    /// Step between the two snapshots of an input tuple.
    pub dt: f64,
    pub n_snapshots: usize,
}

/// One training-log line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: u64,
    pub pde_within: f64,
    pub pde_across: f64,
    pub constraints: f64,
    pub ic: f64,
    pub total: f64,
    pub lr: f64,
}

impl EpochRecord {
    pub fn new(epoch: usize, step: u64, b: &LossBreakdown, lr: f64) -> Self {
        Self {
            epoch,
            step,
            pde_within: b.pde_within,
            pde_across: b.pde_across,
            constraints: b.constraints,
            ic: b.ic,
            total: b.total,
            lr,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format_version: u32,
    pub kind: ModelKind,
    pub rdn: RdnConfig,
    pub variables: Vec<String>,
    pub seeds: [u64; NUM_VARIABLES],
    pub normalization: Vec<AffineNorm>,
    pub n_params_per_model: usize,
    pub param_sha256: String,
    pub epoch: usize,
    pub step: u64,
    pub adam_steps: u64,
    pub train: TrainConfig,
    pub weights: LossWeights,
    pub scheduler: ReduceOnPlateau,
    pub data: DataInfo,
    /// Parameter hash of the frozen spatial bank a temporal bank was trained on.
    pub frozen_spatial_sha256: Option<String>,
    pub history: Vec<EpochRecord>,
}

/// Everything needed to continue training bit-compatibly.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub bank: ModelBank,
    pub optimizers: Vec<Adam>,
    pub epoch: usize,
    pub step: u64,
    pub scheduler: ReduceOnPlateau,
    pub history: Vec<EpochRecord>,
    pub train: TrainConfig,
    pub weights: LossWeights,
    pub data: DataInfo,
    pub frozen_spatial_sha256: Option<String>,
}

impl TrainState {
    pub fn sidecar(&self) -> Sidecar {
        let bank = &self.bank;
        Sidecar {
            format_version: FORMAT_VERSION,
            kind: bank.kind(),
            rdn: bank.config().clone(),
            variables: Variable::ALL.iter().map(|v| v.name().to_string()).collect(),
            seeds: bank.seeds(),
            normalization: bank.models().iter().map(|m| m.norm()).collect(),
            n_params_per_model: bank.models()[0].n_params(),
            param_sha256: bank.param_hash(),
            epoch: self.epoch,
            step: self.step,
            adam_steps: self.optimizers.first().map_or(0, Adam::steps),
            train: self.train.clone(),
            weights: self.weights,
            scheduler: self.scheduler.clone(),
            data: self.data.clone(),
            frozen_spatial_sha256: self.frozen_spatial_sha256.clone(),
            history: self.history.clone(),
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| TrainError::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(|e| TrainError::io(path, e))
}

/// Writes the checkpoint into `dir`, replacing any previous content. The
/// files are first written to a sibling directory and then renamed.
pub fn save_checkpoint(state: &TrainState, dir: &Path) -> Result<()> {
    let tmp = dir.with_extension("partial");
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| TrainError::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| TrainError::io(&tmp, e))?;
    write_json(&tmp.join(SIDECAR_FILE), &state.sidecar())?;
    let blob = tmp.join(BLOB_FILE);
    let f = fs::File::create(&blob).map_err(|e| TrainError::io(&blob, e))?;
    let mut w = BufWriter::new(f);
    for (m, opt) in state.bank.models().iter().zip(&state.optimizers) {
        let (mm, vv) = opt.moments();
        for xs in [m.params(), mm, vv] {
            for x in xs {
                w.write_all(&x.to_le_bytes()).map_err(|e| TrainError::io(&blob, e))?;
            }
        }
    }
    w.flush().map_err(|e| TrainError::io(&blob, e))?;
    drop(w);
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| TrainError::io(dir, e))
}

/// Reads only the JSON sidecar of a checkpoint.
pub fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let path = dir.join(SIDECAR_FILE);
    let text = fs::read_to_string(&path).map_err(|e| TrainError::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| TrainError::Json { path: path.clone(), source })?;
    let version = value.get("format_version").and_then(serde_json::Value::as_u64);
    if version != Some(FORMAT_VERSION as u64) {
        return Err(TrainError::Incompatible(format!(
            "{}: format_version {:?}, this build reads {FORMAT_VERSION}",
            path.display(),
            version
        )));
    }
    serde_json::from_value(value).map_err(|source| TrainError::Json { path, source })
}

pub fn load_checkpoint(dir: &Path) -> Result<TrainState> {
    let sc = read_sidecar(dir)?;
    let corrupt = |msg: String| TrainError::Corrupt { path: dir.to_path_buf(), msg };
    let names: Vec<&str> = Variable::ALL.iter().map(|v| v.name()).collect();
    if sc.variables != names {
        return Err(corrupt(format!("variable order {:?}, expected {:?}", sc.variables, names)));
    }
    if sc.normalization.len() != NUM_VARIABLES {
        return Err(corrupt(format!("{} normalization entries", sc.normalization.len())));
    }
    let mut bank = ModelBank::new(sc.kind, &sc.rdn, sc.seeds)?;
    let n = bank.models()[0].n_params();
    if n != sc.n_params_per_model {
        return Err(corrupt(format!("sidecar lists {} parameters per model, architecture has {n}", sc.n_params_per_model)));
    }
    let blob_path = dir.join(BLOB_FILE);
    let bytes = fs::read(&blob_path).map_err(|e| TrainError::io(&blob_path, e))?;
    let want = NUM_VARIABLES * 3 * n * 8;
    if bytes.len() != want {
        return Err(corrupt(format!("{BLOB_FILE} has {} bytes, expected {want}", bytes.len())));
    }
    let mut floats = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut optimizers = Vec::with_capacity(NUM_VARIABLES);
    for (m, norm) in bank.models_mut().iter_mut().zip(&sc.normalization) {
        m.set_norm(*norm)?;
        for p in m.params_mut() {
            *p = floats.next().expect("length checked");
        }
        let mm: Vec<f64> = floats.by_ref().take(n).collect();
        let vv: Vec<f64> = floats.by_ref().take(n).collect();
        optimizers.push(Adam::from_parts(sc.adam_steps, mm, vv));
    }
    if bank.param_hash() != sc.param_sha256 {
        return Err(corrupt("parameter hash does not match the sidecar".into()));
    }
    Ok(TrainState {
        bank,
        optimizers,
        epoch: sc.epoch,
        step: sc.step,
        scheduler: sc.scheduler,
        history: sc.history,
        train: sc.train,
        weights: sc.weights,
        data: sc.data,
        frozen_spatial_sha256: sc.frozen_spatial_sha256,
    })
}

/// Field-by-field differences between two serializable configurations.
pub fn config_diff<T: Serialize>(expected: &T, found: &T) -> Vec<String> {
    let (a, b) = (
        serde_json::to_value(expected).expect("config serializes"),
        serde_json::to_value(found).expect("config serializes"),
    );
    let mut out = Vec::new();
    diff_values("", &a, &b, &mut out);
    out
}

fn diff_values(prefix: &str, a: &serde_json::Value, b: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match (x.get(k), y.get(k)) {
                    (Some(u), Some(v)) => diff_values(&p, u, v, out),
                    (u, v) => out.push(format!("{p}: expected {}, checkpoint has {}", show(u), show(v))),
                }
            }
        }
        _ if a != b => out.push(format!("{prefix}: expected {a}, checkpoint has {b}")),
        _ => {}
    }
}

fn show(v: Option<&serde_json::Value>) -> String {
    v.map_or_else(|| "nothing".to_string(), ToString::to_string)
}

/// Refuses a checkpoint whose architecture differs from `expected`.
pub fn check_architecture(state_kind: ModelKind, state_cfg: &RdnConfig, kind: ModelKind, expected: &RdnConfig) -> Result<()> {
    let mut diff = config_diff(expected, state_cfg);
    if kind != state_kind {
        diff.insert(0, format!("kind: expected {kind:?}, checkpoint has {state_kind:?}"));
    }
    if diff.is_empty() {
        Ok(())
    } else {
        Err(TrainError::Incompatible(diff.join("; ")))
    }
}

/// SHA-256 of a file, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| TrainError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Conventional checkpoint locations inside a run directory.
pub fn final_dir(out: &Path) -> PathBuf {
    out.join("final")
}

pub fn best_dir(out: &Path) -> PathBuf {
    out.join("best")
}

pub fn last_dir(out: &Path) -> PathBuf {
    out.join("last")
}
