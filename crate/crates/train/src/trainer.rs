use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pdeup_core::loss::{mask_boundary_gradient, LossBatch, LossBreakdown, LossWeights, OutputLayout, PhysicsLoss};
use pdeup_core::loss::enforce_hard_bc_in_place;
use pdeup_core::{BoundaryInitialSpec, Grid2D, SnapshotSeries, StateSnapshot, Variable};
use pdeup_nn::{derive_seeds, Adam, AffineNorm, ModelBank, ModelKind, RdnConfig};
use serde::Serialize;

use crate::checkpoint::{
    best_dir, check_architecture, config_diff, final_dir, last_dir, load_checkpoint, save_checkpoint, DataInfo, EpochRecord, TrainState,
};
use crate::config::{Stage, TrainConfig};
use crate::error::{Result, TrainError};
use crate::infer::{series_pairs, spatial_pairs, upscaled_grid};
use crate::sampler::batches_for;
use crate::schedule::ReduceOnPlateau;

pub const LOG_FILE: &str = "train.log";

/// Where a run writes its files and how it reports progress.
#[derive(Default)]
pub struct TrainOptions<'a> {
    pub out_dir: PathBuf,
    /// Checkpoint to continue from.
    pub resume: Option<PathBuf>,
    /// Called after every epoch with the logged record.
    pub on_epoch: Option<&'a mut dyn FnMut(&EpochRecord)>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub final_dir: PathBuf,
    pub best_dir: PathBuf,
    pub log_path: PathBuf,
}

struct StageData {
    inputs: Vec<[StateSnapshot; 2]>,
    layout: OutputLayout,
    dt: f64,
    endpoints: bool,
    loss: PhysicsLoss,
}

/// Stage 1: fit the spatial bank to the physics loss on the LR series.
pub fn train_spatial(lr: &SnapshotSeries, rdn: &RdnConfig, cfg: &TrainConfig, weights: LossWeights, opts: TrainOptions<'_>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cfg = TrainConfig { stage: Stage::Spatial, ..cfg.clone() };
    let grid = upscaled_grid(lr.grid(), rdn.upsample_ratio)?;
    let data = DataInfo {
        input_grid: *lr.grid(),
        output_grid: grid,
        dt: lr.dt(),
        n_snapshots: lr.len(),
    };
    let stage = StageData {
        inputs: series_pairs(lr),
        layout: OutputLayout::Spatial,
        dt: lr.dt(),
        endpoints: false,
        loss: make_loss(grid, weights, &cfg),
    };
    let state = initial_state(ModelKind::Spatial, rdn, &cfg, weights, data, None, &stage.inputs, &opts)?;
    run_stage(state, &stage, opts)
}

/// Stage 2: freeze the spatial bank from `spatial_ckpt` and fit a temporal
/// bank with `k` sub-steps on its outputs.
pub fn train_temporal(
    lr: &SnapshotSeries,
    spatial_ckpt: &Path,
    rdn: &RdnConfig,
    cfg: &TrainConfig,
    weights: LossWeights,
    k: usize,
    opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cfg = TrainConfig { stage: Stage::Temporal, ..cfg.clone() };
    let spatial = load_checkpoint(spatial_ckpt)?;
    if spatial.bank.kind() != ModelKind::Spatial {
        return Err(TrainError::Incompatible(format!(
            "{} holds a {:?} bank, a spatial bank is required",
            spatial_ckpt.display(),
            spatial.bank.kind()
        )));
    }
    if spatial.data.input_grid != *lr.grid() {
        return Err(TrainError::Incompatible(format!(
            "spatial bank was trained on {:?}, input series is on {:?}",
            spatial.data.input_grid,
            lr.grid()
        )));
    }
    if (spatial.data.dt - lr.dt()).abs() > 1e-12 * lr.dt() {
        return Err(TrainError::Incompatible(format!(
            "spatial bank was trained with dt {}, input series has dt {}",
            spatial.data.dt,
            lr.dt()
        )));
    }
    let frozen_hash = spatial.bank.param_hash();
    let bcs = BoundaryInitialSpec::default();
    let (grid, inputs) = spatial_pairs(&spatial.bank, lr, &bcs)?;
    let data = DataInfo {
        input_grid: grid,
        output_grid: grid,
        dt: lr.dt(),
        n_snapshots: lr.len(),
    };
    let stage = StageData {
        inputs,
        layout: OutputLayout::Temporal { k },
        dt: lr.dt(),
        endpoints: true,
        loss: make_loss(grid, weights, &cfg),
    };
    let state = initial_state(ModelKind::Temporal { k }, rdn, &cfg, weights, data, Some(frozen_hash.clone()), &stage.inputs, &opts)?;
    let out = run_stage(state, &stage, opts)?;
    if spatial.bank.param_hash() != frozen_hash {
        return Err(TrainError::Incompatible("spatial parameters changed during stage 2".into()));
    }
    Ok(out)
}

fn make_loss(grid: Grid2D, weights: LossWeights, cfg: &TrainConfig) -> PhysicsLoss {
    let mut loss = PhysicsLoss::new(grid, weights);
    loss.overlap_consistency = cfg.overlap_consistency;
    loss
}

/// Per-variable mean and standard deviation over all input snapshots.
fn input_stats(inputs: &[[StateSnapshot; 2]]) -> [AffineNorm; 4] {
    std::array::from_fn(|v| {
        let var = Variable::ALL[v];
        let vals: Vec<f64> = inputs.iter().flat_map(|p| p.iter()).flat_map(|s| s.get(var).iter().copied()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        AffineNorm {
            shift: mean,
            scale: if std > 1e-12 { std } else { 1.0 },
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn initial_state(
    kind: ModelKind,
    rdn: &RdnConfig,
    cfg: &TrainConfig,
    weights: LossWeights,
    data: DataInfo,
    frozen: Option<String>,
    inputs: &[[StateSnapshot; 2]],
    opts: &TrainOptions<'_>,
) -> Result<TrainState> {
    if let Some(path) = &opts.resume {
        let state = load_checkpoint(path)?;
        check_architecture(state.bank.kind(), state.bank.config(), kind, rdn)?;
        let mut diff = Vec::new();
        // The epoch budget and checkpoint cadence may change on resume.
        let mut theirs = state.train.clone();
        theirs.epochs = cfg.epochs;
        theirs.checkpoint_every = cfg.checkpoint_every;
        diff.extend(config_diff(cfg, &theirs).into_iter().map(|d| format!("train.{d}")));
        diff.extend(config_diff(&weights, &state.weights).into_iter().map(|d| format!("weights.{d}")));
        diff.extend(config_diff(&data, &state.data).into_iter().map(|d| format!("data.{d}")));
        if frozen != state.frozen_spatial_sha256 {
            diff.push("frozen spatial bank differs".into());
        }
        if !diff.is_empty() {
            return Err(TrainError::Incompatible(diff.join("; ")));
        }
        return Ok(TrainState { train: cfg.clone(), ..state });
    }
    let mut bank = ModelBank::new(kind, rdn, derive_seeds(cfg.seed, kind))?;
    if cfg.zero_init_head {
        bank.zero_heads();
    }
    if cfg.normalize_inputs {
        for (m, norm) in bank.models_mut().iter_mut().zip(input_stats(inputs)) {
            m.set_norm(norm)?;
        }
    }
    let optimizers = bank.models().iter().map(|m| Adam::new(m.n_params())).collect();
    Ok(TrainState {
        bank,
        optimizers,
        epoch: 0,
        step: 0,
        scheduler: ReduceOnPlateau::new(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr, cfg.plateau_threshold),
        history: Vec::new(),
        train: cfg.clone(),
        weights,
        data,
        frozen_spatial_sha256: frozen,
    })
}

fn create_log(path: &Path, history: &[EpochRecord]) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|e| TrainError::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in history {
        writeln!(w, "{}", r.to_json_line()).map_err(|e| TrainError::io(path, e))?;
    }
    w.flush().map_err(|e| TrainError::io(path, e))?;
    Ok(w)
}

fn run_stage(mut state: TrainState, stage: &StageData, mut opts: TrainOptions<'_>) -> Result<TrainOutcome> {
    let out = opts.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| TrainError::io(&out, e))?;
    let log_path = out.join(LOG_FILE);
    let mut log = create_log(&log_path, &state.history)?;
    let batches = batches_for(stage.inputs.len() + 1, state.train.batch_size)?;
    let starts_at_zero = stage.inputs[0][0].t.abs() <= 1e-12;
    let mut best = state.history.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
    let bcs = stage.loss.bcs.clone();
    let grid = stage.loss.grid;

    for epoch in state.epoch + 1..=state.train.epochs {
        let lr = state.scheduler.lr();
        let mut parts = Vec::with_capacity(batches.len());
        for (bi, batch) in batches.iter().enumerate() {
            let mut outputs = Vec::with_capacity(batch.len());
            let mut traces = Vec::with_capacity(batch.len());
            for &i in batch {
                let (mut out, trace) = state.bank.predict_traced(&stage.inputs[i])?;
                for s in &mut out {
                    enforce_hard_bc_in_place(s, &bcs, &grid);
                }
                outputs.push(out);
                traces.push(trace);
            }
            // The tuple before the batch is recomputed with the current
            // parameters so the link across the batch boundary is trained on
            // both sides.
            let previous = match batch[0] {
                0 => None,
                i => {
                    let (mut out, trace) = state.bank.predict_traced(&stage.inputs[i - 1])?;
                    for s in &mut out {
                        enforce_hard_bc_in_place(s, &bcs, &grid);
                    }
                    Some((out, trace))
                }
            };
            let range = batch[0]..batch[batch.len() - 1] + 1;
            let lb = LossBatch {
                layout: stage.layout,
                dt: stage.dt,
                outputs: &outputs,
                previous: previous.as_ref().map(|(out, _)| &out[..]),
                endpoint_inputs: stage.endpoints.then(|| &stage.inputs[range.clone()]),
                includes_initial: starts_at_zero && batch[0] == 0,
            };
            let ev = stage.loss.evaluate(&lb, true)?;
            let mut d_out = ev.grads.expect("gradients requested");
            let finite = ev.breakdown.is_finite() && d_out.iter().flatten().all(StateSnapshot::is_finite);
            if !finite {
                return Err(abort(&state, &out, epoch, bi, batch, &outputs, &ev.breakdown));
            }
            let mut grads = state.bank.zero_grads();
            for (d, trace) in d_out.iter_mut().zip(&traces) {
                for s in d.iter_mut() {
                    mask_boundary_gradient(s, &grid);
                }
                state.bank.backward(trace, d, &mut grads)?;
            }
            if let (Some((_, trace)), Some(mut d)) = (&previous, ev.previous_grad) {
                for s in d.iter_mut() {
                    mask_boundary_gradient(s, &grid);
                }
                state.bank.backward(trace, &d, &mut grads)?;
            }
            if !grads.iter().flatten().all(|g| g.is_finite()) {
                return Err(abort(&state, &out, epoch, bi, batch, &outputs, &ev.breakdown));
            }
            for ((m, opt), g) in state.bank.models_mut().iter_mut().zip(&mut state.optimizers).zip(&grads) {
                opt.step(m.params_mut(), g, lr);
            }
            state.step += 1;
            parts.push(ev.breakdown);
        }
        let mean = LossBreakdown::mean(&parts, &state.weights);
        let rec = EpochRecord::new(epoch, state.step, &mean, lr);
        writeln!(log, "{}", rec.to_json_line()).map_err(|e| TrainError::io(&log_path, e))?;
        log.flush().map_err(|e| TrainError::io(&log_path, e))?;
        if let Some(cb) = opts.on_epoch.as_mut() {
            cb(&rec);
        }
        state.history.push(rec);
        state.epoch = epoch;
        state.scheduler.step(mean.total);
        if mean.total < best {
            best = mean.total;
            save_checkpoint(&state, &best_dir(&out))?;
        }
        let every = state.train.checkpoint_every;
        if every > 0 && epoch % every == 0 {
            save_checkpoint(&state, &last_dir(&out))?;
        }
    }
    let fin = final_dir(&out);
    save_checkpoint(&state, &fin)?;
    if !best_dir(&out).exists() {
        save_checkpoint(&state, &best_dir(&out))?;
    }
    Ok(TrainOutcome {
        state,
        final_dir: fin,
        best_dir: best_dir(&out),
        log_path,
    })
}

#[derive(Serialize)]
struct OutputStats {
    t: f64,
    variable: &'static str,
    non_finite: usize,
    max_abs: f64,
}

#[derive(Serialize)]
struct BatchDump {
    epoch: usize,
    batch: usize,
    tuple_starts: Vec<usize>,
    loss: String,
    outputs: Vec<Vec<OutputStats>>,
}

/// Writes the pre-step state as `last_good` plus a description of the
/// offending batch, and builds the error to return.
fn abort(state: &TrainState, out: &Path, epoch: usize, batch: usize, starts: &[usize], outputs: &[Vec<StateSnapshot>], loss: &LossBreakdown) -> TrainError {
    let checkpoint = out.join("last_good");
    let dump = out.join("nonfinite_batch.json");
    let report = BatchDump {
        epoch,
        batch,
        tuple_starts: starts.to_vec(),
        loss: format!("{loss:?}"),
        outputs: outputs
            .iter()
            .map(|o| {
                o.iter()
                    .flat_map(|s| {
                        Variable::ALL.iter().map(move |&v| {
                            let f = s.get(v);
                            OutputStats {
                                t: s.t,
                                variable: v.name(),
                                non_finite: f.iter().filter(|x| !x.is_finite()).count(),
                                max_abs: f.iter().filter(|x| x.is_finite()).fold(0.0, |a, x| a.max(x.abs())),
                            }
                        })
                    })
                    .collect()
            })
            .collect(),
    };
    let mut frozen = state.clone();
    frozen.history.truncate(epoch - 1);
    if let Err(e) = save_checkpoint(&frozen, &checkpoint) {
        return e;
    }
    let text = serde_json::to_string_pretty(&report).expect("dump serializes");
    if let Err(e) = fs::write(&dump, text) {
        return TrainError::io(&dump, e);
    }
    TrainError::NonFinite { epoch, batch, checkpoint, dump }
}
