use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pdeup_core::dataset::{generate_dataset, HR_FILE, LR_FILE};
use pdeup_core::io::{read_series, write_series};
use pdeup_core::{BoundaryInitialSpec, SnapshotSeries, Variable};
use pdeup_eval::plot::{error_curves, heatmap_panel};
use pdeup_eval::{baseline_bilinear, benchmark, compare, evaluate_run, write_outputs, EvalOutput, TimingReport, EVAL_JSON, TIME_TOL};
use pdeup_nn::{ModelBank, ModelKind};
use pdeup_train::checkpoint::{final_dir, SIDECAR_FILE};
use pdeup_train::{load_checkpoint, predict_series, train_spatial, train_temporal, EpochRecord, Stage, TrainOptions, TrainState};
use serde_json::json;

use crate::args::*;
use crate::config::{load_config, RunConfig, SCHEMA};
use crate::error::{CliError, Result};
use crate::manifest::{CommandManifest, MANIFEST_FILE};

pub const TIMING_JSON: &str = "timing.json";

fn config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(p) => load_config(p).map_err(|errs| CliError::usage(errs.join("\n"))),
        None => Ok(RunConfig::default()),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} not found: {}", path.display())))
    }
}

fn require_checkpoint(path: &Path, what: &str) -> Result<()> {
    require_file(&path.join(SIDECAR_FILE), what)
}

fn read(path: &Path, what: &str) -> Result<SnapshotSeries> {
    require_file(path, what)?;
    Ok(read_series(path)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(CliError::Runtime)
}

fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn checkpoint_files(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join(SIDECAR_FILE), dir.join(pdeup_train::checkpoint::BLOB_FILE)]
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Train(TrainCommand::Spatial(a)) => train(a, None),
        Command::Train(TrainCommand::Temporal(a)) => train(a.train, Some(a.spatial_ckpt)),
        Command::Infer(a) => infer(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => bench(a),
        Command::Plot(a) => plot(a),
        Command::Config(c) => config_cmd(c),
    }
}

fn solve(a: SolveArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    let out = a.common.out.clone().unwrap_or_else(|| cfg.paths.data_dir.clone());
    let paths = generate_dataset(&cfg.dataset, &out)?;
    CommandManifest::new("solve", &cfg, json!({ "out": out })).write(
        &[],
        &[paths.lr.clone(), paths.hr.clone(), paths.manifest.clone()],
        &out.join(MANIFEST_FILE),
    )?;
    println!("{}", paths.manifest.display());
    Ok(())
}

fn train(a: TrainArgs, spatial_ckpt: Option<PathBuf>) -> Result<()> {
    let mut cfg = config(&a.common)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let stage = if spatial_ckpt.is_some() { Stage::Temporal } else { Stage::Spatial };
    if let Some(e) = a.epochs {
        match stage {
            Stage::Spatial => cfg.spatial.epochs = e,
            Stage::Temporal => cfg.temporal.epochs = e,
        }
    }
    let tc = cfg.train_config(stage);
    tc.validate()?;
    let lr_path = a.lr.clone().unwrap_or_else(|| cfg.paths.data_dir.join(LR_FILE));
    let lr = read(&lr_path, "input series")?;
    if let Some(r) = &a.resume {
        require_checkpoint(r, "resume checkpoint")?;
    }
    let out = a.common.out.clone().unwrap_or_else(|| match stage {
        Stage::Spatial => cfg.paths.spatial_dir.clone(),
        Stage::Temporal => cfg.paths.temporal_dir.clone(),
    });
    let quiet = a.quiet;
    let mut print = |r: &EpochRecord| {
        if !quiet {
            println!("{}", r.to_json_line());
        }
    };
    let opts = TrainOptions { out_dir: out.clone(), resume: a.resume.clone(), on_epoch: Some(&mut print) };
    let mut inputs = vec![lr_path.clone()];
    let outcome = match &spatial_ckpt {
        None => train_spatial(&lr, &cfg.spatial_rdn(), &tc, cfg.weights, opts)?,
        Some(ckpt) => {
            require_checkpoint(ckpt, "spatial checkpoint")?;
            inputs.extend(checkpoint_files(ckpt));
            train_temporal(&lr, ckpt, &cfg.temporal_rdn(), &tc, cfg.weights, cfg.dataset.k, opts)?
        }
    };
    if let Some(r) = &a.resume {
        inputs.extend(checkpoint_files(r));
    }
    let mut outputs = checkpoint_files(&outcome.final_dir);
    outputs.extend(checkpoint_files(&outcome.best_dir));
    outputs.push(outcome.log_path.clone());
    let settings = json!({
        "stage": stage.name(),
        "lr": lr_path,
        "out": out,
        "resume": a.resume,
        "spatial_ckpt": spatial_ckpt,
        "train": tc,
    });
    CommandManifest::new(&format!("train {}", stage.name()), &cfg, settings).write(&inputs, &outputs, &out.join(MANIFEST_FILE))?;
    Ok(())
}

fn load_bank(dir: &Path, what: &str) -> Result<TrainState> {
    require_checkpoint(dir, what)?;
    Ok(load_checkpoint(dir)?)
}

/// Loads the banks for `lr` and checks that they fit together.
fn load_banks(lr: &SnapshotSeries, spatial_dir: &Path, temporal_dir: Option<&Path>) -> Result<(ModelBank, Option<ModelBank>)> {
    let spatial = load_bank(spatial_dir, "spatial checkpoint")?;
    if spatial.bank.kind() != ModelKind::Spatial {
        return Err(CliError::usage(format!("{} does not hold a spatial bank", spatial_dir.display())));
    }
    if spatial.data.input_grid != *lr.grid() {
        return Err(CliError::usage(format!(
            "spatial bank expects input grid {:?}, series is on {:?}",
            spatial.data.input_grid,
            lr.grid()
        )));
    }
    let temporal = match temporal_dir {
        None => None,
        Some(dir) => {
            let t = load_bank(dir, "temporal checkpoint")?;
            if !matches!(t.bank.kind(), ModelKind::Temporal { .. }) {
                return Err(CliError::usage(format!("{} does not hold a temporal bank", dir.display())));
            }
            if t.frozen_spatial_sha256.as_deref() != Some(spatial.bank.param_hash().as_str()) {
                return Err(CliError::usage(format!(
                    "temporal bank in {} was trained on a different spatial bank than {}",
                    dir.display(),
                    spatial_dir.display()
                )));
            }
            if t.data.input_grid != spatial.data.output_grid {
                return Err(CliError::usage(format!(
                    "temporal bank expects grid {:?}, spatial bank produces {:?}",
                    t.data.input_grid, spatial.data.output_grid
                )));
            }
            Some(t.bank)
        }
    };
    Ok((spatial.bank, temporal))
}

fn bank_dirs(cfg: &RunConfig, spatial: &Option<PathBuf>, temporal: &Option<PathBuf>, no_temporal: bool) -> (PathBuf, Option<PathBuf>) {
    let s = spatial.clone().unwrap_or_else(|| final_dir(&cfg.paths.spatial_dir));
    let t = if no_temporal {
        None
    } else {
        Some(temporal.clone().unwrap_or_else(|| final_dir(&cfg.paths.temporal_dir)))
    };
    (s, t)
}

fn infer(a: InferArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    let lr_path = a.lr.clone().unwrap_or_else(|| cfg.paths.data_dir.join(LR_FILE));
    let lr = read(&lr_path, "input series")?;
    let (sdir, tdir) = bank_dirs(&cfg, &a.spatial_ckpt, &a.temporal_ckpt, a.no_temporal);
    let (spatial, temporal) = load_banks(&lr, &sdir, tdir.as_deref())?;
    let pred = predict_series(&lr, &spatial, temporal.as_ref(), &BoundaryInitialSpec::default())?;
    let out = a.common.out.clone().unwrap_or_else(|| cfg.paths.prediction.clone());
    create_dir(&parent_dir(&out))?;
    write_series(&pred, &out)?;
    let mut inputs = vec![lr_path.clone()];
    inputs.extend(checkpoint_files(&sdir));
    if let Some(t) = &tdir {
        inputs.extend(checkpoint_files(t));
    }
    let settings = json!({ "lr": lr_path, "spatial_ckpt": sdir, "temporal_ckpt": tdir, "out": out });
    let manifest = out.with_file_name(format!("{}.{MANIFEST_FILE}", out.file_name().unwrap_or_default().to_string_lossy()));
    CommandManifest::new("infer", &cfg, settings).write(&inputs, std::slice::from_ref(&out), &manifest)?;
    println!("{} snapshots -> {}", pred.len(), out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    let pred_path = a.pred.clone().unwrap_or_else(|| cfg.paths.prediction.clone());
    let hr_path = a.hr.clone().unwrap_or_else(|| cfg.paths.data_dir.join(HR_FILE));
    let pred = read(&pred_path, "prediction")?;
    let hr = read(&hr_path, "reference series")?;
    let framework = evaluate_run(&pred, &hr, a.t_min, a.horizon, "framework")?;
    let mut inputs = vec![pred_path.clone(), hr_path.clone()];
    let (baseline, comparison) = match &a.lr {
        None => (None, None),
        Some(p) => {
            let lr = read(p, "input series")?;
            inputs.push(p.clone());
            let k = (lr.dt() / pred.dt()).round() as usize;
            let bl = baseline_bilinear(&lr, k.max(1), pred.grid())?;
            let bl = evaluate_run(&bl, &hr, a.t_min, a.horizon, "bilinear")?;
            let cmp = compare(&framework, &bl, a.t_min, a.t_max);
            (Some(bl), Some(cmp))
        }
    };
    let timing = match &a.timing {
        None => None,
        Some(p) => {
            require_file(p, "timing report")?;
            inputs.push(p.clone());
            let text = fs::read_to_string(p)?;
            let t: TimingReport = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Some(t)
        }
    };
    let report = EvalOutput { framework, baseline, comparison, timing };
    let out = a.common.out.clone().unwrap_or_else(|| cfg.paths.eval_dir.clone());
    write_outputs(&report, &out)?;
    let settings = json!({ "pred": pred_path, "hr": hr_path, "lr": a.lr, "t_min": a.t_min, "t_max": a.t_max, "horizon": a.horizon, "timing": a.timing });
    let outputs = [out.join(EVAL_JSON), out.join(pdeup_eval::ERRORS_CSV)];
    CommandManifest::new("evaluate", &cfg, settings).write(&inputs, &outputs, &out.join(MANIFEST_FILE))?;
    for (i, var) in Variable::ALL.iter().enumerate() {
        let max = report.framework.max_error[i].map_or("undefined".to_string(), |e| format!("{e:.4e}"));
        println!("{}: max relative error {max}", var.name());
    }
    if let Some(c) = &report.comparison {
        println!("baseline worse on {:.1}% of u steps in [{}, {}]", 100.0 * c.u_baseline_worse_fraction, c.t_lo, c.t_hi);
    }
    Ok(())
}

fn bench(a: BenchmarkArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    if a.solve_repeats == 0 || a.inference_repeats == 0 {
        return Err(CliError::usage("repeat counts must be >= 1"));
    }
    let (sdir, tdir) = bank_dirs(&cfg, &a.spatial_ckpt, &a.temporal_ckpt, a.no_temporal);
    let lr = pdeup_core::dataset::coarse_input_series(&cfg.dataset)?;
    let (spatial, temporal) = load_banks(&lr, &sdir, tdir.as_deref())?;
    let report = benchmark(&cfg.dataset, &spatial, temporal.as_ref(), a.solve_repeats, a.inference_repeats)?;
    let out = a.common.out.clone().unwrap_or_else(|| cfg.paths.eval_dir.clone());
    create_dir(&out)?;
    let path = out.join(TIMING_JSON);
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.into()))?;
    fs::write(&path, text + "\n")?;
    let mut inputs = checkpoint_files(&sdir);
    if let Some(t) = &tdir {
        inputs.extend(checkpoint_files(t));
    }
    let settings = json!({ "spatial_ckpt": sdir, "temporal_ckpt": tdir, "solve_repeats": a.solve_repeats, "inference_repeats": a.inference_repeats });
    CommandManifest::new("benchmark", &cfg, settings).write(&inputs, &[], &out.join("benchmark.command.json"))?;
    println!(
        "speed-up {:.3} (fine {:.4e} s, pipeline {:.4e} s, {} threads; reference {})",
        report.speedup, report.fine_solve_s, report.pipeline_total_s, report.threads, report.reference_speedup
    );
    Ok(())
}

fn snapshot_at(series: &SnapshotSeries, t: f64, what: &str) -> Result<usize> {
    series
        .times()
        .iter()
        .position(|&s| (s - t).abs() <= TIME_TOL.max(1e-9 * t.abs()))
        .ok_or_else(|| {
            let times = series.times();
            CliError::usage(format!(
                "{what} has no snapshot at t = {t} (t0 = {}, dt = {}, last = {})",
                series.t0(),
                series.dt(),
                times.last().copied().unwrap_or(f64::NAN)
            ))
        })
}

fn plot(a: PlotArgs) -> Result<()> {
    let cfg = config(&a.common)?;
    let lr_path = a.lr.clone().unwrap_or_else(|| cfg.paths.data_dir.join(LR_FILE));
    let hr_path = a.hr.clone().unwrap_or_else(|| cfg.paths.data_dir.join(HR_FILE));
    let pred_path = a.pred.clone().unwrap_or_else(|| cfg.paths.prediction.clone());
    let lr = read(&lr_path, "input series")?;
    let hr = read(&hr_path, "reference series")?;
    let pred = read(&pred_path, "prediction")?;
    if pred.grid() != hr.grid() {
        return Err(CliError::usage(format!("prediction grid {:?} differs from reference grid {:?}", pred.grid(), hr.grid())));
    }
    let k = (lr.dt() / pred.dt()).round().max(1.0) as usize;
    let bl = baseline_bilinear(&lr, k, pred.grid())?;
    let pick = |series: &SnapshotSeries, what: &str| snapshot_at(series, a.t, what).map(|i| series.snapshots()[i].clone());
    let snaps = [pick(&lr, "input series")?, pick(&hr, "reference series")?, pick(&pred, "prediction")?, pick(&bl, "baseline")?];
    // Rows are variables; columns are input, reference, framework, bilinear.
    let cells: Vec<Vec<_>> = Variable::ALL.iter().map(|&v| snaps.iter().map(|s| Some(s.get(v).view())).collect()).collect();
    let out = a.common.out.clone().unwrap_or_else(|| cfg.paths.eval_dir.clone());
    create_dir(&out)?;
    let panel = out.join(format!("fields_t{:.3}.png", a.t));
    heatmap_panel(&cells, a.cell_px, &panel)?;
    let mut outputs = vec![panel.clone()];
    let mut inputs = vec![lr_path.clone(), hr_path.clone(), pred_path.clone()];
    let eval = a.eval.clone().or_else(|| Some(cfg.paths.eval_dir.join(EVAL_JSON)).filter(|p| p.is_file()));
    if let Some(p) = &eval {
        require_file(p, "evaluation report")?;
        let text = fs::read_to_string(p)?;
        let report: EvalOutput = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
        let reports: Vec<_> = std::iter::once(&report.framework).chain(report.baseline.as_ref()).collect();
        let curves = out.join("errors.png");
        error_curves(&reports, &curves)?;
        inputs.push(p.clone());
        outputs.push(curves);
    }
    let settings = json!({ "lr": lr_path, "hr": hr_path, "pred": pred_path, "eval": eval, "t": a.t, "cell_px": a.cell_px });
    CommandManifest::new("plot", &cfg, settings).write(&inputs, &outputs, &out.join("plot.command.json"))?;
    for o in &outputs {
        println!("{}", o.display());
    }
    Ok(())
}

fn config_cmd(c: ConfigCommand) -> Result<()> {
    match c {
        ConfigCommand::Default => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes"));
        }
        ConfigCommand::Schema => print!("{SCHEMA}"),
        ConfigCommand::Check { path } => {
            let cfg = load_config(&path).map_err(|errs| CliError::usage(errs.join("\n")))?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        }
    }
    Ok(())
}
