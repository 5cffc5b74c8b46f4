use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdeup_core::io::{read_series, write_series};
use serde_json::{json, Value};

fn pdeup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdeup"))
        .current_dir(dir)
        .env("PDEUP_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pdeup(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tiny_config(k: usize) -> Value {
    json!({
        "dataset": {"coarse_solve_n": 9, "input_grid_n": 8, "fine_grid_n": 16, "dt_coarse": 0.005,
                    "k": k, "n_steps": 6, "s_reported": 11.0},
        "model": {"n_blocks": 1, "layers_per_block": 2, "feature_channels": 4, "growth_channels": 4},
        "spatial": {"epochs": 3, "batch_size": 4, "checkpoint_every": 2},
        "temporal": {"epochs": 2, "batch_size": 4},
        "seed": 7
    })
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("run.json");
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn png_size(path: &Path) -> (u32, u32) {
    let b = fs::read(path).unwrap();
    assert_eq!(&b[1..4], b"PNG");
    let be = |o: usize| u32::from_be_bytes(b[o..o + 4].try_into().unwrap());
    (be(16), be(20))
}

#[test]
fn missing_config_key_is_named_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = tiny_config(2);
    v["dataset"].as_object_mut().unwrap().remove("dt_coarse");
    v["spatial"]["epochs"] = json!(-1);
    write_config(dir.path(), &v);
    let out = pdeup(dir.path(), &["solve", "-c", "run.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dataset.dt_coarse: missing required key"), "{err}");
    assert!(err.contains("spatial.epochs"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdeup(dir.path(), &["train", "temporal"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--spatial-ckpt"));

    let out = pdeup(dir.path(), &["evaluate", "--pred", "nope.fld", "--hr", "nope.fld"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.fld"));

    let out = pdeup(dir.path(), &["infer", "--no-temporal", "--lr", "x.fld", "--temporal-ckpt", "y"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let default: Value = serde_json::from_str(&ok(dir.path(), &["config", "default"])).unwrap();
    assert_eq!(default["dataset"]["fine_grid_n"], 64);
    assert_eq!(default["weights"]["lambda3"], 10.0);
    let schema: Value = serde_json::from_str(&ok(dir.path(), &["config", "schema"])).unwrap();
    assert_eq!(schema["required"], json!(["dataset"]));
    write_config(dir.path(), &tiny_config(2));
    let checked: Value = serde_json::from_str(&ok(dir.path(), &["config", "check", "run.json"])).unwrap();
    assert_eq!(checked["spatial"]["learning_rate"], 4e-4);
}

#[test]
fn solve_writes_series_with_the_configured_steps() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &tiny_config(3));
    ok(dir.path(), &["solve", "-c", "run.json", "-o", "data"]);
    let lr = read_series(dir.path().join("data/lr.fld")).unwrap();
    let hr = read_series(dir.path().join("data/hr.fld")).unwrap();
    assert_eq!((lr.len(), lr.grid().shape()), (7, (8, 8)));
    assert_eq!((hr.len(), hr.grid().shape()), (19, (16, 16)));
    assert!((hr.dt() - 0.005 / 3.0).abs() < 1e-15);
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("data/command.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 3);
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, &tiny_config(2));
    ok(d, &["solve", "-c", "run.json"]);

    let stdout = ok(d, &["train", "spatial", "-c", "run.json"]);
    let lines: Vec<Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l["total"].is_number() && l["lr"].is_number()));
    let log1 = fs::read(d.join("runs/spatial/train.log")).unwrap();
    assert_eq!(log1, stdout.as_bytes());

    ok(d, &["train", "spatial", "-c", "run.json", "-q", "-o", "runs/again"]);
    assert_eq!(fs::read(d.join("runs/again/train.log")).unwrap(), log1);
    let out = ok(d, &["train", "spatial", "-c", "run.json", "-q", "-o", "runs/seed8", "--seed", "8"]);
    assert!(out.is_empty());
    assert_ne!(fs::read(d.join("runs/seed8/train.log")).unwrap(), log1);

    ok(d, &["train", "temporal", "-c", "run.json", "-q", "--spatial-ckpt", "runs/spatial/final"]);
    let out = ok(d, &["infer", "-c", "run.json"]);
    assert!(out.starts_with("13 snapshots"), "{out}");
    ok(d, &["infer", "-c", "run.json", "--no-temporal", "-o", "runs/spatial_only.fld"]);
    assert_eq!(read_series(d.join("runs/spatial_only.fld")).unwrap().len(), 7);

    // A temporal bank trained on another spatial bank is refused.
    let out = pdeup(d, &["infer", "-c", "run.json", "--spatial-ckpt", "runs/seed8/final", "-o", "x.fld"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different spatial bank"));

    ok(d, &["evaluate", "-c", "run.json", "--lr", "data/lr.fld", "--horizon", "0.02"]);
    let eval: Value = serde_json::from_slice(&fs::read(d.join("runs/eval/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["framework"]["rows"].as_array().unwrap().len(), 5, "t >= 0.02 only");
    assert!(eval["baseline"]["rows"].is_array());
    assert!(eval["comparison"]["u_baseline_worse_fraction"].is_number());
    let csv = fs::read_to_string(d.join("runs/eval/errors.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,e_u,e_v,e_sxz,e_syz,method"));
    assert_eq!(csv.lines().count(), 1 + 2 * 5);

    let out = ok(d, &["plot", "-c", "run.json", "--t", "0.02", "--cell-px", "40"]);
    assert_eq!(out.lines().count(), 2);
    assert_eq!(png_size(&d.join("runs/eval/fields_t0.020.png")), (4 * 46 + 6, 4 * 46 + 6));
    assert!(d.join("runs/eval/errors.png").is_file());
    let out = pdeup(d, &["plot", "-c", "run.json", "--t", "0.0123"]);
    assert_eq!(out.status.code(), Some(2));

    ok(d, &["benchmark", "-c", "run.json", "--solve-repeats", "1", "--inference-repeats", "2"]);
    let timing: Value = serde_json::from_slice(&fs::read(d.join("runs/eval/timing.json")).unwrap()).unwrap();
    assert_eq!(timing["reference_speedup"], 2.72);
    assert_eq!(timing["threads"], 1);
}

#[test]
fn evaluating_the_reference_against_itself_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, &tiny_config(2));
    ok(d, &["solve", "-c", "run.json"]);
    let hr = read_series(d.join("data/hr.fld")).unwrap();
    write_series(&hr, d.join("copy.fld")).unwrap();
    ok(d, &["evaluate", "-c", "run.json", "--pred", "copy.fld", "-o", "ev"]);
    let eval: Value = serde_json::from_slice(&fs::read(d.join("ev/eval.json")).unwrap()).unwrap();
    for row in eval["framework"]["rows"].as_array().unwrap() {
        for e in row["e"].as_array().unwrap() {
            assert!(e.is_null() || e.as_f64() == Some(0.0), "{row}");
        }
    }
}

#[test]
fn resume_continues_to_the_same_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut cfg = tiny_config(2);
    cfg["spatial"]["epochs"] = json!(4);
    write_config(d, &cfg);
    ok(d, &["solve", "-c", "run.json"]);
    ok(d, &["train", "spatial", "-c", "run.json", "-q", "-o", "full"]);
    ok(d, &["train", "spatial", "-c", "run.json", "-q", "-o", "part", "--epochs", "2"]);
    ok(d, &["train", "spatial", "-c", "run.json", "-q", "-o", "part", "--resume", "part/final"]);
    assert_eq!(fs::read(d.join("full/train.log")).unwrap(), fs::read(d.join("part/train.log")).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, &tiny_config(2));
    ok(d, &["solve", "-c", "run.json"]);
    let train = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_pdeup"))
            .current_dir(d)
            .env("PDEUP_THREADS", threads)
            .args(["train", "spatial", "-c", "run.json", "-q", "-o", out])
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(d.join(out).join("train.log")).unwrap()
    };
    assert_eq!(train("1", "one"), train("4", "four"));
    let out = Command::new(env!("CARGO_BIN_EXE_pdeup")).current_dir(d).env("PDEUP_THREADS", "0").args(["config", "default"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn default_dataset_shapes_and_timelines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut cfg = serde_json::to_value(pdeup_cli::RunConfig::default()).unwrap();
    cfg["model"] = json!({"n_blocks": 1, "layers_per_block": 1, "feature_channels": 2, "growth_channels": 2});
    cfg["spatial"]["epochs"] = json!(1);
    cfg["temporal"]["epochs"] = json!(1);
    write_config(d, &cfg);
    let out = ok(d, &["solve", "-c", "run.json"]);
    assert_eq!(out.trim(), Path::new("data").join("dataset.json").display().to_string());
    let fmt = |p: &str| {
        let s = read_series(d.join(p)).unwrap();
        (s.len(), s.grid().shape(), s.dt())
    };
    assert_eq!(fmt("data/lr.fld"), (49, (32, 32), 0.005));
    assert_eq!(fmt("data/hr.fld"), (97, (64, 64), 0.0025));
    ok(d, &["train", "spatial", "-c", "run.json", "-q"]);
    ok(d, &["train", "temporal", "-c", "run.json", "-q", "--spatial-ckpt", "runs/spatial/final"]);
    ok(d, &["infer", "-c", "run.json"]);
    let (n, shape, dt) = fmt("runs/prediction.fld");
    assert_eq!((n, shape), (97, (64, 64)));
    assert!((dt - 0.0025).abs() < 1e-15);
    ok(d, &["infer", "-c", "run.json", "--no-temporal", "-o", "runs/s.fld"]);
    assert_eq!(fmt("runs/s.fld"), (49, (64, 64), 0.005));
    let pred = read_series(d.join("runs/prediction.fld")).unwrap();
    let g = *pred.grid();
    for s in pred.snapshots() {
        for ((j, i), u) in s.get(pdeup_core::Variable::U).indexed_iter() {
            if g.is_boundary(j, i) {
                assert_eq!(u.to_bits(), 0);
            }
        }
    }
    ok(d, &["plot", "-c", "run.json"]);
    assert_eq!(png_size(&d.join("runs/eval/fields_t0.140.png")), (4 * 166 + 6, 4 * 166 + 6));
}
