use std::fs;
use std::path::Path;

use pdeup_core::dataset::{coarse_input_series, DatasetConfig};
use pdeup_core::loss::LossWeights;
use pdeup_core::{BoundaryInitialSpec, SnapshotSeries, Variable};
use pdeup_nn::{ModelKind, RdnConfig};
use pdeup_train::checkpoint::{check_architecture, final_dir, last_dir};
use pdeup_train::{
    load_checkpoint, predict_series, read_sidecar, save_checkpoint, sequential_batches, train_spatial, train_temporal,
    TrainConfig, TrainError, TrainOptions,
};

fn tiny_series(n_steps: usize) -> SnapshotSeries {
    let cfg = DatasetConfig {
        input_grid_n: 8,
        fine_grid_n: 16,
        n_steps,
        ..DatasetConfig::default()
    };
    coarse_input_series(&cfg).unwrap()
}

fn tiny_rdn(out_channels: usize, r: usize) -> RdnConfig {
    RdnConfig {
        n_blocks: 1,
        layers_per_block: 2,
        feature_channels: 4,
        growth_channels: 4,
        kernel_size: 3,
        upsample_ratio: r,
        in_channels: 2,
        out_channels,
    }
}

fn tiny_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 2,
        learning_rate: 1e-3,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

fn opts(dir: &Path) -> TrainOptions<'static> {
    TrainOptions {
        out_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn sampler_on_a_real_series() {
    let s = tiny_series(6);
    let b = sequential_batches(&s, 4).unwrap();
    assert_eq!(b, vec![vec![0, 1, 2, 3], vec![4, 5]]);
}

#[test]
fn spatial_training_reduces_the_loss_and_logs_every_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let lr = tiny_series(6);
    let out = train_spatial(&lr, &tiny_rdn(2, 2), &tiny_train(25), LossWeights::default(), opts(dir.path())).unwrap();
    let h = &out.state.history;
    assert_eq!(h.len(), 25);
    assert!(h[24].total < h[0].total, "{} -> {}", h[0].total, h[24].total);
    let log = fs::read_to_string(&out.log_path).unwrap();
    assert_eq!(log.lines().count(), 25);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["epoch", "step", "pde_within", "pde_across", "constraints", "ic", "total", "lr"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["step"], 3);
    for w in h.windows(2) {
        assert!(w[1].lr <= w[0].lr);
    }
    assert!(out.final_dir.join("model.json").exists());
    assert!(out.best_dir.join("params.bin").exists());
}

#[test]
fn zero_weights_leave_parameters_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let lr = tiny_series(4);
    let rdn = tiny_rdn(2, 2);
    let base = pdeup_nn::ModelBank::new(ModelKind::Spatial, &rdn, pdeup_nn::derive_seeds(0, ModelKind::Spatial)).unwrap();
    let out = train_spatial(&lr, &rdn, &tiny_train(3), LossWeights::ZERO, opts(dir.path())).unwrap();
    assert_eq!(out.state.bank.param_hash(), base.param_hash());
    assert!(out.state.history.iter().all(|r| r.total == 0.0));
}

#[test]
fn identical_seeds_give_identical_logs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let lr = tiny_series(5);
    let rdn = tiny_rdn(2, 2);
    let ra = train_spatial(&lr, &rdn, &tiny_train(4), LossWeights::default(), opts(a.path())).unwrap();
    let rb = train_spatial(&lr, &rdn, &tiny_train(4), LossWeights::default(), opts(b.path())).unwrap();
    assert_eq!(fs::read(&ra.log_path).unwrap(), fs::read(&rb.log_path).unwrap());
    let other = TrainConfig { seed: 9, ..tiny_train(4) };
    let c = tempfile::tempdir().unwrap();
    let rc = train_spatial(&lr, &rdn, &other, LossWeights::default(), opts(c.path())).unwrap();
    assert_ne!(fs::read(&ra.log_path).unwrap(), fs::read(&rc.log_path).unwrap());
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let lr = tiny_series(5);
    let rdn = tiny_rdn(2, 2);
    let full = tempfile::tempdir().unwrap();
    let rf = train_spatial(&lr, &rdn, &tiny_train(6), LossWeights::default(), opts(full.path())).unwrap();

    let part = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { checkpoint_every: 3, ..tiny_train(3) };
    train_spatial(&lr, &rdn, &cfg, LossWeights::default(), opts(part.path())).unwrap();
    let resumed = tempfile::tempdir().unwrap();
    let o = TrainOptions {
        out_dir: resumed.path().to_path_buf(),
        resume: Some(last_dir(part.path())),
        ..Default::default()
    };
    let rr = train_spatial(&lr, &rdn, &tiny_train(6), LossWeights::default(), o).unwrap();
    assert_eq!(rr.state.history[3], rf.state.history[3]);
    assert_eq!(fs::read(&rf.log_path).unwrap(), fs::read(&rr.log_path).unwrap());
    assert_eq!(rr.state.bank.param_hash(), rf.state.bank.param_hash());
}

#[test]
fn resume_refuses_changed_settings() {
    let lr = tiny_series(4);
    let rdn = tiny_rdn(2, 2);
    let a = tempfile::tempdir().unwrap();
    train_spatial(&lr, &rdn, &tiny_train(1), LossWeights::default(), opts(a.path())).unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = TrainOptions {
        out_dir: b.path().to_path_buf(),
        resume: Some(final_dir(a.path())),
        ..Default::default()
    };
    let cfg = TrainConfig { learning_rate: 2e-3, ..tiny_train(2) };
    match train_spatial(&lr, &rdn, &cfg, LossWeights::default(), o) {
        Err(TrainError::Incompatible(m)) => assert!(m.contains("learning_rate"), "{m}"),
        other => panic!("expected incompatibility, got {other:?}"),
    }
}

#[test]
fn checkpoint_round_trip_and_architecture_checks() {
    let lr = tiny_series(4);
    let rdn = tiny_rdn(2, 2);
    let dir = tempfile::tempdir().unwrap();
    let out = train_spatial(&lr, &rdn, &tiny_train(2), LossWeights::default(), opts(dir.path())).unwrap();
    let loaded = load_checkpoint(&out.final_dir).unwrap();
    for (a, b) in loaded.bank.models().iter().zip(out.state.bank.models()) {
        assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    for (a, b) in loaded.optimizers.iter().zip(&out.state.optimizers) {
        assert_eq!(a, b);
    }
    assert_eq!(loaded.scheduler, out.state.scheduler);
    assert_eq!((loaded.epoch, loaded.step), (2, 4));

    let sc = read_sidecar(&out.final_dir).unwrap();
    assert_eq!(sc.rdn, rdn);
    assert_eq!(sc.train.epochs, 2);
    assert_eq!(sc.variables, ["u", "v", "sigma_xz", "sigma_yz"]);

    let wider = RdnConfig { n_blocks: 2, ..rdn.clone() };
    match check_architecture(loaded.bank.kind(), loaded.bank.config(), ModelKind::Spatial, &wider) {
        Err(TrainError::Incompatible(m)) => assert!(m.contains("n_blocks: expected 2, checkpoint has 1"), "{m}"),
        other => panic!("expected incompatibility, got {other:?}"),
    }

    // Tampered parameters are detected through the sidecar hash.
    let copy = dir.path().join("copy");
    save_checkpoint(&loaded, &copy).unwrap();
    let blob = copy.join("params.bin");
    let mut bytes = fs::read(&blob).unwrap();
    bytes[3] ^= 1;
    fs::write(&blob, bytes).unwrap();
    assert!(matches!(load_checkpoint(&copy), Err(TrainError::Corrupt { .. })));
}

#[test]
fn temporal_stage_keeps_spatial_frozen_and_merges_timeline() {
    let lr = tiny_series(6);
    let dir = tempfile::tempdir().unwrap();
    let sp = train_spatial(&lr, &tiny_rdn(2, 2), &tiny_train(2), LossWeights::default(), opts(&dir.path().join("s"))).unwrap();
    let before = load_checkpoint(&sp.final_dir).unwrap().bank.param_hash();
    let tp = train_temporal(&lr, &sp.final_dir, &tiny_rdn(3, 1), &tiny_train(3), LossWeights::default(), 2, opts(&dir.path().join("t"))).unwrap();
    let after = load_checkpoint(&sp.final_dir).unwrap().bank.param_hash();
    assert_eq!(before, after);
    assert_eq!(tp.state.frozen_spatial_sha256.as_deref(), Some(before.as_str()));
    assert_eq!(tp.state.bank.n_outputs(), 3);
    assert!(tp.state.history.iter().all(|r| r.total.is_finite()));

    let spatial = load_checkpoint(&sp.final_dir).unwrap().bank;
    let temporal = load_checkpoint(&tp.final_dir).unwrap().bank;
    let bcs = BoundaryInitialSpec::default();
    let full = predict_series(&lr, &spatial, Some(&temporal), &bcs).unwrap();
    assert_eq!(full.len(), 6 * 2 + 1);
    assert!((full.dt() - 0.0025).abs() < 1e-15);
    assert_eq!(full.grid().shape(), (16, 16));
    let only = predict_series(&lr, &spatial, None, &bcs).unwrap();
    assert_eq!(only.len(), 7);
    for s in full.snapshots().iter().chain(only.snapshots()) {
        for var in [Variable::U, Variable::V] {
            let f = s.get(var);
            let (ny, nx) = f.dim();
            for j in 0..ny {
                for i in 0..nx {
                    if j == 0 || i == 0 || j == ny - 1 || i == nx - 1 {
                        assert_eq!(f[[j, i]].to_bits(), 0.0f64.to_bits());
                    }
                }
            }
        }
    }
}

#[test]
fn temporal_stage_rejects_mismatched_input_grid() {
    let lr = tiny_series(4);
    let dir = tempfile::tempdir().unwrap();
    let sp = train_spatial(&lr, &tiny_rdn(2, 2), &tiny_train(1), LossWeights::default(), opts(&dir.path().join("s"))).unwrap();
    let other = coarse_input_series(&DatasetConfig {
        input_grid_n: 10,
        fine_grid_n: 20,
        n_steps: 4,
        ..DatasetConfig::default()
    })
    .unwrap();
    let err = train_temporal(&other, &sp.final_dir, &tiny_rdn(3, 1), &tiny_train(1), LossWeights::default(), 2, opts(&dir.path().join("t")));
    assert!(matches!(err, Err(TrainError::Incompatible(_))), "{err:?}");
}

#[test]
fn non_finite_loss_aborts_with_dump() {
    let lr = tiny_series(4);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { learning_rate: 1e40, min_lr: 0.0, ..tiny_train(3) };
    match train_spatial(&lr, &tiny_rdn(2, 2), &cfg, LossWeights::default(), opts(dir.path())) {
        Err(TrainError::NonFinite { checkpoint, dump, .. }) => {
            assert!(dump.exists());
            let good = load_checkpoint(&checkpoint).unwrap();
            assert!(good.bank.models().iter().all(|m| m.params().iter().all(|p| p.is_finite())));
        }
        other => panic!("expected a non-finite abort, got {other:?}"),
    }
}
