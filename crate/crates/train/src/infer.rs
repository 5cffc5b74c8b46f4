//! Running trained banks over a whole series and merging the timeline.

use pdeup_core::loss::enforce_hard_bc_in_place;
use pdeup_core::{BoundaryInitialSpec, Grid2D, SnapshotSeries, StateSnapshot};
use pdeup_nn::{ModelBank, ModelKind};

use crate::error::{Result, TrainError};

/// Grid produced by a spatial bank with ratio `r` from `input`.
pub fn upscaled_grid(input: &Grid2D, r: usize) -> Result<Grid2D> {
    Ok(Grid2D::new(input.n_x() * r, input.n_y() * r, input.domain())?)
}

fn check_kind(bank: &ModelBank, spatial: bool) -> Result<()> {
    match (bank.kind(), spatial) {
        (ModelKind::Spatial, true) | (ModelKind::Temporal { .. }, false) => Ok(()),
        (k, _) => Err(TrainError::Incompatible(format!(
            "expected a {} bank, got {k:?}",
            if spatial { "spatial" } else { "temporal" }
        ))),
    }
}

/// Runs `bank` on every consecutive pair of `inputs` and applies the hard
/// boundary conditions on `grid` to each emitted snapshot.
pub fn run_tuples(bank: &ModelBank, inputs: &[[StateSnapshot; 2]], grid: &Grid2D, bcs: &BoundaryInitialSpec) -> Result<Vec<Vec<StateSnapshot>>> {
    inputs
        .iter()
        .map(|pair| {
            let mut out = bank.predict(pair)?;
            for s in &mut out {
                if s.shape() != grid.shape() {
                    return Err(TrainError::Incompatible(format!(
                        "bank emits {:?} fields, target grid is {:?}",
                        s.shape(),
                        grid.shape()
                    )));
                }
                enforce_hard_bc_in_place(s, bcs, grid);
            }
            Ok(out)
        })
        .collect()
}

/// Consecutive pairs `(z_i, z_{i+1})` of a series.
pub fn series_pairs(series: &SnapshotSeries) -> Vec<[StateSnapshot; 2]> {
    series
        .snapshots()
        .windows(2)
        .map(|w| [w[0].clone(), w[1].clone()])
        .collect()
}

/// High-resolution snapshot pairs from the spatial bank, one per LR tuple.
pub fn spatial_pairs(bank: &ModelBank, lr: &SnapshotSeries, bcs: &BoundaryInitialSpec) -> Result<(Grid2D, Vec<[StateSnapshot; 2]>)> {
    check_kind(bank, true)?;
    let grid = upscaled_grid(lr.grid(), bank.config().upsample_ratio)?;
    let outs = run_tuples(bank, &series_pairs(lr), &grid, bcs)?;
    let pairs = outs
        .into_iter()
        .map(|o| {
            let mut it = o.into_iter();
            let a = it.next().expect("spatial bank emits two snapshots");
            let b = it.next().expect("spatial bank emits two snapshots");
            [a, b]
        })
        .collect();
    Ok((grid, pairs))
}

/// Flattens consecutive outputs into one timeline. Where two outputs share a
/// time the later output's snapshot is kept.
pub fn merge_timeline(outputs: Vec<Vec<StateSnapshot>>) -> Vec<StateSnapshot> {
    let n = outputs.len();
    let mut merged = Vec::new();
    for (i, mut out) in outputs.into_iter().enumerate() {
        if i + 1 < n {
            out.pop();
        }
        merged.extend(out);
    }
    merged
}

/// Full pipeline prediction for an LR series: spatial bank, then optionally
/// the temporal bank, merged into one uniformly spaced HR series.
pub fn predict_series(lr: &SnapshotSeries, spatial: &ModelBank, temporal: Option<&ModelBank>, bcs: &BoundaryInitialSpec) -> Result<SnapshotSeries> {
    let (grid, pairs) = spatial_pairs(spatial, lr, bcs)?;
    let (outputs, dt) = match temporal {
        None => (pairs.into_iter().map(Vec::from).collect(), lr.dt()),
        Some(tb) => {
            check_kind(tb, false)?;
            let k = tb.n_outputs() - 1;
            (run_tuples(tb, &pairs, &grid, bcs)?, lr.dt() / k as f64)
        }
    };
    Ok(SnapshotSeries::new(grid, dt, merge_timeline(outputs))?)
}
