use pdeup_core::SnapshotSeries;

use crate::error::{Result, TrainError};

/// Start indices of the tuples `(i, i + 1)` in time order, chunked into
/// batches. No shuffling; every epoch sees the same order.
pub fn sequential_batches(series: &SnapshotSeries, batch_size: usize) -> Result<Vec<Vec<usize>>> {
    batches_for(series.len(), batch_size)
}

pub(crate) fn batches_for(n_snapshots: usize, batch_size: usize) -> Result<Vec<Vec<usize>>> {
    if n_snapshots < 2 {
        return Err(TrainError::Arity { needed: 2, got: n_snapshots });
    }
    if batch_size == 0 {
        return Err(TrainError::Config("batch_size must be at least 1".into()));
    }
    let starts: Vec<usize> = (0..n_snapshots - 1).collect();
    Ok(starts.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
