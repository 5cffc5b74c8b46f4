use std::time::Instant;

use pdeup_core::dataset::{interpolate_series, DatasetConfig};
use pdeup_core::solver::solve;
use pdeup_core::BoundaryInitialSpec;
use pdeup_nn::{ModelBank, ModelKind};
use pdeup_train::infer::{series_pairs, spatial_pairs};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Speed-up the reference study reports on its own hardware; echoed for
/// comparison only.
pub const REFERENCE_SPEEDUP: f64 = 2.72;

/// Mean wall-clock seconds per operation, excluding file I/O.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub solve_repeats: usize,
    pub inference_repeats: usize,
    pub coarse_solve_s: f64,
    /// Interpolation of the coarse solution onto the network input grid.
    pub input_interpolation_s: f64,
    pub fine_solve_s: f64,
    /// One spatial-bank call on one snapshot pair, all variables.
    pub spatial_inference_s: f64,
    pub temporal_inference_s: Option<f64>,
    pub spatial_calls: usize,
    pub temporal_calls: usize,
    /// Coarse solve + interpolation + every inference call for the horizon.
    pub pipeline_total_s: f64,
    /// Fine-solve time over pipeline total.
    pub speedup: f64,
    pub fine_over_coarse: f64,
    pub reference_speedup: f64,
    pub threads: usize,
}

fn mean_secs(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        total += t.elapsed().as_secs_f64();
    }
    Ok(total / repeats as f64)
}

/// Times the solves and the bank calls; runs are serialized.
pub fn benchmark(cfg: &DatasetConfig, spatial: &ModelBank, temporal: Option<&ModelBank>, solve_repeats: usize, inference_repeats: usize) -> Result<TimingReport> {
    cfg.validate()?;
    if solve_repeats == 0 || inference_repeats == 0 {
        return Err(EvalError::Config("repeat counts must be positive".into()));
    }
    if spatial.kind() != ModelKind::Spatial {
        return Err(EvalError::Config("first bank must be spatial".into()));
    }
    let coarse_cfg = cfg.coarse_solver();
    let fine_cfg = cfg.fine_solver();
    let coarse = solve(&coarse_cfg)?;
    let coarse_solve_s = mean_secs(solve_repeats, || {
        solve(&coarse_cfg)?;
        Ok(())
    })?;
    let input_interpolation_s = mean_secs(solve_repeats, || {
        interpolate_series(&coarse, cfg.input_grid_n)?;
        Ok(())
    })?;
    let fine_solve_s = mean_secs(solve_repeats, || {
        solve(&fine_cfg)?;
        Ok(())
    })?;

    let lr = interpolate_series(&coarse, cfg.input_grid_n)?;
    let pairs = series_pairs(&lr);
    let spatial_inference_s = mean_secs(inference_repeats, || {
        spatial.predict(&pairs[0])?;
        Ok(())
    })?;
    let temporal_inference_s = match temporal {
        None => None,
        Some(tb) => {
            let (_, hr) = spatial_pairs(spatial, &lr, &BoundaryInitialSpec::default())?;
            Some(mean_secs(inference_repeats, || {
                tb.predict(&hr[0])?;
                Ok(())
            })?)
        }
    };
    let calls = pairs.len();
    let temporal_calls = if temporal.is_some() { calls } else { 0 };
    let pipeline_total_s = coarse_solve_s
        + input_interpolation_s
        + calls as f64 * spatial_inference_s
        + temporal_calls as f64 * temporal_inference_s.unwrap_or(0.0);
    Ok(TimingReport {
        solve_repeats,
        inference_repeats,
        coarse_solve_s,
        input_interpolation_s,
        fine_solve_s,
        spatial_inference_s,
        temporal_inference_s,
        spatial_calls: calls,
        temporal_calls,
        pipeline_total_s,
        speedup: fine_solve_s / pipeline_total_s,
        fine_over_coarse: fine_solve_s / coarse_solve_s,
        reference_speedup: REFERENCE_SPEEDUP,
        threads: rayon::current_num_threads(),
    })
}
