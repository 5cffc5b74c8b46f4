use pdeup_core::interp::bilinear_interpolate;
use pdeup_core::{Grid2D, SnapshotSeries, StateSnapshot};

use crate::error::{EvalError, Result};

/// Bilinear interpolation of every snapshot onto `fine`, with `k − 1`
/// snapshots linearly interpolated in time between consecutive ones.
pub fn baseline_bilinear(lr: &SnapshotSeries, k: usize, fine: &Grid2D) -> Result<SnapshotSeries> {
    if k == 0 {
        return Err(EvalError::Config("temporal factor k must be at least 1".into()));
    }
    let up = lr
        .snapshots()
        .iter()
        .map(|s| {
            let f = s.fields();
            let fields = [0, 1, 2, 3].map(|i| bilinear_interpolate(f[i].view(), lr.grid(), fine));
            let [a, b, c, d] = fields;
            Ok(StateSnapshot::from_fields_unchecked(s.t, [a?, b?, c?, d?]))
        })
        .collect::<Result<Vec<_>>>()?;
    let dt = lr.dt() / k as f64;
    let kf = k as f64;
    let mut out = Vec::with_capacity((up.len() - 1) * k + 1);
    for w in up.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        out.push(a.clone());
        for j in 1..k {
            let (wa, wb) = ((k - j) as f64, j as f64);
            let fields = std::array::from_fn(|v| {
                let (fa, fb) = (&a.fields()[v], &b.fields()[v]);
                ndarray::Zip::from(fa).and(fb).map_collect(|&x, &y| (wa * x + wb * y) / kf)
            });
            out.push(StateSnapshot::from_fields_unchecked(a.t + j as f64 * dt, fields));
        }
    }
    out.push(up.last().expect("series is non-empty").clone());
    Ok(SnapshotSeries::new(*fine, dt, out)?)
}
