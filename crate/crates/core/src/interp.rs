//! Bilinear resampling between structured grids.

use ndarray::{Array2, ArrayView2};

use crate::error::{FieldError, Result};
use crate::grid::Grid2D;

/// Locates coordinate `c` on an axis with origin `o`, spacing `h` and `n` nodes.
/// Returns the lower cell index and the fractional offset within that cell.
fn locate(c: f64, o: f64, h: f64, n: usize) -> Option<(usize, f64)> {
    let s = (c - o) / h;
    let slack = 1e-12 * (n as f64);
    if s < -slack || s > (n - 1) as f64 + slack {
        return None;
    }
    let s = s.clamp(0.0, (n - 1) as f64);
    let cell = (s.floor() as usize).min(n - 2);
    Some((cell, s - cell as f64))
}

/// Resamples `src`, defined on `src_grid`, onto the nodes of `dst_grid`.
///
/// Each destination value is the tensor-product linear combination of the
/// four surrounding source nodes, so nodes that coincide with source nodes
/// are reproduced exactly and affine fields are reproduced to rounding.
pub fn bilinear_interpolate(
    src: ArrayView2<f64>,
    src_grid: &Grid2D,
    dst_grid: &Grid2D,
) -> Result<Array2<f64>> {
    if src.dim() != src_grid.shape() {
        return Err(FieldError::Shape {
            what: "interpolation source".into(),
            expected: src_grid.shape(),
            got: src.dim(),
        });
    }
    let d = src_grid.domain();
    let (hx, hy) = (src_grid.spacing_x(), src_grid.spacing_y());
    let (sny, snx) = src_grid.shape();

    let mut cols = Vec::with_capacity(dst_grid.n_x());
    for i in 0..dst_grid.n_x() {
        let x = dst_grid.x(i);
        cols.push(locate(x, d.x0, hx, snx).ok_or(FieldError::OutOfDomain {
            x,
            y: dst_grid.y(0),
        })?);
    }
    let mut rows = Vec::with_capacity(dst_grid.n_y());
    for j in 0..dst_grid.n_y() {
        let y = dst_grid.y(j);
        rows.push(locate(y, d.y0, hy, sny).ok_or(FieldError::OutOfDomain {
            x: dst_grid.x(0),
            y,
        })?);
    }

    Ok(Array2::from_shape_fn(dst_grid.shape(), |(j, i)| {
        let (cj, wy) = rows[j];
        let (ci, wx) = cols[i];
        let lo = (1.0 - wx) * src[[cj, ci]] + wx * src[[cj, ci + 1]];
        let hi = (1.0 - wx) * src[[cj + 1, ci]] + wx * src[[cj + 1, ci + 1]];
        (1.0 - wy) * lo + wy * hi
    }))
}
