//! Fourth-order finite-difference first derivatives on uniform grids.
//!
//! Interior nodes use the centred five-point stencil. The two node layers
//! next to each end use five-point one-sided stencils (offsets `0..=4` and
//! `-1..=3`, mirrored at the far end), which keeps formal order four up to
//! the boundary without ghost nodes.

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis as NdAxis};

use crate::error::{FieldError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

pub const MIN_EXTENT: usize = 5;

/// Stencil weights, in units of `1/(12h)`.
const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const EDGE: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const NEAR_EDGE: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

/// First input index and weights (scaled by `1/(12h)`) for output node `i` of `n`.
#[inline]
fn row(i: usize, n: usize) -> (usize, [f64; 5]) {
    let mirror = |w: [f64; 5]| {
        let mut m = [0.0; 5];
        for (k, v) in w.iter().enumerate() {
            m[4 - k] = -v;
        }
        m
    };
    match i {
        0 => (0, EDGE),
        1 => (0, NEAR_EDGE),
        _ if i + 2 == n => (n - 5, mirror(NEAR_EDGE)),
        _ if i + 1 == n => (n - 5, mirror(EDGE)),
        _ => (i - 2, CENTRAL),
    }
}

fn extent(shape: (usize, usize), axis: Axis) -> usize {
    match axis {
        Axis::X => shape.1,
        Axis::Y => shape.0,
    }
}

fn lanes_axis(axis: Axis) -> NdAxis {
    match axis {
        Axis::X => NdAxis(1),
        Axis::Y => NdAxis(0),
    }
}

/// `∂f/∂axis` at every node.
pub fn fd_deriv(field: ArrayView2<f64>, axis: Axis, spacing: f64) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(field.dim());
    fd_deriv_into(field, axis, spacing, 1.0, out.view_mut())?;
    Ok(out)
}

/// `out += scale · ∂f/∂axis`.
pub fn fd_deriv_into(
    field: ArrayView2<f64>,
    axis: Axis,
    spacing: f64,
    scale: f64,
    mut out: ArrayViewMut2<f64>,
) -> Result<()> {
    let n = extent(field.dim(), axis);
    if n < MIN_EXTENT {
        return Err(FieldError::StencilUnderflow { extent: n });
    }
    debug_assert_eq!(field.dim(), out.dim());
    let c = scale / (12.0 * spacing);
    let ax = lanes_axis(axis);
    for (src, mut dst) in field.lanes(ax).into_iter().zip(out.lanes_mut(ax)) {
        for i in 0..n {
            let (start, w) = row(i, n);
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * src[start + k];
            }
            dst[i] += c * acc;
        }
    }
    Ok(())
}

/// Transpose of [`fd_deriv_into`]: `out += scale · Dᵀ g`.
pub fn fd_deriv_adjoint_into(
    g: ArrayView2<f64>,
    axis: Axis,
    spacing: f64,
    scale: f64,
    mut out: ArrayViewMut2<f64>,
) -> Result<()> {
    let n = extent(g.dim(), axis);
    if n < MIN_EXTENT {
        return Err(FieldError::StencilUnderflow { extent: n });
    }
    let c = scale / (12.0 * spacing);
    let ax = lanes_axis(axis);
    for (src, mut dst) in g.lanes(ax).into_iter().zip(out.lanes_mut(ax)) {
        for i in 0..n {
            let gi = c * src[i];
            if gi == 0.0 {
                continue;
            }
            let (start, w) = row(i, n);
            for (k, wk) in w.iter().enumerate() {
                dst[start + k] += wk * gi;
            }
        }
    }
    Ok(())
}
