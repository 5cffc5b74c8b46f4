//! Uniform node-centred grids on axis-aligned rectangles.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn contains(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }
}

impl Default for Rect {
    fn default() -> Self {
        Rect::UNIT
    }
}

/// Structured grid of `n_y × n_x` nodes. Arrays on this grid are indexed
/// `[j, i]` with the y index outermost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n_x: usize,
    n_y: usize,
    domain: Rect,
}

impl Grid2D {
    pub fn new(n_x: usize, n_y: usize, domain: Rect) -> Result<Self> {
        if n_x < 3 || n_y < 3 {
            return Err(FieldError::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {n_x}×{n_y}"
            )));
        }
        let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || domain.x1 <= domain.x0 || domain.y1 <= domain.y0 {
            return Err(FieldError::InvalidGrid(format!(
                "degenerate domain {domain:?}"
            )));
        }
        Ok(Grid2D { n_x, n_y, domain })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Array shape `(n_y, n_x)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_y, self.n_x)
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing_x(&self) -> f64 {
        (self.domain.x1 - self.domain.x0) / (self.n_x - 1) as f64
    }

    pub fn spacing_y(&self) -> f64 {
        (self.domain.y1 - self.domain.y0) / (self.n_y - 1) as f64
    }

    /// x coordinate of column `i`. The last node is pinned to `x1` exactly.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_x {
            self.domain.x1
        } else {
            self.domain.x0 + i as f64 * self.spacing_x()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.n_y {
            self.domain.y1
        } else {
            self.domain.y0 + j as f64 * self.spacing_y()
        }
    }

    pub fn is_boundary(&self, j: usize, i: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n_x || j + 1 == self.n_y
    }

    pub fn boundary_mask(&self) -> Array2<bool> {
        Array2::from_shape_fn(self.shape(), |(j, i)| self.is_boundary(j, i))
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn(self.shape(), |(j, i)| f(self.x(i), self.y(j)))
    }
}

/// Square `n × n` grid covering `domain` inclusively.
pub fn make_grid(n: usize, domain: Rect) -> Result<Grid2D> {
    Grid2D::new(n, n, domain)
}
