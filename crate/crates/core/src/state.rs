//! State vector, snapshot series, and boundary/initial data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::grid::Grid2D;

/// One component of the state vector `z = (u, v, σxz, σyz)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    U,
    V,
    SigmaXz,
    SigmaYz,
}

impl Variable {
    pub const ALL: [Variable; 4] = [
        Variable::U,
        Variable::V,
        Variable::SigmaXz,
        Variable::SigmaYz,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::U => "u",
            Variable::V => "v",
            Variable::SigmaXz => "sigma_xz",
            Variable::SigmaYz => "sigma_yz",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| FieldError::format("vars", format!("unknown variable `{s}`")))
    }
}

pub const NUM_VARIABLES: usize = 4;

/// The full state on a grid at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSnapshot {
    pub t: f64,
    fields: [Array2<f64>; NUM_VARIABLES],
}

impl StateSnapshot {
    /// Builds a snapshot, checking that all four arrays share one shape and are finite.
    pub fn new(t: f64, fields: [Array2<f64>; NUM_VARIABLES]) -> Result<Self> {
        let shape = fields[0].dim();
        for (v, f) in Variable::ALL.iter().zip(&fields) {
            if f.dim() != shape {
                return Err(FieldError::Shape {
                    what: v.name().to_string(),
                    expected: shape,
                    got: f.dim(),
                });
            }
            if !f.iter().all(|x| x.is_finite()) {
                return Err(FieldError::NonFinite(v.name().to_string()));
            }
        }
        Ok(StateSnapshot { t, fields })
    }

    /// Builds a snapshot without the finiteness scan. Used for gradient buffers
    /// and intermediate network outputs whose shape is known by construction.
    pub fn from_fields_unchecked(t: f64, fields: [Array2<f64>; NUM_VARIABLES]) -> Self {
        debug_assert!(fields.iter().all(|f| f.dim() == fields[0].dim()));
        StateSnapshot { t, fields }
    }

    pub fn zeros(t: f64, shape: (usize, usize)) -> Self {
        StateSnapshot {
            t,
            fields: std::array::from_fn(|_| Array2::zeros(shape)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.fields[0].dim()
    }

    pub fn get(&self, var: Variable) -> &Array2<f64> {
        &self.fields[var.index()]
    }

    pub fn get_mut(&mut self, var: Variable) -> &mut Array2<f64> {
        &mut self.fields[var.index()]
    }

    pub fn u(&self) -> &Array2<f64> {
        self.get(Variable::U)
    }

    pub fn v(&self) -> &Array2<f64> {
        self.get(Variable::V)
    }

    pub fn sigma_xz(&self) -> &Array2<f64> {
        self.get(Variable::SigmaXz)
    }

    pub fn sigma_yz(&self) -> &Array2<f64> {
        self.get(Variable::SigmaYz)
    }

    pub fn fields(&self) -> &[Array2<f64>; NUM_VARIABLES] {
        &self.fields
    }

    pub fn into_fields(self) -> [Array2<f64>; NUM_VARIABLES] {
        self.fields
    }

    pub fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.shape() != grid.shape() {
            return Err(FieldError::Shape {
                what: "snapshot".into(),
                expected: grid.shape(),
                got: self.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(|f| f.iter().all(|x| x.is_finite()))
    }
}

/// Relative tolerance on the spacing of consecutive snapshot times.
pub const TIME_SPACING_RTOL: f64 = 1e-12;

/// A uniformly spaced, time-ordered sequence of snapshots on one grid.
///
/// Snapshot times are normalised to `t0 + i·dt` on construction so that the
/// series is fully described by `(t0, dt)` and survives serialisation bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    grid: Grid2D,
    dt: f64,
    snapshots: Vec<StateSnapshot>,
}

impl SnapshotSeries {
    pub fn new(grid: Grid2D, dt: f64, mut snapshots: Vec<StateSnapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(FieldError::InvalidSeries("empty snapshot list".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FieldError::InvalidInterval(dt));
        }
        for s in &snapshots {
            s.check_grid(&grid)?;
        }
        let t0 = snapshots[0].t;
        for (i, w) in snapshots.windows(2).enumerate() {
            let step = w[1].t - w[0].t;
            if (step - dt).abs() > TIME_SPACING_RTOL * dt.abs().max(w[1].t.abs()) {
                return Err(FieldError::InvalidSeries(format!(
                    "snapshot {} follows {} by {step}, expected dt = {dt}",
                    i + 1,
                    i
                )));
            }
        }
        for (i, s) in snapshots.iter_mut().enumerate() {
            s.t = t0 + i as f64 * dt;
        }
        Ok(SnapshotSeries {
            grid,
            dt,
            snapshots,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.snapshots[0].t
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[StateSnapshot] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<StateSnapshot> {
        self.snapshots
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

pub type FieldFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type InitialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Dirichlet displacement data on the boundary and initial `(u, v)`.
#[derive(Clone)]
pub struct BoundaryInitialSpec {
    /// `u_bc(x, y, t)` on the boundary.
    pub u_bc: FieldFn,
    /// `∂u_bc/∂t`, the velocity imposed on the boundary.
    pub u_bc_dt: FieldFn,
    pub u0: InitialFn,
    pub v0: InitialFn,
}

impl Default for BoundaryInitialSpec {
    fn default() -> Self {
        BoundaryInitialSpec {
            u_bc: Arc::new(|_, _, _| 0.0),
            u_bc_dt: Arc::new(|_, _, _| 0.0),
            u0: Arc::new(|x, y| (PI * x).sin() * (PI * y).sin()),
            v0: Arc::new(|_, _| 0.0),
        }
    }
}

impl fmt::Debug for BoundaryInitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryInitialSpec").finish_non_exhaustive()
    }
}

impl BoundaryInitialSpec {
    /// Zero displacement and velocity everywhere.
    pub fn quiescent() -> Self {
        BoundaryInitialSpec {
            u0: Arc::new(|_, _| 0.0),
            ..Default::default()
        }
    }

    /// Largest mismatch between `u0` and `u_bc(·, 0)` over the boundary nodes of `grid`.
    pub fn compatibility_defect(&self, grid: &Grid2D) -> f64 {
        let (ny, nx) = grid.shape();
        let mut worst = 0.0f64;
        for j in 0..ny {
            for i in 0..nx {
                if grid.is_boundary(j, i) {
                    let (x, y) = (grid.x(i), grid.y(j));
                    worst = worst.max(((self.u0)(x, y) - (self.u_bc)(x, y, 0.0)).abs());
                }
            }
        }
        worst
    }

    pub fn u0_on(&self, grid: &Grid2D) -> Array2<f64> {
        grid.sample(|x, y| (self.u0)(x, y))
    }

    pub fn v0_on(&self, grid: &Grid2D) -> Array2<f64> {
        grid.sample(|x, y| (self.v0)(x, y))
    }
}
