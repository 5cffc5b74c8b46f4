//! Numerical core for physics-informed super-resolution of antiplane
//! elastodynamics fields: structured grids and state snapshots, `FLD1` I/O,
//! fourth-order finite differences, the Crank–Nicolson residual operators, a
//! reference solver for dataset generation, and the unsupervised physics loss.

pub mod cg;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod interp;
pub mod io;
pub mod loss;
pub mod pde;
pub mod solver;
pub mod state;
pub mod stencil;

pub use error::{FieldError, Result};
pub use grid::{make_grid, Grid2D, Rect};
pub use state::{BoundaryInitialSpec, SnapshotSeries, StateSnapshot, Variable, NUM_VARIABLES};
