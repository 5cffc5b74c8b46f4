//! Antiplane elastodynamics in mixed form:
//!
//! ```text
//! u̇ = v
//! (ρ/μ) v̇ = ∂σxz/∂x + ∂σyz/∂y
//! σxz = ∂u/∂x,  σyz = ∂u/∂y        (μ = 1 after nondimensionalisation)
//! ```

use std::f64::consts::{PI, SQRT_2};

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::grid::Grid2D;
use crate::state::StateSnapshot;
use crate::stencil::{fd_deriv, fd_deriv_into, Axis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeCoefficients {
    pub rho_over_mu: f64,
}

impl PdeCoefficients {
    pub fn new(rho_over_mu: f64) -> Result<Self> {
        if !(rho_over_mu > 0.0 && rho_over_mu.is_finite()) {
            return Err(FieldError::InvalidGrid(format!(
                "rho/mu must be positive, got {rho_over_mu}"
            )));
        }
        Ok(PdeCoefficients { rho_over_mu })
    }

    /// `μ/ρ`, the factor in front of the stress divergence.
    pub fn wave_factor(&self) -> f64 {
        1.0 / self.rho_over_mu
    }
}

impl Default for PdeCoefficients {
    fn default() -> Self {
        PdeCoefficients { rho_over_mu: 1.0 }
    }
}

/// Pointwise residuals of the evolution equations and constitutive constraints.
#[derive(Clone, Debug)]
pub struct ResidualFields {
    pub r_u: Array2<f64>,
    pub r_v: Array2<f64>,
    pub r_cx: Array2<f64>,
    pub r_cy: Array2<f64>,
}

/// Right-hand side `F(z)` of the `(u, v)` evolution equations.
pub fn pde_rhs(
    z: &StateSnapshot,
    coeff: &PdeCoefficients,
    grid: &Grid2D,
) -> Result<(Array2<f64>, Array2<f64>)> {
    z.check_grid(grid)?;
    let k = coeff.wave_factor();
    let mut rhs_v = Array2::zeros(grid.shape());
    fd_deriv_into(z.sigma_xz().view(), Axis::X, grid.spacing_x(), k, rhs_v.view_mut())?;
    fd_deriv_into(z.sigma_yz().view(), Axis::Y, grid.spacing_y(), k, rhs_v.view_mut())?;
    Ok((z.v().clone(), rhs_v))
}

/// `(σxz − ∂u/∂x, σyz − ∂u/∂y)`.
pub fn constraint_residual(
    z: &StateSnapshot,
    grid: &Grid2D,
) -> Result<(Array2<f64>, Array2<f64>)> {
    z.check_grid(grid)?;
    let r_cx = z.sigma_xz() - &fd_deriv(z.u().view(), Axis::X, grid.spacing_x())?;
    let r_cy = z.sigma_yz() - &fd_deriv(z.u().view(), Axis::Y, grid.spacing_y())?;
    Ok((r_cx, r_cy))
}

/// Trapezoidal (Crank–Nicolson) residual `(b − a)/dt − ½(F_a + F_b)` for one field.
pub fn crank_nicolson_residual(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    rhs_a: ArrayView2<f64>,
    rhs_b: ArrayView2<f64>,
    dt: f64,
) -> Result<Array2<f64>> {
    if !(dt > 0.0) {
        return Err(FieldError::InvalidInterval(dt));
    }
    let inv = 1.0 / dt;
    Ok(Zip::from(&a)
        .and(&b)
        .and(&rhs_a)
        .and(&rhs_b)
        .map_collect(|a, b, fa, fb| (b - a) * inv - 0.5 * (fa + fb)))
}

/// Crank–Nicolson residual of the `(u, v)` pair between two snapshots `dt` apart.
pub fn cn_residual(
    z_a: &StateSnapshot,
    z_b: &StateSnapshot,
    dt: f64,
    coeff: &PdeCoefficients,
    grid: &Grid2D,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(dt > 0.0) {
        return Err(FieldError::InvalidInterval(dt));
    }
    let (fu_a, fv_a) = pde_rhs(z_a, coeff, grid)?;
    let (fu_b, fv_b) = pde_rhs(z_b, coeff, grid)?;
    let r_u = crank_nicolson_residual(z_a.u().view(), z_b.u().view(), fu_a.view(), fu_b.view(), dt)?;
    let r_v = crank_nicolson_residual(z_a.v().view(), z_b.v().view(), fv_a.view(), fv_b.view(), dt)?;
    Ok((r_u, r_v))
}

/// All four residual fields for a snapshot pair; constraints are taken at `z_b`.
pub fn residual_fields(
    z_a: &StateSnapshot,
    z_b: &StateSnapshot,
    dt: f64,
    coeff: &PdeCoefficients,
    grid: &Grid2D,
) -> Result<ResidualFields> {
    let (r_u, r_v) = cn_residual(z_a, z_b, dt, coeff, grid)?;
    let (r_cx, r_cy) = constraint_residual(z_b, grid)?;
    Ok(ResidualFields {
        r_u,
        r_v,
        r_cx,
        r_cy,
    })
}

/// Angular frequency of the fundamental mode on the unit square with `ρ/μ = 1`.
pub const OMEGA: f64 = SQRT_2 * PI;

/// Separable solution for `u0 = sin(πx) sin(πy)`, `v0 = 0`, zero boundary displacement:
/// `u = sin(πx) sin(πy) cos(√2 π t)`.
pub fn analytic_solution(grid: &Grid2D, t: f64) -> StateSnapshot {
    let (c, s) = ((OMEGA * t).cos(), (OMEGA * t).sin());
    let sx = grid.sample(|x, _| (PI * x).sin());
    let sy = grid.sample(|_, y| (PI * y).sin());
    let cx = grid.sample(|x, _| (PI * x).cos());
    let cy = grid.sample(|_, y| (PI * y).cos());
    let u = &sx * &sy * c;
    let v = &sx * &sy * (-OMEGA * s);
    let sxz = &cx * &sy * (PI * c);
    let syz = &sx * &cy * (PI * c);
    StateSnapshot::from_fields_unchecked(t, [u, v, sxz, syz])
}
