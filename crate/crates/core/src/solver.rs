//! Crank–Nicolson reference solver for the antiplane wave system on a
//! structured grid, using the second-order five-point Laplacian.

use ndarray::Array2;
use thiserror::Error;

use crate::cg::pcg;
use crate::error::FieldError;
use crate::grid::{make_grid, Grid2D, Rect};
use crate::pde::PdeCoefficients;
use crate::state::{BoundaryInitialSpec, SnapshotSeries, StateSnapshot};
use crate::stencil::{fd_deriv, Axis};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Field(#[from] FieldError),

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("linear solve at step {step} did not converge in {iterations} iterations (residual {residual:e})")]
    Divergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub grid_n: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub coeff: PdeCoefficients,
    pub bcs: BoundaryInitialSpec,
    pub linear_solver_tol: f64,
    pub linear_solver_max_iter: usize,
}

impl SolverConfig {
    pub fn new(grid_n: usize, dt: f64, n_steps: usize) -> Self {
        SolverConfig {
            grid_n,
            dt,
            n_steps,
            coeff: PdeCoefficients::default(),
            bcs: BoundaryInitialSpec::default(),
            linear_solver_tol: 1e-10,
            linear_solver_max_iter: 10 * grid_n * grid_n,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.grid_n < 3 {
            return Err(SolveError::Config(format!("grid_n = {} < 3", self.grid_n)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolveError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(SolveError::Config("n_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Five-point Laplacian at interior nodes; boundary rows are zero.
pub fn laplacian(u: &Array2<f64>, grid: &Grid2D) -> Array2<f64> {
    let (ny, nx) = grid.shape();
    let (ihx2, ihy2) = (grid.spacing_x().powi(-2), grid.spacing_y().powi(-2));
    let mut out = Array2::zeros((ny, nx));
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = u[[j, i]];
            out[[j, i]] = (u[[j, i + 1]] - 2.0 * c + u[[j, i - 1]]) * ihx2
                + (u[[j + 1, i]] - 2.0 * c + u[[j - 1, i]]) * ihy2;
        }
    }
    out
}

/// `½‖v‖² + ½‖∇u‖²` with node weights `hx·hy` and forward differences on edges.
/// With zero boundary displacement this equals the quadratic form that the
/// scheme conserves.
pub fn discrete_energy(u: &Array2<f64>, v: &Array2<f64>, grid: &Grid2D) -> f64 {
    let (ny, nx) = grid.shape();
    let (hx, hy) = (grid.spacing_x(), grid.spacing_y());
    let w = hx * hy;
    let kinetic: f64 = v.iter().map(|x| x * x).sum::<f64>() * w;
    let mut grad = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                grad += ((u[[j, i + 1]] - u[[j, i]]) / hx).powi(2);
            }
            if j + 1 < ny {
                grad += ((u[[j + 1, i]] - u[[j, i]]) / hy).powi(2);
            }
        }
    }
    0.5 * kinetic + 0.5 * grad * w
}

fn stresses(u: &Array2<f64>, grid: &Grid2D) -> Result<(Array2<f64>, Array2<f64>), FieldError> {
    Ok((
        fd_deriv(u.view(), Axis::X, grid.spacing_x())?,
        fd_deriv(u.view(), Axis::Y, grid.spacing_y())?,
    ))
}

fn snapshot(t: f64, u: &Array2<f64>, v: &Array2<f64>, grid: &Grid2D) -> Result<StateSnapshot, SolveError> {
    let (sxz, syz) = stresses(u, grid)?;
    Ok(StateSnapshot::new(t, [u.clone(), v.clone(), sxz, syz])?)
}

fn set_boundary(a: &mut Array2<f64>, grid: &Grid2D, f: impl Fn(f64, f64) -> f64) {
    let (ny, nx) = grid.shape();
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_boundary(j, i) {
                a[[j, i]] = f(grid.x(i), grid.y(j));
            }
        }
    }
}

/// Time-steps the mixed system with Crank–Nicolson on `(u, v)`.
///
/// Each step eliminates `u^{n+1}` and solves
/// `(I − (Δt²/4)L) v^{n+1} = v^n + (Δt/2)(L u^n + L ŵ)` with `ŵ = u^n + (Δt/2)v^n`
/// carrying the new boundary displacement, then sets
/// `u^{n+1} = u^n + (Δt/2)(v^n + v^{n+1})`. Stresses are `∇u` by the
/// fourth-order stencil.
pub fn solve(cfg: &SolverConfig) -> Result<SnapshotSeries, SolveError> {
    cfg.validate()?;
    let grid = make_grid(cfg.grid_n, Rect::UNIT)?;
    let (ny, nx) = grid.shape();
    let (mi, mj) = (nx - 2, ny - 2);
    let dt = cfg.dt;
    let k = cfg.coeff.wave_factor();
    let bcs = &cfg.bcs;

    let mut u = bcs.u0_on(&grid);
    let mut v = bcs.v0_on(&grid);
    set_boundary(&mut u, &grid, |x, y| (bcs.u_bc)(x, y, 0.0));
    set_boundary(&mut v, &grid, |x, y| (bcs.u_bc_dt)(x, y, 0.0));

    let mut out = Vec::with_capacity(cfg.n_steps + 1);
    out.push(snapshot(0.0, &u, &v, &grid)?);

    // Interior operator A = I − (Δt²/4)·k·L with zero Dirichlet data.
    let a = 0.25 * dt * dt * k;
    let (ihx2, ihy2) = (grid.spacing_x().powi(-2), grid.spacing_y().powi(-2));
    let centre = 1.0 + a * 2.0 * (ihx2 + ihy2);
    let apply = |p: &[f64], o: &mut [f64]| {
        for j in 0..mj {
            for i in 0..mi {
                let idx = j * mi + i;
                let mut nb = 0.0;
                if i > 0 {
                    nb += ihx2 * p[idx - 1];
                }
                if i + 1 < mi {
                    nb += ihx2 * p[idx + 1];
                }
                if j > 0 {
                    nb += ihy2 * p[idx - mi];
                }
                if j + 1 < mj {
                    nb += ihy2 * p[idx + mi];
                }
                o[idx] = centre * p[idx] - a * nb;
            }
        }
    };
    let diag = vec![centre; mi * mj];
    let mut rhs = vec![0.0; mi * mj];
    let mut vint = vec![0.0; mi * mj];

    for step in 0..cfg.n_steps {
        let t1 = (step + 1) as f64 * dt;
        let lu = laplacian(&u, &grid);
        let mut w = &u + &(&v * (0.5 * dt));
        set_boundary(&mut w, &grid, |x, y| (bcs.u_bc)(x, y, t1));
        let lw = laplacian(&w, &grid);
        for j in 0..mj {
            for i in 0..mi {
                let idx = j * mi + i;
                let (gj, gi) = (j + 1, i + 1);
                rhs[idx] = v[[gj, gi]] + 0.5 * dt * k * (lu[[gj, gi]] + lw[[gj, gi]]);
                vint[idx] = v[[gj, gi]];
            }
        }
        let outcome = pcg(
            apply,
            &diag,
            &rhs,
            &mut vint,
            cfg.linear_solver_tol,
            cfg.linear_solver_max_iter,
        );
        if !outcome.converged {
            return Err(SolveError::Divergence {
                step: step + 1,
                iterations: outcome.iterations,
                residual: outcome.relative_residual,
            });
        }
        for j in 0..mj {
            for i in 0..mi {
                let (gj, gi) = (j + 1, i + 1);
                let vn = vint[j * mi + i];
                v[[gj, gi]] = vn;
                u[[gj, gi]] = w[[gj, gi]] + 0.5 * dt * vn;
            }
        }
        set_boundary(&mut u, &grid, |x, y| (bcs.u_bc)(x, y, t1));
        set_boundary(&mut v, &grid, |x, y| (bcs.u_bc_dt)(x, y, t1));
        out.push(snapshot(t1, &u, &v, &grid)?);
    }
    Ok(SnapshotSeries::new(grid, dt, out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::analytic_solution;

    fn rel_l2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let mut cfg = SolverConfig::new(9, 0.01, 5);
        cfg.bcs = BoundaryInitialSpec::quiescent();
        let s = solve(&cfg).unwrap();
        assert_eq!(s.len(), 6);
        for snap in s.snapshots() {
            assert!(snap.fields().iter().all(|f| f.iter().all(|x| *x == 0.0)));
        }
    }

    #[test]
    fn matches_analytic_on_fine_grid() {
        let s = solve(&SolverConfig::new(64, 0.0025, 96)).unwrap();
        let g = *s.grid();
        for snap in s.snapshots().iter().skip(1) {
            let exact = analytic_solution(&g, snap.t);
            let e = rel_l2(snap.u(), exact.u());
            assert!(e <= 0.01, "t = {}: {e}", snap.t);
        }
    }

    #[test]
    fn boundary_is_exactly_zero() {
        let s = solve(&SolverConfig::new(12, 0.01, 10)).unwrap();
        let g = *s.grid();
        for snap in s.snapshots() {
            for ((j, i), val) in snap.u().indexed_iter() {
                if g.is_boundary(j, i) {
                    assert_eq!(val.to_bits(), 0.0f64.to_bits());
                    assert_eq!(snap.v()[[j, i]].to_bits(), 0.0f64.to_bits());
                }
            }
        }
    }

    #[test]
    fn energy_is_conserved() {
        let cfg = SolverConfig::new(64, 0.0025, 96);
        let s = solve(&cfg).unwrap();
        let g = *s.grid();
        let e0 = discrete_energy(s.snapshots()[0].u(), s.snapshots()[0].v(), &g);
        for snap in s.snapshots() {
            let e = discrete_energy(snap.u(), snap.v(), &g);
            assert!((e - e0).abs() / e0 <= 0.01, "{e} vs {e0}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = SolverConfig::new(16, 0.01, 3);
        // Not a Laplacian eigenvector, so CG needs more than one iteration.
        cfg.bcs.u0 = std::sync::Arc::new(|x, y| x * (1.0 - x) * y * (1.0 - y) * (3.0 * x).exp());
        cfg.linear_solver_max_iter = 1;
        cfg.linear_solver_tol = 1e-15;
        assert!(matches!(solve(&cfg), Err(SolveError::Divergence { step: 1, .. })));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(solve(&SolverConfig::new(2, 0.01, 3)).is_err());
        assert!(solve(&SolverConfig::new(9, 0.0, 3)).is_err());
        assert!(solve(&SolverConfig::new(9, 0.01, 0)).is_err());
    }
}
