use std::f64::consts::PI;

use ndarray::Array2;
use pdeup_core::pde::analytic_solution;
use pdeup_core::solver::{solve, SolverConfig};
use pdeup_core::Grid2D;

fn rel_l2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Exact solution of the spatially discrete system: the sampled initial mode
/// is an eigenvector of the five-point Laplacian with frequency
/// `ω_h = (2√2/h)·sin(πh/2)`, so only the time integrator contributes error.
fn semi_discrete_u(grid: &Grid2D, t: f64) -> Array2<f64> {
    let h = grid.spacing_x();
    let omega_h = 2.0 * 2f64.sqrt() / h * (PI * h / 2.0).sin();
    grid.sample(|x, y| (PI * x).sin() * (PI * y).sin() * (omega_h * t).cos())
}

fn max_time_error(dt: f64, n_steps: usize) -> f64 {
    let s = solve(&SolverConfig::new(64, dt, n_steps)).unwrap();
    s.snapshots()
        .iter()
        .skip(1)
        .map(|z| rel_l2(z.u(), &semi_discrete_u(s.grid(), z.t)))
        .fold(0.0, f64::max)
}

#[test]
fn crank_nicolson_is_second_order_in_time() {
    let coarse = max_time_error(0.005, 48);
    let fine = max_time_error(0.0025, 96);
    let order = (coarse / fine).log2();
    assert!(order >= 1.7, "observed temporal order {order} ({coarse:e} -> {fine:e})");
    assert!((coarse / fine - 4.0).abs() < 0.5, "ratio {}", coarse / fine);
}

fn spatial_error(n: usize) -> (f64, f64) {
    let dt = 0.0005;
    let s = solve(&SolverConfig::new(n, dt, 480)).unwrap();
    let e = s
        .snapshots()
        .iter()
        .skip(1)
        .filter(|z| z.t <= 0.24 + 1e-12)
        .map(|z| rel_l2(z.u(), analytic_solution(s.grid(), z.t).u()))
        .fold(0.0, f64::max);
    (e, s.grid().spacing_x())
}

#[test]
fn five_point_laplacian_is_second_order_in_space() {
    let (e32, h32) = spatial_error(32);
    let (e64, h64) = spatial_error(64);
    let order = (e32 / e64).ln() / (h32 / h64).ln();
    assert!(order >= 1.7, "observed spatial order {order}");
}

#[test]
fn fine_solve_within_one_percent_until_horizon() {
    let s = solve(&SolverConfig::new(64, 0.0025, 96)).unwrap();
    for z in s.snapshots() {
        let e = rel_l2(z.u(), analytic_solution(s.grid(), z.t).u());
        assert!(e <= 0.01, "t = {}: {e}", z.t);
    }
}
