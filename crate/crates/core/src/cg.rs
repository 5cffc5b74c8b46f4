//! Jacobi-preconditioned conjugate gradients for small SPD systems.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` at exit (absolute norm when `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` in place, starting from the current contents of `x`.
///
/// `apply(p, out)` must write `A p` into `out`; `diag` is the diagonal of `A`.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut res = dot(&r, &r).sqrt() / scale;
    if res <= tol {
        return CgOutcome {
            iterations: 0,
            relative_residual: res,
            converged: true,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / scale;
        if res <= tol {
            return CgOutcome {
                iterations: it,
                relative_residual: res,
                converged: true,
            };
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        iterations: max_iter,
        relative_residual: res,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let apply = |p: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { p[i - 1] } else { 0.0 };
                let r = if i + 1 < n { p[i + 1] } else { 0.0 };
                out[i] = 4.0 * p[i] - l - r;
            }
        };
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let out = pcg(apply, &vec![4.0; n], &b, &mut x, 1e-12, 500);
        assert!(out.converged);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let n = 40;
        let apply = |p: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = (1.0 + i as f64) * p[i];
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let out = pcg(apply, &vec![1.0; n], &b, &mut x, 1e-14, 2);
        assert!(!out.converged);
        assert!(out.relative_residual > 1e-14);
    }

    #[test]
    fn zero_rhs_is_immediate() {
        let mut x = vec![0.0; 3];
        let out = pcg(|p, o| o.copy_from_slice(p), &[1.0; 3], &[0.0; 3], &mut x, 1e-10, 10);
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }
}
