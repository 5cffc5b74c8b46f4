//! Thin safe wrapper over `matrixmultiply::dgemm`.

/// Row and column strides of a matrix operand, in elements.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Strides(pub isize, pub isize);

impl Strides {
    /// Row-major with `cols` columns.
    pub fn rm(cols: usize) -> Self {
        Strides(cols as isize, 1)
    }

    /// Transposed view of a row-major matrix with `cols` columns.
    pub fn tr(cols: usize) -> Self {
        Strides(1, cols as isize)
    }

    fn extent(self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            return 0;
        }
        (rows - 1) * self.0 as usize + (cols - 1) * self.1 as usize + 1
    }
}

/// `c = alpha * a * b + beta * c` with `a` m×k, `b` k×n and `c` m×n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    sa: Strides,
    b: &[f64],
    sb: Strides,
    beta: f64,
    c: &mut [f64],
    sc: Strides,
) {
    assert!(sa.extent(m, k) <= a.len(), "gemm: lhs out of bounds");
    assert!(sb.extent(k, n) <= b.len(), "gemm: rhs out of bounds");
    assert!(sc.extent(m, n) <= c.len(), "gemm: output out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is exclusively borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            sa.0,
            sa.1,
            b.as_ptr(),
            sb.0,
            sb.1,
            beta,
            c.as_mut_ptr(),
            sc.0,
            sc.1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_product_with_transposes() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        let mut c = vec![1.0; m * n];
        gemm(m, k, n, 2.0, &a, Strides::rm(k), &b, Strides::rm(n), 1.0, &mut c, Strides::rm(n));
        for i in 0..m {
            for j in 0..n {
                let want: f64 = 1.0 + 2.0 * (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum::<f64>();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
        // a stored k×m, used transposed.
        let at: Vec<f64> = (0..k * m).map(|idx| a[(idx % m) * k + idx / m]).collect();
        let mut c2 = vec![0.0; m * n];
        gemm(m, k, n, 1.0, &at, Strides::tr(m), &b, Strides::rm(n), 0.0, &mut c2, Strides::rm(n));
        for i in 0..m * n {
            assert!((c2[i] - (c[i] - 1.0) / 2.0).abs() < 1e-12);
        }
    }
}
