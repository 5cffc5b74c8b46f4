//! Convolution primitives on channel-major buffers (`c × h·w`, row-major).
//!
//! Convolutions are lowered to GEMM through im2col with reflection padding.
//! Column row `ch·k² + a·k + b` holds channel `ch` shifted by tap `(a, b)`,
//! so the columns of a channel prefix are a prefix of the column buffer.

use crate::gemm::{gemm, Strides};

/// Reflected index tables for one spatial size and kernel.
pub(crate) struct Reflect {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    ry: Vec<usize>,
    rx: Vec<usize>,
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let i = if i < 0 { -i } else { i };
    let i = if i >= n { 2 * (n - 1) - i } else { i };
    i as usize
}

impl Reflect {
    pub fn new(h: usize, w: usize, k: usize) -> Self {
        let p = (k / 2) as isize;
        assert!(h > k / 2 && w > k / 2, "extent {h}x{w} too small for kernel {k}");
        let ry = (0..k)
            .flat_map(|a| (0..h).map(move |y| reflect(y as isize + a as isize - p, h)))
            .collect();
        let rx = (0..k)
            .flat_map(|b| (0..w).map(move |x| reflect(x as isize + b as isize - p, w)))
            .collect();
        Self { h, w, k, ry, rx }
    }

    pub fn hw(&self) -> usize {
        self.h * self.w
    }

    /// Writes the columns of channels `ch0..ch1` of `x`.
    pub fn im2col(&self, x: &[f64], ch0: usize, ch1: usize, cols: &mut [f64]) {
        let (h, w, k, hw) = (self.h, self.w, self.k, self.hw());
        for ch in ch0..ch1 {
            let src = &x[ch * hw..(ch + 1) * hw];
            for a in 0..k {
                for b in 0..k {
                    let row = &mut cols[(ch * k * k + a * k + b) * hw..][..hw];
                    let rx = &self.rx[b * w..(b + 1) * w];
                    for y in 0..h {
                        let s = &src[self.ry[a * h + y] * w..][..w];
                        let d = &mut row[y * w..(y + 1) * w];
                        for (dv, &ix) in d.iter_mut().zip(rx) {
                            *dv = s[ix];
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Reflect::im2col`]: accumulates column gradients of
    /// channels `ch0..ch1` into `dx`.
    pub fn col2im(&self, dcols: &[f64], ch0: usize, ch1: usize, dx: &mut [f64]) {
        let (h, w, k, hw) = (self.h, self.w, self.k, self.hw());
        for ch in ch0..ch1 {
            let dst = &mut dx[ch * hw..(ch + 1) * hw];
            for a in 0..k {
                for b in 0..k {
                    let row = &dcols[(ch * k * k + a * k + b) * hw..][..hw];
                    let rx = &self.rx[b * w..(b + 1) * w];
                    for y in 0..h {
                        let d = &mut dst[self.ry[a * h + y] * w..][..w];
                        let s = &row[y * w..(y + 1) * w];
                        for (&sv, &ix) in s.iter().zip(rx) {
                            d[ix] += sv;
                        }
                    }
                }
            }
        }
    }
}

/// Location of one convolution inside the flat parameter vector. Weights are
/// `c_out × (c_in·k²)` row-major, followed by `c_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Conv {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub offset: usize,
}

impl Conv {
    pub fn fan_in(&self) -> usize {
        self.c_in * self.k * self.k
    }

    pub fn n_weights(&self) -> usize {
        self.c_out * self.fan_in()
    }

    pub fn n_params(&self) -> usize {
        self.n_weights() + self.c_out
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.n_params()
    }

    /// `out = W·cols + b` over `hw` pixels. `cols` is the im2col buffer, or
    /// the input itself for 1×1 kernels.
    pub fn forward(&self, params: &[f64], cols: &[f64], hw: usize, out: &mut [f64]) {
        let p = &params[self.range()];
        let (w, b) = p.split_at(self.n_weights());
        let out = &mut out[..self.c_out * hw];
        for (row, &bias) in out.chunks_exact_mut(hw).zip(b) {
            row.fill(bias);
        }
        let kk = self.fan_in();
        gemm(self.c_out, kk, hw, 1.0, w, Strides::rm(kk), cols, Strides::rm(hw), 1.0, out, Strides::rm(hw));
    }

    /// Accumulates parameter gradients for output gradient `dy`, and when
    /// `dcols` is given also `Wᵀ·dy` into it.
    pub fn backward(
        &self,
        params: &[f64],
        cols: &[f64],
        dy: &[f64],
        hw: usize,
        grad: &mut [f64],
        dcols: Option<&mut [f64]>,
    ) {
        let kk = self.fan_in();
        let g = &mut grad[self.range()];
        let (gw, gb) = g.split_at_mut(self.n_weights());
        gemm(self.c_out, hw, kk, 1.0, dy, Strides::rm(hw), cols, Strides::tr(hw), 1.0, gw, Strides::rm(kk));
        for (row, b) in dy.chunks_exact(hw).zip(gb.iter_mut()) {
            *b += row.iter().sum::<f64>();
        }
        if let Some(dc) = dcols {
            let w = &params[self.offset..self.offset + self.n_weights()];
            gemm(kk, self.c_out, hw, 1.0, w, Strides::tr(kk), dy, Strides::rm(hw), 1.0, dc, Strides::rm(hw));
        }
    }
}

/// Depth-to-space: channel `c·r² + i·r + j` at `(y, x)` moves to channel `c`
/// at `(y·r + i, x·r + j)`.
pub(crate) fn pixel_shuffle(x: &[f64], c: usize, h: usize, w: usize, r: usize, out: &mut [f64]) {
    let (hw, ow) = (h * w, w * r);
    for ci in 0..c {
        for i in 0..r {
            for j in 0..r {
                let src = &x[(ci * r * r + i * r + j) * hw..][..hw];
                let dst = &mut out[ci * hw * r * r..][..hw * r * r];
                for y in 0..h {
                    for xx in 0..w {
                        dst[(y * r + i) * ow + xx * r + j] = src[y * w + xx];
                    }
                }
            }
        }
    }
}

/// Inverse permutation of [`pixel_shuffle`], which is also its adjoint.
pub(crate) fn pixel_unshuffle(x: &[f64], c: usize, h: usize, w: usize, r: usize, out: &mut [f64]) {
    let (hw, ow) = (h * w, w * r);
    for ci in 0..c {
        for i in 0..r {
            for j in 0..r {
                let dst = &mut out[(ci * r * r + i * r + j) * hw..][..hw];
                let src = &x[ci * hw * r * r..][..hw * r * r];
                for y in 0..h {
                    for xx in 0..w {
                        dst[y * w + xx] = src[(y * r + i) * ow + xx * r + j];
                    }
                }
            }
        }
    }
}
