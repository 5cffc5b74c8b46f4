//! Residual dense network with a hand-written backward pass.

use ndarray::{Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RdnConfig;
use crate::conv::{pixel_shuffle, pixel_unshuffle, Conv, Reflect};
use crate::error::{NnError, Result};
use crate::gemm::{gemm, Strides};

/// Output head of a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Head {
    /// Channel-expanding conv, depth-to-space by r, then the output conv.
    Upsample { r: usize },
    /// Output conv at the input resolution.
    Direct,
}

/// Affine input normalization, undone on the output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineNorm {
    pub shift: f64,
    pub scale: f64,
}

impl AffineNorm {
    pub const IDENTITY: AffineNorm = AffineNorm { shift: 0.0, scale: 1.0 };
}

#[derive(Clone, Debug)]
struct Block {
    dense: Vec<Conv>,
    lff: Conv,
}

#[derive(Clone, Debug)]
struct Layers {
    sfe1: Conv,
    sfe2: Conv,
    blocks: Vec<Block>,
    gff1: Conv,
    gff2: Conv,
    up: Option<Conv>,
    out: Conv,
}

impl Layers {
    fn build(cfg: &RdnConfig, head: Head) -> (Self, usize) {
        let mut offset = 0;
        let mut conv = |c_in, c_out, k| {
            let c = Conv { c_in, c_out, k, offset };
            offset += c.n_params();
            c
        };
        let (k, g0, g) = (cfg.kernel_size, cfg.feature_channels, cfg.growth_channels);
        let sfe1 = conv(cfg.in_channels, g0, k);
        let sfe2 = conv(g0, g0, k);
        let blocks = (0..cfg.n_blocks)
            .map(|_| Block {
                dense: (0..cfg.layers_per_block).map(|l| conv(g0 + l * g, g, k)).collect(),
                lff: conv(g0 + cfg.layers_per_block * g, g0, 1),
            })
            .collect();
        let gff1 = conv(cfg.n_blocks * g0, g0, 1);
        let gff2 = conv(g0, g0, k);
        let up = match head {
            Head::Upsample { r } => Some(conv(g0, g0 * r * r, k)),
            Head::Direct => None,
        };
        let out = conv(g0, cfg.out_channels, k);
        let layers = Layers { sfe1, sfe2, blocks, gff1, gff2, up, out };
        (layers, offset)
    }

    fn all(&self) -> Vec<Conv> {
        let mut v = vec![self.sfe1, self.sfe2];
        for b in &self.blocks {
            v.extend(b.dense.iter().copied());
            v.push(b.lff);
        }
        v.extend([self.gff1, self.gff2]);
        v.extend(self.up);
        v.push(self.out);
        v
    }
}

/// Intermediate activations of one forward pass, kept for backward.
#[derive(Clone, Debug)]
pub struct Trace {
    h: usize,
    w: usize,
    x: Vec<f64>,
    f_m1: Vec<f64>,
    /// Dense concatenation buffers; rows `0..G0` hold the block input.
    bufs: Vec<Vec<f64>>,
    f_last: Vec<f64>,
    gff: Vec<f64>,
    fdf: Vec<f64>,
    shuffled: Vec<f64>,
}

/// One residual dense network with its parameters.
#[derive(Clone, Debug)]
pub struct Rdn {
    cfg: RdnConfig,
    head: Head,
    seed: u64,
    norm: AffineNorm,
    layers: Layers,
    params: Vec<f64>,
}

impl Rdn {
    /// Spatial super-resolution network: `in × H × W → out × rH × rW`.
    pub fn spatial(cfg: &RdnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Self::with_head(cfg, Head::Upsample { r: cfg.upsample_ratio }, seed)
    }

    /// Temporal network for `k` sub-steps: `in × H × W → (k+1) × H × W`.
    pub fn temporal(cfg: &RdnConfig, k: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if k < 2 {
            return Err(NnError::Config(format!("temporal factor k must be at least 2, got {k}")));
        }
        if cfg.out_channels != k + 1 {
            return Err(NnError::Config(format!(
                "temporal model with k={k} needs out_channels={}, got {}",
                k + 1,
                cfg.out_channels
            )));
        }
        Self::with_head(cfg, Head::Direct, seed)
    }

    /// Builds a network with an explicit head and fan-in uniform init.
    pub fn with_head(cfg: &RdnConfig, head: Head, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if let Head::Upsample { r } = head {
            if r == 0 {
                return Err(NnError::Config("upsample ratio must be positive".into()));
            }
        }
        let (layers, n) = Layers::build(cfg, head);
        let mut params = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in layers.all() {
            let bound = 1.0 / (c.fan_in() as f64).sqrt();
            for p in &mut params[c.range()] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            head,
            seed,
            norm: AffineNorm::IDENTITY,
            layers,
            params,
        })
    }

    /// Sets the output layer to zero so the network starts at the zero map.
    pub fn zero_head(&mut self) {
        let r = self.layers.out.range();
        self.params[r].fill(0.0);
    }

    pub fn config(&self) -> &RdnConfig {
        &self.cfg
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn norm(&self) -> AffineNorm {
        self.norm
    }

    pub fn set_norm(&mut self, norm: AffineNorm) -> Result<()> {
        if !(norm.scale.is_finite() && norm.scale > 0.0 && norm.shift.is_finite()) {
            return Err(NnError::Config(format!("invalid normalization {norm:?}")));
        }
        self.norm = norm;
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// (channels, height, width) of the output for an `h × w` input.
    pub fn output_shape(&self, h: usize, w: usize) -> (usize, usize, usize) {
        let r = match self.head {
            Head::Upsample { r } => r,
            Head::Direct => 1,
        };
        (self.cfg.out_channels, h * r, w * r)
    }

    fn check_input(&self, x: &ArrayView3<f64>) -> Result<()> {
        let (c, h, w) = x.dim();
        let min = self.cfg.min_extent();
        if c != self.cfg.in_channels || h < min || w < min {
            return Err(NnError::Shape {
                what: "network input",
                expected: vec![self.cfg.in_channels, h.max(min), w.max(min)],
                got: vec![c, h, w],
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView3<f64>) -> Result<Array3<f64>> {
        self.forward_traced(x).map(|(y, _)| y)
    }

    pub fn forward_traced(&self, x: ArrayView3<f64>) -> Result<(Array3<f64>, Trace)> {
        self.check_input(&x)?;
        let (_, h, w) = x.dim();
        let AffineNorm { shift, scale } = self.norm;
        let xin: Vec<f64> = x.iter().map(|v| (v - shift) / scale).collect();
        let (out, trace) = self.run(xin, h, w);
        let (c, oh, ow) = self.output_shape(h, w);
        let y = Array3::from_shape_vec((c, oh, ow), out.into_iter().map(|v| v * scale + shift).collect())
            .expect("output buffer matches output shape");
        Ok((y, trace))
    }

    fn run(&self, x: Vec<f64>, h: usize, w: usize) -> (Vec<f64>, Trace) {
        let (cfg, p, l) = (&self.cfg, &self.params[..], &self.layers);
        let (g0, g, k) = (cfg.feature_channels, cfg.growth_channels, cfg.kernel_size);
        let kk = k * k;
        let rf = Reflect::new(h, w, k);
        let hw = rf.hw();
        let c_tot = g0 + cfg.layers_per_block * g;
        let mut cols = vec![0.0; c_tot * kk * hw];

        rf.im2col(&x, 0, cfg.in_channels, &mut cols);
        let mut f_m1 = vec![0.0; g0 * hw];
        l.sfe1.forward(p, &cols, hw, &mut f_m1);
        rf.im2col(&f_m1, 0, g0, &mut cols);
        let mut cur = vec![0.0; c_tot * hw];
        l.sfe2.forward(p, &cols, hw, &mut cur);

        let mut bufs = Vec::with_capacity(l.blocks.len());
        let mut f_last = Vec::new();
        for (d, block) in l.blocks.iter().enumerate() {
            let mut buf = cur;
            rf.im2col(&buf, 0, g0, &mut cols);
            for (li, conv) in block.dense.iter().enumerate() {
                let c_in = g0 + li * g;
                let out = &mut buf[c_in * hw..(c_in + g) * hw];
                conv.forward(p, &cols[..c_in * kk * hw], hw, out);
                out.iter_mut().for_each(|v| *v = v.max(0.0));
                if li + 1 < block.dense.len() {
                    rf.im2col(&buf, c_in, c_in + g, &mut cols);
                }
            }
            let mut next = vec![0.0; if d + 1 < l.blocks.len() { c_tot * hw } else { g0 * hw }];
            block.lff.forward(p, &buf, hw, &mut next);
            for (n, b) in next[..g0 * hw].iter_mut().zip(&buf[..g0 * hw]) {
                *n += b;
            }
            bufs.push(buf);
            if d + 1 < l.blocks.len() {
                cur = next;
            } else {
                f_last = next;
                cur = Vec::new();
            }
        }

        // Global fusion of the concatenated block outputs, one slice at a time.
        let nb = l.blocks.len();
        let mut gff = vec![0.0; g0 * hw];
        {
            let wts = &p[l.gff1.offset..l.gff1.offset + l.gff1.n_weights()];
            let bias = &p[l.gff1.offset + l.gff1.n_weights()..l.gff1.range().end];
            for (row, &b) in gff.chunks_exact_mut(hw).zip(bias) {
                row.fill(b);
            }
            for d in 0..nb {
                let fd = block_output(&bufs, &f_last, d, g0 * hw);
                gemm(g0, g0, hw, 1.0, &wts[d * g0..], Strides(nb as isize * g0 as isize, 1), fd, Strides::rm(hw), 1.0, &mut gff, Strides::rm(hw));
            }
        }
        rf.im2col(&gff, 0, g0, &mut cols);
        let mut fdf = vec![0.0; g0 * hw];
        l.gff2.forward(p, &cols, hw, &mut fdf);
        for (a, b) in fdf.iter_mut().zip(&f_m1) {
            *a += b;
        }

        rf.im2col(&fdf, 0, g0, &mut cols);
        let (out, shuffled) = match (self.head, l.up) {
            (Head::Upsample { r }, Some(up)) => {
                let mut pre = vec![0.0; up.c_out * hw];
                up.forward(p, &cols, hw, &mut pre);
                let mut sh = vec![0.0; pre.len()];
                pixel_shuffle(&pre, g0, h, w, r, &mut sh);
                let rf2 = Reflect::new(h * r, w * r, k);
                let mut cols2 = vec![0.0; g0 * kk * rf2.hw()];
                rf2.im2col(&sh, 0, g0, &mut cols2);
                let mut out = vec![0.0; l.out.c_out * rf2.hw()];
                l.out.forward(p, &cols2, rf2.hw(), &mut out);
                (out, sh)
            }
            _ => {
                let mut out = vec![0.0; l.out.c_out * hw];
                l.out.forward(p, &cols, hw, &mut out);
                (out, Vec::new())
            }
        };
        let trace = Trace { h, w, x, f_m1, bufs, f_last, gff, fdf, shuffled };
        (out, trace)
    }

    /// Accumulates into `grad` the gradient of `⟨d_out, y⟩` with respect to
    /// the parameters, where `y` is the output recorded in `trace`.
    pub fn backward(&self, trace: &Trace, d_out: ArrayView3<f64>, grad: &mut [f64]) -> Result<()> {
        let (h, w) = (trace.h, trace.w);
        let want = self.output_shape(h, w);
        if d_out.dim() != want {
            return Err(NnError::Shape {
                what: "output gradient",
                expected: vec![want.0, want.1, want.2],
                got: d_out.shape().to_vec(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(NnError::Shape {
                what: "gradient buffer",
                expected: vec![self.params.len()],
                got: vec![grad.len()],
            });
        }
        let scale = self.norm.scale;
        let dy: Vec<f64> = d_out.iter().map(|v| v * scale).collect();
        self.run_backward(trace, &dy, grad);
        Ok(())
    }

    fn run_backward(&self, t: &Trace, dy: &[f64], grad: &mut [f64]) {
        let (cfg, p, l) = (&self.cfg, &self.params[..], &self.layers);
        let (g0, g, k) = (cfg.feature_channels, cfg.growth_channels, cfg.kernel_size);
        let kk = k * k;
        let rf = Reflect::new(t.h, t.w, k);
        let hw = rf.hw();
        let c_tot = g0 + cfg.layers_per_block * g;
        let mut cols = vec![0.0; c_tot * kk * hw];
        let mut dcols = vec![0.0; c_tot * kk * hw];

        // Head.
        let mut d_fdf = vec![0.0; g0 * hw];
        match (self.head, l.up) {
            (Head::Upsample { r }, Some(up)) => {
                let rf2 = Reflect::new(t.h * r, t.w * r, k);
                let hw2 = rf2.hw();
                let mut cols2 = vec![0.0; g0 * kk * hw2];
                rf2.im2col(&t.shuffled, 0, g0, &mut cols2);
                let mut dcols2 = vec![0.0; g0 * kk * hw2];
                l.out.backward(p, &cols2, dy, hw2, grad, Some(&mut dcols2));
                let mut d_sh = vec![0.0; g0 * hw2];
                rf2.col2im(&dcols2, 0, g0, &mut d_sh);
                let mut d_pre = vec![0.0; up.c_out * hw];
                pixel_unshuffle(&d_sh, g0, t.h, t.w, r, &mut d_pre);
                rf.im2col(&t.fdf, 0, g0, &mut cols);
                let dc = &mut dcols[..g0 * kk * hw];
                dc.fill(0.0);
                up.backward(p, &cols, &d_pre, hw, grad, Some(dc));
                rf.col2im(dc, 0, g0, &mut d_fdf);
            }
            _ => {
                rf.im2col(&t.fdf, 0, g0, &mut cols);
                let dc = &mut dcols[..g0 * kk * hw];
                dc.fill(0.0);
                l.out.backward(p, &cols, dy, hw, grad, Some(dc));
                rf.col2im(dc, 0, g0, &mut d_fdf);
            }
        }

        // Global residual and fusion.
        let mut d_fm1 = d_fdf.clone();
        rf.im2col(&t.gff, 0, g0, &mut cols);
        let mut d_gff = vec![0.0; g0 * hw];
        {
            let dc = &mut dcols[..g0 * kk * hw];
            dc.fill(0.0);
            l.gff2.backward(p, &cols, &d_fdf, hw, grad, Some(dc));
            rf.col2im(dc, 0, g0, &mut d_gff);
        }
        let nb = l.blocks.len();
        let mut d_cat: Vec<Vec<f64>> = Vec::with_capacity(nb);
        {
            let gw = l.gff1.n_weights();
            for d in 0..nb {
                let fd = block_output(&t.bufs, &t.f_last, d, g0 * hw);
                let gslice = &mut grad[l.gff1.offset + d * g0..l.gff1.offset + gw];
                gemm(g0, hw, g0, 1.0, &d_gff, Strides::rm(hw), fd, Strides::tr(hw), 1.0, gslice, Strides(nb as isize * g0 as isize, 1));
                let wts = &p[l.gff1.offset + d * g0..l.gff1.offset + gw];
                let mut dd = vec![0.0; g0 * hw];
                gemm(g0, g0, hw, 1.0, wts, Strides(1, nb as isize * g0 as isize), &d_gff, Strides::rm(hw), 0.0, &mut dd, Strides::rm(hw));
                d_cat.push(dd);
            }
            let gb = &mut grad[l.gff1.offset + gw..l.gff1.range().end];
            for (row, b) in d_gff.chunks_exact(hw).zip(gb.iter_mut()) {
                *b += row.iter().sum::<f64>();
            }
        }

        // Dense blocks in reverse; `carry` is the gradient of the block input.
        let mut carry: Option<Vec<f64>> = None;
        let mut dbuf = vec![0.0; c_tot * hw];
        for d in (0..nb).rev() {
            let block = &l.blocks[d];
            let buf = &t.bufs[d];
            let mut d_f = std::mem::take(&mut d_cat[d]);
            if let Some(c) = carry.take() {
                for (a, b) in d_f.iter_mut().zip(&c) {
                    *a += b;
                }
            }
            dbuf.fill(0.0);
            dbuf[..g0 * hw].copy_from_slice(&d_f);
            block.lff.backward(p, buf, &d_f, hw, grad, Some(&mut dbuf));
            let n_in = c_tot - g;
            rf.im2col(buf, 0, n_in, &mut cols);
            dcols[..n_in * kk * hw].fill(0.0);
            for (li, conv) in block.dense.iter().enumerate().rev() {
                let ch0 = g0 + li * g;
                if li + 1 < block.dense.len() {
                    rf.col2im(&dcols, ch0, ch0 + g, &mut dbuf);
                }
                let act = &buf[ch0 * hw..(ch0 + g) * hw];
                let dact = &mut dbuf[ch0 * hw..(ch0 + g) * hw];
                for (dv, &a) in dact.iter_mut().zip(act) {
                    if a <= 0.0 {
                        *dv = 0.0;
                    }
                }
                let dact = &dbuf[ch0 * hw..(ch0 + g) * hw];
                conv.backward(p, &cols[..ch0 * kk * hw], dact, hw, grad, Some(&mut dcols[..ch0 * kk * hw]));
            }
            let mut d_in = dbuf[..g0 * hw].to_vec();
            rf.col2im(&dcols, 0, g0, &mut d_in);
            carry = Some(d_in);
        }

        // Shallow features.
        let d_f0 = carry.unwrap_or_else(|| vec![0.0; g0 * hw]);
        rf.im2col(&t.f_m1, 0, g0, &mut cols);
        {
            let dc = &mut dcols[..g0 * kk * hw];
            dc.fill(0.0);
            l.sfe2.backward(p, &cols, &d_f0, hw, grad, Some(dc));
            rf.col2im(dc, 0, g0, &mut d_fm1);
        }
        rf.im2col(&t.x, 0, cfg.in_channels, &mut cols);
        l.sfe1.backward(p, &cols, &d_fm1, hw, grad, None);
    }
}

/// Output of block `d`: the input rows of the next buffer, or the last output.
fn block_output<'a>(bufs: &'a [Vec<f64>], f_last: &'a [f64], d: usize, n: usize) -> &'a [f64] {
    if d + 1 < bufs.len() {
        &bufs[d + 1][..n]
    } else {
        &f_last[..n]
    }
}
