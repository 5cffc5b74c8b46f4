//! The unsupervised physics objective.
//!
//! ```text
//! L = λ1 (PDE_within + PDE_across) + λ2 Constraints + λ3 IC
//! ```
//!
//! Every term is a mean absolute value. Boundary conditions are imposed
//! exactly on the predictions before the loss is evaluated, so there is no
//! boundary term; [`mask_boundary_gradient`] removes the gradient flowing into
//! overwritten boundary values.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::FieldError;
use crate::grid::Grid2D;
use crate::pde::{cn_residual, constraint_residual, PdeCoefficients};
use crate::state::{BoundaryInitialSpec, StateSnapshot, Variable};
use crate::stencil::{fd_deriv_adjoint_into, Axis};

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Field(#[from] FieldError),

    #[error("need at least {needed} snapshots per output, got {got}")]
    Arity { needed: usize, got: usize },

    #[error("outputs are not aligned in time: {0}")]
    Alignment(String),

    #[error("initial-condition loss applied at t = {0}, expected t = 0")]
    NotInitial(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

type Result<T> = std::result::Result<T, LossError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 5.0,
            lambda2: 1.0,
            lambda3: 10.0,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        [self.lambda1, self.lambda2, self.lambda3]
            .iter()
            .all(|l| *l >= 0.0 && l.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pde_within: f64,
    pub pde_across: f64,
    pub constraints: f64,
    pub ic: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_components(
        pde_within: f64,
        pde_across: f64,
        constraints: f64,
        ic: f64,
        w: &LossWeights,
    ) -> Self {
        LossBreakdown {
            pde_within,
            pde_across,
            constraints,
            ic,
            total: w.lambda1 * (pde_within + pde_across) + w.lambda2 * constraints + w.lambda3 * ic,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.pde_within, self.pde_across, self.constraints, self.ic, self.total]
            .iter()
            .all(|x| x.is_finite())
    }

    /// Component-wise mean; the total is recomputed from `w`.
    pub fn mean(items: &[LossBreakdown], w: &LossWeights) -> Self {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let s = |f: fn(&LossBreakdown) -> f64| pairwise_sum(&items.iter().map(f).collect::<Vec<_>>()) / n;
        LossBreakdown::from_components(
            s(|b| b.pde_within),
            s(|b| b.pde_across),
            s(|b| b.constraints),
            s(|b| b.ic),
            w,
        )
    }
}

/// Which module produced a batch of outputs, which fixes the snapshot
/// count per output and the pairing of the across-output PDE loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputLayout {
    /// Two snapshots at `t` and `t + Δt`.
    Spatial,
    /// `k + 1` snapshots at `t + jΔt/k`.
    Temporal { k: usize },
}

impl OutputLayout {
    pub fn snapshots_per_output(&self) -> usize {
        match self {
            OutputLayout::Spatial => 2,
            OutputLayout::Temporal { k } => k + 1,
        }
    }

    pub fn pair_dt(&self, dt: f64) -> f64 {
        match self {
            OutputLayout::Spatial => dt,
            OutputLayout::Temporal { k } => dt / *k as f64,
        }
    }

    /// Index pairs `(in earlier output, in later output)` of the cross-output
    /// CN residuals between two consecutive outputs.
    pub fn across_pairs(&self) -> Vec<(usize, usize)> {
        match self {
            OutputLayout::Spatial => vec![(1, 1)],
            OutputLayout::Temporal { k } => vec![(k - 1, 0), (*k, 1)],
        }
    }
}

/// Pairwise (tree) summation; fixed order for run-to-run determinism.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn abs_sum(a: &Array2<f64>) -> f64 {
    let v: Vec<f64> = a.iter().map(|x| x.abs()).collect();
    pairwise_sum(&v)
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn scaled_sign(r: &Array2<f64>, scale: f64) -> Array2<f64> {
    r.mapv(|x| scale * signum0(x))
}

const TIME_TOL: f64 = 1e-9;

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Overwrites the boundary ring of `u` with `u_bc(·, t)` and of `v` with its
/// time derivative. Interior values and stresses are untouched.
pub fn enforce_hard_bc(pred: &StateSnapshot, bcs: &BoundaryInitialSpec, grid: &Grid2D) -> StateSnapshot {
    let mut out = pred.clone();
    enforce_hard_bc_in_place(&mut out, bcs, grid);
    out
}

pub fn enforce_hard_bc_in_place(pred: &mut StateSnapshot, bcs: &BoundaryInitialSpec, grid: &Grid2D) {
    let t = pred.t;
    let (ny, nx) = pred.shape();
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_boundary(j, i) {
                let (x, y) = (grid.x(i), grid.y(j));
                pred.get_mut(Variable::U)[[j, i]] = (bcs.u_bc)(x, y, t);
                pred.get_mut(Variable::V)[[j, i]] = (bcs.u_bc_dt)(x, y, t);
            }
        }
    }
}

/// Zeroes the `u` and `v` gradient on the boundary ring, the adjoint of
/// [`enforce_hard_bc`] with respect to the unconstrained prediction.
pub fn mask_boundary_gradient(grad: &mut StateSnapshot, grid: &Grid2D) {
    let (ny, nx) = grad.shape();
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_boundary(j, i) {
                grad.get_mut(Variable::U)[[j, i]] = 0.0;
                grad.get_mut(Variable::V)[[j, i]] = 0.0;
            }
        }
    }
}

fn add_into(dst: &mut StateSnapshot, src: &StateSnapshot) {
    for var in Variable::ALL {
        *dst.get_mut(var) += src.get(var);
    }
}

/// One training batch of consecutive module outputs.
#[derive(Clone, Copy, Debug)]
pub struct LossBatch<'a> {
    pub layout: OutputLayout,
    /// Coarse tuple step `Δt`.
    pub dt: f64,
    /// Consecutive outputs, each with `layout.snapshots_per_output()` snapshots.
    pub outputs: &'a [Vec<StateSnapshot>],
    /// Output immediately preceding `outputs[0]` (from the previous batch),
    /// linked to it by the across-output terms. Its gradient is returned
    /// separately in `LossEvaluation::previous_grad`.
    pub previous: Option<&'a [StateSnapshot]>,
    /// Temporal module only: the two input snapshots of each output, which the
    /// predicted endpoints are tied to.
    pub endpoint_inputs: Option<&'a [[StateSnapshot; 2]]>,
    /// Whether `outputs[0]` starts at `t = 0` and receives the IC loss.
    pub includes_initial: bool,
}

#[derive(Clone, Debug)]
pub struct PhysicsLoss {
    pub grid: Grid2D,
    pub coeff: PdeCoefficients,
    pub bcs: BoundaryInitialSpec,
    pub weights: LossWeights,
    /// Adds `|out_i(t+Δt) − out_{i+1}(t+Δt)|` to the constraint term (spatial module).
    pub overlap_consistency: bool,
}

/// Loss value and gradient with respect to every predicted snapshot.
pub struct LossEvaluation {
    pub breakdown: LossBreakdown,
    pub grads: Option<Vec<Vec<StateSnapshot>>>,
    /// Gradient with respect to `LossBatch::previous`, when both were given.
    pub previous_grad: Option<Vec<StateSnapshot>>,
}

impl PhysicsLoss {
    pub fn new(grid: Grid2D, weights: LossWeights) -> Self {
        PhysicsLoss {
            grid,
            coeff: PdeCoefficients::default(),
            bcs: BoundaryInitialSpec::default(),
            weights,
            overlap_consistency: true,
        }
    }

    fn nodes(&self) -> usize {
        self.grid.len()
    }

    /// `Σ|r_u| + Σ|r_v|` for one pair; with `scale`, also the gradient of
    /// `scale · Σ|r|` with respect to both snapshots.
    fn cn_term(
        &self,
        a: &StateSnapshot,
        b: &StateSnapshot,
        dt: f64,
        scale: Option<f64>,
    ) -> Result<(f64, Option<(StateSnapshot, StateSnapshot)>)> {
        let (r_u, r_v) = cn_residual(a, b, dt, &self.coeff, &self.grid)?;
        let value = abs_sum(&r_u) + abs_sum(&r_v);
        let Some(scale) = scale else {
            return Ok((value, None));
        };
        let shape = self.grid.shape();
        let su = scaled_sign(&r_u, scale);
        let sv = scaled_sign(&r_v, scale);
        let inv = 1.0 / dt;
        let half_k = 0.5 * self.coeff.wave_factor();
        let mut ga = StateSnapshot::zeros(a.t, shape);
        let mut gb = StateSnapshot::zeros(b.t, shape);
        *ga.get_mut(Variable::U) = su.mapv(|s| -s * inv);
        *gb.get_mut(Variable::U) = su.mapv(|s| s * inv);
        *ga.get_mut(Variable::V) = Zip::from(&su).and(&sv).map_collect(|u, v| -0.5 * u - v * inv);
        *gb.get_mut(Variable::V) = Zip::from(&su).and(&sv).map_collect(|u, v| -0.5 * u + v * inv);
        let (hx, hy) = (self.grid.spacing_x(), self.grid.spacing_y());
        for g in [&mut ga, &mut gb] {
            fd_deriv_adjoint_into(sv.view(), Axis::X, hx, -half_k, g.get_mut(Variable::SigmaXz).view_mut())?;
            fd_deriv_adjoint_into(sv.view(), Axis::Y, hy, -half_k, g.get_mut(Variable::SigmaYz).view_mut())?;
        }
        Ok((value, Some((ga, gb))))
    }

    /// `Σ|σxz − ∂u/∂x| + Σ|σyz − ∂u/∂y|` and optionally its scaled gradient.
    fn constraint_term(&self, z: &StateSnapshot, scale: Option<f64>) -> Result<(f64, Option<StateSnapshot>)> {
        let (cx, cy) = constraint_residual(z, &self.grid)?;
        let value = abs_sum(&cx) + abs_sum(&cy);
        let Some(scale) = scale else {
            return Ok((value, None));
        };
        let sx = scaled_sign(&cx, scale);
        let sy = scaled_sign(&cy, scale);
        let mut g = StateSnapshot::zeros(z.t, self.grid.shape());
        fd_deriv_adjoint_into(sx.view(), Axis::X, self.grid.spacing_x(), -1.0, g.get_mut(Variable::U).view_mut())?;
        fd_deriv_adjoint_into(sy.view(), Axis::Y, self.grid.spacing_y(), -1.0, g.get_mut(Variable::U).view_mut())?;
        *g.get_mut(Variable::SigmaXz) = sx;
        *g.get_mut(Variable::SigmaYz) = sy;
        Ok((value, Some(g)))
    }

    /// `Σ_vars Σ|a − b|`; the gradient is with respect to `a` (negate for `b`).
    fn diff_term(&self, a: &StateSnapshot, b: &StateSnapshot, scale: Option<f64>) -> (f64, Option<StateSnapshot>) {
        let mut value = 0.0;
        let mut g = scale.map(|_| StateSnapshot::zeros(a.t, a.shape()));
        for var in Variable::ALL {
            let d = a.get(var) - b.get(var);
            value += abs_sum(&d);
            if let (Some(g), Some(s)) = (g.as_mut(), scale) {
                *g.get_mut(var) = scaled_sign(&d, s);
            }
        }
        (value, g)
    }

    fn ic_term(&self, z: &StateSnapshot, scale: Option<f64>) -> Result<(f64, Option<StateSnapshot>)> {
        if !same_time(z.t, 0.0) {
            return Err(LossError::NotInitial(z.t));
        }
        z.check_grid(&self.grid)?;
        let du = z.u() - &self.bcs.u0_on(&self.grid);
        let dv = z.v() - &self.bcs.v0_on(&self.grid);
        let value = abs_sum(&du) + abs_sum(&dv);
        let g = scale.map(|s| {
            let mut g = StateSnapshot::zeros(z.t, z.shape());
            *g.get_mut(Variable::U) = scaled_sign(&du, s);
            *g.get_mut(Variable::V) = scaled_sign(&dv, s);
            g
        });
        Ok((value, g))
    }

    fn check_output(&self, out: &[StateSnapshot], layout: OutputLayout, dt_pair: f64) -> Result<()> {
        let needed = layout.snapshots_per_output();
        if out.len() != needed {
            return Err(LossError::Arity {
                needed,
                got: out.len(),
            });
        }
        for s in out {
            if s.shape() != self.grid.shape() {
                return Err(LossError::Shape(format!(
                    "snapshot {:?} on grid {:?}",
                    s.shape(),
                    self.grid.shape()
                )));
            }
        }
        check_spacing(out, dt_pair)
    }

    pub fn evaluate(&self, batch: &LossBatch<'_>, want_grad: bool) -> Result<LossEvaluation> {
        let layout = batch.layout;
        let dtp = layout.pair_dt(batch.dt);
        let n = self.nodes() as f64;
        let w = &self.weights;
        for out in batch.outputs {
            self.check_output(out, layout, dtp)?;
        }
        if let Some(prev) = batch.previous {
            self.check_output(prev, layout, dtp)?;
        }

        let mut grads: Option<Vec<Vec<StateSnapshot>>> = want_grad.then(|| {
            batch
                .outputs
                .iter()
                .map(|o| o.iter().map(|s| StateSnapshot::zeros(s.t, s.shape())).collect())
                .collect()
        });

        // Within-output PDE residuals.
        let pairs_per_output = layout.snapshots_per_output() - 1;
        let within_count = batch.outputs.len() * pairs_per_output;
        let mut within_sums = Vec::with_capacity(within_count);
        let scale = (want_grad && within_count > 0).then(|| w.lambda1 / (within_count as f64 * 2.0 * n));
        for (o, out) in batch.outputs.iter().enumerate() {
            for p in 0..pairs_per_output {
                let (v, g) = self.cn_term(&out[p], &out[p + 1], dtp, scale)?;
                within_sums.push(v);
                if let (Some(gs), Some((ga, gb))) = (grads.as_mut(), g) {
                    add_into(&mut gs[o][p], &ga);
                    add_into(&mut gs[o][p + 1], &gb);
                }
            }
        }
        let pde_within = mean_of(&within_sums, 2.0 * n);

        let mut prev_grad: Option<Vec<StateSnapshot>> = batch
            .previous
            .filter(|_| want_grad)
            .map(|p| p.iter().map(|s| StateSnapshot::zeros(s.t, s.shape())).collect());

        // Across-output PDE residuals; `None` marks the predecessor from the previous batch.
        let mut chain: Vec<(Option<usize>, usize)> = Vec::new();
        let mut links: Vec<(Option<usize>, usize)> = Vec::new();
        if batch.previous.is_some() && !batch.outputs.is_empty() {
            links.push((None, 0));
        }
        for o in 1..batch.outputs.len() {
            links.push((Some(o - 1), o));
        }
        let pairs = layout.across_pairs();
        for (from, to) in &links {
            let earlier = match from {
                Some(i) => &batch.outputs[*i][..],
                None => batch.previous.expect("link to previous"),
            };
            let later = &batch.outputs[*to];
            let (te, tl) = (earlier.last().expect("non-empty").t, later[0].t);
            if !same_time(te, tl) {
                return Err(LossError::Alignment(format!(
                    "output ending at t = {te} followed by output starting at t = {tl}"
                )));
            }
            chain.push((*from, *to));
        }
        let across_count = chain.len() * pairs.len();
        let mut across_sums = Vec::with_capacity(across_count);
        let scale = (want_grad && across_count > 0).then(|| w.lambda1 / (across_count as f64 * 2.0 * n));
        for (from, to) in &chain {
            for &(pa, pb) in &pairs {
                let a = match from {
                    Some(i) => &batch.outputs[*i][pa],
                    None => &batch.previous.expect("link to previous")[pa],
                };
                let b = &batch.outputs[*to][pb];
                let (v, g) = self.cn_term(a, b, dtp, scale)?;
                across_sums.push(v);
                if let (Some(gs), Some((ga, gb))) = (grads.as_mut(), g) {
                    match from {
                        Some(i) => add_into(&mut gs[*i][pa], &ga),
                        None => add_into(&mut prev_grad.as_mut().expect("previous gradient")[pa], &ga),
                    }
                    add_into(&mut gs[*to][pb], &gb);
                }
            }
        }
        let pde_across = mean_of(&across_sums, 2.0 * n);

        // Constitutive constraints on every predicted snapshot.
        let snap_count: usize = batch.outputs.iter().map(Vec::len).sum();
        let scale = (want_grad && snap_count > 0).then(|| w.lambda2 / (snap_count as f64 * 2.0 * n));
        let mut c_sums = Vec::with_capacity(snap_count);
        for (o, out) in batch.outputs.iter().enumerate() {
            for (p, z) in out.iter().enumerate() {
                let (v, g) = self.constraint_term(z, scale)?;
                c_sums.push(v);
                if let (Some(gs), Some(g)) = (grads.as_mut(), g) {
                    add_into(&mut gs[o][p], &g);
                }
            }
        }
        let mut constraints = mean_of(&c_sums, 2.0 * n);

        // Temporal endpoints tied to their inputs.
        if let (OutputLayout::Temporal { k }, Some(inputs)) = (layout, batch.endpoint_inputs) {
            if inputs.len() != batch.outputs.len() {
                return Err(LossError::Shape(format!(
                    "{} endpoint pairs for {} outputs",
                    inputs.len(),
                    batch.outputs.len()
                )));
            }
            let count = 2 * inputs.len();
            let scale = (want_grad && count > 0).then(|| w.lambda2 / (count as f64 * 4.0 * n));
            let mut sums = Vec::with_capacity(count);
            for (o, (out, inp)) in batch.outputs.iter().zip(inputs).enumerate() {
                for (p, target) in [(0, &inp[0]), (k, &inp[1])] {
                    if target.shape() != out[p].shape() {
                        return Err(LossError::Shape("endpoint input on a different grid".into()));
                    }
                    let (v, g) = self.diff_term(&out[p], target, scale);
                    sums.push(v);
                    if let (Some(gs), Some(g)) = (grads.as_mut(), g) {
                        add_into(&mut gs[o][p], &g);
                    }
                }
            }
            constraints += mean_of(&sums, 4.0 * n);
        }

        // Agreement of overlapping spatial predictions.
        if layout == OutputLayout::Spatial && self.overlap_consistency && !chain.is_empty() {
            let count = chain.len();
            let scale = want_grad.then(|| w.lambda2 / (count as f64 * 4.0 * n));
            let mut sums = Vec::with_capacity(count);
            for (from, to) in &chain {
                let a = match from {
                    Some(i) => &batch.outputs[*i][1],
                    None => &batch.previous.expect("link to previous")[1],
                };
                let b = &batch.outputs[*to][0];
                let (v, g) = self.diff_term(a, b, scale);
                sums.push(v);
                if let (Some(gs), Some(g)) = (grads.as_mut(), g) {
                    match from {
                        Some(i) => add_into(&mut gs[*i][1], &g),
                        None => add_into(&mut prev_grad.as_mut().expect("previous gradient")[1], &g),
                    }
                    for var in Variable::ALL {
                        *gs[*to][0].get_mut(var) -= g.get(var);
                    }
                }
            }
            constraints += mean_of(&sums, 4.0 * n);
        }

        // Initial condition on the first snapshot of the t = 0 tuple.
        let mut ic = 0.0;
        if batch.includes_initial {
            let first = batch
                .outputs
                .first()
                .ok_or(LossError::Arity { needed: 1, got: 0 })?;
            let scale = want_grad.then(|| w.lambda3 / (2.0 * n));
            let (v, g) = self.ic_term(&first[0], scale)?;
            ic = v / (2.0 * n);
            if let (Some(gs), Some(g)) = (grads.as_mut(), g) {
                add_into(&mut gs[0][0], &g);
            }
        }

        Ok(LossEvaluation {
            breakdown: LossBreakdown::from_components(pde_within, pde_across, constraints, ic, w),
            grads,
            previous_grad: prev_grad,
        })
    }
}

fn mean_of(sums: &[f64], per_item: f64) -> f64 {
    if sums.is_empty() {
        0.0
    } else {
        pairwise_sum(sums) / (sums.len() as f64 * per_item)
    }
}

fn check_spacing(out: &[StateSnapshot], dt_pair: f64) -> Result<()> {
    for w in out.windows(2) {
        if !same_time(w[1].t - w[0].t, dt_pair) {
            return Err(LossError::Alignment(format!(
                "snapshots at {} and {} are not {dt_pair} apart",
                w[0].t, w[1].t
            )));
        }
    }
    Ok(())
}

/// Mean absolute CN residual over the adjacent pairs of one output.
pub fn pde_loss_within(
    output: &[StateSnapshot],
    dt_pair: f64,
    coeff: &PdeCoefficients,
    grid: &Grid2D,
) -> Result<f64> {
    if output.len() < 2 {
        return Err(LossError::Arity {
            needed: 2,
            got: output.len(),
        });
    }
    check_spacing(output, dt_pair)?;
    let mut loss = PhysicsLoss::new(*grid, LossWeights::default());
    loss.coeff = *coeff;
    let sums = output
        .windows(2)
        .map(|w| loss.cn_term(&w[0], &w[1], dt_pair, None).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_of(&sums, 2.0 * grid.len() as f64))
}

/// Mean absolute CN residual over the cross-output pairs between an output
/// and its successor.
pub fn pde_loss_across(
    out_i: &[StateSnapshot],
    out_j: &[StateSnapshot],
    layout: OutputLayout,
    dt: f64,
    coeff: &PdeCoefficients,
    grid: &Grid2D,
) -> Result<f64> {
    let mut loss = PhysicsLoss::new(*grid, LossWeights::default());
    loss.coeff = *coeff;
    let outputs = [out_j.to_vec()];
    let batch = LossBatch {
        layout,
        dt,
        outputs: &outputs,
        previous: Some(out_i),
        endpoint_inputs: None,
        includes_initial: false,
    };
    Ok(loss.evaluate(&batch, false)?.breakdown.pde_across)
}

/// Mean `|σ − ∇u|` over all snapshots, plus, when endpoint inputs are given,
/// the mean absolute difference between predicted endpoints and inputs.
pub fn constraint_loss(
    outputs: &[Vec<StateSnapshot>],
    endpoint_inputs: Option<&[[StateSnapshot; 2]]>,
    grid: &Grid2D,
) -> Result<f64> {
    let loss = PhysicsLoss::new(*grid, LossWeights::default());
    let n = grid.len() as f64;
    let mut sums = Vec::new();
    for z in outputs.iter().flatten() {
        sums.push(loss.constraint_term(z, None)?.0);
    }
    let mut value = mean_of(&sums, 2.0 * n);
    if let Some(inputs) = endpoint_inputs {
        let mut ends = Vec::new();
        for (out, inp) in outputs.iter().zip(inputs) {
            let last = out.len().checked_sub(1).ok_or(LossError::Arity { needed: 2, got: 0 })?;
            ends.push(loss.diff_term(&out[0], &inp[0], None).0);
            ends.push(loss.diff_term(&out[last], &inp[1], None).0);
        }
        value += mean_of(&ends, 4.0 * n);
    }
    Ok(value)
}

/// Mean `|u − u0|, |v − v0|` over the grid.
pub fn ic_loss(pred_at_t0: &StateSnapshot, bcs: &BoundaryInitialSpec, grid: &Grid2D) -> Result<f64> {
    let mut loss = PhysicsLoss::new(*grid, LossWeights::default());
    loss.bcs = bcs.clone();
    Ok(loss.ic_term(pred_at_t0, None)?.0 / (2.0 * grid.len() as f64))
}

/// Weighted composite of all terms for one batch.
pub fn composite_loss(loss: &PhysicsLoss, batch: &LossBatch<'_>) -> Result<LossBreakdown> {
    Ok(loss.evaluate(batch, false)?.breakdown)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::{make_grid, Rect};
    use crate::pde::analytic_solution;

    fn grid64() -> Grid2D {
        make_grid(64, Rect::UNIT).unwrap()
    }

    fn analytic_outputs(g: &Grid2D, layout: OutputLayout, dt: f64, n: usize) -> Vec<Vec<StateSnapshot>> {
        let per = layout.snapshots_per_output();
        let dtp = layout.pair_dt(dt);
        (0..n)
            .map(|o| {
                (0..per)
                    .map(|p| analytic_solution(g, o as f64 * dt + p as f64 * dtp))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn hard_bc_overwrites_boundary_only() {
        let g = make_grid(6, Rect::UNIT).unwrap();
        let mut z = StateSnapshot::zeros(0.3, g.shape());
        for var in Variable::ALL {
            z.get_mut(var).fill(3.7);
        }
        let e = enforce_hard_bc(&z, &BoundaryInitialSpec::default(), &g);
        for ((j, i), u) in e.u().indexed_iter() {
            if g.is_boundary(j, i) {
                assert_eq!(u.to_bits(), 0.0f64.to_bits());
                assert_eq!(e.v()[[j, i]].to_bits(), 0.0f64.to_bits());
            } else {
                assert_eq!(*u, 3.7);
            }
            assert_eq!(e.sigma_xz()[[j, i]], 3.7);
        }
        assert_eq!(enforce_hard_bc(&e, &BoundaryInitialSpec::default(), &g), e);
    }

    #[test]
    fn within_loss_examples() {
        let g = grid64();
        let c = PdeCoefficients::default();
        let out = vec![analytic_solution(&g, 0.1), analytic_solution(&g, 0.1025)];
        assert!(pde_loss_within(&out, 0.0025, &c, &g).unwrap() <= 5e-4);
        let zeros = vec![StateSnapshot::zeros(0.0, g.shape()), StateSnapshot::zeros(0.1, g.shape())];
        assert_eq!(pde_loss_within(&zeros, 0.1, &c, &g).unwrap(), 0.0);
        assert!(matches!(
            pde_loss_within(&zeros[..1], 0.1, &c, &g),
            Err(LossError::Arity { .. })
        ));
    }

    #[test]
    fn temporal_within_averages_k_pairs() {
        let g = make_grid(16, Rect::UNIT).unwrap();
        let c = PdeCoefficients::default();
        let out: Vec<_> = (0..3).map(|i| analytic_solution(&g, 0.05 + i as f64 * 0.01)).collect();
        let p0 = pde_loss_within(&out[..2], 0.01, &c, &g).unwrap();
        let p1 = pde_loss_within(&out[1..], 0.01, &c, &g).unwrap();
        let both = pde_loss_within(&out, 0.01, &c, &g).unwrap();
        assert!((both - 0.5 * (p0 + p1)).abs() < 1e-15);
    }

    #[test]
    fn across_loss_examples() {
        let g = grid64();
        let c = PdeCoefficients::default();
        let o = analytic_outputs(&g, OutputLayout::Spatial, 0.0025, 2);
        let v = pde_loss_across(&o[0], &o[1], OutputLayout::Spatial, 0.0025, &c, &g).unwrap();
        assert!(v <= 5e-4 && v > 0.0);
        let ot = analytic_outputs(&g, OutputLayout::Temporal { k: 2 }, 0.005, 2);
        let v = pde_loss_across(&ot[0], &ot[1], OutputLayout::Temporal { k: 2 }, 0.005, &c, &g).unwrap();
        assert!(v <= 5e-4);
        let z: Vec<_> = (0..2).map(|i| StateSnapshot::zeros(i as f64, g.shape())).collect();
        let z2: Vec<_> = (1..3).map(|i| StateSnapshot::zeros(i as f64, g.shape())).collect();
        assert_eq!(pde_loss_across(&z, &z2, OutputLayout::Spatial, 1.0, &c, &g).unwrap(), 0.0);
        let shifted: Vec<_> = (2..4).map(|i| StateSnapshot::zeros(i as f64, g.shape())).collect();
        assert!(matches!(
            pde_loss_across(&z, &shifted, OutputLayout::Spatial, 1.0, &c, &g),
            Err(LossError::Alignment(_))
        ));
    }

    #[test]
    fn constraint_loss_examples() {
        let g = grid64();
        let outs = analytic_outputs(&g, OutputLayout::Spatial, 0.005, 3);
        assert!(constraint_loss(&outs, None, &g).unwrap() <= 1e-4);

        // Affine displacement has exact stresses; endpoints equal inputs.
        let gs = make_grid(9, Rect::UNIT).unwrap();
        let z = |t| {
            StateSnapshot::new(
                t,
                [gs.sample(|x, y| x - 2.0 * y), gs.sample(|_, _| 0.0), gs.sample(|_, _| 1.0), gs.sample(|_, _| -2.0)],
            )
            .unwrap()
        };
        let out = vec![vec![z(0.0), z(0.5), z(1.0)]];
        let inputs = [[z(0.0), z(1.0)]];
        assert!(constraint_loss(&out, Some(&inputs), &gs).unwrap() < 1e-13);

        // σ = 0 with u = sin(πx)sin(πy): the mean |∇u_h| over the grid, by direct sum.
        let zero_sigma = StateSnapshot::new(
            0.0,
            [
                g.sample(|x, y| (PI * x).sin() * (PI * y).sin()),
                Array2::zeros(g.shape()),
                Array2::zeros(g.shape()),
                Array2::zeros(g.shape()),
            ],
        )
        .unwrap();
        let oracle = {
            let mut s = 0.0;
            for j in 0..64 {
                for i in 0..64 {
                    let (x, y) = (g.x(i), g.y(j));
                    s += (PI * (PI * x).cos() * (PI * y).sin()).abs();
                    s += (PI * (PI * x).sin() * (PI * y).cos()).abs();
                }
            }
            s / (2.0 * 64.0 * 64.0)
        };
        let v = constraint_loss(&[vec![zero_sigma]], None, &g).unwrap();
        assert!((v - oracle).abs() < 1e-5, "{v} vs {oracle}");
    }

    #[test]
    fn ic_loss_examples() {
        let g = grid64();
        let bcs = BoundaryInitialSpec::default();
        assert_eq!(ic_loss(&analytic_solution(&g, 0.0), &bcs, &g).unwrap(), 0.0);

        let zero = StateSnapshot::zeros(0.0, g.shape());
        let oracle: f64 = g
            .sample(|x, y| ((PI * x).sin() * (PI * y).sin()).abs())
            .sum()
            / (64.0 * 64.0);
        // Continuum mean of the u term is 4/π²; the grid sum is close to it.
        assert!((oracle - 4.0 / (PI * PI)).abs() < 0.02);
        let v = ic_loss(&zero, &bcs, &g).unwrap();
        assert!((v - 0.5 * oracle).abs() < 1e-14);

        let mut off = analytic_solution(&g, 0.0);
        off.get_mut(Variable::U).mapv_inplace(|u| u + 0.1);
        let v = ic_loss(&off, &bcs, &g).unwrap();
        assert!((2.0 * v - 0.1).abs() < 1e-14);

        let late = analytic_solution(&g, 0.1);
        assert!(matches!(ic_loss(&late, &bcs, &g), Err(LossError::NotInitial(_))));
    }

    #[test]
    fn weighted_total() {
        let w = LossWeights::default();
        let b = LossBreakdown::from_components(0.1, 0.2, 0.3, 0.05, &w);
        assert!((b.total - 2.3).abs() < 1e-15);
        let z = LossBreakdown::from_components(0.1, 0.2, 0.3, 0.05, &LossWeights::ZERO);
        assert_eq!(z.total, 0.0);
        assert_eq!(LossBreakdown::from_components(0.0, 0.0, 0.0, 0.0, &w).total, 0.0);
    }

    #[test]
    fn pde_terms_scale_linearly() {
        let g = make_grid(12, Rect::UNIT).unwrap();
        let loss = PhysicsLoss::new(g, LossWeights::default());
        let mk = |c: f64| -> Vec<Vec<StateSnapshot>> {
            (0..3)
                .map(|o| {
                    (0..2)
                        .map(|p| {
                            let t = (o + p) as f64 * 0.1;
                            let f = std::array::from_fn(|v| {
                                g.sample(|x, y| c * ((v + 1) as f64 * x + t).sin() * (y * 1.7 - t).cos())
                            });
                            StateSnapshot::new(t, f).unwrap()
                        })
                        .collect()
                })
                .collect()
        };
        let eval = |o: &[Vec<StateSnapshot>]| {
            let b = LossBatch {
                layout: OutputLayout::Spatial,
                dt: 0.1,
                outputs: o,
                previous: None,
                endpoint_inputs: None,
                includes_initial: false,
            };
            let r = loss.evaluate(&b, false).unwrap().breakdown;
            r.pde_within + r.pde_across
        };
        let base = eval(&mk(1.0));
        let scaled = eval(&mk(3.0));
        assert!((scaled - 3.0 * base).abs() < 1e-12 * scaled);
    }
}
