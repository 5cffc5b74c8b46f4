use pdeup_core::loss::{
    composite_loss, enforce_hard_bc, LossBatch, LossWeights, OutputLayout, PhysicsLoss,
};
use pdeup_core::pde::analytic_solution;
use pdeup_core::{make_grid, BoundaryInitialSpec, Grid2D, Rect, StateSnapshot, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn analytic_outputs(g: &Grid2D, layout: OutputLayout, dt: f64, t0: f64, n: usize) -> Vec<Vec<StateSnapshot>> {
    let per = layout.snapshots_per_output();
    let dtp = layout.pair_dt(dt);
    (0..n)
        .map(|o| {
            (0..per)
                .map(|p| analytic_solution(g, t0 + o as f64 * dt + p as f64 * dtp))
                .collect()
        })
        .collect()
}

fn random_outputs(g: &Grid2D, layout: OutputLayout, dt: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<StateSnapshot>> {
    let bcs = BoundaryInitialSpec::default();
    let mut outs = analytic_outputs(g, layout, dt, 0.0, n);
    for s in outs.iter_mut().flatten() {
        for var in Variable::ALL {
            s.get_mut(var).mapv_inplace(|x| x + rng.gen_range(-0.3..0.3));
        }
        *s = enforce_hard_bc(s, &bcs, g);
    }
    outs
}

#[test]
fn analytic_predictions_sit_at_truncation_floor() {
    let g = make_grid(64, Rect::UNIT).unwrap();
    let loss = PhysicsLoss::new(g, LossWeights::default());
    let dt = 0.005;
    let outs = analytic_outputs(&g, OutputLayout::Spatial, dt, 0.0, 8);
    let b = LossBatch {
        layout: OutputLayout::Spatial,
        dt,
        outputs: &outs,
        previous: None,
        endpoint_inputs: None,
        includes_initial: true,
    };
    let r = composite_loss(&loss, &b).unwrap();
    assert!(r.pde_within <= 1e-3 && r.pde_across <= 1e-3, "{r:?}");
    assert!(r.constraints <= 2e-4, "{r:?}");
    assert!(r.ic < 1e-15);
    assert!(r.total <= 5.0 * 1e-3 + 2e-4, "{r:?}");
}

#[test]
fn loss_ignores_pre_enforcement_boundary_values() {
    let g = make_grid(20, Rect::UNIT).unwrap();
    let bcs = BoundaryInitialSpec::default();
    let loss = PhysicsLoss::new(g, LossWeights::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw = analytic_outputs(&g, OutputLayout::Spatial, 0.01, 0.0, 3);
    let mut perturbed = raw.clone();
    for s in perturbed.iter_mut().flatten() {
        for ((j, i), u) in s.get_mut(Variable::U).indexed_iter_mut() {
            if g.is_boundary(j, i) {
                *u += rng.gen_range(-5.0..5.0);
            }
        }
        for ((j, i), v) in s.get_mut(Variable::V).indexed_iter_mut() {
            if g.is_boundary(j, i) {
                *v += rng.gen_range(-5.0..5.0);
            }
        }
    }
    let eval = |outs: &[Vec<StateSnapshot>]| {
        let fixed: Vec<Vec<StateSnapshot>> = outs
            .iter()
            .map(|o| o.iter().map(|s| enforce_hard_bc(s, &bcs, &g)).collect())
            .collect();
        let b = LossBatch {
            layout: OutputLayout::Spatial,
            dt: 0.01,
            outputs: &fixed,
            previous: None,
            endpoint_inputs: None,
            includes_initial: true,
        };
        composite_loss(&loss, &b).unwrap()
    };
    assert_eq!(eval(&raw), eval(&perturbed));
}

/// Central difference of a piecewise-linear function. The largest step whose
/// forward and backward slopes agree is used, so no kink lies inside the
/// stencil and rounding noise stays small.
fn central_difference(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let f0 = f(0.0);
    let mut last = (0.0, 0.0);
    for h in [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5] {
        let (fp, fm) = (f(h), f(-h));
        let noise = 4.0 * f64::EPSILON * (f0.abs() + fp.abs() + fm.abs()) / h;
        let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
        last = ((fp - fm) / (2.0 * h), noise);
        if (fwd - bwd).abs() <= 2.0 * noise + 1e-7 * fwd.abs().max(bwd.abs()) {
            return last;
        }
    }
    last
}

fn gradient_check(layout: OutputLayout, dt: f64, n_out: usize, probes: usize, seed: u64) -> f64 {
    let g = make_grid(64, Rect::UNIT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loss = PhysicsLoss::new(g, LossWeights::default());
    let outs = random_outputs(&g, layout, dt, n_out + 1, &mut rng);
    let (prev, outs) = (outs[0].clone(), outs[1..].to_vec());
    let inputs: Vec<[StateSnapshot; 2]> = outs
        .iter()
        .map(|o| {
            let mut a = o[0].clone();
            let mut b = o.last().unwrap().clone();
            for var in Variable::ALL {
                a.get_mut(var).mapv_inplace(|x| x + rng.gen_range(-0.05..0.05));
                b.get_mut(var).mapv_inplace(|x| x + rng.gen_range(-0.05..0.05));
            }
            [a, b]
        })
        .collect();
    let mut outs = outs;
    // Make the first output start at t=0 so the IC term is active too.
    let shift = outs[0][0].t;
    for s in outs.iter_mut().flatten() {
        s.t -= shift;
    }
    let mut prev = prev;
    for s in prev.iter_mut() {
        s.t -= shift;
    }
    let temporal = matches!(layout, OutputLayout::Temporal { .. });
    let total = |pr: &[StateSnapshot], o: &[Vec<StateSnapshot>]| {
        let b = LossBatch {
            layout,
            dt,
            outputs: o,
            previous: Some(pr),
            endpoint_inputs: temporal.then_some(&inputs[..]),
            includes_initial: true,
        };
        loss.evaluate(&b, false).unwrap().breakdown.total
    };
    let b = LossBatch {
        layout,
        dt,
        outputs: &outs,
        previous: Some(&prev),
        endpoint_inputs: temporal.then_some(&inputs[..]),
        includes_initial: true,
    };
    let ev = loss.evaluate(&b, true).unwrap();
    let (grads, prev_grads) = (ev.grads.unwrap(), ev.previous_grad.unwrap());

    let mut worst = 0.0f64;
    let mut done = 0;
    while done < probes {
        // Index `outs.len()` probes the output from the previous batch.
        let o = rng.gen_range(0..=outs.len());
        let p = rng.gen_range(0..prev.len());
        let var = Variable::ALL[rng.gen_range(0..4)];
        let j = rng.gen_range(1..63);
        let i = rng.gen_range(1..63);
        let at = |delta: f64| {
            let (mut pr, mut moved) = (prev.clone(), outs.clone());
            let target = if o == moved.len() { &mut pr } else { &mut moved[o] };
            target[p].get_mut(var)[[j, i]] += delta;
            total(&pr, &moved)
        };
        let (fd, noise) = central_difference(at);
        let an = if o == outs.len() { &prev_grads } else { &grads[o] }[p].get(var)[[j, i]];
        // A node the loss does not depend on has no relative error to speak of.
        if an == 0.0 && fd.abs() <= noise {
            continue;
        }
        done += 1;
        worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()));
    }
    worst
}

#[test]
fn spatial_gradient_matches_finite_differences() {
    let worst = gradient_check(OutputLayout::Spatial, 0.005, 3, 32, 17);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn temporal_gradient_matches_finite_differences() {
    let worst = gradient_check(OutputLayout::Temporal { k: 2 }, 0.005, 3, 32, 23);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn zero_weights_give_zero_loss_and_gradient() {
    let g = make_grid(16, Rect::UNIT).unwrap();
    let loss = PhysicsLoss::new(g, LossWeights::ZERO);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let outs = random_outputs(&g, OutputLayout::Spatial, 0.01, 3, &mut rng);
    let b = LossBatch {
        layout: OutputLayout::Spatial,
        dt: 0.01,
        outputs: &outs,
        previous: None,
        endpoint_inputs: None,
        includes_initial: true,
    };
    let e = loss.evaluate(&b, true).unwrap();
    assert_eq!(e.breakdown.total, 0.0);
    assert!(e.grads.unwrap().iter().flatten().all(|s| s.fields().iter().all(|f| f.iter().all(|x| *x == 0.0))));
}
