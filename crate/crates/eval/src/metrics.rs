use ndarray::ArrayView2;
use pdeup_core::{SnapshotSeries, Variable, NUM_VARIABLES};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Timestamp tolerance when pairing predictions with reference snapshots.
pub const TIME_TOL: f64 = 1e-9;

/// Default start of the evaluation window; the initial velocity is zero so
/// the earliest steps carry no information.
pub const T_MIN: f64 = 0.02;

/// `‖ref − pred‖₂ / ‖ref‖₂ · 100` over grid nodes.
pub fn relative_error(pred: ArrayView2<f64>, reference: ArrayView2<f64>) -> Result<f64> {
    if pred.dim() != reference.dim() {
        return Err(EvalError::Shape {
            what: "prediction",
            expected: reference.dim(),
            got: pred.dim(),
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, r) in pred.iter().zip(reference.iter()) {
        num += (r - p) * (r - p);
        den += r * r;
    }
    if den == 0.0 {
        return Err(EvalError::ZeroReference);
    }
    Ok((num / den).sqrt() * 100.0)
}

/// Errors of one timestep; `None` where the reference field vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub t: f64,
    pub e: [Option<f64>; NUM_VARIABLES],
    /// Past the horizon the models were trained on.
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub t_min: f64,
    pub training_horizon: Option<f64>,
    pub variables: Vec<String>,
    pub rows: Vec<ErrorRow>,
    /// Largest defined error per variable over non-extrapolated rows.
    pub max_error: [Option<f64>; NUM_VARIABLES],
}

impl EvalReport {
    /// Errors of `var` over rows with `t_lo ≤ t ≤ t_hi`, skipping undefined ones.
    pub fn series(&self, var: Variable, t_lo: f64, t_hi: f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.t >= t_lo - TIME_TOL && r.t <= t_hi + TIME_TOL)
            .filter_map(|r| r.e[var.index()].map(|e| (r.t, e)))
            .collect()
    }

    pub fn max_in(&self, var: Variable, t_lo: f64, t_hi: f64) -> Option<f64> {
        self.series(var, t_lo, t_hi).into_iter().map(|(_, e)| e).reduce(f64::max)
    }
}

/// Relative errors of every prediction at `t ≥ t_min` against the reference
/// snapshot at the same time.
pub fn evaluate_run(pred: &SnapshotSeries, hr: &SnapshotSeries, t_min: f64, training_horizon: Option<f64>, method: &str) -> Result<EvalReport> {
    if pred.grid().shape() != hr.grid().shape() {
        return Err(EvalError::Shape {
            what: "prediction grid",
            expected: hr.grid().shape(),
            got: pred.grid().shape(),
        });
    }
    let mut rows = Vec::new();
    for s in pred.snapshots() {
        if s.t < t_min - TIME_TOL {
            continue;
        }
        let idx = ((s.t - hr.t0()) / hr.dt()).round();
        let r = (idx >= 0.0)
            .then(|| hr.snapshots().get(idx as usize))
            .flatten()
            .filter(|r| (r.t - s.t).abs() <= TIME_TOL)
            .ok_or(EvalError::Alignment { t: s.t, tol: TIME_TOL })?;
        let mut e = [None; NUM_VARIABLES];
        for v in Variable::ALL {
            e[v.index()] = match relative_error(s.get(v).view(), r.get(v).view()) {
                Ok(x) => Some(x),
                Err(EvalError::ZeroReference) => None,
                Err(other) => return Err(other),
            };
        }
        let extrapolated = training_horizon.is_some_and(|h| s.t > h + TIME_TOL);
        rows.push(ErrorRow { t: s.t, e, extrapolated });
    }
    let max_error = std::array::from_fn(|v| {
        rows.iter()
            .filter(|r| !r.extrapolated)
            .filter_map(|r| r.e[v])
            .reduce(f64::max)
    });
    Ok(EvalReport {
        method: method.to_string(),
        t_min,
        training_horizon,
        variables: Variable::ALL.iter().map(|v| v.name().to_string()).collect(),
        rows,
        max_error,
    })
}

/// How the framework compares with the baseline over one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub t_lo: f64,
    pub t_hi: f64,
    pub framework_max: [Option<f64>; NUM_VARIABLES],
    pub baseline_max: [Option<f64>; NUM_VARIABLES],
    /// Timesteps where both errors of `u` are defined.
    pub u_steps: usize,
    /// Fraction of those where the baseline error of `u` is larger.
    pub u_baseline_worse_fraction: f64,
}

pub fn compare(framework: &EvalReport, baseline: &EvalReport, t_lo: f64, t_hi: f64) -> Comparison {
    let fw = framework.series(Variable::U, t_lo, t_hi);
    let bl = baseline.series(Variable::U, t_lo, t_hi);
    let mut steps = 0;
    let mut worse = 0;
    for (t, e) in &fw {
        if let Some((_, b)) = bl.iter().find(|(tb, _)| (tb - t).abs() <= TIME_TOL) {
            steps += 1;
            if b > e {
                worse += 1;
            }
        }
    }
    Comparison {
        t_lo,
        t_hi,
        framework_max: Variable::ALL.map(|v| framework.max_in(v, t_lo, t_hi)),
        baseline_max: Variable::ALL.map(|v| baseline.max_in(v, t_lo, t_hi)),
        u_steps: steps,
        u_baseline_worse_fraction: if steps == 0 { 0.0 } else { worse as f64 / steps as f64 },
    }
}
