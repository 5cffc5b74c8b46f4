use ndarray::{s, Array3};
use pdeup_core::{StateSnapshot, Variable, NUM_VARIABLES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RdnConfig;
use crate::error::{NnError, Result};
use crate::rdn::{Rdn, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    Spatial,
    Temporal { k: usize },
}

/// One network per state variable, all with the same architecture.
#[derive(Clone, Debug)]
pub struct ModelBank {
    kind: ModelKind,
    cfg: RdnConfig,
    models: Vec<Rdn>,
}

/// Per-variable forward traces of one bank evaluation.
#[derive(Clone, Debug)]
pub struct BankTrace {
    traces: Vec<Trace>,
}

/// Per-model seeds derived from one base seed; the temporal bank uses a
/// separate stream so the two stages never share initial weights.
pub fn derive_seeds(base: u64, kind: ModelKind) -> [u64; NUM_VARIABLES] {
    let stream = match kind {
        ModelKind::Spatial => 0,
        ModelKind::Temporal { .. } => 1,
    };
    std::array::from_fn(|i| base.wrapping_mul(1000).wrapping_add(stream * 100 + i as u64))
}

impl ModelBank {
    pub fn new(kind: ModelKind, cfg: &RdnConfig, seeds: [u64; NUM_VARIABLES]) -> Result<Self> {
        if cfg.in_channels != 2 {
            return Err(NnError::Config(format!(
                "bank models take a snapshot pair, in_channels must be 2, got {}",
                cfg.in_channels
            )));
        }
        let models = seeds
            .iter()
            .map(|&seed| match kind {
                ModelKind::Spatial => Rdn::spatial(cfg, seed),
                ModelKind::Temporal { k } => Rdn::temporal(cfg, k, seed),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, cfg: cfg.clone(), models })
    }

    pub fn spatial(cfg: &RdnConfig, seeds: [u64; NUM_VARIABLES]) -> Result<Self> {
        if cfg.out_channels != 2 {
            return Err(NnError::Config(format!(
                "spatial model emits a snapshot pair, out_channels must be 2, got {}",
                cfg.out_channels
            )));
        }
        Self::new(ModelKind::Spatial, cfg, seeds)
    }

    pub fn temporal(cfg: &RdnConfig, k: usize, seeds: [u64; NUM_VARIABLES]) -> Result<Self> {
        Self::new(ModelKind::Temporal { k }, cfg, seeds)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &RdnConfig {
        &self.cfg
    }

    pub fn model(&self, var: Variable) -> &Rdn {
        &self.models[var.index()]
    }

    pub fn model_mut(&mut self, var: Variable) -> &mut Rdn {
        &mut self.models[var.index()]
    }

    pub fn models(&self) -> &[Rdn] {
        &self.models
    }

    pub fn models_mut(&mut self) -> &mut [Rdn] {
        &mut self.models
    }

    pub fn seeds(&self) -> [u64; NUM_VARIABLES] {
        std::array::from_fn(|i| self.models[i].seed())
    }

    /// Snapshots emitted per input tuple.
    pub fn n_outputs(&self) -> usize {
        self.cfg.out_channels
    }

    pub fn n_params(&self) -> usize {
        self.models.iter().map(Rdn::n_params).sum()
    }

    pub fn zero_heads(&mut self) {
        self.models.iter_mut().for_each(Rdn::zero_head);
    }

    /// SHA-256 over every parameter, in variable order.
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.models {
            for p in m.params() {
                h.update(p.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn order_inputs<'a>(&self, inputs: &'a [(Variable, Array3<f64>)]) -> Result<Vec<&'a Array3<f64>>> {
        let mut slots: [Option<&Array3<f64>>; NUM_VARIABLES] = [None; NUM_VARIABLES];
        for (var, x) in inputs {
            if slots[var.index()].replace(x).is_some() {
                return Err(NnError::BankMismatch(format!("variable {} given twice", var.name())));
            }
        }
        Variable::ALL
            .iter()
            .map(|v| slots[v.index()].ok_or_else(|| NnError::BankMismatch(format!("missing input for {}", v.name()))))
            .collect()
    }

    fn assemble(&self, outs: Vec<Array3<f64>>, t0: f64, t1: f64) -> Vec<StateSnapshot> {
        let n = self.n_outputs();
        let mut outs = outs.into_iter();
        let per_var: [Array3<f64>; NUM_VARIABLES] = std::array::from_fn(|_| outs.next().expect("one output per variable"));
        (0..n)
            .map(|j| {
                let t = if n == 1 { t0 } else { t0 + (t1 - t0) * j as f64 / (n - 1) as f64 };
                let fields = std::array::from_fn(|v| per_var[v].slice(s![j, .., ..]).to_owned());
                StateSnapshot::from_fields_unchecked(t, fields)
            })
            .collect()
    }

    /// Applies each variable's model to its own 2-channel input and returns the
    /// emitted snapshots, spread evenly over `[t0, t1]`.
    pub fn forward_bank(&self, inputs: &[(Variable, Array3<f64>)], t0: f64, t1: f64) -> Result<Vec<StateSnapshot>> {
        let ordered = self.order_inputs(inputs)?;
        let outs = self
            .models
            .par_iter()
            .zip(ordered)
            .map(|(m, x)| m.forward(x.view()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.assemble(outs, t0, t1))
    }

    fn tuple_inputs(tuple: &[StateSnapshot; 2]) -> Vec<(Variable, Array3<f64>)> {
        let (h, w) = tuple[0].shape();
        Variable::ALL
            .iter()
            .map(|&v| {
                let mut x = Array3::zeros((2, h, w));
                x.slice_mut(s![0, .., ..]).assign(tuple[0].get(v));
                x.slice_mut(s![1, .., ..]).assign(tuple[1].get(v));
                (v, x)
            })
            .collect()
    }

    fn check_tuple(tuple: &[StateSnapshot; 2]) -> Result<()> {
        if tuple[0].shape() != tuple[1].shape() {
            let (a, b) = (tuple[0].shape(), tuple[1].shape());
            return Err(NnError::Shape { what: "input tuple", expected: vec![a.0, a.1], got: vec![b.0, b.1] });
        }
        Ok(())
    }

    /// Prediction for one snapshot pair.
    pub fn predict(&self, tuple: &[StateSnapshot; 2]) -> Result<Vec<StateSnapshot>> {
        Self::check_tuple(tuple)?;
        self.forward_bank(&Self::tuple_inputs(tuple), tuple[0].t, tuple[1].t)
    }

    pub fn predict_traced(&self, tuple: &[StateSnapshot; 2]) -> Result<(Vec<StateSnapshot>, BankTrace)> {
        Self::check_tuple(tuple)?;
        let inputs = Self::tuple_inputs(tuple);
        let results = self
            .models
            .par_iter()
            .zip(&inputs)
            .map(|(m, (_, x))| m.forward_traced(x.view()))
            .collect::<Result<Vec<_>>>()?;
        let (outs, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        Ok((self.assemble(outs, tuple[0].t, tuple[1].t), BankTrace { traces }))
    }

    /// Zeroed gradient buffers, one per model.
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.models.iter().map(|m| vec![0.0; m.n_params()]).collect()
    }

    /// Accumulates the parameter gradients for output-snapshot gradients
    /// `d_out` (one per emitted snapshot) of a traced prediction.
    pub fn backward(&self, trace: &BankTrace, d_out: &[StateSnapshot], grads: &mut [Vec<f64>]) -> Result<()> {
        let n = self.n_outputs();
        if d_out.len() != n || grads.len() != NUM_VARIABLES || trace.traces.len() != NUM_VARIABLES {
            return Err(NnError::BankMismatch(format!(
                "backward expects {n} output gradients and {NUM_VARIABLES} buffers, got {} and {}",
                d_out.len(),
                grads.len()
            )));
        }
        let (h, w) = d_out[0].shape();
        self.models
            .par_iter()
            .zip(grads.par_iter_mut())
            .zip(trace.traces.par_iter())
            .enumerate()
            .try_for_each(|(vi, ((m, g), tr))| {
                let mut d = Array3::zeros((n, h, w));
                for (j, snap) in d_out.iter().enumerate() {
                    d.slice_mut(s![j, .., ..]).assign(&snap.fields()[vi]);
                }
                m.backward(tr, d.view(), g)
            })
    }
}
