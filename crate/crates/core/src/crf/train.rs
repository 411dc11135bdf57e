use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::{minimize, LbfgsConfig};

use super::features::{extract_features, FeatureTemplateSet};
use super::model::CrfModel;
use super::LabeledSequence;

/// Gradient terms are summed in this many contiguous groups, then the
/// group sums are added in order, so results do not depend on how many
/// threads rayon runs.
const GRADIENT_GROUPS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct CrfTrainConfig {
    pub l2: f64,
    pub max_iters: usize,
    /// L-BFGS history length.
    pub history: usize,
    /// Relative loss change below which training stops.
    pub tolerance: f64,
    pub templates: FeatureTemplateSet,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            l2: 1e-3,
            max_iters: 100,
            history: 10,
            tolerance: 1e-5,
            templates: FeatureTemplateSet::default(),
        }
    }
}

impl CrfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 must be finite and non-negative, got {}", self.l2)));
        }
        if self.history == 0 {
            return Err(Error::Config("history must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::Config(format!("bad tolerance {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub model: CrfModel,
    /// Regularized loss at the start and after each accepted step.
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

/// A sequence with features and labels mapped to model indices.
struct Instance {
    observations: Vec<Vec<usize>>,
    gold: Vec<usize>,
}

fn compile(model: &CrfModel, batch: &[LabeledSequence]) -> Result<Vec<Instance>> {
    batch
        .iter()
        .map(|seq| {
            if seq.tokens.is_empty() || seq.tokens.len() != seq.labels.len() {
                return Err(Error::Usage(format!(
                    "labeled sequence has {} tokens and {} labels",
                    seq.tokens.len(),
                    seq.labels.len()
                )));
            }
            Ok(Instance {
                observations: model.observe(&seq.tokens)?,
                gold: model.label_ids(&seq.labels)?,
            })
        })
        .collect()
}

/// Adds one instance's NLL term to `loss` and its gradient to `grad`.
fn accumulate(model: &CrfModel, weights: &[f64], inst: &Instance, loss: &mut f64, grad: &mut [f64]) {
    let l = model.num_labels();
    let chain = model.potentials_with(weights, &inst.observations);
    let fb = chain.forward_backward();
    *loss += fb.log_z - chain.score(&inst.gold);
    let n = inst.gold.len();
    for t in 0..n {
        for y in 0..l {
            let p = (fb.alpha[t * l + y] + fb.beta[t * l + y] - fb.log_z).exp();
            for &f in &inst.observations[t] {
                grad[model.emission_index(f, y)] += p;
            }
        }
        for &f in &inst.observations[t] {
            grad[model.emission_index(f, inst.gold[t])] -= 1.0;
        }
        if t > 0 {
            for a in 0..l {
                for b in 0..l {
                    let p = (fb.alpha[(t - 1) * l + a] + chain.transition(a, b) + chain.emission(t, b)
                        + fb.beta[t * l + b]
                        - fb.log_z)
                        .exp();
                    grad[model.transition_index(a, b)] += p;
                }
            }
            grad[model.transition_index(inst.gold[t - 1], inst.gold[t])] -= 1.0;
        }
    }
}

fn objective(model: &CrfModel, instances: &[Instance], weights: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let chunk = instances.len().div_ceil(GRADIENT_GROUPS).max(1);
    let partial: Vec<(f64, Vec<f64>)> = instances
        .par_chunks(chunk)
        .map(|group| {
            let mut loss = 0.0;
            let mut grad = vec![0.0; weights.len()];
            for inst in group {
                accumulate(model, weights, inst, &mut loss, &mut grad);
            }
            (loss, grad)
        })
        .collect();
    let mut loss = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    for (l, g) in partial {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (loss, grad)
}

/// Regularized negative log-likelihood of `batch` and its gradient with
/// respect to the model weights. Features unknown to the model are ignored.
pub fn nll_and_gradient(model: &CrfModel, batch: &[LabeledSequence], l2: f64) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let instances = compile(model, batch)?;
    Ok(objective(model, &instances, model.weights(), l2))
}

/// Labels sorted lexicographically; features in order of first occurrence.
fn build_model(data: &[LabeledSequence], templates: &FeatureTemplateSet) -> Result<CrfModel> {
    let labels: BTreeSet<&str> = data.iter().flat_map(|s| s.labels.iter().map(String::as_str)).collect();
    let mut seen = HashSet::new();
    let mut features = Vec::new();
    for seq in data {
        for pos in 0..seq.tokens.len() {
            for f in extract_features(&seq.tokens, pos, templates)? {
                if seen.insert(f.clone()) {
                    features.push(f);
                }
            }
        }
    }
    CrfModel::zeros(
        labels.into_iter().map(str::to_string).collect(),
        templates.clone(),
        features,
    )
}

pub fn train_crf(data: &[LabeledSequence], cfg: &CrfTrainConfig) -> Result<CrfModel> {
    Ok(train_crf_with_report(data, cfg)?.model)
}

pub fn train_crf_with_report(data: &[LabeledSequence], cfg: &CrfTrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Training("no training data".into()));
    }
    let mut model = build_model(data, &cfg.templates)?;
    let instances = compile(&model, data)?;
    log::info!(
        "training CRF: {} sequences, {} labels, {} features, {} weights",
        data.len(),
        model.num_labels(),
        model.features().len(),
        model.weights().len()
    );
    let opt = LbfgsConfig {
        history: cfg.history,
        max_iters: cfg.max_iters,
        tolerance: cfg.tolerance,
        ..LbfgsConfig::default()
    };
    let min = minimize(
        |w| objective(&model, &instances, w, cfg.l2),
        model.weights().to_vec(),
        &opt,
    )?;
    if !min.value.is_finite() || min.x.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence(format!("loss reached {}", min.value)));
    }
    log::info!(
        "final loss {:.6} after {} steps (converged: {})",
        min.value,
        min.trace.len() - 1,
        min.converged
    );
    model.set_weights(min.x)?;
    Ok(TrainReport {
        model,
        loss_trace: min.trace,
        converged: min.converged,
    })
}
