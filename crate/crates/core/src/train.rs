//! Plain SGD from NTK initialization, for comparing convergence across depths.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ntk_deep, DatasetMatrix, Normalization};
use crate::linalg::{dot, Matrix};
use crate::mcnet::{self, empirical_ntk, sample_network_with_outputs, Activation, NetworkConfig};
use crate::rng::{self, Domain};

/// Losses above this, or non-finite ones, mark a run as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;
/// Epoch budget for each candidate in [`grid_search_rate`].
pub const GRID_SEARCH_EPOCHS: usize = 50;
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `½‖f(x) - y‖²`, averaged over samples.
    Square,
    /// Softmax cross-entropy, averaged over samples.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn output_dim(&self) -> usize {
        match self {
            Targets::Classes(c) => c.iter().max().map_or(1, |&m| m + 1),
            Targets::Values(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub net: NetworkConfig,
    pub loss: Loss,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Seeds the per-epoch shuffles; weights use `net.seed`.
    pub seed: u64,
    /// A run has converged once the loss is at most this fraction of the initial loss.
    pub threshold_fraction: f64,
}

impl TrainConfig {
    pub fn new(net: NetworkConfig, loss: Loss, batch_size: usize, learning_rate: f64, epochs: usize) -> Self {
        Self {
            net,
            loss,
            batch_size,
            learning_rate,
            epochs,
            seed: net.seed,
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    pub depth: usize,
    pub learning_rate: f64,
    /// `losses[t]` is the full-data loss after `t` epochs; `losses[0]` is at initialization.
    pub losses: Vec<f64>,
    pub epochs_to_threshold: Option<usize>,
    pub kappa_at_init: f64,
    /// Training stopped early because the loss blew up; `losses` ends at the last finite value.
    pub diverged: bool,
}

impl TrainRecord {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least the initial loss")
    }
}

/// Dense copy of a sampled network, updated in place by SGD.
struct Model {
    weights: Vec<Matrix>,
    activation: Activation,
    scale: f64,
}

struct Trace {
    alphas: Vec<Vec<f64>>,
    gates: Vec<Vec<bool>>,
    output: Vec<f64>,
}

impl Model {
    fn forward(&self, x: &[f64]) -> Trace {
        let hidden = self.weights.len() - 1;
        let mut alphas = Vec::with_capacity(hidden + 1);
        let mut gates = Vec::with_capacity(hidden);
        alphas.push(x.to_vec());
        for w in &self.weights[..hidden] {
            let prev = alphas.last().unwrap();
            let pre: Vec<f64> = (0..w.rows()).map(|i| dot(w.row(i), prev)).collect();
            gates.push(pre.iter().map(|&h| self.activation.gate(h)).collect());
            alphas.push(pre.iter().map(|&h| self.scale * self.activation.apply(h)).collect());
        }
        let last = &self.weights[hidden];
        let top = alphas.last().unwrap();
        let output = (0..last.rows()).map(|i| dot(last.row(i), top)).collect();
        Trace {
            alphas,
            gates,
            output,
        }
    }

    /// Adds `∂ℓ/∂W` for one sample into `grads`, given `∂ℓ/∂f`.
    fn accumulate(&self, trace: &Trace, out_grad: &[f64], grads: &mut [Matrix]) {
        let mut delta = out_grad.to_vec();
        for l in (0..self.weights.len()).rev() {
            let alpha = &trace.alphas[l];
            let g = &mut grads[l];
            for (i, &di) in delta.iter().enumerate() {
                if di != 0.0 {
                    for (gij, aj) in g.row_mut(i).iter_mut().zip(alpha) {
                        *gij += di * aj;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut next = vec![0.0; w.cols()];
            for (i, &di) in delta.iter().enumerate() {
                if di != 0.0 {
                    for (n, wij) in next.iter_mut().zip(w.row(i)) {
                        *n += di * wij;
                    }
                }
            }
            for (n, &gate) in next.iter_mut().zip(&trace.gates[l - 1]) {
                *n = if gate { self.scale * *n } else { 0.0 };
            }
            delta = next;
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Loss of one sample; writes `∂ℓ/∂f` into `grad` when given.
fn sample_loss(loss: Loss, targets: &Targets, i: usize, output: &[f64], grad: Option<&mut [f64]>) -> f64 {
    match (loss, targets) {
        (Loss::Square, Targets::Values(v)) => {
            let r = output[0] - v[i];
            if let Some(g) = grad {
                g[0] = r;
            }
            0.5 * r * r
        }
        (Loss::Square, Targets::Classes(c)) => {
            let mut total = 0.0;
            let mut grad = grad;
            for (k, &o) in output.iter().enumerate() {
                let r = o - if k == c[i] { 1.0 } else { 0.0 };
                if let Some(g) = grad.as_deref_mut() {
                    g[k] = r;
                }
                total += 0.5 * r * r;
            }
            total
        }
        (Loss::CrossEntropy, Targets::Classes(c)) => {
            let lse = log_sum_exp(output);
            if let Some(g) = grad {
                for (k, &o) in output.iter().enumerate() {
                    g[k] = (o - lse).exp() - if k == c[i] { 1.0 } else { 0.0 };
                }
            }
            lse - output[c[i]]
        }
        (Loss::CrossEntropy, Targets::Values(_)) => unreachable!("rejected in validation"),
    }
}

fn full_loss(model: &Model, loss: Loss, data: &DatasetMatrix, targets: &Targets) -> f64 {
    let total: f64 = (0..data.n())
        .map(|i| sample_loss(loss, targets, i, &model.forward(data.row(i)).output, None))
        .sum();
    total / data.n() as f64
}

fn validate(config: &TrainConfig, data: &DatasetMatrix, targets: &Targets) -> Result<()> {
    if targets.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            targets.len(),
            data.n()
        )));
    }
    if config.loss == Loss::CrossEntropy && matches!(targets, Targets::Values(_)) {
        return Err(Error::InvalidArgument("cross-entropy needs integer class labels".into()));
    }
    if config.batch_size == 0 || config.batch_size > data.n() {
        return Err(Error::InvalidArgument(format!(
            "batch size must be in 1..={}, got {}",
            data.n(),
            config.batch_size
        )));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be finite and non-negative, got {}",
            config.learning_rate
        )));
    }
    if !(config.threshold_fraction.is_finite() && config.threshold_fraction >= 0.0) {
        return Err(Error::InvalidArgument("threshold fraction must be non-negative".into()));
    }
    Ok(())
}

/// Condition number of the analytic ReLU NTK of `data` at depth `depth`.
pub fn kappa_at_init(data: &DatasetMatrix, depth: usize) -> Result<f64> {
    ntk_deep(data, depth, Normalization::Averaged).condition_number()
}

/// First epoch whose loss is at most `fraction` of the initial loss.
pub fn epochs_to_threshold(losses: &[f64], fraction: f64) -> Option<usize> {
    let threshold = fraction * losses.first()?;
    losses.iter().position(|&l| l <= threshold)
}

fn train_model(config: &TrainConfig, data: &DatasetMatrix, targets: &Targets) -> Result<(Vec<f64>, bool)> {
    validate(config, data, targets)?;
    let net = sample_network_with_outputs(&config.net, data.d(), targets.output_dim())?;
    let mut model = Model {
        weights: net.weights(),
        activation: config.net.activation,
        scale: config.net.activation.layer_scale(config.net.width),
    };
    let n = data.n();
    let mut losses = vec![full_loss(&model, config.loss, data, targets)];
    if !losses[0].is_finite() {
        return Err(Error::InvalidArgument("initial loss is not finite".into()));
    }
    let mut diverged = losses[0] > DIVERGENCE_LOSS;
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads: Vec<Matrix> = model
        .weights
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    let mut out_grad = vec![0.0; net.output_dim()];
    for epoch in 0..config.epochs {
        if diverged {
            break;
        }
        let mut rng = rng::keyed_stream(config.seed, rng::stream_id(Domain::Shuffle, 0, epoch as u32));
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = Matrix::zeros(g.rows(), g.cols()));
            for &i in batch {
                let trace = model.forward(data.row(i));
                sample_loss(config.loss, targets, i, &trace.output, Some(&mut out_grad));
                model.accumulate(&trace, &out_grad, &mut grads);
            }
            let step = config.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grads) {
                for i in 0..w.rows() {
                    for (wij, gij) in w.row_mut(i).iter_mut().zip(g.row(i)) {
                        *wij -= step * gij;
                    }
                }
            }
        }
        let loss = full_loss(&model, config.loss, data, targets);
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        losses.push(loss);
        diverged = loss > DIVERGENCE_LOSS;
    }
    Ok((losses, diverged))
}

/// Trains from the NTK initialization of `config.net` and records the loss per epoch.
pub fn train(config: &TrainConfig, data: &DatasetMatrix, targets: &Targets) -> Result<TrainRecord> {
    let (losses, diverged) = train_model(config, data, targets)?;
    Ok(TrainRecord {
        depth: config.net.depth,
        learning_rate: config.learning_rate,
        epochs_to_threshold: epochs_to_threshold(&losses, config.threshold_fraction),
        kappa_at_init: kappa_at_init(data, config.net.depth)?,
        losses,
        diverged,
    })
}

/// Rate with the lowest loss after [`GRID_SEARCH_EPOCHS`] epochs. Diverged runs
/// are skipped and ties go to the smaller rate.
pub fn grid_search_rate(template: &TrainConfig, data: &DatasetMatrix, targets: &Targets, rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::InvalidArgument("rate list is empty".into()));
    }
    if rates.len() == 1 {
        return Ok(rates[0]);
    }
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for rate in sorted {
        let config = TrainConfig {
            learning_rate: rate,
            epochs: GRID_SEARCH_EPOCHS,
            ..*template
        };
        let (losses, diverged) = train_model(&config, data, targets)?;
        if diverged {
            continue;
        }
        let last = *losses.last().unwrap();
        if best.is_none_or(|(_, b)| last < b) {
            best = Some((rate, last));
        }
    }
    best.map(|(rate, _)| rate).ok_or(Error::AllRatesDiverged)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthSweep {
    pub records: Vec<TrainRecord>,
    /// Depths ordered by `epochs_to_threshold`, unconverged runs last.
    pub order: Vec<usize>,
}

/// One grid-searched training run per depth. Depths run concurrently on the
/// current rayon pool; results do not depend on the thread count.
pub fn depth_convergence_sweep(
    depths: &[usize],
    data: &DatasetMatrix,
    targets: &Targets,
    template: &TrainConfig,
    rates: &[f64],
) -> Result<DepthSweep> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument("depth list is empty".into()));
    }
    let records: Vec<TrainRecord> = depths
        .par_iter()
        .map(|&depth| {
            let base = TrainConfig {
                net: template.net.with_depth(depth),
                ..*template
            };
            let rate = grid_search_rate(&base, data, targets, rates)?;
            train(
                &TrainConfig {
                    learning_rate: rate,
                    ..base
                },
                data,
                targets,
            )
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<(Option<usize>, usize)> = records.iter().map(|r| (r.epochs_to_threshold, r.depth)).collect();
    order.sort_by_key(|&(e, depth)| (e.is_none(), e, depth));
    Ok(DepthSweep {
        order: order.into_iter().map(|(_, d)| d).collect(),
        records,
    })
}

/// Reference decay `(1 - η λ/2)^t L₀` for square loss, where `λ` is the
/// smallest eigenvalue of the sample-averaged NTK `K/n` at initialization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDiagnostic {
    pub lambda_min: f64,
    /// Largest `loss_t / ((1 - ηλ/2)^t L₀)` over the run.
    pub worst_ratio: f64,
    pub slack: f64,
    pub within_slack: bool,
}

/// Compares a square-loss run against the linearized decay rate. Informational:
/// finite-width runs are not expected to match exactly.
pub fn rate_diagnostic(config: &TrainConfig, data: &DatasetMatrix, record: &TrainRecord, slack: f64) -> Result<RateDiagnostic> {
    let net = mcnet::sample_network(&config.net, data.d())?;
    let k = empirical_ntk(&net, data, Normalization::Raw)?;
    let lambda_min = k.spectrum()?.lambda_min / data.n() as f64;
    let factor = 1.0 - config.learning_rate * lambda_min / 2.0;
    let l0 = record.losses[0];
    let worst_ratio = record
        .losses
        .iter()
        .enumerate()
        .map(|(t, &l)| l / (factor.powi(t as i32) * l0))
        .fold(0.0, f64::max);
    Ok(RateDiagnostic {
        lambda_min,
        worst_ratio,
        slack,
        within_slack: worst_ratio <= slack,
    })
}
