//! Finite-width networks under the NTK parameterization.
//!
//! Weights are never stored: row `i` of layer `l` is regenerated from the
//! keyed stream `(seed, layer, i)` whenever a pass needs it. This keeps
//! memory at O(n·m) for widths where a single weight matrix would not fit,
//! and makes every quantity a pure function of `(config, inputs)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DatasetMatrix, KernelMatrix, Normalization, Provenance};
use crate::linalg::{dot, Matrix};
use crate::rng::{self, Domain};

/// Materialized gradient features longer than this are rejected.
pub const FEATURE_LENGTH_CAP: usize = 100_000_000;
/// Width at which the NTK and angle tolerances hold.
pub const DEFAULT_VALIDATION_WIDTH: usize = 8192;
pub const DEFAULT_REPLICAS: usize = 5;
/// Width used by the convergence experiments.
pub const EXPERIMENT_WIDTH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    /// Per-layer scale: `√2/√m` for ReLU, `1/√m` for identity.
    pub fn layer_scale(self, width: usize) -> f64 {
        match self {
            Activation::Relu => (2.0 / width as f64).sqrt(),
            Activation::Identity => (1.0 / width as f64).sqrt(),
        }
    }

    /// Whether the unit is active; zero counts as active.
    #[inline]
    pub fn gate(self, pre: f64) -> bool {
        match self {
            Activation::Relu => pre >= 0.0,
            Activation::Identity => true,
        }
    }

    #[inline]
    pub fn apply(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => pre.max(0.0),
            Activation::Identity => pre,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of hidden layers `L`.
    pub depth: usize,
    /// Hidden width `m`.
    pub width: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(depth: usize, width: usize, activation: Activation, seed: u64) -> Self {
        Self {
            depth,
            width,
            activation,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_depth(self, depth: usize) -> Self {
        Self { depth, ..self }
    }
}

/// A network at initialization. Layer `l ∈ 1..=L+1` has shape
/// `m_l × m_{l-1}` with `m_0 = d`, `m_{L+1}` = outputs and `m_l = m` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledNetwork {
    config: NetworkConfig,
    input_dim: usize,
    output_dim: usize,
}

pub fn sample_network(config: &NetworkConfig, input_dim: usize) -> Result<SampledNetwork> {
    sample_network_with_outputs(config, input_dim, 1)
}

/// Same as [`sample_network`] with the last layer widened to `outputs` rows.
pub fn sample_network_with_outputs(
    config: &NetworkConfig,
    input_dim: usize,
    outputs: usize,
) -> Result<SampledNetwork> {
    if config.width == 0 || input_dim == 0 || outputs == 0 {
        return Err(Error::InvalidDimensions(format!(
            "width, input dimension and outputs must be positive (m={}, d={input_dim}, outputs={outputs})",
            config.width
        )));
    }
    let widest = config.width.max(input_dim).max(outputs);
    if config.depth + 1 > u16::MAX as usize || widest > u32::MAX as usize {
        return Err(Error::InvalidDimensions(format!(
            "depth {} or width {widest} too large for keyed weight streams",
            config.depth
        )));
    }
    Ok(SampledNetwork {
        config: *config,
        input_dim,
        output_dim: outputs,
    })
}

impl SampledNetwork {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.config.depth
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn width_at(&self, index: usize) -> usize {
        if index == 0 {
            self.input_dim
        } else if index == self.config.depth + 1 {
            self.output_dim
        } else {
            self.config.width
        }
    }

    /// `(rows, cols)` of `W^(layer)`, `layer ∈ 1..=L+1`.
    pub fn layer_shape(&self, layer: usize) -> (usize, usize) {
        assert!((1..=self.config.depth + 1).contains(&layer), "layer {layer} out of range");
        (self.width_at(layer), self.width_at(layer - 1))
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        (1..=self.config.depth + 1).map(|l| self.layer_shape(l)).collect()
    }

    /// Multiplier applied after the activation of `layer`; the output layer is unscaled.
    pub fn layer_scale(&self, layer: usize) -> f64 {
        if layer == self.config.depth + 1 {
            1.0
        } else {
            self.config.activation.layer_scale(self.config.width)
        }
    }

    /// `Σ_l m_l · m_{l-1}`, the length of a flattened model gradient.
    pub fn feature_len(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * c).sum()
    }

    /// Writes row `row` of `W^(layer)` into `out`.
    pub fn fill_row(&self, layer: usize, row: usize, out: &mut [f64]) {
        let (rows, cols) = self.layer_shape(layer);
        assert!(row < rows && out.len() == cols);
        let stream = rng::stream_id(Domain::Weights, layer as u16, row as u32);
        let mut rng = rng::keyed_stream(self.config.seed, stream);
        rng::fill_standard_normal(&mut rng, out);
    }

    pub fn layer_weights(&self, layer: usize) -> Matrix {
        let (rows, cols) = self.layer_shape(layer);
        let mut w = Matrix::zeros(rows, cols);
        for i in 0..rows {
            self.fill_row(layer, i, w.row_mut(i));
        }
        w
    }

    /// All weight matrices `W^(1)..W^(L+1)`.
    pub fn weights(&self) -> Vec<Matrix> {
        (1..=self.config.depth + 1).map(|l| self.layer_weights(l)).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn forward_pass(&self, inputs: &[&[f64]]) -> ForwardPass {
        let depth = self.config.depth;
        let activation = self.config.activation;
        let mut embeddings: Vec<Vec<Vec<f64>>> = vec![inputs.iter().map(|x| x.to_vec()).collect()];
        let mut gates: Vec<Vec<Vec<bool>>> = Vec::with_capacity(depth);
        for layer in 1..=depth {
            let (rows, cols) = self.layer_shape(layer);
            let scale = self.layer_scale(layer);
            let prev = &embeddings[layer - 1];
            let mut out = vec![vec![0.0; rows]; inputs.len()];
            let mut gate = vec![vec![false; rows]; inputs.len()];
            let mut w = vec![0.0; cols];
            for i in 0..rows {
                self.fill_row(layer, i, &mut w);
                for (b, a) in prev.iter().enumerate() {
                    let pre = dot(&w, a);
                    gate[b][i] = activation.gate(pre);
                    out[b][i] = scale * activation.apply(pre);
                }
            }
            embeddings.push(out);
            gates.push(gate);
        }
        let last = depth + 1;
        let (rows, cols) = self.layer_shape(last);
        let mut outputs = vec![vec![0.0; rows]; inputs.len()];
        let mut w = vec![0.0; cols];
        for i in 0..rows {
            self.fill_row(last, i, &mut w);
            for (out, a) in outputs.iter_mut().zip(&embeddings[depth]) {
                out[i] = dot(&w, a);
            }
        }
        ForwardPass {
            embeddings,
            gates,
            outputs,
        }
    }

    /// `δ^(l) = ∂f/∂(W^(l) α^(l-1))` for `l = 1..=L+1`, per input.
    /// Requires a scalar output.
    fn backward_pass(&self, forward: &ForwardPass) -> Vec<Vec<Vec<f64>>> {
        debug_assert_eq!(self.output_dim, 1);
        let depth = self.config.depth;
        let batch = forward.outputs.len();
        let mut deltas: Vec<Vec<Vec<f64>>> = vec![Vec::new(); depth + 1];
        deltas[depth] = vec![vec![1.0]; batch];
        for layer in (1..=depth).rev() {
            let next = layer + 1;
            let (rows, cols) = self.layer_shape(next);
            let mut acc = vec![vec![0.0; cols]; batch];
            let mut w = vec![0.0; cols];
            for i in 0..rows {
                self.fill_row(next, i, &mut w);
                for (acc_b, delta_b) in acc.iter_mut().zip(&deltas[next - 1]) {
                    let coef = delta_b[i];
                    if coef != 0.0 {
                        for (a, wj) in acc_b.iter_mut().zip(&w) {
                            *a += coef * wj;
                        }
                    }
                }
            }
            let scale = self.layer_scale(layer);
            for (acc_b, gates_b) in acc.iter_mut().zip(&forward.gates[layer - 1]) {
                for (a, &g) in acc_b.iter_mut().zip(gates_b) {
                    *a = if g { scale * *a } else { 0.0 };
                }
            }
            deltas[layer - 1] = acc;
        }
        deltas
    }
}

struct ForwardPass {
    /// `[l][input]` for `l = 0..=L`.
    embeddings: Vec<Vec<Vec<f64>>>,
    /// `[l - 1][input]` for hidden layers.
    gates: Vec<Vec<Vec<bool>>>,
    outputs: Vec<Vec<f64>>,
}

/// `α^(0..=L)(x)` and the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub layers: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

pub fn forward_embeddings(net: &SampledNetwork, x: &[f64]) -> Result<Embeddings> {
    net.check_input(x)?;
    let mut pass = net.forward_pass(&[x]);
    Ok(Embeddings {
        layers: pass.embeddings.into_iter().map(|mut e| e.swap_remove(0)).collect(),
        output: pass.outputs.swap_remove(0),
    })
}

/// Flattened `∂f/∂w`: one row-major `m_l × m_{l-1}` block per layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientFeature {
    values: Vec<f64>,
    shapes: Vec<(usize, usize)>,
}

impl GradientFeature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    /// Block for `layer ∈ 1..=L+1`.
    pub fn block(&self, layer: usize) -> &[f64] {
        let start: usize = self.shapes[..layer - 1].iter().map(|(r, c)| r * c).sum();
        let (r, c) = self.shapes[layer - 1];
        &self.values[start..start + r * c]
    }

    pub fn dot(&self, other: &GradientFeature) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }
}

/// Exact backprop gradient of the scalar output at initialization.
pub fn model_gradient(net: &SampledNetwork, x: &[f64]) -> Result<GradientFeature> {
    net.check_input(x)?;
    require_scalar_output(net)?;
    let length = net.feature_len();
    if length > FEATURE_LENGTH_CAP {
        return Err(Error::MemoryCap {
            length,
            cap: FEATURE_LENGTH_CAP,
        });
    }
    let forward = net.forward_pass(&[x]);
    let deltas = net.backward_pass(&forward);
    let mut values = Vec::with_capacity(length);
    for layer in 1..=net.depth() + 1 {
        let alpha = &forward.embeddings[layer - 1][0];
        for &delta in &deltas[layer - 1][0] {
            values.extend(alpha.iter().map(|a| delta * a));
        }
    }
    Ok(GradientFeature {
        values,
        shapes: net.shapes(),
    })
}

fn require_scalar_output(net: &SampledNetwork) -> Result<()> {
    if net.output_dim != 1 {
        return Err(Error::InvalidArgument(format!(
            "model gradients need a scalar output, network has {}",
            net.output_dim
        )));
    }
    Ok(())
}

fn check_dataset(net: &SampledNetwork, data: &DatasetMatrix) -> Result<()> {
    require_scalar_output(net)?;
    if data.d() != net.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "dataset has d = {}, network expects {}",
            data.d(),
            net.input_dim
        )));
    }
    Ok(())
}

/// Per-layer Gram matrices of embeddings and of backward signals for one network.
struct LayerInnerProducts {
    /// `⟨α^(l)(x_i), α^(l)(x_j)⟩` for `l = 0..=L`.
    embeddings: Vec<Matrix>,
    /// `⟨∇f(x_i), ∇f(x_j)⟩`, unnormalized.
    ntk: Matrix,
}

fn gram_of(vectors: &[Vec<f64>]) -> Matrix {
    let n = vectors.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(&vectors[i], &vectors[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn layer_inner_products(net: &SampledNetwork, data: &DatasetMatrix) -> LayerInnerProducts {
    let inputs: Vec<&[f64]> = (0..data.n()).map(|i| data.row(i)).collect();
    let forward = net.forward_pass(&inputs);
    let deltas = net.backward_pass(&forward);
    let embeddings: Vec<Matrix> = forward.embeddings.iter().map(|e| gram_of(e)).collect();
    let n = data.n();
    let mut ntk = Matrix::zeros(n, n);
    // ⟨δ αᵀ, δ' α'ᵀ⟩ = ⟨δ, δ'⟩ ⟨α, α'⟩ block by block
    for layer in 1..=net.depth() + 1 {
        let delta_gram = gram_of(&deltas[layer - 1]);
        let alpha_gram = &embeddings[layer - 1];
        for i in 0..n {
            for j in 0..n {
                ntk[(i, j)] += delta_gram[(i, j)] * alpha_gram[(i, j)];
            }
        }
    }
    LayerInnerProducts { embeddings, ntk }
}

/// `K_ij = ⟨∇f(x_i), ∇f(x_j)⟩`, assembled layer by layer without
/// materializing gradient features.
pub fn empirical_ntk(
    net: &SampledNetwork,
    data: &DatasetMatrix,
    normalization: Normalization,
) -> Result<KernelMatrix> {
    check_dataset(net, data)?;
    let depth = net.depth();
    let raw = layer_inner_products(net, data).ntk;
    let k = match normalization {
        Normalization::Raw => raw,
        Normalization::Averaged => raw.scaled(1.0 / (depth + 1) as f64),
    };
    Ok(KernelMatrix {
        k,
        provenance: Provenance::NtkEmpirical,
        depth,
        normalization,
    })
}

/// Entrywise mean of the empirical NTK over `replicas` independently seeded networks.
pub fn mean_empirical_ntk(
    config: &NetworkConfig,
    data: &DatasetMatrix,
    replicas: usize,
    normalization: Normalization,
) -> Result<KernelMatrix> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be at least 1".into()));
    }
    let kernels: Vec<KernelMatrix> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = config.with_seed(rng::replica_seed(config.seed, r as u64));
            let net = sample_network(&cfg, data.d())?;
            empirical_ntk(&net, data, normalization)
        })
        .collect::<Result<_>>()?;
    let n = data.n();
    let mut mean = Matrix::zeros(n, n);
    for kernel in &kernels {
        for i in 0..n {
            for j in 0..n {
                mean[(i, j)] += kernel.k[(i, j)] / replicas as f64;
            }
        }
    }
    Ok(KernelMatrix {
        k: mean,
        provenance: Provenance::NtkEmpirical,
        depth: config.depth,
        normalization,
    })
}

/// Replica-averaged pairwise angles measured on finite networks.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalAngles {
    /// Mean model-gradient angle `φ_ij`.
    pub phi: Matrix,
    /// Mean embedding angle `θ^(l)_ij` for `l = 0..=L`.
    pub layer_angles: Vec<Matrix>,
    pub replicas: usize,
}

impl EmpiricalAngles {
    pub fn min_phi(&self) -> f64 {
        let n = self.phi.rows();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(self.phi[(i, j)]);
            }
        }
        best
    }
}

/// Angle matrix from an inner-product matrix. A zero-norm vector makes the
/// angle undefined; those pairs are reported as orthogonal.
fn angles_from_inner(k: &Matrix) -> Matrix {
    let n = k.rows();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let denom = (k[(i, i)] * k[(j, j)]).sqrt();
        if denom == 0.0 {
            PI / 2.0
        } else {
            (k[(i, j)] / denom).clamp(-1.0, 1.0).acos()
        }
    })
}

pub fn empirical_angles(
    config: &NetworkConfig,
    data: &DatasetMatrix,
    replicas: usize,
) -> Result<EmpiricalAngles> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be at least 1".into()));
    }
    let per_replica: Vec<(Matrix, Vec<Matrix>)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = config.with_seed(rng::replica_seed(config.seed, r as u64));
            let net = sample_network(&cfg, data.d())?;
            check_dataset(&net, data)?;
            let products = layer_inner_products(&net, data);
            Ok((
                angles_from_inner(&products.ntk),
                products.embeddings.iter().map(angles_from_inner).collect(),
            ))
        })
        .collect::<Result<_>>()?;

    let n = data.n();
    let weight = 1.0 / replicas as f64;
    let mut phi = Matrix::zeros(n, n);
    let mut layer_angles = vec![Matrix::zeros(n, n); config.depth + 1];
    for (p, layers) in &per_replica {
        for i in 0..n {
            for j in 0..n {
                phi[(i, j)] += weight * p[(i, j)];
                for (acc, l) in layer_angles.iter_mut().zip(layers) {
                    acc[(i, j)] += weight * l[(i, j)];
                }
            }
        }
    }
    Ok(EmpiricalAngles {
        phi,
        layer_angles,
        replicas,
    })
}

fn check_closed_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::AngleDomain(theta, "[0, pi]"))
    }
}

fn require_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn lemma_stream(seed: u64, lemma: u16) -> rand_chacha::ChaCha8Rng {
    rng::keyed_stream(seed, rng::stream_id(Domain::Lemma, lemma, 0))
}

/// Two unit vectors in the plane at angle `theta`.
fn planar_pair(theta: f64) -> ([f64; 2], [f64; 2]) {
    ([1.0, 0.0], [theta.cos(), theta.sin()])
}

/// Largest entry of `|(1/m) AᵀA - I|` for an `m × d` standard-normal `A`.
pub fn validate_lemma1(d: usize, m: usize, seed: u64) -> Result<f64> {
    require_positive("d", d)?;
    if m < d {
        return Err(Error::InvalidArgument(format!("need m >= d, got m={m}, d={d}")));
    }
    let mut rng = lemma_stream(seed, 1);
    let mut row = vec![0.0; d];
    let mut ata = vec![0.0; d * d];
    for _ in 0..m {
        rng::fill_standard_normal(&mut rng, &mut row);
        for i in 0..d {
            for j in i..d {
                ata[i * d + j] += row[i] * row[j];
            }
        }
    }
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in i..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ata[i * d + j] / m as f64 - target).abs());
        }
    }
    Ok(worst)
}

/// Fraction of Gaussian draws `w` with `wᵀv₁ ≥ 0` and `wᵀv₂ ≥ 0`.
pub fn validate_lemma2(theta: f64, trials: usize, seed: u64) -> Result<f64> {
    check_closed_angle(theta)?;
    require_positive("trials", trials)?;
    let (v1, v2) = planar_pair(theta);
    let mut rng = lemma_stream(seed, 2);
    let mut w = [0.0; 2];
    let mut hits = 0usize;
    for _ in 0..trials {
        rng::fill_standard_normal(&mut rng, &mut w);
        if dot(&w, &v1) >= 0.0 && dot(&w, &v2) >= 0.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// `⟨u₁, u₂⟩` with `u_i = √(2/q) σ(W v_i)` for a `q × 2` Gaussian `W`.
pub fn validate_lemma3(theta: f64, q: usize, seed: u64) -> Result<f64> {
    check_closed_angle(theta)?;
    require_positive("q", q)?;
    let (v1, v2) = planar_pair(theta);
    let mut rng = lemma_stream(seed, 3);
    let mut w = [0.0; 2];
    let mut sum = 0.0;
    for _ in 0..q {
        rng::fill_standard_normal(&mut rng, &mut w);
        sum += dot(&w, &v1).max(0.0) * dot(&w, &v2).max(0.0);
    }
    Ok(2.0 * sum / q as f64)
}

/// `A₁A₂ᵀ` with `A_i = √(2/q) U 𝕀{W v_i ≥ 0}`, `U` of shape `s × q`.
pub fn validate_lemma4(theta: f64, s: usize, q: usize, seed: u64) -> Result<Matrix> {
    check_closed_angle(theta)?;
    require_positive("s", s)?;
    require_positive("q", q)?;
    let (v1, v2) = planar_pair(theta);
    let mut rng = lemma_stream(seed, 4);
    let mut w = [0.0; 2];
    let mut u = vec![0.0; s];
    let mut out = Matrix::zeros(s, s);
    for _ in 0..q {
        // column k of U and row k of W
        rng::fill_standard_normal(&mut rng, &mut u);
        rng::fill_standard_normal(&mut rng, &mut w);
        if dot(&w, &v1) >= 0.0 && dot(&w, &v2) >= 0.0 {
            for i in 0..s {
                for j in 0..s {
                    out[(i, j)] += u[i] * u[j];
                }
            }
        }
    }
    Ok(out.scaled(2.0 / q as f64))
}

/// `1/2 - θ/(2π)`.
pub fn lemma2_expected(theta: f64) -> f64 {
    0.5 - theta / (2.0 * PI)
}

/// `((π - θ) cos θ + sin θ) / π`.
pub fn lemma3_expected(theta: f64) -> f64 {
    ((PI - theta) * theta.cos() + theta.sin()) / PI
}

/// Diagonal value `(π - θ)/π` of the limiting `A₁A₂ᵀ`.
pub fn lemma4_expected(theta: f64) -> f64 {
    (PI - theta) / PI
}

/// Standard deviation of a binomial proportion.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Two unit vectors at angle `theta` spanning a random plane of `R^d`.
pub fn pair_at_angle(theta: f64, d: usize, seed: u64) -> Result<DatasetMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimensions("need d >= 2 for an angled pair".into()));
    }
    let mut rng = rng::keyed_stream(seed, rng::stream_id(Domain::Data, 0xA1, 0));
    // random orthonormal pair via Gram-Schmidt
    let mut e1 = vec![0.0; d];
    let mut e2 = vec![0.0; d];
    rng::fill_standard_normal(&mut rng, &mut e1);
    rng::fill_standard_normal(&mut rng, &mut e2);
    let n1 = dot(&e1, &e1).sqrt();
    e1.iter_mut().for_each(|v| *v /= n1);
    let proj = dot(&e1, &e2);
    e2.iter_mut().zip(&e1).for_each(|(v, a)| *v -= proj * a);
    let n2 = dot(&e2, &e2).sqrt();
    e2.iter_mut().for_each(|v| *v /= n2);
    let second: Vec<f64> = e1
        .iter()
        .zip(&e2)
        .map(|(a, b)| theta.cos() * a + theta.sin() * b)
        .collect();
    DatasetMatrix::from_rows(&[e1, second])
}
