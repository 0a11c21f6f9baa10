//! Embedding network: a small perceptron that maps filled feature vectors
//! into a continuous space where class prototypes are Euclidean means.
//!
//! Training minimizes cross-entropy of the softmax over negative distances
//! to the current class prototypes, which are held fixed within a step.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assessment::GradeLabel;
use crate::error::{Error, Result};
use crate::numerics::{euclidean_distance, DenseMatrix};
use crate::rng::{self, streams};
use crate::ssl::{compute_prototypes, softmax_neg_distances, PrototypeSet};

pub const MLP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpArchitecture {
    pub layer_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            layer_dims: vec![18, 12, 6],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }
}

impl MlpArchitecture {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(Error::invalid(format!(
                "layer dimensions {:?} need at least two positive entries",
                self.layer_dims
            )));
        }
        Ok(())
    }
}

/// Weights (`out×in`, row-major) and biases of every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpFile", into = "MlpFile")]
pub struct MlpParams {
    pub architecture: MlpArchitecture,
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

/// On-disk layout: explicit dims, flat row-major weight arrays.
#[derive(Serialize, Deserialize)]
struct MlpFile {
    format_version: u32,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl TryFrom<MlpFile> for MlpParams {
    type Error = Error;

    fn try_from(file: MlpFile) -> Result<Self> {
        if file.format_version != MLP_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported MLP format version {}",
                file.format_version
            )));
        }
        let architecture = MlpArchitecture {
            layer_dims: file.layer_dims,
            hidden_activation: file.hidden_activation,
            output_activation: file.output_activation,
        };
        architecture.validate()?;
        let layers = architecture.layer_dims.len() - 1;
        if file.weights.len() != layers || file.biases.len() != layers {
            return Err(Error::invalid(format!("expected {layers} weight and bias arrays")));
        }
        let mut weights = Vec::with_capacity(layers);
        for (l, w) in file.weights.into_iter().enumerate() {
            let (inp, out) = (architecture.layer_dims[l], architecture.layer_dims[l + 1]);
            weights.push(DenseMatrix::from_vec(out, inp, w)?);
            if file.biases[l].len() != out || file.biases[l].iter().any(|b| !b.is_finite()) {
                return Err(Error::invalid(format!("bias {l} must have {out} finite entries")));
            }
        }
        Ok(Self {
            architecture,
            weights,
            biases: file.biases,
        })
    }
}

impl From<MlpParams> for MlpFile {
    fn from(p: MlpParams) -> Self {
        MlpFile {
            format_version: MLP_FORMAT_VERSION,
            layer_dims: p.architecture.layer_dims,
            weights: p.weights.into_iter().map(|w| w.as_slice().to_vec()).collect(),
            biases: p.biases,
            hidden_activation: p.architecture.hidden_activation,
            output_activation: p.architecture.output_activation,
        }
    }
}

impl MlpParams {
    pub fn zeros(architecture: MlpArchitecture) -> Result<Self> {
        architecture.validate()?;
        let dims = &architecture.layer_dims;
        let weights = dims.windows(2).map(|w| DenseMatrix::zeros(w[1], w[0])).collect();
        let biases = dims[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            architecture,
            weights,
            biases,
        })
    }

    /// Every weight and bias drawn uniformly from `(−scale, scale)`.
    pub fn random<R: Rng>(architecture: MlpArchitecture, scale: f64, rng: &mut R) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("weight init scale {scale} must be positive")));
        }
        let mut p = Self::zeros(architecture)?;
        for (w, b) in p.weights.iter_mut().zip(&mut p.biases) {
            *w = DenseMatrix::from_fn(w.rows(), w.cols(), |_, _| rng.random_range(-scale..scale));
            b.iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.architecture.layer_dims.last().unwrap()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.architecture.output_activation
        } else {
            self.architecture.hidden_activation
        }
    }

    /// Flat view over all parameters, layer by layer, weights then bias.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.rows() * w.cols();
            w.as_mut_slice().copy_from_slice(&values[at..at + n]);
            at += n;
            let m = b.len();
            b.copy_from_slice(&values[at..at + m]);
            at += m;
        }
    }

    fn axpy(&mut self, alpha: f64, other: &MlpParams) {
        for ((w, b), (ow, ob)) in self.weights.iter_mut().zip(&mut self.biases).zip(other.weights.iter().zip(&other.biases)) {
            for (a, g) in w.as_mut_slice().iter_mut().zip(ow.as_slice()) {
                *a += alpha * g;
            }
            for (a, g) in b.iter_mut().zip(ob) {
                *a += alpha * g;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "MLP parameters".into(),
            source,
        })
    }
}

struct ForwardCache {
    /// Inputs to each layer; `activations[0]` is the network input.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

fn forward_cached(params: &MlpParams, x: &[f64]) -> ForwardCache {
    let mut activations = vec![x.to_vec()];
    let mut pre_activations = Vec::with_capacity(params.weights.len());
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let input = activations.last().unwrap();
        let pre: Vec<f64> = w.row_iter().zip(b).map(|(row, bias)| crate::numerics::dot(row, input) + bias).collect();
        let act = params.activation(l);
        activations.push(pre.iter().map(|v| act.apply(*v)).collect());
        pre_activations.push(pre);
    }
    ForwardCache {
        activations,
        pre_activations,
    }
}

/// Embeds one filled feature vector.
pub fn forward(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.input_dim() {
        return Err(Error::invalid(format!(
            "input has {} features, network expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("network input must be finite (fill missing values first)"));
    }
    Ok(forward_cached(params, x).activations.pop().unwrap())
}

/// Mean cross-entropy of the prototype softmax over a labeled batch and its
/// gradient with respect to every parameter.
pub fn prototype_loss_and_grads(
    params: &MlpParams,
    batch: &[(&[f64], GradeLabel)],
    prototypes: &PrototypeSet,
) -> Result<(f64, MlpParams)> {
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a non-empty batch"));
    }
    let mut grads = MlpParams::zeros(params.architecture.clone())?;
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;

    for (x, label) in batch {
        if x.len() != params.input_dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("batch inputs must be finite and match the input dimension"));
        }
        let cache = forward_cached(params, x);
        let v = cache.activations.last().unwrap();
        let distances: Vec<f64> = prototypes.centers.iter().map(|c| euclidean_distance(v, c)).collect();
        let probs = softmax_neg_distances(&distances);
        let y = label.index();
        loss -= probs[y].max(f64::MIN_POSITIVE).ln();

        // dL/dlogit_k = p_k − [k = y], logit_k = −d_k, ∂d_k/∂v = (v − c_k)/d_k.
        let mut delta = vec![0.0; v.len()];
        for (k, c) in prototypes.centers.iter().enumerate() {
            let d = distances[k];
            if d <= 0.0 {
                continue;
            }
            let coeff = -(probs[k] - if k == y { 1.0 } else { 0.0 }) / d;
            for ((g, vi), ci) in delta.iter_mut().zip(v).zip(c) {
                *g += coeff * (vi - ci);
            }
        }

        for l in (0..params.weights.len()).rev() {
            let act = params.activation(l);
            for (g, pre) in delta.iter_mut().zip(&cache.pre_activations[l]) {
                *g *= act.derivative(*pre);
            }
            let input = &cache.activations[l];
            let gw = &mut grads.weights[l];
            for (r, dr) in delta.iter().enumerate() {
                if *dr == 0.0 {
                    continue;
                }
                for (c, xi) in input.iter().enumerate() {
                    gw[(r, c)] += scale * dr * xi;
                }
            }
            for (gb, dr) in grads.biases[l].iter_mut().zip(&delta) {
                *gb += scale * dr;
            }
            if l > 0 {
                let w = &params.weights[l];
                let mut next = vec![0.0; input.len()];
                for (r, dr) in delta.iter().enumerate() {
                    for (n, wv) in next.iter_mut().zip(w.row(r)) {
                        *n += dr * wv;
                    }
                }
                delta = next;
            }
        }
    }
    Ok((loss * scale, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeRefresh {
    /// Prototypes from the full labeled set, recomputed once per epoch.
    PerEpoch,
    /// Prototypes from each mini-batch; classes absent from the batch keep
    /// the epoch prototypes.
    PerBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_init_scale: f64,
    pub prototype_refresh: PrototypeRefresh,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.05,
            batch_size: 8,
            weight_init_scale: 0.1,
            prototype_refresh: PrototypeRefresh::PerEpoch,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be non-negative", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Mean training loss of every epoch.
    pub loss_trace: Vec<f64>,
}

pub fn embed_all(params: &MlpParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|x| forward(params, x)).collect()
}

/// Mini-batch gradient descent on the prototype cross-entropy.
pub fn train(
    data: &[(Vec<f64>, GradeLabel)],
    architecture: &MlpArchitecture,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    for g in GradeLabel::ALL {
        if !data.iter().any(|(_, y)| *y == g) {
            return Err(Error::insufficient(format!("no labeled samples of class {g}")));
        }
    }
    let mut params = MlpParams::random(
        architecture.clone(),
        config.weight_init_scale,
        &mut rng::stream(seed, streams::MLP_INIT),
    )?;
    if data.iter().any(|(x, _)| x.len() != params.input_dim()) {
        return Err(Error::invalid("training inputs do not match the network input dimension"));
    }
    let mut shuffle_rng = rng::stream(seed, streams::MLP_SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let embedded = embed_all(&params, &data.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>())?;
        let epoch_protos = compute_prototypes(embedded.iter().map(Vec::as_slice).zip(data.iter().map(|(_, y)| *y)))?;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], GradeLabel)> = chunk.iter().map(|&i| (data[i].0.as_slice(), data[i].1)).collect();
            let protos = match config.prototype_refresh {
                PrototypeRefresh::PerEpoch => epoch_protos.clone(),
                PrototypeRefresh::PerBatch => batch_prototypes(&params, &batch, &epoch_protos)?,
            };
            let (loss, grads) = prototype_loss_and_grads(&params, &batch, &protos)?;
            epoch_loss += loss * batch.len() as f64;
            if config.learning_rate > 0.0 {
                params.axpy(-config.learning_rate, &grads);
            }
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric("training loss became non-finite".into()));
        }
        loss_trace.push(mean);
    }
    Ok(TrainOutcome { params, loss_trace })
}

fn batch_prototypes(params: &MlpParams, batch: &[(&[f64], GradeLabel)], fallback: &PrototypeSet) -> Result<PrototypeSet> {
    let dim = params.output_dim();
    let mut sums = vec![vec![0.0; dim]; 4];
    let mut counts = [0usize; 4];
    for (x, y) in batch {
        let v = forward(params, x)?;
        counts[y.index()] += 1;
        for (s, vi) in sums[y.index()].iter_mut().zip(&v) {
            *s += vi;
        }
    }
    let centers = (0..4)
        .map(|k| {
            if counts[k] == 0 {
                fallback.centers[k].clone()
            } else {
                sums[k].iter().map(|s| s / counts[k] as f64).collect()
            }
        })
        .collect();
    Ok(PrototypeSet {
        centers,
        support_counts: counts,
    })
}
