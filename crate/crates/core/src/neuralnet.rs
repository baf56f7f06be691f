//! MLP encoder / decoder / softmax head with hand-written reverse-mode gradients.
//!
//! Layers compute `y = act(x·W + b)` with `W` stored `in×out`. The decoder is
//! the mirror image of the encoder; the classifier head is a single linear
//! map from the latent code to class logits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::Role;
use crate::densemath::{matmul, matmul_nt, matmul_tn, DenseMatrix};
use crate::error::{Error, Result};
use crate::kernelinfo::{mi_and_grad_wrt_latent, nats_to_bits};
use crate::objectives::{self, LossBreakdown, ObjectiveKind, ObjectiveSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative given the pre-activation `v` and the activated output `y`.
    fn derivative(self, v: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::param(
                "activation",
                format!("unknown activation `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    /// Encoder specs for a topology like `[79, 30, 15]`: relu hidden layers, identity latent.
    pub fn encoder_from_dims(dims: &[usize]) -> Result<Vec<LayerSpec>> {
        if dims.len() < 2 {
            return Err(Error::param(
                "topology",
                format!("need at least an input and a latent dim, got {dims:?}"),
            ));
        }
        let last = dims.len() - 2;
        Ok(dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in_dim × out_dim`
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            weights: DenseMatrix::zeros(spec.in_dim, spec.out_dim),
            bias: vec![0.0; spec.out_dim],
            activation: spec.activation,
        }
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.weights.rows(), self.weights.cols(), self.activation)
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    fn glorot(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        let data = (0..spec.in_dim * spec.out_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weights: DenseMatrix::from_vec(spec.in_dim, spec.out_dim, data)
                .expect("finite by construction"),
            bias: vec![0.0; spec.out_dim],
            activation: spec.activation,
        }
    }

    fn pre_activation(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut pre = matmul(x, &self.weights)?;
        for r in 0..pre.rows() {
            for (v, b) in pre.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(pre)
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let act = self.activation;
        Ok(self.pre_activation(x)?.map(|v| act.apply(v)))
    }

    fn params_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
    pub head: Dense,
    pub seed: u64,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map_or(0, Dense::out_dim)
    }

    pub fn n_classes(&self) -> usize {
        self.head.out_dim()
    }

    /// `[d_x, hidden…, d_z]`
    pub fn topology(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.encoder.iter().map(Dense::out_dim));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    /// Encoder layers, then decoder layers, then the head.
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .chain(std::iter::once(&self.head))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(std::iter::once(&mut self.head))
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(Dense::params_finite)
    }

    /// Checks that layer dimensions chain and the decoder mirrors the encoder.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::param("model", reason));
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return bad("encoder and decoder must be nonempty".into());
        }
        for stack in [&self.encoder, &self.decoder] {
            for w in stack.windows(2) {
                if w[0].out_dim() != w[1].in_dim() {
                    return bad(format!(
                        "layer dims do not chain: {} -> {}",
                        w[0].out_dim(),
                        w[1].in_dim()
                    ));
                }
            }
        }
        for l in self.layers() {
            if l.bias.len() != l.out_dim() {
                return bad("bias length differs from layer width".into());
            }
        }
        if self.decoder[0].in_dim() != self.latent_dim() {
            return bad("decoder input dim differs from latent dim".into());
        }
        if self.decoder.last().map(Dense::out_dim) != Some(self.input_dim()) {
            return bad("decoder output dim differs from input dim".into());
        }
        if self.head.in_dim() != self.latent_dim() {
            return bad("classifier input dim differs from latent dim".into());
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases. The decoder mirrors the encoder
/// (relu hidden layers, identity output).
pub fn init_model(encoder: &[LayerSpec], n_classes: usize, seed: u64) -> Result<MlpModel> {
    if encoder.is_empty() {
        return Err(Error::param("encoder", "empty layer list"));
    }
    if n_classes < 1 {
        return Err(Error::param("n_classes", "must be >= 1"));
    }
    for (i, s) in encoder.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::param(
                "encoder",
                format!("layer {i} has a zero dimension"),
            ));
        }
    }
    for w in encoder.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::param(
                "encoder",
                format!(
                    "layer dims do not chain: {} -> {}",
                    w[0].out_dim, w[1].in_dim
                ),
            ));
        }
    }
    let n = encoder.len();
    let decoder_specs: Vec<LayerSpec> = encoder
        .iter()
        .rev()
        .enumerate()
        .map(|(i, s)| {
            let act = if i + 1 == n {
                Activation::Identity
            } else {
                Activation::Relu
            };
            LayerSpec::new(s.out_dim, s.in_dim, act)
        })
        .collect();
    let latent = encoder[n - 1].out_dim;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder = encoder
        .iter()
        .map(|s| Dense::glorot(*s, &mut rng))
        .collect();
    let decoder = decoder_specs
        .iter()
        .map(|s| Dense::glorot(*s, &mut rng))
        .collect();
    let head = Dense::glorot(
        LayerSpec::new(latent, n_classes, Activation::Identity),
        &mut rng,
    );
    Ok(MlpModel {
        encoder,
        decoder,
        head,
        seed,
    })
}

fn check_input(op: &'static str, x: &DenseMatrix, dim: usize) -> Result<()> {
    if x.cols() != dim {
        return Err(Error::ShapeMismatch {
            op,
            left: x.shape(),
            right: (x.rows(), dim),
        });
    }
    Ok(())
}

fn run_stack(layers: &[Dense], x: &DenseMatrix) -> Result<DenseMatrix> {
    let mut h = x.clone();
    for layer in layers {
        h = layer.forward(&h)?;
    }
    Ok(h)
}

pub fn encode(model: &MlpModel, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_input("encode", x, model.input_dim())?;
    run_stack(&model.encoder, x)
}

pub fn decode(model: &MlpModel, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_input("decode", z, model.latent_dim())?;
    run_stack(&model.decoder, z)
}

pub fn logits(model: &MlpModel, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_input("logits", z, model.latent_dim())?;
    model.head.forward(z)
}

/// Arg-max class per row.
pub fn predict(model: &MlpModel, x: &DenseMatrix) -> Result<Vec<usize>> {
    let out = logits(model, &encode(model, x)?)?;
    Ok(out
        .row_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect())
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Data(format!(
            "{} labels for {rows} rows",
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::InvalidLabel { label, classes });
    }
    Ok(())
}

/// Mean of `−log softmax(logits)[label]` over the batch.
pub fn cross_entropy_loss(logits: &DenseMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, logits.rows(), logits.cols())?;
    if logits.rows() == 0 {
        return Err(Error::TooFewSamples {
            op: "cross_entropy_loss",
            need: 1,
            got: 0,
        });
    }
    let mut total = 0.0;
    for (row, &y) in logits.row_iter().zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(total / logits.rows() as f64)
}

/// Mean over rows of the squared ℓ₂ row error.
pub fn reconstruction_loss(x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            op: "reconstruction_loss",
            left: x.shape(),
            right: x_hat.shape(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::TooFewSamples {
            op: "reconstruction_loss",
            need: 1,
            got: 0,
        });
    }
    let sse: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sse / x.rows() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    fn zeros_like(layer: &Dense) -> Self {
        Self {
            weights: DenseMatrix::zeros(layer.in_dim(), layer.out_dim()),
            bias: vec![0.0; layer.out_dim()],
        }
    }

    fn accumulate(&mut self, other: &LayerGrad) {
        self.weights
            .axpy(1.0, &other.weights)
            .expect("gradient shapes mirror the model");
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Gradients laid out like [`MlpModel`], plus the loss they were taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub encoder: Vec<LayerGrad>,
    pub decoder: Vec<LayerGrad>,
    pub head: LayerGrad,
    pub loss: LossBreakdown,
}

impl GradientBundle {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            encoder: model.encoder.iter().map(LayerGrad::zeros_like).collect(),
            decoder: model.decoder.iter().map(LayerGrad::zeros_like).collect(),
            head: LayerGrad::zeros_like(&model.head),
            loss: LossBreakdown::default(),
        }
    }

    /// Same order as [`MlpModel::layers`].
    pub fn layers(&self) -> impl Iterator<Item = &LayerGrad> {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .chain(std::iter::once(&self.head))
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(LayerGrad::is_finite)
    }

    /// Flattened gradient: per layer, weights row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.layers() {
            out.extend_from_slice(g.weights.as_slice());
            out.extend_from_slice(&g.bias);
        }
        out
    }
}

/// Per-layer inputs and pre-activations kept for the backward pass.
struct StackTape {
    inputs: Vec<DenseMatrix>,
    pre: Vec<DenseMatrix>,
    output: DenseMatrix,
}

fn forward_tape(layers: &[Dense], x: &DenseMatrix) -> Result<StackTape> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    for layer in layers {
        let p = layer.pre_activation(&h)?;
        let act = layer.activation;
        let next = p.map(|v| act.apply(v));
        inputs.push(h);
        pre.push(p);
        h = next;
    }
    Ok(StackTape {
        inputs,
        pre,
        output: h,
    })
}

/// Backpropagates `grad_out` (dL/d output) through a stack, accumulating into `grads`.
/// Returns dL/d input.
fn backward_tape(
    layers: &[Dense],
    tape: &StackTape,
    grad_out: DenseMatrix,
    grads: &mut [LayerGrad],
) -> Result<DenseMatrix> {
    let mut g = grad_out;
    for (i, layer) in layers.iter().enumerate().rev() {
        // through the activation
        let act = layer.activation;
        if act != Activation::Identity {
            let pre = &tape.pre[i];
            let post = if i + 1 == layers.len() {
                &tape.output
            } else {
                &tape.inputs[i + 1]
            };
            for ((gv, &p), &y) in g
                .as_mut_slice()
                .iter_mut()
                .zip(pre.as_slice())
                .zip(post.as_slice())
            {
                *gv *= act.derivative(p, y);
            }
        }
        let dw = matmul_tn(&tape.inputs[i], &g)?;
        let mut db = vec![0.0; layer.out_dim()];
        for r in g.row_iter() {
            for (b, v) in db.iter_mut().zip(r) {
                *b += v;
            }
        }
        grads[i].accumulate(&LayerGrad {
            weights: dw,
            bias: db,
        });
        g = matmul_nt(&g, &layer.weights)?;
    }
    Ok(g)
}

/// A training batch: inputs, class labels and the role of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: DenseMatrix,
    pub labels: Vec<usize>,
    pub roles: Vec<Role>,
}

impl Batch {
    pub fn new(x: DenseMatrix, labels: Vec<usize>, roles: Vec<Role>) -> Result<Self> {
        if labels.len() != x.rows() || roles.len() != x.rows() {
            return Err(Error::Data(format!(
                "batch has {} rows, {} labels, {} roles",
                x.rows(),
                labels.len(),
                roles.len()
            )));
        }
        Ok(Self { x, labels, roles })
    }

    /// Batch where every row is tagged as source.
    pub fn source_only(x: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        let roles = vec![Role::Source; x.rows()];
        Self::new(x, labels, roles)
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// Row indices of the source and cross partitions.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        let mut source = Vec::new();
        let mut cross = Vec::new();
        for (i, r) in self.roles.iter().enumerate() {
            match r {
                Role::Source => source.push(i),
                Role::Cross => cross.push(i),
                Role::Ood => {}
            }
        }
        (source, cross)
    }
}

fn finite_or(v: f64, component: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: format!("loss component `{component}`"),
        })
    }
}

/// Exact gradients of the assembled objective for every parameter.
pub fn backward(
    model: &MlpModel,
    batch: &Batch,
    objective: &ObjectiveSpec,
) -> Result<GradientBundle> {
    objective.validate()?;
    if batch.is_empty() {
        return Err(Error::TooFewSamples {
            op: "backward",
            need: 1,
            got: 0,
        });
    }
    check_input("backward", &batch.x, model.input_dim())?;
    check_labels(&batch.labels, batch.len(), model.n_classes())?;

    let n = batch.len() as f64;
    let mut grads = GradientBundle::zeros_like(model);

    let enc = forward_tape(&model.encoder, &batch.x)?;
    let z = &enc.output;
    let dec = forward_tape(&model.decoder, z)?;
    let x_hat = &dec.output;
    let head = forward_tape(std::slice::from_ref(&model.head), z)?;

    // cross-entropy
    let ce = finite_or(cross_entropy_loss(&head.output, &batch.labels)?, "ce")?;
    let mut d_logits = softmax(&head.output);
    for (r, &y) in batch.labels.iter().enumerate() {
        d_logits[(r, y)] -= 1.0;
    }
    let d_logits = d_logits.scale(1.0 / n);
    let mut d_z = backward_tape(
        std::slice::from_ref(&model.head),
        &head,
        d_logits,
        std::slice::from_mut(&mut grads.head),
    )?;

    // reconstruction
    let rec = finite_or(reconstruction_loss(&batch.x, x_hat)?, "rec")?;
    let (rec_weight, reg_weight) = objective.weights();
    let mut d_xhat = x_hat.sub(&batch.x)?.scale(2.0 * rec_weight / n);

    // regularizer
    let mut reg = 0.0;
    match objective.kind {
        ObjectiveKind::Dmtae => {}
        ObjectiveKind::MtlsRed => {
            let (sx, sz) = (objective.input_bandwidth(), objective.latent_bandwidth());
            if reg_weight != 0.0 {
                let (mi, g) = mi_and_grad_wrt_latent(&batch.x, z, sx, sz)?;
                reg = nats_to_bits(mi);
                d_z.axpy(nats_to_bits(reg_weight), &g)?;
            } else {
                reg = objectives::batch_mutual_information(&batch.x, z, sx, sz)?;
            }
        }
        ObjectiveKind::MmdAe | ObjectiveKind::Coral => {
            let (src, cross) = batch.partition();
            // reg stays 0 when either partition is too small
            if objectives::alignment_applicable(src.len(), cross.len()) {
                let zs = z.select_rows(&src);
                let zc = z.select_rows(&cross);
                let (value, gs, gc) = if objective.kind == ObjectiveKind::MmdAe {
                    objectives::mmd_with_grad(&zs, &zc, objective.mmd_bandwidth())?
                } else {
                    objectives::coral_with_grad(&zs, &zc)?
                };
                reg = value;
                for (k, &i) in src.iter().enumerate() {
                    for (d, g) in d_z.row_mut(i).iter_mut().zip(gs.row(k)) {
                        *d += reg_weight * g;
                    }
                }
                for (k, &i) in cross.iter().enumerate() {
                    for (d, g) in d_z.row_mut(i).iter_mut().zip(gc.row(k)) {
                        *d += reg_weight * g;
                    }
                }
            }
        }
        ObjectiveKind::Nsae => {
            // second pass: re-encode the reconstruction and compare with it
            let enc2 = forward_tape(&model.encoder, x_hat)?;
            let dec2 = forward_tape(&model.decoder, &enc2.output)?;
            reg = reconstruction_loss(x_hat, &dec2.output)?;
            let resid = dec2.output.sub(x_hat)?.scale(2.0 * reg_weight / n);
            let d_z2 = backward_tape(&model.decoder, &dec2, resid.clone(), &mut grads.decoder)?;
            let d_xhat_in = backward_tape(&model.encoder, &enc2, d_z2, &mut grads.encoder)?;
            d_xhat.axpy(1.0, &d_xhat_in)?;
            // x̂ is also the comparison target
            d_xhat.axpy(-1.0, &resid)?;
        }
    }
    let reg = finite_or(reg, "reg")?;

    let d_z_dec = backward_tape(&model.decoder, &dec, d_xhat, &mut grads.decoder)?;
    d_z.axpy(1.0, &d_z_dec)?;
    backward_tape(&model.encoder, &enc, d_z, &mut grads.encoder)?;

    grads.loss = LossBreakdown::new(ce, rec, reg, rec_weight, reg_weight);
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            context: format!("gradient (loss components {:?})", grads.loss),
        });
    }
    Ok(grads)
}

/// Plain SGD: encoder and head step with `lr_encoder`, decoder with `lr_decoder`.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &GradientBundle,
    lr_encoder: f64,
    lr_decoder: f64,
) -> Result<()> {
    for (name, lr) in [("lr_encoder", lr_encoder), ("lr_decoder", lr_decoder)] {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::param(name, format!("must be > 0, got {lr}")));
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "gradient passed to sgd_step".into(),
        });
    }
    if grads.encoder.len() != model.encoder.len() || grads.decoder.len() != model.decoder.len() {
        return Err(Error::Data(
            "gradient layout does not match the model".into(),
        ));
    }
    let step = |layer: &mut Dense, g: &LayerGrad, lr: f64| -> Result<()> {
        layer.weights.axpy(-lr, &g.weights)?;
        for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
            *b -= lr * gb;
        }
        Ok(())
    };
    for (layer, g) in model.encoder.iter_mut().zip(&grads.encoder) {
        step(layer, g, lr_encoder)?;
    }
    step(&mut model.head, &grads.head, lr_encoder)?;
    for (layer, g) in model.decoder.iter_mut().zip(&grads.decoder) {
        step(layer, g, lr_decoder)?;
    }
    if !model.is_finite() {
        return Err(Error::NonFinite {
            context: "model parameters after sgd_step".into(),
        });
    }
    Ok(())
}

/// Signs of every relu pre-activation touched by the objective's forward pass.
///
/// Two parameter settings with the same pattern lie on the same linear piece,
/// which finite-difference checks use to skip coordinates straddling a kink.
pub fn relu_pattern(model: &MlpModel, x: &DenseMatrix, kind: ObjectiveKind) -> Result<Vec<bool>> {
    let mut pattern = Vec::new();
    let mut collect = |layers: &[Dense], input: &DenseMatrix| -> Result<DenseMatrix> {
        let tape = forward_tape(layers, input)?;
        for (layer, pre) in layers.iter().zip(&tape.pre) {
            if layer.activation == Activation::Relu {
                pattern.extend(pre.as_slice().iter().map(|&v| v > 0.0));
            }
        }
        Ok(tape.output)
    };
    let z = collect(&model.encoder, x)?;
    let x_hat = collect(&model.decoder, &z)?;
    if kind == ObjectiveKind::Nsae {
        let z2 = collect(&model.encoder, &x_hat)?;
        collect(&model.decoder, &z2)?;
    }
    Ok(pattern)
}
