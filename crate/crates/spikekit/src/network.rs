//! A small spiking MLP: dense layers, one neuron kind per layer, mean
//! readout over time, cross-entropy on top.
//!
//! Training runs on the autodiff tape. Integer-firing kinds get exact
//! window gradients from the quantizer rule; binary kinds use the
//! rectangular surrogate. The trainer owns batching, the optimizer, and
//! the per-epoch curve rows the CLI writes out.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::encode_temporal;
use crate::error::{TensorError, TrainError};
use crate::neurons::{forward, forward_on_tape, MembraneState, NeuronParams, NeuronTapeLeaves};
use crate::optim::{Optimizer, OptimizerKind, SlotId};
use crate::tape::{NodeId, Tape};
use crate::tensor::DenseArray;

#[derive(Debug, Clone)]
pub struct SpikingLayer {
    /// [out x in] dense weight feeding this layer's neurons.
    pub weight: DenseArray,
    pub neuron: NeuronParams,
}

#[derive(Debug, Clone)]
pub struct Readout {
    /// [classes x last_width] classifier over the time-averaged output.
    pub weight: DenseArray,
    pub bias: DenseArray,
}

#[derive(Debug, Clone)]
pub struct SpikingMLP {
    pub layers: Vec<SpikingLayer>,
    pub readout: Readout,
    /// Structural step count: PSN sizing and the default input encoding.
    pub timesteps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstLayerInit {
    #[default]
    Uniform,
    /// Identity first layer (requires width == input dim). Keeps raw
    /// feature values visible to the first neuron layer, which is what
    /// the window-offset experiments probe.
    Identity,
}

fn uniform_weight<R: Rng>(out: usize, input: usize, rng: &mut R) -> Result<DenseArray, TensorError> {
    let bound = 1.0 / (input as f64).sqrt();
    let data = (0..out * input).map(|_| rng.gen_range(-bound..bound)).collect();
    DenseArray::new(vec![out, input], data)
}

impl SpikingMLP {
    /// Fresh network: hidden widths from `widths`, every hidden layer a
    /// clone of `template`, uniform +-1/sqrt(fan_in) weights (except an
    /// optional identity first layer), zero readout bias.
    pub fn init(
        input_dim: usize,
        widths: &[usize],
        classes: usize,
        template: &NeuronParams,
        timesteps: usize,
        first_layer: FirstLayerInit,
        seed: u64,
    ) -> Result<Self, TensorError> {
        if input_dim == 0 || classes < 2 || widths.is_empty() || widths.contains(&0) {
            return Err(TensorError::Invalid(format!(
                "bad architecture: {input_dim} inputs, widths {widths:?}, {classes} classes"
            )));
        }
        if timesteps == 0 {
            return Err(TensorError::Invalid("need at least one timestep".into()));
        }
        if first_layer == FirstLayerInit::Identity && widths[0] != input_dim {
            return Err(TensorError::Invalid(format!(
                "identity first layer needs width {input_dim}, got {}",
                widths[0]
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input_dim;
        for (i, &w) in widths.iter().enumerate() {
            let weight = if i == 0 && first_layer == FirstLayerInit::Identity {
                let mut eye = vec![0.0; w * fan_in];
                for r in 0..w {
                    eye[r * fan_in + r] = 1.0;
                }
                DenseArray::new(vec![w, fan_in], eye)?
            } else {
                uniform_weight(w, fan_in, &mut rng)?
            };
            layers.push(SpikingLayer {
                weight,
                neuron: template.clone(),
            });
            fan_in = w;
        }
        Ok(SpikingMLP {
            layers,
            readout: Readout {
                weight: uniform_weight(classes, fan_in, &mut rng)?,
                bias: DenseArray::zeros(&[classes]),
            },
            timesteps,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.shape()[1]
    }

    pub fn classes(&self) -> usize {
        self.readout.bias.len()
    }

    /// Per-layer window offset (mean when per-channel; 0 for kinds that
    /// have none), in layer order. Matches the curve-file columns.
    pub fn alphas(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| match l.neuron.as_quantized() {
                Some(q) => {
                    let a = q.quantizer.alpha.data();
                    a.iter().sum::<f64>() / a.len() as f64
                }
                None => 0.0,
            })
            .collect()
    }

    /// Silence the classifier head. With a zero readout the first
    /// feature gradients come from fitted class evidence rather than
    /// from whatever the random head happens to predict, which matters
    /// when a learnable window offset listens to those gradients.
    pub fn zero_readout(&mut self) {
        for w in self.readout.weight.data_mut() {
            *w = 0.0;
        }
    }

    /// Give every quantized layer one offset per channel instead of one
    /// per layer (each channel starts at the current shared value).
    pub fn per_channel_alpha(&mut self) -> Result<(), TensorError> {
        for layer in &mut self.layers {
            let width = layer.weight.shape()[0];
            if let Some(q) = layer.neuron.as_quantized_mut() {
                let a = q.quantizer.alpha_scalar();
                q.quantizer.alpha = DenseArray::full(&[width], a);
            }
        }
        Ok(())
    }
}

/// The tape plus every node handle the trainer needs to read gradients.
pub struct NetTape {
    pub tape: Tape,
    pub weights: Vec<NodeId>,
    pub neurons: Vec<NeuronTapeLeaves>,
    pub preacts: Vec<NodeId>,
    pub activations: Vec<NodeId>,
    pub readout_w: NodeId,
    pub readout_b: NodeId,
    pub logits: NodeId,
}

/// Record the full forward pass of `net` on `x0` ([T x B x features]).
pub fn build_forward(net: &SpikingMLP, x0: &DenseArray, trainable: bool) -> Result<NetTape, TensorError> {
    let mut tape = Tape::new();
    let mut a = tape.constant(x0.clone());
    let mut weights = Vec::new();
    let mut neurons = Vec::new();
    let mut preacts = Vec::new();
    let mut activations = Vec::new();
    for layer in &net.layers {
        let w = tape.leaf(layer.weight.clone(), trainable);
        let z = tape.linear_time(w, a)?;
        let n = forward_on_tape(&mut tape, &layer.neuron, z, trainable)?;
        weights.push(w);
        preacts.push(z);
        activations.push(n.output);
        neurons.push(n.leaves);
        a = n.output;
    }
    let mean = tape.mean_lead(a)?;
    let shape = tape.value(mean).shape().to_vec();
    let lifted = tape.reshape(mean, vec![1, shape[0], shape[1]])?;
    let wr = tape.leaf(net.readout.weight.clone(), trainable);
    let br = tape.leaf(net.readout.bias.clone(), trainable);
    let mixed = tape.linear_time(wr, lifted)?;
    let classes = net.classes();
    let flat = tape.reshape(mixed, vec![shape[0], classes])?;
    let logits = tape.add_bias(flat, br)?;
    Ok(NetTape {
        tape,
        weights,
        neurons,
        preacts,
        activations,
        readout_w: wr,
        readout_b: br,
        logits,
    })
}

/// Values captured from the training-mode forward pass, used by the
/// dual-path equivalence check.
pub struct TrainingTrace {
    pub preacts: Vec<DenseArray>,
    pub activations: Vec<DenseArray>,
    pub logits: DenseArray,
}

pub fn training_trace(net: &SpikingMLP, x0: &DenseArray) -> Result<TrainingTrace, TensorError> {
    let nt = build_forward(net, x0, false)?;
    Ok(TrainingTrace {
        preacts: nt.preacts.iter().map(|&n| nt.tape.value(n).clone()).collect(),
        activations: nt.activations.iter().map(|&n| nt.tape.value(n).clone()).collect(),
        logits: nt.tape.value(nt.logits).clone(),
    })
}

fn argmax_rows(logits: &DenseArray) -> Vec<usize> {
    let [rows, cols] = logits.shape()[..] else {
        return Vec::new();
    };
    (0..rows)
        .map(|r| {
            let row = &logits.data()[r * cols..(r + 1) * cols];
            row.iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

fn gather_rows(inputs: &DenseArray, idx: &[usize]) -> Result<DenseArray, TensorError> {
    let cols = inputs.shape()[1];
    let mut data = Vec::with_capacity(idx.len() * cols);
    for &i in idx {
        data.extend_from_slice(&inputs.data()[i * cols..(i + 1) * cols]);
    }
    DenseArray::new(vec![idx.len(), cols], data)
}

/// Accuracy of `net` on a [n x features] input block, no tape involved.
pub fn evaluate(net: &SpikingMLP, inputs: &DenseArray, labels: &[usize]) -> Result<f64, TensorError> {
    let n = inputs.shape()[0];
    if n == 0 {
        return Err(TensorError::Invalid("cannot evaluate on an empty set".into()));
    }
    let mut correct = 0usize;
    for chunk in (0..n).collect::<Vec<_>>().chunks(256) {
        let batch = gather_rows(inputs, chunk)?;
        let x = encode_temporal(&batch, net.timesteps)?;
        let logits = infer_logits(net, &x)?;
        for (row, &i) in argmax_rows(&logits).iter().zip(chunk) {
            if *row == labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Dense forward without the tape (evaluation and diagnostics).
fn infer_logits(net: &SpikingMLP, x0: &DenseArray) -> Result<DenseArray, TensorError> {
    let mut a = x0.clone();
    for layer in &net.layers {
        let z = dense_linear_time(&layer.weight, &a)?;
        a = forward(&layer.neuron, &z, &mut MembraneState::new())?;
    }
    let [t, b, feat] = a.shape()[..] else { unreachable!() };
    let classes = net.classes();
    let mut mean = vec![0.0; b * feat];
    for ti in 0..t {
        for i in 0..b * feat {
            mean[i] += a.data()[ti * b * feat + i] / t as f64;
        }
    }
    let mut logits = vec![0.0; b * classes];
    for r in 0..b {
        for c in 0..classes {
            let wrow = &net.readout.weight.data()[c * feat..(c + 1) * feat];
            logits[r * classes + c] = wrow
                .iter()
                .zip(&mean[r * feat..(r + 1) * feat])
                .map(|(&wi, &xi)| wi * xi)
                .sum::<f64>()
                + net.readout.bias.data()[c];
        }
    }
    DenseArray::new(vec![b, classes], logits)
}

fn dense_linear_time(w: &DenseArray, x: &DenseArray) -> Result<DenseArray, TensorError> {
    let [out, input] = w.shape()[..] else { unreachable!() };
    let [t, b, feat] = x.shape()[..] else {
        return Err(TensorError::BadRank {
            op: "linear",
            expected: "a [T x B x features] input",
            got: x.shape().to_vec(),
        });
    };
    if feat != input {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            lhs: w.shape().to_vec(),
            rhs: x.shape().to_vec(),
        });
    }
    let mut data = vec![0.0; t * b * out];
    for tb in 0..t * b {
        let xrow = &x.data()[tb * input..(tb + 1) * input];
        for o in 0..out {
            let wrow = &w.data()[o * input..(o + 1) * input];
            data[tb * out + o] = wrow.iter().zip(xrow).map(|(&wi, &xi)| wi * xi).sum();
        }
    }
    DenseArray::new(vec![t, b, out], data)
}

/// Which layer first produces a non-finite value on `x0`, if any.
fn locate_nonfinite(net: &SpikingMLP, x0: &DenseArray) -> Option<usize> {
    let mut a = x0.clone();
    for (i, layer) in net.layers.iter().enumerate() {
        let z = match dense_linear_time(&layer.weight, &a) {
            Ok(z) => z,
            Err(_) => return Some(i),
        };
        match forward(&layer.neuron, &z, &mut MembraneState::new()) {
            Ok(s) => a = s,
            Err(_) => return Some(i),
        }
    }
    None
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Separate learning rate for window offsets; defaults to `lr`.
    pub alpha_lr: Option<f64>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Keep offsets where they are even when the kind is adaptive.
    pub freeze_alpha: bool,
    /// Keep the first layer's weight matrix at its initial value. The
    /// window-offset experiments use an identity probe layer there and
    /// freezing it stops weight rescaling from absorbing the input
    /// shift that the offset is supposed to track.
    pub freeze_first_weight: bool,
    /// Override the offset-gradient scale on every quantized layer.
    pub grad_scale: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch: 64,
            lr: 1e-2,
            alpha_lr: None,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            freeze_alpha: false,
            freeze_first_weight: false,
            grad_scale: None,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainOutcome {
    pub curves: Vec<EpochStat>,
    pub final_train_accuracy: f64,
}

struct SlotMap {
    weights: Vec<SlotId>,
    alphas: Vec<Option<SlotId>>,
    plif: Vec<Option<SlotId>>,
    psn_w: Vec<Option<SlotId>>,
    psn_th: Vec<Option<SlotId>>,
    readout_w: SlotId,
    readout_b: SlotId,
}

fn register_slots(net: &SpikingMLP, opt: &mut Optimizer) -> SlotMap {
    let mut weights = Vec::new();
    let mut alphas = Vec::new();
    let mut plif = Vec::new();
    let mut psn_w = Vec::new();
    let mut psn_th = Vec::new();
    for layer in &net.layers {
        weights.push(opt.register(layer.weight.len()));
        match &layer.neuron {
            NeuronParams::Quantized(q) if q.quantizer.trainable_alpha => {
                alphas.push(Some(opt.register(q.quantizer.alpha.len())));
                plif.push(None);
                psn_w.push(None);
                psn_th.push(None);
            }
            NeuronParams::Plif { .. } => {
                alphas.push(None);
                plif.push(Some(opt.register(1)));
                psn_w.push(None);
                psn_th.push(None);
            }
            NeuronParams::Psn { weight, threshold } => {
                alphas.push(None);
                plif.push(None);
                psn_w.push(Some(opt.register(weight.len())));
                psn_th.push(Some(opt.register(threshold.len())));
            }
            _ => {
                alphas.push(None);
                plif.push(None);
                psn_w.push(None);
                psn_th.push(None);
            }
        }
    }
    SlotMap {
        weights,
        alphas,
        plif,
        psn_w,
        psn_th,
        readout_w: opt.register(net.readout.weight.len()),
        readout_b: opt.register(net.readout.bias.len()),
    }
}

/// Train in place. Deterministic for a fixed config and dataset: one
/// seeded RNG drives shuffling, batches are sequential chunks, and the
/// backward pass is single-threaded.
pub fn train(
    net: &mut SpikingMLP,
    inputs: &DenseArray,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if inputs.shape().len() != 2 || inputs.shape()[0] != labels.len() {
        return Err(TrainError::BadConfig(format!(
            "inputs {:?} do not match {} labels",
            inputs.shape(),
            labels.len()
        )));
    }
    if inputs.shape()[1] != net.input_dim() {
        return Err(TrainError::BadConfig(format!(
            "network expects {} features, data has {}",
            net.input_dim(),
            inputs.shape()[1]
        )));
    }
    if cfg.batch == 0 || !cfg.lr.is_finite() || cfg.lr <= 0.0 {
        return Err(TrainError::BadConfig(format!(
            "batch {} and learning rate {} must be positive",
            cfg.batch, cfg.lr
        )));
    }
    let classes = net.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(TrainError::BadConfig(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    for layer in &mut net.layers {
        if let Some(q) = layer.neuron.as_quantized_mut() {
            if let Some(a) = cfg.grad_scale {
                q.quantizer.grad_scale = a;
            }
            if cfg.freeze_alpha {
                q.quantizer.trainable_alpha = false;
            }
        }
    }
    let alpha_lr = cfg.alpha_lr.unwrap_or(cfg.lr);
    let mut opt = Optimizer::new(cfg.optimizer);
    let slots = register_slots(net, &mut opt);
    let n = inputs.shape()[0];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curves = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_i, chunk) in order.chunks(cfg.batch).enumerate() {
            let batch = gather_rows(inputs, chunk)?;
            let x = encode_temporal(&batch, net.timesteps)?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let step = run_batch(net, &x, &batch_labels, &mut opt, &slots, cfg, alpha_lr)
                .map_err(|e| annotate(e, net, &x, epoch, batch_i))?;
            loss_sum += step.loss * chunk.len() as f64;
            correct += step.correct;
        }
        curves.push(EpochStat {
            epoch,
            loss: loss_sum / n as f64,
            train_acc: correct as f64 / n as f64,
            alphas: net.alphas(),
        });
    }
    let final_train_accuracy = evaluate(net, inputs, labels)?;
    Ok(TrainOutcome {
        curves,
        final_train_accuracy,
    })
}

fn annotate(e: TrainError, net: &SpikingMLP, x: &DenseArray, epoch: usize, batch: usize) -> TrainError {
    match e {
        TrainError::Tensor(TensorError::NonFinite { .. }) => TrainError::NonFiniteLoss {
            epoch,
            batch,
            layer: locate_nonfinite(net, x),
        },
        other => other,
    }
}

struct BatchStep {
    loss: f64,
    correct: usize,
}

fn run_batch(
    net: &mut SpikingMLP,
    x: &DenseArray,
    labels: &[usize],
    opt: &mut Optimizer,
    slots: &SlotMap,
    cfg: &TrainConfig,
    alpha_lr: f64,
) -> Result<BatchStep, TrainError> {
    let lr = cfg.lr;
    let mut nt = build_forward(net, x, true)?;
    let loss = nt.tape.cross_entropy(nt.logits, labels)?;
    let grads = nt.tape.backward(loss)?;
    let correct = argmax_rows(nt.tape.value(nt.logits))
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    opt.begin_step();
    let apply = |opt: &mut Optimizer, slot: SlotId, lr: f64, params: &mut [f64], node: NodeId| {
        match grads.get(node) {
            Some(g) => opt.update(slot, lr, params, g.data()),
            None => Ok(()),
        }
    };
    for (i, layer) in net.layers.iter_mut().enumerate() {
        if !(i == 0 && cfg.freeze_first_weight) {
            apply(opt, slots.weights[i], lr, layer.weight.data_mut(), nt.weights[i])?;
        }
        match &mut layer.neuron {
            NeuronParams::Quantized(q) => {
                if let (Some(slot), Some(node)) = (slots.alphas[i], nt.neurons[i].alpha) {
                    apply(opt, slot, alpha_lr, q.quantizer.alpha.data_mut(), node)?;
                }
            }
            NeuronParams::Plif { w, .. } => {
                if let (Some(slot), Some(node)) = (slots.plif[i], nt.neurons[i].plif_w) {
                    let mut p = [*w];
                    apply(opt, slot, lr, &mut p, node)?;
                    *w = p[0];
                }
            }
            NeuronParams::Psn { weight, threshold } => {
                if let (Some(slot), Some(node)) = (slots.psn_w[i], nt.neurons[i].psn_weight) {
                    apply(opt, slot, lr, weight.data_mut(), node)?;
                }
                if let (Some(slot), Some(node)) = (slots.psn_th[i], nt.neurons[i].psn_threshold) {
                    apply(opt, slot, lr, threshold.data_mut(), node)?;
                }
            }
            NeuronParams::Lif { .. } => {}
        }
    }
    apply(opt, slots.readout_w, lr, net.readout.weight.data_mut(), nt.readout_w)?;
    apply(opt, slots.readout_b, lr, net.readout.bias.data_mut(), nt.readout_b)?;
    Ok(BatchStep {
        loss: nt.tape.value(loss).item(),
        correct,
    })
}

/// Curve rows in the on-disk format: one line per epoch, one offset
/// column per layer.
pub fn curves_csv(curves: &[EpochStat], layer_count: usize) -> String {
    let mut out = String::from("epoch,loss,train_acc");
    for l in 1..=layer_count {
        out.push_str(&format!(",alpha_l{l}"));
    }
    out.push('\n');
    for row in curves {
        out.push_str(&format!("{},{},{}", row.epoch, row.loss, row.train_acc));
        for a in &row.alphas {
            out.push_str(&format!(",{a}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BenchConfig {
    pub features: usize,
    pub widths: Vec<usize>,
    pub classes: usize,
    /// Integer-side step count T; the binary side runs T * D steps.
    pub timesteps: usize,
    pub d: u32,
    pub samples: usize,
    pub batch: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            features: 32,
            widths: vec![256, 256],
            classes: 4,
            timesteps: 2,
            d: 4,
            samples: 256,
            batch: 64,
            trials: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub d: u32,
    pub integer_steps: usize,
    pub binary_steps: usize,
    pub trials: usize,
    pub integer_seconds: f64,
    pub binary_seconds: f64,
    pub integer_trial_seconds: Vec<f64>,
    pub binary_trial_seconds: Vec<f64>,
    /// binary / integer wall time for one training epoch.
    pub speedup: f64,
}

fn median(vals: &[f64]) -> f64 {
    let mut v = vals.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Time one training epoch of a D-level integer network against a
/// binary network covering the same horizon with T * D steps.
pub fn benchmark(cfg: &BenchConfig) -> Result<BenchReport, crate::error::Error> {
    if cfg.trials == 0 {
        return Err(TrainError::BadConfig("benchmark needs at least one trial".into()).into());
    }
    let ds = crate::data::gen_shifted_task(cfg.samples, cfg.features, cfg.classes, 0.0, 1.0, cfg.seed)?;
    let train_cfg = TrainConfig {
        epochs: 1,
        batch: cfg.batch,
        lr: 1e-3,
        optimizer: OptimizerKind::Sgd,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let mut integer_trial_seconds = Vec::with_capacity(cfg.trials);
    let mut binary_trial_seconds = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let seed = cfg.seed + trial as u64;
        let neuron = NeuronParams::ilif(0.5, cfg.d)?;
        let mut net = SpikingMLP::init(
            cfg.features,
            &cfg.widths,
            cfg.classes,
            &neuron,
            cfg.timesteps,
            FirstLayerInit::Uniform,
            seed,
        )?;
        let start = Instant::now();
        train(&mut net, &ds.inputs, &ds.labels, &train_cfg)?;
        integer_trial_seconds.push(start.elapsed().as_secs_f64());

        let neuron = NeuronParams::lif(0.5, 1.0)?;
        let mut net = SpikingMLP::init(
            cfg.features,
            &cfg.widths,
            cfg.classes,
            &neuron,
            cfg.timesteps * cfg.d as usize,
            FirstLayerInit::Uniform,
            seed,
        )?;
        let start = Instant::now();
        train(&mut net, &ds.inputs, &ds.labels, &train_cfg)?;
        binary_trial_seconds.push(start.elapsed().as_secs_f64());
    }
    let integer_seconds = median(&integer_trial_seconds);
    let binary_seconds = median(&binary_trial_seconds);
    Ok(BenchReport {
        d: cfg.d,
        integer_steps: cfg.timesteps,
        binary_steps: cfg.timesteps * cfg.d as usize,
        trials: cfg.trials,
        integer_seconds,
        binary_seconds,
        integer_trial_seconds,
        binary_trial_seconds,
        speedup: binary_seconds / integer_seconds,
    })
}
