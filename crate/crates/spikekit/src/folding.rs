//! From integer activations to binary spike trains and back.
//!
//! A trained network emits integer-valued activations `s` (times 1/N for
//! the normalized kinds) over T steps. For deployment each integer step
//! unfolds into a block of D binary sub-steps carrying
//! `S1 = s*N - ceil(alpha)` ones, placed ones-first (any placement works:
//! downstream sums are permutation-invariant within a block, and a test
//! holds us to that). The consuming layer then runs on accumulate-only
//! synapses plus one constant add per integer step,
//! `X = W' S1 + C`, where `W' = W/N` and `C = W' * ceil(alpha) * ones`.
//!
//! `verify_equivalence` runs the same inputs through the dense training
//! path (on the autodiff tape, i.e. the path training actually uses) and
//! through the spike path above, layer by layer, and reports the
//! per-layer deviation. Only integerized clipping bounds make the two
//! paths meet exactly; continuous bounds are refused rather than
//! approximated.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{FoldError, TensorError};
use crate::network::{training_trace, SpikingMLP};
use crate::neurons::{step, MembraneState, NeuronParams, QuantizedNeuron};
use crate::quantizer::BoundMode;
use crate::tensor::DenseArray;

/// [T x B x N] integer activations, stored as i32 with the normalizer
/// kept alongside (the float activation is `q / n`).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerActivation {
    pub t: usize,
    pub b: usize,
    pub n: usize,
    pub scale_n: f64,
    data: Vec<i32>,
}

impl IntegerActivation {
    /// Capture quantized float activations as integers. `s * n` must be
    /// integral to within 1e-6; anything else means the activations did
    /// not come from an integerized quantizer.
    pub fn from_activations(s: &DenseArray, n: f64) -> Result<Self, FoldError> {
        let [t, b, feat] = s.shape()[..] else {
            return Err(TensorError::BadRank {
                op: "integer capture",
                expected: "[T x B x N] activations",
                got: s.shape().to_vec(),
            }
            .into());
        };
        let mut data = Vec::with_capacity(s.len());
        for (i, &v) in s.data().iter().enumerate() {
            let q = v * n;
            let rounded = q.round_ties_even();
            if (q - rounded).abs() > 1e-6 || rounded.abs() > i32::MAX as f64 {
                let index = vec![i / (b * feat), (i / feat) % b, i % feat];
                return Err(FoldError::NonIntegerActivation { index, value: v, n });
            }
            data.push(rounded as i32);
        }
        Ok(IntegerActivation {
            t,
            b,
            n: feat,
            scale_n: n,
            data,
        })
    }

    pub fn values(&self) -> &[i32] {
        &self.data
    }

    pub fn get(&self, t: usize, b: usize, ch: usize) -> i32 {
        self.data[(t * self.b + b) * self.n + ch]
    }

    /// Back to float activations `q / n`.
    pub fn to_activations(&self) -> Result<DenseArray, TensorError> {
        DenseArray::new(
            vec![self.t, self.b, self.n],
            self.data.iter().map(|&q| q as f64 / self.scale_n).collect(),
        )
    }
}

/// [T*D x B x N] binary spike train; sub-step `d` of integer step `t`
/// lives at lead index `t*D + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub t: usize,
    pub d: usize,
    pub b: usize,
    pub n: usize,
    data: Vec<u8>,
}

impl SpikeTrain {
    fn idx(&self, t: usize, d: usize, b: usize, ch: usize) -> usize {
        ((t * self.d + d) * self.b + b) * self.n + ch
    }

    pub fn get(&self, t: usize, d: usize, b: usize, ch: usize) -> bool {
        self.data[self.idx(t, d, b, ch)] != 0
    }

    pub fn bits(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    /// Ones in the D-block of integer step `t`.
    pub fn block_count(&self, t: usize, b: usize, ch: usize) -> u32 {
        (0..self.d).map(|d| self.data[self.idx(t, d, b, ch)] as u32).sum()
    }

    /// Shuffle spike placement inside each D-block. Block sums (and so
    /// everything downstream) must not care; tests rely on this helper
    /// to prove it.
    pub fn shuffle_within_blocks<R: Rng>(&mut self, rng: &mut R) {
        let mut block = vec![0u8; self.d];
        for t in 0..self.t {
            for b in 0..self.b {
                for ch in 0..self.n {
                    for d in 0..self.d {
                        block[d] = self.data[self.idx(t, d, b, ch)];
                    }
                    block.shuffle(rng);
                    for d in 0..self.d {
                        let i = self.idx(t, d, b, ch);
                        self.data[i] = block[d];
                    }
                }
            }
        }
    }
}

fn ceil_for_channel(ceils: &[i64], ch: usize) -> i64 {
    if ceils.len() == 1 {
        ceils[0]
    } else {
        ceils[ch]
    }
}

/// Unfold integer activations into a binary train of D sub-steps per
/// integer step. `alpha_ceils` holds one ceil(alpha) (or one per
/// channel); every `s*N - ceil(alpha)` must land in [0, D].
pub fn unfold(acts: &IntegerActivation, alpha_ceils: &[i64], d: u32) -> Result<SpikeTrain, FoldError> {
    if alpha_ceils.len() != 1 && alpha_ceils.len() != acts.n {
        return Err(FoldError::Container(format!(
            "unfold: {} alpha ceilings for {} channels",
            alpha_ceils.len(),
            acts.n
        )));
    }
    let mut train = SpikeTrain {
        t: acts.t,
        d: d as usize,
        b: acts.b,
        n: acts.n,
        data: vec![0u8; acts.t * d as usize * acts.b * acts.n],
    };
    for t in 0..acts.t {
        for b in 0..acts.b {
            for ch in 0..acts.n {
                let s1 = acts.get(t, b, ch) as i64 - ceil_for_channel(alpha_ceils, ch);
                if s1 < 0 || s1 > d as i64 {
                    return Err(FoldError::OutOfRange {
                        index: vec![t, b, ch],
                        count: s1,
                        d,
                    });
                }
                for sub in 0..s1 as usize {
                    let i = train.idx(t, sub, b, ch);
                    train.data[i] = 1;
                }
            }
        }
    }
    Ok(train)
}

/// Ceil(alpha) per channel for a quantizer (a single entry when the
/// offset is layer-wise).
pub fn alpha_ceils(neuron: &QuantizedNeuron) -> Vec<i64> {
    neuron
        .quantizer
        .alpha
        .data()
        .iter()
        .map(|a| a.ceil() as i64)
        .collect()
}

/// A synapse stage of the deployable network: folded weight, the
/// constant the fold produced, and the neuron the stage feeds.
#[derive(Debug, Clone)]
pub struct FoldedLayer {
    pub weight: DenseArray,
    pub constant: DenseArray,
    pub neuron: QuantizedNeuron,
}

/// The readout head: folded classifier weight, its fold constant, and
/// the ordinary bias (kept separate from the constant on purpose, so a
/// corrupted constant stays detectable).
#[derive(Debug, Clone)]
pub struct ReadoutHead {
    pub weight: DenseArray,
    pub constant: DenseArray,
    pub bias: DenseArray,
}

#[derive(Debug, Clone)]
pub struct FoldedNetwork {
    pub layers: Vec<FoldedLayer>,
    pub readout: ReadoutHead,
}

fn require_integerized(q: &QuantizedNeuron, layer: usize) -> Result<(), FoldError> {
    match q.quantizer.bound_mode {
        BoundMode::Integerized => Ok(()),
        BoundMode::Continuous => Err(FoldError::ContinuousBounds { layer }),
    }
}

/// Fold one consuming layer against the neuron feeding it:
/// `W' = W / N_up`, `C = W' * ceil(alpha_up) * ones`.
pub fn fold_layer(
    weight: &DenseArray,
    upstream: &QuantizedNeuron,
    layer: usize,
) -> Result<(DenseArray, DenseArray), FoldError> {
    require_integerized(upstream, layer)?;
    let [out, input] = weight.shape()[..] else {
        return Err(TensorError::BadRank {
            op: "fold_layer",
            expected: "a 2-D weight",
            got: weight.shape().to_vec(),
        }
        .into());
    };
    let ceils = alpha_ceils(upstream);
    if ceils.len() != 1 && ceils.len() != input {
        return Err(FoldError::LayerShape {
            layer,
            rows: out,
            cols: input,
            input: ceils.len(),
        });
    }
    let scaled = weight.scale(1.0 / upstream.quantizer.n)?;
    let mut constant = vec![0.0; out];
    for (o, c) in constant.iter_mut().enumerate() {
        let row = &scaled.data()[o * input..(o + 1) * input];
        *c = row
            .iter()
            .enumerate()
            .map(|(j, &w)| w * ceil_for_channel(&ceils, j) as f64)
            .sum();
    }
    Ok((scaled, DenseArray::new(vec![out], constant)?))
}

fn quantized_or_err<'a>(params: &'a NeuronParams, layer: usize) -> Result<&'a QuantizedNeuron, FoldError> {
    params.as_quantized().ok_or(FoldError::UnsupportedKind {
        layer,
        kind: params.kind_name(),
    })
}

/// Fold a whole trained network. The first layer consumes analog input
/// and keeps its weight untouched with a zero constant; every later
/// stage (including the readout) folds against its upstream neuron.
pub fn fold_network(net: &SpikingMLP) -> Result<FoldedNetwork, FoldError> {
    if net.layers.is_empty() {
        return Err(FoldError::Container("network has no spiking layers".into()));
    }
    let mut layers = Vec::with_capacity(net.layers.len());
    for (i, layer) in net.layers.iter().enumerate() {
        let q = quantized_or_err(&layer.neuron, i)?;
        require_integerized(q, i)?;
        let (weight, constant) = if i == 0 {
            let out = layer.weight.shape()[0];
            (layer.weight.clone(), DenseArray::zeros(&[out]))
        } else {
            let upstream = quantized_or_err(&net.layers[i - 1].neuron, i - 1)?;
            fold_layer(&layer.weight, upstream, i)?
        };
        layers.push(FoldedLayer {
            weight,
            constant,
            neuron: q.clone(),
        });
    }
    let last = quantized_or_err(&net.layers.last().unwrap().neuron, net.layers.len() - 1)?;
    let (w, c) = fold_layer(&net.readout.weight, last, net.layers.len())?;
    Ok(FoldedNetwork {
        layers,
        readout: ReadoutHead {
            weight: w,
            constant: c,
            bias: net.readout.bias.clone(),
        },
    })
}

/// Rebuild the dense training form from a folded network: weights are
/// rescaled by the upstream N, alphas come from the stored neuron
/// records. Constants are deliberately ignored so that a corrupted
/// constant shows up as a dual-path deviation instead of being absorbed.
pub fn unfold_network(folded: &FoldedNetwork) -> Result<SpikingMLP, FoldError> {
    let mut layers = Vec::with_capacity(folded.layers.len());
    for (i, fl) in folded.layers.iter().enumerate() {
        let weight = if i == 0 {
            fl.weight.clone()
        } else {
            fl.weight.scale(folded.layers[i - 1].neuron.quantizer.n)?
        };
        layers.push(crate::network::SpikingLayer {
            weight,
            neuron: NeuronParams::Quantized(fl.neuron.clone()),
        });
    }
    let last_n = folded.layers.last().unwrap().neuron.quantizer.n;
    Ok(SpikingMLP {
        layers,
        readout: crate::network::Readout {
            weight: folded.readout.weight.scale(last_n)?,
            bias: folded.readout.bias.clone(),
        },
        timesteps: 1,
    })
}

/// Everything the spike-driven pass produced, for equivalence checks
/// and op counting.
pub struct InferenceTrace {
    /// Per-stage pre-activations X (dense math for stage 0, spike
    /// accumulation plus constant for the rest), each [T x B x out].
    pub preacts: Vec<DenseArray>,
    pub integer_acts: Vec<IntegerActivation>,
    pub trains: Vec<SpikeTrain>,
    pub logits: DenseArray,
}

fn dense_preact(weight: &DenseArray, x: &DenseArray, layer: usize) -> Result<DenseArray, FoldError> {
    let [out, input] = weight.shape()[..] else { unreachable!() };
    let [t, b, feat] = x.shape()[..] else {
        return Err(TensorError::BadRank {
            op: "spike_inference",
            expected: "[T x B x features] input",
            got: x.shape().to_vec(),
        }
        .into());
    };
    if feat != input {
        return Err(FoldError::LayerShape {
            layer,
            rows: out,
            cols: input,
            input: feat,
        });
    }
    let mut data = vec![0.0; t * b * out];
    for tb in 0..t * b {
        let xrow = &x.data()[tb * input..(tb + 1) * input];
        let zrow = &mut data[tb * out..(tb + 1) * out];
        for (o, z) in zrow.iter_mut().enumerate() {
            let wrow = &weight.data()[o * input..(o + 1) * input];
            *z = wrow.iter().zip(xrow).map(|(&wi, &xi)| wi * xi).sum();
        }
    }
    Ok(DenseArray::new(vec![t, b, out], data)?)
}

/// Accumulate a spike train through folded weights and add the constant
/// once per integer step: `X[t] = sum over block spikes of W'[:, j] + C`.
fn accumulate_preact(
    weight: &DenseArray,
    constant: &DenseArray,
    train: &SpikeTrain,
    layer: usize,
) -> Result<DenseArray, FoldError> {
    let [out, input] = weight.shape()[..] else { unreachable!() };
    if input != train.n {
        return Err(FoldError::LayerShape {
            layer,
            rows: out,
            cols: input,
            input: train.n,
        });
    }
    let mut data = vec![0.0; train.t * train.b * out];
    for t in 0..train.t {
        for b in 0..train.b {
            let acc = &mut data[(t * train.b + b) * out..(t * train.b + b + 1) * out];
            acc.copy_from_slice(constant.data());
            for d in 0..train.d {
                for j in 0..train.n {
                    if train.get(t, d, b, j) {
                        for (o, a) in acc.iter_mut().enumerate() {
                            *a += weight.data()[o * input + j];
                        }
                    }
                }
            }
        }
    }
    Ok(DenseArray::new(vec![train.t, train.b, out], data)?)
}

/// Run a neuron's recurrence over a [T x B x N] drive, returning float
/// activations and their integer capture.
fn run_neuron(
    q: &QuantizedNeuron,
    drive: &DenseArray,
) -> Result<(DenseArray, IntegerActivation), FoldError> {
    let params = NeuronParams::Quantized(q.clone());
    let [t, b, n] = drive.shape()[..] else { unreachable!() };
    let mut state = MembraneState::new();
    let mut acts = Vec::with_capacity(drive.len());
    for ti in 0..t {
        let xt = DenseArray::new(vec![b, n], drive.data()[ti * b * n..(ti + 1) * b * n].to_vec())?;
        let r = step(&params, &xt, &mut state)?;
        acts.extend_from_slice(r.s.data());
    }
    let s = DenseArray::new(vec![t, b, n], acts)?;
    let ints = IntegerActivation::from_activations(&s, q.quantizer.n)?;
    Ok((s, ints))
}

/// The spike-driven execution path. Stage 0 is dense analog math; every
/// following stage consumes the previous neuron's unfolded binary train.
pub fn spike_inference(
    folded: &FoldedNetwork,
    x0: &DenseArray,
) -> Result<(DenseArray, InferenceTrace), FoldError> {
    let mut preacts = Vec::new();
    let mut integer_acts = Vec::new();
    let mut trains: Vec<SpikeTrain> = Vec::new();
    for (i, stage) in folded.layers.iter().enumerate() {
        require_integerized(&stage.neuron, i)?;
        let drive = if i == 0 {
            dense_preact(&stage.weight, x0, 0)?
        } else {
            accumulate_preact(&stage.weight, &stage.constant, trains.last().unwrap(), i)?
        };
        let (_, ints) = run_neuron(&stage.neuron, &drive)?;
        let train = unfold(&ints, &alpha_ceils(&stage.neuron), stage.neuron.quantizer.d)?;
        preacts.push(drive);
        integer_acts.push(ints);
        trains.push(train);
    }
    let head = &folded.readout;
    let last = trains.last().unwrap();
    let head_drive = accumulate_preact(&head.weight, &head.constant, last, folded.layers.len())?;
    // Mean over integer steps, then the bias once.
    let [t, b, classes] = head_drive.shape()[..] else { unreachable!() };
    let mut logits = vec![0.0; b * classes];
    for ti in 0..t {
        for i in 0..b * classes {
            logits[i] += head_drive.data()[ti * b * classes + i];
        }
    }
    for (i, v) in logits.iter_mut().enumerate() {
        *v = *v / t as f64 + head.bias.data()[i % classes];
    }
    let logits = DenseArray::new(vec![b, classes], logits)?;
    Ok((
        logits.clone(),
        InferenceTrace {
            preacts,
            integer_acts,
            trains,
            logits,
        },
    ))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LayerDeviation {
    pub layer: usize,
    /// Max abs difference between dense and spike-path pre-activations.
    pub preact_dev: f64,
    /// Elementwise mismatches between each path's integer activations.
    pub integer_mismatches: u64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EquivalenceReport {
    pub layers: Vec<LayerDeviation>,
    pub logits_dev: f64,
    pub max_dev: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl EquivalenceReport {
    /// Index of the first failing stage, if any (layer count = readout).
    pub fn failing_layer(&self) -> Option<usize> {
        for l in &self.layers {
            if l.preact_dev > self.tolerance || l.integer_mismatches > 0 {
                return Some(l.layer);
            }
        }
        if self.logits_dev > self.tolerance {
            return Some(self.layers.len());
        }
        None
    }
}

/// Dual-path check against an explicit folded form (which may have come
/// from a checkpoint and may be corrupted; that is the point).
pub fn verify_with_folded(
    net: &SpikingMLP,
    folded: &FoldedNetwork,
    x0: &DenseArray,
    tolerance: f64,
) -> Result<EquivalenceReport, FoldError> {
    let dense = training_trace(net, x0)?;
    let (spike_logits, trace) = spike_inference(folded, x0)?;
    let mut layers = Vec::with_capacity(trace.preacts.len());
    let mut max_dev = 0.0f64;
    for (i, (dz, sz)) in dense.preacts.iter().zip(&trace.preacts).enumerate() {
        let preact_dev = dz.max_abs_diff(sz)?;
        let dense_ints =
            IntegerActivation::from_activations(&dense.activations[i], folded.layers[i].neuron.quantizer.n)?;
        let integer_mismatches = dense_ints
            .values()
            .iter()
            .zip(trace.integer_acts[i].values())
            .filter(|(a, b)| a != b)
            .count() as u64;
        max_dev = max_dev.max(preact_dev);
        layers.push(LayerDeviation {
            layer: i,
            preact_dev,
            integer_mismatches,
        });
    }
    let logits_dev = dense.logits.max_abs_diff(&spike_logits)?;
    max_dev = max_dev.max(logits_dev);
    let integer_clean = layers.iter().all(|l| l.integer_mismatches == 0);
    Ok(EquivalenceReport {
        layers,
        logits_dev,
        max_dev,
        tolerance,
        passed: max_dev <= tolerance && integer_clean,
    })
}

/// Fold `net` and check that its spike-driven form reproduces the dense
/// training path on `x0` to within `tolerance`.
pub fn verify_equivalence(
    net: &SpikingMLP,
    x0: &DenseArray,
    tolerance: f64,
) -> Result<EquivalenceReport, FoldError> {
    let folded = fold_network(net)?;
    verify_with_folded(net, &folded, x0, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{FirstLayerInit, SpikingMLP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ints(vals: &[i32], t: usize, b: usize, n: usize, scale: f64) -> IntegerActivation {
        IntegerActivation {
            t,
            b,
            n,
            scale_n: scale,
            data: vals.to_vec(),
        }
    }

    #[test]
    fn unfold_places_ones_first() {
        let acts = ints(&[3], 1, 1, 1, 1.0);
        let train = unfold(&acts, &[0], 4).unwrap();
        assert_eq!(train.bits(), &[1, 1, 1, 0]);
    }

    #[test]
    fn unfold_zero_activation_is_silent() {
        let acts = ints(&[0, 0], 2, 1, 1, 1.0);
        let train = unfold(&acts, &[0], 4).unwrap();
        assert_eq!(train.count_ones(), 0);
    }

    #[test]
    fn unfold_subtracts_alpha_ceiling() {
        // s = -1 with ceil(alpha) = -2 carries one spike.
        let acts = ints(&[-1], 1, 1, 1, 1.0);
        let train = unfold(&acts, &[-2], 4).unwrap();
        assert_eq!(train.bits(), &[1, 0, 0, 0]);
    }

    #[test]
    fn unfold_rejects_out_of_window_counts() {
        let acts = ints(&[6], 1, 1, 1, 1.0);
        let err = unfold(&acts, &[0], 4).unwrap_err();
        assert!(matches!(err, FoldError::OutOfRange { count: 6, .. }));
        let acts = ints(&[-1], 1, 1, 1, 1.0);
        assert!(unfold(&acts, &[0], 4).is_err());
    }

    #[test]
    fn capture_rejects_non_integer_activations() {
        let s = DenseArray::new(vec![1, 1, 1], vec![0.3]).unwrap();
        assert!(IntegerActivation::from_activations(&s, 1.0).is_err());
        // 0.3 is fine under N = 10: it is 3/10.
        assert!(IntegerActivation::from_activations(&s, 10.0).is_ok());
    }

    #[test]
    fn unfold_round_trips_every_level() {
        for d in [1u32, 2, 4, 8] {
            for alpha_ceil in [-3i64, 0, 2] {
                for s1 in 0..=d as i64 {
                    let q = (s1 + alpha_ceil) as i32;
                    let acts = ints(&[q], 1, 1, 1, 1.0);
                    let train = unfold(&acts, &[alpha_ceil], d).unwrap();
                    assert_eq!(train.block_count(0, 0, 0) as i64, s1);
                    assert_eq!(train.bits().len(), d as usize);
                }
            }
        }
    }

    #[test]
    fn fold_scalar_examples() {
        // ASN upstream, alpha = 1: constant = W * 1.
        let w = DenseArray::new(vec![1, 2], vec![2.0, -1.0]).unwrap();
        let up = match NeuronParams::asn(0.5, 1.0, 4).unwrap() {
            NeuronParams::Quantized(q) => q,
            _ => unreachable!(),
        };
        let (scaled, c) = fold_layer(&w, &up, 1).unwrap();
        assert_eq!(scaled.data(), &[2.0, -1.0]);
        assert_eq!(c.data(), &[1.0]);

        // NASN upstream, N = 4, alpha = 0.3 -> ceil 1: W/4 and C = 1.
        let w = DenseArray::new(vec![1, 1], vec![4.0]).unwrap();
        let up = match NeuronParams::nasn(0.5, 0.3, 4, 4.0).unwrap() {
            NeuronParams::Quantized(q) => q,
            _ => unreachable!(),
        };
        let (scaled, c) = fold_layer(&w, &up, 1).unwrap();
        assert_eq!(scaled.data(), &[1.0]);
        assert_eq!(c.data(), &[1.0]);

        // alpha = 0 folds to a zero constant.
        let up = match NeuronParams::ilif(0.5, 4).unwrap() {
            NeuronParams::Quantized(q) => q,
            _ => unreachable!(),
        };
        let w = DenseArray::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (_, c) = fold_layer(&w, &up, 1).unwrap();
        assert_eq!(c.data(), &[0.0, 0.0]);
    }

    fn random_input(t: usize, b: usize, f: usize, seed: u64, spread: f64) -> DenseArray {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..t * b * f).map(|_| rng.gen_range(-spread..spread)).collect();
        DenseArray::new(vec![t, b, f], data).unwrap()
    }

    fn small_net(kind: &str, seed: u64) -> SpikingMLP {
        let neuron = match kind {
            "asn" => NeuronParams::asn(0.5, -1.3, 4).unwrap(),
            "nasn" => NeuronParams::nasn(0.5, 0.7, 4, 4.0).unwrap(),
            _ => unreachable!(),
        };
        SpikingMLP::init(8, &[16, 8], 4, &neuron, 3, FirstLayerInit::Uniform, seed).unwrap()
    }

    #[test]
    fn dual_paths_agree_on_fresh_networks() {
        for (i, kind) in ["asn", "nasn"].iter().enumerate() {
            let net = small_net(kind, 42 + i as u64);
            let x = random_input(3, 5, 8, 7 + i as u64, 3.0);
            let report = verify_equivalence(&net, &x, 1e-9).unwrap();
            assert!(report.passed, "{kind}: {report:?}");
            assert!(report.max_dev <= 1e-9);
        }
    }

    #[test]
    fn corrupted_constant_is_caught_and_named() {
        let net = small_net("nasn", 11);
        let mut folded = fold_network(&net).unwrap();
        folded.layers[1].constant.data_mut()[0] += 1e-3;
        let x = random_input(3, 4, 8, 5, 3.0);
        let report = verify_with_folded(&net, &folded, &x, 1e-9).unwrap();
        assert!(!report.passed);
        assert_eq!(report.failing_layer(), Some(1));
    }

    #[test]
    fn continuous_bounds_are_refused() {
        let mut net = small_net("asn", 3);
        net.layers[0]
            .neuron
            .as_quantized_mut()
            .unwrap()
            .quantizer
            .bound_mode = BoundMode::Continuous;
        let x = random_input(3, 2, 8, 1, 3.0);
        match verify_equivalence(&net, &x, 1e-9) {
            Err(FoldError::ContinuousBounds { layer: 0 }) => {}
            other => panic!("expected a continuous-bounds refusal, got {other:?}"),
        }
    }

    #[test]
    fn within_block_permutation_changes_nothing_downstream() {
        let net = small_net("asn", 19);
        let folded = fold_network(&net).unwrap();
        let x = random_input(3, 4, 8, 23, 3.0);
        let (_, trace) = spike_inference(&folded, &x).unwrap();
        let mut train = trace.trains[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        train.shuffle_within_blocks(&mut rng);
        let before = accumulate_preact(
            &folded.layers[1].weight,
            &folded.layers[1].constant,
            &trace.trains[0],
            1,
        )
        .unwrap();
        let after =
            accumulate_preact(&folded.layers[1].weight, &folded.layers[1].constant, &train, 1).unwrap();
        // Same multiset of weight-column adds per block; float sums can
        // reassociate, hence the tolerance instead of bit equality.
        assert!(before.max_abs_diff(&after).unwrap() < 1e-12);
        for t in 0..train.t {
            for b in 0..train.b {
                for ch in 0..train.n {
                    assert_eq!(train.block_count(t, b, ch), trace.trains[0].block_count(t, b, ch));
                }
            }
        }
    }

    #[test]
    fn zero_input_stays_zero_everywhere() {
        let net = small_net("asn", 5);
        let folded = fold_network(&net).unwrap();
        let x = DenseArray::zeros(&[3, 2, 8]);
        let (logits, trace) = spike_inference(&folded, &x).unwrap();
        // alpha < 0 here, so spikes can fire on zero drive; rebuild with
        // a zero-offset net for the strict silence claim.
        drop((logits, trace));
        let neuron = NeuronParams::ilif(0.5, 4).unwrap();
        let net = SpikingMLP::init(8, &[16, 8], 4, &neuron, 3, FirstLayerInit::Uniform, 5).unwrap();
        let folded = fold_network(&net).unwrap();
        let (logits, trace) = spike_inference(&folded, &x).unwrap();
        assert!(trace.trains.iter().all(|t| t.count_ones() == 0));
        // Logits collapse to the readout bias (zeros at init).
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unfolding_a_folded_network_restores_training_weights() {
        let net = small_net("nasn", 31);
        let folded = fold_network(&net).unwrap();
        let restored = unfold_network(&folded).unwrap();
        for (a, b) in net.layers.iter().zip(&restored.layers) {
            assert!(a.weight.max_abs_diff(&b.weight).unwrap() < 1e-12);
        }
        assert!(net
            .readout
            .weight
            .max_abs_diff(&restored.readout.weight)
            .unwrap()
            < 1e-12);
    }
}
