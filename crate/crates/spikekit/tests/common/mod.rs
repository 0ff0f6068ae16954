//! Reference oracles written as plain scalar loops, kept deliberately
//! separate from the library's array code so the two can disagree.
//!
//! Each test target pulls in only what it needs.
#![allow(dead_code)]

use rand::Rng;
use spikekit::network::{FirstLayerInit, SpikingMLP};
use spikekit::neurons::NeuronParams;
use spikekit::tensor::DenseArray;

/// One quantized neuron stepped over a scalar drive, straight from the
/// recurrence: charge, round, clip against [ceil(alpha), ceil(alpha)+D],
/// scale by 1/N, soft-reset.
pub fn quantized_trace_oracle(
    beta: f64,
    alpha: f64,
    d: u32,
    n: f64,
    xs: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let lo = alpha.ceil();
    let hi = lo + d as f64;
    let mut h = 0.0;
    let mut spikes = Vec::with_capacity(xs.len());
    let mut resids = Vec::with_capacity(xs.len());
    for &x in xs {
        let u = h + x;
        let s = u.round_ties_even().clamp(lo, hi) / n;
        h = beta * (u - s * n);
        spikes.push(s);
        resids.push(h);
    }
    (spikes, resids)
}

/// Binary threshold neuron: fire at u >= v_th (ties fire), reset by
/// subtracting the spike.
pub fn binary_trace_oracle(beta: f64, v_th: f64, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut h = 0.0;
    let mut spikes = Vec::with_capacity(xs.len());
    let mut resids = Vec::with_capacity(xs.len());
    for &x in xs {
        let u = h + x;
        let s = if u - v_th >= 0.0 { 1.0 } else { 0.0 };
        h = beta * (u - s);
        spikes.push(s);
        resids.push(h);
    }
    (spikes, resids)
}

/// The two straight-through rules evaluated one element at a time:
/// windowed pass-through for the input, truncated-sum times a/N for the
/// offset. Sums run in index order so results are bitwise comparable.
pub fn ste_oracle(
    u: &[f64],
    upstream: &[f64],
    alpha: &[f64],
    d: u32,
    n: f64,
    a: f64,
) -> (Vec<f64>, Vec<f64>) {
    let channels = alpha.len();
    let mut dx = Vec::with_capacity(u.len());
    let mut dalpha = vec![0.0; channels];
    for (i, (&x, &g)) in u.iter().zip(upstream).enumerate() {
        let c = if channels == 1 { 0 } else { i % channels };
        let lo = alpha[c];
        let hi = lo + d as f64;
        if x >= lo && x <= hi {
            dx.push(g / n);
        } else {
            dx.push(0.0);
            dalpha[c] += g;
        }
    }
    for v in dalpha.iter_mut() {
        *v = a * *v / n;
    }
    (dx, dalpha)
}

/// A random small quantized network plus a matching random drive, the
/// shape family the equivalence sweep walks.
pub fn random_quantized_net<R: Rng>(rng: &mut R, seed: u64) -> (SpikingMLP, DenseArray) {
    let depth = rng.gen_range(1..=3usize);
    let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(3..=64usize)).collect();
    let d = [1u32, 2, 4, 8][rng.gen_range(0..4)];
    let alpha = rng.gen_range(-3.0..3.0);
    let beta = rng.gen_range(0.1..1.0);
    let features = rng.gen_range(2..=12usize);
    let classes = rng.gen_range(2..=5usize);
    let t = rng.gen_range(1..=3usize);
    let b = rng.gen_range(1..=8usize);
    let neuron = if rng.gen_bool(0.5) {
        NeuronParams::asn(beta, alpha, d).unwrap()
    } else {
        NeuronParams::nasn(beta, alpha, d, d as f64).unwrap()
    };
    let net = SpikingMLP::init(features, &widths, classes, &neuron, t, FirstLayerInit::Uniform, seed)
        .unwrap();
    let drive: Vec<f64> = (0..t * b * features).map(|_| rng.gen_range(-4.0..8.0)).collect();
    let x0 = DenseArray::new(vec![t, b, features], drive).unwrap();
    (net, x0)
}
