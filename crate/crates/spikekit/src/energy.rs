//! Synaptic-operation counts and the energy estimate built on them.
//!
//! Two cost columns per stage: `mac_count` is what the dense
//! training-mode pass would spend (T * B * out * in multiply-adds),
//! `ac_count` is what the spike-driven pass actually spends (one
//! accumulate per input spike per fan-out). Folding also introduces a
//! constant add, charged once per integer step per sample at MAC cost
//! whenever the folded constant is nonzero.
//!
//! The energy figure per stage prices the deployed path: the first
//! stage consumes analog input and stays multiply-based; every later
//! stage pays `ac_count * e_ac + constant_adds * e_mac`.

use crate::folding::{FoldedNetwork, InferenceTrace};

/// Default accumulate cost, joules (45 nm process figures).
pub const DEFAULT_E_AC: f64 = 0.9e-12;
/// Default multiply-accumulate cost, joules.
pub const DEFAULT_E_MAC: f64 = 4.6e-12;

#[derive(Debug, Clone, serde::Serialize)]
pub struct StageOps {
    pub stage: String,
    pub mac_count: u64,
    pub ac_count: u64,
    pub constant_adds: u64,
    /// Fraction of input spike slots that fired (0 for the analog stage).
    pub firing_rate: f64,
    pub energy_joules: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyReport {
    pub e_ac: f64,
    pub e_mac: f64,
    pub stages: Vec<StageOps>,
    pub mac_count: u64,
    pub ac_count: u64,
    pub constant_adds: u64,
    pub firing_rate: f64,
    pub energy_joules: f64,
}

/// Count both paths' synaptic work for one spike-driven run.
pub fn count_ops(
    folded: &FoldedNetwork,
    trace: &InferenceTrace,
    e_ac: f64,
    e_mac: f64,
) -> EnergyReport {
    let mut stages = Vec::new();
    let [t, b, _] = trace.preacts[0].shape()[..] else {
        unreachable!("inference traces always carry [T x B x out] pre-activations");
    };
    let steps = (t * b) as u64;
    let mut spike_slots = 0u64;
    let mut spikes_total = 0u64;
    for (i, stage) in folded.layers.iter().enumerate() {
        let [out, input] = stage.weight.shape()[..] else { unreachable!() };
        let mac_count = steps * (out * input) as u64;
        let (ac_count, constant_adds, firing_rate, energy) = if i == 0 {
            (0, 0, 0.0, mac_count as f64 * e_mac)
        } else {
            let train = &trace.trains[i - 1];
            let spikes = train.count_ones();
            let slots = (train.t * train.d * train.b * train.n) as u64;
            spikes_total += spikes;
            spike_slots += slots;
            let consts = if stage.constant.data().iter().any(|&c| c != 0.0) {
                steps
            } else {
                0
            };
            let ac = spikes * out as u64;
            (
                ac,
                consts,
                spikes as f64 / slots as f64,
                ac as f64 * e_ac + consts as f64 * e_mac,
            )
        };
        stages.push(StageOps {
            stage: format!("layer{}", i + 1),
            mac_count,
            ac_count,
            constant_adds,
            firing_rate,
            energy_joules: energy,
        });
    }
    let [classes, input] = folded.readout.weight.shape()[..] else { unreachable!() };
    let train = trace.trains.last().unwrap();
    let spikes = train.count_ones();
    let slots = (train.t * train.d * train.b * train.n) as u64;
    spikes_total += spikes;
    spike_slots += slots;
    let consts = if folded.readout.constant.data().iter().any(|&c| c != 0.0) {
        steps
    } else {
        0
    };
    let ac = spikes * classes as u64;
    stages.push(StageOps {
        stage: "readout".into(),
        mac_count: steps * (classes * input) as u64,
        ac_count: ac,
        constant_adds: consts,
        firing_rate: spikes as f64 / slots as f64,
        energy_joules: ac as f64 * e_ac + consts as f64 * e_mac,
    });
    EnergyReport {
        e_ac,
        e_mac,
        mac_count: stages.iter().map(|s| s.mac_count).sum(),
        ac_count: stages.iter().map(|s| s.ac_count).sum(),
        constant_adds: stages.iter().map(|s| s.constant_adds).sum(),
        firing_rate: if spike_slots == 0 {
            0.0
        } else {
            spikes_total as f64 / spike_slots as f64
        },
        energy_joules: stages.iter().map(|s| s.energy_joules).sum(),
        stages,
    }
}
