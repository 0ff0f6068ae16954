//! Experiment configuration: a strict JSON schema (unknown fields are
//! errors, contradictory fields are errors) that builds neurons,
//! networks, and datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{gen_shifted_task, load_idx, Dataset};
use crate::error::{ConfigError, Error};
use crate::network::{FirstLayerInit, SpikingMLP, TrainConfig};
use crate::neurons::NeuronParams;
use crate::optim::OptimizerKind;
use crate::quantizer::BoundMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindName {
    Lif,
    Plif,
    Psn,
    Ilif,
    Nilif,
    Asn,
    Nasn,
}

impl KindName {
    pub fn as_str(self) -> &'static str {
        match self {
            KindName::Lif => "lif",
            KindName::Plif => "plif",
            KindName::Psn => "psn",
            KindName::Ilif => "ilif",
            KindName::Nilif => "nilif",
            KindName::Asn => "asn",
            KindName::Nasn => "nasn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lif" => Some(KindName::Lif),
            "plif" => Some(KindName::Plif),
            "psn" => Some(KindName::Psn),
            "ilif" => Some(KindName::Ilif),
            "nilif" => Some(KindName::Nilif),
            "asn" => Some(KindName::Asn),
            "nasn" => Some(KindName::Nasn),
            _ => None,
        }
    }

    pub fn quantized(self) -> bool {
        matches!(self, KindName::Ilif | KindName::Nilif | KindName::Asn | KindName::Nasn)
    }

    pub fn normalized(self) -> bool {
        matches!(self, KindName::Nilif | KindName::Nasn)
    }

    pub fn adaptive(self) -> bool {
        matches!(self, KindName::Asn | KindName::Nasn)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronSection {
    pub kind: KindName,
    /// Membrane decay for stepping kinds; defaults to 0.5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Initial window offset, adaptive kinds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Window depth for quantized kinds; defaults to 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Normalizer for nilif/nasn; defaults to D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    /// Firing threshold for lif/plif; defaults to 1.0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_th: Option<f64>,
    /// Offset-gradient scale; defaults to 1.0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_scale: Option<f64>,
    #[serde(default)]
    pub per_channel_alpha: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_mode: Option<BoundMode>,
    #[serde(default)]
    pub detach_reset: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub widths: Vec<usize>,
    #[serde(default = "default_timesteps")]
    pub timesteps: usize,
    #[serde(default)]
    pub first_layer_init: FirstLayerInit,
    /// Start the classifier head at zero instead of uniform random.
    #[serde(default)]
    pub zero_readout: bool,
}

fn default_timesteps() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
}

fn default_samples() -> usize {
    1000
}

fn default_features() -> usize {
    16
}

fn default_classes() -> usize {
    4
}

fn default_noise() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_lr: Option<f64>,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub freeze_alpha: bool,
    #[serde(default)]
    pub freeze_first_weight: bool,
}

fn default_epochs() -> usize {
    10
}

fn default_batch() -> usize {
    64
}

fn default_lr() -> f64 {
    1e-2
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: default_epochs(),
            batch: default_batch(),
            lr: default_lr(),
            alpha_lr: None,
            optimizer: default_optimizer(),
            freeze_alpha: false,
            freeze_first_weight: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    pub neuron: NeuronSection,
    pub network: NetworkSection,
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
}

fn default_experiment() -> String {
    "experiment".into()
}

fn invalid(msg: String) -> ConfigError {
    ConfigError::Invalid(msg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.neuron;
        let kind = n.kind;
        if !kind.quantized() {
            for (field, set) in [
                ("alpha", n.alpha.is_some()),
                ("d", n.d.is_some()),
                ("n", n.n.is_some()),
                ("grad_scale", n.grad_scale.is_some()),
                ("bound_mode", n.bound_mode.is_some()),
                ("per_channel_alpha", n.per_channel_alpha),
            ] {
                if set {
                    return Err(invalid(format!(
                        "neuron.{field} does not apply to kind {}",
                        kind.as_str()
                    )));
                }
            }
        } else {
            if n.v_th.is_some() {
                return Err(invalid(format!(
                    "neuron.v_th does not apply to kind {}; the window is [alpha, alpha + d]",
                    kind.as_str()
                )));
            }
            if !kind.adaptive() && n.alpha.is_some() {
                return Err(invalid(format!(
                    "neuron.alpha is fixed at 0 for kind {}",
                    kind.as_str()
                )));
            }
            if !kind.normalized() && n.n.is_some() {
                return Err(invalid(format!(
                    "neuron.n does not apply to kind {}; spikes are unscaled",
                    kind.as_str()
                )));
            }
        }
        if kind == KindName::Psn && (n.beta.is_some() || n.v_th.is_some() || n.detach_reset) {
            return Err(invalid(
                "psn has no decay, no shared threshold, and no reset to detach".into(),
            ));
        }
        if self.network.widths.is_empty() || self.network.widths.contains(&0) {
            return Err(invalid(format!("bad widths {:?}", self.network.widths)));
        }
        if self.network.timesteps == 0 {
            return Err(invalid("network.timesteps must be at least 1".into()));
        }
        match self.data.source {
            DataSource::Idx => {
                if self.data.images.is_none() || self.data.labels.is_none() {
                    return Err(invalid("idx data needs both images and labels paths".into()));
                }
            }
            DataSource::Synthetic => {
                if self.data.images.is_some() || self.data.labels.is_some() {
                    return Err(invalid("synthetic data takes no file paths".into()));
                }
                if self.data.classes < 2 || self.data.samples < self.data.classes {
                    return Err(invalid(format!(
                        "synthetic data needs >= 2 classes and at least one sample per class, got {} classes, {} samples",
                        self.data.classes, self.data.samples
                    )));
                }
            }
        }
        if self.train.epochs == 0 || self.train.batch == 0 {
            return Err(invalid(format!(
                "train.epochs {} and train.batch {} must be positive",
                self.train.epochs, self.train.batch
            )));
        }
        if !(self.train.lr.is_finite() && self.train.lr > 0.0) {
            return Err(invalid(format!("train.lr must be positive, got {}", self.train.lr)));
        }
        if let Some(alr) = self.train.alpha_lr {
            if !(alr.is_finite() && alr > 0.0) {
                return Err(invalid(format!("train.alpha_lr must be positive, got {alr}")));
            }
        }
        Ok(())
    }

    pub fn build_neuron(&self) -> Result<NeuronParams, Error> {
        let n = &self.neuron;
        let beta = n.beta.unwrap_or(0.5);
        let v_th = n.v_th.unwrap_or(1.0);
        let d = n.d.unwrap_or(4);
        let norm = n.n.unwrap_or(d as f64);
        let alpha = n.alpha.unwrap_or(0.0);
        let mut params = match n.kind {
            KindName::Lif => NeuronParams::lif(beta, v_th)?,
            KindName::Plif => NeuronParams::plif(0.0, v_th)?,
            KindName::Psn => NeuronParams::psn(self.network.timesteps)?,
            KindName::Ilif => NeuronParams::ilif(beta, d)?,
            KindName::Nilif => NeuronParams::nilif(beta, d, norm)?,
            KindName::Asn => NeuronParams::asn(beta, alpha, d)?,
            KindName::Nasn => NeuronParams::nasn(beta, alpha, d, norm)?,
        };
        params.set_detach_reset(self.neuron.detach_reset);
        if let Some(q) = params.as_quantized_mut() {
            if let Some(a) = n.grad_scale {
                q.quantizer.grad_scale = a;
            }
            if let Some(mode) = n.bound_mode {
                q.quantizer.bound_mode = mode;
            }
        }
        Ok(params)
    }

    /// Load or generate the dataset this config describes.
    pub fn build_dataset(&self) -> Result<Dataset, Error> {
        match self.data.source {
            DataSource::Synthetic => Ok(gen_shifted_task(
                self.data.samples,
                self.data.features,
                self.data.classes,
                self.data.shift,
                self.data.noise_sd,
                self.seed,
            )?),
            DataSource::Idx => Ok(load_idx(
                Path::new(self.data.images.as_ref().unwrap()),
                Path::new(self.data.labels.as_ref().unwrap()),
            )?),
        }
    }

    pub fn build_network(&self, features: usize, classes: usize) -> Result<SpikingMLP, Error> {
        let neuron = self.build_neuron()?;
        let mut net = SpikingMLP::init(
            features,
            &self.network.widths,
            classes,
            &neuron,
            self.network.timesteps,
            self.network.first_layer_init,
            self.seed,
        )?;
        if self.neuron.per_channel_alpha {
            net.per_channel_alpha()?;
        }
        if self.network.zero_readout {
            net.zero_readout();
        }
        Ok(net)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch: self.train.batch,
            lr: self.train.lr,
            alpha_lr: self.train.alpha_lr,
            optimizer: self.train.optimizer,
            seed: self.seed,
            freeze_alpha: self.train.freeze_alpha,
            freeze_first_weight: self.train.freeze_first_weight,
            grad_scale: None,
        }
    }

    /// Canonical serialized form, the thing manifests hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config structs always serialize")
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}
