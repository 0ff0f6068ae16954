//! spikekit: integer-valued spiking neurons with a learnable clipping
//! window, the straight-through gradients that train them, and the
//! folding machinery that turns a trained network back into a binary
//! spike-driven form with a per-layer constant.
//!
//! Module map:
//! * [`tensor`], [`tape`]: dense f64 arrays and a minimal reverse-mode tape.
//! * [`quantizer`]: the clipped-round activation and its two STE rules.
//! * [`neurons`]: LIF, PLIF, PSN and the integer family (ILIF, NILIF,
//!   ASN, NASN) behind one parameter type.
//! * [`folding`]: integer activations to binary spike trains, weight
//!   folding, and the dual-path equivalence check.
//! * [`spkf`]: the on-disk container for folded networks.
//! * [`network`]: small spiking MLPs, BPTT training, the
//!   integer-vs-binary wall-clock benchmark.
//! * [`optim`]: plain SGD and Adam.
//! * [`gradcheck`]: finite-difference and indicator audits of the
//!   straight-through rules.
//! * [`energy`]: MAC/AC/constant-add counts and the energy estimate.
//! * [`data`]: IDX image files, the synthetic shifted task, constant
//!   -current temporal encoding.
//! * [`config`]: the strict JSON experiment schema shared by the CLI.

pub mod config;
pub mod data;
pub mod energy;
pub mod error;
pub mod folding;
pub mod gradcheck;
pub mod network;
pub mod neurons;
pub mod optim;
pub mod quantizer;
pub mod spkf;
pub mod tape;
pub mod tensor;

pub use error::Error;
pub use tensor::DenseArray;
