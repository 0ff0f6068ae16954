//! The SPKF checkpoint container for folded networks.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "SPKF" | u32 version = 1 | u32 timesteps | u32 record_count
//! record (stage):   u32 out | u32 in | f64 weight[out*in] row-major
//!                 | f64 constant[out] | u8 kind (3=ilif 4=nilif 5=asn 6=nasn)
//!                 | f64 beta | u32 d | f64 n | f64 grad_scale
//!                 | u8 detach_reset | u32 alpha_len | f64 alpha[alpha_len]
//! record (readout): u32 out | u32 in | f64 weight[out*in] row-major
//!                 | f64 constant[out] | u8 kind = 255 | f64 bias[out]
//! ```
//!
//! The readout record comes last, exactly once. Its bias is stored on
//! its own rather than folded into the constant: the constant is
//! derived data, and keeping them apart is what lets an equivalence
//! check notice when one of them has been corrupted. Kind bytes 0-2
//! are reserved for the binary neuron family, which has no folded form.

use std::path::Path;

use crate::error::FoldError;
use crate::folding::{FoldedLayer, FoldedNetwork, ReadoutHead};
use crate::neurons::{QuantizedKind, QuantizedNeuron};
use crate::quantizer::{BoundMode, QuantizerSpec};
use crate::tensor::DenseArray;

pub const MAGIC: [u8; 4] = *b"SPKF";
pub const VERSION: u32 = 1;

const KIND_READOUT: u8 = 255;

fn kind_byte(kind: QuantizedKind) -> u8 {
    match kind {
        QuantizedKind::Ilif => 3,
        QuantizedKind::Nilif => 4,
        QuantizedKind::Asn => 5,
        QuantizedKind::Nasn => 6,
    }
}

fn kind_from_byte(b: u8) -> Option<QuantizedKind> {
    match b {
        3 => Some(QuantizedKind::Ilif),
        4 => Some(QuantizedKind::Nilif),
        5 => Some(QuantizedKind::Asn),
        6 => Some(QuantizedKind::Nasn),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub folded: FoldedNetwork,
    pub timesteps: u32,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_checkpoint(folded: &FoldedNetwork, timesteps: u32, path: &Path) -> Result<(), FoldError> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, timesteps);
    put_u32(&mut out, folded.layers.len() as u32 + 1);
    for stage in &folded.layers {
        let [o, i] = stage.weight.shape()[..] else { unreachable!() };
        put_u32(&mut out, o as u32);
        put_u32(&mut out, i as u32);
        put_f64s(&mut out, stage.weight.data());
        put_f64s(&mut out, stage.constant.data());
        let q = &stage.neuron;
        out.push(kind_byte(q.kind));
        put_f64s(&mut out, &[q.beta]);
        put_u32(&mut out, q.quantizer.d);
        put_f64s(&mut out, &[q.quantizer.n, q.quantizer.grad_scale]);
        out.push(q.detach_reset as u8);
        put_u32(&mut out, q.quantizer.alpha.len() as u32);
        put_f64s(&mut out, q.quantizer.alpha.data());
    }
    let [o, i] = folded.readout.weight.shape()[..] else { unreachable!() };
    put_u32(&mut out, o as u32);
    put_u32(&mut out, i as u32);
    put_f64s(&mut out, folded.readout.weight.data());
    put_f64s(&mut out, folded.readout.constant.data());
    out.push(KIND_READOUT);
    put_f64s(&mut out, folded.readout.bias.data());
    std::fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8], FoldError> {
        if self.data.len() - self.pos < len {
            return Err(FoldError::Container(format!(
                "truncated at byte offset {}: {what} needs {len} bytes, {} left",
                self.pos,
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32le(&mut self, what: &str) -> Result<u32, FoldError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self, what: &str) -> Result<u8, FoldError> {
        Ok(self.take(1, what)?[0])
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>, FoldError> {
        let b = self.take(count * 8, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, FoldError> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader { data: &bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(FoldError::Container(format!(
            "bad magic {magic:?} at byte offset 0, expected {MAGIC:?}"
        )));
    }
    let version = r.u32le("version")?;
    if version != VERSION {
        return Err(FoldError::Container(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let timesteps = r.u32le("timesteps")?;
    let records = r.u32le("record count")? as usize;
    if records < 2 {
        return Err(FoldError::Container(format!(
            "need at least one stage and a readout, found {records} records"
        )));
    }
    let mut layers: Vec<FoldedLayer> = Vec::with_capacity(records - 1);
    let mut readout: Option<ReadoutHead> = None;
    for rec in 0..records {
        if readout.is_some() {
            return Err(FoldError::Container(format!(
                "record {rec} follows the readout record"
            )));
        }
        let out = r.u32le("record out dim")? as usize;
        let input = r.u32le("record in dim")? as usize;
        if out == 0 || input == 0 {
            return Err(FoldError::Container(format!("record {rec} has a zero dimension")));
        }
        if let Some(prev_out) = layers.last().map(|l| l.weight.shape()[0]) {
            if input != prev_out {
                return Err(FoldError::Container(format!(
                    "record {rec} consumes {input} features but the previous stage emits {prev_out}"
                )));
            }
        }
        let weight = DenseArray::new(vec![out, input], r.f64s(out * input, "weight")?)?;
        let constant = DenseArray::new(vec![out], r.f64s(out, "constant")?)?;
        let kind = r.u8("kind byte")?;
        if kind == KIND_READOUT {
            if rec + 1 != records {
                return Err(FoldError::Container(format!(
                    "readout record must come last, found it at record {rec} of {records}"
                )));
            }
            let bias = DenseArray::new(vec![out], r.f64s(out, "readout bias")?)?;
            readout = Some(ReadoutHead { weight, constant, bias });
            continue;
        }
        let Some(kind) = kind_from_byte(kind) else {
            return Err(FoldError::Container(format!(
                "record {rec}: unsupported kind byte {kind}"
            )));
        };
        let beta = r.f64s(1, "beta")?[0];
        let d = r.u32le("window depth")?;
        let n = r.f64s(1, "normalizer")?[0];
        let grad_scale = r.f64s(1, "grad scale")?[0];
        let detach = r.u8("detach flag")? != 0;
        let alpha_len = r.u32le("alpha length")? as usize;
        if alpha_len != 1 && alpha_len != out {
            return Err(FoldError::Container(format!(
                "record {rec}: {alpha_len} offsets for {out} units"
            )));
        }
        let alpha = if alpha_len == 1 {
            DenseArray::scalar(r.f64s(1, "alpha")?[0])?
        } else {
            DenseArray::new(vec![alpha_len], r.f64s(alpha_len, "alpha")?)?
        };
        let quantizer = QuantizerSpec::new(
            alpha,
            d,
            n,
            grad_scale,
            BoundMode::Integerized,
            kind.adaptive(),
        )
        .map_err(|e| FoldError::Container(format!("record {rec}: {e}")))?;
        if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
            return Err(FoldError::Container(format!(
                "record {rec}: decay {beta} outside (0, 1]"
            )));
        }
        layers.push(FoldedLayer {
            weight,
            constant,
            neuron: QuantizedNeuron {
                kind,
                beta,
                quantizer,
                detach_reset: detach,
            },
        });
    }
    let Some(readout) = readout else {
        return Err(FoldError::Container("no readout record".into()));
    };
    if readout.weight.shape()[1] != layers.last().map(|l| l.weight.shape()[0]).unwrap_or(0) {
        return Err(FoldError::Container(
            "readout consumes a different width than the last stage emits".into(),
        ));
    }
    if r.pos != bytes.len() {
        return Err(FoldError::Container(format!(
            "{} trailing bytes after the last record",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        folded: FoldedNetwork { layers, readout },
        timesteps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folding::fold_network;
    use crate::network::{FirstLayerInit, SpikingMLP};
    use crate::neurons::NeuronParams;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("spikekit-spkf-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_folded() -> FoldedNetwork {
        let neuron = NeuronParams::nasn(0.5, -0.4, 4, 4.0).unwrap();
        let net = SpikingMLP::init(6, &[10, 7], 3, &neuron, 2, FirstLayerInit::Uniform, 21).unwrap();
        fold_network(&net).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let folded = sample_folded();
        let path = tmp("roundtrip.spkf");
        write_checkpoint(&folded, 2, &path).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.timesteps, 2);
        assert_eq!(back.folded.layers.len(), folded.layers.len());
        for (a, b) in folded.layers.iter().zip(&back.folded.layers) {
            assert_eq!(a.weight.data(), b.weight.data());
            assert_eq!(a.constant.data(), b.constant.data());
            assert_eq!(a.neuron.kind, b.neuron.kind);
            assert_eq!(a.neuron.beta, b.neuron.beta);
            assert_eq!(a.neuron.quantizer.d, b.neuron.quantizer.d);
            assert_eq!(a.neuron.quantizer.n, b.neuron.quantizer.n);
            assert_eq!(a.neuron.quantizer.alpha.data(), b.neuron.quantizer.alpha.data());
            assert_eq!(a.neuron.quantizer.trainable_alpha, b.neuron.quantizer.trainable_alpha);
        }
        assert_eq!(folded.readout.weight.data(), back.folded.readout.weight.data());
        assert_eq!(folded.readout.constant.data(), back.folded.readout.constant.data());
        assert_eq!(folded.readout.bias.data(), back.folded.readout.bias.data());
    }

    #[test]
    fn header_bytes_are_as_documented() {
        let folded = sample_folded();
        let path = tmp("header.spkf");
        write_checkpoint(&folded, 7, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"SPKF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    }

    #[test]
    fn bad_magic_and_truncation_are_reported() {
        let folded = sample_folded();
        let path = tmp("corrupt.spkf");
        write_checkpoint(&folded, 2, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");

        write_checkpoint(&folded, 2, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated at byte offset"), "{err}");
    }

    #[test]
    fn unsupported_kind_byte_is_rejected() {
        let folded = sample_folded();
        let path = tmp("kindbyte.spkf");
        write_checkpoint(&folded, 2, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // First record: header 16 + dims 8 + weight 10*6*8 + constant 10*8.
        let kind_at = 16 + 8 + 480 + 80;
        assert_eq!(bytes[kind_at], 6);
        bytes[kind_at] = 7;
        std::fs::write(&path, &bytes).unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported kind byte 7"), "{err}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let folded = sample_folded();
        let path = tmp("trailing.spkf");
        write_checkpoint(&folded, 2, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }

    #[test]
    fn tampered_constant_still_parses() {
        // Corruption of derived data must not be a parse error; the
        // equivalence check is what catches it.
        let folded = sample_folded();
        let path = tmp("tamper.spkf");
        write_checkpoint(&folded, 2, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let const_at = 16 + 8 + 480;
        let orig = f64::from_le_bytes(bytes[const_at..const_at + 8].try_into().unwrap());
        bytes[const_at..const_at + 8].copy_from_slice(&(orig + 0.5).to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.folded.layers[0].constant.data()[0], orig + 0.5);
    }
}
