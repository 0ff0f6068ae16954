//! Datasets: the big-endian IDX image/label container, a synthetic
//! shifted-Gaussian classification task, and the constant temporal
//! encoding the trainer feeds to networks.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{DataError, TensorError};
use crate::tensor::DenseArray;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone)]
pub struct Dataset {
    /// [samples x features], pixel data scaled to [0, 1].
    pub inputs: DenseArray,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.shape()[1]
    }
}

struct Cursor<'a> {
    path: &'a str,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, len: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.data.len() - self.pos < len {
            return Err(DataError::Truncated {
                path: self.path.to_string(),
                offset: self.pos as u64,
                what: format!("{what} needs {len} bytes, {} left", self.data.len() - self.pos),
            });
        }
        let slice = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32be(&mut self, what: &str) -> Result<u32, DataError> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load an IDX image file plus its label file into one dataset. Pixels
/// come out as f64 in [0, 1]; classes = max label + 1.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset, DataError> {
    let img_bytes = read_file(images)?;
    let img_path = images.display().to_string();
    let mut cur = Cursor {
        path: &img_path,
        data: &img_bytes,
        pos: 0,
    };
    let magic = cur.u32be("magic")?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            path: img_path,
            found: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let count = cur.u32be("image count")? as usize;
    let rows = cur.u32be("row count")? as usize;
    let cols = cur.u32be("column count")? as usize;
    let pixel_count = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| DataError::Invalid(format!(
            "{img_path}: header claims {count} images of {rows}x{cols} pixels"
        )))?;
    let pixels = cur.bytes(pixel_count, "pixel data")?;

    let lbl_bytes = read_file(labels)?;
    let lbl_path = labels.display().to_string();
    let mut cur = Cursor {
        path: &lbl_path,
        data: &lbl_bytes,
        pos: 0,
    };
    let magic = cur.u32be("magic")?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            path: lbl_path,
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let lbl_count = cur.u32be("label count")? as usize;
    let raw_labels = cur.bytes(lbl_count, "label data")?;
    if count != lbl_count {
        return Err(DataError::CountMismatch {
            path: lbl_path,
            images: count,
            labels: lbl_count,
        });
    }
    if count == 0 {
        return Err(DataError::Invalid(format!("{img_path}: empty dataset")));
    }
    let inputs = DenseArray::new(
        vec![count, rows * cols],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )
    .map_err(|e| DataError::Invalid(e.to_string()))?;
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;
    Ok(Dataset {
        inputs,
        labels,
        classes,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write a dataset as an IDX image/label pair. Pixels are quantized to
/// u8 via round(v * 255) and clamped, so inputs outside [0, 1] lose
/// information; normalize first if round-tripping matters.
pub fn write_idx(ds: &Dataset, rows: usize, cols: usize, images: &Path, labels: &Path) -> Result<(), DataError> {
    if rows * cols != ds.features() {
        return Err(DataError::Invalid(format!(
            "{}x{} pixels cannot hold {} features",
            rows,
            cols,
            ds.features()
        )));
    }
    if ds.classes > 256 {
        return Err(DataError::Invalid(format!(
            "{} classes do not fit the one-byte label format",
            ds.classes
        )));
    }
    let mut img = Vec::with_capacity(16 + ds.len() * rows * cols);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend(
        ds.inputs
            .data()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    write_file(images, &img)?;
    let mut lbl = Vec::with_capacity(8 + ds.len());
    lbl.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lbl.extend(ds.labels.iter().map(|&l| l as u8));
    write_file(labels, &lbl)
}

/// Synthetic classification task: per-class mean vectors drawn uniform
/// in [-1, 1], Gaussian feature noise, and a global additive shift.
/// The shift slides every input away from zero without touching the
/// class structure, which is exactly what a learnable window offset is
/// supposed to absorb.
pub fn gen_shifted_task(
    samples: usize,
    features: usize,
    classes: usize,
    shift: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if classes < 2 || samples < classes || features == 0 {
        return Err(DataError::Invalid(format!(
            "cannot build a {classes}-class task with {samples} samples of {features} features"
        )));
    }
    if !shift.is_finite() || !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(DataError::Invalid(format!(
            "shift {shift} and noise {noise_sd} must be finite, noise nonnegative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..classes * features).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = Normal::new(0.0, noise_sd).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut data = Vec::with_capacity(samples * features);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = i % classes;
        labels.push(class);
        for f in 0..features {
            data.push(means[class * features + f] + shift + noise.sample(&mut rng));
        }
    }
    let inputs = DenseArray::new(vec![samples, features], data)
        .map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok(Dataset {
        inputs,
        labels,
        classes,
    })
}

/// Constant encoding: present the same [n x features] frame at every
/// step, giving a [t x n x features] drive.
pub fn encode_temporal(inputs: &DenseArray, t: usize) -> Result<DenseArray, TensorError> {
    let [n, f] = inputs.shape()[..] else {
        return Err(TensorError::BadRank {
            op: "encode_temporal",
            expected: "an [n x features] input block",
            got: inputs.shape().to_vec(),
        });
    };
    if t == 0 {
        return Err(TensorError::Invalid("need at least one timestep".into()));
    }
    let mut data = Vec::with_capacity(t * n * f);
    for _ in 0..t {
        data.extend_from_slice(inputs.data());
    }
    DenseArray::new(vec![t, n, f], data)
}

/// Min-max rescale into [0, 1] (constant inputs map to 0).
pub fn normalize_unit(inputs: &DenseArray) -> Result<DenseArray, TensorError> {
    let lo = inputs.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = inputs.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return DenseArray::new(inputs.shape().to_vec(), vec![0.0; inputs.len()]);
    }
    Ok(inputs.map(|v| (v - lo) / (hi - lo)))
}

/// One row per sample: label first, then the feature values.
pub fn export_csv(ds: &Dataset) -> String {
    let f = ds.features();
    let mut out = String::from("label");
    for i in 0..f {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (i, &label) in ds.labels.iter().enumerate() {
        out.push_str(&format!("{label}"));
        for v in &ds.inputs.data()[i * f..(i + 1) * f] {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Fraction of values falling outside [lo, hi]. Applied to first-layer
/// pre-activations it measures how much signal a fixed window discards.
pub fn truncation_fraction(values: &DenseArray, lo: f64, hi: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let outside = values.data().iter().filter(|&&v| v < lo || v > hi).count();
    outside as f64 / values.len() as f64
}
