//! The clipped-round quantizer and its straight-through gradients.
//!
//! Forward: `y = clip(round(u), lo, lo + D) / N` where `lo` is either
//! `ceil(alpha)` (integerized bounds, the deployable mode) or `alpha`
//! itself (continuous bounds, training-only). Rounding is half-to-even.
//!
//! Backward uses two complementary straight-through rules, and both are
//! evaluated against the *continuous* window `[alpha, alpha + D]`
//! regardless of the forward bound mode:
//!
//! * input:  `dL/du = upstream / N` where `alpha <= u <= alpha + D`
//!   (boundary inclusive), zero elsewhere;
//! * offset: `dL/dalpha = a * sum(upstream where u < alpha or
//!   u > alpha + D) / N`, one scalar per quantizer (or one per channel
//!   when the per-channel flag is set).
//!
//! Every element therefore feeds exactly one of the two rules. The
//! arithmetic is kept in this exact shape (select, sum in index order,
//! then `* a / N`) because the test suite holds it bitwise-equal to an
//! independently written scalar loop.

use crate::error::TensorError;
use crate::tensor::DenseArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    /// Clip against `[ceil(alpha), ceil(alpha) + D]`. Integer outputs
    /// (before the 1/N scale), so the network can be unfolded into
    /// binary spikes exactly.
    Integerized,
    /// Clip against `[alpha, alpha + D]` as the equations are written.
    /// No exact spike unfolding exists in this mode.
    Continuous,
}

/// One quantizer instance. `alpha` is rank 0 (the default, one offset
/// per layer) or rank 1 (per-channel offsets over the trailing axis).
#[derive(Debug, Clone)]
pub struct QuantizerSpec {
    pub alpha: DenseArray,
    pub d: u32,
    pub n: f64,
    pub grad_scale: f64,
    pub bound_mode: BoundMode,
    /// Whether alpha receives gradient. Fixed-window kinds freeze this
    /// at construction.
    pub trainable_alpha: bool,
}

impl QuantizerSpec {
    pub fn new(
        alpha: DenseArray,
        d: u32,
        n: f64,
        grad_scale: f64,
        bound_mode: BoundMode,
        trainable_alpha: bool,
    ) -> Result<Self, TensorError> {
        if d == 0 {
            return Err(TensorError::Invalid("quantizer needs D >= 1".into()));
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(TensorError::Invalid(format!("normalizer N must be positive, got {n}")));
        }
        if !(grad_scale.is_finite() && grad_scale > 0.0) {
            return Err(TensorError::Invalid(format!(
                "grad-scale a must be positive, got {grad_scale}"
            )));
        }
        if alpha.shape().len() > 1 {
            return Err(TensorError::BadRank {
                op: "quantizer",
                expected: "a rank-0 alpha or a rank-1 per-channel alpha",
                got: alpha.shape().to_vec(),
            });
        }
        Ok(QuantizerSpec {
            alpha,
            d,
            n,
            grad_scale,
            bound_mode,
            trainable_alpha,
        })
    }

    /// Layer-wise scalar offset, the default configuration.
    pub fn scalar(alpha: f64, d: u32, n: f64, grad_scale: f64, bound_mode: BoundMode, trainable_alpha: bool) -> Result<Self, TensorError> {
        Self::new(DenseArray::scalar(alpha)?, d, n, grad_scale, bound_mode, trainable_alpha)
    }

    pub fn per_channel(&self) -> bool {
        self.alpha.shape().len() == 1
    }

    pub fn channels(&self) -> usize {
        self.alpha.len()
    }

    /// The offset as a plain scalar. Panics on per-channel specs; callers
    /// on the spike path check `per_channel()` first.
    pub fn alpha_scalar(&self) -> f64 {
        debug_assert!(!self.per_channel());
        self.alpha.item()
    }

    pub fn set_alpha_scalar(&mut self, alpha: f64) {
        debug_assert!(!self.per_channel());
        self.alpha.data_mut()[0] = alpha;
    }

    /// Lower clipping bound actually used by the forward pass.
    pub fn forward_lo(&self, channel: usize) -> f64 {
        let a = self.alpha.data()[channel.min(self.alpha.len() - 1)];
        match self.bound_mode {
            BoundMode::Integerized => a.ceil(),
            BoundMode::Continuous => a,
        }
    }

    fn channel_of(&self, flat: usize) -> usize {
        if self.per_channel() {
            flat % self.channels()
        } else {
            0
        }
    }

    fn check_channels(&self, u: &DenseArray, op: &'static str) -> Result<(), TensorError> {
        if self.per_channel() && u.shape().last() != Some(&self.channels()) {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: u.shape().to_vec(),
                rhs: self.alpha.shape().to_vec(),
            });
        }
        Ok(())
    }
}

/// `y = clip(round(u), lo, lo + D) / N`, elementwise.
pub fn quantize_forward(u: &DenseArray, spec: &QuantizerSpec) -> Result<DenseArray, TensorError> {
    spec.check_channels(u, "quantize_forward")?;
    let d = spec.d as f64;
    let mut out = Vec::with_capacity(u.len());
    for (i, &x) in u.data().iter().enumerate() {
        let lo = spec.forward_lo(spec.channel_of(i));
        out.push(x.round_ties_even().clamp(lo, lo + d) / spec.n);
    }
    DenseArray::new(u.shape().to_vec(), out)
}

/// Straight-through input gradient: pass `upstream / N` where
/// `alpha <= u <= alpha + D`, zero outside.
pub fn quantize_backward_x(
    upstream: &DenseArray,
    u: &DenseArray,
    spec: &QuantizerSpec,
) -> Result<DenseArray, TensorError> {
    spec.check_channels(u, "quantize_backward_x")?;
    if upstream.shape() != u.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "quantize_backward_x",
            lhs: upstream.shape().to_vec(),
            rhs: u.shape().to_vec(),
        });
    }
    let d = spec.d as f64;
    let alpha = spec.alpha.data();
    let mut out = Vec::with_capacity(u.len());
    for (i, (&x, &g)) in u.data().iter().zip(upstream.data()).enumerate() {
        let a = alpha[spec.channel_of(i)];
        out.push(if x >= a && x <= a + d { g / spec.n } else { 0.0 });
    }
    DenseArray::new(u.shape().to_vec(), out)
}

/// Offset gradient: `a * sum(upstream over truncated elements) / N`,
/// reduced to alpha's shape. Truncated means strictly outside
/// `[alpha, alpha + D]`, the exact complement of the input rule.
pub fn quantize_backward_alpha(
    upstream: &DenseArray,
    u: &DenseArray,
    spec: &QuantizerSpec,
) -> Result<DenseArray, TensorError> {
    spec.check_channels(u, "quantize_backward_alpha")?;
    if upstream.shape() != u.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "quantize_backward_alpha",
            lhs: upstream.shape().to_vec(),
            rhs: u.shape().to_vec(),
        });
    }
    let d = spec.d as f64;
    let alpha = spec.alpha.data();
    let mut acc = vec![0.0; alpha.len()];
    for (i, (&x, &g)) in u.data().iter().zip(upstream.data()).enumerate() {
        let c = spec.channel_of(i);
        let a = alpha[c];
        if x < a || x > a + d {
            acc[c] += g;
        }
    }
    for v in acc.iter_mut() {
        *v = spec.grad_scale * *v / spec.n;
    }
    DenseArray::new(spec.alpha.shape().to_vec(), acc)
}
