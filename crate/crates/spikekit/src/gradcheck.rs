//! Runnable gradient audits.
//!
//! Two families of checks. Finite differences cannot probe a quantized
//! forward pass directly (it is piecewise constant), so the FD checks
//! differentiate a smooth proxy whose true derivative equals the
//! straight-through rule: `clamp(u, alpha, alpha + D) / N` for the
//! window rule, `clamp(u - th + 1/2, 0, 1)` for the rectangular
//! surrogate. Instances are chosen so that the real and proxy
//! trajectories keep every membrane value in the same indicator cell
//! with margin; on such instances the losses are locally linear in the
//! parameters and the comparison is exact up to float noise.
//!
//! The indicator checks need no proxy: they compare the tape's
//! quantizer backward against a scalar loop written straight from the
//! two rules, and demand bit equality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, TensorError};
use crate::quantizer::{quantize_backward_alpha, quantize_backward_x, BoundMode, QuantizerSpec};
use crate::tape::Tape;
use crate::tensor::DenseArray;

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradcheckReport {
    pub eps: f64,
    pub tolerance: f64,
    pub fd_cases: usize,
    pub max_fd_deviation: f64,
    pub indicator_cases: usize,
    pub indicator_exact: bool,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn central_fd(f: &dyn Fn(&[f64]) -> f64, params: &[f64], eps: f64) -> Vec<f64> {
    let mut grads = Vec::with_capacity(params.len());
    let mut p = params.to_vec();
    for i in 0..params.len() {
        p[i] = params[i] + eps;
        let hi = f(&p);
        p[i] = params[i] - eps;
        let lo = f(&p);
        p[i] = params[i];
        grads.push((hi - lo) / (2.0 * eps));
    }
    grads
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Tape gradients of a dense softmax classifier vs finite differences
/// of the same (fully smooth) function.
fn check_dense_softmax(eps: f64) -> Result<CheckResult, TensorError> {
    let w0 = [0.4, -0.3, 0.8, 0.1, -0.6, 0.5];
    let x0 = [0.9, -1.1, 0.3, 0.7];
    let labels = [1usize, 0];
    let eval = |p: &[f64]| -> f64 {
        let mut tape = Tape::new();
        let w = tape.leaf(DenseArray::new(vec![3, 2], p[..6].to_vec()).unwrap(), false);
        let x = tape.leaf(DenseArray::new(vec![1, 2, 2], p[6..].to_vec()).unwrap(), false);
        let z = tape.linear_time(w, x).unwrap();
        let flat = tape.reshape(z, vec![2, 3]).unwrap();
        let loss = tape.cross_entropy(flat, &labels).unwrap();
        tape.value(loss).item()
    };
    let mut params = Vec::new();
    params.extend_from_slice(&w0);
    params.extend_from_slice(&x0);
    let fd = central_fd(&eval, &params, eps);

    let mut tape = Tape::new();
    let w = tape.leaf(DenseArray::new(vec![3, 2], w0.to_vec())?, true);
    let x = tape.leaf(DenseArray::new(vec![1, 2, 2], x0.to_vec())?, true);
    let z = tape.linear_time(w, x)?;
    let flat = tape.reshape(z, vec![2, 3])?;
    let loss = tape.cross_entropy(flat, &labels)?;
    let grads = tape.backward(loss)?;
    let mut analytic = grads.get(w).unwrap().data().to_vec();
    analytic.extend_from_slice(grads.get(x).unwrap().data());
    // Softmax is genuinely curved, so central differences carry an
    // O(eps^2) error term; the piecewise-linear checks below are exact.
    let tol = (1e-7f64).max(10.0 * eps * eps);
    let deviation = max_abs_diff(&analytic, &fd);
    Ok(CheckResult {
        name: "dense-softmax",
        deviation,
        passed: deviation <= tol,
    })
}

/// One quantized layer under a linear loss: window passthrough for the
/// drive and the weight.
fn check_window_passthrough(eps: f64, tol: f64) -> Result<CheckResult, TensorError> {
    let w0 = [0.7, 0.4, -0.2, 0.3, 0.6, 0.9];
    let x0 = [1.3, 2.2, 0.7];
    let v = [0.5, -0.8];
    let (d, n) = (4u32, 1.0);
    let eval = |p: &[f64]| -> f64 {
        let mut loss = 0.0;
        for o in 0..2 {
            let u: f64 = (0..3).map(|i| p[o * 3 + i] * p[6 + i]).sum();
            loss += v[o] * u.clamp(0.0, d as f64) / n;
        }
        loss
    };
    let mut params = Vec::new();
    params.extend_from_slice(&w0);
    params.extend_from_slice(&x0);
    let fd = central_fd(&eval, &params, eps);

    let mut tape = Tape::new();
    let w = tape.leaf(DenseArray::new(vec![2, 3], w0.to_vec())?, true);
    let x = tape.leaf(DenseArray::new(vec![1, 1, 3], x0.to_vec())?, true);
    let alpha = tape.leaf(DenseArray::scalar(0.0)?, false);
    let z = tape.linear_time(w, x)?;
    let y = tape.quantize(z, alpha, d, n, 1.0, BoundMode::Integerized)?;
    let vnode = tape.constant(DenseArray::new(vec![1, 1, 2], v.to_vec())?);
    let weighted = tape.mul(y, vnode)?;
    let loss = tape.sum_all(weighted)?;
    let grads = tape.backward(loss)?;
    let mut analytic = grads.get(w).unwrap().data().to_vec();
    analytic.extend_from_slice(grads.get(x).unwrap().data());
    let deviation = max_abs_diff(&analytic, &fd);
    Ok(CheckResult {
        name: "window-passthrough",
        deviation,
        passed: deviation <= tol,
    })
}

/// Offset gradient of one quantized application, FD on the clamp proxy.
fn check_window_offset(eps: f64, tol: f64) -> Result<CheckResult, TensorError> {
    let u0: [f64; 3] = [-1.3, 2.2, 7.4];
    let v = [0.5, -0.2, 0.3];
    let d = 4u32;
    let eval = |p: &[f64]| -> f64 {
        let a = p[0];
        u0.iter()
            .zip(&v)
            .map(|(&u, &vi)| vi * u.clamp(a, a + d as f64))
            .sum()
    };
    let fd = central_fd(&eval, &[0.0], eps);

    let mut tape = Tape::new();
    let x = tape.constant(DenseArray::new(vec![1, 1, 3], u0.to_vec())?);
    let alpha = tape.leaf(DenseArray::scalar(0.0)?, true);
    let y = tape.quantize(x, alpha, d, 1.0, 1.0, BoundMode::Integerized)?;
    let vnode = tape.constant(DenseArray::new(vec![1, 1, 3], v.to_vec())?);
    let weighted = tape.mul(y, vnode)?;
    let loss = tape.sum_all(weighted)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.get(alpha).unwrap().item();
    let deviation = (analytic - fd[0]).abs();
    Ok(CheckResult {
        name: "window-offset",
        deviation,
        passed: deviation <= tol,
    })
}

/// Two recurrence steps of an integer-firing neuron. Inside the window
/// the reset kills the through-time path on both the real and the proxy
/// trajectory, so the gradients agree exactly.
fn check_recurrence(eps: f64, tol: f64) -> Result<CheckResult, TensorError> {
    let w0 = 1.1;
    let x0 = [1.2, 1.7];
    let v = [0.7, -0.4];
    let (beta, d) = (0.5, 4u32);
    let eval = |p: &[f64]| -> f64 {
        let (w, x1, x2) = (p[0], p[1], p[2]);
        let u1 = w * x1;
        let y1 = u1.clamp(0.0, d as f64);
        let h1 = beta * (u1 - y1);
        let u2 = h1 + w * x2;
        let y2 = u2.clamp(0.0, d as f64);
        v[0] * y1 + v[1] * y2
    };
    let fd = central_fd(&eval, &[w0, x0[0], x0[1]], eps);

    let mut tape = Tape::new();
    let w = tape.leaf(DenseArray::new(vec![1, 1], vec![w0])?, true);
    let x = tape.leaf(DenseArray::new(vec![2, 1, 1], x0.to_vec())?, true);
    let alpha = tape.leaf(DenseArray::scalar(0.0)?, false);
    let z = tape.linear_time(w, x)?;
    let mut h = None;
    let mut spikes = Vec::new();
    for t in 0..2 {
        let zt = tape.slice_lead(z, t)?;
        let u = match h {
            Some(hp) => tape.add(hp, zt)?,
            None => zt,
        };
        let s = tape.quantize(u, alpha, d, 1.0, 1.0, BoundMode::Integerized)?;
        let diff = tape.sub(u, s)?;
        h = Some(tape.scale(diff, beta)?);
        spikes.push(s);
    }
    let stacked = tape.stack_lead(&spikes)?;
    let vnode = tape.constant(DenseArray::new(vec![2, 1, 1], v.to_vec())?);
    let weighted = tape.mul(stacked, vnode)?;
    let loss = tape.sum_all(weighted)?;
    let grads = tape.backward(loss)?;
    let mut analytic = vec![grads.get(w).unwrap().item()];
    analytic.extend_from_slice(grads.get(x).unwrap().data());
    let deviation = max_abs_diff(&analytic, &fd);
    Ok(CheckResult {
        name: "recurrence",
        deviation,
        passed: deviation <= tol,
    })
}

/// Binary firing with the rectangular surrogate: step one saturates
/// (real and proxy agree exactly), step two lands inside the rectangle.
fn check_binary_surrogate(eps: f64, tol: f64) -> Result<CheckResult, TensorError> {
    let w0 = 1.0;
    let x0 = [2.1, 0.6];
    let v = [0.3, 0.9];
    let (beta, th) = (0.5, 1.0);
    let eval = |p: &[f64]| -> f64 {
        let (w, x1, x2) = (p[0], p[1], p[2]);
        let u1 = w * x1;
        let s1 = (u1 - th + 0.5).clamp(0.0, 1.0);
        let h1 = beta * (u1 - s1);
        let u2 = h1 + w * x2;
        let s2 = (u2 - th + 0.5).clamp(0.0, 1.0);
        v[0] * s1 + v[1] * s2
    };
    let fd = central_fd(&eval, &[w0, x0[0], x0[1]], eps);

    let mut tape = Tape::new();
    let w = tape.leaf(DenseArray::new(vec![1, 1], vec![w0])?, true);
    let x = tape.leaf(DenseArray::new(vec![2, 1, 1], x0.to_vec())?, true);
    let thn = tape.constant(DenseArray::scalar(th)?);
    let z = tape.linear_time(w, x)?;
    let mut h = None;
    let mut spikes = Vec::new();
    for t in 0..2 {
        let zt = tape.slice_lead(z, t)?;
        let u = match h {
            Some(hp) => tape.add(hp, zt)?,
            None => zt,
        };
        let s = tape.heaviside_surrogate(u, thn, 0.5)?;
        let diff = tape.sub(u, s)?;
        h = Some(tape.scale(diff, beta)?);
        spikes.push(s);
    }
    let stacked = tape.stack_lead(&spikes)?;
    let vnode = tape.constant(DenseArray::new(vec![2, 1, 1], v.to_vec())?);
    let weighted = tape.mul(stacked, vnode)?;
    let loss = tape.sum_all(weighted)?;
    let grads = tape.backward(loss)?;
    let mut analytic = vec![grads.get(w).unwrap().item()];
    analytic.extend_from_slice(grads.get(x).unwrap().data());
    let deviation = max_abs_diff(&analytic, &fd);
    Ok(CheckResult {
        name: "binary-surrogate",
        deviation,
        passed: deviation <= tol,
    })
}

/// Draw a value off the window boundaries and rounding ties by margin.
fn draw_off_boundary<R: Rng>(rng: &mut R, alpha: f64, d: u32) -> f64 {
    loop {
        let u = rng.gen_range(alpha - 3.0..alpha + d as f64 + 3.0);
        let clear_bounds = (u - alpha).abs() > 1e-3 && (u - alpha - d as f64).abs() > 1e-3;
        if clear_bounds {
            return u;
        }
    }
}

/// Random quantizer instances: tape backward vs a scalar loop written
/// straight from the two rules. Bit equality, not tolerance.
fn check_indicators(trials: usize, seed: u64) -> Result<(CheckResult, usize), TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for _ in 0..trials {
        let d = [1u32, 2, 4, 8][rng.gen_range(0..4)];
        let n = if rng.gen_bool(0.5) { 1.0 } else { d as f64 };
        let a = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        let alpha = (rng.gen_range(-8i32..8) as f64) / 2.0 + 0.25;
        let len = rng.gen_range(1..12);
        let u: Vec<f64> = (0..len).map(|_| draw_off_boundary(&mut rng, alpha, d)).collect();
        let g: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let spec = QuantizerSpec::scalar(alpha, d, n, a, BoundMode::Integerized, true)?;
        let uu = DenseArray::new(vec![len], u.clone())?;
        let gg = DenseArray::new(vec![len], g.clone())?;
        let dx = quantize_backward_x(&gg, &uu, &spec)?;
        let da = quantize_backward_alpha(&gg, &uu, &spec)?;

        // The rules, re-derived elementwise.
        let hi = alpha + d as f64;
        let mut loop_dx = Vec::with_capacity(len);
        let mut loop_da = 0.0;
        for (&ui, &gi) in u.iter().zip(&g) {
            if ui >= alpha && ui <= hi {
                loop_dx.push(gi / n);
            } else {
                loop_dx.push(0.0);
                loop_da += gi;
            }
        }
        loop_da = loop_da * a / n;

        let exact_x = dx.data().iter().zip(&loop_dx).all(|(a, b)| a.to_bits() == b.to_bits());
        let exact_a = da.item().to_bits() == loop_da.to_bits();
        if !(exact_x && exact_a) {
            mismatches += 1;
        }
    }
    Ok((
        CheckResult {
            name: "indicator-rules",
            deviation: mismatches as f64,
            passed: mismatches == 0,
        },
        trials,
    ))
}

/// Run every audit. `eps` is the FD step; honest values sit around
/// 1e-4, and deliberately absurd ones make the FD checks fail, which is
/// the point of exposing it.
pub fn run_gradcheck(trials: usize, eps: f64, seed: u64) -> Result<GradcheckReport, Error> {
    if trials == 0 {
        return Err(TensorError::Invalid("gradcheck needs at least one trial".into()).into());
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(TensorError::Invalid(format!("fd step must be positive, got {eps}")).into());
    }
    let tol = 1e-6;
    let mut checks = vec![
        check_dense_softmax(eps)?,
        check_window_passthrough(eps, tol)?,
        check_window_offset(eps, tol)?,
        check_recurrence(eps, tol)?,
        check_binary_surrogate(eps, tol)?,
    ];
    let fd_cases = checks.len();
    let max_fd_deviation = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
    let (indicator, indicator_cases) = check_indicators(trials, seed)?;
    let indicator_exact = indicator.passed;
    checks.push(indicator);
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradcheckReport {
        eps,
        tolerance: tol,
        fd_cases,
        max_fd_deviation,
        indicator_cases,
        indicator_exact,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_eps_passes_everything() {
        let report = run_gradcheck(50, 1e-4, 7).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.max_fd_deviation < 1e-6);
        assert!(report.indicator_exact);
    }

    #[test]
    fn absurd_eps_fails_the_fd_checks() {
        let report = run_gradcheck(5, 10.0, 7).unwrap();
        assert!(!report.passed);
        // The indicator checks do not involve eps and must still pass.
        assert!(report.indicator_exact);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = run_gradcheck(25, 1e-4, 3).unwrap();
        let b = run_gradcheck(25, 1e-4, 3).unwrap();
        assert_eq!(a.max_fd_deviation.to_bits(), b.max_fd_deviation.to_bits());
        assert_eq!(a.passed, b.passed);
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert!(run_gradcheck(0, 1e-4, 1).is_err());
        assert!(run_gradcheck(5, 0.0, 1).is_err());
        assert!(run_gradcheck(5, f64::NAN, 1).is_err());
    }
}
