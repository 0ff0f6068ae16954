//! Python bindings over the engine: scalar traces, the window
//! quantizer and its straight-through gradients, config-driven
//! training, dual-path verification, and the gradient audit. Reports
//! cross the boundary as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyList, PyNone, PyString};

use spikekit::config::{parse_config, KindName};
use spikekit::data::encode_temporal;
use spikekit::energy::{count_ops, DEFAULT_E_AC, DEFAULT_E_MAC};
use spikekit::folding::{fold_network, spike_inference, verify_equivalence};
use spikekit::gradcheck::run_gradcheck;
use spikekit::network::train;
use spikekit::neurons::{trace_rows, NeuronParams};
use spikekit::quantizer::{
    quantize_backward_alpha, quantize_backward_x, quantize_forward, BoundMode, QuantizerSpec,
};
use spikekit::tensor::DenseArray;

fn val_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// serde_json trees map cleanly onto dicts/lists; going through one
/// spares every report struct a hand-written conversion.
fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => PyNone::get(py).to_owned().into_any(),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                PyFloat::new(py, n.as_f64().unwrap_or(f64::NAN)).into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn build_neuron(
    kind: &str,
    steps: usize,
    beta: f64,
    alpha: f64,
    d: u32,
    n: Option<f64>,
    v_th: f64,
) -> PyResult<NeuronParams> {
    let kind = KindName::parse(kind).ok_or_else(|| val_err(format!("unknown neuron kind {kind:?}")))?;
    let n = n.unwrap_or(d as f64);
    let params = match kind {
        KindName::Lif => NeuronParams::lif(beta, v_th),
        KindName::Plif => {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(val_err(format!(
                    "plif's sigmoid decay needs beta strictly inside (0, 1), got {beta}"
                )));
            }
            NeuronParams::plif((beta / (1.0 - beta)).ln(), v_th)
        }
        KindName::Psn => NeuronParams::psn(steps),
        KindName::Ilif => NeuronParams::ilif(beta, d),
        KindName::Nilif => NeuronParams::nilif(beta, d, n),
        KindName::Asn => NeuronParams::asn(beta, alpha, d),
        KindName::Nasn => NeuronParams::nasn(beta, alpha, d, n),
    };
    params.map_err(val_err)
}

/// Step one neuron over a scalar drive. Returns (t, x, u, s, h) tuples.
#[pyfunction]
#[pyo3(signature = (kind, xs, *, beta=0.5, alpha=0.0, d=4, n=None, v_th=1.0))]
fn trace(
    kind: &str,
    xs: Vec<f64>,
    beta: f64,
    alpha: f64,
    d: u32,
    n: Option<f64>,
    v_th: f64,
) -> PyResult<Vec<(usize, f64, f64, f64, f64)>> {
    let params = build_neuron(kind, xs.len(), beta, alpha, d, n, v_th)?;
    let rows = trace_rows(&params, &xs).map_err(val_err)?;
    Ok(rows.into_iter().map(|r| (r.t, r.x, r.u, r.s, r.h)).collect())
}

fn scalar_spec(alpha: f64, d: u32, n: f64, grad_scale: f64) -> PyResult<QuantizerSpec> {
    QuantizerSpec::scalar(alpha, d, n, grad_scale, BoundMode::Integerized, true).map_err(val_err)
}

/// Round, clip to [alpha, alpha + d] with the offset pushed to its
/// ceiling, divide by n.
#[pyfunction]
#[pyo3(signature = (us, *, alpha=0.0, d=4, n=1.0))]
fn quantize(us: Vec<f64>, alpha: f64, d: u32, n: f64) -> PyResult<Vec<f64>> {
    let spec = scalar_spec(alpha, d, n, 1.0)?;
    let u = DenseArray::from_vec(us).map_err(val_err)?;
    Ok(quantize_forward(&u, &spec).map_err(val_err)?.data().to_vec())
}

/// Straight-through gradients of the quantizer: per-element input
/// gradient and the scalar offset gradient.
#[pyfunction]
#[pyo3(signature = (us, upstream, *, alpha=0.0, d=4, n=1.0, grad_scale=1.0))]
fn quantize_grads(
    us: Vec<f64>,
    upstream: Vec<f64>,
    alpha: f64,
    d: u32,
    n: f64,
    grad_scale: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let spec = scalar_spec(alpha, d, n, grad_scale)?;
    let u = DenseArray::from_vec(us).map_err(val_err)?;
    let g = DenseArray::from_vec(upstream).map_err(val_err)?;
    let dx = quantize_backward_x(&g, &u, &spec).map_err(val_err)?;
    let dalpha = quantize_backward_alpha(&g, &u, &spec).map_err(val_err)?;
    Ok((dx.data().to_vec(), dalpha.data()[0]))
}

/// Train a network described by an experiment config (JSON text).
/// With `with_energy` the trained net is folded, run spike-driven on
/// the training inputs, and its operation counts attached.
#[pyfunction]
#[pyo3(signature = (config_json, *, with_energy=false))]
fn train_experiment<'py>(
    py: Python<'py>,
    config_json: &str,
    with_energy: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config_json, "<python>").map_err(val_err)?;
    let ds = cfg.build_dataset().map_err(val_err)?;
    let mut net = cfg
        .build_network(ds.features(), ds.classes)
        .map_err(val_err)?;
    let outcome = train(&mut net, &ds.inputs, &ds.labels, &cfg.train_config()).map_err(val_err)?;
    let mut result = serde_json::json!({
        "kind": cfg.neuron.kind.as_str(),
        "final_train_accuracy": outcome.final_train_accuracy,
        "final_alphas": net.alphas(),
        "curves": outcome.curves,
    });
    if with_energy {
        if !cfg.neuron.kind.quantized() {
            return Err(val_err(
                "energy counting needs a quantized kind; binary nets have no folded form",
            ));
        }
        let folded = fold_network(&net).map_err(val_err)?;
        let x0 = encode_temporal(&ds.inputs, net.timesteps).map_err(val_err)?;
        let (_, trace) = spike_inference(&folded, &x0).map_err(val_err)?;
        let report = count_ops(&folded, &trace, DEFAULT_E_AC, DEFAULT_E_MAC);
        result["energy"] = serde_json::to_value(&report).map_err(val_err)?;
    }
    to_py(py, &result)
}

/// Fold the configured network and check the spike-driven path against
/// the dense one on a batch of the configured dataset.
#[pyfunction]
#[pyo3(signature = (config_json, *, tolerance=1e-9))]
fn verify_experiment<'py>(
    py: Python<'py>,
    config_json: &str,
    tolerance: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config_json, "<python>").map_err(val_err)?;
    let ds = cfg.build_dataset().map_err(val_err)?;
    let net = cfg
        .build_network(ds.features(), ds.classes)
        .map_err(val_err)?;
    let rows = cfg.train.batch.min(ds.len());
    let f = ds.features();
    let batch = DenseArray::new(vec![rows, f], ds.inputs.data()[..rows * f].to_vec())
        .map_err(val_err)?;
    let x0 = encode_temporal(&batch, cfg.network.timesteps).map_err(val_err)?;
    let report = verify_equivalence(&net, &x0, tolerance).map_err(val_err)?;
    to_py(py, &serde_json::to_value(&report).map_err(val_err)?)
}

/// Finite-difference and indicator audit of the training gradients.
#[pyfunction]
#[pyo3(signature = (trials=200, eps=1e-4, seed=0))]
fn gradient_check<'py>(
    py: Python<'py>,
    trials: usize,
    eps: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let report = run_gradcheck(trials, eps, seed).map_err(val_err)?;
    to_py(py, &serde_json::to_value(&report).map_err(val_err)?)
}

#[pymodule]
fn spikekit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_grads, m)?)?;
    m.add_function(wrap_pyfunction!(train_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    Ok(())
}
