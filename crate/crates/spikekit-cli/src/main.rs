//! Command-line front end: scalar traces, equivalence verification,
//! gradient audits, training runs, the paradigm benchmark, and energy
//! reports. Every command drops its artifacts plus a manifest under
//! --out, and identical invocations produce identical bytes (wall-clock
//! timing fields aside).
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad usage or config,
//! 3 the engine refused a contract violation (continuous bounds have
//! no exact spike form).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use spikekit::config::{ExperimentConfig, KindName};
use spikekit::data::{encode_temporal, Dataset};
use spikekit::energy::{count_ops, DEFAULT_E_AC, DEFAULT_E_MAC};
use spikekit::error::FoldError;
use spikekit::folding::{fold_network, spike_inference, verify_with_folded, EquivalenceReport};
use spikekit::gradcheck::run_gradcheck;
use spikekit::network::{benchmark, curves_csv, train, BenchConfig};
use spikekit::neurons::{trace_rows, NeuronParams};
use spikekit::spkf::{read_checkpoint, write_checkpoint, Checkpoint};
use spikekit::tensor::DenseArray;

#[derive(Parser)]
#[command(name = "spikekit", version, about = "Integer spiking neurons with a learnable window")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the per-step U/S/H trace of one neuron on a scalar drive
    Trace(TraceArgs),
    /// Check that the dense training pass and the spike-driven pass agree
    Verify(VerifyArgs),
    /// Audit gradients against finite differences and the indicator rules
    Gradcheck(GradcheckArgs),
    /// Train a network from an experiment config
    Train(TrainArgs),
    /// Time integer-paradigm training against unrolled binary training
    Bench(BenchArgs),
    /// Count synaptic operations of a checkpoint on a dataset
    Energy(EnergyArgs),
}

#[derive(Args)]
struct TraceArgs {
    /// Neuron kind: lif, plif, psn, ilif, nilif, asn, nasn
    #[arg(long)]
    neuron: String,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    vth: Option<f64>,
    /// Comma-separated drive values
    #[arg(long)]
    inline: Option<String>,
    /// File of comma- or newline-separated drive values
    #[arg(long)]
    input_csv: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Verify a stored folded network instead of folding fresh
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Fan out this many seeds (config seed, +1, ...), joined in a summary
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Comma-separated kind overrides to run side by side
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset CSV: label,f0,f1,... with one row per sample
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_E_AC)]
    e_ac: f64,
    #[arg(long, default_value_t = DEFAULT_E_MAC)]
    e_mac: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// A command's way of dying, tied to the exit-code contract.
enum Failure {
    Usage(String),
    Check(String),
    Refusal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Check(_) => 1,
            Failure::Refusal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Check(m) | Failure::Refusal(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Trace(a) => cmd_trace(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Gradcheck(a) => cmd_gradcheck(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Energy(a) => cmd_energy(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::Check(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

/// Every command leaves one of these next to its artifacts. No
/// timestamps: reruns of the same invocation must be byte-identical.
fn write_manifest(
    out: &Path,
    command: &str,
    config_sha256: &str,
    seeds: &[u64],
    mut artifacts: Vec<String>,
) -> Result<(), Failure> {
    artifacts.sort();
    let manifest = serde_json::json!({
        "command": command,
        "config_sha256": config_sha256,
        "seeds": seeds,
        "versions": {
            "spikekit": env!("CARGO_PKG_VERSION"),
            "spkf": spikekit::spkf::VERSION,
        },
        "artifacts": artifacts,
    });
    write_file(
        &out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap().as_bytes(),
    )
}

fn load_config_or_usage(path: &Path) -> Result<(ExperimentConfig, String), Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| usage(format!("{} is not utf-8", path.display())))?;
    let cfg = spikekit::config::parse_config(&text, &path.display().to_string()).map_err(usage)?;
    Ok((cfg, sha256_hex(&bytes)))
}

// ---------------------------------------------------------------------------
// trace

fn parse_drive(text: &str) -> Result<Vec<f64>, Failure> {
    let mut xs = Vec::new();
    for tok in text.split([',', '\n', ' ', '\t', '\r']) {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        xs.push(
            tok.parse::<f64>()
                .map_err(|_| usage(format!("bad drive value {tok:?}")))?,
        );
    }
    if xs.is_empty() {
        return Err(usage("the drive is empty; give at least one value"));
    }
    Ok(xs)
}

fn trace_neuron(a: &TraceArgs, steps: usize) -> Result<NeuronParams, Failure> {
    let kind = KindName::parse(&a.neuron)
        .ok_or_else(|| usage(format!("unknown neuron kind {:?}", a.neuron)))?;
    let beta = a.beta.unwrap_or(0.5);
    let vth = a.vth.unwrap_or(1.0);
    let d = a.d.unwrap_or(4);
    let alpha = a.alpha.unwrap_or(0.0);
    let n = a.n.unwrap_or(d as f64);
    if kind.quantized() && a.vth.is_some() {
        return Err(usage(format!("--vth does not apply to {}", kind.as_str())));
    }
    if !kind.quantized() && (a.alpha.is_some() || a.d.is_some() || a.n.is_some()) {
        return Err(usage(format!(
            "--alpha/--d/--n do not apply to {}",
            kind.as_str()
        )));
    }
    if !kind.adaptive() && a.alpha.is_some() {
        return Err(usage(format!("--alpha is fixed at 0 for {}", kind.as_str())));
    }
    if !kind.normalized() && a.n.is_some() {
        return Err(usage(format!("--n does not apply to {}", kind.as_str())));
    }
    if kind == KindName::Psn && (a.beta.is_some() || a.vth.is_some()) {
        return Err(usage("psn has no decay and no shared threshold"));
    }
    if kind == KindName::Plif && !(beta > 0.0 && beta < 1.0) {
        return Err(usage(format!(
            "plif's sigmoid decay needs --beta strictly inside (0, 1), got {beta}"
        )));
    }
    let params = match kind {
        KindName::Lif => NeuronParams::lif(beta, vth),
        // plif learns the decay through a sigmoid; solve for the raw
        // weight that lands on the requested beta.
        KindName::Plif => NeuronParams::plif((beta / (1.0 - beta)).ln(), vth),
        KindName::Psn => NeuronParams::psn(steps),
        KindName::Ilif => NeuronParams::ilif(beta, d),
        KindName::Nilif => NeuronParams::nilif(beta, d, n),
        KindName::Asn => NeuronParams::asn(beta, alpha, d),
        KindName::Nasn => NeuronParams::nasn(beta, alpha, d, n),
    };
    params.map_err(usage)
}

fn cmd_trace(a: TraceArgs) -> Result<(), Failure> {
    let drive = match (&a.inline, &a.input_csv) {
        (Some(text), None) => parse_drive(text)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            parse_drive(&text)?
        }
        _ => return Err(usage("give exactly one of --inline or --input-csv")),
    };
    let params = trace_neuron(&a, drive.len())?;
    let rows = trace_rows(&params, &drive).map_err(usage)?;

    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "t", "x", "u", "s", "h");
    for r in &rows {
        println!(
            "{:>4} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.t, r.x, r.u, r.s, r.h
        );
    }

    ensure_out(&a.out)?;
    let mut csv = String::from("t,x,u,s,h\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{},{}\n", r.t, r.x, r.u, r.s, r.h));
    }
    write_file(&a.out.join("trace.csv"), csv.as_bytes())?;

    let effective = serde_json::json!({
        "command": "trace",
        "neuron": {
            "kind": a.neuron,
            "beta": a.beta,
            "alpha": a.alpha,
            "d": a.d,
            "n": a.n,
            "v_th": a.vth,
        },
        "drive": drive,
    });
    let effective_text = serde_json::to_string_pretty(&effective).unwrap();
    write_file(&a.out.join("effective_config.json"), effective_text.as_bytes())?;
    write_manifest(
        &a.out,
        "trace",
        &sha256_hex(effective_text.as_bytes()),
        &[],
        vec!["trace.csv".into(), "effective_config.json".into()],
    )
}

// ---------------------------------------------------------------------------
// verify

/// First rows of the dataset as a [T x B x features] drive.
fn probe_input(cfg: &ExperimentConfig, ds: &Dataset, timesteps: usize) -> Result<DenseArray, Failure> {
    let rows = cfg.train.batch.min(ds.len());
    let f = ds.features();
    let batch = DenseArray::new(
        vec![rows, f],
        ds.inputs.data()[..rows * f].to_vec(),
    )
    .map_err(usage)?;
    encode_temporal(&batch, timesteps).map_err(usage)
}

fn fold_failure(e: FoldError) -> Failure {
    match e {
        FoldError::ContinuousBounds { layer } => Failure::Refusal(format!(
            "layer {layer} clips to continuous bounds; only integerized windows have an exact spike form"
        )),
        other => Failure::Check(other.to_string()),
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    if !(a.tolerance.is_finite() && a.tolerance >= 0.0) {
        return Err(usage(format!("bad tolerance {}", a.tolerance)));
    }
    let (cfg, config_sha) = load_config_or_usage(&a.config)?;
    let ds = cfg.build_dataset().map_err(usage)?;

    // With a stored checkpoint the dense reference is its own unfolding;
    // a fresh run folds the configured network instead.
    let (net, folded, timesteps) = match &a.checkpoint {
        Some(path) => {
            let Checkpoint { folded, timesteps } = read_checkpoint(path).map_err(usage)?;
            let expected = folded.layers[0].weight.shape()[1];
            if ds.features() != expected {
                return Err(usage(format!(
                    "checkpoint expects {expected} features, config data has {}",
                    ds.features()
                )));
            }
            let mut net = spikekit::folding::unfold_network(&folded).map_err(fold_failure)?;
            net.timesteps = timesteps as usize;
            (net, folded, timesteps as usize)
        }
        None => {
            let net = cfg
                .build_network(ds.features(), ds.classes)
                .map_err(usage)?;
            let folded = fold_network(&net).map_err(fold_failure)?;
            let t = cfg.network.timesteps;
            (net, folded, t)
        }
    };
    let x0 = probe_input(&cfg, &ds, timesteps)?;
    let report = verify_with_folded(&net, &folded, &x0, a.tolerance).map_err(fold_failure)?;

    for l in &report.layers {
        println!(
            "stage {}: preact dev {:.3e}, integer mismatches {}",
            l.layer, l.preact_dev, l.integer_mismatches
        );
    }
    println!("readout: logits dev {:.3e}", report.logits_dev);

    ensure_out(&a.out)?;
    write_file(
        &a.out.join("verify.json"),
        serde_json::to_string_pretty(&report).unwrap().as_bytes(),
    )?;
    write_manifest(&a.out, "verify", &config_sha, &[cfg.seed], vec!["verify.json".into()])?;

    if report.passed {
        println!("equivalence holds to {:.1e}", report.tolerance);
        Ok(())
    } else {
        let failing = report.failing_layer().unwrap_or(report.layers.len());
        let name = stage_name(&report, failing);
        Err(Failure::Check(format!(
            "paths diverge at {name} (max deviation {:.3e}, tolerance {:.1e})",
            report.max_dev, report.tolerance
        )))
    }
}

fn stage_name(report: &EquivalenceReport, index: usize) -> String {
    if index == report.layers.len() {
        "readout".into()
    } else {
        format!("layer{}", index + 1)
    }
}

// ---------------------------------------------------------------------------
// gradcheck

fn cmd_gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let report = run_gradcheck(a.trials, a.eps, a.seed).map_err(usage)?;
    for c in &report.checks {
        println!(
            "{:<22} deviation {:.3e}  {}",
            c.name,
            c.deviation,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    println!(
        "max fd deviation {:.3e} over {} checks, {} indicator cases",
        report.max_fd_deviation, report.fd_cases, report.indicator_cases
    );

    ensure_out(&a.out)?;
    write_file(
        &a.out.join("gradcheck.json"),
        serde_json::to_string_pretty(&report).unwrap().as_bytes(),
    )?;
    let effective = serde_json::json!({
        "command": "gradcheck",
        "trials": a.trials,
        "eps": a.eps,
        "seed": a.seed,
    });
    let effective_text = serde_json::to_string_pretty(&effective).unwrap();
    write_file(&a.out.join("effective_config.json"), effective_text.as_bytes())?;
    write_manifest(
        &a.out,
        "gradcheck",
        &sha256_hex(effective_text.as_bytes()),
        &[a.seed],
        vec!["gradcheck.json".into(), "effective_config.json".into()],
    )?;

    if report.passed {
        Ok(())
    } else {
        let bad: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        Err(Failure::Check(format!(
            "gradient checks failed: {}",
            bad.join(", ")
        )))
    }
}

// ---------------------------------------------------------------------------
// train

/// Re-point a config at another neuron kind, dropping the knobs the new
/// kind does not have. Lets one ablation config drive the whole zoo.
fn with_kind(cfg: &ExperimentConfig, kind: KindName) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.neuron.kind = kind;
    if !kind.quantized() {
        c.neuron.alpha = None;
        c.neuron.d = None;
        c.neuron.n = None;
        c.neuron.grad_scale = None;
        c.neuron.bound_mode = None;
        c.neuron.per_channel_alpha = false;
    } else {
        c.neuron.v_th = None;
        if !kind.adaptive() {
            c.neuron.alpha = None;
        }
        if !kind.normalized() {
            c.neuron.n = None;
        }
    }
    if kind == KindName::Psn {
        c.neuron.beta = None;
        c.neuron.v_th = None;
        c.neuron.detach_reset = false;
    }
    c
}

struct RunOutcome {
    kind: KindName,
    seed: u64,
    final_accuracy: f64,
    final_alphas: Vec<f64>,
    artifacts: Vec<String>,
}

fn train_one(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome, Failure> {
    let ds = cfg.build_dataset().map_err(usage)?;
    let mut net = cfg
        .build_network(ds.features(), ds.classes)
        .map_err(usage)?;
    let outcome = train(&mut net, &ds.inputs, &ds.labels, &cfg.train_config())
        .map_err(|e| Failure::Check(format!("training aborted: {e}")))?;

    let kind = cfg.neuron.kind;
    let tag = format!("{}_s{}", kind.as_str(), cfg.seed);
    let curves_name = format!("curves_{tag}.csv");
    let csv = curves_csv(&outcome.curves, net.layers.len());
    write_file(&out.join(&curves_name), csv.as_bytes())?;
    let mut artifacts = vec![curves_name];

    // Binary kinds have no folded form, so no checkpoint for them.
    if kind.quantized() {
        let folded = fold_network(&net).map_err(fold_failure)?;
        let ckpt_name = format!("checkpoint_{tag}.spkf");
        write_checkpoint(&folded, net.timesteps as u32, &out.join(&ckpt_name))
            .map_err(|e| Failure::Check(e.to_string()))?;
        artifacts.push(ckpt_name);
    }

    Ok(RunOutcome {
        kind,
        seed: cfg.seed,
        final_accuracy: outcome.final_train_accuracy,
        final_alphas: net.alphas(),
        artifacts,
    })
}

fn thread_cap(jobs: usize) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = match std::env::var("SPIKEKIT_THREADS") {
        Ok(v) => v.parse::<usize>().unwrap_or(hw).max(1),
        Err(_) => hw,
    };
    cap.min(jobs).max(1)
}

/// Run the (kind, seed) grid on a small worker pool. Results come back
/// in grid order no matter who finished first.
fn run_grid(
    configs: Vec<ExperimentConfig>,
    out: &Path,
) -> Result<Vec<RunOutcome>, Failure> {
    let jobs = configs.len();
    let threads = thread_cap(jobs);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutcome, Failure>>>> =
        Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let r = train_one(&configs[i], out);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let (cfg, config_sha) = load_config_or_usage(&a.config)?;
    let kinds: Vec<KindName> = match &a.kinds {
        None => vec![cfg.neuron.kind],
        Some(list) => list
            .split(',')
            .map(|s| {
                KindName::parse(s.trim()).ok_or_else(|| usage(format!("unknown kind {s:?}")))
            })
            .collect::<Result<_, _>>()?,
    };
    ensure_out(&a.out)?;

    let mut grid = Vec::new();
    let mut seeds = Vec::new();
    for &kind in &kinds {
        for i in 0..a.seeds {
            let mut c = with_kind(&cfg, kind);
            c.seed = cfg.seed + i;
            c.validate().map_err(usage)?;
            grid.push(c);
        }
    }
    for i in 0..a.seeds {
        seeds.push(cfg.seed + i);
    }

    let results = run_grid(grid, &a.out)?;

    println!(
        "{:<6} {:>5} {:>10} {:>10} {:>12}",
        "kind", "runs", "mean_acc", "se", "mean_alpha1"
    );
    let mut summary_rows = Vec::new();
    let mut artifacts = vec!["summary.json".into()];
    for &kind in &kinds {
        let runs: Vec<&RunOutcome> = results.iter().filter(|r| r.kind == kind).collect();
        let accs: Vec<f64> = runs.iter().map(|r| r.final_accuracy).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let se = if accs.len() > 1 {
            let var = accs.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (accs.len() - 1) as f64;
            (var / accs.len() as f64).sqrt()
        } else {
            0.0
        };
        let alpha1 = runs
            .iter()
            .map(|r| r.final_alphas.first().copied().unwrap_or(0.0))
            .sum::<f64>()
            / runs.len() as f64;
        println!(
            "{:<6} {:>5} {:>10.4} {:>10.4} {:>12.4}",
            kind.as_str(),
            runs.len(),
            mean,
            se,
            alpha1
        );
        for r in &runs {
            artifacts.extend(r.artifacts.iter().cloned());
        }
        summary_rows.push(serde_json::json!({
            "kind": kind.as_str(),
            "mean_accuracy": mean,
            "se_accuracy": se,
            "mean_alpha_l1": alpha1,
            "runs": runs.iter().map(|r| serde_json::json!({
                "seed": r.seed,
                "final_accuracy": r.final_accuracy,
                "final_alphas": r.final_alphas,
            })).collect::<Vec<_>>(),
        }));
    }
    write_file(
        &a.out.join("summary.json"),
        serde_json::to_string_pretty(&serde_json::json!({ "kinds": summary_rows }))
            .unwrap()
            .as_bytes(),
    )?;
    write_manifest(&a.out, "train", &config_sha, &seeds, artifacts)
}

// ---------------------------------------------------------------------------
// bench

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let (cfg, config_sha) = load_config_or_usage(&a.config)?;
    if !cfg.neuron.kind.quantized() {
        return Err(usage(format!(
            "bench compares integer steps with binary unrolling; kind {} has no block size",
            cfg.neuron.kind.as_str()
        )));
    }
    let bench_cfg = BenchConfig {
        features: cfg.data.features,
        widths: cfg.network.widths.clone(),
        classes: cfg.data.classes,
        timesteps: cfg.network.timesteps,
        d: cfg.neuron.d.unwrap_or(4),
        samples: cfg.data.samples,
        batch: cfg.train.batch,
        trials: a.trials,
        seed: cfg.seed,
    };
    let report = benchmark(&bench_cfg).map_err(usage)?;
    println!(
        "integer {} steps: {:.3} s/epoch; binary {} steps: {:.3} s/epoch; speedup {:.2}x",
        report.integer_steps,
        report.integer_seconds,
        report.binary_steps,
        report.binary_seconds,
        report.speedup
    );
    ensure_out(&a.out)?;
    write_file(
        &a.out.join("bench.json"),
        serde_json::to_string_pretty(&report).unwrap().as_bytes(),
    )?;
    write_manifest(&a.out, "bench", &config_sha, &[cfg.seed], vec!["bench.json".into()])
}

// ---------------------------------------------------------------------------
// energy

/// Dataset CSV as written by the export: label first, features after.
fn read_data_csv(path: &Path) -> Result<Dataset, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("label")) {
            continue;
        }
        let mut cells = line.split(',');
        let label: usize = cells
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|_| usage(format!("line {}: bad label", lineno + 1)))?;
        let feats: Vec<f64> = cells
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("line {}: bad feature value {c:?}", lineno + 1)))
            })
            .collect::<Result<_, _>>()?;
        if let Some(first) = rows.first() {
            if feats.len() != first.len() {
                return Err(usage(format!(
                    "line {}: {} features where the first row had {}",
                    lineno + 1,
                    feats.len(),
                    first.len()
                )));
            }
        }
        labels.push(label);
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(usage(format!("{} holds no samples", path.display())));
    }
    let features = rows[0].len();
    if features == 0 {
        return Err(usage("rows need at least one feature"));
    }
    let classes = labels.iter().max().unwrap() + 1;
    let inputs = DenseArray::new(
        vec![rows.len(), features],
        rows.into_iter().flatten().collect(),
    )
    .map_err(usage)?;
    Ok(Dataset { inputs, labels, classes })
}

fn cmd_energy(a: EnergyArgs) -> Result<(), Failure> {
    if !(a.e_ac.is_finite() && a.e_ac > 0.0 && a.e_mac.is_finite() && a.e_mac > 0.0) {
        return Err(usage("per-operation energies must be positive"));
    }
    let Checkpoint { folded, timesteps } = read_checkpoint(&a.checkpoint).map_err(usage)?;
    let ds = read_data_csv(&a.data)?;
    let expected = folded.layers[0].weight.shape()[1];
    if ds.features() != expected {
        return Err(usage(format!(
            "checkpoint expects {expected} features, data has {}",
            ds.features()
        )));
    }
    let x0 = encode_temporal(&ds.inputs, timesteps as usize).map_err(usage)?;
    let (_, trace) = spike_inference(&folded, &x0).map_err(fold_failure)?;
    let report = count_ops(&folded, &trace, a.e_ac, a.e_mac);

    for s in &report.stages {
        println!(
            "{:<8} mac {:>10} ac {:>10} const-adds {:>8} firing {:.4}",
            s.stage, s.mac_count, s.ac_count, s.constant_adds, s.firing_rate
        );
    }
    println!(
        "total: {} macs, {} acs, {:.3e} J (spike path) at e_ac {:.2e} / e_mac {:.2e}",
        report.mac_count, report.ac_count, report.energy_joules, report.e_ac, report.e_mac
    );

    ensure_out(&a.out)?;
    write_file(
        &a.out.join("energy.json"),
        serde_json::to_string_pretty(&report).unwrap().as_bytes(),
    )?;
    let effective = serde_json::json!({
        "command": "energy",
        "checkpoint": a.checkpoint.display().to_string(),
        "data": a.data.display().to_string(),
        "e_ac": a.e_ac,
        "e_mac": a.e_mac,
    });
    let effective_text = serde_json::to_string_pretty(&effective).unwrap();
    write_file(&a.out.join("effective_config.json"), effective_text.as_bytes())?;
    write_manifest(
        &a.out,
        "energy",
        &sha256_hex(effective_text.as_bytes()),
        &[],
        vec!["energy.json".into(), "effective_config.json".into()],
    )
}
