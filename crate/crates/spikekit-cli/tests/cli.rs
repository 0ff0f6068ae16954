//! Drives the installed binary end to end: exit codes, artifact layout,
//! and byte-for-byte determinism of reruns.

use std::path::Path;
use std::process::Command;

use spikekit::spkf::{read_checkpoint, write_checkpoint};
use spikekit::tensor::DenseArray;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_spikekit"))
        .args(args)
        .env("SPIKEKIT_THREADS", "2")
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, kind_fields: &str) -> String {
    let text = format!(
        r#"{{
  "experiment": "cli-test",
  "seed": 11,
  "neuron": {{ {kind_fields} }},
  "network": {{ "widths": [10, 8], "timesteps": 2 }},
  "data": {{ "source": "synthetic", "samples": 60, "features": 6, "classes": 3, "shift": 1.0, "noise_sd": 0.4 }},
  "train": {{ "epochs": 2, "batch": 20, "lr": 0.01, "alpha_lr": 0.05 }}
}}
"#
    );
    let path = dir.join(name);
    std::fs::write(&path, &text).unwrap();
    path.display().to_string()
}

fn asn_fields() -> &'static str {
    r#""kind": "asn", "beta": 0.5, "alpha": 0.5, "d": 4"#
}

#[test]
fn trace_reproduces_the_hand_walked_window_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, stdout, _) = run(&[
        "trace",
        "--neuron",
        "asn",
        "--beta",
        "0.5",
        "--alpha",
        "0",
        "--d",
        "4",
        "--inline",
        "2.3,0.4,3.8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");

    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let spikes: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(spikes, vec![2.0, 1.0, 4.0]);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn trace_handles_binary_neurons_too() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, _, _) = run(&[
        "trace",
        "--neuron",
        "lif",
        "--beta",
        "0.5",
        "--vth",
        "1.0",
        "--inline",
        "1.2,0.3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let spikes: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(spikes, vec![1.0, 0.0]);
}

#[test]
fn trace_rejects_missing_and_contradictory_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, _, stderr) = run(&["trace", "--neuron", "asn", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {stderr}");

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let (code, _, _) = run(&[
        "trace",
        "--neuron",
        "asn",
        "--input-csv",
        empty.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    let (code, _, stderr) = run(&[
        "trace",
        "--neuron",
        "lif",
        "--alpha",
        "1.0",
        "--inline",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("do not apply"), "stderr: {stderr}");
}

#[test]
fn gradcheck_exit_codes_split_usage_from_failure() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok");
    let (code, stdout, _) = run(&[
        "gradcheck",
        "--trials",
        "40",
        "--seed",
        "3",
        "--out",
        ok.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ok.join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));

    // A huge step makes finite differences land in other quantizer cells.
    let bad = dir.path().join("bad");
    let (code, _, stderr) = run(&[
        "gradcheck",
        "--trials",
        "30",
        "--eps",
        "10",
        "--out",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");

    let (code, _, _) = run(&["gradcheck", "--trials", "0", "--out", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn verify_passes_fresh_and_refuses_continuous_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exp.json", asn_fields());
    let out = dir.path().join("v");
    let (code, stdout, _) = run(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));

    let cont = write_config(
        dir.path(),
        "cont.json",
        r#""kind": "asn", "beta": 0.5, "alpha": 0.5, "d": 4, "bound_mode": "continuous""#,
    );
    let (code, _, stderr) = run(&["verify", "--config", &cont, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("continuous"), "stderr: {stderr}");
}

#[test]
fn verify_detects_a_corrupted_checkpoint_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exp.json", asn_fields());
    let tdir = dir.path().join("t");
    let (code, _, _) = run(&["train", "--config", &cfg, "--out", tdir.to_str().unwrap()]);
    assert_eq!(code, 0);
    let ckpt = tdir.join("checkpoint_asn_s11.spkf");

    // Untouched checkpoint verifies.
    let vdir = dir.path().join("v");
    let (code, _, _) = run(&[
        "verify",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        vdir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    // Bump one element of the second stage's fold constant. The dense
    // reference rebuilt from the weights does not use it, so the spike
    // path must diverge right there.
    let mut ck = read_checkpoint(&ckpt).unwrap();
    let c = &ck.folded.layers[1].constant;
    let mut data = c.data().to_vec();
    data[0] += 0.5;
    ck.folded.layers[1].constant = DenseArray::new(c.shape().to_vec(), data).unwrap();
    let bad = dir.path().join("bad.spkf");
    write_checkpoint(&ck.folded, ck.timesteps, &bad).unwrap();

    let (code, _, stderr) = run(&[
        "verify",
        "--config",
        &cfg,
        "--checkpoint",
        bad.to_str().unwrap(),
        "--out",
        vdir.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.contains("layer2"), "stderr: {stderr}");

    // Garbage bytes are a usage problem, not a failed check.
    let garbage = dir.path().join("garbage.spkf");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let (code, _, _) = run(&[
        "verify",
        "--config",
        &cfg,
        "--checkpoint",
        garbage.to_str().unwrap(),
        "--out",
        vdir.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn train_fans_out_seeds_and_manifests_hash_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exp.json", asn_fields());
    let out = dir.path().join("t");
    let (code, stdout, _) = run(&[
        "train",
        "--config",
        &cfg,
        "--seeds",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(stdout.contains("asn"));

    for name in [
        "curves_asn_s11.csv",
        "curves_asn_s12.csv",
        "checkpoint_asn_s11.spkf",
        "checkpoint_asn_s12.spkf",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let expected = {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(std::fs::read(&cfg).unwrap());
        format!("{:x}", h.finalize())
    };
    assert_eq!(manifest["config_sha256"], serde_json::Value::String(expected));
    assert_eq!(manifest["seeds"], serde_json::json!([11, 12]));

    let curves = std::fs::read_to_string(out.join("curves_asn_s11.csv")).unwrap();
    assert!(curves.starts_with("epoch,loss,train_acc,alpha_l1"));
}

#[test]
fn train_kind_grid_drops_fields_the_kind_lacks() {
    let dir = tempfile::tempdir().unwrap();
    // alpha and alpha_lr only make sense for the adaptive kinds; the
    // grid must still run lif and ilif off the same file.
    let cfg = write_config(dir.path(), "exp.json", asn_fields());
    let out = dir.path().join("t");
    let (code, stdout, _) = run(&[
        "train",
        "--config",
        &cfg,
        "--kinds",
        "asn,ilif,lif",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(out.join("checkpoint_asn_s11.spkf").exists());
    assert!(out.join("checkpoint_ilif_s11.spkf").exists());
    // No folded form for a binary neuron, so no checkpoint either.
    assert!(!out.join("checkpoint_lif_s11.spkf").exists());
    assert!(out.join("curves_lif_s11.csv").exists());

    let (code, _, stderr) = run(&[
        "train",
        "--config",
        &cfg,
        "--kinds",
        "asn,wibble",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("wibble"), "stderr: {stderr}");
}

#[test]
fn reruns_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exp.json", asn_fields());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _, _) = run(&[
            "train",
            "--config",
            &cfg,
            "--seeds",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    for name in [
        "curves_asn_s11.csv",
        "curves_asn_s12.csv",
        "checkpoint_asn_s11.spkf",
        "summary.json",
        "manifest.json",
    ] {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between reruns");
    }
}

#[test]
fn energy_reports_zero_accumulates_for_silent_trains() {
    let dir = tempfile::tempdir().unwrap();
    // ilif windows start at zero, so zero drive stays silent end to end.
    let cfg = write_config(
        dir.path(),
        "exp.json",
        r#""kind": "ilif", "beta": 0.5, "d": 4"#,
    );
    let tdir = dir.path().join("t");
    let (code, _, _) = run(&["train", "--config", &cfg, "--out", tdir.to_str().unwrap()]);
    assert_eq!(code, 0);

    let zeros = dir.path().join("zeros.csv");
    std::fs::write(&zeros, "label,f0,f1,f2,f3,f4,f5\n0,0,0,0,0,0,0\n1,0,0,0,0,0,0\n").unwrap();
    let edir = dir.path().join("e");
    let (code, stdout, _) = run(&[
        "energy",
        "--checkpoint",
        tdir.join("checkpoint_ilif_s11.spkf").to_str().unwrap(),
        "--data",
        zeros.to_str().unwrap(),
        "--out",
        edir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(edir.join("energy.json")).unwrap()).unwrap();
    assert_eq!(report["ac_count"], serde_json::json!(0));
    assert_eq!(report["firing_rate"], serde_json::json!(0.0));
    assert!(report["mac_count"].as_u64().unwrap() > 0);

    let (code, _, _) = run(&[
        "energy",
        "--checkpoint",
        tdir.join("checkpoint_ilif_s11.spkf").to_str().unwrap(),
        "--data",
        zeros.to_str().unwrap(),
        "--e-ac",
        "-1",
        "--out",
        edir.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn bench_runs_from_the_config_sections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exp.json", asn_fields());
    let out = dir.path().join("b");
    let (code, stdout, _) = run(&[
        "bench",
        "--config",
        &cfg,
        "--trials",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    assert_eq!(report["integer_steps"], serde_json::json!(2));
    assert_eq!(report["binary_steps"], serde_json::json!(8));

    let lif = write_config(
        dir.path(),
        "lif.json",
        r#""kind": "lif", "beta": 0.5, "v_th": 1.0"#,
    );
    let (code, _, _) = run(&["bench", "--config", &lif, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}
