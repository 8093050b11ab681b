//! Black-box tests of the binary: flag handling, configuration precedence,
//! determinism of outputs, refusal to clobber populated directories, and
//! the documented exit conventions.

use ndarray::Array2;
use neuroprobe::dataio::{write_dmat, MatrixKind, Sidecar};
use neuroprobe::rng::SplitMix64;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_neuroprobe"));
    // Isolate from ambient configuration.
    cmd.env_remove("NEUROPROBE_SEED")
        .env_remove("NEUROPROBE_N_BOOT")
        .env_remove("NEUROPROBE_N_PERM")
        .env_remove("NEUROPROBE_THREADS")
        .env_remove("NEUROPROBE_CONCURRENCY");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary must launch");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary must launch");
    assert!(
        !out.status.success(),
        "expected failure\nstdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    out
}

// --- synthetic matrices for `encode` ----------------------------------------

fn randn(rng: &mut SplitMix64) -> f64 {
    loop {
        let u1 = rng.next_f64();
        let u2 = rng.next_f64();
        if u1 > 0.0 {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Write a 200-stimulus feature matrix and per-subject response matrices
/// whose responses are a noisy linear readout of the features.
fn write_encode_inputs(dir: &Path, subjects: &[&str], stimulus_prefix: &str) {
    let n = 200;
    let d = 10;
    let v = 12;
    let mut rng = SplitMix64::new(7);
    let features = Array2::from_shape_fn((n, d), |_| randn(&mut rng) as f32);
    let stimulus_ids: Vec<String> =
        (0..n).map(|i| format!("{stimulus_prefix}{i:04}")).collect();

    write_dmat(
        &dir.join("features.dmat"),
        &features,
        &Sidecar {
            kind: MatrixKind::Features,
            id: "demo-model".into(),
            stimulus_ids: stimulus_ids.clone(),
            roi_masks: None,
        },
    )
    .unwrap();

    let readout = Array2::from_shape_fn((d, v), |_| randn(&mut rng) * 0.3);
    for subject in subjects {
        let signal = features.mapv(f64::from).dot(&readout);
        let responses =
            Array2::from_shape_fn((n, v), |(i, j)| (signal[[i, j]] + 0.5 * randn(&mut rng)) as f32);
        let masks: BTreeMap<String, Vec<u32>> = BTreeMap::from([
            ("front".to_string(), (0..6).collect()),
            ("back".to_string(), (6..v as u32).collect()),
        ]);
        write_dmat(
            &dir.join(format!("{subject}.dmat")),
            &responses,
            &Sidecar {
                kind: MatrixKind::Responses,
                id: subject.to_string(),
                stimulus_ids: stimulus_ids.clone(),
                roi_masks: Some(masks),
            },
        )
        .unwrap();
    }
}

#[test]
fn encode_scores_a_synthetic_model() {
    let dir = tempfile::tempdir().unwrap();
    write_encode_inputs(dir.path(), &["subj01", "subj02"], "img");

    let out = dir.path().join("scores");
    run_ok(bin()
        .arg("encode")
        .args(["--features"])
        .arg(dir.path().join("features.dmat"))
        .arg("--responses")
        .arg(dir.path().join("subj01.dmat"))
        .arg("--responses")
        .arg(dir.path().join("subj02.dmat"))
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3"]));

    let card: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("score_demo-model.json")).unwrap()).unwrap();
    assert_eq!(card["model_id"], "demo-model");
    // A linear readout with moderate noise must be comfortably learnable.
    assert!(card["overall"].as_f64().unwrap() > 0.3);
    assert!(card["per_roi"]["front"].is_number());
    assert_eq!(card["per_subject_overall"].as_object().unwrap().len(), 2);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn encode_rejects_mismatched_stimulus_lists() {
    let dir = tempfile::tempdir().unwrap();
    write_encode_inputs(dir.path(), &["subj01"], "img");
    // A second subject recorded against a different stimulus list.
    let other = dir.path().join("other");
    std::fs::create_dir(&other).unwrap();
    write_encode_inputs(&other, &["subj02"], "pic");

    let out = dir.path().join("scores");
    let result = run_err(bin()
        .arg("encode")
        .arg("--features")
        .arg(dir.path().join("features.dmat"))
        .arg("--responses")
        .arg(dir.path().join("subj01.dmat"))
        .arg("--responses")
        .arg(other.join("subj02.dmat"))
        .arg("--out")
        .arg(&out));

    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("join mismatch"), "stderr: {stderr}");
    assert!(stderr.contains("subj02"), "stderr: {stderr}");
    // Nothing may be written on a failed join: no partial outputs.
    assert!(!out.exists());
}

#[test]
fn encode_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_encode_inputs(dir.path(), &["subj01", "subj02"], "img");

    let mut cards = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        run_ok(bin()
            .arg("encode")
            .arg("--features")
            .arg(dir.path().join("features.dmat"))
            .arg("--responses")
            .arg(dir.path().join("subj01.dmat"))
            .arg("--responses")
            .arg(dir.path().join("subj02.dmat"))
            .arg("--out")
            .arg(&out)
            .args(["--seed", "11"]));
        cards.push(std::fs::read(out.join("score_demo-model.json")).unwrap());
    }
    assert_eq!(cards[0], cards[1], "same seed must produce identical score files");
}

#[test]
fn gen_prompts_is_deterministic_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let mut sets = Vec::new();
    for name in ["one.jsonl", "two.jsonl"] {
        let path = dir.path().join(name);
        run_ok(bin()
            .arg("gen-prompts")
            .args(["--images", "3", "--seed", "9"])
            .arg("--out")
            .arg(&path));
        assert!(sidecar_manifest_exists(&path));
        sets.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(sets[0], sets[1]);
    assert_eq!(sets[0].iter().filter(|&&b| b == b'\n').count(), 150);
}

fn sidecar_manifest_exists(data_file: &Path) -> bool {
    let mut name = data_file.as_os_str().to_os_string();
    name.push(".manifest.json");
    Path::new(&name).exists()
}

#[test]
fn evaluate_runs_scripted_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = dir.path().join("prompts.jsonl");
    run_ok(bin()
        .arg("gen-prompts")
        .args(["--images", "2", "--seed", "1"])
        .arg("--out")
        .arg(&prompts));

    let out = dir.path().join("eval");
    for _ in 0..2 {
        // The second run resumes over the completed log and must succeed.
        let result = run_ok(bin()
            .arg("evaluate")
            .args(["--model-id", "demo", "--scripted", "capitulate-at:6", "--seed", "2"])
            .arg("--prompts")
            .arg(&prompts)
            .arg("--out")
            .arg(&out));
        let stdout = String::from_utf8_lossy(&result.stdout);
        assert!(stdout.contains("100 trials"), "stdout: {stdout}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["model_id"], "demo");
    assert_eq!(summary["breakpoint"], 6);
}

#[test]
fn analyze_fixtures_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        run_ok(bin()
            .arg("analyze")
            .args(["--fixtures", "--seed", "4", "--n-boot", "2000", "--n-perm", "2000"])
            .arg("--out")
            .arg(&out));
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "same seed must produce identical reports");
}

#[test]
fn configuration_precedence_is_flags_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"seed": 5, "n_boot": 2000, "n_perm": 2000}"#).unwrap();

    let seed_of = |out: &Path| -> u64 {
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        report["meta"]["seed"].as_u64().unwrap()
    };

    // File alone.
    let out_file = dir.path().join("from-file");
    run_ok(bin()
        .arg("analyze")
        .arg("--fixtures")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_file));
    assert_eq!(seed_of(&out_file), 5);

    // Environment beats the file.
    let out_env = dir.path().join("from-env");
    run_ok(bin()
        .arg("analyze")
        .arg("--fixtures")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_env)
        .env("NEUROPROBE_SEED", "6"));
    assert_eq!(seed_of(&out_env), 6);

    // A flag beats both.
    let out_flag = dir.path().join("from-flag");
    run_ok(bin()
        .arg("analyze")
        .arg("--fixtures")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_flag)
        .arg("--seed")
        .arg("7")
        .env("NEUROPROBE_SEED", "6"));
    assert_eq!(seed_of(&out_flag), 7);
}

#[test]
fn malformed_env_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_err(bin()
        .arg("analyze")
        .arg("--fixtures")
        .arg("--out")
        .arg(dir.path().join("x"))
        .env("NEUROPROBE_SEED", "not-a-number"));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("NEUROPROBE_SEED"), "stderr: {stderr}");
}

#[test]
fn populated_output_directories_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("busy");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep.txt"), "precious").unwrap();

    let result = run_err(bin()
        .arg("analyze")
        .args(["--fixtures", "--n-boot", "2000", "--n-perm", "2000"])
        .arg("--out")
        .arg(&out));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("already has contents"), "stderr: {stderr}");
    assert_eq!(std::fs::read(out.join("keep.txt")).unwrap(), b"precious");
}

#[test]
fn report_renders_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let analysis = dir.path().join("analysis");
    run_ok(bin()
        .arg("analyze")
        .args(["--fixtures", "--n-boot", "2000", "--n-perm", "2000"])
        .arg("--out")
        .arg(&analysis));

    for (format, expect) in [
        ("markdown", "report.md"),
        ("json", "report.json"),
        ("csv-bundle", "roi_correlations.csv"),
    ] {
        let out = dir.path().join(format);
        run_ok(bin()
            .arg("report")
            .arg("--input")
            .arg(analysis.join("report.json"))
            .args(["--format", format])
            .arg("--out")
            .arg(&out));
        assert!(out.join(expect).exists(), "{format} should write {expect}");
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn parse_reads_stdin_when_no_text_flag() {
    use std::io::Write;
    let mut child = bin()
        .arg("parse")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"AGREE")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let verdict: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["label"], "agree");
    assert_eq!(verdict["layer"], 1);
}

#[test]
fn every_subcommand_offers_help() {
    for sub in ["encode", "evaluate", "analyze", "report", "parse", "gen-prompts", "reproduce-paper"]
    {
        let out = run_ok(bin().arg(sub).arg("--help"));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("Usage:"), "{sub} --help should print usage");
    }
    run_ok(bin().arg("--help"));
    run_ok(bin().arg("--version"));
}

#[test]
fn low_bootstrap_counts_warn() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reproduce-paper", "--n-boot", "100", "--n-perm", "1000", "--out"])
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("confidence-interval tolerances are not guaranteed"),
        "stderr: {stderr}"
    );
}

#[test]
fn unknown_flags_exit_nonzero() {
    run_err(bin().arg("analyze").arg("--definitely-not-a-flag"));
    run_err(bin().arg("no-such-subcommand"));
}
