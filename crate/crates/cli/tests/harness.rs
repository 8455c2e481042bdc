//! End-to-end checks of the experiment drivers: output files, replay
//! determinism, transcripts, keygen, and the command guards.

use std::path::PathBuf;

use estune_cli::commands::{
    cmd_keygen, cmd_n_sweep, cmd_replay, cmd_timing, cmd_tune,
};
use estune_cli::config::{ExperimentConfig, HePreset, RunBackend};

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("estune-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A small, fast experiment: G3 over half a second, three iterations.
fn small_cfg(out: PathBuf, backend: RunBackend) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("g3-paper").unwrap();
    cfg.ts_estimate = 0.5;
    cfg.k_max = 3;
    cfg.seeds = vec![1, 2];
    cfg.backend = backend;
    cfg.he_preset = HePreset::Test;
    cfg.out_dir = out;
    cfg
}

#[test]
fn tune_emits_traces_report_and_step_responses() {
    let dir = temp_dir("tune");
    let cfg = small_cfg(dir.clone(), RunBackend::Plaintext);
    let report = cmd_tune(&cfg, false).unwrap();

    assert_eq!(report.runs.len(), 2);
    for seed in [1, 2] {
        assert!(dir.join(format!("trace_seed{seed}.csv")).exists());
        assert!(dir.join(format!("step_final_seed{seed}.csv")).exists());
    }
    assert!(dir.join("step_initial.csv").exists());

    // summary statistics recompute from the per-run data
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let runs = parsed["runs"].as_array().unwrap();
    let mut reductions: Vec<f64> = runs
        .iter()
        .map(|r| r["reduction"].as_f64().unwrap())
        .collect();
    reductions.sort_by(f64::total_cmp);
    let median = 0.5 * (reductions[0] + reductions[1]);
    assert!((median - report.summary.median_reduction).abs() < 1e-15);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tune_is_replay_deterministic_on_plaintext_and_reference() {
    for backend in [RunBackend::Plaintext, RunBackend::Reference] {
        let dir_a = temp_dir(&format!("det-a-{backend}"));
        let dir_b = temp_dir(&format!("det-b-{backend}"));
        cmd_tune(&small_cfg(dir_a.clone(), backend), false).unwrap();
        cmd_tune(&small_cfg(dir_b.clone(), backend), false).unwrap();
        for seed in [1, 2] {
            let a = std::fs::read(dir_a.join(format!("trace_seed{seed}.csv"))).unwrap();
            let b = std::fs::read(dir_b.join(format!("trace_seed{seed}.csv"))).unwrap();
            assert_eq!(a, b, "{backend} trace differs across identical runs");
        }
        std::fs::remove_dir_all(&dir_a).ok();
        std::fs::remove_dir_all(&dir_b).ok();
    }
}

#[test]
fn recorded_transcripts_replay_cleanly() {
    let dir = temp_dir("replay");
    let mut cfg = small_cfg(dir.clone(), RunBackend::Reference);
    cfg.seeds = vec![7];
    cmd_tune(&cfg, true).unwrap();
    let transcript = dir.join("transcript_seed7.jsonl");
    assert!(transcript.exists());
    let outcome = cmd_replay(&transcript, None).unwrap();
    assert!(outcome.frames_checked > 0);
    assert_eq!(outcome.mismatches, 0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn n_sweep_flags_and_validation() {
    let dir = temp_dir("sweep");
    let cfg = small_cfg(dir.clone(), RunBackend::Plaintext);
    let report = cmd_n_sweep(&cfg, &[50.0]).unwrap();
    assert_eq!(report.entries.len(), 1);
    assert_eq!(report.entries[0].n_samples, 25);
    assert_eq!(report.entries[0].runs.len(), 2);
    assert!(dir.join("n_sweep.json").exists());

    assert!(cmd_n_sweep(&cfg, &[100.0]).is_err());
    assert!(cmd_n_sweep(&cfg, &[-5.0]).is_err());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn timing_requires_the_rlwe_backend_and_reports_fields() {
    let dir = temp_dir("timing");
    let mut cfg = small_cfg(dir.clone(), RunBackend::Plaintext);
    assert!(cmd_timing(&cfg, None).is_err(), "plaintext must be refused");

    cfg.backend = RunBackend::Rlwe;
    cfg.seeds = vec![3];
    let report = cmd_timing(&cfg, Some(&dir)).unwrap();
    assert_eq!(report.n_samples, 50);
    assert!(report.enc_ms > 0.0 && report.dec_ms > 0.0 && report.per_sample_ms > 0.0);
    let expected = 2.0 * report.n_samples as f64 * report.per_sample_ms / 1e3;
    assert!((report.projected_iteration_s - expected).abs() < 1e-12);
    assert!(dir.join("timing.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn keygen_writes_restricted_and_reloadable_keys() {
    let dir = temp_dir("keygen");
    let path = dir.join("keys.bin");
    let params = cmd_keygen(HePreset::Paper, RunBackend::Rlwe, &path, Some(42)).unwrap();
    assert_eq!(params.ring_dimension, 2048);
    assert_eq!(params.modulus_chain.len(), 5);

    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(&path).unwrap().permissions().mode();
        assert_eq!(mode & 0o777, 0o600, "key file must be owner-only");
    }

    // malformed preset names are rejected at parse time
    assert!("paperx".parse::<HePreset>().is_err());
    // plaintext has no keys to generate
    assert!(cmd_keygen(HePreset::Test, RunBackend::Plaintext, &path, None).is_err());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn binary_runs_a_preset() {
    let dir = temp_dir("bin");
    let cfg_path = dir.join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"plant": "g3", "dt": 0.01, "ts_estimate": 0.5, "k_max": 2, "seeds": [1]}"#,
    )
    .unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_estune"))
        .args([
            "tune",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.join("run").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("run/report.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}
