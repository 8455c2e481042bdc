//! The experiment drivers behind each CLI subcommand.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use estune_core::cloud::{
    self, run_encrypted_tuning, replay_transcript, SessionOptions, SessionSetup, TransportKind,
};
use estune_core::hecore::{
    self, enc, keygen, BackendKind, EvalKey, HeParams, SecretKeyMaterial,
};
use estune_core::pid::Theta;
use estune_core::plant::{tf_to_ss, PlantId, StateSpace};
use estune_core::seeker::{
    closed_loop_for, cost, run_tuning, simulate_theta, stream_rng, streams, trapezoid_weights,
    SeekerConfig, TuningTrace,
};

use crate::config::{ExperimentConfig, HePreset, RunBackend};
use crate::report::{
    summarize, table1_reference, PaperTimings, Report, RunReport, Summary, Table1Rows,
    TimingReport,
};

/// Noise-free cost of `theta` under this experiment's horizon.
fn eval_cost(plant: &StateSpace, theta: &Theta, scfg: &SeekerConfig) -> Result<f64> {
    let clean = SeekerConfig {
        noise_std: 0.0,
        ..scfg.clone()
    };
    let y = simulate_theta(plant, theta, &clean, &mut clean.noise_rng())?;
    Ok(cost(&y, clean.r_hat, &trapezoid_weights(clean.n_samples())?)?)
}

fn is_stable(plant: &StateSpace, theta: &Theta) -> bool {
    closed_loop_for(plant, theta)
        .map(|cl| cl.is_hurwitz())
        .unwrap_or(false)
}

fn write_step_csv(
    path: &Path,
    plant: &StateSpace,
    theta: &Theta,
    scfg: &SeekerConfig,
) -> Result<()> {
    let clean = SeekerConfig {
        noise_std: 0.0,
        ..scfg.clone()
    };
    let y = simulate_theta(plant, theta, &clean, &mut clean.noise_rng())?;
    let mut out = String::from("t,y\n");
    for (n, v) in y.iter().enumerate() {
        out.push_str(&format!("{},{}\n", n as f64 * clean.dt, v));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn run_one(
    plant: &StateSpace,
    theta0: Theta,
    scfg: &SeekerConfig,
    backend: RunBackend,
    he: &HeParams,
    transcript_path: Option<PathBuf>,
) -> Result<TuningTrace> {
    Ok(match backend {
        RunBackend::Plaintext => run_tuning(plant, theta0, scfg)?,
        RunBackend::Reference | RunBackend::Rlwe => {
            let kind = if backend == RunBackend::Reference {
                BackendKind::Reference
            } else {
                BackendKind::Rlwe
            };
            run_encrypted_tuning(
                plant,
                theta0,
                scfg,
                kind,
                he,
                &SessionOptions {
                    transport: TransportKind::InProcess,
                    transcript_path,
                },
            )?
            .trace
        }
    })
}

/// `tune`: run the configured tuning for every seed; emit CSV traces, the
/// JSON report, and initial/final step responses.
pub fn cmd_tune(cfg: &ExperimentConfig, write_transcripts: bool) -> Result<Report> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let plant = tf_to_ss(&cfg.plant_tf()?)?;
    let theta0 = cfg.theta0()?;
    let he = cfg.he_preset.params();

    let scfg0 = cfg.seeker_config(cfg.seeds[0]);
    write_step_csv(&cfg.out_dir.join("step_initial.csv"), &plant, &theta0, &scfg0)?;

    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let scfg = cfg.seeker_config(seed);
        let transcript_path =
            write_transcripts.then(|| cfg.out_dir.join(format!("transcript_seed{seed}.jsonl")));
        let started = Instant::now();
        let trace = run_one(&plant, theta0, &scfg, cfg.backend, &he, transcript_path)?;
        let elapsed_s = started.elapsed().as_secs_f64();

        let trace_csv = format!("trace_seed{seed}.csv");
        std::fs::write(cfg.out_dir.join(&trace_csv), trace.to_csv())?;
        write_step_csv(
            &cfg.out_dir.join(format!("step_final_seed{seed}.csv")),
            &plant,
            &trace.final_theta,
            &scfg,
        )?;

        let initial_cost = eval_cost(&plant, &theta0, &scfg)?;
        let final_cost = eval_cost(&plant, &trace.final_theta, &scfg)?;
        let all_iterations_stable = trace
            .records
            .iter()
            .all(|r| is_stable(&plant, &r.theta))
            && is_stable(&plant, &trace.final_theta);
        runs.push(RunReport {
            seed,
            initial_cost,
            final_cost,
            reduction: 1.0 - final_cost / initial_cost,
            final_theta: trace.final_theta,
            iterations: trace.records.len(),
            rejections: trace.rejections,
            final_stable: is_stable(&plant, &trace.final_theta),
            all_iterations_stable,
            trace_csv,
            elapsed_s,
        });
    }

    let report = Report {
        command: "tune".into(),
        config: serde_json::to_value(cfg)?,
        summary: summarize(&runs),
        runs,
    };
    std::fs::write(
        cfg.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchPaperEntry {
    pub plant: String,
    pub noise_pct: f64,
    pub summary: Summary,
    pub mean_final_theta: Theta,
    pub paper: Table1Rows,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchPaperReport {
    pub entries: Vec<BenchPaperEntry>,
}

/// `bench-paper`: all three plants, noise-free and noisy, five seeds each;
/// prints the comparison against the published table (informational).
pub fn cmd_bench_paper(out_dir: &Path, backend: RunBackend) -> Result<BenchPaperReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    for id in [PlantId::G1, PlantId::G2, PlantId::G3] {
        for noise_pct in [0.0, 5.0] {
            let mut cfg = ExperimentConfig::preset(&format!("{id}-paper"))?;
            cfg.noise_pct = noise_pct;
            cfg.backend = backend;
            cfg.out_dir = out_dir.join(format!("{id}-sigma{noise_pct}"));
            let report = cmd_tune(&cfg, false)?;

            let mut mean = [0.0; 4];
            for r in &report.runs {
                for (m, v) in mean.iter_mut().zip(r.final_theta.as_array()) {
                    *m += v / report.runs.len() as f64;
                }
            }
            let entry = BenchPaperEntry {
                plant: id.to_string(),
                noise_pct,
                summary: report.summary.clone(),
                mean_final_theta: Theta {
                    kp: mean[0],
                    ki: mean[1],
                    kd: mean[2],
                    tf: mean[3],
                },
                paper: table1_reference(id),
                runs: report.runs,
            };
            println!(
                "{:>2} sigma={:<3} mean final (Kp Ki Kd Tf) = ({:.2} {:.2} {:.3} {:.1e})  paper = ({:.2} {:.2} {:.3} {:.1e})  median reduction {:.1}%  final loops stable: {}",
                entry.plant,
                noise_pct,
                entry.mean_final_theta.kp,
                entry.mean_final_theta.ki,
                entry.mean_final_theta.kd,
                entry.mean_final_theta.tf,
                if noise_pct == 0.0 { entry.paper.final_noise_free.kp } else { entry.paper.final_noisy.kp },
                if noise_pct == 0.0 { entry.paper.final_noise_free.ki } else { entry.paper.final_noisy.ki },
                if noise_pct == 0.0 { entry.paper.final_noise_free.kd } else { entry.paper.final_noisy.kd },
                if noise_pct == 0.0 { entry.paper.final_noise_free.tf } else { entry.paper.final_noisy.tf },
                100.0 * entry.summary.median_reduction,
                entry.summary.all_final_stable,
            );
            entries.push(entry);
        }
    }
    let report = BenchPaperReport { entries };
    std::fs::write(
        out_dir.join("bench_paper.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub convergent: bool,
    pub final_stable: bool,
    pub rejections: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepEntry {
    pub reduction_pct: f64,
    pub n_samples: usize,
    pub runs: Vec<SweepRun>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NSweepReport {
    pub entries: Vec<SweepEntry>,
}

/// `n-sweep`: rerun the tuning with the horizon shortened by each given
/// percentage; record convergence and stability flags per run.
pub fn cmd_n_sweep(cfg: &ExperimentConfig, reductions: &[f64]) -> Result<NSweepReport> {
    cfg.validate()?;
    for &pct in reductions {
        if !(0.0..100.0).contains(&pct) {
            bail!("N reduction must lie in [0, 100) percent, got {pct}");
        }
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let plant = tf_to_ss(&cfg.plant_tf()?)?;
    let theta0 = cfg.theta0()?;
    let he = cfg.he_preset.params();
    let base_n = cfg.seeker_config(cfg.seeds[0]).n_samples();

    let mut entries = Vec::new();
    for &pct in reductions {
        let n_new = ((base_n as f64) * (1.0 - pct / 100.0)).round() as usize;
        if n_new < 2 {
            bail!("reducing N by {pct}% leaves fewer than 2 samples");
        }
        let mut runs = Vec::new();
        for &seed in &cfg.seeds {
            let mut scfg = cfg.seeker_config(seed);
            scfg.ts_estimate = n_new as f64 * scfg.dt;
            let trace = run_one(&plant, theta0, &scfg, cfg.backend, &he, None)?;
            let j0 = eval_cost(&plant, &theta0, &scfg)?;
            let jf = eval_cost(&plant, &trace.final_theta, &scfg)?;
            runs.push(SweepRun {
                seed,
                convergent: jf < j0,
                final_stable: is_stable(&plant, &trace.final_theta),
                rejections: trace.rejections,
            });
        }
        println!(
            "N -{pct}% ({n_new} samples): convergent {}/{}, stable finals {}/{}",
            runs.iter().filter(|r| r.convergent).count(),
            runs.len(),
            runs.iter().filter(|r| r.final_stable).count(),
            runs.len(),
        );
        entries.push(SweepEntry {
            reduction_pct: pct,
            n_samples: n_new,
            runs,
        });
    }
    let report = NSweepReport { entries };
    std::fs::write(
        cfg.out_dir.join("n_sweep.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

fn median_ms(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    crate::report::median_of_sorted(&samples)
}

/// `timing`: measured encrypt/decrypt/per-sample latencies on the RLWE
/// backend, reported next to the published figures.
pub fn cmd_timing(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<TimingReport> {
    if cfg.backend != RunBackend::Rlwe {
        bail!("timing measures the RLWE backend; pass --backend rlwe");
    }
    let he = cfg.he_preset.params();
    let scfg = cfg.seeker_config(cfg.seeds[0]);
    scfg.validate()?;
    let n_samples = scfg.n_samples();

    let mut key_rng = stream_rng(scfg.seed, streams::KEYGEN);
    let keys = keygen(BackendKind::Rlwe, &he, &mut key_rng)?;
    let mut enc_rng = stream_rng(scfg.seed, streams::ENCRYPT);

    let reps = 64;
    let mut enc_times = Vec::with_capacity(reps);
    let mut cts = Vec::with_capacity(reps);
    for i in 0..reps {
        let x = 0.25 + 0.5 * (i as f64 / reps as f64);
        let t = Instant::now();
        let ct = enc(x, &keys, &he, &mut enc_rng)?;
        enc_times.push(t.elapsed().as_secs_f64() * 1e3);
        cts.push(ct);
    }
    let mut dec_times = Vec::with_capacity(reps);
    for ct in &cts {
        let t = Instant::now();
        let _ = hecore::dec(ct, &keys, &he)?;
        dec_times.push(t.elapsed().as_secs_f64() * 1e3);
    }

    let precomp = cloud::precompute(&keys, &he, &scfg, &mut enc_rng)?;
    let setup = SessionSetup {
        backend: BackendKind::Rlwe,
        he: he.clone(),
        n_samples,
        k_max: scfg.k_max,
        cloud_seed: scfg.seed,
    };
    let mut session = cloud::CloudSession::new(keys.eval_key(), setup, precomp)?;
    session.begin_iteration()?;
    let ingest_reps = reps.min(n_samples);
    let mut ingest_times = Vec::with_capacity(ingest_reps);
    for n in 0..ingest_reps {
        let ct = enc(0.5, &keys, &he, &mut enc_rng)?;
        let t = Instant::now();
        session.ingest_sample(cloud::transcript::RunTag::Plus, n, &ct)?;
        ingest_times.push(t.elapsed().as_secs_f64() * 1e3);
    }

    let per_sample_ms = median_ms(ingest_times);
    let report = TimingReport {
        backend: "rlwe".into(),
        ring_dimension: he.ring_dimension,
        levels: he.levels,
        n_samples,
        enc_ms: median_ms(enc_times),
        dec_ms: median_ms(dec_times),
        per_sample_ms,
        projected_iteration_s: 2.0 * n_samples as f64 * per_sample_ms / 1e3,
        paper_reference: PaperTimings::default(),
    };
    println!(
        "enc {:.3} ms | dec {:.3} ms | per-sample {:.3} ms | projected iteration {:.1} s (N = {})",
        report.enc_ms, report.dec_ms, report.per_sample_ms, report.projected_iteration_s, n_samples
    );
    println!(
        "paper context: enc/dec ~{} ms, per-sample ~{} ms, iteration {}..{} s",
        report.paper_reference.enc_dec_ms,
        report.paper_reference.per_sample_ms,
        report.paper_reference.iteration_s_range[0],
        report.paper_reference.iteration_s_range[1]
    );
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
    }
    Ok(report)
}

/// `keygen`: write key material (secret + evaluation keys) with owner-only
/// permissions.
pub fn cmd_keygen(
    preset: HePreset,
    backend: RunBackend,
    out: &Path,
    seed: Option<u64>,
) -> Result<HeParams> {
    let he = preset.params();
    let kind = match backend {
        RunBackend::Reference => BackendKind::Reference,
        RunBackend::Rlwe => BackendKind::Rlwe,
        RunBackend::Plaintext => bail!("keygen needs an encrypted backend (reference|rlwe)"),
    };
    let keys = match seed {
        Some(s) => keygen(kind, &he, &mut stream_rng(s, streams::KEYGEN))?,
        None => keygen(kind, &he, &mut rand::rng())?,
    };
    let bytes = hecore::serial::keys_to_bytes(&keys, &he);
    write_restricted(out, &bytes)?;
    // verify the file loads back
    let (_, params) = hecore::serial::keys_from_bytes(&std::fs::read(out)?)?;
    println!(
        "wrote {} ({} backend, ring dimension {}, {} primes, {:.1} KiB)",
        out.display(),
        backend,
        params.ring_dimension,
        params.modulus_chain.len(),
        bytes.len() as f64 / 1024.0
    );
    Ok(params)
}

#[cfg(unix)]
fn write_restricted(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut f = std::fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)
        .with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(not(unix))]
fn write_restricted(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ReplayOutcome {
    pub frames_checked: usize,
    pub mismatches: usize,
}

/// `replay`: re-execute the cloud role against a recorded transcript and
/// verify its outputs byte-for-byte.
pub fn cmd_replay(transcript: &Path, keys: Option<&Path>) -> Result<ReplayOutcome> {
    let meta = cloud::transcript::read_transcript(transcript)?.meta;
    let eval_key: EvalKey = match meta.backend {
        BackendKind::Reference => EvalKey::reference(),
        BackendKind::Rlwe => {
            let path = keys.ok_or_else(|| {
                anyhow::anyhow!("replaying an RLWE transcript needs --keys (for the evaluation key)")
            })?;
            let (material, _): (SecretKeyMaterial, _) =
                hecore::serial::keys_from_bytes(&std::fs::read(path)?)?;
            material.eval_key()
        }
    };
    let report = replay_transcript(transcript, eval_key)?;
    println!(
        "replayed {} server frames, {} mismatches",
        report.frames_checked, report.mismatches
    );
    if report.mismatches > 0 {
        bail!("replay diverged from the recorded transcript");
    }
    Ok(ReplayOutcome {
        frames_checked: report.frames_checked,
        mismatches: report.mismatches,
    })
}
