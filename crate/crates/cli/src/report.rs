//! Report structures and the benchmark reference values they are compared
//! against (informationally; the stochastic tuner is not asserted to
//! reproduce them).

use serde::{Deserialize, Serialize};

use estune_core::pid::Theta;
use estune_core::plant::PlantId;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// `1 - final/initial`.
    pub reduction: f64,
    pub final_theta: Theta,
    pub iterations: usize,
    pub rejections: usize,
    pub final_stable: bool,
    pub all_iterations_stable: bool,
    pub trace_csv: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub median_reduction: f64,
    pub all_costs_decreased: bool,
    pub all_final_stable: bool,
}

pub fn summarize(runs: &[RunReport]) -> Summary {
    let mut reductions: Vec<f64> = runs.iter().map(|r| r.reduction).collect();
    reductions.sort_by(f64::total_cmp);
    Summary {
        runs: runs.len(),
        median_reduction: median_of_sorted(&reductions),
        all_costs_decreased: runs.iter().all(|r| r.final_cost < r.initial_cost),
        all_final_stable: runs.iter().all(|r| r.final_stable),
    }
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub runs: Vec<RunReport>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingReport {
    pub backend: String,
    pub ring_dimension: usize,
    pub levels: usize,
    pub n_samples: usize,
    pub enc_ms: f64,
    pub dec_ms: f64,
    pub per_sample_ms: f64,
    pub projected_iteration_s: f64,
    pub paper_reference: PaperTimings,
}

/// Wall-clock figures reported in the benchmark writeup; hardware-specific
/// context, not acceptance targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaperTimings {
    pub enc_dec_ms: f64,
    pub per_sample_ms: f64,
    pub iteration_s_range: [f64; 2],
}

impl Default for PaperTimings {
    fn default() -> Self {
        Self {
            enc_dec_ms: 2.0,
            per_sample_ms: 11.0,
            iteration_s_range: [5.5, 55.0],
        }
    }
}

/// Benchmark table rows: initial parameters and the reported `k = 50`
/// results for the noise-free and noisy runs.
pub fn table1_reference(id: PlantId) -> Table1Rows {
    let t = |kp, ki, kd, tf| Theta { kp, ki, kd, tf };
    match id {
        PlantId::G1 => Table1Rows {
            initial: t(4.08, 0.45, 9.33, 0.50),
            final_noise_free: t(3.24, 0.22, 9.93, 0.36),
            final_noisy: t(3.64, 0.22, 10.33, 0.10),
        },
        PlantId::G2 => Table1Rows {
            initial: t(1.11, 14.61, 0.02, 1e-3),
            final_noise_free: t(0.96, 22.94, 0.03, 9e-4),
            final_noisy: t(0.81, 22.15, 0.04, 7e-4),
        },
        PlantId::G3 => Table1Rows {
            initial: t(3.53, 0.21, 14.82, 0.50),
            final_noise_free: t(2.72, 0.10, 19.83, 0.40),
            final_noisy: t(3.02, 0.09, 18.25, 0.39),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Rows {
    pub initial: Theta,
    pub final_noise_free: Theta,
    pub final_noisy: Theta,
}
