//! The plaintext extremum seeker: normalized discrete cost, simultaneous-
//! perturbation gradient estimate, and the relative update loop.
//!
//! One iteration draws a random sign mask `h`, evaluates the cost at
//! `theta ∘ (1 ± γh)` with two step-response experiments, and applies
//! `Δθ_i = -α (J_+ - J_-) / (2 γ h_i)` multiplicatively. The cost
//! `J̃ = (1/N) Σ w_n (1 - y(n)/r̂)²` is normalized so the same `(α, γ)`
//! works across loops with very different settling times and references.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pid::{perturb, pid_tf, update, PidError, Theta, THETA_DIM};
use crate::plant::{
    closed_loop, discretize_zoh, step_response_with, tf_to_ss, PlantError, PlantId, StateSpace,
    StepOptions,
};

#[derive(Debug, Error)]
pub enum SeekerError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("perturbation component {0} is zero; gradient undefined")]
    ZeroPerturbation(usize),
    #[error("sample/weight length mismatch: {y} vs {w}")]
    LengthMismatch { y: usize, w: usize },
    #[error(transparent)]
    Pid(#[from] PidError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// RNG stream ids, so the mask sequence, the measurement noise, and the
/// encryption randomness never interleave. The encrypted session draws its
/// masks from the same stream as the plaintext seeker, which is what makes
/// the two trajectories comparable under a shared seed.
pub mod streams {
    pub const MASK: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const KEYGEN: u64 = 2;
    pub const ENCRYPT: u64 = 3;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Everything one tuning run needs besides the plant and `theta(0)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeekerConfig {
    /// Relative step size applied to the gradient estimate.
    pub alpha: f64,
    /// Perturbation amplitude (fraction of each parameter).
    pub gamma: f64,
    pub k_max: usize,
    pub dt: f64,
    /// Settling-time estimate; the integration horizon.
    pub ts_estimate: f64,
    pub r_hat: f64,
    /// Measurement-noise standard deviation as a fraction of `|y_inf|`.
    pub noise_std: f64,
    /// Noise enters the fed-back measurement (not just the recording).
    pub noise_in_feedback: bool,
    pub seed: u64,
}

impl SeekerConfig {
    /// Benchmark presets: `alpha = 1`, `gamma = 0.01`, `k_max = 50`, and the
    /// per-plant `(dt, ts)` pairs (0.01, 50), (1e-4, 0.05), (0.01, 80).
    pub fn paper_preset(id: PlantId) -> Self {
        let (dt, ts) = match id {
            PlantId::G1 => (0.01, 50.0),
            PlantId::G2 => (1e-4, 0.05),
            PlantId::G3 => (0.01, 80.0),
        };
        Self {
            alpha: 1.0,
            gamma: 0.01,
            k_max: 50,
            dt,
            ts_estimate: ts,
            r_hat: 1.0,
            noise_std: 0.0,
            noise_in_feedback: true,
            seed: 1,
        }
    }

    /// `N = round(ts_estimate / dt)`.
    pub fn n_samples(&self) -> usize {
        (self.ts_estimate / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SeekerError> {
        if !(self.alpha > 0.0) {
            return Err(SeekerError::InvalidConfig("alpha must be > 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SeekerError::InvalidConfig(
                "gamma must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.k_max < 1 {
            return Err(SeekerError::InvalidConfig("k_max must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(SeekerError::InvalidConfig("dt must be > 0".into()));
        }
        if self.r_hat == 0.0 {
            return Err(SeekerError::InvalidConfig("r_hat must be nonzero".into()));
        }
        if self.n_samples() < 2 {
            return Err(SeekerError::InvalidConfig(
                "ts_estimate/dt must give at least 2 samples".into(),
            ));
        }
        if self.noise_std < 0.0 {
            return Err(SeekerError::InvalidConfig("noise_std must be >= 0".into()));
        }
        Ok(())
    }

    pub fn mask_rng(&self) -> ChaCha8Rng {
        stream_rng(self.seed, streams::MASK)
    }

    pub fn noise_rng(&self) -> ChaCha8Rng {
        stream_rng(self.seed, streams::NOISE)
    }
}

/// A simultaneous-perturbation sign mask: four entries from {-1, +1},
/// indexed 0..16 by its bit pattern (bit i set means `h_i = +1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    index: u8,
}

impl Mask {
    pub const COUNT: usize = 1 << THETA_DIM;

    pub fn from_index(index: u8) -> Self {
        assert!((index as usize) < Self::COUNT);
        Self { index }
    }

    pub fn index(&self) -> u8 {
        self.index
    }

    pub fn signs(&self) -> [f64; THETA_DIM] {
        let mut s = [0.0; THETA_DIM];
        for (i, v) in s.iter_mut().enumerate() {
            *v = if (self.index >> i) & 1 == 1 { 1.0 } else { -1.0 };
        }
        s
    }

    pub fn all() -> impl Iterator<Item = Mask> {
        (0..Self::COUNT as u8).map(Mask::from_index)
    }
}

/// Uniform draw over the 16 masks.
pub fn sample_mask<R: Rng + ?Sized>(rng: &mut R) -> Mask {
    Mask::from_index(rng.random_range(0..Mask::COUNT as u8))
}

/// Trapezoidal weights: 1/2 at both ends, 1 inside; `sum(w) = N - 1`.
pub fn trapezoid_weights(n: usize) -> Result<Vec<f64>, SeekerError> {
    if n < 2 {
        return Err(SeekerError::InvalidConfig(format!(
            "trapezoid rule needs N >= 2, got {n}"
        )));
    }
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    Ok(w)
}

/// `J̃ = (1/N) Σ w_n (1 - y(n)/r̂)²`.
pub fn cost(y: &[f64], r_hat: f64, w: &[f64]) -> Result<f64, SeekerError> {
    if r_hat == 0.0 {
        return Err(SeekerError::InvalidConfig("r_hat must be nonzero".into()));
    }
    if y.len() != w.len() {
        return Err(SeekerError::LengthMismatch {
            y: y.len(),
            w: w.len(),
        });
    }
    let n = y.len() as f64;
    Ok(y.iter()
        .zip(w)
        .map(|(&yi, &wi)| {
            let e = 1.0 - yi / r_hat;
            wi * e * e
        })
        .sum::<f64>()
        / n)
}

/// `(J_+ - J_-) / (2 d_i)` per component.
pub fn spsa_gradient(
    j_plus: f64,
    j_minus: f64,
    d: &[f64; THETA_DIM],
) -> Result<[f64; THETA_DIM], SeekerError> {
    let mut g = [0.0; THETA_DIM];
    for i in 0..THETA_DIM {
        if d[i] == 0.0 {
            return Err(SeekerError::ZeroPerturbation(i));
        }
        g[i] = (j_plus - j_minus) / (2.0 * d[i]);
    }
    Ok(g)
}

/// Anything that can price a parameter vector. The closed-loop simulator is
/// the production oracle; tests substitute analytic surrogates.
pub trait CostOracle {
    fn evaluate(&mut self, theta: &Theta) -> Result<f64, SeekerError>;
}

impl<F: FnMut(&Theta) -> f64> CostOracle for F {
    fn evaluate(&mut self, theta: &Theta) -> Result<f64, SeekerError> {
        Ok(self(theta))
    }
}

/// Builds the closed loop for `theta` around a plant realization.
pub fn closed_loop_for(plant: &StateSpace, theta: &Theta) -> Result<StateSpace, SeekerError> {
    let controller = tf_to_ss(&pid_tf(theta)?)?;
    Ok(closed_loop(plant, &controller)?)
}

/// One noisy step-response experiment for `theta`; returns the recorded
/// samples `y(0..N)`.
pub fn simulate_theta<R: Rng + ?Sized>(
    plant: &StateSpace,
    theta: &Theta,
    cfg: &SeekerConfig,
    noise_rng: &mut R,
) -> Result<Vec<f64>, SeekerError> {
    let cl = closed_loop_for(plant, theta)?;
    let dl = discretize_zoh(&cl, cfg.dt)?;
    Ok(step_response_with(
        &dl,
        StepOptions {
            r_hat: cfg.r_hat,
            n_samples: cfg.n_samples(),
            noise_std_frac: cfg.noise_std,
            noise_in_feedback: cfg.noise_in_feedback,
        },
        noise_rng,
    )?)
}

/// The production cost oracle: simulate, then integrate the normalized error.
pub struct StepResponseCost<'a> {
    plant: &'a StateSpace,
    cfg: SeekerConfig,
    weights: Vec<f64>,
    noise_rng: ChaCha8Rng,
}

impl<'a> StepResponseCost<'a> {
    pub fn new(plant: &'a StateSpace, cfg: &SeekerConfig) -> Result<Self, SeekerError> {
        cfg.validate()?;
        Ok(Self {
            plant,
            cfg: cfg.clone(),
            weights: trapezoid_weights(cfg.n_samples())?,
            noise_rng: cfg.noise_rng(),
        })
    }
}

impl CostOracle for StepResponseCost<'_> {
    fn evaluate(&mut self, theta: &Theta) -> Result<f64, SeekerError> {
        let y = simulate_theta(self.plant, theta, &self.cfg, &mut self.noise_rng)?;
        cost(&y, self.cfg.r_hat, &self.weights)
    }
}

/// Everything needed to replay one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub mask: Mask,
    /// Parameters at the start of the iteration.
    pub theta: Theta,
    pub j_plus: f64,
    pub j_minus: f64,
    pub delta: [f64; THETA_DIM],
    /// False when the positivity guard rejected the update; theta was kept.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningTrace {
    pub records: Vec<IterationRecord>,
    pub final_theta: Theta,
    /// Iterations whose update the positivity guard rejected.
    pub rejections: usize,
}

impl TuningTrace {
    pub fn guard_tripped(&self) -> bool {
        self.rejections > 0
    }
}

impl TuningTrace {
    /// CSV schema: `k,h1..h4,Kp,Ki,Kd,Tf,Jplus,Jminus,dTheta1..4`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,h1,h2,h3,h4,Kp,Ki,Kd,Tf,Jplus,Jminus,dTheta1,dTheta2,dTheta3,dTheta4\n",
        );
        for r in &self.records {
            let h = r.mask.signs();
            let t = r.theta.as_array();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.k,
                h[0],
                h[1],
                h[2],
                h[3],
                t[0],
                t[1],
                t[2],
                t[3],
                r.j_plus,
                r.j_minus,
                r.delta[0],
                r.delta[1],
                r.delta[2],
                r.delta[3],
            ));
        }
        out
    }
}

/// One seeker iteration against an arbitrary cost oracle. A step that would
/// violate positivity is rejected: the record keeps the computed update, but
/// theta is carried over unchanged.
pub fn seek_step<O: CostOracle, R: Rng + ?Sized>(
    k: usize,
    theta: &Theta,
    oracle: &mut O,
    cfg: &SeekerConfig,
    mask_rng: &mut R,
) -> Result<(Theta, IterationRecord), SeekerError> {
    let mask = sample_mask(mask_rng);
    let mut d = mask.signs();
    for v in &mut d {
        *v *= cfg.gamma;
    }
    let (theta_plus, theta_minus) = perturb(theta, &d)?;
    let j_plus = oracle.evaluate(&theta_plus)?;
    let j_minus = oracle.evaluate(&theta_minus)?;
    let grad = spsa_gradient(j_plus, j_minus, &d)?;
    let mut delta = [0.0; THETA_DIM];
    for i in 0..THETA_DIM {
        delta[i] = -cfg.alpha * grad[i];
    }
    let (next, accepted) = match update(theta, &delta) {
        Ok(next) => (next, true),
        Err(PidError::NonPositiveUpdate { .. }) => (*theta, false),
        Err(e) => return Err(e.into()),
    };
    Ok((
        next,
        IterationRecord {
            k,
            mask,
            theta: *theta,
            j_plus,
            j_minus,
            delta,
            accepted,
        },
    ))
}

/// `k_max` iterations of [`seek_step`] against the step-response oracle.
pub fn run_tuning(
    plant: &StateSpace,
    theta0: Theta,
    cfg: &SeekerConfig,
) -> Result<TuningTrace, SeekerError> {
    cfg.validate()?;
    let mut oracle = StepResponseCost::new(plant, cfg)?;
    let mut mask_rng = cfg.mask_rng();
    run_tuning_with(theta0, &mut oracle, cfg, &mut mask_rng)
}

/// Same loop against a caller-provided oracle and mask source.
pub fn run_tuning_with<O: CostOracle, R: Rng + ?Sized>(
    theta0: Theta,
    oracle: &mut O,
    cfg: &SeekerConfig,
    mask_rng: &mut R,
) -> Result<TuningTrace, SeekerError> {
    cfg.validate()?;
    let mut theta = theta0;
    let mut records = Vec::with_capacity(cfg.k_max);
    let mut rejections = 0;
    for k in 0..cfg.k_max {
        let (next, record) = seek_step(k, &theta, oracle, cfg, mask_rng)?;
        if !record.accepted {
            rejections += 1;
        }
        records.push(record);
        theta = next;
    }
    Ok(TuningTrace {
        records,
        final_theta: theta,
        rejections,
    })
}
