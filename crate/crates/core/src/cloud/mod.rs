//! The encrypted counterpart of the seeker: a client/cloud session in which
//! the cloud sees only ciphertexts and public scalars.
//!
//! Protocol, per iteration: the cloud picks one of the 16 preencrypted
//! perturbation vectors and sends `Enc(d)`; the client decrypts, excites the
//! closed loop at `theta ∘ (1 ± d)`, and streams back `Enc(y(n))` for both
//! runs; the cloud accumulates the normalized cost step-wise and returns
//! `Enc(Δθ) = (Enc(J+) ⊖ Enc(J-)) ⊗ Enc(-α / (2 d_i))`. The client applies
//! the relative update locally. Each iteration starts from fresh
//! encryptions, so the modulus chain never runs out regardless of `k_max`.
//!
//! Depth per iteration, from fresh `Enc(y(n))` to `Enc(Δθ)`: one product
//! with `Enc(1/r̂)`, one squaring, one public-weight product, one product
//! with the step factor — exactly four levels.

pub mod transcript;

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hecore::{
    dec, enc, enc_at, keygen, BackendKind, Ciphertext, EvalKey, HeError, HeEvaluator, HeParams,
    SecretKeyMaterial,
};
use crate::pid::{perturb, update, PidError, Theta, THETA_DIM};
use crate::plant::StateSpace;
use crate::seeker::{
    cost, sample_mask, simulate_theta, stream_rng, streams, trapezoid_weights, IterationRecord,
    Mask, SeekerConfig, SeekerError, TuningTrace,
};

use transcript::{
    read_transcript, transcript_writer, Dir, Frame, FrameKind, FrameTransport, InProcessPipe,
    RecordingTransport, RunTag, SessionMeta, TcpFrameTransport,
};

#[derive(Debug, Error)]
pub enum CloudError {
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Pid(#[from] PidError),
    #[error(transparent)]
    Seeker(#[from] SeekerError),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("sample out of order: expected {expected}, got {got}")]
    OutOfOrderSample { expected: usize, got: usize },
    #[error("iteration already in progress")]
    IterationInProgress,
    #[error("iteration incomplete: both runs must deliver all samples first")]
    RunsIncomplete,
    #[error("the cloud role holds no secret key and cannot decrypt")]
    NoDecryptCapability,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The preencrypted tables: one perturbation vector and one step-factor
/// vector per mask, plus `Enc(1/r̂)`, `Enc(1)`, and the accumulator seed
/// `Enc(0)`. Everything is encrypted at full level; scales are chosen so
/// each entry lands add-compatible at its point of use in the circuit.
pub struct CloudPrecomp {
    pub perturbations: Vec<[Ciphertext; THETA_DIM]>,
    pub step_factors: Vec<[Ciphertext; THETA_DIM]>,
    pub inv_r_hat: Ciphertext,
    pub one: Ciphertext,
    pub zero: Ciphertext,
}

/// Scale at which the step factors are embedded: small enough that
/// `Enc(Δθ)` at level 0 stays well inside the single remaining prime
/// (values up to ~100 still decode there), large enough that the factor's
/// rounding error is ~1e-10 relative.
fn step_factor_scale(c: f64) -> f64 {
    c / 256.0
}

/// Client-side preparation of [`CloudPrecomp`]. Requires the secret key;
/// the tables travel to the cloud as ciphertext frames.
pub fn precompute<R: Rng + ?Sized>(
    keys: &SecretKeyMaterial,
    he: &HeParams,
    cfg: &SeekerConfig,
    rng: &mut R,
) -> Result<CloudPrecomp, CloudError> {
    cfg.validate()?;
    let top = he.levels;
    let eval = HeEvaluator::new(he.clone(), keys.eval_key())?;
    let c = he.scale_c;
    let norm_scale = eval.mult_scale(c, c, top);
    let acc_scale = eval.mult_scale(norm_scale, norm_scale, top.saturating_sub(1));
    let sf_scale = step_factor_scale(c);

    let mut perturbations = Vec::with_capacity(Mask::COUNT);
    let mut step_factors = Vec::with_capacity(Mask::COUNT);
    for mask in Mask::all() {
        let signs = mask.signs();
        let d: Vec<Ciphertext> = signs
            .iter()
            .map(|h| enc(cfg.gamma * h, keys, he, rng))
            .collect::<Result<_, _>>()?;
        let sf: Vec<Ciphertext> = signs
            .iter()
            .map(|h| enc_at(-cfg.alpha / (2.0 * cfg.gamma * h), sf_scale, top, keys, he, rng))
            .collect::<Result<_, _>>()?;
        perturbations.push(d.try_into().expect("four components"));
        step_factors.push(sf.try_into().expect("four components"));
    }
    Ok(CloudPrecomp {
        perturbations,
        step_factors,
        inv_r_hat: enc(1.0 / cfg.r_hat, keys, he, rng)?,
        one: enc_at(1.0, norm_scale, top, keys, he, rng)?,
        zero: enc_at(0.0, acc_scale, top, keys, he, rng)?,
    })
}

/// Public session parameters the cloud operates from. Carries no secrets:
/// `N` and `Δt` are observable from the ciphertext stream anyway, and the
/// seed only drives the cloud's own mask selection.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub backend: BackendKind,
    pub he: HeParams,
    pub n_samples: usize,
    pub k_max: usize,
    pub cloud_seed: u64,
}

impl SessionSetup {
    pub fn meta(&self) -> SessionMeta {
        SessionMeta::new(
            self.backend,
            self.he.clone(),
            self.n_samples,
            self.k_max,
            self.cloud_seed,
        )
    }

    pub fn from_meta(meta: &SessionMeta) -> Self {
        Self {
            backend: meta.backend,
            he: meta.he_params.clone(),
            n_samples: meta.n_samples,
            k_max: meta.k_max,
            cloud_seed: meta.cloud_seed,
        }
    }
}

struct IterationState {
    mask_index: u8,
    run: RunTag,
    n: usize,
    complete: bool,
    acc_plus: Ciphertext,
    acc_minus: Ciphertext,
}

/// Everything a cloud-side state entry can be: used by the audit that
/// backs the confidentiality contract.
pub enum Retained<'a> {
    Ciphertext { name: String, ct: &'a Ciphertext },
    PublicScalar { name: String, value: f64 },
}

/// The cloud role. Holds evaluation material only; there is no decrypt
/// path from this type (see [`CloudSession::decrypt_capability`]).
pub struct CloudSession {
    evaluator: HeEvaluator,
    setup: SessionSetup,
    precomp: CloudPrecomp,
    weights_over_n: Vec<f64>,
    rng: ChaCha8Rng,
    k: usize,
    state: Option<IterationState>,
}

impl CloudSession {
    pub fn new(
        eval_key: EvalKey,
        setup: SessionSetup,
        precomp: CloudPrecomp,
    ) -> Result<Self, CloudError> {
        if eval_key.backend() != setup.backend {
            return Err(HeError::BackendMismatch.into());
        }
        let top = setup.he.levels;
        for entry in precomp
            .perturbations
            .iter()
            .chain(&precomp.step_factors)
            .flatten()
            .chain([&precomp.inv_r_hat, &precomp.one, &precomp.zero])
        {
            if entry.level() != top {
                return Err(CloudError::Protocol(
                    "precomputed tables must arrive at full level".into(),
                ));
            }
        }
        if precomp.perturbations.len() != Mask::COUNT
            || precomp.step_factors.len() != Mask::COUNT
        {
            return Err(CloudError::Protocol(
                "precomputed tables must hold 16 entries".into(),
            ));
        }
        let weights_over_n = trapezoid_weights(setup.n_samples)?
            .into_iter()
            .map(|w| w / setup.n_samples as f64)
            .collect();
        Ok(Self {
            evaluator: HeEvaluator::new(setup.he.clone(), eval_key)?,
            rng: stream_rng(setup.cloud_seed, streams::MASK),
            setup,
            precomp,
            weights_over_n,
            k: 0,
            state: None,
        })
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    /// Draw a mask index, reset both accumulators to `Enc(0)`, and hand out
    /// the selected encrypted perturbation vector.
    pub fn begin_iteration(&mut self) -> Result<[Ciphertext; THETA_DIM], CloudError> {
        if self.state.is_some() {
            return Err(CloudError::IterationInProgress);
        }
        let mask_index = sample_mask(&mut self.rng).index();
        let acc_level = self.setup.he.levels.saturating_sub(3);
        let acc = self.evaluator.reduce_level(&self.precomp.zero, acc_level)?;
        self.state = Some(IterationState {
            mask_index,
            run: RunTag::Plus,
            n: 0,
            complete: false,
            acc_plus: acc.clone(),
            acc_minus: acc,
        });
        Ok(self.precomp.perturbations[mask_index as usize].clone())
    }

    /// `Enc(ẽ) = Enc(1) ⊖ Enc(y) ⊗ Enc(1/r̂)`, squared, weighted by the
    /// public `w_n / N`, and added to the active accumulator. Exactly three
    /// levels below fresh.
    pub fn ingest_sample(
        &mut self,
        run: RunTag,
        n: usize,
        ct_y: &Ciphertext,
    ) -> Result<(), CloudError> {
        let top = self.setup.he.levels;
        let n_samples = self.setup.n_samples;
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| CloudError::Protocol("no iteration in progress".into()))?;
        if state.complete {
            return Err(CloudError::Protocol("iteration already has all samples".into()));
        }
        if run != state.run {
            return Err(CloudError::Protocol(format!(
                "expected samples for run {:?}",
                state.run
            )));
        }
        if n != state.n {
            return Err(CloudError::OutOfOrderSample {
                expected: state.n,
                got: n,
            });
        }
        if ct_y.level() != top {
            return Err(HeError::LevelMismatch {
                left: ct_y.level(),
                right: top,
            }
            .into());
        }
        let eval = &self.evaluator;
        let normalized = eval.mult(ct_y, &self.precomp.inv_r_hat)?;
        let one = eval.reduce_level(&self.precomp.one, normalized.level())?;
        let error = eval.sub(&one, &normalized)?;
        let squared = eval.mult(&error, &error)?;
        let term = eval.mult_plain(&squared, self.weights_over_n[n])?;
        let acc = match state.run {
            RunTag::Plus => &mut state.acc_plus,
            RunTag::Minus => &mut state.acc_minus,
        };
        *acc = eval.add(acc, &term)?;

        state.n += 1;
        if state.n == n_samples {
            match state.run {
                RunTag::Plus => {
                    state.run = RunTag::Minus;
                    state.n = 0;
                }
                RunTag::Minus => state.complete = true,
            }
        }
        Ok(())
    }

    /// `Enc(Δθ_i) = (Enc(J+) ⊖ Enc(J-)) ⊗ Enc(-α/(2 d_i))`; the fourth and
    /// final level.
    pub fn finish_iteration(&mut self) -> Result<[Ciphertext; THETA_DIM], CloudError> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| CloudError::Protocol("no iteration in progress".into()))?;
        if !state.complete {
            return Err(CloudError::RunsIncomplete);
        }
        let eval = &self.evaluator;
        let diff = eval.sub(&state.acc_plus, &state.acc_minus)?;
        let table = &self.precomp.step_factors[state.mask_index as usize];
        let mut out = Vec::with_capacity(THETA_DIM);
        for factor in table {
            let aligned = eval.reduce_level(factor, diff.level())?;
            out.push(eval.mult(&diff, &aligned)?);
        }
        self.state = None;
        self.k += 1;
        Ok(out.try_into().expect("four components"))
    }

    /// Census of everything this role retains. Every entry is a ciphertext
    /// or a public scalar; the type system admits nothing else.
    pub fn audit(&self) -> Vec<Retained<'_>> {
        let mut out = Vec::new();
        for (idx, entry) in self.precomp.perturbations.iter().enumerate() {
            for (i, ct) in entry.iter().enumerate() {
                out.push(Retained::Ciphertext {
                    name: format!("perturbation[{idx}][{i}]"),
                    ct,
                });
            }
        }
        for (idx, entry) in self.precomp.step_factors.iter().enumerate() {
            for (i, ct) in entry.iter().enumerate() {
                out.push(Retained::Ciphertext {
                    name: format!("step_factor[{idx}][{i}]"),
                    ct,
                });
            }
        }
        out.push(Retained::Ciphertext {
            name: "inv_r_hat".into(),
            ct: &self.precomp.inv_r_hat,
        });
        out.push(Retained::Ciphertext {
            name: "one".into(),
            ct: &self.precomp.one,
        });
        out.push(Retained::Ciphertext {
            name: "zero".into(),
            ct: &self.precomp.zero,
        });
        for (n, w) in self.weights_over_n.iter().enumerate() {
            out.push(Retained::PublicScalar {
                name: format!("w[{n}]/N"),
                value: *w,
            });
        }
        out.push(Retained::PublicScalar {
            name: "n_samples".into(),
            value: self.setup.n_samples as f64,
        });
        out.push(Retained::PublicScalar {
            name: "k_max".into(),
            value: self.setup.k_max as f64,
        });
        out.push(Retained::PublicScalar {
            name: "k".into(),
            value: self.k as f64,
        });
        if let Some(state) = &self.state {
            out.push(Retained::Ciphertext {
                name: "acc_plus".into(),
                ct: &state.acc_plus,
            });
            out.push(Retained::Ciphertext {
                name: "acc_minus".into(),
                ct: &state.acc_minus,
            });
            out.push(Retained::PublicScalar {
                name: "mask_index".into(),
                value: state.mask_index as f64,
            });
            out.push(Retained::PublicScalar {
                name: "sample_counter".into(),
                value: state.n as f64,
            });
        }
        out
    }

    /// Contract probe: this role cannot decrypt, by construction.
    pub fn decrypt_capability(&self) -> Result<(), CloudError> {
        Err(CloudError::NoDecryptCapability)
    }

    /// Accumulator ciphertexts of the in-flight iteration.
    pub fn accumulators(&self) -> Option<(&Ciphertext, &Ciphertext)> {
        self.state.as_ref().map(|s| (&s.acc_plus, &s.acc_minus))
    }

    fn perturbation_frames(&mut self) -> Result<Vec<Frame>, CloudError> {
        let k = self.k;
        let d = self.begin_iteration()?;
        Ok(d
            .iter()
            .enumerate()
            .map(|(i, ct)| {
                Frame::with_ciphertext(Dir::S2c, k, None, Some(i), FrameKind::Perturbation, ct)
            })
            .collect())
    }

    fn delta_frames(&mut self) -> Result<Vec<Frame>, CloudError> {
        let k = self.k;
        let delta = self.finish_iteration()?;
        Ok(delta
            .iter()
            .enumerate()
            .map(|(i, ct)| Frame::with_ciphertext(Dir::S2c, k, None, Some(i), FrameKind::Delta, ct))
            .collect())
    }

    /// Frame-driven interface: consume one inbound frame, emit the outbound
    /// frames it triggers. Sample frames trigger `Enc(Δθ)` (and the next
    /// iteration's perturbation) once both runs are complete.
    pub fn handle_frame(&mut self, frame: &Frame) -> Result<Vec<Frame>, CloudError> {
        match frame.kind {
            FrameKind::Sample => {
                let run = frame
                    .j
                    .ok_or_else(|| CloudError::Protocol("sample frame without run tag".into()))?;
                let n = frame
                    .n
                    .ok_or_else(|| CloudError::Protocol("sample frame without counter".into()))?;
                if frame.k != self.k {
                    return Err(CloudError::Protocol(format!(
                        "sample for iteration {} during iteration {}",
                        frame.k, self.k
                    )));
                }
                let ct = frame.decode_ciphertext()?;
                self.ingest_sample(run, n, &ct)?;
                let complete = self.state.as_ref().is_some_and(|s| s.complete);
                if complete {
                    let mut out = self.delta_frames()?;
                    if self.k < self.setup.k_max {
                        out.extend(self.perturbation_frames()?);
                    }
                    Ok(out)
                } else {
                    Ok(Vec::new())
                }
            }
            kind => Err(CloudError::Protocol(format!(
                "unexpected inbound frame kind {kind:?}"
            ))),
        }
    }
}

/// Receive the precomputed tables from frames (setup phase of a session).
pub fn receive_precomp<T: FrameTransport>(
    transport: &mut T,
    he: &HeParams,
) -> Result<CloudPrecomp, CloudError> {
    let _ = he;
    let mut perturbations: Vec<Vec<Option<Ciphertext>>> =
        vec![vec![None; THETA_DIM]; Mask::COUNT];
    let mut step_factors: Vec<Vec<Option<Ciphertext>>> =
        vec![vec![None; THETA_DIM]; Mask::COUNT];
    let mut inv_r_hat = None;
    let mut one = None;
    let mut zero = None;
    let expected = 2 * Mask::COUNT * THETA_DIM + 3;
    for _ in 0..expected {
        let frame = transport.recv()?;
        let ct = frame.decode_ciphertext()?;
        match frame.kind {
            FrameKind::PrecompPerturbation => {
                let slot = frame
                    .n
                    .filter(|&i| i < THETA_DIM)
                    .ok_or_else(|| CloudError::Protocol("bad precomp component".into()))?;
                if frame.k >= Mask::COUNT {
                    return Err(CloudError::Protocol("bad precomp mask index".into()));
                }
                perturbations[frame.k][slot] = Some(ct);
            }
            FrameKind::PrecompStepFactor => {
                let slot = frame
                    .n
                    .filter(|&i| i < THETA_DIM)
                    .ok_or_else(|| CloudError::Protocol("bad precomp component".into()))?;
                if frame.k >= Mask::COUNT {
                    return Err(CloudError::Protocol("bad precomp mask index".into()));
                }
                step_factors[frame.k][slot] = Some(ct);
            }
            FrameKind::PrecompInvRef => inv_r_hat = Some(ct),
            FrameKind::PrecompOne => one = Some(ct),
            FrameKind::PrecompZero => zero = Some(ct),
            other => {
                return Err(CloudError::Protocol(format!(
                    "expected precomp frame, got {other:?}"
                )))
            }
        }
    }
    let unwrap_table = |table: Vec<Vec<Option<Ciphertext>>>| -> Result<Vec<[Ciphertext; THETA_DIM]>, CloudError> {
        table
            .into_iter()
            .map(|row| {
                let row: Option<Vec<Ciphertext>> = row.into_iter().collect();
                row.and_then(|v| v.try_into().ok())
                    .ok_or_else(|| CloudError::Protocol("incomplete precomp table".into()))
            })
            .collect()
    };
    Ok(CloudPrecomp {
        perturbations: unwrap_table(perturbations)?,
        step_factors: unwrap_table(step_factors)?,
        inv_r_hat: inv_r_hat.ok_or_else(|| CloudError::Protocol("missing Enc(1/r)".into()))?,
        one: one.ok_or_else(|| CloudError::Protocol("missing Enc(1)".into()))?,
        zero: zero.ok_or_else(|| CloudError::Protocol("missing Enc(0)".into()))?,
    })
}

fn precomp_frames(precomp: &CloudPrecomp) -> Vec<Frame> {
    let mut frames = Vec::new();
    for (idx, entry) in precomp.perturbations.iter().enumerate() {
        for (i, ct) in entry.iter().enumerate() {
            frames.push(Frame::with_ciphertext(
                Dir::C2s,
                idx,
                None,
                Some(i),
                FrameKind::PrecompPerturbation,
                ct,
            ));
        }
    }
    for (idx, entry) in precomp.step_factors.iter().enumerate() {
        for (i, ct) in entry.iter().enumerate() {
            frames.push(Frame::with_ciphertext(
                Dir::C2s,
                idx,
                None,
                Some(i),
                FrameKind::PrecompStepFactor,
                ct,
            ));
        }
    }
    frames.push(Frame::with_ciphertext(
        Dir::C2s,
        0,
        None,
        None,
        FrameKind::PrecompInvRef,
        &precomp.inv_r_hat,
    ));
    frames.push(Frame::with_ciphertext(
        Dir::C2s,
        0,
        None,
        None,
        FrameKind::PrecompOne,
        &precomp.one,
    ));
    frames.push(Frame::with_ciphertext(
        Dir::C2s,
        0,
        None,
        None,
        FrameKind::PrecompZero,
        &precomp.zero,
    ));
    frames
}

/// Serve one full session over a transport: receive the tables, then react
/// to sample frames until `k_max` iterations are done.
pub fn serve_session<T: FrameTransport>(
    transport: &mut T,
    eval_key: EvalKey,
    setup: SessionSetup,
) -> Result<(), CloudError> {
    let precomp = receive_precomp(transport, &setup.he)?;
    let k_max = setup.k_max;
    let mut session = CloudSession::new(eval_key, setup, precomp)?;
    for frame in session.perturbation_frames()? {
        transport.send(&frame)?;
    }
    while session.iteration() < k_max {
        let inbound = transport.recv()?;
        for frame in session.handle_frame(&inbound)? {
            transport.send(&frame)?;
        }
    }
    Ok(())
}

/// The client role: owns the keys, simulates the loop, applies updates.
pub struct TuningClient<'a> {
    plant: &'a StateSpace,
    cfg: SeekerConfig,
    he: HeParams,
    keys: SecretKeyMaterial,
    weights: Vec<f64>,
}

impl<'a> TuningClient<'a> {
    pub fn new(
        plant: &'a StateSpace,
        cfg: &SeekerConfig,
        he: &HeParams,
        keys: SecretKeyMaterial,
    ) -> Result<Self, CloudError> {
        cfg.validate()?;
        Ok(Self {
            plant,
            cfg: cfg.clone(),
            he: he.clone(),
            keys,
            weights: trapezoid_weights(cfg.n_samples())?,
        })
    }

    fn recv_vector<T: FrameTransport>(
        &mut self,
        transport: &mut T,
        kind: FrameKind,
        k: usize,
    ) -> Result<[f64; THETA_DIM], CloudError> {
        let mut out = [0.0; THETA_DIM];
        for _ in 0..THETA_DIM {
            let frame = transport.recv()?;
            if frame.kind != kind || frame.k != k {
                return Err(CloudError::Protocol(format!(
                    "expected {kind:?} for iteration {k}, got {:?} for {}",
                    frame.kind, frame.k
                )));
            }
            let i = frame
                .n
                .filter(|&i| i < THETA_DIM)
                .ok_or_else(|| CloudError::Protocol("vector frame without component".into()))?;
            let ct = frame.decode_ciphertext()?;
            out[i] = dec(&ct, &self.keys, &self.he)?;
        }
        Ok(out)
    }

    /// Run the full tuning session over the given transport.
    pub fn drive<T: FrameTransport>(
        &mut self,
        transport: &mut T,
        theta0: Theta,
    ) -> Result<TuningTrace, CloudError> {
        let mut enc_rng = stream_rng(self.cfg.seed, streams::ENCRYPT);
        let mut noise_rng = stream_rng(self.cfg.seed, streams::NOISE);

        let precomp = precompute(&self.keys, &self.he, &self.cfg, &mut enc_rng)?;
        for frame in precomp_frames(&precomp) {
            transport.send(&frame)?;
        }

        let mut theta = theta0;
        let mut records = Vec::with_capacity(self.cfg.k_max);
        let mut rejections = 0;
        for k in 0..self.cfg.k_max {
            let d = self.recv_vector(transport, FrameKind::Perturbation, k)?;
            let mask = mask_from_signs(&d)?;
            let (theta_plus, theta_minus) = perturb(&theta, &d)?;

            let mut costs = [0.0; 2];
            for (slot, (run, th)) in [(RunTag::Plus, theta_plus), (RunTag::Minus, theta_minus)]
                .iter()
                .enumerate()
            {
                let y = simulate_theta(self.plant, th, &self.cfg, &mut noise_rng)?;
                costs[slot] = cost(&y, self.cfg.r_hat, &self.weights)?;
                for (n, &sample) in y.iter().enumerate() {
                    let ct = enc(sample, &self.keys, &self.he, &mut enc_rng)?;
                    transport.send(&Frame::with_ciphertext(
                        Dir::C2s,
                        k,
                        Some(*run),
                        Some(n),
                        FrameKind::Sample,
                        &ct,
                    ))?;
                }
            }

            let delta = self.recv_vector(transport, FrameKind::Delta, k)?;
            let (next, accepted) = match update(&theta, &delta) {
                Ok(next) => (next, true),
                Err(PidError::NonPositiveUpdate { .. }) => (theta, false),
                Err(e) => return Err(e.into()),
            };
            if !accepted {
                rejections += 1;
            }
            records.push(IterationRecord {
                k,
                mask,
                theta,
                j_plus: costs[0],
                j_minus: costs[1],
                delta,
                accepted,
            });
            theta = next;
        }
        Ok(TuningTrace {
            records,
            final_theta: theta,
            rejections,
        })
    }
}

fn mask_from_signs(d: &[f64; THETA_DIM]) -> Result<Mask, CloudError> {
    let mut index = 0u8;
    for (i, &v) in d.iter().enumerate() {
        if v == 0.0 {
            return Err(CloudError::Protocol(
                "decrypted perturbation component is zero".into(),
            ));
        }
        if v > 0.0 {
            index |= 1 << i;
        }
    }
    Ok(Mask::from_index(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    TcpLoopback,
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub transport: TransportKind,
    pub transcript_path: Option<PathBuf>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            transport: TransportKind::InProcess,
            transcript_path: None,
        }
    }
}

pub struct EncryptedRun {
    pub trace: TuningTrace,
    pub transcript_path: Option<PathBuf>,
}

/// Orchestrate a whole encrypted tuning: keygen, precompute, cloud role on
/// its own thread, client role on this one. The cloud role never sees key
/// material beyond the public evaluation key.
pub fn run_encrypted_tuning(
    plant: &StateSpace,
    theta0: Theta,
    cfg: &SeekerConfig,
    backend: BackendKind,
    he: &HeParams,
    options: &SessionOptions,
) -> Result<EncryptedRun, CloudError> {
    cfg.validate()?;
    let mut key_rng = stream_rng(cfg.seed, streams::KEYGEN);
    let keys = keygen(backend, he, &mut key_rng)?;
    let eval_key = keys.eval_key();
    let setup = SessionSetup {
        backend,
        he: he.clone(),
        n_samples: cfg.n_samples(),
        k_max: cfg.k_max,
        cloud_seed: cfg.seed,
    };
    let meta = setup.meta();
    let mut client = TuningClient::new(plant, cfg, he, keys)?;

    let trace = match options.transport {
        TransportKind::InProcess => {
            let (client_end, mut cloud_end) = InProcessPipe::pair();
            std::thread::scope(|scope| {
                let cloud_setup = setup.clone();
                let handle =
                    scope.spawn(move || serve_session(&mut cloud_end, eval_key, cloud_setup));
                let trace = drive_client(&mut client, client_end, theta0, &meta, options)?;
                handle
                    .join()
                    .map_err(|_| CloudError::Protocol("cloud thread panicked".into()))??;
                Ok::<_, CloudError>(trace)
            })?
        }
        TransportKind::TcpLoopback => {
            let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            std::thread::scope(|scope| {
                let cloud_setup = setup.clone();
                let handle = scope.spawn(move || -> Result<(), CloudError> {
                    let (stream, _) = listener.accept()?;
                    let mut transport = TcpFrameTransport::new(stream);
                    serve_session(&mut transport, eval_key, cloud_setup)
                });
                let stream = std::net::TcpStream::connect(addr)?;
                let trace = drive_client(
                    &mut client,
                    TcpFrameTransport::new(stream),
                    theta0,
                    &meta,
                    options,
                )?;
                handle
                    .join()
                    .map_err(|_| CloudError::Protocol("cloud thread panicked".into()))??;
                Ok::<_, CloudError>(trace)
            })?
        }
    };
    Ok(EncryptedRun {
        trace,
        transcript_path: options.transcript_path.clone(),
    })
}

fn drive_client<T: FrameTransport>(
    client: &mut TuningClient<'_>,
    transport: T,
    theta0: Theta,
    meta: &SessionMeta,
    options: &SessionOptions,
) -> Result<TuningTrace, CloudError> {
    match &options.transcript_path {
        Some(path) => {
            let sink = transcript_writer(path)?;
            let mut recording = RecordingTransport::new(transport, sink, meta)?;
            client.drive(&mut recording, theta0)
        }
        None => {
            let mut transport = transport;
            client.drive(&mut transport, theta0)
        }
    }
}

/// Re-execute the cloud role against a recorded transcript and compare its
/// outputs byte-for-byte against the recorded server-to-client frames.
pub struct ReplayReport {
    pub frames_checked: usize,
    pub mismatches: usize,
}

pub fn replay_transcript(path: &std::path::Path, eval_key: EvalKey) -> Result<ReplayReport, CloudError> {
    let transcript = read_transcript(path)?;
    let setup = SessionSetup::from_meta(&transcript.meta);

    struct ScriptedTransport<'a> {
        inbound: std::collections::VecDeque<&'a Frame>,
        produced: Vec<Frame>,
    }
    impl FrameTransport for ScriptedTransport<'_> {
        fn send(&mut self, frame: &Frame) -> Result<(), CloudError> {
            self.produced.push(frame.clone());
            Ok(())
        }
        fn recv(&mut self) -> Result<Frame, CloudError> {
            self.inbound
                .pop_front()
                .cloned()
                .ok_or_else(|| CloudError::Protocol("transcript exhausted".into()))
        }
    }

    let mut transport = ScriptedTransport {
        inbound: transcript
            .frames
            .iter()
            .filter(|f| f.dir == Dir::C2s)
            .collect(),
        produced: Vec::new(),
    };
    serve_session(&mut transport, eval_key, setup)?;

    let recorded: Vec<&Frame> = transcript
        .frames
        .iter()
        .filter(|f| f.dir == Dir::S2c)
        .collect();
    let mut mismatches = 0;
    if recorded.len() != transport.produced.len() {
        mismatches += recorded.len().abs_diff(transport.produced.len());
    }
    for (a, b) in recorded.iter().zip(&transport.produced) {
        let same = serde_json::to_string(a)? == serde_json::to_string(b)?;
        if !same {
            mismatches += 1;
        }
    }
    Ok(ReplayReport {
        frames_checked: recorded.len(),
        mismatches,
    })
}
