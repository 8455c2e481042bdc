//! Filtered PID controllers and the relative perturbation/update calculus on
//! their parameter vector.
//!
//! The controller is `C(s) = K_p + K_i/s + K_d s/(s T_f + 1)`; the parameter
//! vector `theta = (K_p, K_i, K_d, T_f)` is kept strictly positive, and both
//! exploration and learning act multiplicatively: `theta ∘ (1 ± d)` and
//! `theta ∘ (1 + Δ)`. A 5% change of a gain of 100 and of a time constant of
//! 1e-3 are then equally "sized", which is what makes one step width work
//! across very different loops.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{PlantError, PlantId, TransferFunction};

pub const THETA_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PidError {
    #[error("theta must be strictly positive in every component, got {0:?}")]
    NonPositiveTheta([f64; THETA_DIM]),
    #[error("perturbation component {index} has |d| >= 1 ({value}); sign flip hazard")]
    PerturbationTooLarge { index: usize, value: f64 },
    #[error("update component {index} is {value} <= -1; positivity of theta would be lost")]
    NonPositiveUpdate { index: usize, value: f64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// The four tuning parameters of the filtered PID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    #[serde(rename = "Kp")]
    pub kp: f64,
    #[serde(rename = "Ki")]
    pub ki: f64,
    #[serde(rename = "Kd")]
    pub kd: f64,
    #[serde(rename = "Tf")]
    pub tf: f64,
}

impl Theta {
    pub fn new(kp: f64, ki: f64, kd: f64, tf: f64) -> Result<Self, PidError> {
        let t = Self { kp, ki, kd, tf };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), PidError> {
        if self.as_array().iter().all(|&v| v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(PidError::NonPositiveTheta(self.as_array()))
        }
    }

    pub fn as_array(&self) -> [f64; THETA_DIM] {
        [self.kp, self.ki, self.kd, self.tf]
    }

    pub fn from_array(v: [f64; THETA_DIM]) -> Result<Self, PidError> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl std::fmt::Display for Theta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Kp={:.4} Ki={:.4} Kd={:.4} Tf={:.4e}",
            self.kp, self.ki, self.kd, self.tf
        )
    }
}

/// `C(s, theta)` as a biproper second-order transfer function:
/// `(K_p(sT_f+1)s + K_i(sT_f+1) + K_d s^2) / (s(sT_f+1))`.
pub fn pid_tf(theta: &Theta) -> Result<TransferFunction, PidError> {
    theta.validate()?;
    let Theta { kp, ki, kd, tf } = *theta;
    let num = vec![ki, kp + ki * tf, kp * tf + kd];
    let den = vec![0.0, 1.0, tf];
    Ok(TransferFunction::new(num, den)?)
}

/// Component-wise `theta ∘ (1 ± d)`.
pub fn perturb(theta: &Theta, d: &[f64; THETA_DIM]) -> Result<(Theta, Theta), PidError> {
    theta.validate()?;
    for (index, &value) in d.iter().enumerate() {
        if value.abs() >= 1.0 {
            return Err(PidError::PerturbationTooLarge { index, value });
        }
    }
    let t = theta.as_array();
    let mut plus = [0.0; THETA_DIM];
    let mut minus = [0.0; THETA_DIM];
    for i in 0..THETA_DIM {
        plus[i] = t[i] * (1.0 + d[i]);
        minus[i] = t[i] * (1.0 - d[i]);
    }
    Ok((Theta::from_array(plus)?, Theta::from_array(minus)?))
}

/// Component-wise `theta ∘ (1 + Δ)`. Rejects any `Δ_i <= -1`: such a step
/// would flip or zero a parameter, and a sign flip of `T_f` turns the
/// derivative filter into positive feedback.
pub fn update(theta: &Theta, delta: &[f64; THETA_DIM]) -> Result<Theta, PidError> {
    theta.validate()?;
    for (index, &value) in delta.iter().enumerate() {
        if !(value > -1.0) || !value.is_finite() {
            return Err(PidError::NonPositiveUpdate { index, value });
        }
    }
    let t = theta.as_array();
    let mut out = [0.0; THETA_DIM];
    for i in 0..THETA_DIM {
        out[i] = t[i] * (1.0 + delta[i]);
    }
    Theta::from_array(out)
}

/// Initial parameters for the benchmark plants (Ziegler-Nichols oscillation
/// results, shipped as fixtures).
pub fn initial_theta(id: PlantId) -> Theta {
    match id {
        PlantId::G1 => Theta {
            kp: 4.08,
            ki: 0.45,
            kd: 9.33,
            tf: 0.50,
        },
        PlantId::G2 => Theta {
            kp: 1.11,
            ki: 14.61,
            kd: 0.02,
            tf: 1e-3,
        },
        PlantId::G3 => Theta {
            kp: 3.53,
            ki: 0.21,
            kd: 14.82,
            tf: 0.50,
        },
    }
}
