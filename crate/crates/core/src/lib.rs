//! trimmed during bring-up
pub mod cloud;
pub mod encoding;
pub mod hecore;
pub mod pid;
pub mod plant;
pub mod seeker;

pub use encoding::{EncodedInt, FixedPointParams};
pub use hecore::{BackendKind, Ciphertext, HeEvaluator, HeParams, SecretKeyMaterial};
pub use pid::Theta;
pub use plant::{DiscreteLoop, PlantId, StateSpace, TransferFunction};
pub use seeker::{Mask, SeekerConfig, TuningTrace};
