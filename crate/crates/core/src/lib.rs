//! Provable individual-fairness repair for small feed-forward ReLU
//! classifiers.
//!
//! The pipeline tightens the feature extractor's interval bounds by gradient
//! descent ([`calibrate`]), encodes the minimal change to the final linear
//! layer that makes every repair neighbourhood one-signed as a mixed-integer
//! program ([`encode`]), solves it in-process ([`solver`]) and checks the
//! result with an exact verifier ([`verify`]).

pub mod bounds;
pub mod calibrate;
#[cfg(feature = "cli")]
pub mod cli;
pub mod encode;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod running;
pub mod schema;
pub mod solver;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use model::{load_model, save_model, AffineLayer, FeatureExtractor, FinalLayerDelta, Mlp};
pub use schema::{AttributeSchema, Dataset, InputBox};
