//! Zero-delay, prediction-powered lossy compression with long-term
//! distortion guarantees enforced by online conformal updates, plus a
//! channel-adaptive layer for packet erasure links with ACK/NACK feedback.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod bounds;
pub mod channel;
pub mod coder;
pub mod error;
pub mod harness;
pub mod ocrdc;
pub mod ocsc;
pub mod predictor;
pub mod types;

pub use error::{Error, Result};
pub use types::{Alphabet, DistortionMeasure, Distribution, Symbol};
