//! Token-level watermarking for generative models with large vocabularies.
//!
//! The scheme splits a model's output into blocks of `block_len` tokens. Each
//! block gets a fresh binary hash function over the vocabulary and a fresh
//! zero-bit codeword; generation samples two candidate tokens per step and,
//! when their hashes differ, emits the one whose hash matches the current
//! codeword bit. Detection re-hashes windows of a suspect token sequence and
//! asks the code layer whether any window decodes.
//!
//! Crate layout:
//! - [`token`], [`dist`], [`hash`]: vocabulary, next-token distributions and
//!   the per-block binary hash family.
//! - [`model`]: the toy generative-model zoo, plain (unwatermarked)
//!   generation, transcripts and entropy profiling.
//! - [`prc`]: zero-bit binary codes (stored-codeword and sparse-parity
//!   variants), bit-level channels and threshold calibration.
//! - [`watermark`]: key generation, watermarked generation and the
//!   window-scanning detector.
//! - [`channel`]: token-level attack channels (random substitution, random
//!   deletion, bounded edit adversaries).
//! - [`exec`]: sequential/parallel execution helpers shared by callers.

pub mod bits;
pub mod channel;
pub mod dist;
pub mod error;
pub mod exec;
pub mod hash;
pub mod model;
pub mod prc;
pub mod rng;
pub mod serial;
pub mod token;
pub mod watermark;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
