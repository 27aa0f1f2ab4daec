//! Desk-scale workbench for EMA-trace sequence architectures.
//!
//! Two models share one context mechanism — exponential moving average
//! traces — and probe it from opposite directions:
//!
//! * [`spcn`]: a four-level Hebbian column hierarchy with frozen random
//!   projections, sparse top-k settling, and multi-timescale traces, evaluated
//!   by linear probes on a two-grammar role-labeling benchmark ([`grammar`],
//!   [`probe`]).
//! * [`spen`]: a micro language-model block whose only temporal channel is a
//!   bank of three EMA traces, trained by hand-derived backprop, with a
//!   predictor ablation ([`ablation`]) and inference-time fast-weight
//!   adaptation ([`fastweights`]).
//!
//! The recurrence itself lives in [`ema`] as a sequential reference plus a
//! chunked-parallel scan used by both models.

pub mod ablation;
pub mod ema;
pub mod error;
pub mod fastweights;
pub mod grammar;
pub mod io;
pub mod predictor;
pub mod probe;
pub mod spcn;
pub mod spen;
pub mod tensor;

pub use error::{Error, Result};
