//! Blind interference alignment over block-fading channels.
//!
//! The crate is organized bottom-up:
//!
//! * [`coherence`]: block-fading traces, the law of the longest constant
//!   run, and the decodability weights derived from it.
//! * [`alignment`]: precoder construction, the rank identity for the
//!   aligned space, and the zero-forcing projector.
//! * [`powalloc`]: closed-form layered power allocation and its
//!   stationarity diagnostic.
//! * [`rates`]: per-layer and average rate formulas plus the Monte Carlo
//!   simulator and CSV/JSON reporting.
//! * [`matio`]: small dense complex matrix helpers shared by the above.

pub mod alignment;
pub mod cli;
pub mod coherence;
pub mod error;
pub mod matio;
pub mod powalloc;
pub mod rates;

pub use error::{Error, Result};
