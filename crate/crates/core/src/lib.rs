//! Cross-domain channel estimation for CP-OFDM over doubly selective channels.
//!
//! The estimator correlates the received frame against the pilot frame in the
//! delay-Doppler domain to find candidate (delay, Doppler) pairs, then fits
//! their complex gains in the time-frequency domain by least squares or an
//! ℓ1-regularized solver. Reference estimators and the channel simulator used
//! to score them live alongside it.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]
// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod cdce;
pub mod channel;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod pilot;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
