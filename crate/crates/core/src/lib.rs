//! Blind channel estimation and turbo equalization over ISI/AWGN channels.
//!
//! The crate is `no_std` (it only needs `alloc`). Everything here is a pure
//! function of its inputs and an explicit seed:
//!
//! - [`trellis`]: finite-state machines for the ISI channel (state-tied and
//!   edge-tied forms) and for feed-forward convolutional codes, plus the
//!   Gaussian emission tables learned by Baum-Welch.
//! - [`bcjr`]: log-domain forward-backward inference on any [`TrellisSpec`].
//! - [`em`]: Baum-Welch re-estimation of the emission means and variances.
//! - [`chain`]: encoder, interleaver and BPSK (soft) mapping.
//! - [`channel`]: linear ISI + AWGN channel model.
//! - [`receiver`]: the joint turbo/Baum-Welch loop and the standalone baseline.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bcjr;
pub mod chain;
pub mod channel;
pub mod em;
mod error;
pub mod math;
pub mod receiver;
pub mod trellis;

pub use error::{Error, Result};
pub use math::Table;
pub use trellis::{Edge, EdgeGaussianTable, HmmParams, TrellisSpec};
