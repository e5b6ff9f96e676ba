//! Multi-cell coordinated downlink scheduling primitives.
//!
//! This crate holds the numerical core of the simulator: hexagonal geometry
//! and large-scale fading, correlated Rayleigh channel synthesis, statistics of
//! the angle between user channels, the channel-norm based schedulers
//! (NUS, LocalNUS, LUS) next to the full-CSI baselines (SUS, GUS, RUS),
//! zero-forcing precoding under per-BS power constraints, and the limited
//! feedback model.
//!
//! The crate is `no_std` and only needs `alloc`. Everything random takes a
//! caller-provided [`rand::Rng`], so a fixed seed fully determines the output.
//! File formats, the campaign driver and the command line live in the
//! `compsched` companion crate.
#![cfg_attr(not(test), no_std)]
// float methods come from `num_traits::Float` unless std is linked in
#![allow(unused_imports)]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod anglestats;
pub mod channel;
mod error;
pub mod feedback;
pub mod linalg;
pub mod netgeom;
pub mod precoding;
pub mod quadrature;
pub mod schedulers;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
