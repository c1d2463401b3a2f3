//! Steered-response power (SRP-PHAT) source localization with per-point,
//! per-pair band limitation of the generalized cross-correlation.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: positions, TDOAs, the TDOA-gradient norm and the alias-free
//!   sampling conditions derived from it.
//! - [`gcc`]: PHAT-whitened cross-spectra and correlation evaluated at
//!   arbitrary lags, full band or band-limited.
//! - [`srpmap`]: grids, SRP maps in the three GCC modes, and peak picking.
//! - [`roomsim`]: free-field and image-method propagation, RT60 measurement.
//! - [`experiment`]: randomized localization trials and the statistics used
//!   to compare the modes.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod dsp;
pub mod error;
pub mod experiment;
pub mod gcc;
pub mod geometry;
pub mod roomsim;
pub mod srpmap;
pub mod wav;

pub use error::{Error, Result};
pub use gcc::{Band, CrossSpectrumPhat, GccMode, Signal};
pub use geometry::{ArrayGeometry, PairFrame, Point3, SoundSpeed};
