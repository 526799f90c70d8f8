//! Subspace direction-of-arrival estimation when the array dimension and the
//! sample size are of the same order of magnitude.
//!
//! The crate covers the full pipeline:
//!
//! * [`array`]: uniform linear array signal model, snapshot synthesis and
//!   sample covariance matrices;
//! * [`rmt`]: Marchenko-Pastur law, its Stieltjes transform and the spiked-model
//!   spectral maps that drive every large-dimensional correction;
//! * [`eigsys`]: sample eigendecomposition with a deterministic phase convention;
//! * [`spectrum`]: pseudo-spectra (subspace, corrected-subspace, beamforming,
//!   contour-integral) and DoA extraction by grid plus golden-section search;
//! * [`clt`]: asymptotic variance predictions for the extracted angles;
//! * [`resolution`]: separability functions for two closely spaced sources;
//! * [`montecarlo`]: seeded, reproducible experiment harness;
//! * [`cli`]: config-driven commands and CSV/SVG writers used by the `doa-lab`
//!   binary and the examples.
//!
//! Start from the `examples/` directory; each example is a runnable tour of one
//! capability (`cargo run --release --example mp_histogram`, ...).

extern crate blas_src;

pub mod array;
pub mod cli;
pub mod clt;
pub mod contour;
pub mod csvout;
pub mod eigsys;
pub mod error;
pub mod montecarlo;
pub mod resolution;
pub mod rmt;
pub mod spectrum;
pub mod svg;
pub mod util;

pub use error::{DoaLabError, Result};
