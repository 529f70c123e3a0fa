//! Weight-function deconvolution of 2D images.
//!
//! The observed image `h` is modelled as the circular convolution of an
//! unknown image `g` with a known point spread function `k`. The iterations
//! in [`deconv`] evolve the weight `ϱ = g / h` rather than `g` itself,
//! starting from `ϱ₀ = h / (k∗h)`. A Laplacian correction supplies the
//! high-frequency recovery and a Richardson-Lucy style ratio keeps the
//! data consistent. A standard Richardson-Lucy baseline and a Von Neumann
//! (Van Cittert) reference iterator are included for comparison, with a
//! metric suite in [`metrics`].
//!
//! All boundaries are periodic: convolution is circular and the discrete
//! Laplacian wraps around the raster edges.

pub mod alpha_search;
pub mod cli;
pub mod deconv;
mod error;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod operators;
pub mod synth;

pub use error::{DeconvError, Result};
pub use grid::{guarded_divide, rms_norm, Grid, Image, Kernel, WeightField};

/// Default guard for vanishing denominators.
pub const DEFAULT_EPS: f64 = 1e-12;
