//! Reconstruction quality measures.
//!
//! All norms are RMS norms. [`relative_error`] and [`ftr`] need the ground
//! truth; [`residual_field`] is computed from the observation alone.

use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::fourier::{fftshift, Convolver, Fft2};
use crate::grid::{check_eps, guarded_quotient, Grid, Image, WeightField};

/// Per-iteration record written to trace CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub n: usize,
    pub alpha_n: f64,
    /// `NaN` when no truth image was supplied.
    pub rel_err: f64,
    /// `NaN` when no truth image was supplied.
    pub ftr: f64,
    pub residual_rms: f64,
    pub wall_ms: f64,
}

/// `‖g − g_n‖ / ‖g‖`.
pub fn relative_error(truth: &Image, g_n: &Image) -> Result<f64> {
    truth.ensure_same_shape(g_n)?;
    let denom = truth.rms();
    if denom == 0.0 {
        return Err(DeconvError::ZeroTruth);
    }
    Ok(truth.sub(g_n)?.rms() / denom)
}

/// Fourier transform ratio `1 − ‖ĝ_n‖ / ‖ĝ‖`, a ratio of spectral RMS norms.
pub fn ftr(truth: &Image, g_n: &Image) -> Result<f64> {
    TruthReference::new(truth)?.ftr(g_n)
}

/// Ground truth with its spectral norm cached for repeated scoring.
#[derive(Debug, Clone)]
pub struct TruthReference {
    truth: Image,
    fft: Fft2,
    spectrum_rms: f64,
}

impl TruthReference {
    pub fn new(truth: &Image) -> Result<Self> {
        let fft = Fft2::new(truth.width(), truth.height())?;
        let spectrum_rms = fft.forward(truth)?.magnitudes().rms();
        if spectrum_rms == 0.0 {
            return Err(DeconvError::ZeroTruth);
        }
        Ok(Self {
            truth: truth.clone(),
            fft,
            spectrum_rms,
        })
    }

    pub fn truth(&self) -> &Image {
        &self.truth
    }

    pub fn relative_error(&self, g_n: &Image) -> Result<f64> {
        relative_error(&self.truth, g_n)
    }

    pub fn ftr(&self, g_n: &Image) -> Result<f64> {
        self.truth.ensure_same_shape(g_n)?;
        let rms = self.fft.forward(g_n)?.magnitudes().rms();
        Ok(1.0 - rms / self.spectrum_rms)
    }
}

/// The data-consistency residual and the pixels on which it is defined.
#[derive(Debug, Clone)]
pub struct Residual {
    pub field: WeightField,
    /// `true` where `h ≥ eps`; the field is 0 elsewhere.
    pub valid: Vec<bool>,
}

impl Residual {
    pub fn rms(&self) -> f64 {
        self.field.rms()
    }
}

/// `ε_n = 1 − k∗(ϱ_n h) / h`.
pub fn residual_field(h: &Image, conv: &Convolver, rho_n: &WeightField, eps: f64) -> Result<Residual> {
    let g_n = h.mul(rho_n)?;
    residual_from_reconstruction(h, conv, &g_n, eps)
}

/// Same as [`residual_field`] for a reconstruction `g_n = h·ϱ_n` given directly.
pub fn residual_from_reconstruction(h: &Image, conv: &Convolver, g_n: &Image, eps: f64) -> Result<Residual> {
    check_eps(eps)?;
    h.ensure_same_shape(g_n)?;
    let reblurred = conv.apply(g_n)?;
    let valid: Vec<bool> = h.data().iter().map(|&v| v >= eps).collect();
    let field = reblurred.zip_with(h, |b, hv| {
        if hv >= eps {
            1.0 - guarded_quotient(b, hv, eps)
        } else {
            0.0
        }
    })?;
    Ok(Residual { field, valid })
}

/// Spectral reach `ω_R = 1/α`.
pub fn omega_reach(alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(DeconvError::UndefinedReach(alpha));
    }
    Ok(1.0 / alpha)
}

/// Per-frequency `1 − |ĝ_n| / max(|ĝ|, eps)`, DC centered, clipped to `[0, 1]`.
pub fn ftr_spectrum_image(truth: &Image, g_n: &Image, eps: f64) -> Result<Image> {
    check_eps(eps)?;
    truth.ensure_same_shape(g_n)?;
    let fft = Fft2::new(truth.width(), truth.height())?;
    let reference = fft.forward(truth)?.magnitudes();
    let recovered = fft.forward(g_n)?.magnitudes();
    let ratio = recovered.zip_with(&reference, |r, t| (1.0 - r / t.max(eps)).clamp(0.0, 1.0))?;
    Ok(fftshift(&ratio))
}

/// Trace row for a reconstruction. Truth metrics are `NaN` without a reference.
pub(crate) fn trace_row(
    n: usize,
    alpha_n: f64,
    g_n: &Grid,
    residual_rms: f64,
    truth: Option<&TruthReference>,
    wall_ms: f64,
) -> Result<IterationTrace> {
    let (rel_err, ftr) = match truth {
        Some(t) => (t.relative_error(g_n)?, t.ftr(g_n)?),
        None => (f64::NAN, f64::NAN),
    };
    Ok(IterationTrace {
        n,
        alpha_n,
        rel_err,
        ftr,
        residual_rms,
        wall_ms,
    })
}
