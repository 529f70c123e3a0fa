//! Grid search for a constant `α` that minimizes the RMS of the
//! observation-only residual `1 − k∗(ϱh)/h`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deconv::{run, AlphaPolicy, RunConfig};
use crate::error::{DeconvError, Result};
use crate::grid::{Image, Kernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearchConfig {
    /// Strictly increasing, finite, nonnegative.
    pub candidates: Vec<f64>,
    /// Iterations run for each candidate.
    pub probe_iterations: usize,
    /// Iteration whose residual is scored, `1..=probe_iterations`.
    pub score_at: usize,
}

impl AlphaSearchConfig {
    /// Scores at the last probe iteration.
    pub fn new(candidates: Vec<f64>, probe_iterations: usize) -> Self {
        Self {
            candidates,
            probe_iterations,
            score_at: probe_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(DeconvError::Config("alpha grid is empty".into()));
        }
        if let Some(bad) = self.candidates.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(DeconvError::Config(format!(
                "alpha candidate {bad} must be finite and >= 0"
            )));
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DeconvError::Config(
                "alpha candidates must be sorted and distinct".into(),
            ));
        }
        if self.probe_iterations == 0 || self.score_at == 0 || self.score_at > self.probe_iterations {
            return Err(DeconvError::Config(format!(
                "need 1 <= score_at ({}) <= probe_iterations ({})",
                self.score_at, self.probe_iterations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub score: f64,
    /// `(candidate, score)` in candidate order.
    pub scores: Vec<(f64, f64)>,
}

/// Residual RMS at `score_at` after probing with a constant `alpha`.
/// Non-finite or diverged runs score `+∞`.
pub fn score_alpha(h: &Image, kernel: &Kernel, cfg: &AlphaSearchConfig, base: &RunConfig, alpha: f64) -> Result<f64> {
    let probe = RunConfig {
        iterations: cfg.probe_iterations,
        alpha: AlphaPolicy::Constant(alpha),
        record_timing: false,
        ..base.clone()
    };
    let out = run(&probe, h, kernel, None)?;
    let score = out
        .trace
        .get(cfg.score_at - 1)
        .map_or(f64::INFINITY, |row| row.residual_rms);
    Ok(if score.is_finite() { score } else { f64::INFINITY })
}

/// Probes every candidate with `base`'s algorithm and settings and returns
/// the one with the smallest residual. Ties go to the smallest `α`.
pub fn search_alpha(h: &Image, kernel: &Kernel, cfg: &AlphaSearchConfig, base: &RunConfig) -> Result<AlphaChoice> {
    cfg.validate()?;
    let scores = cfg
        .candidates
        .par_iter()
        .map(|&alpha| score_alpha(h, kernel, cfg, base, alpha).map(|s| (alpha, s)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = scores[0];
    for &(alpha, score) in &scores[1..] {
        if score < best.1 {
            best = (alpha, score);
        }
    }
    Ok(AlphaChoice {
        alpha: best.0,
        score: best.1,
        scores,
    })
}
