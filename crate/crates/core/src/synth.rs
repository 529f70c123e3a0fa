//! Deterministic smooth test images.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DeconvError, Result};
use crate::grid::Image;

const COMPONENTS: usize = 6;

/// Square image of side `size`: `0.5 + 0.4·s/max|s|` where `s` is a sum of
/// six plane sinusoids with seeded integer frequencies of at most
/// `min(8, size/4)` cycles per side. Values lie in `[0.1, 0.9]`.
pub fn synth_image(size: usize, seed: u64) -> Result<Image> {
    if size == 0 {
        return Err(DeconvError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_freq = (size / 4).clamp(1, 8) as i64;
    let waves: Vec<(f64, f64, f64, f64)> = (0..COMPONENTS)
        .map(|_| {
            let (fx, fy) = loop {
                let fx = rng.gen_range(-max_freq..=max_freq);
                let fy = rng.gen_range(-max_freq..=max_freq);
                if fx != 0 || fy != 0 {
                    break (fx, fy);
                }
            };
            let phase = rng.gen_range(0.0..2.0 * PI);
            let amplitude = rng.gen_range(0.5..1.0);
            (fx as f64, fy as f64, phase, amplitude)
        })
        .collect();

    let n = size as f64;
    let raw = Image::from_fn(size, size, |x, y| {
        waves
            .iter()
            .map(|&(fx, fy, phase, amp)| amp * (2.0 * PI * (fx * x as f64 + fy * y as f64) / n + phase).sin())
            .sum()
    })?;
    let peak = raw.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(raw.map(|_| 0.5));
    }
    Ok(raw.map(|v| 0.5 + 0.4 * v / peak))
}
