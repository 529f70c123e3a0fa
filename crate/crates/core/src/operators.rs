//! Discrete Laplacian, its normalized correction term, the exponential-limit
//! operator and the Von Neumann reference iterator.

use std::f64::consts::PI;

use crate::error::{DeconvError, Result};
use crate::fourier::Convolver;
use crate::grid::{Grid, Image, WeightField};

/// Periodic 5-point Laplacian:
/// `L(x,y) = f(x+1,y) + f(x−1,y) + f(x,y+1) + f(x,y−1) − 4 f(x,y)`.
pub fn laplacian(f: &WeightField) -> Result<WeightField> {
    let (w, h) = f.shape();
    if w < 3 || h < 3 {
        return Err(DeconvError::FieldTooSmall { width: w, height: h });
    }
    let src = f.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        let up = if y == 0 { h - 1 } else { y - 1 };
        let down = if y + 1 == h { 0 } else { y + 1 };
        let row = &src[y * w..(y + 1) * w];
        let row_up = &src[up * w..(up + 1) * w];
        let row_down = &src[down * w..(down + 1) * w];
        let dst = &mut out[y * w..(y + 1) * w];
        for x in 0..w {
            let left = if x == 0 { row[w - 1] } else { row[x - 1] };
            let right = if x + 1 == w { row[0] } else { row[x + 1] };
            dst[x] = right + left + row_down[x] + row_up[x] - 4.0 * row[x];
        }
    }
    Grid::new(w, h, out)
}

/// Eigenvalue magnitude `λ` of the periodic Laplacian for frequency
/// `(u, v)`: the mode is multiplied by `−λ`.
pub fn laplacian_eigenvalue(width: usize, height: usize, u: usize, v: usize) -> f64 {
    let sx = (PI * u as f64 / width as f64).sin();
    let sy = (PI * v as f64 / height as f64).sin();
    4.0 * sx * sx + 4.0 * sy * sy
}

/// Operator 2-norm (spectral radius) of the periodic Laplacian on a
/// `width x height` grid. Equals 8 when both sides are even.
pub fn laplacian_operator_norm(width: usize, height: usize) -> f64 {
    let axis = |n: usize| {
        (0..n)
            .map(|k| {
                let s = (PI * k as f64 / n as f64).sin();
                4.0 * s * s
            })
            .fold(0.0, f64::max)
    };
    axis(width) + axis(height)
}

/// The Laplacian of a weight field together with the norm that scales it.
#[derive(Debug, Clone)]
pub struct LaplacianTerm {
    pub field: WeightField,
    pub norm: f64,
    pub p: f64,
}

impl LaplacianTerm {
    /// `field / max(norm^p, eps)`.
    pub fn scaled(&self, eps: f64) -> WeightField {
        let denom = self.norm.powf(self.p).max(eps);
        self.field.map(|v| v / denom)
    }
}

/// Laplacian with its own RMS norm: the term is normalized by the size of
/// the derivative field it carries.
pub fn normalized_laplacian_term(f: &WeightField, p: f64) -> Result<LaplacianTerm> {
    check_exponent(p)?;
    let field = laplacian(f)?;
    let norm = field.rms();
    Ok(LaplacianTerm { field, norm, p })
}

/// Laplacian paired with the operator norm of the discrete Laplacian on
/// this grid.
pub fn operator_laplacian_term(f: &WeightField, p: f64) -> Result<LaplacianTerm> {
    check_exponent(p)?;
    let field = laplacian(f)?;
    let norm = laplacian_operator_norm(f.width(), f.height());
    Ok(LaplacianTerm { field, norm, p })
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() {
        return Err(DeconvError::InvalidParameter(format!("p must be finite, got {p}")));
    }
    Ok(())
}

/// One step `f − (α²/n)∇²f`.
pub fn exp_limit_step(f: &WeightField, alpha: f64, n: usize) -> Result<WeightField> {
    let lap = laplacian(f)?;
    let c = alpha * alpha / n as f64;
    f.zip_with(&lap, |v, l| v - c * l)
}

/// Applies `(I − (α²/m)∇²)` for `m = 1..=n_steps` in turn.
///
/// On a Laplacian eigenmode with eigenvalue `−λ` the overall multiplier is
/// `∏(1 + α²λ/m)`.
pub fn exp_limit_apply(f: &WeightField, alpha: f64, n_steps: usize) -> Result<WeightField> {
    if n_steps == 0 {
        return Err(DeconvError::InvalidParameter("n_steps must be at least 1".into()));
    }
    let mut current = f.clone();
    for m in 1..=n_steps {
        current = exp_limit_step(&current, alpha, m)?;
    }
    Ok(current)
}

/// Applies `(I − (α²/n)∇²)` `n` times with a fixed `n`, the finite form of
/// `lim (1 − α²∇²/n)^n = exp(−α²∇²)`.
pub fn exp_limit_apply_uniform(f: &WeightField, alpha: f64, n: usize) -> Result<WeightField> {
    if n == 0 {
        return Err(DeconvError::InvalidParameter("n must be at least 1".into()));
    }
    let mut current = f.clone();
    for _ in 0..n {
        current = exp_limit_step(&current, alpha, n)?;
    }
    Ok(current)
}

/// Partial-sum recurrence of `Σ (I − k∗)ⁿ h`: `g_{n+1} = h + g_n − k∗g_n`.
pub fn von_neumann_step(g_n: &Image, h: &Image, conv: &Convolver) -> Result<Image> {
    g_n.ensure_same_shape(h)?;
    let blurred = conv.apply(g_n)?;
    let mut out = h.clone();
    for ((o, &g), &b) in out.data_mut().iter_mut().zip(g_n.data()).zip(blurred.data()) {
        *o += g - b;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Kernel;
    use crate::kernels::gaussian_kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sinusoid(w: usize, h: usize) -> Grid {
        Grid::from_fn(w, h, |x, _| (2.0 * PI * x as f64 / w as f64).sin()).unwrap()
    }

    fn rel_rms(a: &Grid, b: &Grid) -> f64 {
        a.sub(b).unwrap().rms() / b.rms()
    }

    #[test]
    fn constant_is_annihilated() {
        let out = laplacian(&Grid::filled(5, 4, 3.25).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinusoid_is_eigenfunction() {
        let (w, h) = (16, 8);
        let f = sinusoid(w, h);
        let lambda = 2.0 - 2.0 * (2.0 * PI / w as f64).cos();
        assert!((lambda - laplacian_eigenvalue(w, h, 1, 0)).abs() < 1e-14);
        let out = laplacian(&f).unwrap();
        assert!(rel_rms(&out, &f.scale(-lambda)) < 1e-12);
    }

    #[test]
    fn matches_naive_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Grid::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let out = laplacian(&f).unwrap();
        let (w, h) = (8i64, 8i64);
        for y in 0..h {
            for x in 0..w {
                let at = |xx: i64, yy: i64| f.get(xx.rem_euclid(w) as usize, yy.rem_euclid(h) as usize);
                let want = at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) - 4.0 * at(x, y);
                assert!((out.get(x as usize, y as usize) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn too_small_field_is_rejected() {
        assert!(matches!(
            laplacian(&Grid::zeros(2, 5).unwrap()),
            Err(DeconvError::FieldTooSmall { .. })
        ));
    }

    #[test]
    fn laplacian_sums_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Grid::from_fn(13, 9, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        assert!(laplacian(&f).unwrap().sum().abs() < 1e-10);
    }

    #[test]
    fn operator_norm_is_spectral_radius() {
        assert_eq!(laplacian_operator_norm(8, 16), 8.0);
        let odd = laplacian_operator_norm(5, 5);
        let s = (2.0 * PI / 5.0).sin();
        assert!((odd - 8.0 * s * s).abs() < 1e-14);
        // power iteration on a random field never exceeds it
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut f = Grid::from_fn(8, 6, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let mut gain = 0.0;
        for _ in 0..200 {
            let next = laplacian(&f).unwrap();
            gain = next.rms() / f.rms();
            f = next.scale(1.0 / next.rms());
        }
        assert!((gain - 8.0).abs() < 1e-6);
    }

    #[test]
    fn normalized_term_examples() {
        let constant = normalized_laplacian_term(&Grid::filled(6, 6, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(constant.norm, 0.0);
        assert!(constant.scaled(1e-12).data().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = Grid::from_fn(6, 6, |_, _| rng.gen::<f64>()).unwrap();
        let raw = normalized_laplacian_term(&f, 0.0).unwrap();
        assert_eq!(raw.scaled(1e-12), laplacian(&f).unwrap());
        assert_eq!(raw.norm, raw.field.rms());

        let sin = normalized_laplacian_term(&sinusoid(16, 16), 1.0).unwrap();
        assert!((sin.scaled(1e-12).rms() - 1.0).abs() < 1e-12);

        assert!(normalized_laplacian_term(&f, f64::NAN).is_err());
    }

    #[test]
    fn operator_term_uses_fixed_norm() {
        let term = operator_laplacian_term(&sinusoid(16, 8), 1.0).unwrap();
        assert_eq!(term.norm, 8.0);
        assert_eq!(term.scaled(1e-12), term.field.scale(1.0 / 8.0));
    }

    #[test]
    fn exp_limit_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = Grid::from_fn(7, 7, |_, _| rng.gen::<f64>()).unwrap();
        assert_eq!(exp_limit_apply(&f, 0.0, 17).unwrap(), f);
        let c = Grid::filled(7, 7, 0.4).unwrap();
        assert_eq!(exp_limit_apply(&c, 1.3, 9).unwrap(), c);
        assert!(exp_limit_apply(&f, 1.0, 0).is_err());
    }

    #[test]
    fn exp_limit_multiplier_matches_scalar_product() {
        // α²·λ_max ≤ 1 keeps roundoff in the top mode from being amplified
        let (w, h) = (32, 8);
        let f = sinusoid(w, h);
        let lambda = laplacian_eigenvalue(w, h, 1, 0);
        let alpha = 0.35;
        let mut multiplier = 1.0;
        for m in 1..=256 {
            multiplier *= 1.0 + alpha * alpha * lambda / m as f64;
        }
        let out = exp_limit_apply(&f, alpha, 256).unwrap();
        assert!(rel_rms(&out, &f.scale(multiplier)) < 1e-12);
    }

    #[test]
    fn exactly_representable_mode_tolerates_large_alpha() {
        // entries 0, ±1 keep every step exact up to a common rounding
        let (w, h) = (16, 8);
        let lambda = laplacian_eigenvalue(w, h, w / 4, 0);
        assert_eq!(lambda.round(), 2.0);
        let alpha = (0.5f64).sqrt();
        let mut multiplier = 1.0;
        for m in 1..=256 {
            multiplier *= 1.0 + alpha * alpha * 2.0 / m as f64;
        }
        let f = Grid::from_fn(w, h, |x, _| [0.0, 1.0, 0.0, -1.0][x % 4]).unwrap();
        let out = exp_limit_apply(&f, alpha, 256).unwrap();
        assert!(rel_rms(&out, &f.scale(multiplier)) < 1e-12);
    }

    #[test]
    fn von_neumann_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = Grid::from_fn(8, 8, |_, _| rng.gen::<f64>()).unwrap();
        let g = Grid::from_fn(8, 8, |_, _| rng.gen::<f64>()).unwrap();
        let delta = Convolver::for_image(&Kernel::delta(), &h).unwrap();
        assert!(von_neumann_step(&g, &h, &delta).unwrap().sub(&h).unwrap().rms() < 1e-14);
        assert!(von_neumann_step(&h, &h, &delta).unwrap().sub(&h).unwrap().rms() < 1e-14);
        assert!(von_neumann_step(&g, &Grid::zeros(4, 4).unwrap(), &delta).is_err());
    }

    #[test]
    fn von_neumann_fixed_point_and_residual_decay() {
        let (w, h) = (16, 16);
        let truth = Grid::from_fn(w, h, |x, y| {
            0.5 + 0.3 * (2.0 * PI * x as f64 / w as f64).sin() * (2.0 * PI * y as f64 / h as f64).cos()
        })
        .unwrap();
        let conv = Convolver::for_image(&gaussian_kernel(1.0, 3).unwrap(), &truth).unwrap();
        let blurred = conv.apply(&truth).unwrap();

        let fixed = von_neumann_step(&truth, &blurred, &conv).unwrap();
        assert!(fixed.sub(&truth).unwrap().rms() < 1e-14);

        let mut g = blurred.clone();
        let mut last = f64::INFINITY;
        // decreasing until it reaches the roundoff floor
        for _ in 0..20 {
            g = von_neumann_step(&g, &blurred, &conv).unwrap();
            let residual = conv.apply(&g).unwrap().sub(&blurred).unwrap().rms();
            if last < 1e-13 {
                assert!(residual < 1e-13);
            } else {
                assert!(residual < last);
            }
            last = residual;
        }
    }
}
