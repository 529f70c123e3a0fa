//! Point spread function builders.

use crate::error::{DeconvError, Result};
use crate::grid::Kernel;

/// Square Gaussian PSF of side `2·radius + 1`, clipped to the square
/// support and then scaled to unit sum.
///
/// Entries depend on `dx² + dy²` only, through one floating-point
/// expression, so equal radii give bit-equal entries.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(DeconvError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if radius == 0 {
        return Err(DeconvError::InvalidParameter("radius must be at least 1".into()));
    }
    let side = 2 * radius + 1;
    let r = radius as i64;
    let two_var = 2.0 * sigma * sigma;
    let mut data = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            let r2 = (dx * dx + dy * dy) as f64;
            data.push((-r2 / two_var).exp());
        }
    }
    Kernel::normalized(side, side, data)
}

/// True when `k(dx,dy) = k(−dx,−dy)` and `k(dx,dy) = k(dy,dx)` within `tol`.
/// Non-square kernels are never symmetric under transposition.
pub fn is_symmetric(kernel: &Kernel, tol: f64) -> bool {
    if kernel.side_x() != kernel.side_y() {
        return false;
    }
    let r = kernel.radius_x() as isize;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = kernel.at(dx, dy);
            if (v - kernel.at(-dx, -dy)).abs() > tol || (v - kernel.at(dy, dx)).abs() > tol {
                return false;
            }
        }
    }
    true
}
