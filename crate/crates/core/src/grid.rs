//! Dense row-major rasters and the pointwise arithmetic shared by every
//! other module.
//!
//! Indexing is `(x, y)` with `x` the column and `y` the row; sample
//! `(x, y)` lives at `data[y * width + x]`.

use crate::error::{DeconvError, Result};

/// A dense 2D field of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// An intensity raster: observed, ground-truth or reconstructed image.
pub type Image = Grid;

/// A dimensionless field on the image grid: weights, residuals, Laplacians.
pub type WeightField = Grid;

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DeconvError::EmptyInput);
        }
        if data.len() != width * height {
            return Err(DeconvError::LengthMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Builds a grid by evaluating `f(x, y)` at every sample.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn ensure_same_shape(&self, other: &Grid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(DeconvError::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Grid> {
        self.ensure_same_shape(other)?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Grid) -> Result<Grid> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Grid) -> Result<Grid> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Grid) -> Result<Grid> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Grid {
        self.map(|v| c * v)
    }

    pub fn add_scalar(&self, c: f64) -> Grid {
        self.map(|v| v + c)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Root-mean-square of the samples.
    pub fn rms(&self) -> f64 {
        rms_of(&self.data)
    }
}

fn rms_of(values: &[f64]) -> f64 {
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    (sum_sq / values.len() as f64).sqrt()
}

/// Root-mean-square norm of a sequence of samples.
///
/// All norms in this crate are RMS norms. The sum runs sequentially, so the
/// result is independent of thread count.
pub fn rms_norm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(DeconvError::EmptyInput);
    }
    Ok(rms_of(values))
}

/// `num / den` with the denominator kept away from zero.
///
/// Exact division wherever `|den| >= eps`; inside `(-eps, eps)` the
/// denominator is replaced by `eps`.
#[inline]
pub fn guarded_quotient(num: f64, den: f64, eps: f64) -> f64 {
    if den >= eps || den <= -eps {
        num / den
    } else {
        num / eps
    }
}

/// Pointwise [`guarded_quotient`] of two fields.
pub fn guarded_divide(num: &Grid, den: &Grid, eps: f64) -> Result<Grid> {
    check_eps(eps)?;
    num.zip_with(den, |n, d| guarded_quotient(n, d, eps))
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(DeconvError::InvalidParameter(format!(
            "eps must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

/// A point spread function with odd side lengths, anchored at its center.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    side_x: usize,
    side_y: usize,
    data: Vec<f64>,
}

impl Kernel {
    /// Wraps `data` unchanged. Side lengths must be odd and values finite.
    pub fn from_raw(side_x: usize, side_y: usize, data: Vec<f64>) -> Result<Self> {
        if side_x == 0 || side_y == 0 {
            return Err(DeconvError::InvalidKernel("empty kernel".into()));
        }
        if side_x.is_multiple_of(2) || side_y.is_multiple_of(2) {
            return Err(DeconvError::InvalidKernel(format!(
                "side lengths must be odd, got {side_x}x{side_y}"
            )));
        }
        if data.len() != side_x * side_y {
            return Err(DeconvError::LengthMismatch {
                width: side_x,
                height: side_y,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DeconvError::InvalidKernel("non-finite entry".into()));
        }
        Ok(Self { side_x, side_y, data })
    }

    /// Wraps `data` and scales it to unit sum.
    pub fn normalized(side_x: usize, side_y: usize, data: Vec<f64>) -> Result<Self> {
        let mut kernel = Self::from_raw(side_x, side_y, data)?;
        let sum = kernel.sum();
        if !(sum.is_finite() && sum != 0.0) {
            return Err(DeconvError::InvalidKernel(format!(
                "cannot normalize kernel with sum {sum}"
            )));
        }
        for v in &mut kernel.data {
            *v /= sum;
        }
        Ok(kernel)
    }

    /// The 1x1 identity kernel.
    pub fn delta() -> Self {
        Self {
            side_x: 1,
            side_y: 1,
            data: vec![1.0],
        }
    }

    pub fn side_x(&self) -> usize {
        self.side_x
    }

    pub fn side_y(&self) -> usize {
        self.side_y
    }

    pub fn radius_x(&self) -> usize {
        self.side_x / 2
    }

    pub fn radius_y(&self) -> usize {
        self.side_y / 2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Entry at offset `(dx, dy)` from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let col = (dx + self.radius_x() as isize) as usize;
        let row = (dy + self.radius_y() as isize) as usize;
        self.data[row * self.side_x + col]
    }

    /// Iterates `(dx, dy, value)` over the support.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let rx = self.radius_x() as isize;
        let ry = self.radius_y() as isize;
        let sx = self.side_x;
        self.data.iter().enumerate().map(move |(i, &v)| {
            let dx = (i % sx) as isize - rx;
            let dy = (i / sx) as isize - ry;
            (dx, dy, v)
        })
    }
}
