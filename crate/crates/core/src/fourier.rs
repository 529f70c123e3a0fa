//! 2D discrete Fourier transforms and circular convolution.
//!
//! The forward transform is unnormalized and the inverse carries the
//! `1/(W·H)` factor. Spectra use the standard DFT layout with DC at `(0, 0)`.
//! Rows and columns are transformed independently, in parallel, and each
//! 1D transform is evaluated identically whatever the thread count, so
//! results are bit-reproducible.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{DeconvError, Result};
use crate::grid::{Grid, Image, Kernel};

/// Complex coefficients of a 2D DFT, row-major, DC at index `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Coefficient at frequency index `(u, v)`, `u` along x.
    pub fn at(&self, u: usize, v: usize) -> Complex64 {
        self.data[v * self.width + u]
    }

    /// `|F(u, v)|` for every coefficient.
    pub fn magnitudes(&self) -> Grid {
        let data = self.data.iter().map(|c| c.norm()).collect();
        Grid::new(self.width, self.height, data).expect("spectrum shape is valid")
    }

    /// Largest `|F(u,v) − conj F(−u,−v)|`; zero for the transform of a real field.
    pub fn hermitian_defect(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut worst: f64 = 0.0;
        for v in 0..h {
            for u in 0..w {
                let mirror = self.at((w - u) % w, (h - v) % h).conj();
                worst = worst.max((self.at(u, v) - mirror).norm());
            }
        }
        worst
    }
}

/// Planned 2D transforms for one raster shape.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_forward: Arc<dyn Fft<f64>>,
    row_inverse: Arc<dyn Fft<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DeconvError::EmptyInput);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            width,
            height,
            row_forward: planner.plan_fft_forward(width),
            row_inverse: planner.plan_fft_inverse(width),
            col_forward: planner.plan_fft_forward(height),
            col_inverse: planner.plan_fft_inverse(height),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn forward(&self, img: &Grid) -> Result<Spectrum> {
        self.check_shape(img.shape())?;
        let mut data: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        Ok(Spectrum {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self, spectrum: &Spectrum) -> Result<Grid> {
        self.check_shape((spectrum.width, spectrum.height))?;
        let mut data = spectrum.data.clone();
        Ok(self.inverse_in_place(&mut data))
    }

    fn inverse_in_place(&self, data: &mut [Complex64]) -> Grid {
        self.transform(data, true);
        let scale = 1.0 / (self.width * self.height) as f64;
        let real = data.iter().map(|c| c.re * scale).collect();
        Grid::new(self.width, self.height, real).expect("shape checked")
    }

    fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        if shape != (self.width, self.height) {
            return Err(DeconvError::ShapeMismatch {
                left: shape,
                right: (self.width, self.height),
            });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inverse, &self.col_inverse)
        } else {
            (&self.row_forward, &self.col_forward)
        };
        process_rows(row, data, self.width);
        let mut transposed = transpose(data, self.width, self.height);
        process_rows(col, &mut transposed, self.height);
        let back = transpose(&transposed, self.height, self.width);
        data.copy_from_slice(&back);
    }
}

fn process_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], row_len: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(row_len).for_each_init(
        || vec![Complex64::default(); scratch_len],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// Transposes a `rows x cols` row-major buffer.
fn transpose(data: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); data.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, dst)| {
        for (r, slot) in dst.iter_mut().enumerate() {
            *slot = data[r * cols + c];
        }
    });
    out
}

pub fn fft2(img: &Image) -> Result<Spectrum> {
    Fft2::new(img.width(), img.height())?.forward(img)
}

pub fn ifft2(spectrum: &Spectrum) -> Result<Image> {
    Fft2::new(spectrum.width, spectrum.height)?.inverse(spectrum)
}

/// Embeds `kernel` in a `width x height` zero raster with its center at
/// `(0, 0)` and negative offsets wrapped to the far edges.
pub fn pad_kernel(kernel: &Kernel, width: usize, height: usize) -> Result<Grid> {
    if kernel.side_x() > width || kernel.side_y() > height {
        return Err(DeconvError::KernelTooLarge {
            kernel: (kernel.side_x(), kernel.side_y()),
            image: (width, height),
        });
    }
    let mut padded = Grid::zeros(width, height)?;
    for (dx, dy, v) in kernel.offsets() {
        let x = dx.rem_euclid(width as isize) as usize;
        let y = dy.rem_euclid(height as isize) as usize;
        padded.set(x, y, v);
    }
    Ok(padded)
}

/// Circular convolution with a fixed kernel on a fixed raster shape.
///
/// The kernel spectrum is computed once, so repeated applications cost two
/// 2D transforms each.
#[derive(Debug, Clone)]
pub struct Convolver {
    fft: Fft2,
    kernel: Kernel,
    transfer: Vec<Complex64>,
}

impl Convolver {
    pub fn new(kernel: &Kernel, width: usize, height: usize) -> Result<Self> {
        let fft = Fft2::new(width, height)?;
        let padded = pad_kernel(kernel, width, height)?;
        let transfer = fft.forward(&padded)?.data;
        Ok(Self {
            fft,
            kernel: kernel.clone(),
            transfer,
        })
    }

    pub fn for_image(kernel: &Kernel, img: &Image) -> Result<Self> {
        Self::new(kernel, img.width(), img.height())
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn shape(&self) -> (usize, usize) {
        self.fft.shape()
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Kernel transfer function in DFT layout.
    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        let mut spectrum = self.fft.forward(img)?;
        for (s, t) in spectrum.data.iter_mut().zip(&self.transfer) {
            *s *= *t;
        }
        Ok(self.fft.inverse_in_place(&mut spectrum.data))
    }
}

/// Circular convolution `k ∗ img`.
pub fn convolve(img: &Image, kernel: &Kernel) -> Result<Image> {
    Convolver::for_image(kernel, img)?.apply(img)
}

/// Moves the DC sample to the raster center: source `(0,0)` lands at
/// `(W/2, H/2)`.
pub fn fftshift(grid: &Grid) -> Grid {
    let (w, h) = grid.shape();
    Grid::from_fn(w, h, |x, y| {
        let sx = (x + w - w / 2) % w;
        let sy = (y + h - h / 2) % h;
        grid.get(sx, sy)
    })
    .expect("shape is valid")
}

/// `log(1 + |F|)` with DC centered, for display.
pub fn power_spectrum_image(img: &Image) -> Result<Image> {
    let magnitudes = fft2(img)?.magnitudes();
    Ok(fftshift(&magnitudes.map(f64::ln_1p)))
}
