//! Plain-text kernel grids: a `W H` line followed by `H` rows of `W` reals.
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{DeconvError, Result};
use crate::grid::Kernel;

/// Sums within this distance of 1 are taken as already normalized.
const UNIT_SUM_TOL: f64 = 1e-12;
/// Sums further than this from 1 deserve a warning.
const WARN_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LoadedKernel {
    pub kernel: Kernel,
    /// Sum of the entries as read, before normalization.
    pub raw_sum: f64,
}

impl LoadedKernel {
    pub fn warning(&self) -> Option<String> {
        ((self.raw_sum - 1.0).abs() > WARN_TOL)
            .then(|| format!("kernel entries summed to {}; normalized to unit sum", self.raw_sum))
    }
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<LoadedKernel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DeconvError::Read {
        path: path.into(),
        source,
    })?;
    parse_kernel(&text).map_err(|e| match e {
        DeconvError::Format { message, .. } => DeconvError::format(path, message),
        other => DeconvError::format(path, other.to_string()),
    })
}

pub fn parse_kernel(text: &str) -> Result<LoadedKernel> {
    let bad = |m: String| DeconvError::format("<kernel>", m);
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());

    let header = lines.next().ok_or_else(|| bad("empty kernel file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(bad(format!("expected `W H` header, got `{header}`")));
    }
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("invalid dimension `{s}`")));
    let (width, height) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if width == 0 || height == 0 || width % 2 == 0 || height % 2 == 0 {
        return Err(bad(format!("kernel sides must be odd, got {width}x{height}")));
    }

    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("expected {height} rows, found {row}")))?;
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("non-numeric token `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != width {
            return Err(bad(format!(
                "row {} has {} values, expected {width}",
                row + 1,
                values.len()
            )));
        }
        data.extend(values);
    }
    if lines.next().is_some() {
        return Err(bad(format!("more than {height} rows")));
    }

    let raw = Kernel::from_raw(width, height, data)?;
    let raw_sum = raw.sum();
    let kernel = if (raw_sum - 1.0).abs() <= UNIT_SUM_TOL {
        raw
    } else {
        Kernel::normalized(width, height, raw.data().to_vec())?
    };
    Ok(LoadedKernel { kernel, raw_sum })
}

/// Entries written with 17 significant digits, so a reload is bit-exact.
pub fn format_kernel(kernel: &Kernel) -> String {
    let mut out = format!("{} {}\n", kernel.side_x(), kernel.side_y());
    for row in kernel.data().chunks(kernel.side_x()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn save_kernel(kernel: &Kernel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_kernel(kernel)).map_err(|source| DeconvError::Write {
        path: path.into(),
        source,
    })
}
