//! TOML run configuration. Keys mirror the command-line flags; every key is
//! optional and a flag given on the command line wins over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::deconv::{Algorithm, LaplacianNorm};
use crate::error::{DeconvError, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub algorithm: Option<Algorithm>,
    pub iterations: Option<usize>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub alpha_schedule: Option<Vec<f64>>,
    pub probe_iterations: Option<usize>,
    pub score_at: Option<usize>,
    pub p: Option<f64>,
    pub eps: Option<f64>,
    pub collapse_indices: Option<bool>,
    pub laplacian_norm: Option<LaplacianNorm>,
    pub record_timing: Option<bool>,
    pub observed: Option<PathBuf>,
    pub kernel: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub radius: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DeconvError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DeconvError::Read {
            path: path.into(),
            source,
        })?;
        Self::parse(&text).map_err(|e| DeconvError::Config(format!("{}: {e}", path.display())))
    }
}
