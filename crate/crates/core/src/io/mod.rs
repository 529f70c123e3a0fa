//! File formats: grayscale images, plain-text kernels, trace CSVs and the
//! run configuration file.

pub mod config;
pub mod image;
pub mod kernel;
pub mod trace;

pub use self::config::FileConfig;
pub use self::image::{load_image, save_image, save_image_with, BitDepth, ImageEncoding};
pub use self::kernel::{load_kernel, save_kernel, LoadedKernel};
pub use self::trace::{format_trace, parse_trace, read_trace, write_trace, TRACE_HEADER};
