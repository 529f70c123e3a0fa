//! Command-line front end of the `deconv` binary.
//!
//! Exit codes: 0 success, 2 numerical divergence, 64 usage or configuration
//! error, 65 malformed data, 66 unreadable input, 73 unwritable output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::alpha_search::AlphaSearchConfig;
use crate::deconv::{run, Algorithm, AlphaPolicy, LaplacianNorm, RunConfig, RunOutput};
use crate::error::{DeconvError, Result};
use crate::fourier::convolve;
use crate::grid::{Image, Kernel};
use crate::io::image::{BitDepth, ImageEncoding};
use crate::io::{load_image, load_kernel, save_image_with, write_trace, FileConfig};
use crate::kernels::gaussian_kernel;
use crate::metrics::ftr_spectrum_image;
use crate::synth::synth_image;

pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

/// Candidates tried when no α is given.
pub const DEFAULT_ALPHA_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
pub const DEFAULT_PROBE_ITERATIONS: usize = 16;

pub const THREADS_ENV: &str = "DECONV_THREADS";

#[derive(Debug, Parser)]
#[command(name = "deconv", version, about = "Weight-function image deconvolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blur an image with a kernel (circular convolution).
    Blur {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Deconvolve an observed image.
    Deconv(Box<DeconvArgs>),
    /// Run rl and cauchy31 side by side against a known truth.
    Compare(Box<CompareArgs>),
    /// Export the per-frequency transfer ratio of a reconstruction.
    Spectrum {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = crate::DEFAULT_EPS)]
        eps: f64,
    },
    /// Write a deterministic smooth test image.
    Synth {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Plain-text kernel grid.
    #[arg(long, conflicts_with = "sigma")]
    kernel: Option<PathBuf>,
    /// Build a Gaussian kernel with this standard deviation instead.
    #[arg(long)]
    sigma: Option<f64>,
    /// Gaussian radius; defaults to ceil(3·sigma).
    #[arg(long)]
    radius: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Bits per sample of written images, 8 or 16.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(8..=16))]
    depth: u32,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, conflicts_with_all = ["alpha_grid", "alpha_schedule"])]
    alpha: Option<f64>,
    /// Comma-separated candidates for the α grid search.
    #[arg(long, value_delimiter = ',', conflicts_with = "alpha_schedule")]
    alpha_grid: Option<Vec<f64>>,
    /// Comma-separated α for iterations 1, 2, ...
    #[arg(long, value_delimiter = ',')]
    alpha_schedule: Option<Vec<f64>>,
    #[arg(long)]
    probe_iters: Option<usize>,
    #[arg(long)]
    score_at: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// `operator` or `field`.
    #[arg(long)]
    laplacian_norm: Option<LaplacianNorm>,
    /// Use ϱ_{n−1} and ϱ_n as written instead of ϱ_n for both.
    #[arg(long)]
    verbatim_indices: bool,
    /// Record per-iteration wall time in the trace.
    #[arg(long)]
    timing: bool,
    /// TOML file with defaults for any of the above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DeconvArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let pool = match thread_pool() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(err: &DeconvError) -> i32 {
    match err {
        DeconvError::Read { .. } => EXIT_NO_INPUT,
        DeconvError::Write { .. } => EXIT_CANT_CREATE,
        DeconvError::Config(_) | DeconvError::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| DeconvError::Config(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DeconvError::Config(format!("cannot start thread pool: {e}")))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Blur {
            input,
            kernel,
            out,
            output,
        } => {
            distinct_paths(&[Some(&input), kernel.kernel.as_ref(), Some(&out)])?;
            let h = load_image(&input)?;
            let k = resolve_kernel(&kernel, &FileConfig::default())?;
            save(&convolve(&h, &k)?, &out, output.depth)?;
            Ok(0)
        }
        Command::Deconv(args) => cmd_deconv(*args),
        Command::Compare(args) => cmd_compare(*args),
        Command::Spectrum { truth, input, out, eps } => {
            distinct_paths(&[Some(&truth), Some(&input), Some(&out)])?;
            let truth = load_image(&truth)?;
            let g = load_image(&input)?;
            save(&ftr_spectrum_image(&truth, &g, eps)?, &out, 8)?;
            Ok(0)
        }
        Command::Synth {
            size,
            seed,
            out,
            output,
        } => {
            save(&synth_image(size, seed)?, &out, output.depth)?;
            Ok(0)
        }
    }
}

fn cmd_deconv(args: DeconvArgs) -> Result<i32> {
    let file = load_file_config(&args.solver)?;
    let input = required(args.input.or_else(|| file.observed.clone()), "--in")?;
    let out = required(args.out.or_else(|| file.output.clone()), "--out")?;
    let trace_path = args.trace.or_else(|| file.trace.clone());
    let truth_path = args.truth.or_else(|| file.truth.clone());
    let kernel_path = args.kernel.kernel.clone().or_else(|| file.kernel.clone());
    distinct_paths(&[
        Some(&input),
        kernel_path.as_ref(),
        truth_path.as_ref(),
        Some(&out),
        trace_path.as_ref(),
        args.solver.config.as_ref(),
    ])?;

    let algorithm = args.algo.or(file.algorithm).unwrap_or(Algorithm::Cauchy31);
    let config = run_config(algorithm, &args.solver, &file)?;
    let h = load_image(&input)?;
    let kernel = resolve_kernel(&args.kernel, &file)?;
    let truth = truth_path.map(load_image).transpose()?;

    let result = run(&config, &h, &kernel, truth.as_ref())?;
    report_alpha(algorithm, &result);
    if let Some(last) = result.last() {
        if truth.is_some() {
            println!("{algorithm} rel_err {:.6e} ftr {:.6e}", last.rel_err, last.ftr);
        }
    }
    save(&result.image, &out, args.output.depth)?;
    if let Some(path) = &trace_path {
        write_trace(&result.trace, path)?;
    }
    Ok(divergence_code(&[&result]))
}

fn cmd_compare(args: CompareArgs) -> Result<i32> {
    let file = load_file_config(&args.solver)?;
    distinct_paths(&[
        Some(&args.input),
        args.kernel.kernel.as_ref(),
        Some(&args.truth),
        args.solver.config.as_ref(),
    ])?;
    let h = load_image(&args.input)?;
    let kernel = resolve_kernel(&args.kernel, &file)?;
    let truth = load_image(&args.truth)?;
    let eps = args.solver.eps.or(file.eps).unwrap_or(crate::DEFAULT_EPS);

    let rl = run(
        &run_config(Algorithm::Rl, &args.solver, &file)?,
        &h,
        &kernel,
        Some(&truth),
    )?;
    let cauchy = run(
        &run_config(Algorithm::Cauchy31, &args.solver, &file)?,
        &h,
        &kernel,
        Some(&truth),
    )?;
    report_alpha(Algorithm::Cauchy31, &cauchy);

    fs::create_dir_all(&args.out_dir).map_err(|source| DeconvError::Write {
        path: args.out_dir.clone(),
        source,
    })?;
    for (name, result) in [("rl", &rl), ("cauchy31", &cauchy)] {
        let dir = &args.out_dir;
        write_trace(&result.trace, dir.join(format!("{name}_trace.csv")))?;
        save(&result.image, &dir.join(format!("{name}.pgm")), args.output.depth)?;
        save(
            &ftr_spectrum_image(&truth, &result.image, eps)?,
            &dir.join(format!("{name}_ftr.pgm")),
            8,
        )?;
    }

    let final_err = |r: &RunOutput| r.last().map_or(f64::NAN, |t| t.rel_err);
    let (rl_err, cauchy_err) = (final_err(&rl), final_err(&cauchy));
    println!("rl_rel_err {rl_err:.6e}");
    println!("cauchy31_rel_err {cauchy_err:.6e}");
    println!("cauchy31_rel_err <= rl_rel_err: {}", cauchy_err <= rl_err);
    Ok(divergence_code(&[&rl, &cauchy]))
}

fn report_alpha(algorithm: Algorithm, result: &RunOutput) {
    if let Some(choice) = &result.alpha_choice {
        println!("{algorithm} alpha {} (residual {:.6e})", choice.alpha, choice.score);
    }
}

fn divergence_code(results: &[&RunOutput]) -> i32 {
    if results.iter().any(|r| r.diverged) {
        eprintln!("error: iteration diverged");
        EXIT_DIVERGED
    } else {
        0
    }
}

fn load_file_config(solver: &SolverArgs) -> Result<FileConfig> {
    solver
        .config
        .as_ref()
        .map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
}

fn required(path: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    path.ok_or_else(|| DeconvError::Config(format!("{flag} is required")))
}

fn distinct_paths(paths: &[Option<&PathBuf>]) -> Result<()> {
    let present: Vec<&PathBuf> = paths.iter().flatten().copied().collect();
    for (i, a) in present.iter().enumerate() {
        if present[i + 1..].contains(a) {
            return Err(DeconvError::Config(format!("path {} used twice", a.display())));
        }
    }
    Ok(())
}

/// Flags first, then the file; a file path beats a file sigma.
fn resolve_kernel(args: &KernelArgs, file: &FileConfig) -> Result<Kernel> {
    let gaussian = |sigma: f64| {
        let radius = args
            .radius
            .or(file.radius)
            .unwrap_or_else(|| (3.0 * sigma).ceil().max(0.0) as usize);
        gaussian_kernel(sigma, radius)
    };
    if let Some(path) = &args.kernel {
        return from_file(path);
    }
    if let Some(sigma) = args.sigma {
        return gaussian(sigma);
    }
    if let Some(path) = &file.kernel {
        return from_file(path);
    }
    if let Some(sigma) = file.sigma {
        return gaussian(sigma);
    }
    Err(DeconvError::Config("either --kernel or --sigma is required".into()))
}

fn from_file(path: &Path) -> Result<Kernel> {
    let loaded = load_kernel(path)?;
    if let Some(warning) = loaded.warning() {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok(loaded.kernel)
}

fn run_config(algorithm: Algorithm, s: &SolverArgs, file: &FileConfig) -> Result<RunConfig> {
    let defaults = RunConfig::default();
    let probe_iterations = s
        .probe_iters
        .or(file.probe_iterations)
        .unwrap_or(DEFAULT_PROBE_ITERATIONS);
    let score_at = s.score_at.or(file.score_at).unwrap_or(probe_iterations);
    let grid = |candidates: Vec<f64>| {
        AlphaPolicy::GridSearch(AlphaSearchConfig {
            candidates,
            probe_iterations,
            score_at,
        })
    };

    let file_policies = [
        file.alpha.is_some(),
        file.alpha_grid.is_some(),
        file.alpha_schedule.is_some(),
    ];
    if file_policies.iter().filter(|&&set| set).count() > 1 {
        return Err(DeconvError::Config(
            "config file sets more than one of alpha, alpha_grid, alpha_schedule".into(),
        ));
    }
    let alpha = if let Some(a) = s.alpha {
        AlphaPolicy::Constant(a)
    } else if let Some(g) = &s.alpha_grid {
        grid(g.clone())
    } else if let Some(v) = &s.alpha_schedule {
        AlphaPolicy::Schedule(v.clone())
    } else if let Some(a) = file.alpha {
        AlphaPolicy::Constant(a)
    } else if let Some(g) = &file.alpha_grid {
        grid(g.clone())
    } else if let Some(v) = &file.alpha_schedule {
        AlphaPolicy::Schedule(v.clone())
    } else {
        grid(DEFAULT_ALPHA_GRID.to_vec())
    };

    let config = RunConfig {
        algorithm,
        iterations: s.iters.or(file.iterations).unwrap_or(defaults.iterations),
        alpha,
        p: s.p.or(file.p).unwrap_or(defaults.p),
        eps: s.eps.or(file.eps).unwrap_or(defaults.eps),
        collapse_indices: !s.verbatim_indices && file.collapse_indices.unwrap_or(defaults.collapse_indices),
        laplacian_norm: s
            .laplacian_norm
            .or(file.laplacian_norm)
            .unwrap_or(defaults.laplacian_norm),
        record_timing: s.timing || file.record_timing.unwrap_or(defaults.record_timing),
    };
    config.validate()?;
    Ok(config)
}

fn save(img: &Image, path: &Path, depth: u32) -> Result<()> {
    let depth = BitDepth::from_bits(depth)?;
    save_image_with(img, path, ImageEncoding::for_path(path, depth))
}
