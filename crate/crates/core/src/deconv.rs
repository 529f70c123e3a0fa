//! Deconvolution iterations and the multi-iteration driver.
//!
//! The Cauchy variants evolve a weight field `ϱ` with `g = h·ϱ`, starting
//! from `ϱ₀ = h / (k∗h)`:
//!
//! * `cauchy20`: `ϱ ← ϱ − (α²/n)∇²ϱ`, the pure exponential-limit recurrence.
//! * `cauchy25`: `ϱ_{n+1} = h/(k∗(hϱ_{n−1})) · [ϱ_{n−1} − (α²/n)∇²ϱ_{n−1}]`.
//! * `cauchy31`: `ϱ_{n+1} = [h/(k∗(hϱ_n)) ∗ k] · [ϱ_{n−1} − α²∇²ϱ_{n−1}/‖∇²‖^p]`.
//!
//! The two-step variants need two history entries and start from
//! `ϱ₁ = ϱ₀`. With `collapse_indices` (the default) every `ϱ_{n−1}` is
//! replaced by `ϱ_n`. The literal mixed-index form is unstable: a uniform
//! scale error `c` obeys `log c_{n+1} = log c_{n−1} − log c_n` and grows
//! like a Fibonacci sequence.
//!
//! `rl` and `von-neumann` iterate the image directly from `g₀ = h·ϱ₀`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alpha_search::{search_alpha, AlphaChoice, AlphaSearchConfig};
use crate::error::{DeconvError, Result};
use crate::fourier::Convolver;
use crate::grid::{check_eps, guarded_divide, Image, Kernel, WeightField};
use crate::metrics::{residual_from_reconstruction, trace_row, IterationTrace, TruthReference};
use crate::operators::{laplacian, normalized_laplacian_term, operator_laplacian_term, von_neumann_step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rl,
    VonNeumann,
    Cauchy20,
    Cauchy25,
    Cauchy31,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Rl,
        Algorithm::VonNeumann,
        Algorithm::Cauchy20,
        Algorithm::Cauchy25,
        Algorithm::Cauchy31,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rl => "rl",
            Algorithm::VonNeumann => "von-neumann",
            Algorithm::Cauchy20 => "cauchy20",
            Algorithm::Cauchy25 => "cauchy25",
            Algorithm::Cauchy31 => "cauchy31",
        }
    }

    /// Whether the algorithm iterates the weight field rather than the image.
    pub fn is_weight_space(self) -> bool {
        matches!(self, Algorithm::Cauchy20 | Algorithm::Cauchy25 | Algorithm::Cauchy31)
    }

    pub fn uses_alpha(self) -> bool {
        self.is_weight_space()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = DeconvError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| DeconvError::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Which norm divides the Laplacian correction of `cauchy31`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianNorm {
    /// Spectral radius of the discrete Laplacian on the grid (8 for even sides).
    #[default]
    Operator,
    /// RMS of the Laplacian field itself. Its correction has RMS `α²`
    /// whatever the signal, which diverges for moderate α.
    Field,
}

impl FromStr for LaplacianNorm {
    type Err = DeconvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operator" => Ok(LaplacianNorm::Operator),
            "field" => Ok(LaplacianNorm::Field),
            _ => Err(DeconvError::Config(format!("unknown laplacian norm `{s}`"))),
        }
    }
}

/// How `α_n` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaPolicy {
    Constant(f64),
    /// `schedule[n − 1]` at iteration `n`.
    Schedule(Vec<f64>),
    /// Pick a constant by [`search_alpha`] before the first iteration.
    GridSearch(AlphaSearchConfig),
}

impl AlphaPolicy {
    fn validate(&self, iterations: usize) -> Result<()> {
        let check = |a: f64| {
            if a.is_finite() && a >= 0.0 {
                Ok(())
            } else {
                Err(DeconvError::Config(format!("alpha must be finite and >= 0, got {a}")))
            }
        };
        match self {
            AlphaPolicy::Constant(a) => check(*a),
            AlphaPolicy::Schedule(values) => {
                if values.len() < iterations {
                    return Err(DeconvError::Config(format!(
                        "alpha schedule has {} entries, {} iterations planned",
                        values.len(),
                        iterations
                    )));
                }
                values.iter().try_for_each(|&a| check(a))
            }
            AlphaPolicy::GridSearch(cfg) => cfg.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub alpha: AlphaPolicy,
    pub p: f64,
    pub eps: f64,
    pub collapse_indices: bool,
    pub laplacian_norm: LaplacianNorm,
    /// Record per-iteration wall time. Off by default so traces are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cauchy31,
            iterations: 256,
            alpha: AlphaPolicy::Constant(0.25),
            p: 1.0,
            eps: crate::DEFAULT_EPS,
            collapse_indices: true,
            laplacian_norm: LaplacianNorm::Operator,
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(DeconvError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !self.p.is_finite() {
            return Err(DeconvError::Config(format!("p must be finite, got {}", self.p)));
        }
        self.alpha.validate(self.iterations)
    }
}

/// The observation and its blur operator.
#[derive(Debug, Clone)]
pub struct Problem {
    h: Image,
    conv: Convolver,
    eps: f64,
}

impl Problem {
    pub fn new(h: &Image, kernel: &Kernel, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self {
            conv: Convolver::for_image(kernel, h)?,
            h: h.clone(),
            eps,
        })
    }

    pub fn h(&self) -> &Image {
        &self.h
    }

    pub fn conv(&self) -> &Convolver {
        &self.conv
    }

    pub fn kernel(&self) -> &Kernel {
        self.conv.kernel()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn initial_weight(&self) -> Result<WeightField> {
        initial_weight(&self.h, &self.conv, self.eps)
    }

    /// `h / (k∗(h·ϱ))`.
    fn ratio(&self, rho: &WeightField) -> Result<WeightField> {
        let blurred = self.conv.apply(&self.h.mul(rho)?)?;
        guarded_divide(&self.h, &blurred, self.eps)
    }
}

/// The two most recent weights `ϱ_{n−1}`, `ϱ_n` and the step index `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub rho_prev: WeightField,
    pub rho_curr: WeightField,
    pub n: usize,
}

impl IterationState {
    /// `ϱ₁ = ϱ₀`, `n = 1`.
    pub fn bootstrap(rho0: WeightField) -> Self {
        Self {
            rho_prev: rho0.clone(),
            rho_curr: rho0,
            n: 1,
        }
    }

    pub fn new(rho_prev: WeightField, rho_curr: WeightField, n: usize) -> Result<Self> {
        rho_prev.ensure_same_shape(&rho_curr)?;
        if n == 0 {
            return Err(DeconvError::InvalidParameter("iteration index starts at 1".into()));
        }
        Ok(Self { rho_prev, rho_curr, n })
    }

    /// Shifts the history: `ϱ_{n−1} ← ϱ_n`, `ϱ_n ← next`, `n ← n + 1`.
    pub fn advance(&mut self, next: WeightField) {
        self.rho_prev = std::mem::replace(&mut self.rho_curr, next);
        self.n += 1;
    }

    /// The same state with `ϱ_{n−1}` replaced by `ϱ_n`.
    pub fn collapsed(&self) -> Self {
        Self {
            rho_prev: self.rho_curr.clone(),
            rho_curr: self.rho_curr.clone(),
            n: self.n,
        }
    }
}

/// `ϱ₀ = h / (k∗h)`.
pub fn initial_weight(h: &Image, conv: &Convolver, eps: f64) -> Result<WeightField> {
    guarded_divide(h, &conv.apply(h)?, eps)
}

/// Richardson-Lucy for a symmetric kernel:
/// `g_{n+1} = g_n · k∗(h / (k∗g_n))`.
pub fn rl_standard_step(g_n: &Image, h: &Image, conv: &Convolver, eps: f64) -> Result<Image> {
    g_n.ensure_same_shape(h)?;
    let ratio = guarded_divide(h, &conv.apply(g_n)?, eps)?;
    conv.apply(&ratio)?.mul(g_n)
}

/// Weight-space Richardson-Lucy: `ϱ_{n+1} = [h/(k∗(hϱ_{n−1})) ∗ k] · ϱ_n`.
pub fn rl_weight_step(problem: &Problem, state: &IterationState) -> Result<WeightField> {
    let ratio = problem.ratio(&state.rho_prev)?;
    problem.conv.apply(&ratio)?.mul(&state.rho_curr)
}

/// `ϱ ← ϱ − (α²/n)∇²ϱ` applied to the most recent weight `ϱ_n`.
pub fn cauchy_pure_step(state: &IterationState, alpha: f64) -> Result<WeightField> {
    let lap = laplacian(&state.rho_curr)?;
    let c = alpha * alpha / state.n as f64;
    state.rho_curr.zip_with(&lap, |r, l| r - c * l)
}

/// `ϱ_{n+1} = h/(k∗(hϱ_{n−1})) · [ϱ_{n−1} − (α²/n)∇²ϱ_{n−1}]`.
pub fn cauchy_accel_step(problem: &Problem, state: &IterationState, alpha: f64) -> Result<WeightField> {
    let ratio = problem.ratio(&state.rho_prev)?;
    let lap = laplacian(&state.rho_prev)?;
    let c = alpha * alpha / state.n as f64;
    let bracket = state.rho_prev.zip_with(&lap, |r, l| r - c * l)?;
    ratio.mul(&bracket)
}

/// `ϱ_{n+1} = [h/(k∗(hϱ_n)) ∗ k] · [ϱ_{n−1} − α² ∇²ϱ_{n−1} / max(‖∇²‖^p, eps)]`.
pub fn cauchy_noise_suppressed_step(
    problem: &Problem,
    state: &IterationState,
    alpha: f64,
    p: f64,
    norm: LaplacianNorm,
) -> Result<WeightField> {
    let multiplier = problem.conv.apply(&problem.ratio(&state.rho_curr)?)?;
    let term = match norm {
        LaplacianNorm::Operator => operator_laplacian_term(&state.rho_prev, p)?,
        LaplacianNorm::Field => normalized_laplacian_term(&state.rho_prev, p)?,
    };
    let a2 = alpha * alpha;
    let bracket = state.rho_prev.zip_with(&term.scaled(problem.eps), |r, l| r - a2 * l)?;
    multiplier.mul(&bracket)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Final reconstruction `g_N`.
    pub image: Image,
    /// Final weight `ϱ_N` for weight-space algorithms.
    pub rho: Option<WeightField>,
    pub trace: Vec<IterationTrace>,
    /// Set when a step produced a non-finite value; the run stops there.
    pub diverged: bool,
    pub alpha_choice: Option<AlphaChoice>,
}

impl RunOutput {
    pub fn last(&self) -> Option<&IterationTrace> {
        self.trace.last()
    }
}

/// Runs `config.iterations` steps of the selected algorithm on `h`.
///
/// With `truth`, each trace row carries the relative error and FTR of the
/// current reconstruction; the residual column never needs it.
pub fn run(config: &RunConfig, h: &Image, kernel: &Kernel, truth: Option<&Image>) -> Result<RunOutput> {
    config.validate()?;
    let problem = Problem::new(h, kernel, config.eps)?;
    let truth = truth
        .map(|t| {
            t.ensure_same_shape(h)?;
            TruthReference::new(t)
        })
        .transpose()?;

    let alpha_choice = match (&config.alpha, config.algorithm.uses_alpha()) {
        (AlphaPolicy::GridSearch(search), true) => Some(search_alpha(h, kernel, search, config)?),
        _ => None,
    };
    let alpha_at = |n: usize| -> f64 {
        if !config.algorithm.uses_alpha() {
            return 0.0;
        }
        match &config.alpha {
            AlphaPolicy::Constant(a) => *a,
            AlphaPolicy::Schedule(values) => values[n - 1],
            AlphaPolicy::GridSearch(_) => alpha_choice.as_ref().map_or(0.0, |c| c.alpha),
        }
    };

    let rho0 = problem.initial_weight()?;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut diverged = false;

    if config.algorithm.is_weight_space() {
        let mut state = IterationState::bootstrap(rho0);
        for n in 1..=config.iterations {
            let alpha = alpha_at(n);
            let started = Instant::now();
            let next = weight_step(config, &problem, &state, alpha)?;
            let wall_ms = elapsed_ms(config, started);
            state.advance(next);
            let g_n = h.mul(&state.rho_curr)?;
            let finite = g_n.is_finite();
            let residual = residual_from_reconstruction(h, &problem.conv, &g_n, config.eps)?.rms();
            trace.push(trace_row(n, alpha, &g_n, residual, truth.as_ref(), wall_ms)?);
            if !finite {
                diverged = true;
                break;
            }
        }
        Ok(RunOutput {
            image: h.mul(&state.rho_curr)?,
            rho: Some(state.rho_curr),
            trace,
            diverged,
            alpha_choice,
        })
    } else {
        let mut g = h.mul(&rho0)?;
        for n in 1..=config.iterations {
            let started = Instant::now();
            g = match config.algorithm {
                Algorithm::Rl => rl_standard_step(&g, h, &problem.conv, config.eps)?,
                _ => von_neumann_step(&g, h, &problem.conv)?,
            };
            let wall_ms = elapsed_ms(config, started);
            let residual = residual_from_reconstruction(h, &problem.conv, &g, config.eps)?.rms();
            trace.push(trace_row(n, 0.0, &g, residual, truth.as_ref(), wall_ms)?);
            if !g.is_finite() {
                diverged = true;
                break;
            }
        }
        Ok(RunOutput {
            image: g,
            rho: None,
            trace,
            diverged,
            alpha_choice,
        })
    }
}

fn weight_step(config: &RunConfig, problem: &Problem, state: &IterationState, alpha: f64) -> Result<WeightField> {
    if config.algorithm == Algorithm::Cauchy20 {
        return cauchy_pure_step(state, alpha);
    }
    let collapsed;
    let state = if config.collapse_indices {
        collapsed = state.collapsed();
        &collapsed
    } else {
        state
    };
    match config.algorithm {
        Algorithm::Cauchy25 => cauchy_accel_step(problem, state, alpha),
        Algorithm::Cauchy31 => cauchy_noise_suppressed_step(problem, state, alpha, config.p, config.laplacian_norm),
        _ => unreachable!("not a weight-space algorithm"),
    }
}

fn elapsed_ms(config: &RunConfig, started: Instant) -> f64 {
    if config.record_timing {
        started.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}
