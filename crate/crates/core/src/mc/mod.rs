//! Monte Carlo oracle: simulates paths from the characteristics and
//! estimates moments of `I_t = ∫₀ᵗ e^{-X_s} ds` and related functionals.
//!
//! Path `i` draws from a ChaCha8 stream seeded with the configured seed and
//! stream number `i`, and per-path results are reduced in path order, so an
//! estimate does not depend on the execution mode or the number of threads.

mod estimate;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

pub use estimate::{
    combined_z, estimate_functional_moment, estimate_functional_moments, estimate_infinite, estimate_moment_curve,
    estimate_moment_ratio, estimate_reversed, simulate_increments, simulate_path, write_path_dump, InfiniteTarget,
    RatioEstimate, SimulatedPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Event-driven when the process allows it, else the grid.
    Auto,
    /// Trapezoid rule on a grid of width `time_step`.
    Grid,
    /// Exact integral between jumps; compound Poisson with drift only.
    Exact,
}

impl Integrator {
    pub fn as_str(self) -> &'static str {
        match self {
            Integrator::Auto => "auto",
            Integrator::Grid => "grid",
            Integrator::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub time_step: f64,
    /// Horizon `t`, or the truncation horizon `T` of infinite-horizon
    /// estimates.
    pub horizon: f64,
    /// Jumps below this size are replaced by their mean (infinite-activity
    /// kernels only).
    pub small_jump_cutoff: f64,
    pub seed: u64,
    /// Adds a Gaussian with the variance of the removed small jumps.
    pub gaussian_compensation: bool,
    pub integrator: Integrator,
    pub execution: Execution,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_paths: 10_000,
            time_step: 1e-3,
            horizon: 1.0,
            small_jump_cutoff: 1e-3,
            seed: 0,
            gaussian_compensation: false,
            integrator: Integrator::Auto,
            execution: Execution::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::invalid(format!("n_paths must be >= 2, got {}", self.n_paths)));
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::invalid(format!("time_step must be > 0, got {}", self.time_step)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        if !(self.small_jump_cutoff > 0.0 && self.small_jump_cutoff.is_finite()) {
            return Err(Error::invalid(format!(
                "small_jump_cutoff must be > 0, got {}",
                self.small_jump_cutoff
            )));
        }
        Ok(())
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n_paths`.
    pub std_error: f64,
    /// Paths that entered the mean.
    pub n_paths: usize,
    /// Paths dropped because `e^{-X}` or the functional overflowed.
    pub flagged_paths: usize,
    /// Integrator actually used.
    pub integrator: Integrator,
    pub config: SimulationConfig,
    /// Upper bound on `E(I_∞ - I_T)` for truncated infinite-horizon runs.
    pub tail_bound: Option<f64>,
    pub tail_bound_note: Option<String>,
    pub notes: Vec<String>,
}

impl McEstimate {
    pub fn relative_error(&self) -> f64 {
        self.std_error / self.mean.abs()
    }

    /// `|mean - value| / std_error`.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.std_error
    }
}
