use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{ExactPlan, GridPlan, Plan};
use super::{Integrator, McEstimate, SimulationConfig};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::process::{reverse_characteristics, Exponent, JumpMeasure, PiiCharacteristics, Process};

fn exact_eligible(process: &Process) -> Option<(f64, &JumpMeasure)> {
    match process {
        Process::Pii(PiiCharacteristics::Homogeneous(t)) if t.c0 == 0.0 => match t.jumps {
            JumpMeasure::None | JumpMeasure::PointMasses(_) | JumpMeasure::GaussianJumps { .. } => {
                Some((t.b0, &t.jumps))
            }
            _ => None,
        },
        _ => None,
    }
}

/// Builds the path plan. `reversed` simulates the characteristics flipped on
/// `[0, t]`, `t` being the last checkpoint.
fn prepare(
    process: &Process,
    checkpoints: &[f64],
    cfg: &SimulationConfig,
    reversed: bool,
) -> Result<(Plan, Integrator)> {
    let horizon = *checkpoints.last().expect("at least one checkpoint");
    let exact = exact_eligible(process);
    let use_exact = match cfg.integrator {
        Integrator::Exact if exact.is_none() => {
            return Err(Error::invalid(format!(
                "the exact integrator needs a compound Poisson process with drift, got {}",
                process.kind_name()
            )))
        }
        Integrator::Exact => true,
        Integrator::Auto => exact.is_some(),
        Integrator::Grid => false,
    };
    if let Some((b0, jumps)) = exact.filter(|_| use_exact) {
        // a homogeneous process is its own reversal
        return Ok((Plan::Exact(ExactPlan::new(b0, jumps, checkpoints)?), Integrator::Exact));
    }
    let plan = match process {
        Process::Pii(pii) => {
            pii.validate_on(horizon)?;
            let ito = if reversed && horizon > 0.0 && pii.as_levy().is_none() {
                reverse_characteristics(pii, horizon)?.characteristics
            } else {
                pii.to_ito()
            };
            GridPlan::from_ito(
                &ito,
                checkpoints,
                cfg.time_step,
                cfg.small_jump_cutoff,
                cfg.gaussian_compensation,
            )?
        }
        Process::HittingTime(h) => GridPlan::subordinated(h, checkpoints, cfg.time_step)?,
    };
    Ok((Plan::Grid(plan), Integrator::Grid))
}

struct PathOut {
    values: Vec<f64>,
    terminal: f64,
}

fn run_paths(plan: &Plan, cfg: &SimulationConfig, sign: f64, width: usize) -> Vec<PathOut> {
    map_range(cfg.execution, cfg.n_paths, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let mut values = Vec::with_capacity(width);
        let terminal = plan.run(&mut rng, sign, &mut values);
        PathOut { values, terminal }
    })
}

struct Moments {
    mean: f64,
    std_error: f64,
    used: usize,
    flagged: usize,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> Moments {
    let (mut sum, mut used, mut flagged) = (0.0, 0usize, 0usize);
    for v in values.clone() {
        if v.is_finite() {
            sum += v;
            used += 1;
        } else {
            flagged += 1;
        }
    }
    if used == 0 {
        return Moments {
            mean: f64::NAN,
            std_error: f64::NAN,
            used,
            flagged,
        };
    }
    let mean = sum / used as f64;
    let ss: f64 = values.filter(|v| v.is_finite()).map(|v| (v - mean) * (v - mean)).sum();
    let var = if used > 1 { ss / (used - 1) as f64 } else { 0.0 };
    Moments {
        mean,
        std_error: (var / used as f64).sqrt(),
        used,
        flagged,
    }
}

fn estimate_from(m: Moments, integrator: Integrator, cfg: &SimulationConfig) -> McEstimate {
    let mut notes = Vec::new();
    if m.flagged > 0 {
        notes.push(format!("MC_FLAGGED_PATHS: {} paths overflowed and were dropped", m.flagged));
    }
    McEstimate {
        mean: m.mean,
        std_error: m.std_error,
        n_paths: m.used,
        flagged_paths: m.flagged,
        integrator,
        config: *cfg,
        tail_bound: None,
        tail_bound_note: None,
        notes,
    }
}

fn exact_one(cfg: &SimulationConfig, integrator: Integrator) -> McEstimate {
    estimate_from(
        Moments {
            mean: 1.0,
            std_error: 0.0,
            used: cfg.n_paths,
            flagged: 0,
        },
        integrator,
        cfg,
    )
}

fn power(i: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        i
    } else if alpha == alpha.trunc() && alpha.abs() <= 16.0 {
        i.powi(alpha as i32)
    } else {
        i.powf(alpha)
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("horizon must be > 0, got {t}")))
    }
}

/// `E(I_t^α)` for several `α` from one set of paths.
pub fn estimate_functional_moments(
    process: &Process,
    t: f64,
    orders: &[f64],
    config: &SimulationConfig,
) -> Result<Vec<McEstimate>> {
    let cfg = config.with_horizon(t);
    cfg.validate()?;
    check_horizon(t)?;
    let (plan, integrator) = prepare(process, &[t], &cfg, false)?;
    let paths = run_paths(&plan, &cfg, -1.0, 1);
    Ok(orders
        .iter()
        .map(|&alpha| {
            if alpha == 0.0 {
                return exact_one(&cfg, integrator);
            }
            estimate_from(summarize(paths.iter().map(|p| power(p.values[0], alpha))), integrator, &cfg)
        })
        .collect())
}

/// `E(I_t^α)` with `I_t` by the trapezoid rule on the path grid, or exactly
/// between jumps when the process allows it.
pub fn estimate_functional_moment(
    process: &Process,
    t: f64,
    alpha: f64,
    config: &SimulationConfig,
) -> Result<McEstimate> {
    Ok(estimate_functional_moments(process, t, &[alpha], config)?.remove(0))
}

/// `E(I_s^α)` at each checkpoint `s`, all from the same paths.
pub fn estimate_moment_curve(
    process: &Process,
    alpha: f64,
    checkpoints: &[f64],
    config: &SimulationConfig,
) -> Result<Vec<McEstimate>> {
    if checkpoints.is_empty() {
        return Err(Error::invalid("no checkpoints"));
    }
    if checkpoints[0] <= 0.0 || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("checkpoints must be positive and strictly increasing"));
    }
    let t = *checkpoints.last().unwrap();
    let cfg = config.with_horizon(t);
    cfg.validate()?;
    let (plan, integrator) = prepare(process, checkpoints, &cfg, false)?;
    let paths = run_paths(&plan, &cfg, -1.0, checkpoints.len());
    Ok((0..checkpoints.len())
        .map(|k| {
            let mut c = cfg;
            c.horizon = checkpoints[k];
            estimate_from(summarize(paths.iter().map(|p| power(p.values[k], alpha))), integrator, &c)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InfiniteTarget {
    /// `E(I_∞^α)`.
    Moment(f64),
    /// `E e^{-βI_∞}`.
    Laplace(f64),
}

/// Infinite-horizon quantities estimated at the truncation horizon
/// `config.horizon`.
///
/// Needs a homogeneous process with `Φ(1) > 0`, which gives the reported tail
/// bound `E(I_∞ - I_T) = e^{-Φ(1)T}/Φ(1)`; `allow_nonpositive` runs anyway
/// and reports no bound.
pub fn estimate_infinite(
    process: &Process,
    target: InfiniteTarget,
    config: &SimulationConfig,
    allow_nonpositive: bool,
) -> Result<McEstimate> {
    config.validate()?;
    let horizon = config.horizon;
    check_horizon(horizon)?;
    let phi = process.levy().ok_or_else(|| {
        Error::Precondition(format!(
            "infinite-horizon estimates need a homogeneous process, got {}",
            process.kind_name()
        ))
    })?;
    let phi1 = match phi.exponent(1.0)? {
        Exponent::Finite(v) if v > 0.0 => Some(v),
        _ => None,
    };
    if phi1.is_none() && !allow_nonpositive {
        return Err(Error::Condition {
            condition: "phi(1) > 0",
            verdict: "violated",
            detail: "E(I_inf) is infinite; pass the override to estimate at the horizon anyway".into(),
        });
    }
    let (plan, integrator) = prepare(process, &[horizon], config, false)?;
    let mut est = match target {
        InfiniteTarget::Moment(0.0) => exact_one(config, integrator),
        InfiniteTarget::Laplace(0.0) => exact_one(config, integrator),
        InfiniteTarget::Moment(alpha) => {
            let paths = run_paths(&plan, config, -1.0, 1);
            estimate_from(summarize(paths.iter().map(|p| power(p.values[0], alpha))), integrator, config)
        }
        InfiniteTarget::Laplace(beta) => {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
            }
            let paths = run_paths(&plan, config, -1.0, 1);
            estimate_from(summarize(paths.iter().map(|p| (-beta * p.values[0]).exp())), integrator, config)
        }
    };
    match phi1 {
        Some(p) => {
            let bound = (-p * horizon).exp() / p;
            est.tail_bound = Some(bound);
            let direction = match target {
                InfiniteTarget::Moment(a) if a < 0.0 => "I_T <= I_inf, so the estimate is biased upwards",
                InfiniteTarget::Moment(_) => "I_T <= I_inf, so the estimate is biased downwards",
                InfiniteTarget::Laplace(_) => "bias at most beta times the bound, upwards",
            };
            est.tail_bound_note = Some(format!("E(I_inf - I_T) = {bound:e} at T = {horizon}; {direction}"));
        }
        None => {
            est.notes
                .push("TAIL_BOUND_UNAVAILABLE: phi(1) <= 0, the horizon value is reported as is".into());
        }
    }
    Ok(est)
}

/// `E(I_t^α)` through the reversed process: `I_t = e^{-Y_t} ∫₀ᵗ e^{Y_s} ds`
/// with `Y` simulated from the time-flipped characteristics.
pub fn estimate_reversed(process: &Process, t: f64, alpha: f64, config: &SimulationConfig) -> Result<McEstimate> {
    let cfg = config.with_horizon(t);
    cfg.validate()?;
    check_horizon(t)?;
    let (plan, integrator) = prepare(process, &[t], &cfg, true)?;
    if alpha == 0.0 {
        return Ok(exact_one(&cfg, integrator));
    }
    let paths = run_paths(&plan, &cfg, 1.0, 1);
    let mut est = estimate_from(
        summarize(paths.iter().map(|p| power(p.values[0] * (-p.terminal).exp(), alpha))),
        integrator,
        &cfg,
    );
    if process.is_homogeneous() {
        est.notes.push("homogeneous process: the reversal has the same law".into());
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    /// Delta-method standard error, using the sample covariance of the two
    /// functionals.
    pub std_error: f64,
    pub numerator: McEstimate,
    pub denominator: McEstimate,
}

/// `E(I_t^a) / E(I_t^b)` from the same paths.
pub fn estimate_moment_ratio(
    process: &Process,
    t: f64,
    numerator: f64,
    denominator: f64,
    config: &SimulationConfig,
) -> Result<RatioEstimate> {
    let cfg = config.with_horizon(t);
    cfg.validate()?;
    check_horizon(t)?;
    let (plan, integrator) = prepare(process, &[t], &cfg, false)?;
    let paths = run_paths(&plan, &cfg, -1.0, 1);
    let pairs: Vec<(f64, f64)> = paths
        .iter()
        .map(|p| (power(p.values[0], numerator), power(p.values[0], denominator)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    let num = estimate_from(summarize(pairs.iter().map(|p| p.0)), integrator, &cfg);
    let den = estimate_from(summarize(pairs.iter().map(|p| p.1)), integrator, &cfg);
    let flagged = paths.len() - pairs.len();
    let n = pairs.len() as f64;
    let (ma, mb) = (num.mean, den.mean);
    let cov = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / (n - 1.0);
    let (va, vb) = (num.std_error.powi(2) * n, den.std_error.powi(2) * n);
    let ratio = ma / mb;
    let var = (va - 2.0 * ratio * cov + ratio * ratio * vb) / (mb * mb * n);
    let mut numerator = num;
    let mut denominator = den;
    numerator.flagged_paths = flagged;
    denominator.flagged_paths = flagged;
    Ok(RatioEstimate {
        ratio,
        std_error: var.max(0.0).sqrt(),
        numerator,
        denominator,
    })
}

/// `|a - b| / sqrt(se_a² + se_b²)`.
pub fn combined_z(a: &McEstimate, b: &McEstimate) -> f64 {
    (a.mean - b.mean).abs() / (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPath {
    pub path_id: u64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

fn grid_config(config: &SimulationConfig) -> Result<SimulationConfig> {
    let mut cfg = *config;
    cfg.validate()?;
    check_horizon(cfg.horizon)?;
    cfg.integrator = Integrator::Grid;
    Ok(cfg)
}

fn trace_path(plan: &Plan, nodes: &[f64], cfg: &SimulationConfig, path_id: u64) -> SimulatedPath {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_id);
    let mut values = Vec::with_capacity(nodes.len());
    plan.trace(&mut rng, &mut values).expect("grid plan");
    SimulatedPath {
        path_id,
        times: nodes.to_vec(),
        values,
    }
}

fn grid_nodes(plan: &Plan) -> Vec<f64> {
    match plan {
        Plan::Grid(g) => g.nodes().to_vec(),
        Plan::Exact(_) => unreachable!("grid requested"),
    }
}

/// `X` on the grid `0, Δ, …, t` for one path. Shares the random stream of
/// path `path_id` in the grid estimators.
pub fn simulate_path(process: &Process, config: &SimulationConfig, path_id: u64) -> Result<SimulatedPath> {
    let cfg = grid_config(config)?;
    let (plan, _) = prepare(process, &[cfg.horizon], &cfg, false)?;
    Ok(trace_path(&plan, &grid_nodes(&plan), &cfg, path_id))
}

/// Every path of the configuration on the grid.
pub fn simulate_increments(process: &Process, config: &SimulationConfig) -> Result<Vec<SimulatedPath>> {
    let cfg = grid_config(config)?;
    let (plan, _) = prepare(process, &[cfg.horizon], &cfg, false)?;
    let nodes = grid_nodes(&plan);
    Ok(map_range(cfg.execution, cfg.n_paths, |i| trace_path(&plan, &nodes, &cfg, i as u64)))
}

/// Per-path `I_t` as CSV (`path_id,i_t`).
pub fn write_path_dump<W: Write>(process: &Process, t: f64, config: &SimulationConfig, out: &mut W) -> Result<()> {
    let cfg = config.with_horizon(t);
    cfg.validate()?;
    check_horizon(t)?;
    let (plan, _) = prepare(process, &[t], &cfg, false)?;
    let paths = run_paths(&plan, &cfg, -1.0, 1);
    let io = |e: std::io::Error| Error::invalid(format!("writing path dump: {e}"));
    writeln!(out, "path_id,i_t").map_err(io)?;
    for (i, p) in paths.iter().enumerate() {
        writeln!(out, "{i},{}", p.values[0]).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::process::{LevyTriplet, TimeFn};

    fn cfg(n: usize) -> SimulationConfig {
        SimulationConfig {
            n_paths: n,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_drift_is_trapezoid_exact() {
        let p: Process = LevyTriplet::drift(0.8).unwrap().into();
        let mut c = cfg(2);
        c.time_step = 0.01;
        let e = estimate_functional_moment(&p, 2.0, 1.0, &c).unwrap();
        let exact = (1.0 - (-1.6f64).exp()) / 0.8;
        assert!((e.mean - exact).abs() < 1e-4);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn order_zero_is_one() {
        let p: Process = LevyTriplet::brownian(1.0, 1.0).unwrap().into();
        let e = estimate_functional_moment(&p, 1.0, 0.0, &cfg(10)).unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
    }

    #[test]
    fn exact_and_grid_agree_for_poisson() {
        let p: Process = LevyTriplet::poisson(2.0).unwrap().into();
        let mut c = cfg(20_000);
        let exact = estimate_functional_moment(&p, 1.0, 1.0, &c).unwrap();
        assert_eq!(exact.integrator, Integrator::Exact);
        c.integrator = Integrator::Grid;
        let grid = estimate_functional_moment(&p, 1.0, 1.0, &c).unwrap();
        let phi = 2.0 * (1.0 - (-1.0f64).exp());
        let want = (1.0 - (-phi).exp()) / phi;
        assert!(exact.z_score(want) < 4.0);
        assert!(grid.z_score(want) < 4.0);
    }

    #[test]
    fn execution_modes_are_bit_identical() {
        let p: Process = LevyTriplet::compound_poisson_gaussian(1.0, 0.0, 1.0).unwrap().into();
        let mut c = cfg(500);
        c.integrator = Integrator::Grid;
        c.execution = Execution::Sequential;
        let a = estimate_functional_moment(&p, 1.0, 2.0, &c).unwrap();
        c.execution = Execution::Parallel;
        let b = estimate_functional_moment(&p, 1.0, 2.0, &c).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn infinite_refuses_without_positive_phi1() {
        let p: Process = LevyTriplet::brownian(0.2, 1.0).unwrap().into();
        let c = cfg(10).with_horizon(5.0);
        let err = estimate_infinite(&p, InfiniteTarget::Moment(1.0), &c, false).unwrap_err();
        assert!(err.is_refusal());
        let e = estimate_infinite(&p, InfiniteTarget::Moment(1.0), &c, true).unwrap();
        assert!(e.tail_bound.is_none());
        assert!(e.notes.iter().any(|n| n.starts_with("TAIL_BOUND_UNAVAILABLE")));
    }

    #[test]
    fn reversal_of_time_dependent_intensity() {
        let p: Process = PiiCharacteristics::non_hom_poisson(TimeFn::parse("t").unwrap()).into();
        let c = cfg(20_000);
        let a = estimate_functional_moment(&p, 1.0, 1.0, &c).unwrap();
        let b = estimate_reversed(&p, 1.0, 1.0, &c.with_seed(9)).unwrap();
        assert!(combined_z(&a, &b) < 4.0, "{} vs {}", a.mean, b.mean);
    }

    #[test]
    fn ratio_of_identical_orders_is_one() {
        let p: Process = LevyTriplet::poisson(1.0).unwrap().into();
        let r = estimate_moment_ratio(&p, 2.0, 1.0, 1.0, &cfg(1000)).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!(r.std_error < 1e-12);
    }

    #[test]
    fn path_trace_matches_grid() {
        let p: Process = LevyTriplet::brownian(0.0, 1.0).unwrap().into();
        let mut c = cfg(3);
        c.time_step = 0.1;
        let path = simulate_path(&p, &c, 1).unwrap();
        assert_eq!(path.times.len(), 11);
        assert_eq!(path.values[0], 0.0);
        let all = simulate_increments(&p, &c).unwrap();
        assert_eq!(all[1], path);
    }

    #[test]
    fn dump_has_one_row_per_path() {
        let p: Process = LevyTriplet::poisson(1.0).unwrap().into();
        let mut buf = Vec::new();
        write_path_dump(&p, 1.0, &cfg(4), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("path_id,i_t\n0,"));
    }
}
