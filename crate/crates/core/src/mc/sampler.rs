//! Path plans: per-cell quantities shared by every path, and the per-path
//! integrators that consume them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, InverseGaussian, Open01, StandardNormal};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::process::{GeneralDensity, HittingTimeBm, ItoCharacteristics, JumpMeasure, TimeFn};
use crate::quad;

#[derive(Debug, Clone)]
enum Sampler {
    None,
    Points { cum: Vec<f64>, locations: Vec<f64> },
    Gaussian { mean: f64, std: f64 },
    // Pareto proposal on [eps, ∞) thinned by e^{-M(x - eps)}
    TemperedStable { eps: f64, beta: f64, m: f64 },
    Rejection { density: GeneralDensity, lo: f64, hi: f64, eps: f64, envelope: f64 },
}

/// The simulated part of a jump measure: jumps drawn at total rate `mass`,
/// with `mean = ∫ x K(dx)` over all jumps (the compensator) and `small_var`
/// the variance rate of the jumps left out.
#[derive(Debug, Clone)]
pub(crate) struct JumpLaw {
    sampler: Sampler,
    pub mass: f64,
    pub mean: f64,
    pub small_var: f64,
}

impl JumpLaw {
    pub fn new(measure: &JumpMeasure, cutoff: f64) -> Result<Self> {
        let mean = measure.first_moment()?;
        let law = match measure {
            JumpMeasure::None => JumpLaw {
                sampler: Sampler::None,
                mass: 0.0,
                mean,
                small_var: 0.0,
            },
            JumpMeasure::PointMasses(ms) => {
                let mass: f64 = ms.iter().map(|p| p.rate).sum();
                let mut acc = 0.0;
                let cum = ms
                    .iter()
                    .map(|p| {
                        acc += p.rate / mass;
                        acc
                    })
                    .collect();
                JumpLaw {
                    sampler: Sampler::Points {
                        cum,
                        locations: ms.iter().map(|p| p.location).collect(),
                    },
                    mass,
                    mean,
                    small_var: 0.0,
                }
            }
            &JumpMeasure::GaussianJumps { rate, mean: mu, std } => JumpLaw {
                sampler: Sampler::Gaussian { mean: mu, std },
                mass: rate,
                mean,
                small_var: 0.0,
            },
            &JumpMeasure::TemperedStable { c, m, beta } => {
                let z = m * cutoff;
                // c M^β Γ(-β, z) through Γ(-β, z) = (z^{-β}e^{-z} - Γ(1-β, z)) / β
                let upper = (z.powf(-beta) * (-z).exp() - gamma(1.0 - beta) * gamma_ur(1.0 - beta, z)) / beta;
                let mass = c * m.powf(beta) * upper;
                let small_var = c * m.powf(beta - 2.0) * gamma(2.0 - beta) * gamma_lr(2.0 - beta, z);
                JumpLaw {
                    sampler: Sampler::TemperedStable { eps: cutoff, beta, m },
                    mass,
                    mean,
                    small_var,
                }
            }
            JumpMeasure::GeneralDensity(g) => {
                let (lo, hi) = g.support();
                let envelope = match g.envelope() {
                    Some(e) if lo.is_finite() && hi.is_finite() => e,
                    _ => {
                        return Err(Error::NotSimulable(format!(
                            "density '{}' needs a bounded support and a declared envelope",
                            g.label()
                        )))
                    }
                };
                let tol = quad::Tolerance::default();
                let piece = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> Result<f64> {
                    if b <= a {
                        Ok(0.0)
                    } else {
                        Ok(quad::integrate(|x| f(x) * g.eval(x), a, b, tol)?.value)
                    }
                };
                let one = |_: f64| 1.0;
                let sq = |x: f64| x * x;
                let mass = piece(&one, lo, hi.min(-cutoff))? + piece(&one, lo.max(cutoff), hi)?;
                let small_var = piece(&sq, lo.max(-cutoff), hi.min(cutoff))?;
                JumpLaw {
                    sampler: Sampler::Rejection {
                        density: g.clone(),
                        lo,
                        hi,
                        eps: cutoff,
                        envelope,
                    },
                    mass,
                    mean,
                    small_var,
                }
            }
        };
        if !(law.mass.is_finite() && law.mass >= 0.0 && law.small_var.is_finite()) {
            return Err(Error::NotSimulable(format!("jump rate {} is not usable", law.mass)));
        }
        Ok(law)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.sampler {
            Sampler::None => 0.0,
            Sampler::Points { cum, locations } => {
                let u: f64 = rng.random();
                let i = cum.partition_point(|&c| c < u).min(locations.len() - 1);
                locations[i]
            }
            Sampler::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            &Sampler::TemperedStable { eps, beta, m } => loop {
                let u: f64 = Open01.sample(rng);
                let x = eps * u.powf(-1.0 / beta);
                if rng.random::<f64>() < (-m * (x - eps)).exp() {
                    return x;
                }
            },
            Sampler::Rejection {
                density,
                lo,
                hi,
                eps,
                envelope,
            } => loop {
                let x = lo + (hi - lo) * rng.random::<f64>();
                if x.abs() < *eps {
                    continue;
                }
                if rng.random::<f64>() * envelope <= density.eval(x) {
                    return x;
                }
            },
        }
    }
}

fn cell_integral(f: &TimeFn, a: f64, b: f64) -> f64 {
    if let TimeFn::Const(c) = f {
        return c * (b - a);
    }
    simpson(|s| f.eval(s), a, b)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

#[derive(Debug, Clone)]
struct GridComponent {
    law: JumpLaw,
    // cumulative jump intensity at the nodes
    cum: Vec<f64>,
    scale_mid: Vec<f64>,
}

#[derive(Debug, Clone)]
enum CellNoise {
    Gaussian(Vec<f64>),
    Subordinated { mu: f64, sigma: f64, clocks: Vec<InverseGaussian<f64>> },
}

/// Nodes `0 = s_0 < … < s_N = t` with every checkpoint on a node and cells no
/// longer than the time step.
pub(crate) fn build_nodes(checkpoints: &[f64], step: f64) -> (Vec<f64>, Vec<usize>) {
    let mut nodes = vec![0.0];
    let mut marks = Vec::with_capacity(checkpoints.len());
    let mut start = 0.0;
    for &c in checkpoints {
        if c > start {
            let cells = ((c - start) / step).ceil().max(1.0) as usize;
            for i in 1..=cells {
                nodes.push(if i == cells { c } else { start + (c - start) * i as f64 / cells as f64 });
            }
            start = c;
        }
        marks.push(nodes.len() - 1);
    }
    (nodes, marks)
}

#[derive(Debug, Clone)]
pub(crate) struct GridPlan {
    nodes: Vec<f64>,
    marks: Vec<usize>,
    drift: Vec<f64>,
    noise: CellNoise,
    components: Vec<GridComponent>,
}

impl GridPlan {
    pub fn from_ito(
        ito: &ItoCharacteristics,
        checkpoints: &[f64],
        step: f64,
        cutoff: f64,
        gaussian_compensation: bool,
    ) -> Result<Self> {
        let (nodes, marks) = build_nodes(checkpoints, step);
        let cells = nodes.len() - 1;
        let mut drift: Vec<f64> = (0..cells).map(|j| cell_integral(&ito.drift, nodes[j], nodes[j + 1])).collect();
        let mut var: Vec<f64> = (0..cells)
            .map(|j| cell_integral(&ito.diffusion, nodes[j], nodes[j + 1]))
            .collect();
        if let Some(j) = var.iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(format!("diffusion rate is negative near s = {}", nodes[j])));
        }
        let mut components = Vec::with_capacity(ito.jumps.len());
        for comp in &ito.jumps {
            let law = JumpLaw::new(&comp.measure, cutoff)?;
            let mut cum = vec![0.0; cells + 1];
            let mut scale_mid = vec![0.0; cells];
            for j in 0..cells {
                let (a, b) = (nodes[j], nodes[j + 1]);
                let w = cell_integral(&comp.weight, a, b);
                if w < 0.0 {
                    return Err(Error::invalid(format!("jump intensity is negative near s = {a}")));
                }
                cum[j + 1] = cum[j] + law.mass * w;
                scale_mid[j] = comp.scale.eval(0.5 * (a + b));
                if law.mean != 0.0 {
                    drift[j] -= law.mean * simpson(|s| comp.weight.eval(s) * comp.scale.eval(s), a, b);
                }
                if gaussian_compensation && law.small_var > 0.0 {
                    var[j] += law.small_var * simpson(|s| comp.weight.eval(s) * comp.scale.eval(s).powi(2), a, b);
                }
            }
            if law.mass > 0.0 {
                components.push(GridComponent { law, cum, scale_mid });
            }
        }
        Ok(GridPlan {
            nodes,
            marks,
            drift,
            noise: CellNoise::Gaussian(var.into_iter().map(f64::sqrt).collect()),
            components,
        })
    }

    /// `X = W^{μ,σ}(T)` with `T` the first-passage subordinator of a unit
    /// Brownian motion with drift `b`: per cell `ΔT ~ IG(h/b, h²)`.
    pub fn subordinated(h: &HittingTimeBm, checkpoints: &[f64], step: f64) -> Result<Self> {
        let (nodes, marks) = build_nodes(checkpoints, step);
        let cells = nodes.len() - 1;
        let clocks = (0..cells)
            .map(|j| {
                let len = nodes[j + 1] - nodes[j];
                InverseGaussian::new(len / h.b, len * len)
                    .map_err(|e| Error::invalid(format!("inverse Gaussian clock: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridPlan {
            nodes,
            marks,
            drift: vec![0.0; cells],
            noise: CellNoise::Subordinated {
                mu: h.mu,
                sigma: h.sigma,
                clocks,
            },
            components: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn run(&self, rng: &mut ChaCha8Rng, sign: f64, out: &mut Vec<f64>, mut trace: Option<&mut Vec<f64>>) -> f64 {
        let mut levels: Vec<f64> = self.components.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let mut x = 0.0;
        let mut prev = 1.0;
        let mut acc = 0.0;
        let mut mark = 0;
        if let Some(t) = trace.as_deref_mut() {
            t.push(0.0);
        }
        while mark < self.marks.len() && self.marks[mark] == 0 {
            out.push(0.0);
            mark += 1;
        }
        for j in 0..self.drift.len() {
            let mut dx = self.drift[j];
            match &self.noise {
                CellNoise::Gaussian(sd) => {
                    if sd[j] > 0.0 {
                        let z: f64 = StandardNormal.sample(rng);
                        dx += sd[j] * z;
                    }
                }
                CellNoise::Subordinated { mu, sigma, clocks } => {
                    let dt = clocks[j].sample(rng);
                    let z: f64 = StandardNormal.sample(rng);
                    dx += mu * dt + sigma * dt.sqrt() * z;
                }
            }
            for (c, level) in self.components.iter().zip(levels.iter_mut()) {
                while *level <= c.cum[j + 1] {
                    dx += c.scale_mid[j] * c.law.sample(rng);
                    *level += rng.sample::<f64, _>(Exp1);
                }
            }
            x += dx;
            let cur = (sign * x).exp();
            acc += 0.5 * (self.nodes[j + 1] - self.nodes[j]) * (prev + cur);
            prev = cur;
            if let Some(t) = trace.as_deref_mut() {
                t.push(x);
            }
            while mark < self.marks.len() && self.marks[mark] == j + 1 {
                out.push(acc);
                mark += 1;
            }
        }
        x
    }
}

/// Finite-activity compound Poisson with drift and no Gaussian part: the
/// path is linear between jumps, so `∫ e^{-X}` is exact.
#[derive(Debug, Clone)]
pub(crate) struct ExactPlan {
    slope: f64,
    law: JumpLaw,
    checkpoints: Vec<f64>,
}

// (1 - e^{-z}) / z
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        -(-z).exp_m1() / z
    }
}

impl ExactPlan {
    pub fn new(b0: f64, jumps: &JumpMeasure, checkpoints: &[f64]) -> Result<Self> {
        let law = JumpLaw::new(jumps, f64::MIN_POSITIVE)?;
        Ok(ExactPlan {
            slope: b0 - law.mean,
            law,
            checkpoints: checkpoints.to_vec(),
        })
    }

    fn run(&self, rng: &mut ChaCha8Rng, sign: f64, out: &mut Vec<f64>) -> f64 {
        let d = self.slope;
        let seg = |x: f64, tau: f64| (sign * x).exp() * tau * phi1(-sign * d * tau);
        let wait = |rng: &mut ChaCha8Rng| {
            if self.law.mass > 0.0 {
                rng.sample::<f64, _>(Exp1) / self.law.mass
            } else {
                f64::INFINITY
            }
        };
        let (mut s, mut x, mut acc) = (0.0, 0.0, 0.0);
        let mut next = wait(rng);
        for &c in &self.checkpoints {
            while next <= c {
                acc += seg(x, next - s);
                x += d * (next - s);
                s = next;
                x += self.law.sample(rng);
                next = s + wait(rng);
            }
            acc += seg(x, c - s);
            x += d * (c - s);
            s = c;
            out.push(acc);
        }
        x
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Plan {
    Grid(GridPlan),
    Exact(ExactPlan),
}

impl Plan {
    /// Accumulates `∫₀^c e^{sign·X_s} ds` at each checkpoint into `out` and
    /// returns the terminal value of `X`.
    pub fn run(&self, rng: &mut ChaCha8Rng, sign: f64, out: &mut Vec<f64>) -> f64 {
        match self {
            Plan::Grid(g) => g.run(rng, sign, out, None),
            Plan::Exact(e) => e.run(rng, sign, out),
        }
    }

    pub fn trace(&self, rng: &mut ChaCha8Rng, trace: &mut Vec<f64>) -> Option<()> {
        match self {
            Plan::Grid(g) => {
                let mut sink = Vec::new();
                g.run(rng, -1.0, &mut sink, Some(trace));
                Some(())
            }
            Plan::Exact(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn nodes_hit_checkpoints() {
        let (nodes, marks) = build_nodes(&[0.25, 1.0], 0.1);
        assert_eq!(nodes[marks[0]], 0.25);
        assert_eq!(nodes[marks[1]], 1.0);
        assert!(nodes.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-15));
        let (_, marks) = build_nodes(&[0.0, 0.5], 0.1);
        assert_eq!(marks[0], 0);
    }

    #[test]
    fn tempered_stable_rates() {
        let law = JumpLaw::new(&JumpMeasure::tempered_stable(1.0, 1.0, 0.5).unwrap(), 1e-3).unwrap();
        let k = |x: f64| (-x).exp() * x.powf(-1.5);
        let mass = quad::integrate_to_infinity(k, 1e-3, quad::Tolerance::new(1e-12, 1e-10)).unwrap().value;
        assert!((law.mass - mass).abs() < 1e-8 * mass, "{} vs {mass}", law.mass);
        let var = quad::integrate(|x| x * x * k(x), 0.0, 1e-3, Default::default()).unwrap().value;
        assert!((law.small_var - var).abs() < 1e-8 * var);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| law.sample(&mut rng) >= 1e-3));
    }

    #[test]
    fn point_mass_sampling_hits_locations() {
        let law = JumpLaw::new(&JumpMeasure::point_masses(&[(1.0, 1.0), (-2.0, 3.0)]).unwrap(), 1e-3).unwrap();
        assert_eq!(law.mass, 4.0);
        assert_eq!(law.mean, -5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40_000;
        let ones = (0..n).filter(|_| law.sample(&mut rng) == 1.0).count();
        assert!((ones as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn unbounded_density_is_not_simulable() {
        let g = GeneralDensity::new("exp", |x: f64| (-x).exp(), (0.0, f64::INFINITY), true);
        let err = JumpLaw::new(&JumpMeasure::GeneralDensity(g), 1e-3).unwrap_err();
        assert!(matches!(err, Error::NotSimulable(_)));
    }
}
