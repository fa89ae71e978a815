//! Jump kernels `K(dx)` and their exponential integrals.
//!
//! Every kernel is stored in the untruncated convention: the compensator of a
//! jump of size `x` is `x` itself, so the jump part of the Laplace exponent is
//! `ψ(a) = ∫(e^{-ax} - 1 + ax) K(dx)`.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use super::Verdict;
use crate::error::{Error, Result};
use crate::process::Exponent;
use crate::quad::{self, Tolerance};

/// `e^{-y} - 1 + y` without cancellation for small `|y|`.
pub(crate) fn exp_compensated(y: f64) -> f64 {
    if y.abs() < 1e-3 {
        let y2 = y * y;
        y2 * (0.5 - y / 6.0 + y2 / 24.0 - y2 * y / 120.0)
    } else {
        (-y).exp_m1() + y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub location: f64,
    pub rate: f64,
}

/// Caller-supplied Lévy density.
#[derive(Clone)]
pub struct GeneralDensity {
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
    integrability_verified: bool,
    envelope: Option<f64>,
    label: String,
}

impl GeneralDensity {
    /// `integrability_verified` records the caller's assertion that
    /// `∫(x² ∧ |x|) K(dx) < ∞`; it cannot be checked numerically in general.
    pub fn new(
        label: impl Into<String>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
        integrability_verified: bool,
    ) -> Self {
        GeneralDensity {
            density: Arc::new(density),
            support,
            integrability_verified,
            envelope: None,
            label: label.into(),
        }
    }

    /// Declares `sup K(x)` over the support, which makes bounded-support
    /// densities simulable by rejection.
    pub fn with_envelope(mut self, bound: f64) -> Self {
        self.envelope = Some(bound);
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            0.0
        } else {
            (self.density)(x)
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn envelope(&self) -> Option<f64> {
        self.envelope
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn integrability_verified(&self) -> bool {
        self.integrability_verified
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let (lo, hi) = self.support;
        let g = |x: f64| {
            let d = self.eval(x);
            if d == 0.0 {
                0.0
            } else {
                f(x) * d
            }
        };
        let tol = Tolerance::default();
        let mut total = 0.0;
        if lo < 0.0 && hi > 0.0 {
            total += quad::integrate_range(g, lo, 0.0, 0.0, tol)?.value;
            total += quad::integrate_range(g, 0.0, hi, 0.0, tol)?.value;
        } else {
            total += quad::integrate_range(g, lo, hi, 0.5 * (lo + hi), tol)?.value;
        }
        Ok(total)
    }

    /// Heuristic tail test for `∫_{|x|>1} e^{-ax} K(dx) < ∞`: samples the
    /// integrand times `x²` along a geometric grid in each unbounded tail.
    fn tail_verdict(&self, a: f64) -> Verdict {
        let (lo, hi) = self.support;
        let mut verdict = Verdict::Satisfied;
        for (unbounded, sign) in [(hi.is_infinite(), 1.0), (lo.is_infinite(), -1.0)] {
            if !unbounded {
                continue;
            }
            // keep |ax| small enough that neither factor under- or overflows
            let x_max = if a == 0.0 { 1024.0 } else { (600.0 / a.abs()).min(1024.0) };
            let samples: Vec<f64> = (0..8)
                .map(|k| {
                    let x = sign * x_max / f64::from(1u32 << (7 - k));
                    (-a * x).exp() * self.eval(x) * x * x
                })
                .collect();
            if samples.iter().any(|v| v.is_nan()) {
                return Verdict::Unknown;
            }
            let last = samples[samples.len() - 1];
            let growing = samples.windows(2).rev().take(3).all(|w| w[1] > w[0]);
            if last.is_infinite() || (growing && last > samples[0]) {
                return Verdict::Violated;
            }
            let peak = samples.iter().cloned().fold(0.0, f64::max);
            let decaying = samples.windows(2).rev().take(3).all(|w| w[1] <= w[0]);
            if !(decaying && last <= 1e-3 * peak.max(f64::MIN_POSITIVE)) && last != 0.0 {
                verdict = Verdict::Unknown;
            }
        }
        verdict
    }
}

impl fmt::Debug for GeneralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralDensity")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("integrability_verified", &self.integrability_verified)
            .field("envelope", &self.envelope)
            .finish()
    }
}

impl PartialEq for GeneralDensity {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.support == other.support
            && self.integrability_verified == other.integrability_verified
            && self.envelope == other.envelope
    }
}

/// Which half-lines carry mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpSupport {
    Empty,
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub enum JumpMeasure {
    #[default]
    None,
    /// `K = Σ λ_i δ_{x_i}`.
    PointMasses(Vec<PointMass>),
    /// Compound-Poisson kernel `λ · N(mean, std²)`.
    GaussianJumps { rate: f64, mean: f64, std: f64 },
    /// `c e^{-Mx} x^{-1-β}` on `x > 0`.
    TemperedStable { c: f64, m: f64, beta: f64 },
    GeneralDensity(GeneralDensity),
}


// Below this cut the tempered-stable integrand is expanded in series.
const TS_SERIES_CUT: f64 = 1e-4;

impl JumpMeasure {
    pub fn point_masses(masses: &[(f64, f64)]) -> Result<Self> {
        let m = JumpMeasure::PointMasses(
            masses
                .iter()
                .map(|&(location, rate)| PointMass { location, rate })
                .collect(),
        );
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(rate: f64, mean: f64, std: f64) -> Result<Self> {
        let m = JumpMeasure::GaussianJumps { rate, mean, std };
        m.validate()?;
        Ok(m)
    }

    pub fn tempered_stable(c: f64, m: f64, beta: f64) -> Result<Self> {
        let k = JumpMeasure::TemperedStable { c, m, beta };
        k.validate()?;
        Ok(k)
    }

    /// Checks parameter ranges and the integrability condition
    /// `∫(x² ∧ |x|) K(dx) < ∞`, which every parametric family satisfies.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match self {
            JumpMeasure::None => Ok(()),
            JumpMeasure::PointMasses(ms) => {
                for p in ms {
                    if !(finite(p.location) && p.location != 0.0) {
                        return Err(Error::invalid(format!(
                            "point-mass location must be finite and nonzero, got {}",
                            p.location
                        )));
                    }
                    if !(finite(p.rate) && p.rate > 0.0) {
                        return Err(Error::invalid(format!(
                            "point-mass rate must be > 0, got {}",
                            p.rate
                        )));
                    }
                }
                Ok(())
            }
            JumpMeasure::GaussianJumps { rate, mean, std } => {
                if !(finite(*rate) && *rate > 0.0) {
                    return Err(Error::invalid(format!("gaussian jump rate must be > 0, got {rate}")));
                }
                if !(finite(*std) && *std > 0.0) {
                    return Err(Error::invalid(format!("gaussian jump std must be > 0, got {std}")));
                }
                if !finite(*mean) {
                    return Err(Error::invalid("gaussian jump mean must be finite"));
                }
                Ok(())
            }
            JumpMeasure::TemperedStable { c, m, beta } => {
                if !(finite(*c) && *c > 0.0 && finite(*m) && *m > 0.0 && *beta > 0.0 && *beta < 1.0) {
                    return Err(Error::invalid(format!(
                        "tempered stable needs c > 0, M > 0, 0 < beta < 1; got c={c}, M={m}, beta={beta}"
                    )));
                }
                Ok(())
            }
            JumpMeasure::GeneralDensity(g) => {
                if !(g.support.0 < g.support.1) {
                    return Err(Error::invalid("density support must be a nonempty interval"));
                }
                if !g.integrability_verified {
                    return Err(Error::invalid(format!(
                        "density '{}': integrability of (x^2 ∧ |x|) must be asserted by the caller",
                        g.label
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            JumpMeasure::None => true,
            JumpMeasure::PointMasses(ms) => ms.is_empty(),
            _ => false,
        }
    }

    pub fn support(&self) -> JumpSupport {
        let from = |pos: bool, neg: bool| match (pos, neg) {
            (false, false) => JumpSupport::Empty,
            (true, false) => JumpSupport::Positive,
            (false, true) => JumpSupport::Negative,
            (true, true) => JumpSupport::Both,
        };
        match self {
            JumpMeasure::None => JumpSupport::Empty,
            JumpMeasure::PointMasses(ms) => from(
                ms.iter().any(|p| p.location > 0.0),
                ms.iter().any(|p| p.location < 0.0),
            ),
            JumpMeasure::GaussianJumps { .. } => JumpSupport::Both,
            JumpMeasure::TemperedStable { .. } => JumpSupport::Positive,
            JumpMeasure::GeneralDensity(g) => from(g.support.1 > 0.0, g.support.0 < 0.0),
        }
    }

    /// Finite total mass, so the kernel is a compound-Poisson kernel.
    pub fn is_finite_activity(&self) -> bool {
        match self {
            JumpMeasure::None | JumpMeasure::PointMasses(_) | JumpMeasure::GaussianJumps { .. } => true,
            JumpMeasure::TemperedStable { .. } => false,
            JumpMeasure::GeneralDensity(g) => g.support.0 > 0.0 || g.support.1 < 0.0,
        }
    }

    /// `∫ x K(dx)`.
    pub fn first_moment(&self) -> Result<f64> {
        match self {
            JumpMeasure::None => Ok(0.0),
            JumpMeasure::PointMasses(ms) => Ok(ms.iter().map(|p| p.rate * p.location).sum()),
            JumpMeasure::GaussianJumps { rate, mean, .. } => Ok(rate * mean),
            JumpMeasure::TemperedStable { c, m, beta } => Ok(c * gamma(1.0 - beta) * m.powf(beta - 1.0)),
            JumpMeasure::GeneralDensity(g) => g.integrate(|x| x),
        }
    }

    /// Whether `∫_{|x|>1} e^{-ax} K(dx) < ∞`.
    pub fn tail_verdict(&self, a: f64) -> Verdict {
        match self {
            JumpMeasure::None | JumpMeasure::PointMasses(_) | JumpMeasure::GaussianJumps { .. } => {
                Verdict::Satisfied
            }
            // positive support: only a < -M makes e^{-ax} beat the tempering
            JumpMeasure::TemperedStable { m, .. } => {
                if a >= -m {
                    Verdict::Satisfied
                } else {
                    Verdict::Violated
                }
            }
            JumpMeasure::GeneralDensity(g) => g.tail_verdict(a),
        }
    }

    /// `ψ(a) = ∫(e^{-ax} - 1 + ax) K(dx)`, or `Divergent` when the exponential
    /// moment is infinite.
    pub fn compensated_laplace(&self, a: f64) -> Result<Exponent> {
        let value = match self {
            JumpMeasure::None => 0.0,
            JumpMeasure::PointMasses(ms) => ms.iter().map(|p| p.rate * exp_compensated(a * p.location)).sum(),
            JumpMeasure::GaussianJumps { rate, mean, std } => {
                let e = -a * mean + 0.5 * a * a * std * std;
                if e > 700.0 {
                    return Err(Error::Overflow(format!(
                        "gaussian jump mgf exponent {e} at a = {a}"
                    )));
                }
                rate * (e.exp_m1() + a * mean)
            }
            JumpMeasure::TemperedStable { c, m, beta } => {
                if a < -m {
                    return Ok(Exponent::Divergent);
                }
                c * gamma(1.0 - beta) / (-beta)
                    * ((m + a).powf(*beta) - m.powf(*beta) - a * beta * m.powf(beta - 1.0))
            }
            JumpMeasure::GeneralDensity(g) => match g.tail_verdict(a) {
                Verdict::Violated => return Ok(Exponent::Divergent),
                Verdict::Unknown => {
                    return Err(Error::Integration(format!(
                        "exponential moment of density '{}' at a = {a} is inconclusive",
                        g.label
                    )))
                }
                Verdict::Satisfied => g.integrate(|x| exp_compensated(a * x))?,
            },
        };
        Ok(Exponent::Finite(value))
    }

    /// `∫ f(x) K(dx)` by quadrature, for `f` vanishing like `x²` at the origin.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let tol = Tolerance::default();
        match self {
            JumpMeasure::None => Ok(0.0),
            JumpMeasure::PointMasses(ms) => Ok(ms.iter().map(|p| p.rate * f(p.location)).sum()),
            JumpMeasure::GaussianJumps { rate, mean, std } => {
                let norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
                let g = |x: f64| {
                    let z = (x - mean) / std;
                    f(x) * norm * (-0.5 * z * z).exp()
                };
                let r = quad::integrate_range(g, f64::NEG_INFINITY, f64::INFINITY, *mean, tol)?;
                Ok(rate * r.value)
            }
            JumpMeasure::TemperedStable { c, m, beta } => {
                let g = |x: f64| f(x) * (-m * x).exp() * x.powf(-1.0 - beta);
                let near = quad::integrate(g, 0.0, 1.0, tol)?.value;
                let far = quad::integrate_to_infinity(g, 1.0, tol)?.value;
                Ok(c * (near + far))
            }
            JumpMeasure::GeneralDensity(g) => g.integrate(f),
        }
    }

    /// `ψ(a)` by direct quadrature, independent of the closed forms. The
    /// tempered-stable singularity at the origin is integrated term by term
    /// below `1e-4`.
    pub fn compensated_laplace_quadrature(&self, a: f64) -> Result<Exponent> {
        if self.tail_verdict(a) == Verdict::Violated {
            return Ok(Exponent::Divergent);
        }
        match self {
            JumpMeasure::TemperedStable { c, m, beta } => {
                let tol = Tolerance::default();
                let series = ts_series_head(*m, *beta, a, TS_SERIES_CUT);
                let g = |x: f64| exp_compensated(a * x) * (-m * x).exp() * x.powf(-1.0 - beta);
                let mid = quad::integrate(g, TS_SERIES_CUT, 1.0, tol)?.value;
                let tail = quad::integrate_to_infinity(g, 1.0, tol)?.value;
                Ok(Exponent::Finite(c * (series + mid + tail)))
            }
            _ => Ok(Exponent::Finite(self.integrate(|x| exp_compensated(a * x))?)),
        }
    }
}

/// `∫_0^δ x^{-1-β} e^{-Mx}(e^{-ax} - 1 + ax) dx` from the power series of the
/// smooth factor; the series starts at `x²`, so the integrand is `O(x^{1-β})`.
fn ts_series_head(m: f64, beta: f64, a: f64, delta: f64) -> f64 {
    // coefficient of x^k in e^{-(M+a)x} - e^{-Mx} + a x e^{-Mx}
    let mut total = 0.0;
    let mut fact = 1.0; // k!
    let mut fact_prev = 1.0; // (k-1)!
    for k in 1..=12u32 {
        fact *= f64::from(k);
        if k >= 2 {
            fact_prev *= f64::from(k - 1);
        }
        let kf = i32::try_from(k).unwrap_or(i32::MAX);
        let ck = ((-(m + a)).powi(kf) - (-m).powi(kf)) / fact + a * (-m).powi(kf - 1) / fact_prev;
        if k >= 2 {
            let p = f64::from(k) - beta;
            total += ck * delta.powf(p) / p;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_exponential_is_smooth_through_zero() {
        for y in [-2e-3, -1e-3, -1e-6, 0.0, 1e-6, 9.99e-4, 1e-3, 2e-3, 1.5] {
            let direct = (-y as f64).exp() - 1.0 + y;
            let got = exp_compensated(y);
            assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "y={y}");
            assert!(got >= 0.0);
        }
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let kernels = [
            JumpMeasure::gaussian(1.3, 0.2, 0.7).unwrap(),
            JumpMeasure::gaussian(1.0, 0.0, 1.0).unwrap(),
            JumpMeasure::tempered_stable(1.0, 1.0, 0.5).unwrap(),
            JumpMeasure::tempered_stable(0.4, 2.5, 0.8).unwrap(),
            JumpMeasure::point_masses(&[(1.0, 2.0), (-0.5, 0.3)]).unwrap(),
        ];
        for k in &kernels {
            for a in [-0.9, -0.3, 0.5, 1.0, 2.0, 3.0] {
                let closed = k.compensated_laplace(a).unwrap().finite().unwrap();
                let quad = k.compensated_laplace_quadrature(a).unwrap().finite().unwrap();
                assert!(
                    (closed - quad).abs() <= 1e-7 * (1.0 + closed.abs()),
                    "{k:?} a={a}: {closed} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn tempered_stable_first_moment_by_quadrature() {
        let k = JumpMeasure::tempered_stable(1.0, 1.0, 0.5).unwrap();
        let q = k.integrate(|x| x * (1.0 - (-1e3 * x).exp())).unwrap();
        // the damping factor only removes mass below x ~ 1e-3
        assert!((q - k.first_moment().unwrap()).abs() < 0.1);
        let exact = k.first_moment().unwrap();
        assert!((exact - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tempered_stable_divergence_threshold() {
        let k = JumpMeasure::tempered_stable(1.0, 1.0, 0.5).unwrap();
        assert_eq!(k.tail_verdict(-1.0), Verdict::Satisfied);
        assert_eq!(k.tail_verdict(-2.0), Verdict::Violated);
        assert!(k.compensated_laplace(-2.0).unwrap().is_divergent());
        assert!(k.compensated_laplace(-1.0).unwrap().finite().is_some());
    }

    #[test]
    fn validation() {
        assert!(JumpMeasure::point_masses(&[(0.0, 1.0)]).is_err());
        assert!(JumpMeasure::point_masses(&[(1.0, -1.0)]).is_err());
        assert!(JumpMeasure::gaussian(1.0, 0.0, 0.0).is_err());
        assert!(JumpMeasure::tempered_stable(1.0, 1.0, 1.0).is_err());
        let unverified = GeneralDensity::new("exp(-x)", |x: f64| (-x).exp(), (0.0, f64::INFINITY), false);
        assert!(JumpMeasure::GeneralDensity(unverified).validate().is_err());
    }

    #[test]
    fn general_density_tails() {
        let g = GeneralDensity::new("exp(-2x)", |x: f64| (-2.0 * x).exp(), (0.5, f64::INFINITY), true);
        let k = JumpMeasure::GeneralDensity(g);
        assert_eq!(k.tail_verdict(-1.0), Verdict::Satisfied);
        assert_eq!(k.tail_verdict(-3.0), Verdict::Violated);
        // matches a point-free closed form: ∫_{1/2}^∞ (e^{-ax}-1+ax) e^{-2x} dx
        let a: f64 = 0.7;
        let exact = (-(2.0 + a) * 0.5).exp() / (2.0 + a) - (-1.0f64).exp() / 2.0
            + a * (-1.0f64).exp() * (0.5 / 2.0 + 1.0 / 4.0);
        let got = k.compensated_laplace(a).unwrap().finite().unwrap();
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }
}
