use statrs::function::gamma::gamma;

use super::{Exponent, JumpMeasure, JumpSupport, LaplaceExponent, Verdict};
use crate::error::{Error, Result};

/// Generating triplet `(b₀, c₀, K₀)` of a Lévy process, untruncated:
///
/// `Φ(α) = αb₀ - ½α²c₀ - ∫(e^{-αx} - 1 + αx) K₀(dx)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevyTriplet {
    pub b0: f64,
    pub c0: f64,
    pub jumps: JumpMeasure,
}

impl LevyTriplet {
    pub fn new(b0: f64, c0: f64, jumps: JumpMeasure) -> Result<Self> {
        let t = LevyTriplet { b0, c0, jumps };
        t.validate()?;
        Ok(t)
    }

    /// Converts a drift quoted with truncated compensation `αx 1_{|x|≤1}`.
    /// The big jumps' mean moves into the drift: `b = b_trunc + ∫_{|x|>1} x K(dx)`.
    pub fn from_truncated(b_trunc: f64, c0: f64, jumps: JumpMeasure) -> Result<Self> {
        jumps.validate()?;
        let big = jumps.integrate(|x| if x.abs() > 1.0 { x } else { 0.0 })?;
        Self::new(b_trunc + big, c0, jumps)
    }

    /// Brownian motion `μs + σW_s` given the variance rate `σ²`.
    pub fn brownian(mu: f64, variance: f64) -> Result<Self> {
        Self::new(mu, variance, JumpMeasure::None)
    }

    /// Deterministic drift `X_s = μs`.
    pub fn drift(mu: f64) -> Result<Self> {
        Self::new(mu, 0.0, JumpMeasure::None)
    }

    pub fn zero() -> Self {
        LevyTriplet::default()
    }

    /// Standard Poisson process with rate `λ` (unit jumps, no drift).
    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(rate, 0.0, JumpMeasure::point_masses(&[(1.0, rate)])?)
    }

    /// Compound Poisson process with `N(mean, std²)` jumps and no drift.
    pub fn compound_poisson_gaussian(rate: f64, mean: f64, std: f64) -> Result<Self> {
        Self::new(rate * mean, 0.0, JumpMeasure::gaussian(rate, mean, std)?)
    }

    /// Driftless tempered-stable subordinator with Lévy density
    /// `c e^{-Mx} x^{-1-β}`; `Φ(α) = cΓ(1-β)/β ((M+α)^β - M^β)`.
    pub fn tempered_stable_subordinator(c: f64, m: f64, beta: f64) -> Result<Self> {
        let jumps = JumpMeasure::tempered_stable(c, m, beta)?;
        let b0 = c * gamma(1.0 - beta) * m.powf(beta - 1.0);
        Self::new(b0, 0.0, jumps)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b0.is_finite() {
            return Err(Error::invalid(format!("drift must be finite, got {}", self.b0)));
        }
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            return Err(Error::invalid(format!("c0 must be >= 0, got {}", self.c0)));
        }
        self.jumps.validate()
    }

    /// Drift net of the jump compensator, `b₀ - ∫x K₀(dx)`.
    pub fn net_drift(&self) -> Result<f64> {
        Ok(self.b0 - self.jumps.first_moment()?)
    }

    /// Nondecreasing paths: no Gaussian part, positive jumps, net drift ≥ 0.
    pub fn is_subordinator(&self) -> bool {
        self.c0 == 0.0
            && matches!(self.jumps.support(), JumpSupport::Positive | JumpSupport::Empty)
            && self.net_drift().map(|d| d >= -1e-12 * (1.0 + self.b0.abs())).unwrap_or(false)
    }

    /// `E e^{-αX_1} < ∞`, i.e. `∫_{|x|>1} e^{-αx} K₀(dx) < ∞`.
    pub fn exp_moment_verdict(&self, alpha: f64) -> Verdict {
        self.jumps.tail_verdict(alpha)
    }

    /// Same exponent evaluated by quadrature of the jump integral.
    pub fn exponent_by_quadrature(&self, alpha: f64) -> Result<Exponent> {
        let psi = self.jumps.compensated_laplace_quadrature(alpha)?;
        Ok(match psi {
            Exponent::Finite(p) => Exponent::Finite(alpha * self.b0 - 0.5 * alpha * alpha * self.c0 - p),
            Exponent::Divergent => Exponent::Divergent,
        })
    }

    pub fn mean_rate(&self) -> f64 {
        // E X_1 = b₀ in the untruncated convention
        self.b0
    }

    /// `Var X_1 = c₀ + ∫x² K₀(dx)`.
    pub fn variance_rate(&self) -> Result<f64> {
        Ok(self.c0 + self.jumps.integrate(|x| x * x)?)
    }
}

impl LaplaceExponent for LevyTriplet {
    fn exponent(&self, alpha: f64) -> Result<Exponent> {
        if alpha == 0.0 {
            return Ok(Exponent::Finite(0.0));
        }
        Ok(match self.jumps.compensated_laplace(alpha)? {
            Exponent::Finite(p) => Exponent::Finite(alpha * self.b0 - 0.5 * alpha * alpha * self.c0 - p),
            Exponent::Divergent => Exponent::Divergent,
        })
    }

    fn provably_positive(&self) -> bool {
        // Φ(α) = α(b₀ - ∫xK) + ∫(1 - e^{-αx})K for a subordinator
        self.is_subordinator()
            && (!self.jumps.is_empty() || self.net_drift().map(|d| d > 0.0).unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(t: &LevyTriplet, a: f64) -> f64 {
        t.exponent(a).unwrap().finite().unwrap()
    }

    #[test]
    fn brownian_exponent() {
        let t = LevyTriplet::brownian(1.5, 1.0).unwrap();
        for a in [-2.0, 0.5, 1.0, 3.0] {
            assert!((phi(&t, a) - (1.5 * a - 0.5 * a * a)).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_jump_exponent() {
        let t = LevyTriplet::compound_poisson_gaussian(1.0, 0.0, 1.0).unwrap();
        for a in [-2.0, 0.5, 1.0, 3.0] {
            let want = 1.0 - (a * a / 2.0f64).exp();
            assert!((phi(&t, a) - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn tempered_stable_matches_closed_display() {
        let (c, m, beta) = (1.0, 1.0, 0.5);
        let t = LevyTriplet::tempered_stable_subordinator(c, m, beta).unwrap();
        for a in [0.5, 1.0, 2.0, 5.0] {
            let want = c * gamma(1.0 - beta) / beta * ((m + a).powf(beta) - m.powf(beta));
            assert!((phi(&t, a) - want).abs() < 1e-12, "a={a}");
            assert!(phi(&t, a) > 0.0);
        }
        assert!(t.provably_positive());
    }

    #[test]
    fn poisson_exponent() {
        let t = LevyTriplet::poisson(2.0).unwrap();
        for a in [1.0, 2.0, 3.0] {
            let want = 2.0 * (1.0 - (-a as f64).exp());
            assert!((phi(&t, a) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn truncated_conversion() {
        let k = JumpMeasure::point_masses(&[(2.0, 1.0), (0.5, 3.0)]).unwrap();
        let t = LevyTriplet::from_truncated(0.1, 0.0, k).unwrap();
        assert!((t.b0 - 2.1).abs() < 1e-14);
        // truncated display: αb - Σλ(e^{-αx} - 1 + αx 1_{|x|≤1})
        let a: f64 = 0.7;
        let trunc = a * 0.1
            - 1.0 * ((-2.0 * a).exp() - 1.0)
            - 3.0 * ((-0.5 * a).exp() - 1.0 + 0.5 * a);
        assert!((phi(&t, a) - trunc).abs() < 1e-14);
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(LevyTriplet::brownian(0.0, -1.0).is_err());
    }
}
