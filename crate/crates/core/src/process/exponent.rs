use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Value of a Laplace exponent on the extended real line.
///
/// `Divergent` stands for `Φ(α) = -∞`, i.e. `E e^{-αX_t} = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Divergent,
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(v),
            Exponent::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Exponent::Divergent)
    }

    /// `Φ(α) ≤ 0`, counting divergence (`-∞`) as non-positive.
    pub fn is_nonpositive(self) -> bool {
        match self {
            Exponent::Finite(v) => v <= 0.0,
            Exponent::Divergent => true,
        }
    }

    pub fn scale(self, by: f64) -> Exponent {
        match self {
            Exponent::Finite(v) => Exponent::Finite(v * by),
            Exponent::Divergent => Exponent::Divergent,
        }
    }
}

/// A Laplace exponent `Φ` of a Lévy process, `E e^{-αX_t} = e^{-tΦ(α)}`.
pub trait LaplaceExponent {
    fn exponent(&self, alpha: f64) -> Result<Exponent>;

    /// True when `Φ(α) > 0` for every `α > 0` follows analytically from the
    /// parametrisation. Used to report an infinite positive-moment threshold
    /// without searching.
    fn provably_positive(&self) -> bool {
        false
    }

    /// `Φ(0), Φ(1), …, Φ(n)`.
    fn at_integers(&self, n: u32) -> Result<Vec<Exponent>> {
        (0..=n).map(|k| self.exponent(f64::from(k))).collect()
    }
}

impl<T: LaplaceExponent + ?Sized> LaplaceExponent for &T {
    fn exponent(&self, alpha: f64) -> Result<Exponent> {
        (**self).exponent(alpha)
    }
    fn provably_positive(&self) -> bool {
        (**self).provably_positive()
    }
}

/// Brownian motion with drift `mu` and volatility `sigma`, run on the first
/// passage times of an independent unit-variance Brownian motion with drift
/// `b > 0`:
///
/// `Φ(α) = sqrt(b² + 2αμ - α²σ²) - b`, finite while the radicand is `≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeBm {
    pub mu: f64,
    pub sigma: f64,
    pub b: f64,
}

impl HittingTimeBm {
    pub fn new(mu: f64, sigma: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(crate::Error::invalid(format!("hitting-time drift b must be > 0, got {b}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(crate::Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        if !mu.is_finite() {
            return Err(crate::Error::invalid("mu must be finite"));
        }
        Ok(HittingTimeBm { mu, sigma, b })
    }

    pub fn radicand(&self, alpha: f64) -> f64 {
        self.b * self.b + 2.0 * alpha * self.mu - alpha * alpha * self.sigma * self.sigma
    }
}

impl LaplaceExponent for HittingTimeBm {
    fn exponent(&self, alpha: f64) -> Result<Exponent> {
        let d = self.radicand(alpha);
        if d < 0.0 {
            return Ok(Exponent::Divergent);
        }
        Ok(Exponent::Finite(d.sqrt() - self.b))
    }
}

/// Free-function form of [`HittingTimeBm`]'s exponent.
pub fn hitting_time_subordinator_exponent(mu: f64, sigma: f64, b: f64, alpha: f64) -> Result<Exponent> {
    HittingTimeBm::new(mu, sigma, b)?.exponent(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hitting_time_exponent_basics() {
        let h = HittingTimeBm::new(1.0, 0.5, 2.0).unwrap();
        assert_eq!(h.exponent(0.0).unwrap(), Exponent::Finite(0.0));
        // Φ(α) < 0 exactly when -b² ≤ 2αμ - α²σ² < 0
        for alpha in [-3.0, -1.0, 9.0, 10.0] {
            let q = 2.0 * alpha * h.mu - alpha * alpha * h.sigma * h.sigma;
            match h.exponent(alpha).unwrap() {
                Exponent::Finite(v) if q < 0.0 => assert!(v < 0.0, "alpha {alpha}"),
                Exponent::Finite(v) => assert!(v >= 0.0),
                Exponent::Divergent => assert!(q < -h.b * h.b),
            }
        }
        // boundary of the domain stays finite
        let h = HittingTimeBm::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(h.exponent(1.0).unwrap(), Exponent::Finite(-1.0));
        assert!(h.exponent(1.0 + 1e-9).unwrap().is_divergent());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HittingTimeBm::new(1.0, 0.0, 1.0).is_err());
        assert!(HittingTimeBm::new(1.0, 1.0, -1.0).is_err());
    }
}
