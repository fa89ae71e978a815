use super::{ItoCharacteristics, PiiCharacteristics};
use crate::error::{Error, Result};

/// Characteristics of the reversed process `Y_u = X_t - X_{(t-u)-}` on
/// `[0, t)`: `b̄_u = b_{t-u}` and likewise for `c` and `K`.
///
/// The value at `u = t` differs from the reflection only on a null set and is
/// not represented.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedCharacteristics {
    pub horizon: f64,
    pub characteristics: ItoCharacteristics,
}

impl ReversedCharacteristics {
    pub fn into_pii(self) -> PiiCharacteristics {
        PiiCharacteristics::GeneralIto(self.characteristics)
    }

    pub fn as_pii(&self) -> PiiCharacteristics {
        PiiCharacteristics::GeneralIto(self.characteristics.clone())
    }
}

pub fn reverse_characteristics(pii: &PiiCharacteristics, t: f64) -> Result<ReversedCharacteristics> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("reversal horizon must be > 0, got {t}")));
    }
    Ok(ReversedCharacteristics {
        horizon: t,
        characteristics: pii.to_ito().reflect(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{LevyTriplet, TimeFn};

    #[test]
    fn homogeneous_is_invariant() {
        let p = PiiCharacteristics::Homogeneous(LevyTriplet::compound_poisson_gaussian(1.0, 0.3, 1.0).unwrap());
        let r = reverse_characteristics(&p, 2.0).unwrap();
        assert_eq!(r.characteristics, p.to_ito());
    }

    #[test]
    fn linear_intensity_flips() {
        let p = PiiCharacteristics::non_hom_poisson(TimeFn::parse("t").unwrap());
        let r = reverse_characteristics(&p, 1.0).unwrap();
        for u in [0.0, 0.25, 0.9] {
            assert!((r.characteristics.drift.eval(u) - (1.0 - u)).abs() < 1e-15);
            assert!((r.characteristics.jumps[0].weight.eval(u) - (1.0 - u)).abs() < 1e-15);
        }
    }

    #[test]
    fn time_change_rate_mass() {
        let base = LevyTriplet::brownian(1.0, 0.5).unwrap();
        let p = PiiCharacteristics::log_time_change(base, 2.0);
        let t: f64 = 1.0;
        let r = reverse_characteristics(&p, t).unwrap();
        // drift density is b₀τ'(t-u) with b₀ = 1
        let mass = r.characteristics.drift.integrate(0.0, t).unwrap();
        assert!((mass - 2.0 * (1.0 + t).ln()).abs() < 1e-10);
        assert!((r.characteristics.drift.eval(0.25) - 2.0 / 1.75).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_horizon() {
        let p = PiiCharacteristics::Homogeneous(LevyTriplet::zero());
        assert!(reverse_characteristics(&p, 0.0).is_err());
    }
}
