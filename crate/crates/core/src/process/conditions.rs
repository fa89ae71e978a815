use serde::{Deserialize, Serialize};

use super::PiiCharacteristics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Unknown,
}

impl Verdict {
    /// Conjunction: any violation wins, then any unknown.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Unknown, _) | (_, Unknown) => Unknown,
            _ => Satisfied,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Unknown => "unknown",
        }
    }
}

// sampling density for time-dependent jump scales
const SCALE_SAMPLES: usize = 256;

/// Whether `∫₀ᵗ∫_{|x|>1} e^{-αx} K_s(dx) ds < ∞`.
///
/// The set of `a` with `∫_{|x|>1} e^{-ax} K(dx) < ∞` is an interval, so for a
/// time-dependent scale `g_s` it suffices to test the extremes of `αg_s`.
pub fn check_exp_moment(pii: &PiiCharacteristics, t: f64, alpha: f64) -> Verdict {
    if let Some(triplet) = pii.as_levy() {
        return triplet.exp_moment_verdict(alpha);
    }
    let ito = pii.to_ito();
    let mut verdict = Verdict::Satisfied;
    for j in &ito.jumps {
        match j.weight.integrate(0.0, t) {
            Ok(w) if w.is_finite() => {}
            Ok(_) => return Verdict::Violated,
            Err(_) => verdict = verdict.and(Verdict::Unknown),
        }
        let (lo, hi) = j.scale.sampled_range(0.0, t, SCALE_SAMPLES);
        verdict = verdict
            .and(j.measure.tail_verdict(alpha * lo))
            .and(j.measure.tail_verdict(alpha * hi));
    }
    verdict
}

/// Hypothesis of the moment ladder at order `α`.
///
/// For `α ≥ 1` this is `∫₀ᵗ∫_{x<-1} e^{-(α+δ)x} K_s(dx) ds < ∞` with `δ = 1`;
/// for `α < 0` it is `∫₀ᵗ∫_{x>1} e^{(|α|+1)x} K_s(dx) ds < ∞`. Both reduce to
/// an exponential-moment check at a shifted order because the opposite tail is
/// always integrable. Orders in `[0, 1)` use the `α = 1` condition.
pub fn check_moment_ladder_condition(pii: &PiiCharacteristics, t: f64, alpha: f64) -> Verdict {
    const DELTA: f64 = 1.0;
    let shifted = if alpha < 0.0 {
        alpha - 1.0
    } else {
        alpha.max(1.0) + DELTA
    };
    check_exp_moment(pii, t, shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{JumpMeasure, LevyTriplet, TimeFn};

    #[test]
    fn parametric_families() {
        let ts = PiiCharacteristics::Homogeneous(LevyTriplet::tempered_stable_subordinator(1.0, 1.0, 0.5).unwrap());
        assert_eq!(check_exp_moment(&ts, 1.0, -2.0), Verdict::Violated);
        assert_eq!(check_exp_moment(&ts, 1.0, -0.5), Verdict::Satisfied);
        assert_eq!(check_moment_ladder_condition(&ts, 1.0, 4.0), Verdict::Satisfied);
        // rt11 at α = -1 asks for e^{2x}, beyond the tempering
        assert_eq!(check_moment_ladder_condition(&ts, 1.0, -1.0), Verdict::Violated);

        let gj = PiiCharacteristics::Homogeneous(LevyTriplet::compound_poisson_gaussian(1.0, 0.0, 1.0).unwrap());
        for a in [-5.0, -1.0, 1.0, 7.0] {
            assert_eq!(check_moment_ladder_condition(&gj, 1.0, a), Verdict::Satisfied);
        }

        let pm = PiiCharacteristics::Homogeneous(
            LevyTriplet::new(0.0, 0.0, JumpMeasure::point_masses(&[(-3.0, 1.0)]).unwrap()).unwrap(),
        );
        assert_eq!(check_moment_ladder_condition(&pm, 1.0, 20.0), Verdict::Satisfied);

        let poisson = PiiCharacteristics::non_hom_poisson(TimeFn::parse("t").unwrap());
        assert_eq!(check_exp_moment(&poisson, 1.0, -4.0), Verdict::Satisfied);
        assert_eq!(check_exp_moment(&PiiCharacteristics::Homogeneous(LevyTriplet::zero()), 1.0, 9.0), Verdict::Satisfied);
    }

    #[test]
    fn integrated_scale_range_matters() {
        let base = LevyTriplet::tempered_stable_subordinator(1.0, 1.0, 0.5).unwrap();
        // g crosses to -1.5 within [0, 2], so α = 1 maps to αg = -1.5 < -M
        let p = PiiCharacteristics::integrated(base, TimeFn::parse("1 - 1.25*t").unwrap());
        assert_eq!(check_exp_moment(&p, 2.0, 1.0), Verdict::Violated);
        assert_eq!(check_exp_moment(&p, 0.5, 1.0), Verdict::Satisfied);
    }

    #[test]
    fn verdict_conjunction() {
        use Verdict::*;
        assert_eq!(Satisfied.and(Unknown), Unknown);
        assert_eq!(Unknown.and(Violated), Violated);
        assert_eq!(Satisfied.and(Satisfied), Satisfied);
    }
}
