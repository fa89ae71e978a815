use serde::{Deserialize, Serialize};

use super::Extended;
use crate::error::Result;
use crate::process::{Exponent, LaplaceExponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderFiniteness {
    Finite,
    Infinite,
    /// Finite provided `E(I_∞^{-1}) < ∞`, which cannot be read off `Φ`.
    ConditionalOnNegOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub order: i32,
    pub verdict: OrderFiniteness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum BetaBound {
    Finite(u32),
    /// No failure found within the scanned range.
    AtLeast(u32),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FinitenessReport {
    /// `inf{α > 0 : Φ(α) ≤ 0}`.
    pub alpha0: Option<Extended>,
    /// `sup{k ≥ 1 : -∞ < Φ(-l) < 0 for l ≤ k}`, with `sup ∅ = 1`.
    pub beta: Option<BetaBound>,
    /// `β = 1` came from the empty-set convention (`Φ(-1)` not in `(-∞, 0)`).
    pub beta_from_empty_set: bool,
    /// Every negative moment finite, given `E(I_∞^{-1}) < ∞`.
    pub all_negative_finite: Option<bool>,
    pub orders: Vec<OrderVerdict>,
    /// Machine-readable assumption codes.
    pub assumptions: Vec<String>,
    pub notes: Vec<String>,
}

impl FinitenessReport {
    pub fn merge(mut self, other: FinitenessReport) -> FinitenessReport {
        self.alpha0 = self.alpha0.or(other.alpha0);
        self.beta = self.beta.or(other.beta);
        self.beta_from_empty_set |= other.beta_from_empty_set;
        self.all_negative_finite = self.all_negative_finite.or(other.all_negative_finite);
        self.orders.extend(other.orders);
        self.assumptions.extend(other.assumptions);
        self.notes.extend(other.notes);
        self
    }

    pub fn verdict(&self, order: i32) -> Option<OrderFiniteness> {
        self.orders.iter().find(|o| o.order == order).map(|o| o.verdict)
    }
}

const BRACKET_START: f64 = 64.0;
const BRACKET_CAP: f64 = 1.0e12;
const BISECTION_TOL: f64 = 1e-10;

fn nonpositive<E: LaplaceExponent + ?Sized>(phi: &E, alpha: f64) -> Result<bool> {
    Ok(phi.exponent(alpha)?.is_nonpositive())
}

/// `α₀` and the verdicts for `E(I_∞^n)`, `n = 1..=n_max`.
///
/// `Φ` is concave with `Φ(0) = 0`, so `{α > 0 : Φ(α) ≤ 0}` (divergence
/// included) is a half-line and bisection on membership finds its end.
pub fn positive_finiteness<E: LaplaceExponent + ?Sized>(phi: &E, n_max: u32) -> Result<FinitenessReport> {
    let mut report = FinitenessReport::default();
    let alpha0 = if phi.provably_positive() {
        report.notes.push("PHI_POSITIVE: Phi > 0 on (0, inf) by construction".into());
        Extended::Infinite
    } else {
        let mut hi = BRACKET_START;
        while !nonpositive(phi, hi)? {
            hi *= 2.0;
            if hi > BRACKET_CAP {
                break;
            }
        }
        if hi > BRACKET_CAP {
            report
                .notes
                .push(format!("no sign change of Phi found up to {BRACKET_CAP:e}"));
            Extended::Infinite
        } else {
            let mut lo = 0.0;
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if nonpositive(phi, mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Extended::Finite(0.5 * (lo + hi))
        }
    };
    report.alpha0 = Some(alpha0);
    for n in 1..=n_max {
        // exact per-order test: n < α₀ iff Φ(n) > 0
        let verdict = match phi.exponent(f64::from(n))? {
            Exponent::Finite(v) if v > 0.0 => OrderFiniteness::Finite,
            _ => OrderFiniteness::Infinite,
        };
        report.orders.push(OrderVerdict {
            order: n as i32,
            verdict,
        });
    }
    Ok(report)
}

/// `β` and the verdicts for `E(I_∞^{-m})`, `m = 1..=n_max`.
///
/// `E(I_∞^{-(n+1)}) < ∞` iff `n ≤ β` and `E(I_∞^{-1}) < ∞`; the latter is an
/// assumption recorded in the report.
pub fn negative_finiteness<E: LaplaceExponent + ?Sized>(phi: &E, n_max: u32) -> Result<FinitenessReport> {
    let n_max = n_max.max(1);
    let mut report = FinitenessReport::default();
    let mut failure = None;
    for l in 1..=n_max {
        let ok = matches!(phi.exponent(-f64::from(l))?, Exponent::Finite(v) if v < 0.0);
        if !ok {
            failure = Some(l);
            break;
        }
    }
    let beta = match failure {
        Some(1) => {
            report.beta_from_empty_set = true;
            report
                .notes
                .push("BETA_EMPTY_SET: Phi(-1) is not in (-inf, 0); beta = 1 by convention".into());
            BetaBound::Finite(1)
        }
        Some(l) => BetaBound::Finite(l - 1),
        None => BetaBound::AtLeast(n_max),
    };
    report.beta = Some(beta);
    report.all_negative_finite = Some(matches!(beta, BetaBound::AtLeast(_)));
    report.assumptions.push("ASSUME_NEG1_FINITE".into());
    let bound = match beta {
        BetaBound::Finite(b) | BetaBound::AtLeast(b) => b,
    };
    for m in 1..=n_max {
        let verdict = if m == 1 || m - 1 <= bound {
            OrderFiniteness::ConditionalOnNegOne
        } else {
            OrderFiniteness::Infinite
        };
        report.orders.push(OrderVerdict {
            order: -(m as i32),
            verdict,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{HittingTimeBm, LevyTriplet};

    #[test]
    fn brownian_alpha0() {
        let bm = LevyTriplet::brownian(1.0, 1.0).unwrap();
        let r = positive_finiteness(&bm, 5).unwrap();
        let a0 = r.alpha0.unwrap().finite().unwrap();
        assert!((a0 - 2.0).abs() < 1e-9);
        assert_eq!(r.verdict(1), Some(OrderFiniteness::Finite));
        for n in 2..=5 {
            assert_eq!(r.verdict(n), Some(OrderFiniteness::Infinite));
        }
    }

    #[test]
    fn subordinators_have_all_moments() {
        let ts = LevyTriplet::tempered_stable_subordinator(1.0, 1.0, 0.5).unwrap();
        let r = positive_finiteness(&ts, 10).unwrap();
        assert!(r.alpha0.unwrap().is_infinite());
        assert!(r.orders.iter().all(|o| o.verdict == OrderFiniteness::Finite));
    }

    #[test]
    fn hitting_time_threshold_uses_variance() {
        // Φ(n) > 0 iff 2μ - nσ² > 0
        let h = HittingTimeBm::new(1.0, 0.5, 1.0).unwrap();
        let r = positive_finiteness(&h, 10).unwrap();
        assert!((r.alpha0.unwrap().finite().unwrap() - 8.0).abs() < 1e-9);
        assert_eq!(r.verdict(7), Some(OrderFiniteness::Finite));
        assert_eq!(r.verdict(8), Some(OrderFiniteness::Infinite));
    }

    #[test]
    fn brownian_negative_flip() {
        let ok = negative_finiteness(&LevyTriplet::brownian(-0.4, 1.0).unwrap(), 8).unwrap();
        assert_eq!(ok.all_negative_finite, Some(true));
        assert_eq!(ok.beta, Some(BetaBound::AtLeast(8)));
        let bad = negative_finiteness(&LevyTriplet::brownian(-0.6, 1.0).unwrap(), 8).unwrap();
        assert_eq!(bad.all_negative_finite, Some(false));
        assert!(bad.beta_from_empty_set);
        assert_eq!(bad.verdict(-3), Some(OrderFiniteness::Infinite));
    }

    #[test]
    fn tempered_stable_beta() {
        // Φ(-l) diverges once l > M
        let ts = LevyTriplet::tempered_stable_subordinator(1.0, 2.5, 0.5).unwrap();
        let r = negative_finiteness(&ts, 6).unwrap();
        assert_eq!(r.beta, Some(BetaBound::Finite(2)));
        assert_eq!(r.verdict(-3), Some(OrderFiniteness::ConditionalOnNegOne));
        assert_eq!(r.verdict(-4), Some(OrderFiniteness::Infinite));
    }
}
