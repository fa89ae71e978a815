//! Negative moments of `I_∞` and `I_t`.
//!
//! Nothing fixes `E(I^{-1})` analytically, so every result here is either a
//! ratio to it or a ladder descended from a supplied base curve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::levy::factorial;
use super::SmoothingSpline;
use crate::error::{Error, Result};
use crate::process::{check_moment_ladder_condition, Exponent, LaplaceExponent, PiiCharacteristics, Verdict};

fn negative_exponents<E: LaplaceExponent + ?Sized>(phi: &E, upto: u32) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(upto as usize);
    for k in 1..=upto {
        match phi.exponent(-f64::from(k))? {
            Exponent::Finite(v) if v < 0.0 => out.push(v),
            other => {
                return Err(Error::Condition {
                    condition: "neg",
                    verdict: "violated",
                    detail: format!("Phi(-{k}) = {other:?} is not in (-inf, 0)"),
                })
            }
        }
    }
    Ok(out)
}

/// `E(I_∞^{-n}) / E(I_∞^{-1}) = ((-1)^{n-1}/(n-1)!) Π_{k<n} Φ(-k)`.
pub fn negative_moment_ratio<E: LaplaceExponent + ?Sized>(phi: &E, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("negative order must be >= 1"));
    }
    let phis = negative_exponents(phi, n - 1)?;
    // each Φ(-k) < 0 absorbs one factor of -1
    Ok(phis.iter().map(|p| -p).product::<f64>() / factorial(n - 1))
}

/// `m̂_q^{(-n)} = m̂_q^{(-1)} ((-1)^{n-1}/(n-1)!) Π_{k<n} (q + Φ(-k))`.
///
/// Moments are positive, so every factor `q + Φ(-k)` must be negative.
pub fn negative_laplace_carson<E: LaplaceExponent + ?Sized>(phi: &E, q: f64, n: u32, m_hat_neg1: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("q must be > 0, got {q}")));
    }
    if !(m_hat_neg1 > 0.0 && m_hat_neg1.is_finite()) {
        return Err(Error::invalid("the order -1 transform must be positive and finite"));
    }
    if n == 0 {
        return Err(Error::invalid("negative order must be >= 1"));
    }
    let phis = negative_exponents(phi, n - 1)?;
    let mut prod = 1.0;
    for (k, p) in phis.iter().enumerate() {
        let d = q + p;
        if d >= 0.0 {
            return Err(Error::Pole {
                k: -(k as i64 + 1),
                value: d,
            });
        }
        prod *= -d;
    }
    Ok(m_hat_neg1 * prod / factorial(n - 1))
}

/// Samples of `m^{(-1)}` along a time axis with their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCurve {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeLevel {
    pub order: i32,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeLadder {
    pub points: Vec<f64>,
    pub levels: Vec<NegativeLevel>,
    /// First order whose error estimate exceeded its value.
    pub failure_depth: Option<i32>,
    pub notes: Vec<String>,
}

impl NegativeLadder {
    pub fn level(&self, order: i32) -> Option<&NegativeLevel> {
        self.levels.iter().find(|l| l.order == order)
    }
}

/// One descent `m^{(α-1)} = (1/α)(c ⊙ m^{(α)} + σ d/ds m^{(α)})`, where
/// `c = Φ(α)` and `σ = +1` along the horizon of a Lévy functional, and
/// `c = H^{(α)}_s`, `σ = -1` along the shift `s` of a PII.
fn descend(
    base: &BaseCurve,
    n: u32,
    sign: f64,
    coeff: impl Fn(f64) -> Result<Vec<f64>>,
) -> Result<NegativeLadder> {
    let m = base.points.len();
    if base.values.len() != m || base.std_errors.len() != m {
        return Err(Error::invalid("base curve arrays must have equal length"));
    }
    if base.points.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Precondition("the base curve must be sampled at s > 0".into()));
    }
    let noiseless = base.std_errors.iter().all(|&e| e == 0.0);
    let mut ladder = NegativeLadder {
        points: base.points.clone(),
        levels: vec![NegativeLevel {
            order: -1,
            values: base.values.clone(),
            errors: base.std_errors.clone(),
        }],
        failure_depth: None,
        notes: Vec::new(),
    };
    // linear map from the base values to the current level
    let mut map = DMatrix::<f64>::identity(m, m);
    let se2: Vec<f64> = base.std_errors.iter().map(|e| e * e).collect();
    let mut current = DVector::from_column_slice(&base.values);
    let mut errors = base.std_errors.clone();
    for step in 1..n {
        let alpha = -f64::from(step);
        let spline = if noiseless {
            SmoothingSpline::interpolate(&base.points, current.as_slice())?
        } else {
            let floor = errors.iter().cloned().fold(0.0, f64::max) * 1e-6 + f64::MIN_POSITIVE;
            let w: Vec<f64> = errors.iter().map(|e| 1.0 / (e * e).max(floor * floor)).collect();
            SmoothingSpline::fit(&base.points, current.as_slice(), Some(&w))?
        };
        let c = coeff(alpha)?;
        let cdiag = DMatrix::from_diagonal(&DVector::from_vec(c));
        let op = (cdiag * spline.smoother() + spline.derivative_operator() * sign) / alpha;
        current = &op * &current;
        map = &op * &map;
        errors = (0..m)
            .map(|i| (0..m).map(|j| map[(i, j)].powi(2) * se2[j]).sum::<f64>().sqrt())
            .collect();
        let order = -(step as i32) - 1;
        if (0..m).any(|i| errors[i] > current[i].abs()) || current.iter().any(|v| !v.is_finite()) {
            ladder.failure_depth = Some(order);
            ladder
                .notes
                .push(format!("order {order}: propagated error exceeds the value; descent stopped"));
            break;
        }
        ladder.levels.push(NegativeLevel {
            order,
            values: current.iter().copied().collect(),
            errors: errors.clone(),
        });
    }
    Ok(ladder)
}

/// Lévy form: `base` holds `s ↦ E(I_s^{-1})` and the ladder descends with
/// `m_s^{(α-1)} = (1/α)(Φ(α) m_s^{(α)} + d/ds m_s^{(α)})`.
pub fn negative_moment_ode_levy<E: LaplaceExponent + ?Sized>(phi: &E, base: &BaseCurve, n: u32) -> Result<NegativeLadder> {
    if n == 0 {
        return Err(Error::invalid("negative order must be >= 1"));
    }
    // the deepest step needs E e^{nX} < ∞
    if phi.exponent(-f64::from(n))?.is_divergent() {
        return Err(Error::Condition {
            condition: "rt11",
            verdict: "violated",
            detail: format!("Phi(-{n}) diverges"),
        });
    }
    let m = base.points.len();
    descend(base, n, 1.0, |alpha| {
        let p = phi.exponent(alpha)?.finite().ok_or(Error::Divergent { alpha })?;
        Ok(vec![p; m])
    })
}

/// PII form on `s ∈ (0, t)`: `base` holds `s ↦ m_{s,t}^{(-1)}` and
/// `m_{s,t}^{(α-1)} = (1/α)(H_s^{(α)} m_{s,t}^{(α)} - d/ds m_{s,t}^{(α)})`.
pub fn negative_moment_ode(pii: &PiiCharacteristics, t: f64, base: &BaseCurve, n: u32) -> Result<NegativeLadder> {
    if n == 0 {
        return Err(Error::invalid("negative order must be >= 1"));
    }
    if base.points.iter().any(|&s| s >= t) {
        return Err(Error::invalid("shift points must lie below the horizon"));
    }
    let mut notes = Vec::new();
    if n >= 2 {
        match check_moment_ladder_condition(pii, t, -f64::from(n - 1)) {
            Verdict::Violated => {
                return Err(Error::Condition {
                    condition: "rt11",
                    verdict: "violated",
                    detail: format!("positive-jump exponential moment of order {n} is infinite"),
                })
            }
            Verdict::Unknown => notes.push("COND_RT11_UNKNOWN".to_string()),
            Verdict::Satisfied => {}
        }
    }
    let mut ladder = descend(base, n, -1.0, |alpha| {
        base.points
            .iter()
            .map(|&s| pii.h_alpha(s, alpha)?.finite().ok_or(Error::Divergent { alpha }))
            .collect()
    })?;
    ladder.notes.extend(notes);
    Ok(ladder)
}
