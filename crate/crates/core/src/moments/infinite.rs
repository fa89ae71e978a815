//! Infinite-horizon moments, Laplace–Carson transforms and the Laplace
//! transform series of `I_∞`.

use serde::{Deserialize, Serialize};

use super::{positive_finiteness, Extended};
use crate::error::{Error, Result};
use crate::process::{Exponent, LaplaceExponent};

fn positive_exponent<E: LaplaceExponent + ?Sized>(phi: &E, k: u32) -> Result<Option<f64>> {
    Ok(match phi.exponent(f64::from(k))? {
        Exponent::Finite(v) if v > 0.0 => Some(v),
        _ => None,
    })
}

/// `E(I_∞^n) = n! / Π_{k≤n} Φ(k)`, infinite once `n ≥ α₀`.
///
/// By concavity `Φ > 0` on `(0, n]` iff `Φ(n) > 0`, which is `n < α₀`.
pub fn infinite_moment<E: LaplaceExponent + ?Sized>(phi: &E, n: u32) -> Result<Extended> {
    if n == 0 {
        return Ok(Extended::Finite(1.0));
    }
    let mut value = 1.0;
    for k in 1..=n {
        match positive_exponent(phi, k)? {
            Some(p) => value *= f64::from(k) / p,
            None => return Ok(Extended::Infinite),
        }
    }
    Ok(Extended::Finite(value))
}

/// `m̂_q^{(n)} = n! / Π_{k≤n} (q + Φ(k))`.
pub fn laplace_carson<E: LaplaceExponent + ?Sized>(phi: &E, q: f64, n: u32) -> Result<f64> {
    Ok(*laplace_carson_ladder(phi, q, n)?.last().expect("ladder has order 0"))
}

/// `m̂_q^{(k)}` for `k = 0..=n`.
pub fn laplace_carson_ladder<E: LaplaceExponent + ?Sized>(phi: &E, q: f64, n: u32) -> Result<Vec<f64>> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("q must be > 0, got {q}")));
    }
    if n > 0 && infinite_moment(phi, n)?.is_infinite() {
        return Err(Error::Precondition(format!(
            "E(I_inf^{n}) is infinite; the Laplace-Carson recursion needs a finite moment"
        )));
    }
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(1.0);
    for k in 1..=n {
        let p = phi
            .exponent(f64::from(k))?
            .finite()
            .ok_or(Error::Divergent { alpha: f64::from(k) })?;
        let d = q + p;
        if d <= 0.0 {
            return Err(Error::Pole { k: i64::from(k), value: d });
        }
        let prev = out[k as usize - 1];
        out.push(prev * f64::from(k) / d);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub value: f64,
    pub terms: usize,
    /// Magnitude of the first omitted term.
    pub error_bound: f64,
    pub converged: bool,
}

// consecutive shrinking terms required before the alternating bound is trusted
const DECREASING_WINDOW: usize = 3;

/// `E e^{-βI_∞} = Σ_n (-β)^n / Π_{k≤n} Φ(k)`, summed until the alternating
/// remainder bound is below `tol`.
pub fn laplace_transform_series<E: LaplaceExponent + ?Sized>(
    phi: &E,
    beta: f64,
    max_terms: usize,
    tol: f64,
) -> Result<SeriesResult> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    let report = positive_finiteness(phi, 1)?;
    if !matches!(report.alpha0, Some(Extended::Infinite)) {
        return Err(Error::Condition {
            condition: "all positive moments of I_inf",
            verdict: "violated",
            detail: format!("alpha0 = {:?}", report.alpha0),
        });
    }
    let mut sum = 1.0;
    let mut term = 1.0f64;
    let mut shrinking = 0usize;
    for n in 1..=max_terms {
        let p = phi
            .exponent(n as f64)?
            .finite()
            .ok_or(Error::Divergent { alpha: n as f64 })?;
        let next = -term * beta / p;
        if next.abs() < term.abs() {
            shrinking += 1;
        } else {
            shrinking = 0;
        }
        term = next;
        if shrinking >= DECREASING_WINDOW && term.abs() <= tol {
            // alternating with decreasing magnitude: remainder below |term|
            return Ok(SeriesResult {
                value: sum,
                terms: n,
                error_bound: term.abs(),
                converged: true,
            });
        }
        sum += term;
        if !sum.is_finite() {
            break;
        }
    }
    Ok(SeriesResult {
        value: sum,
        terms: max_terms,
        error_bound: term.abs(),
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::levy::factorial;
    use crate::process::LevyTriplet;

    fn poisson_moment(lambda: f64, n: u32) -> f64 {
        let prod: f64 = (1..=n).map(|k| 1.0 - (-f64::from(k)).exp()).product();
        factorial(n) / (lambda.powi(n as i32) * prod)
    }

    #[test]
    fn poisson_moments() {
        let p = LevyTriplet::poisson(2.0).unwrap();
        for n in 1..=5 {
            let got = infinite_moment(&p, n).unwrap().finite().unwrap();
            assert!((got - poisson_moment(2.0, n)).abs() < 1e-14 * got);
        }
    }

    #[test]
    fn brownian_threshold() {
        let bm = LevyTriplet::brownian(1.0, 1.0).unwrap();
        assert!(infinite_moment(&bm, 1).unwrap().finite().is_some());
        assert!(infinite_moment(&bm, 2).unwrap().is_infinite());
        assert!(matches!(laplace_carson(&bm, 1.0, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn laplace_carson_recurrence_and_limit() {
        let p = LevyTriplet::poisson(2.0).unwrap();
        let l = laplace_carson_ladder(&p, 0.7, 4).unwrap();
        for n in 1..=4usize {
            let phi = p.exponent(n as f64).unwrap().finite().unwrap();
            assert!((l[n] * (0.7 + phi) - n as f64 * l[n - 1]).abs() < 1e-14 * l[n - 1]);
        }
        let near = laplace_carson(&p, 1e-10, 3).unwrap();
        assert!((near - poisson_moment(2.0, 3)).abs() < 1e-8);
    }

    #[test]
    fn series_for_poisson() {
        let p = LevyTriplet::poisson(2.0).unwrap();
        assert_eq!(laplace_transform_series(&p, 0.0, 50, 1e-12).unwrap().value, 1.0);
        let s = laplace_transform_series(&p, 0.5, 200, 1e-12).unwrap();
        assert!(s.converged);
        let mut direct = 0.0;
        for n in 0..60 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            direct += sign * 0.5f64.powi(n) * poisson_moment(2.0, n as u32) / factorial(n as u32);
        }
        assert!((s.value - direct).abs() < 1e-12);
        let bm = LevyTriplet::brownian(1.0, 1.0).unwrap();
        assert!(laplace_transform_series(&bm, 0.5, 50, 1e-10).unwrap_err().is_refusal());
    }
}
