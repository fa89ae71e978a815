//! Moments of `X_t = L_{r ln(1+t)}` for a Lévy process `L`.
//!
//! With `ρ(k) = rΦ(k) - k`, `γ(n,k) = n - k - r(Φ(n+1) - Φ(k))` and
//! `Q_t(n,k) = ((1+t)^{γ+1} - 1) / ((γ+1)(1+t)^{ρ(k)})`,
//!
//! `E(I_t^{n+1}) = (n+1)! Σ_{k<n} (Q_t(n,k) - Q_t(n,n)) / Π_{i≠k} (ρ(i) - ρ(k))`.
//!
//! `Q_t(n,k) = G(ρ(k))` for the entire function
//! `G(x) = ((1+t)^{A+x} - 1) / ((A+x)(1+t)^x)` with `A = n+1 - rΦ(n+1)`, so
//! the sum is `(-1)^n` times the divided difference `G[ρ(0), …, ρ(n)]`. The
//! extended evaluator computes that divided difference as a contour integral,
//! which stays finite where the displayed formula has removable singularities.

use num_complex::Complex64;

use super::levy::{factorial, finite_exponents};
use crate::error::{Error, Result};
use crate::process::LaplaceExponent;

const CONFLUENCE_REL: f64 = 1e-9;

fn check_args(r: f64, t: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("time-change rate r must be > 0, got {r}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("horizon must be >= 0, got {t}")));
    }
    Ok(())
}

/// `(e^{wT} - 1) / w`, continuous at `w = 0`.
fn exp_ratio(w: f64, big_t: f64) -> f64 {
    if (w * big_t).abs() < 1e-8 {
        big_t * (1.0 + 0.5 * w * big_t)
    } else {
        (w * big_t).exp_m1() / w
    }
}

fn exp_ratio_c(w: Complex64, big_t: f64) -> Complex64 {
    let x = w * big_t;
    if x.norm() < 0.05 {
        // T Σ x^m / (m+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for m in 1..14 {
            term = term * x / (m as f64 + 1.0);
            sum += term;
        }
        sum * big_t
    } else {
        (x.exp() - 1.0) / w
    }
}

/// `E(I_t^order)` by the displayed closed form (`order ≥ 1`).
///
/// Refuses when two `ρ(k)` nearly coincide or some `γ(n,k) = -1`; the
/// extended evaluator or the quadrature ladder handle those cases.
pub fn timechange_log_moments<E: LaplaceExponent + ?Sized>(base: &E, r: f64, t: f64, order: u32) -> Result<f64> {
    check_args(r, t)?;
    if order == 0 {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let big_t = t.ln_1p();
    let phis = finite_exponents(base, order)?;
    if order == 1 {
        return Ok(exp_ratio(1.0 - r * phis[1], big_t));
    }
    let n = (order - 1) as usize;
    let rho: Vec<f64> = (0..=n).map(|k| r * phis[k] - k as f64).collect();
    let scale = rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut gap = f64::INFINITY;
    for i in 0..=n {
        for j in 0..i {
            gap = gap.min((rho[i] - rho[j]).abs());
        }
    }
    if gap == 0.0 || gap < CONFLUENCE_REL * scale {
        return Err(Error::NearConfluent {
            gap,
            scale,
            fallback: "the extended evaluator or quadrature",
        });
    }
    let gamma = |k: usize| n as f64 - k as f64 - r * (phis[n + 1] - phis[k]);
    for k in 0..=n {
        if (gamma(k) + 1.0).abs() < CONFLUENCE_REL * (1.0 + scale) {
            return Err(Error::Precondition(format!(
                "gamma({n},{k}) = -1; use the extended evaluator or quadrature"
            )));
        }
    }
    let q = |k: usize| {
        let g1 = gamma(k) + 1.0;
        (g1 * big_t).exp_m1() / g1 * (-rho[k] * big_t).exp()
    };
    let qn = q(n);
    let mut sum = 0.0;
    for k in 0..n {
        let mut denom = 1.0;
        for (i, ri) in rho.iter().enumerate() {
            if i != k {
                denom *= ri - rho[k];
            }
        }
        sum += (q(k) - qn) / denom;
    }
    let value = factorial(order) * sum;
    if !value.is_finite() {
        return Err(Error::Overflow(format!("time-change moment of order {order}")));
    }
    Ok(value)
}

/// Same moment through the divided-difference representation, valid also at
/// coincident `ρ` values and at `γ = -1`. Returns `(value, error_estimate)`.
pub fn timechange_log_moments_extended<E: LaplaceExponent + ?Sized>(
    base: &E,
    r: f64,
    t: f64,
    order: u32,
) -> Result<(f64, f64)> {
    check_args(r, t)?;
    if order == 0 {
        return Ok((1.0, 0.0));
    }
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let big_t = t.ln_1p();
    let phis = finite_exponents(base, order)?;
    let n = (order - 1) as usize;
    let a = order as f64 - r * phis[order as usize];
    let rho: Vec<f64> = (0..=n).map(|k| r * phis[k] - k as f64).collect();
    let g = |z: Complex64| exp_ratio_c(z + a, big_t) * (-z * big_t).exp();

    let center = rho.iter().sum::<f64>() / rho.len() as f64;
    let radius = rho.iter().fold(0.0f64, |m, v| m.max((v - center).abs())) + 1.0;
    let contour = |points: usize| {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..points {
            let theta = std::f64::consts::TAU * j as f64 / points as f64;
            let dz = Complex64::from_polar(radius, theta);
            let z = dz + center;
            let mut denom = Complex64::new(1.0, 0.0);
            for &ri in &rho {
                denom *= z - ri;
            }
            acc += g(z) * dz / denom;
        }
        (acc / points as f64).re
    };
    let coarse = contour(128);
    let fine = contour(256);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let f = factorial(order);
    let value = f * sign * fine;
    if !value.is_finite() {
        return Err(Error::Overflow(format!("time-change moment of order {order}")));
    }
    let err = f * (fine - coarse).abs() + 16.0 * f64::EPSILON * value.abs();
    Ok((value, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::LevyTriplet;

    #[test]
    fn first_moment_forms() {
        let bm = LevyTriplet::brownian(1.0, 0.5).unwrap(); // Φ(1) = 0.75
        let (r, t) = (2.0f64, 1.5f64);
        let want = (1.0 - (1.0 + t).powf(1.0 - r * 0.75)) / (r * 0.75 - 1.0);
        assert!((timechange_log_moments(&bm, r, t, 1).unwrap() - want).abs() < 1e-14);
        // rΦ(1) = 1 gives ln(1+t)
        let v = timechange_log_moments(&bm, 4.0 / 3.0, t, 1).unwrap();
        assert!((v - (1.0 + t).ln()).abs() < 1e-12);
        assert_eq!(timechange_log_moments(&bm, r, 0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn extended_matches_direct_where_both_apply() {
        let bm = LevyTriplet::brownian(1.0, 0.5).unwrap();
        for order in 1..=4 {
            for t in [0.5, 1.0, 3.0] {
                let direct = timechange_log_moments(&bm, 1.3, t, order).unwrap();
                let (ext, err) = timechange_log_moments_extended(&bm, 1.3, t, order).unwrap();
                assert!((direct - ext).abs() < 1e-10 * direct, "order {order} t {t}: {direct} vs {ext}");
                assert!(err < 1e-10 * direct);
            }
        }
    }

    #[test]
    fn singular_parameters_are_refused_by_the_direct_form() {
        let bm = LevyTriplet::brownian(1.0, 0.5).unwrap();
        // ρ(0) = ρ(2) = 0 at r = 2
        assert!(timechange_log_moments(&bm, 2.0, 1.0, 3).is_err());
        // γ(1,0) = -1 at r = 2
        assert!(timechange_log_moments(&bm, 2.0, 1.0, 2).is_err());
        let (v, _) = timechange_log_moments_extended(&bm, 2.0, 1.0, 2).unwrap();
        assert!((v - 0.4294429717321524).abs() < 1e-12);
        let (v, _) = timechange_log_moments_extended(&bm, 2.0, 3.0, 3).unwrap();
        assert!((v - 4.242978444374366).abs() < 1e-11);
    }
}
