//! Cubic smoothing spline (Reinsch form) with generalized cross-validation.
//!
//! Minimises `Σ w_i (y_i - g_i)² + λ ∫ g''²`. The fit and its knot
//! derivatives are linear in `y`, and both operators are kept so that noise
//! can be propagated through later arithmetic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SmoothingSpline {
    knots: Vec<f64>,
    lambda: f64,
    smoother: DMatrix<f64>,
    derivative: DMatrix<f64>,
    fitted: Vec<f64>,
    slopes: Vec<f64>,
}

struct Penalty {
    k: DMatrix<f64>,
    // maps fitted values to the second derivatives at all knots
    curvature: DMatrix<f64>,
}

fn penalty(x: &[f64]) -> Result<Penalty> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    if h.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("spline knots must be strictly increasing"));
    }
    let m = n - 2;
    let mut q = DMatrix::<f64>::zeros(n, m);
    let mut r = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::Integration("singular spline band matrix".into()))?;
    let rq = &r_inv * q.transpose();
    let k = &q * &rq;
    let mut curvature = DMatrix::<f64>::zeros(n, n);
    curvature.rows_mut(1, m).copy_from(&rq);
    Ok(Penalty { k, curvature })
}

fn slope_operator(x: &[f64], curvature: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
        let h = x[b] - x[a];
        // g'(x_a) = Δ/h - h(2γ_a + γ_b)/6,  g'(x_b) = Δ/h + h(γ_a + 2γ_b)/6
        let (ca, cb) = if i == a { (-2.0 * h / 6.0, -h / 6.0) } else { (h / 6.0, 2.0 * h / 6.0) };
        d[(i, b)] += 1.0 / h;
        d[(i, a)] -= 1.0 / h;
        for j in 0..n {
            d[(i, j)] += ca * curvature[(a, j)] + cb * curvature[(b, j)];
        }
    }
    d
}

impl SmoothingSpline {
    /// Fit with `λ` chosen by generalized cross-validation.
    pub fn fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        let (pen, w) = Self::prepare(x, y, weights)?;
        let unit = Self::unit(x);
        let score = |p: f64| -> f64 {
            match Self::smoother_matrix(&pen, &w, unit * 10f64.powf(p)) {
                Some(s) => gcv(&s, y, &w),
                None => f64::INFINITY,
            }
        };
        // coarse scan, then golden section around the best point
        let grid: Vec<f64> = (0..=48).map(|i| -8.0 + 0.375 * f64::from(i)).collect();
        let best = grid
            .iter()
            .map(|&p| (p, score(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, _)| p)
            .unwrap_or(0.0);
        let (mut lo, mut hi) = (best - 0.375, best + 0.375);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let (mut fc, mut fd) = (score(c), score(d));
        for _ in 0..30 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = score(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = score(d);
            }
        }
        Self::build(x, y, &pen, &w, unit * 10f64.powf(0.5 * (lo + hi)))
    }

    /// Fit with a fixed `λ`.
    pub fn fit_with_lambda(x: &[f64], y: &[f64], weights: Option<&[f64]>, lambda: f64) -> Result<Self> {
        let (pen, w) = Self::prepare(x, y, weights)?;
        Self::build(x, y, &pen, &w, lambda)
    }

    /// Effectively interpolating fit, for noise-free data.
    pub fn interpolate(x: &[f64], y: &[f64]) -> Result<Self> {
        let (pen, w) = Self::prepare(x, y, None)?;
        Self::build(x, y, &pen, &w, Self::unit(x) * 1e-10)
    }

    fn unit(x: &[f64]) -> f64 {
        let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        h * h * h
    }

    fn prepare(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<(Penalty, Vec<f64>)> {
        if x.len() != y.len() || x.len() < 4 {
            return Err(Error::invalid("smoothing spline needs at least 4 points and matching lengths"));
        }
        let w = match weights {
            Some(w) if w.len() == x.len() => {
                if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::invalid("spline weights must be positive"));
                }
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                w.iter().map(|v| v / mean).collect()
            }
            Some(_) => return Err(Error::invalid("weights length mismatch")),
            None => vec![1.0; x.len()],
        };
        Ok((penalty(x)?, w))
    }

    fn smoother_matrix(pen: &Penalty, w: &[f64], lambda: f64) -> Option<DMatrix<f64>> {
        let wd = DMatrix::from_diagonal(&DVector::from_column_slice(w));
        let a = &wd + &pen.k * lambda;
        a.lu().solve(&wd)
    }

    fn build(x: &[f64], y: &[f64], pen: &Penalty, w: &[f64], lambda: f64) -> Result<Self> {
        let s = Self::smoother_matrix(pen, w, lambda)
            .ok_or_else(|| Error::Integration("singular smoothing system".into()))?;
        let d = slope_operator(x, &pen.curvature) * &s;
        let yv = DVector::from_column_slice(y);
        let fitted = (&s * &yv).iter().copied().collect();
        let slopes = (&d * &yv).iter().copied().collect();
        Ok(SmoothingSpline {
            knots: x.to_vec(),
            lambda,
            smoother: s,
            derivative: d,
            fitted,
            slopes,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// `g'` at the knots.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Linear map `y ↦ g` at the knots.
    pub fn smoother(&self) -> &DMatrix<f64> {
        &self.smoother
    }

    /// Linear map `y ↦ g'` at the knots.
    pub fn derivative_operator(&self) -> &DMatrix<f64> {
        &self.derivative
    }
}

fn gcv(s: &DMatrix<f64>, y: &[f64], w: &[f64]) -> f64 {
    let n = y.len() as f64;
    let yv = DVector::from_column_slice(y);
    let g = s * &yv;
    let rss: f64 = (0..y.len()).map(|i| w[i] * (y[i] - g[i]).powi(2)).sum();
    let dof = 1.0 - s.trace() / n;
    if dof <= 0.0 {
        return f64::INFINITY;
    }
    rss / n / (dof * dof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reproduces_cubics_and_their_slopes() {
        let x: Vec<f64> = (0..30).map(|i| 0.1 * f64::from(i)).collect();
        // natural end conditions hold for a linear function exactly
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let s = SmoothingSpline::fit_with_lambda(&x, &y, None, 10.0).unwrap();
        for (i, d) in s.slopes().iter().enumerate() {
            assert!((d + 3.0).abs() < 1e-9, "i={i} {d}");
            assert!((s.fitted()[i] - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolating_slopes_of_smooth_data() {
        let x: Vec<f64> = (0..60).map(|i| 0.05 * f64::from(i)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let s = SmoothingSpline::interpolate(&x, &y).unwrap();
        for i in 5..55 {
            assert!((s.slopes()[i] - x[i].cos()).abs() < 1e-4, "i={i}");
        }
    }

    #[test]
    fn gcv_smooths_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..80).map(|i| 0.05 * f64::from(i)).collect();
        let truth: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let y: Vec<f64> = truth.iter().map(|v| v + 0.01 * (rng.random::<f64>() - 0.5)).collect();
        let s = SmoothingSpline::fit(&x, &y, None).unwrap();
        let raw: f64 = y.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
        let fit: f64 = s.fitted().iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(fit < raw);
        for i in 10..70 {
            assert!((s.slopes()[i] + truth[i]).abs() < 0.05, "i={i}");
        }
    }
}
