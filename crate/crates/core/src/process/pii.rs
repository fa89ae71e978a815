//! Processes with independent increments described by absolutely continuous
//! characteristics `(b_s, c_s, K_s)`.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use super::{Exponent, JumpMeasure, LaplaceExponent, LevyTriplet};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad::{self, Tolerance};

/// A deterministic function of time.
#[derive(Clone)]
pub enum TimeFn {
    Const(f64),
    Expr(Expr),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeFn {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFn::Custom(Arc::new(f))
    }

    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        Ok(if e.is_constant() {
            TimeFn::Const(e.eval(0.0))
        } else {
            TimeFn::Expr(e)
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            TimeFn::Const(c) => *c,
            TimeFn::Expr(e) => e.eval(s),
            TimeFn::Custom(f) => f(s),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, TimeFn::Const(_))
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        match self {
            TimeFn::Const(c) => Ok(c * (b - a)),
            _ => Ok(quad::integrate(|s| self.eval(s), a, b, Tolerance::default())?.value),
        }
    }

    /// `u ↦ f(h - u)`.
    pub fn reflect(&self, horizon: f64) -> TimeFn {
        match self {
            TimeFn::Const(c) => TimeFn::Const(*c),
            TimeFn::Expr(e) => TimeFn::Expr(e.reflect(horizon)),
            TimeFn::Custom(f) => {
                let f = Arc::clone(f);
                TimeFn::custom(move |u| f(horizon - u))
            }
        }
    }

    pub fn scaled(&self, by: f64) -> TimeFn {
        match self {
            TimeFn::Const(c) => TimeFn::Const(c * by),
            TimeFn::Expr(e) => TimeFn::Expr(Expr::Mul(Box::new(Expr::Const(by)), Box::new(e.clone()))),
            TimeFn::Custom(f) => {
                let f = Arc::clone(f);
                TimeFn::custom(move |s| by * f(s))
            }
        }
    }

    pub fn squared(&self) -> TimeFn {
        match self {
            TimeFn::Const(c) => TimeFn::Const(c * c),
            TimeFn::Expr(e) => TimeFn::Expr(Expr::Pow(Box::new(e.clone()), Box::new(Expr::Const(2.0)))),
            TimeFn::Custom(f) => {
                let f = Arc::clone(f);
                TimeFn::custom(move |s| {
                    let v = f(s);
                    v * v
                })
            }
        }
    }

    /// Symbolic derivative where available.
    pub fn derivative(&self) -> Option<TimeFn> {
        match self {
            TimeFn::Const(_) => Some(TimeFn::Const(0.0)),
            TimeFn::Expr(e) => {
                let d = e.derivative();
                Some(if d.is_constant() {
                    TimeFn::Const(d.eval(0.0))
                } else {
                    TimeFn::Expr(d)
                })
            }
            TimeFn::Custom(_) => None,
        }
    }

    /// Min and max over a uniform sample of `[a, b]`.
    pub fn sampled_range(&self, a: f64, b: f64, points: usize) -> (f64, f64) {
        if let TimeFn::Const(c) = self {
            return (*c, *c);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=points {
            let s = a + (b - a) * i as f64 / points as f64;
            let v = self.eval(s);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Const(c) => write!(f, "Const({c})"),
            TimeFn::Expr(e) => write!(f, "Expr({e})"),
            TimeFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Display for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Const(c) => write!(f, "{c}"),
            TimeFn::Expr(e) => write!(f, "{e}"),
            TimeFn::Custom(_) => write!(f, "<custom>"),
        }
    }
}

impl PartialEq for TimeFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TimeFn::Const(a), TimeFn::Const(b)) => a == b,
            (TimeFn::Expr(a), TimeFn::Expr(b)) => a == b,
            (TimeFn::Custom(a), TimeFn::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl From<f64> for TimeFn {
    fn from(c: f64) -> Self {
        TimeFn::Const(c)
    }
}

impl From<Expr> for TimeFn {
    fn from(e: Expr) -> Self {
        TimeFn::Expr(e)
    }
}

/// `weight(s)` times the image of `measure` under `x ↦ scale(s)·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpComponent {
    pub weight: TimeFn,
    pub scale: TimeFn,
    pub measure: JumpMeasure,
}

impl JumpComponent {
    /// `w(s) ψ(α g(s))`, the contribution to `∫(e^{-αx} - 1 + αx) K_s(dx)`.
    pub fn compensated_laplace(&self, s: f64, alpha: f64) -> Result<Exponent> {
        let w = self.weight.eval(s);
        if w == 0.0 {
            return Ok(Exponent::Finite(0.0));
        }
        Ok(self.measure.compensated_laplace(alpha * self.scale.eval(s))?.scale(w))
    }

    fn reflect(&self, horizon: f64) -> JumpComponent {
        JumpComponent {
            weight: self.weight.reflect(horizon),
            scale: self.scale.reflect(horizon),
            measure: self.measure.clone(),
        }
    }
}

/// Densities of the characteristics: `B_t = ∫b`, `C_t = ∫c`,
/// `ν(ds, dx) = K_s(dx) ds` with `K_s = Σ` of jump components.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoCharacteristics {
    pub drift: TimeFn,
    pub diffusion: TimeFn,
    pub jumps: Vec<JumpComponent>,
}

impl ItoCharacteristics {
    /// `H^{(α)}_s = αb_s - ½α²c_s - ∫(e^{-αx} - 1 + αx) K_s(dx)`.
    pub fn h_alpha(&self, s: f64, alpha: f64) -> Result<Exponent> {
        if alpha == 0.0 {
            return Ok(Exponent::Finite(0.0));
        }
        let mut h = alpha * self.drift.eval(s) - 0.5 * alpha * alpha * self.diffusion.eval(s);
        for j in &self.jumps {
            match j.compensated_laplace(s, alpha)? {
                Exponent::Finite(p) => h -= p,
                Exponent::Divergent => return Ok(Exponent::Divergent),
            }
        }
        Ok(Exponent::Finite(h))
    }

    /// Pointwise reflection `u ↦ (b, c, K)_{t-u}`.
    pub fn reflect(&self, horizon: f64) -> ItoCharacteristics {
        ItoCharacteristics {
            drift: self.drift.reflect(horizon),
            diffusion: self.diffusion.reflect(horizon),
            jumps: self.jumps.iter().map(|j| j.reflect(horizon)).collect(),
        }
    }

    /// `∫_a^b ∫ f(x) K_s(dx) ds`.
    pub fn integrate_jumps<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        let mut total = 0.0;
        for j in &self.jumps {
            if j.scale.is_const() {
                let g = j.scale.eval(0.0);
                total += j.weight.integrate(a, b)? * j.measure.integrate(|x| f(g * x))?;
            } else {
                let failure = Cell::new(None);
                let inner = |s: f64| {
                    let g = j.scale.eval(s);
                    match j.measure.integrate(|x| f(g * x)) {
                        Ok(v) => j.weight.eval(s) * v,
                        Err(e) => {
                            failure.set(Some(e));
                            0.0
                        }
                    }
                };
                let r = quad::integrate(inner, a, b, Tolerance::new(1e-9, 1e-7))?;
                if let Some(e) = failure.take() {
                    return Err(e);
                }
                total += r.value;
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PiiCharacteristics {
    Homogeneous(LevyTriplet),
    /// Poisson process with intensity `λ_s`: `K_s = λ_s δ₁`.
    NonHomPoisson { intensity: TimeFn },
    /// `L_{τ(t)}` for a Lévy process `L`: characteristics scale by `τ'(t)`.
    TimeChangedLevy {
        base: LevyTriplet,
        tau: TimeFn,
        tau_rate: TimeFn,
    },
    /// `∫₀ᵗ g_s dL_s`: `b₀g`, `c₀g²`, jumps `x ↦ g_s x`.
    IntegratedLevy { base: LevyTriplet, g: TimeFn },
    GeneralIto(ItoCharacteristics),
}

impl PiiCharacteristics {
    pub fn non_hom_poisson(intensity: impl Into<TimeFn>) -> Self {
        PiiCharacteristics::NonHomPoisson {
            intensity: intensity.into(),
        }
    }

    /// Time change given as an expression; `τ'` is derived symbolically.
    pub fn time_changed(base: LevyTriplet, tau: Expr) -> Self {
        let tau = TimeFn::Expr(tau);
        let tau_rate = tau.derivative().expect("expressions have derivatives");
        PiiCharacteristics::TimeChangedLevy { base, tau, tau_rate }
    }

    /// `τ(t) = r ln(1 + t)`.
    pub fn log_time_change(base: LevyTriplet, r: f64) -> Self {
        let tau = Expr::Mul(
            Box::new(Expr::Const(r)),
            Box::new(Expr::Ln(Box::new(Expr::Add(
                Box::new(Expr::Const(1.0)),
                Box::new(Expr::Var),
            )))),
        );
        Self::time_changed(base, tau)
    }

    pub fn integrated(base: LevyTriplet, g: impl Into<TimeFn>) -> Self {
        PiiCharacteristics::IntegratedLevy { base, g: g.into() }
    }

    pub fn as_levy(&self) -> Option<&LevyTriplet> {
        match self {
            PiiCharacteristics::Homogeneous(t) => Some(t),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PiiCharacteristics::Homogeneous(_) => "homogeneous",
            PiiCharacteristics::NonHomPoisson { .. } => "non_hom_poisson",
            PiiCharacteristics::TimeChangedLevy { .. } => "time_changed_levy",
            PiiCharacteristics::IntegratedLevy { .. } => "integrated_levy",
            PiiCharacteristics::GeneralIto(_) => "general_ito",
        }
    }

    /// The same process as explicit time-indexed characteristics.
    pub fn to_ito(&self) -> ItoCharacteristics {
        let one = || TimeFn::Const(1.0);
        match self {
            PiiCharacteristics::Homogeneous(t) => ItoCharacteristics {
                drift: TimeFn::Const(t.b0),
                diffusion: TimeFn::Const(t.c0),
                jumps: jump_list(one(), one(), &t.jumps),
            },
            PiiCharacteristics::NonHomPoisson { intensity } => ItoCharacteristics {
                drift: intensity.clone(),
                diffusion: TimeFn::Const(0.0),
                jumps: vec![JumpComponent {
                    weight: intensity.clone(),
                    scale: one(),
                    measure: JumpMeasure::PointMasses(vec![super::PointMass {
                        location: 1.0,
                        rate: 1.0,
                    }]),
                }],
            },
            PiiCharacteristics::TimeChangedLevy { base, tau_rate, .. } => ItoCharacteristics {
                drift: tau_rate.scaled(base.b0),
                diffusion: tau_rate.scaled(base.c0),
                jumps: jump_list(tau_rate.clone(), one(), &base.jumps),
            },
            PiiCharacteristics::IntegratedLevy { base, g } => ItoCharacteristics {
                drift: g.scaled(base.b0),
                diffusion: g.squared().scaled(base.c0),
                jumps: jump_list(one(), g.clone(), &base.jumps),
            },
            PiiCharacteristics::GeneralIto(c) => c.clone(),
        }
    }

    /// `H^{(α)}_s`, the density in `s` of `Φ(s, α)`.
    pub fn h_alpha(&self, s: f64, alpha: f64) -> Result<Exponent> {
        if alpha == 0.0 {
            return Ok(Exponent::Finite(0.0));
        }
        match self {
            PiiCharacteristics::Homogeneous(t) => t.exponent(alpha),
            PiiCharacteristics::NonHomPoisson { intensity } => {
                Ok(Exponent::Finite(-intensity.eval(s) * (-alpha).exp_m1()))
            }
            PiiCharacteristics::TimeChangedLevy { base, tau_rate, .. } => {
                Ok(base.exponent(alpha)?.scale(tau_rate.eval(s)))
            }
            PiiCharacteristics::IntegratedLevy { base, g } => base.exponent(alpha * g.eval(s)),
            PiiCharacteristics::GeneralIto(c) => c.h_alpha(s, alpha),
        }
    }

    /// `Φ(t, α) = ∫₀ᵗ H^{(α)}_s ds`.
    pub fn phi_t(&self, t: f64, alpha: f64) -> Result<Exponent> {
        self.phi_between(0.0, t, alpha)
    }

    /// `Φ(b, α) - Φ(a, α)`.
    pub fn phi_between(&self, a: f64, b: f64, alpha: f64) -> Result<Exponent> {
        if !(a >= 0.0 && b >= a) {
            return Err(Error::invalid(format!("need 0 <= a <= b, got [{a}, {b}]")));
        }
        if alpha == 0.0 || a == b {
            return Ok(Exponent::Finite(0.0));
        }
        match self {
            PiiCharacteristics::Homogeneous(t) => Ok(t.exponent(alpha)?.scale(b - a)),
            PiiCharacteristics::TimeChangedLevy { base, tau, .. } => {
                Ok(base.exponent(alpha)?.scale(tau.eval(b) - tau.eval(a)))
            }
            PiiCharacteristics::NonHomPoisson { intensity } => {
                Ok(Exponent::Finite(-(-alpha).exp_m1() * intensity.integrate(a, b)?))
            }
            _ => self.integrate_h(a, b, alpha),
        }
    }

    /// Quadrature of `H` regardless of variant.
    pub fn integrate_h(&self, a: f64, b: f64, alpha: f64) -> Result<Exponent> {
        let divergent = Cell::new(false);
        let failure = Cell::new(None);
        let f = |s: f64| match self.h_alpha(s, alpha) {
            Ok(Exponent::Finite(h)) => h,
            Ok(Exponent::Divergent) => {
                divergent.set(true);
                0.0
            }
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        };
        let r = quad::integrate(f, a, b, Tolerance::default())?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if divergent.get() {
            return Ok(Exponent::Divergent);
        }
        Ok(Exponent::Finite(r.value))
    }

    /// Checks the pointwise invariants (`c_s ≥ 0`, `λ_s ≥ 0`, `τ(0) = 0` and
    /// `τ' > 0`, `g ≠ 0`) on a sample of `[0, horizon]`.
    pub fn validate_on(&self, horizon: f64) -> Result<()> {
        const POINTS: usize = 256;
        let sample = |f: &TimeFn| f.sampled_range(0.0, horizon, POINTS);
        let finite = |(lo, hi): (f64, f64), what: &str| {
            if lo.is_finite() && hi.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} is not finite on [0, {horizon}]")))
            }
        };
        match self {
            PiiCharacteristics::Homogeneous(t) => t.validate(),
            PiiCharacteristics::NonHomPoisson { intensity } => {
                let r = sample(intensity);
                finite(r, "intensity")?;
                if r.0 < 0.0 {
                    return Err(Error::invalid("intensity must be nonnegative"));
                }
                Ok(())
            }
            PiiCharacteristics::TimeChangedLevy { base, tau, tau_rate } => {
                base.validate()?;
                if tau.eval(0.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("time change must start at 0, tau(0) = {}", tau.eval(0.0))));
                }
                let r = sample(tau_rate);
                finite(r, "tau'")?;
                if r.0 <= 0.0 {
                    return Err(Error::invalid("time change must be strictly increasing"));
                }
                Ok(())
            }
            PiiCharacteristics::IntegratedLevy { base, g } => {
                base.validate()?;
                let r = sample(g);
                finite(r, "g")?;
                for i in 0..=POINTS {
                    if g.eval(horizon * i as f64 / POINTS as f64) == 0.0 {
                        return Err(Error::invalid("integrand g must not vanish"));
                    }
                }
                Ok(())
            }
            PiiCharacteristics::GeneralIto(c) => {
                finite(sample(&c.drift), "b_s")?;
                let r = sample(&c.diffusion);
                finite(r, "c_s")?;
                if r.0 < 0.0 {
                    return Err(Error::invalid("c_s must be nonnegative"));
                }
                for j in &c.jumps {
                    j.measure.validate()?;
                    let w = sample(&j.weight);
                    finite(w, "jump weight")?;
                    if w.0 < 0.0 {
                        return Err(Error::invalid("jump weights must be nonnegative"));
                    }
                    finite(sample(&j.scale), "jump scale")?;
                }
                Ok(())
            }
        }
    }
}

fn jump_list(weight: TimeFn, scale: TimeFn, measure: &JumpMeasure) -> Vec<JumpComponent> {
    if measure.is_empty() {
        Vec::new()
    } else {
        vec![JumpComponent {
            weight,
            scale,
            measure: measure.clone(),
        }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(e: Result<Exponent>) -> f64 {
        e.unwrap().finite().unwrap()
    }

    fn corpus() -> Vec<PiiCharacteristics> {
        let bm = LevyTriplet::brownian(1.0, 0.5).unwrap();
        let gj = LevyTriplet::compound_poisson_gaussian(1.0, 0.0, 1.0).unwrap();
        vec![
            PiiCharacteristics::Homogeneous(bm.clone()),
            PiiCharacteristics::non_hom_poisson(TimeFn::parse("t").unwrap()),
            PiiCharacteristics::log_time_change(bm.clone(), 2.0),
            PiiCharacteristics::integrated(gj.clone(), TimeFn::parse("1 + t^2").unwrap()),
            PiiCharacteristics::GeneralIto(
                PiiCharacteristics::log_time_change(gj, 1.5).to_ito(),
            ),
        ]
    }

    #[test]
    fn phi_at_zero() {
        for p in corpus() {
            for t in [0.0, 0.3, 2.0] {
                assert_eq!(fin(p.phi_t(t, 0.0)), 0.0);
            }
            assert_eq!(fin(p.phi_t(0.0, 1.7)), 0.0);
        }
    }

    #[test]
    fn phi_is_integral_of_h() {
        for p in corpus() {
            for alpha in [-1.0, 0.5, 2.0] {
                let closed = fin(p.phi_t(1.3, alpha));
                let quad = fin(p.integrate_h(0.0, 1.3, alpha));
                assert!((closed - quad).abs() < 1e-8 * (1.0 + closed.abs()), "{} {alpha}", p.kind_name());
            }
        }
    }

    #[test]
    fn ito_form_agrees_with_variant() {
        for p in corpus() {
            let ito = p.to_ito();
            for s in [0.0, 0.4, 1.7] {
                for alpha in [-0.5, 1.0, 3.0] {
                    let a = fin(p.h_alpha(s, alpha));
                    let b = fin(ito.h_alpha(s, alpha));
                    assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{} s={s} a={alpha}", p.kind_name());
                }
            }
        }
    }

    #[test]
    fn non_hom_poisson_h_matches_finite_difference() {
        let p = PiiCharacteristics::non_hom_poisson(TimeFn::parse("1 + t").unwrap());
        let (s, alpha, h) = (0.8, 1.3, 1e-5);
        let fd = (fin(p.phi_t(s + h, alpha)) - fin(p.phi_t(s - h, alpha))) / (2.0 * h);
        let want = 1.8 * (1.0 - (-alpha as f64).exp());
        assert!((fd - want).abs() < 1e-7);
        assert!((fin(p.h_alpha(s, alpha)) - want).abs() < 1e-14);
    }

    #[test]
    fn log_time_change_phi() {
        let base = LevyTriplet::brownian(1.0, 0.5).unwrap();
        let p = PiiCharacteristics::log_time_change(base.clone(), 2.0);
        let t: f64 = 3.0;
        let want = fin(base.exponent(1.5)) * 2.0 * (1.0 + t).ln();
        assert!((fin(p.phi_t(t, 1.5)) - want).abs() < 1e-13);
    }

    #[test]
    fn invariants_are_checked() {
        let bad = PiiCharacteristics::non_hom_poisson(TimeFn::parse("1 - t").unwrap());
        assert!(bad.validate_on(2.0).is_err());
        assert!(bad.validate_on(0.5).is_ok());
        let base = LevyTriplet::brownian(0.0, 1.0).unwrap();
        let shifted = PiiCharacteristics::time_changed(base.clone(), Expr::parse("1 + t").unwrap());
        assert!(shifted.validate_on(1.0).is_err());
        let g0 = PiiCharacteristics::integrated(base, TimeFn::parse("t - 0.5").unwrap());
        assert!(g0.validate_on(1.0).is_err());
    }
}
