//! Process-specification documents.
//!
//! ```json
//! { "process": { "kind": "time_changed_levy",
//!                "base": { "b0": 1.0, "c0": 0.5 },
//!                "tau": "2*ln(1+t)" } }
//! ```
//!
//! Time functions are expressions in `t` (or plain numbers), densities are
//! expressions in `x`; see [`crate::expr`] for the grammar.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::process::{
    GeneralDensity, HittingTimeBm, ItoCharacteristics, JumpComponent, JumpMeasure, LevyTriplet, PiiCharacteristics,
    Process, TimeFn,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub process: ProcessSpec,
}

/// A function of time: a number or an expression in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FnSpec {
    Number(f64),
    Text(String),
}

impl FnSpec {
    fn to_time_fn(&self, what: &str) -> Result<TimeFn> {
        match self {
            FnSpec::Number(c) => Ok(TimeFn::Const(*c)),
            FnSpec::Text(s) => TimeFn::parse(s).map_err(|e| Error::Spec(format!("{what}: {e}"))),
        }
    }

    fn to_expr(&self, what: &str) -> Result<Expr> {
        match self {
            FnSpec::Number(c) => Ok(Expr::Const(*c)),
            FnSpec::Text(s) => Expr::parse(s).map_err(|e| Error::Spec(format!("{what}: {e}"))),
        }
    }
}

fn one() -> FnSpec {
    FnSpec::Number(1.0)
}

/// How `b0` is quoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftConvention {
    /// Compensator `αx` over all jumps (the library's internal form).
    #[default]
    Untruncated,
    /// Compensator `αx 1_{|x|≤1}`.
    Truncated,
    /// The slope of the path between jumps, `b0 - ∫ x K(dx)`.
    Net,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassSpec {
    pub location: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSpec {
    #[default]
    None,
    PointMasses {
        masses: Vec<PointMassSpec>,
    },
    GaussianJumps {
        lambda: f64,
        mean: f64,
        std: f64,
    },
    TemperedStable {
        c: f64,
        #[serde(alias = "M")]
        m: f64,
        beta: f64,
    },
    GeneralDensity {
        /// Expression in `x`.
        density: String,
        /// `null` for an unbounded end.
        support: (Option<f64>, Option<f64>),
        integrability_verified: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        envelope: Option<f64>,
    },
}

impl JumpSpec {
    pub fn to_measure(&self) -> Result<JumpMeasure> {
        let m = match self {
            JumpSpec::None => JumpMeasure::None,
            JumpSpec::PointMasses { masses } => {
                let pairs: Vec<(f64, f64)> = masses.iter().map(|p| (p.location, p.rate)).collect();
                JumpMeasure::point_masses(&pairs)?
            }
            &JumpSpec::GaussianJumps { lambda, mean, std } => JumpMeasure::gaussian(lambda, mean, std)?,
            &JumpSpec::TemperedStable { c, m, beta } => JumpMeasure::tempered_stable(c, m, beta)?,
            JumpSpec::GeneralDensity {
                density,
                support,
                integrability_verified,
                envelope,
            } => {
                let e = Expr::parse_in(density, "x").map_err(|e| Error::Spec(format!("density: {e}")))?;
                let lo = support.0.unwrap_or(f64::NEG_INFINITY);
                let hi = support.1.unwrap_or(f64::INFINITY);
                if lo >= hi {
                    return Err(Error::Spec(format!("empty density support [{lo}, {hi}]")));
                }
                let mut g = GeneralDensity::new(density.clone(), move |x| e.eval(x), (lo, hi), *integrability_verified);
                if let Some(b) = envelope {
                    g = g.with_envelope(*b);
                }
                JumpMeasure::GeneralDensity(g)
            }
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSpec {
    #[serde(default)]
    pub b0: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub jumps: JumpSpec,
    #[serde(default, skip_serializing_if = "is_default_convention")]
    pub convention: DriftConvention,
}

fn is_default_convention(c: &DriftConvention) -> bool {
    *c == DriftConvention::Untruncated
}

impl TripletSpec {
    pub fn to_triplet(&self) -> Result<LevyTriplet> {
        let jumps = self.jumps.to_measure()?;
        match self.convention {
            DriftConvention::Untruncated => LevyTriplet::new(self.b0, self.c0, jumps),
            DriftConvention::Truncated => LevyTriplet::from_truncated(self.b0, self.c0, jumps),
            DriftConvention::Net => {
                let mean = jumps.first_moment()?;
                LevyTriplet::new(self.b0 + mean, self.c0, jumps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    #[serde(default = "one")]
    pub weight: FnSpec,
    #[serde(default = "one")]
    pub scale: FnSpec,
    pub measure: JumpSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Homogeneous {
        #[serde(default)]
        b0: f64,
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        jumps: JumpSpec,
        #[serde(default, skip_serializing_if = "is_default_convention")]
        convention: DriftConvention,
    },
    NonHomPoisson {
        intensity: FnSpec,
    },
    TimeChangedLevy {
        base: TripletSpec,
        tau: FnSpec,
    },
    IntegratedLevy {
        base: TripletSpec,
        g: FnSpec,
    },
    GeneralIto {
        #[serde(default = "zero")]
        drift: FnSpec,
        #[serde(default = "zero")]
        diffusion: FnSpec,
        #[serde(default)]
        jumps: Vec<ComponentSpec>,
    },
    HittingTimeBm {
        mu: f64,
        sigma: f64,
        b: f64,
    },
}

fn zero() -> FnSpec {
    FnSpec::Number(0.0)
}

impl ProcessSpec {
    pub fn to_process(&self) -> Result<Process> {
        Ok(match self {
            ProcessSpec::Homogeneous {
                b0,
                c0,
                jumps,
                convention,
            } => TripletSpec {
                b0: *b0,
                c0: *c0,
                jumps: jumps.clone(),
                convention: *convention,
            }
            .to_triplet()?
            .into(),
            ProcessSpec::NonHomPoisson { intensity } => {
                PiiCharacteristics::non_hom_poisson(intensity.to_time_fn("intensity")?).into()
            }
            ProcessSpec::TimeChangedLevy { base, tau } => {
                PiiCharacteristics::time_changed(base.to_triplet()?, tau.to_expr("tau")?).into()
            }
            ProcessSpec::IntegratedLevy { base, g } => {
                PiiCharacteristics::integrated(base.to_triplet()?, g.to_time_fn("g")?).into()
            }
            ProcessSpec::GeneralIto { drift, diffusion, jumps } => {
                let jumps = jumps
                    .iter()
                    .map(|c| {
                        Ok(JumpComponent {
                            weight: c.weight.to_time_fn("weight")?,
                            scale: c.scale.to_time_fn("scale")?,
                            measure: c.measure.to_measure()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                PiiCharacteristics::GeneralIto(ItoCharacteristics {
                    drift: drift.to_time_fn("drift")?,
                    diffusion: diffusion.to_time_fn("diffusion")?,
                    jumps,
                })
                .into()
            }
            &ProcessSpec::HittingTimeBm { mu, sigma, b } => HittingTimeBm::new(mu, sigma, b)?.into(),
        })
    }
}

impl SpecDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Spec(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec documents serialize")
    }

    /// The process, with every parameter validated.
    pub fn to_process(&self) -> Result<Process> {
        self.process.to_process().map_err(|e| match e {
            Error::Spec(_) => e,
            other => Error::Spec(other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_document() {
        let d = SpecDocument::from_json(r#"{"process": {"kind": "homogeneous", "b0": 1.5, "c0": 1}}"#).unwrap();
        let p = d.to_process().unwrap();
        assert_eq!(p, LevyTriplet::brownian(1.5, 1.0).unwrap().into());
    }

    #[test]
    fn gaussian_jumps_use_lambda() {
        let d = SpecDocument::from_json(
            r#"{"process": {"kind": "homogeneous", "b0": 0,
                "jumps": {"kind": "gaussian_jumps", "lambda": 1, "mean": 0, "std": 1}}}"#,
        )
        .unwrap();
        assert_eq!(
            d.to_process().unwrap(),
            LevyTriplet::compound_poisson_gaussian(1.0, 0.0, 1.0).unwrap().into()
        );
    }

    #[test]
    fn net_drift_convention() {
        let d = SpecDocument::from_json(
            r#"{"process": {"kind": "homogeneous", "convention": "net",
                "jumps": {"kind": "point_masses", "masses": [{"location": 1, "rate": 2}]}}}"#,
        )
        .unwrap();
        assert_eq!(d.to_process().unwrap(), LevyTriplet::poisson(2.0).unwrap().into());
    }

    #[test]
    fn time_change_round_trip() {
        let d = SpecDocument::from_json(
            r#"{"process": {"kind": "time_changed_levy", "base": {"b0": 1, "c0": 0.5}, "tau": "2*ln(1+t)"}}"#,
        )
        .unwrap();
        let again = SpecDocument::from_json(&d.to_json()).unwrap();
        assert_eq!(again, d);
        assert_eq!(again.to_process().unwrap(), d.to_process().unwrap());
        let want = PiiCharacteristics::log_time_change(LevyTriplet::brownian(1.0, 0.5).unwrap(), 2.0);
        let got = d.to_process().unwrap();
        let pii = got.pii().unwrap();
        for t in [0.0, 0.5, 2.0] {
            assert!((pii.phi_t(t, 1.5).unwrap().finite().unwrap() - want.phi_t(t, 1.5).unwrap().finite().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn schema_errors_are_spec_errors() {
        for bad in [
            r#"{"process": {"kind": "levy"}}"#,
            r#"{"process": {"kind": "homogeneous", "b0": 1, "sigma": 2}}"#,
            r#"{"process": {"kind": "homogeneous", "c0": -1}}"#,
            r#"{"process": {"kind": "non_hom_poisson", "intensity": "t +"}}"#,
            r#"{"proc": {}}"#,
        ] {
            let r = SpecDocument::from_json(bad).and_then(|d| d.to_process());
            assert!(matches!(r, Err(Error::Spec(_))), "{bad}: {r:?}");
        }
    }

    #[test]
    fn general_density_with_unbounded_support() {
        let d = SpecDocument::from_json(
            r#"{"process": {"kind": "homogeneous", "b0": 1,
                "jumps": {"kind": "general_density", "density": "exp(-2*x)", "support": [0, null],
                          "integrability_verified": true}}}"#,
        )
        .unwrap();
        let p = d.to_process().unwrap();
        let phi = p.levy().unwrap().exponent(1.0).unwrap().finite().unwrap();
        // ∫(e^{-x} - 1 + x) e^{-2x} dx = 1/3 - 1/2 + 1/4
        assert!((phi - (1.0 - 1.0 / 12.0)).abs() < 1e-8);
        assert_eq!(SpecDocument::from_json(&d.to_json()).unwrap(), d);
    }
}
