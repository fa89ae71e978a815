//! Process models: Lévy triplets, time-dependent characteristics, Laplace
//! exponents, moment conditions and time reversal.

mod conditions;
mod exponent;
mod jumps;
mod model;
mod pii;
mod reversal;
mod triplet;

pub use conditions::{check_exp_moment, check_moment_ladder_condition, Verdict};
pub use exponent::{hitting_time_subordinator_exponent, Exponent, HittingTimeBm, LaplaceExponent};
pub use jumps::{GeneralDensity, JumpMeasure, JumpSupport, PointMass};
pub use model::Process;
pub use pii::{ItoCharacteristics, JumpComponent, PiiCharacteristics, TimeFn};
pub use reversal::{reverse_characteristics, ReversedCharacteristics};
pub use triplet::LevyTriplet;

/// `Φ(α)` of a homogeneous triplet.
pub fn laplace_exponent(triplet: &LevyTriplet, alpha: f64) -> crate::Result<Exponent> {
    triplet.exponent(alpha)
}

/// `Φ(t, α)`.
pub fn phi_t(pii: &PiiCharacteristics, t: f64, alpha: f64) -> crate::Result<Exponent> {
    pii.phi_t(t, alpha)
}

/// `H^{(α)}_s`.
pub fn h_alpha(pii: &PiiCharacteristics, s: f64, alpha: f64) -> crate::Result<Exponent> {
    pii.h_alpha(s, alpha)
}
