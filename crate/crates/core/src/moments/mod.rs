//! Mellin transforms `E(I_t^k)`, their infinite-horizon and Laplace–Carson
//! counterparts, negative moments and finiteness classification.

mod finiteness;
mod infinite;
mod levy;
mod negative;
mod pii_quad;
mod spline;
mod timechange;

use serde::{Deserialize, Serialize};

pub use finiteness::{
    negative_finiteness, positive_finiteness, BetaBound, FinitenessReport, OrderFiniteness, OrderVerdict,
};
pub use infinite::{
    infinite_moment, laplace_carson, laplace_carson_ladder, laplace_transform_series, SeriesResult,
};
pub use levy::{
    levy_moment_closed_form, levy_moment_closed_form_extended, levy_moment_closed_form_ladder, levy_moment_ode,
    moments_auto,
};
pub use negative::{
    negative_laplace_carson, negative_moment_ode, negative_moment_ode_levy, negative_moment_ratio, BaseCurve,
    NegativeLadder, NegativeLevel,
};
pub use pii_quad::{pii_moment_quadrature, pii_shifted_moments, QuadratureOptions, ShiftedGrid};
pub use spline::SmoothingSpline;
pub use timechange::{timechange_log_moments, timechange_log_moments_extended};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    OdeRecursion,
    Quadrature,
    McSeeded,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "ClosedForm",
            Method::OdeRecursion => "OdeRecursion",
            Method::Quadrature => "Quadrature",
            Method::McSeeded => "McSeeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

/// A value on `[0, +∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub order: i32,
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

/// `m^{(k)}` for consecutive orders at a fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentLadder {
    pub horizon: Horizon,
    pub entries: Vec<LadderEntry>,
    /// Set when a refinement loop stopped before reaching its tolerance.
    pub flagged: bool,
    pub notes: Vec<String>,
}

impl MomentLadder {
    pub(crate) fn new(horizon: Horizon) -> Self {
        MomentLadder {
            horizon,
            entries: Vec::new(),
            flagged: false,
            notes: Vec::new(),
        }
    }

    /// `m^{(order)}`; order 0 is always 1.
    pub fn value(&self, order: i32) -> Option<f64> {
        if order == 0 {
            return Some(1.0);
        }
        self.entries.iter().find(|e| e.order == order).map(|e| e.value)
    }

    pub fn max_order(&self) -> i32 {
        self.entries.iter().map(|e| e.order).max().unwrap_or(0)
    }
}
