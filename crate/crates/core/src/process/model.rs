use super::{HittingTimeBm, LaplaceExponent, LevyTriplet, PiiCharacteristics};

/// Anything the engines accept: a process given by its characteristics, or
/// the subordinated Brownian motion whose exponent is only known in closed
/// form.
#[derive(Debug, Clone, PartialEq)]
pub enum Process {
    Pii(PiiCharacteristics),
    HittingTime(HittingTimeBm),
}

impl Process {
    /// The Lévy exponent, when the process is time-homogeneous.
    pub fn levy(&self) -> Option<&dyn LaplaceExponent> {
        match self {
            Process::Pii(p) => p.as_levy().map(|t| t as &dyn LaplaceExponent),
            Process::HittingTime(h) => Some(h),
        }
    }

    pub fn pii(&self) -> Option<&PiiCharacteristics> {
        match self {
            Process::Pii(p) => Some(p),
            Process::HittingTime(_) => None,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.levy().is_some()
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Process::Pii(p) => p.kind_name(),
            Process::HittingTime(_) => "hitting_time_bm",
        }
    }
}

impl From<PiiCharacteristics> for Process {
    fn from(p: PiiCharacteristics) -> Self {
        Process::Pii(p)
    }
}

impl From<LevyTriplet> for Process {
    fn from(t: LevyTriplet) -> Self {
        Process::Pii(PiiCharacteristics::Homogeneous(t))
    }
}

impl From<HittingTimeBm> for Process {
    fn from(h: HittingTimeBm) -> Self {
        Process::HittingTime(h)
    }
}
