//! Systematic factors from cross-sectional averages, orthogonalisation
//! against the global factor, and per-issuer calibration of the six model
//! variants.

mod calibration;
mod document;
mod factors;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use calibration::{
    calibrate, correlation_error_report, model_implied_correlations, r_squared_summary,
    CalibratedModel, CorrelationErrorReport, HistogramBin, RSquaredSummary,
    NORMALIZATION_TOLERANCE,
};
pub use document::{CalibrationDocument, IssuerCalibration, CALIBRATION_SCHEMA_VERSION};
pub use factors::{build_factors, orthogonalize, FactorDiagnostics, FactorSet, GroupAssignments};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Global,
    Industry,
    Region,
    Community,
    Subcommunity,
}

impl FactorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::Global => "global",
            FactorKind::Industry => "industry",
            FactorKind::Region => "region",
            FactorKind::Community => "community",
            FactorKind::Subcommunity => "subcommunity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactorId {
    pub kind: FactorKind,
    pub label: String,
}

impl FactorId {
    pub fn global() -> Self {
        FactorId {
            kind: FactorKind::Global,
            label: "Global".into(),
        }
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.label)
    }
}

/// The six factor configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "M1_global")]
    M1Global,
    #[serde(rename = "M2_global_industry")]
    M2GlobalIndustry,
    #[serde(rename = "M3_global_region")]
    M3GlobalRegion,
    #[serde(rename = "M4_global_region_industry")]
    M4GlobalRegionIndustry,
    #[serde(rename = "M5_global_community")]
    M5GlobalCommunity,
    #[serde(rename = "M6_global_subcommunity")]
    M6GlobalSubcommunity,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 6] = [
        ModelVariant::M1Global,
        ModelVariant::M2GlobalIndustry,
        ModelVariant::M3GlobalRegion,
        ModelVariant::M4GlobalRegionIndustry,
        ModelVariant::M5GlobalCommunity,
        ModelVariant::M6GlobalSubcommunity,
    ];

    /// Group factor kinds an issuer is regressed on besides the global factor.
    pub fn group_kinds(self) -> &'static [FactorKind] {
        match self {
            ModelVariant::M1Global => &[],
            ModelVariant::M2GlobalIndustry => &[FactorKind::Industry],
            ModelVariant::M3GlobalRegion => &[FactorKind::Region],
            ModelVariant::M4GlobalRegionIndustry => &[FactorKind::Region, FactorKind::Industry],
            ModelVariant::M5GlobalCommunity => &[FactorKind::Community],
            ModelVariant::M6GlobalSubcommunity => &[FactorKind::Subcommunity],
        }
    }

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::M1Global => "M1_global",
            ModelVariant::M2GlobalIndustry => "M2_global_industry",
            ModelVariant::M3GlobalRegion => "M3_global_region",
            ModelVariant::M4GlobalRegionIndustry => "M4_global_region_industry",
            ModelVariant::M5GlobalCommunity => "M5_global_community",
            ModelVariant::M6GlobalSubcommunity => "M6_global_subcommunity",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    /// Accepts "M3", "3", "m3" or the full name.
    fn from_str(s: &str) -> Result<Self, Error> {
        let t = s.trim().to_ascii_lowercase();
        let digits = t.trim_start_matches('m');
        let head = digits.split('_').next().unwrap_or_default();
        match head.parse::<usize>() {
            Ok(k @ 1..=6) => Ok(ModelVariant::ALL[k - 1]),
            _ => Err(Error::Config(format!(
                "unknown model variant `{s}` (expected M1..M6)"
            ))),
        }
    }
}
