//! Default-loss simulation under a calibrated factor model and
//! loss-distribution quantiles.
//!
//! An issuer defaults when its creditworthiness
//! `X_i = sqrt(beta_i)·alpha_i'F + sqrt(1 - beta_i)·eps_i` falls below
//! `d_i = Φ⁻¹(p_i)`; the portfolio loss is `Σ q_i e_i 1{X_i <= d_i}`.

mod portfolio;
mod report;
mod simulate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use portfolio::{
    load_portfolio, schematic_portfolios, IssuerClass, Portfolio, PortfolioKind, Position,
    PositionPd, SchematicPortfolio,
};
pub use report::{quantile_report, QuantileReport, QuantileRow, NORMAL_TAIL_REFERENCE};
pub use simulate::{
    creditworthiness_correlation, default_indicators, simulate, simulate_with, var,
    DefaultIndicators, LossDistribution, SimulationOptions,
};

use crate::error::{Error, Result};
use crate::normal;
use crate::timeseries::Rating;

/// Annual default probability floor applied to rating lookups.
pub const PD_FLOOR: f64 = 0.0003;

/// Historical one-year default rates by rating and issuer class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingPdTable {
    pub corporate: BTreeMap<Rating, f64>,
    pub sovereign: BTreeMap<Rating, f64>,
    pub floor: f64,
}

impl Default for RatingPdTable {
    fn default() -> Self {
        use Rating::*;
        let pct = |v: &[(Rating, f64)]| v.iter().map(|&(r, p)| (r, p / 100.0)).collect();
        RatingPdTable {
            corporate: pct(&[
                (AAA, 0.00),
                (AA, 0.02),
                (A, 0.06),
                (BBB, 0.17),
                (BB, 0.65),
                (B, 3.44),
                (CCC, 26.63),
            ]),
            sovereign: pct(&[
                (AAA, 0.00),
                (AA, 0.00),
                (A, 0.00),
                (BBB, 0.00),
                (BB, 0.49),
                (B, 2.82),
                (CCC, 41.56),
            ]),
            floor: PD_FLOOR,
        }
    }
}

impl RatingPdTable {
    /// Floored default probability.
    pub fn pd(&self, rating: Rating, class: IssuerClass) -> Result<f64> {
        let table = match class {
            IssuerClass::Corporate => &self.corporate,
            IssuerClass::Sovereign => &self.sovereign,
        };
        let raw = *table
            .get(&rating)
            .ok_or_else(|| Error::UnknownRating(format!("{rating} ({})", class.as_str())))?;
        Ok(raw.max(self.floor))
    }
}

pub fn pd_lookup(rating: Rating, class: IssuerClass, table: &RatingPdTable) -> Result<f64> {
    table.pd(rating, class)
}

/// `Φ⁻¹(pd)`.
pub fn default_threshold(pd: f64) -> Result<f64> {
    normal::inverse_cdf(pd)
}

/// Threshold with the `pd = 0` and `pd = 1` limits mapped to ∓∞.
pub(crate) fn threshold_or_limit(pd: f64) -> Result<f64> {
    if pd == 0.0 {
        Ok(f64::NEG_INFINITY)
    } else if pd == 1.0 {
        Ok(f64::INFINITY)
    } else {
        default_threshold(pd)
    }
}

/// Large-portfolio loss-fraction quantile of the one-factor model:
/// `Φ((Φ⁻¹(p) + sqrt(beta)·Φ⁻¹(alpha)) / sqrt(1 - beta))`.
pub fn vasicek_var(p: f64, beta: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!(
            "beta {beta} must lie in [0, 1)"
        )));
    }
    let d = normal::inverse_cdf(p)?;
    let z = normal::inverse_cdf(alpha)?;
    Ok(normal::cdf((d + beta.sqrt() * z) / (1.0 - beta).sqrt()))
}
