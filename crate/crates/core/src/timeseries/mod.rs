//! Spread panels, log-returns, standardisation, resampling and windowing.

mod ingest;
mod meta;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use ingest::{
    load_meta, load_panel, write_meta, write_panel, DroppedIssuer, IngestReport, LoadOptions,
};
pub use meta::{IssuerMeta, Label, Rating, Region, Sector};

use crate::error::{Error, Result};

/// Date-indexed spreads (basis points), one column per issuer.
#[derive(Debug, Clone)]
pub struct SpreadPanel {
    pub dates: Vec<NaiveDate>,
    pub issuers: Vec<String>,
    /// `dates.len() × issuers.len()`; NaN marks a missing observation.
    pub values: DMatrix<f64>,
    pub meta: Vec<Option<IssuerMeta>>,
    pub report: IngestReport,
}

impl SpreadPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        issuers: Vec<String>,
        values: DMatrix<f64>,
        meta: Vec<Option<IssuerMeta>>,
    ) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != issuers.len() {
            return Err(Error::InvalidInput(format!(
                "values are {}x{} but there are {} dates and {} issuers",
                values.nrows(),
                values.ncols(),
                dates.len(),
                issuers.len()
            )));
        }
        if meta.len() != issuers.len() {
            return Err(Error::InvalidInput(
                "metadata length differs from issuer count".into(),
            ));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        check_unique(&issuers)?;
        for (j, id) in issuers.iter().enumerate() {
            if let Some((t, v)) = values
                .column(j)
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_nan() && **v <= 0.0)
            {
                return Err(Error::InvalidInput(format!(
                    "non-positive spread {v} for `{id}` on {}",
                    dates[t]
                )));
            }
        }
        Ok(SpreadPanel {
            dates,
            issuers,
            values,
            meta,
            report: IngestReport::default(),
        })
    }

    pub fn n_issuers(&self) -> usize {
        self.issuers.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate issuer `{id}`")));
        }
    }
    Ok(())
}

/// Log-returns, one column per issuer.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// End date of each return interval.
    pub dates: Vec<NaiveDate>,
    pub issuers: Vec<String>,
    /// `T × N`.
    pub returns: DMatrix<f64>,
    pub standardized: bool,
    pub meta: Vec<Option<IssuerMeta>>,
}

impl ReturnPanel {
    /// Builds a panel without metadata. Dates may be empty, in which case
    /// a synthetic daily calendar starting 2000-01-03 is attached.
    pub fn from_matrix(issuers: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if issuers.len() != returns.ncols() {
            return Err(Error::InvalidInput(
                "issuer count differs from column count".into(),
            ));
        }
        check_unique(&issuers)?;
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = start.iter_days().take(returns.nrows()).collect();
        let meta = vec![None; issuers.len()];
        Ok(ReturnPanel {
            dates,
            issuers,
            returns,
            standardized: false,
            meta,
        })
    }

    pub fn with_meta(mut self, meta: Vec<Option<IssuerMeta>>) -> Result<Self> {
        if meta.len() != self.issuers.len() {
            return Err(Error::InvalidInput(
                "metadata length differs from issuer count".into(),
            ));
        }
        self.meta = meta;
        Ok(self)
    }

    pub fn n_obs(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.returns.ncols()
    }

    /// Restriction to a subset of issuers, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates.clone(),
            issuers: columns.iter().map(|&j| self.issuers[j].clone()).collect(),
            returns: self.returns.select_columns(columns),
            standardized: self.standardized,
            meta: columns.iter().map(|&j| self.meta[j].clone()).collect(),
        }
    }

    /// Rows `start..end`. The slice is not standardised even if `self` is.
    pub fn slice_rows(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            issuers: self.issuers.clone(),
            returns: self.returns.rows(start, end - start).into_owned(),
            standardized: false,
            meta: self.meta.clone(),
        }
    }
}

/// Sampling step in trading days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Resolution(usize);

impl Resolution {
    pub const DAILY: Resolution = Resolution(1);
    pub const TWO_DAYS: Resolution = Resolution(2);
    pub const WEEKLY: Resolution = Resolution(5);
    pub const TWO_WEEKS: Resolution = Resolution(10);
    pub const MONTHLY: Resolution = Resolution(21);

    /// 1 day, 2 days, 1 week, 2 weeks, 1 month.
    pub const CANONICAL: [Resolution; 5] = [
        Resolution::DAILY,
        Resolution::TWO_DAYS,
        Resolution::WEEKLY,
        Resolution::TWO_WEEKS,
        Resolution::MONTHLY,
    ];

    pub fn new(step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidInput(
                "resolution step must be positive".into(),
            ));
        }
        Ok(Resolution(step))
    }

    pub fn step(self) -> usize {
        self.0
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            1 => f.write_str("1d"),
            2 => f.write_str("2d"),
            5 => f.write_str("1w"),
            10 => f.write_str("2w"),
            21 => f.write_str("1m"),
            n => write!(f, "{n}"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1d" | "daily" => Ok(Resolution::DAILY),
            "2d" => Ok(Resolution::TWO_DAYS),
            "1w" | "weekly" => Ok(Resolution::WEEKLY),
            "2w" => Ok(Resolution::TWO_WEEKS),
            "1m" | "monthly" => Ok(Resolution::MONTHLY),
            other => other
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("unrecognised resolution `{other}`")))
                .and_then(|n| Resolution::new(n).map_err(|e| Error::Config(e.to_string()))),
        }
    }
}

/// Subsamples prices every `res.step()` trading days from the first date and
/// differences their logarithms.
pub fn log_returns(panel: &SpreadPanel, res: Resolution) -> Result<ReturnPanel> {
    let rows: Vec<usize> = (0..panel.n_dates()).step_by(res.step()).collect();
    if rows.len() < 2 {
        return Err(Error::EmptyPanel(format!(
            "{} dates give fewer than 2 sampled points at step {}",
            panel.n_dates(),
            res.step()
        )));
    }
    let n = panel.n_issuers();
    let t = rows.len() - 1;
    let mut returns = DMatrix::zeros(t, n);
    for j in 0..n {
        for k in 0..t {
            let prev = panel.values[(rows[k], j)];
            let next = panel.values[(rows[k + 1], j)];
            if prev.is_nan() || next.is_nan() {
                return Err(Error::InvalidInput(format!(
                    "missing spread for `{}` on a sampled date; fill gaps first",
                    panel.issuers[j]
                )));
            }
            returns[(k, j)] = (next / prev).ln();
        }
    }
    Ok(ReturnPanel {
        dates: rows[1..].iter().map(|&r| panel.dates[r]).collect(),
        issuers: panel.issuers.clone(),
        returns,
        standardized: false,
        meta: panel.meta.clone(),
    })
}

/// Column mean and population standard deviation.
pub(crate) fn column_moments(returns: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let col = returns.column(j);
    let t = col.len() as f64;
    let mean = col.iter().sum::<f64>() / t;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t;
    (mean, var.sqrt())
}

/// Per-column `(x - mean) / sd` with the population (1/T) variance.
pub fn standardize(panel: &ReturnPanel) -> Result<ReturnPanel> {
    if panel.n_obs() < 2 {
        return Err(Error::EmptyPanel(
            "need at least 2 observations to standardize".into(),
        ));
    }
    let mut out = panel.clone();
    for j in 0..panel.n_series() {
        let (mean, sd) = column_moments(&panel.returns, j);
        if !(sd > 1e-300) || !sd.is_finite() {
            return Err(Error::ZeroVariance {
                issuer: panel.issuers[j].clone(),
            });
        }
        out.returns.column_mut(j).apply(|x| *x = (*x - mean) / sd);
        // second pass removes the residual mean left by rounding
        let (m2, _) = column_moments(&out.returns, j);
        out.returns.column_mut(j).apply(|x| *x -= m2);
    }
    out.standardized = true;
    Ok(out)
}

/// Consecutive non-overlapping slices of `window` observations. A trailing
/// remainder is kept as a shorter window when it holds at least half a window.
pub fn windows(panel: &ReturnPanel, window: usize) -> Result<Vec<ReturnPanel>> {
    if window < 2 {
        return Err(Error::InvalidInput(
            "window length must be at least 2".into(),
        ));
    }
    let t = panel.n_obs();
    let mut out = Vec::with_capacity(t / window + 1);
    let mut start = 0;
    while start < t {
        let end = (start + window).min(t);
        if 2 * (end - start) < window {
            break;
        }
        out.push(panel.slice_rows(start, end));
        start = end;
    }
    Ok(out)
}
