//! Synthetic panels with planted group structure, used by the demo command
//! and the test suites.
//!
//! Returns follow `x_i(t) = m·M(t) + g·G_{k(i)}(t) + √(1 − m² − g²)·ε_i(t)`
//! with a market factor `M`, equicorrelated group factors `G_k` and
//! independent noise, all standard normal.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::timeseries::{IssuerMeta, Label, Rating, Region, ReturnPanel, Sector, SpreadPanel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub group_sizes: Vec<usize>,
    pub n_obs: usize,
    pub market_loading: f64,
    pub group_loading: f64,
    /// Pairwise correlation of the group factors.
    pub group_correlation: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn n_series(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn truth(&self) -> Vec<usize> {
        self.group_sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
            .collect()
    }
}

/// Generating factor paths of a planted panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    pub market: Vec<f64>,
    /// T x K group factors.
    pub groups: DMatrix<f64>,
}

/// Raw (not standardised) returns and the planted group of every column.
pub fn planted_returns(spec: &PlantedSpec) -> Result<(ReturnPanel, Vec<usize>)> {
    planted_with_factors(spec).map(|(p, truth, _)| (p, truth))
}

/// As [`planted_returns`], also returning the latent factors.
pub fn planted_with_factors(
    spec: &PlantedSpec,
) -> Result<(ReturnPanel, Vec<usize>, LatentFactors)> {
    let k = spec.group_sizes.len();
    let idio = 1.0 - spec.market_loading.powi(2) - spec.group_loading.powi(2);
    if idio < 0.0 {
        return Err(Error::InvalidInput(
            "loadings imply negative idiosyncratic variance".into(),
        ));
    }
    let factor_corr = DMatrix::from_fn(
        k,
        k,
        |i, j| if i == j { 1.0 } else { spec.group_correlation },
    );
    let chol = factor_corr.cholesky().ok_or_else(|| {
        Error::InvalidInput("group factor correlation is not positive definite".into())
    })?;
    let l = chol.l();

    let key = StreamKey::new(spec.seed, "planted");
    let truth = spec.truth();
    let n = truth.len();
    let mut x = DMatrix::zeros(spec.n_obs, n);
    let mut latent = LatentFactors {
        market: Vec::with_capacity(spec.n_obs),
        groups: DMatrix::zeros(spec.n_obs, k),
    };
    for t in 0..spec.n_obs {
        let mut rng = key.stream(t as u64);
        let market: f64 = StandardNormal.sample(&mut rng);
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let groups: Vec<f64> = (0..k)
            .map(|a| (0..=a).map(|b| l[(a, b)] * z[b]).sum())
            .collect();
        latent.market.push(market);
        for (a, &v) in groups.iter().enumerate() {
            latent.groups[(t, a)] = v;
        }
        for (i, &g) in truth.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[(t, i)] =
                spec.market_loading * market + spec.group_loading * groups[g] + idio.sqrt() * e;
        }
    }
    let ids = (0..n).map(|i| format!("ISS{i:04}")).collect();
    Ok((ReturnPanel::from_matrix(ids, x)?, truth, latent))
}

/// Weekday calendar starting at `start`.
pub fn trading_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

/// Spread levels whose daily log-changes are `vol` times the planted returns.
pub fn planted_spreads(spec: &PlantedSpec, vol: f64) -> Result<(SpreadPanel, Vec<usize>)> {
    let (returns, truth) = planted_returns(spec)?;
    let t = spec.n_obs + 1;
    let n = returns.n_series();
    let mut values = DMatrix::zeros(t, n);
    for j in 0..n {
        let mut level = 50.0 + 10.0 * (j % 20) as f64;
        values[(0, j)] = level;
        for s in 0..spec.n_obs {
            level *= (vol * returns.returns[(s, j)]).exp();
            values[(s + 1, j)] = level;
        }
    }
    let dates = trading_days(NaiveDate::from_ymd_opt(2007, 1, 1).expect("valid date"), t);
    let meta = vec![None; n];
    Ok((
        SpreadPanel::new(dates, returns.issuers, values, meta)?,
        truth,
    ))
}

/// Deterministic metadata: the first `n_sovereign` issuers are governments.
/// Every other corporate is a financial; the remaining corporates cycle
/// through the other sectors. Regions cycle independently.
pub fn synthetic_meta(n: usize, n_sovereign: usize) -> Vec<Option<IssuerMeta>> {
    let other: Vec<Sector> = Sector::ALL
        .iter()
        .copied()
        .filter(|s| !matches!(s, Sector::Government | Sector::Financials))
        .collect();
    (0..n)
        .map(|i| {
            let sector = match i.checked_sub(n_sovereign) {
                None => Sector::Government,
                Some(c) if c % 2 == 0 => Sector::Financials,
                Some(c) => other[(c / 2) % other.len()],
            };
            Some(IssuerMeta {
                region: Label::Known(Region::ALL[(i * 7) % Region::ALL.len()]),
                sector: Label::Known(sector),
                rating: Some(Rating::ALL[1 + i % 4]),
            })
        })
        .collect()
}
