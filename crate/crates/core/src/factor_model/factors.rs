use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{FactorId, FactorKind};
use crate::community::{Hierarchy, Partition};
use crate::error::{Error, Result};
use crate::timeseries::ReturnPanel;

/// Variance below which a factor series counts as degenerate.
const DEGENERATE_VARIANCE: f64 = 1e-20;

/// Group label of every issuer for each grouping kind; `None` means the
/// issuer carries no label of that kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignments {
    pub industry: Vec<Option<String>>,
    pub region: Vec<Option<String>>,
    pub community: Vec<Option<String>>,
    pub subcommunity: Vec<Option<String>>,
}

impl GroupAssignments {
    /// Industry and region from issuer metadata. Unknown labels form their own groups.
    pub fn from_panel(panel: &ReturnPanel) -> Self {
        let n = panel.n_series();
        let mut out = GroupAssignments {
            industry: Vec::with_capacity(n),
            region: Vec::with_capacity(n),
            community: vec![None; n],
            subcommunity: vec![None; n],
        };
        for m in &panel.meta {
            out.industry
                .push(m.as_ref().map(|m| m.sector.as_str().to_string()));
            out.region
                .push(m.as_ref().map(|m| m.region.as_str().to_string()));
        }
        out
    }

    pub fn with_partition(mut self, partition: &Partition) -> Self {
        let h = Hierarchy::flat(partition.clone());
        self.community = h
            .leaf_names(partition.len())
            .into_iter()
            .map(Some)
            .collect();
        self
    }

    /// Top-level and deepest community names. Unsplit communities are their own leaf.
    pub fn with_hierarchy(mut self, hierarchy: &Hierarchy) -> Self {
        let n = hierarchy.members.len();
        let paths = hierarchy.paths(n);
        self.community = paths.iter().map(|p| p.first().cloned()).collect();
        self.subcommunity = paths.iter().map(|p| p.last().cloned()).collect();
        self
    }

    pub fn with_communities(mut self, top: Vec<String>, leaf: Vec<String>) -> Self {
        self.community = top.into_iter().map(Some).collect();
        self.subcommunity = leaf.into_iter().map(Some).collect();
        self
    }

    pub fn labels(&self, kind: FactorKind) -> Option<&[Option<String>]> {
        match kind {
            FactorKind::Global => None,
            FactorKind::Industry => Some(&self.industry),
            FactorKind::Region => Some(&self.region),
            FactorKind::Community => Some(&self.community),
            FactorKind::Subcommunity => Some(&self.subcommunity),
        }
    }

    pub fn label(&self, kind: FactorKind, issuer: usize) -> Option<&str> {
        self.labels(kind)?.get(issuer)?.as_deref()
    }
}

/// Regression of one group factor on the global factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorDiagnostics {
    pub gamma: f64,
    /// Against the null `gamma = 1`.
    pub t_statistic: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub residual_sd: f64,
    pub global_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    /// Column 0 is always the global factor.
    pub names: Vec<FactorId>,
    /// T x K factor returns.
    pub series: DMatrix<f64>,
    /// T x K; equal to `series` until orthogonalised. Column 0 stays global.
    pub residual_series: DMatrix<f64>,
    /// Global loading per factor; 1 for the global factor itself.
    pub gammas: Vec<f64>,
    /// `None` for the global factor and before orthogonalisation.
    pub diagnostics: Vec<Option<FactorDiagnostics>>,
    /// Panel columns averaged into each factor.
    pub members: Vec<Vec<usize>>,
    pub orthogonalized: bool,
    pub groups: GroupAssignments,
    pub warnings: Vec<String>,
}

impl FactorSet {
    pub fn n_factors(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, kind: FactorKind, label: &str) -> Option<usize> {
        self.names
            .iter()
            .position(|f| f.kind == kind && f.label == label)
    }

    pub fn has_kind(&self, kind: FactorKind) -> bool {
        self.names.iter().any(|f| f.kind == kind)
    }

    /// One row per non-global factor: kind, label, gamma, t-statistic, p-value,
    /// R², residual SD, global SD, member count.
    pub fn write_diagnostics_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io {
            path: "diagnostics".into(),
            source: e.into(),
        };
        w.write_record([
            "kind",
            "factor",
            "gamma",
            "t_statistic",
            "p_value",
            "r_squared",
            "residual_sd",
            "global_sd",
            "members",
        ])
        .map_err(io)?;
        for (k, name) in self.names.iter().enumerate() {
            let Some(d) = self.diagnostics[k] else {
                continue;
            };
            w.write_record([
                name.kind.as_str().to_string(),
                name.label.clone(),
                format!("{:?}", d.gamma),
                format!("{:?}", d.t_statistic),
                format!("{:?}", d.p_value),
                format!("{:?}", d.r_squared),
                format!("{:?}", d.residual_sd),
                format!("{:?}", d.global_sd),
                self.members[k].len().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "diagnostics".into(),
            source: e,
        })
    }
}

fn mean_of_columns(returns: &DMatrix<f64>, cols: &[usize]) -> Vec<f64> {
    let inv = 1.0 / cols.len() as f64;
    let mut out: Vec<f64> = (0..returns.nrows())
        .map(|t| cols.iter().map(|&j| returns[(t, j)]).sum::<f64>() * inv)
        .collect();
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|x| *x -= mean);
    out
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Equal-weight cross-sectional averages: the global factor over all issuers,
/// then one factor per group of every grouping kind present in `groups`.
/// Groups with fewer than 2 members or a degenerate series are dropped.
pub fn build_factors(panel: &ReturnPanel, groups: &GroupAssignments) -> Result<FactorSet> {
    let n = panel.n_series();
    let t = panel.n_obs();
    if n == 0 || t < 2 {
        return Err(Error::EmptyPanel(
            "factor construction needs issuers and at least 2 observations".into(),
        ));
    }
    if !panel.standardized {
        return Err(Error::InvalidInput(
            "factors are built from standardized returns".into(),
        ));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut names = vec![FactorId::global()];
    let mut columns = vec![mean_of_columns(&panel.returns, &all)];
    let mut members = vec![all];
    let mut warnings = Vec::new();

    for kind in [
        FactorKind::Industry,
        FactorKind::Region,
        FactorKind::Community,
        FactorKind::Subcommunity,
    ] {
        let labels = groups.labels(kind).expect("group kind");
        if labels.iter().all(Option::is_none) {
            continue;
        }
        if labels.len() != n {
            return Err(Error::IssuerMismatch(format!(
                "{} assignments cover {} issuers, panel has {n}",
                kind.as_str(),
                labels.len()
            )));
        }
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                by_label.entry(l.as_str()).or_default().push(i);
            }
        }
        for (label, cols) in by_label {
            if cols.len() < 2 {
                let msg = format!(
                    "{} factor `{label}` dropped: fewer than 2 members",
                    kind.as_str()
                );
                warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            let series = mean_of_columns(&panel.returns, &cols);
            if sum_sq(&series) / t as f64 <= DEGENERATE_VARIANCE {
                let msg = format!("{} factor `{label}` dropped: zero variance", kind.as_str());
                warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            names.push(FactorId {
                kind,
                label: label.to_string(),
            });
            columns.push(series);
            members.push(cols);
        }
    }

    let k = names.len();
    let series = DMatrix::from_fn(t, k, |r, c| columns[c][r]);
    Ok(FactorSet {
        residual_series: series.clone(),
        gammas: vec![1.0; k],
        diagnostics: vec![None; k],
        names,
        series,
        members,
        orthogonalized: false,
        groups: groups.clone(),
        warnings,
    })
}

/// Regresses every non-global factor on the global factor without intercept
/// and replaces it by the residual.
pub fn orthogonalize(factors: &FactorSet) -> Result<FactorSet> {
    let t = factors.series.nrows();
    let g: Vec<f64> = factors.series.column(0).iter().copied().collect();
    let gg = sum_sq(&g);
    if !(gg / t as f64 > DEGENERATE_VARIANCE) {
        return Err(Error::Numerical("global factor has zero variance".into()));
    }
    let df = (t - 1) as f64;
    let student = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let g_mean = g.iter().sum::<f64>() / t as f64;
    let global_sd = (g.iter().map(|x| (x - g_mean).powi(2)).sum::<f64>() / df).sqrt();

    let mut out = factors.clone();
    for k in 1..factors.n_factors() {
        let f = factors.series.column(k);
        let fg: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
        let gamma = fg / gg;
        let resid: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - gamma * b).collect();
        let ssr = sum_sq(&resid);
        let sst: f64 = f.iter().map(|v| v * v).sum();
        let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
        let se = (ssr / df / gg).sqrt();
        let diff = gamma - 1.0;
        let (t_statistic, p_value) = if se > 0.0 {
            let ts = diff / se;
            (ts, 2.0 * student.cdf(-ts.abs()))
        } else if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        let r_mean = resid.iter().sum::<f64>() / t as f64;
        let residual_sd = (resid.iter().map(|x| (x - r_mean).powi(2)).sum::<f64>() / df).sqrt();
        for (r, v) in resid.into_iter().enumerate() {
            out.residual_series[(r, k)] = v;
        }
        out.gammas[k] = gamma;
        out.diagnostics[k] = Some(FactorDiagnostics {
            gamma,
            t_statistic,
            p_value,
            r_squared,
            residual_sd,
            global_sd,
        });
    }
    out.orthogonalized = true;
    Ok(out)
}
