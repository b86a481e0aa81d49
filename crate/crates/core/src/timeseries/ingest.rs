//! CSV ingestion of long-format spread files and issuer metadata.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::meta::{IssuerMeta, Label, Region, Sector};
use super::SpreadPanel;
use crate::error::{Error, Result};

/// Gap handling for [`load_panel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Issuers missing more than this fraction of dates are dropped.
    pub max_missing_fraction: f64,
    /// Longest run of missing dates that is forward-filled.
    pub max_fill_gap: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_missing_fraction: 0.10,
            max_fill_gap: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedIssuer {
    pub issuer: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub dropped: Vec<DroppedIssuer>,
    pub filled_values: usize,
    /// `issuer: label` for region/sector labels outside the known vocabularies.
    pub unknown_labels: Vec<String>,
    /// Issuers in the spread file without a metadata record.
    pub missing_meta: Vec<String>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file))
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
    optional_tail: usize,
) -> Result<Vec<String>> {
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect::<Vec<_>>();
    let required = expected.len() - optional_tail;
    let ok = headers.len() >= required
        && headers.len() <= expected.len()
        && headers.iter().zip(expected).all(|(h, e)| h == e);
    if !ok {
        return Err(Error::parse(
            path,
            1,
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.join(",")
            ),
        ));
    }
    Ok(headers)
}

/// Reads the metadata file `issuer_id,region,sector[,rating]`.
pub fn load_meta(path: &Path) -> Result<HashMap<String, IssuerMeta>> {
    let mut reader = open_reader(path)?;
    check_header(
        path,
        &mut reader,
        &["issuer_id", "region", "sector", "rating"],
        1,
    )?;
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty issuer_id"));
        }
        let rating = match record.get(3).filter(|s| !s.is_empty()) {
            Some(r) => Some(
                r.parse()
                    .map_err(|e: Error| Error::parse(path, line, e.to_string()))?,
            ),
            None => None,
        };
        let meta = IssuerMeta {
            region: Label::<Region>::parse(record.get(1).unwrap_or_default()),
            sector: Label::<Sector>::parse(record.get(2).unwrap_or_default()),
            rating,
        };
        if out.insert(id.clone(), meta).is_some() {
            return Err(Error::parse(path, line, format!("duplicate issuer `{id}`")));
        }
    }
    Ok(out)
}

/// Reads a long-format spread file `date,issuer_id,spread_bps` into a
/// gap-filled panel. Dates are the union of all dates in the file; issuer
/// order follows first appearance.
pub fn load_panel(path: &Path, meta_path: Option<&Path>, opts: LoadOptions) -> Result<SpreadPanel> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["date", "issuer_id", "spread_bps"], 0)?;

    let mut order: Vec<String> = Vec::new();
    let mut series: HashMap<String, Vec<(NaiveDate, f64)>> = HashMap::new();
    let mut all_dates = BTreeSet::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, line, format!("bad date `{}`: {e}", &record[0])))?;
        let id = record[1].to_string();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty issuer_id"));
        }
        let value: f64 = record[2]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad spread `{}`", &record[2])))?;
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::parse(
                path,
                line,
                format!("non-positive spread {value}"),
            ));
        }
        let obs = series.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        if let Some(&(last, _)) = obs.last() {
            if date <= last {
                return Err(Error::parse(
                    path,
                    line,
                    format!("date {date} for `{id}` does not follow {last}"),
                ));
            }
        }
        obs.push((date, value));
        all_dates.insert(date);
    }
    if order.is_empty() {
        return Err(Error::EmptyPanel(format!(
            "{} has no observations",
            path.display()
        )));
    }

    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let index: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let t = dates.len();

    let meta_table = match meta_path {
        Some(p) => Some(load_meta(p)?),
        None => None,
    };

    let mut report = IngestReport::default();
    let mut kept_ids = Vec::new();
    let mut kept_cols: Vec<Vec<f64>> = Vec::new();
    for id in order {
        let mut col = vec![f64::NAN; t];
        for &(d, v) in &series[&id] {
            col[index[&d]] = v;
        }
        let missing = col.iter().filter(|v| v.is_nan()).count();
        if missing as f64 > opts.max_missing_fraction * t as f64 {
            report.dropped.push(DroppedIssuer {
                issuer: id,
                reason: format!("{missing} of {t} dates missing"),
            });
            continue;
        }
        match forward_fill(&mut col, opts.max_fill_gap) {
            Ok(filled) => {
                report.filled_values += filled;
                kept_ids.push(id);
                kept_cols.push(col);
            }
            Err(reason) => report.dropped.push(DroppedIssuer { issuer: id, reason }),
        }
    }
    if kept_ids.is_empty() {
        return Err(Error::EmptyPanel(
            "every issuer was dropped by the gap rules".into(),
        ));
    }

    let values = DMatrix::from_fn(t, kept_ids.len(), |i, j| kept_cols[j][i]);
    let meta: Vec<Option<IssuerMeta>> = match &meta_table {
        Some(table) => kept_ids
            .iter()
            .map(|id| {
                let m = table.get(id).cloned();
                match &m {
                    None => report.missing_meta.push(id.clone()),
                    Some(m) => {
                        if m.region.is_unknown() {
                            report
                                .unknown_labels
                                .push(format!("{id}: {}", m.region.as_str()));
                        }
                        if m.sector.is_unknown() {
                            report
                                .unknown_labels
                                .push(format!("{id}: {}", m.sector.as_str()));
                        }
                    }
                }
                m
            })
            .collect(),
        None => vec![None; kept_ids.len()],
    };
    for d in &report.dropped {
        log::warn!("dropped issuer {}: {}", d.issuer, d.reason);
    }

    let mut panel = SpreadPanel::new(dates, kept_ids, values, meta)?;
    panel.report = report;
    Ok(panel)
}

/// Fills runs of at most `limit` missing values with the last observation.
/// Returns the number of filled entries, or why the series cannot be filled.
fn forward_fill(col: &mut [f64], limit: usize) -> std::result::Result<usize, String> {
    if col.first().is_some_and(|v| v.is_nan()) {
        return Err("no observation on the first date to fill forward from".into());
    }
    let mut filled = 0;
    let mut i = 0;
    while i < col.len() {
        if col[i].is_nan() {
            let start = i;
            while i < col.len() && col[i].is_nan() {
                i += 1;
            }
            let gap = i - start;
            if gap > limit {
                return Err(format!("gap of {gap} dates exceeds fill limit {limit}"));
            }
            let last = col[start - 1];
            col[start..i].iter_mut().for_each(|v| *v = last);
            filled += gap;
        } else {
            i += 1;
        }
    }
    Ok(filled)
}

/// Writes `panel` in the long format read by [`load_panel`], skipping missing values.
pub fn write_panel(path: &Path, panel: &SpreadPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
    let err = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(["date", "issuer_id", "spread_bps"])
        .map_err(err)?;
    for (t, date) in panel.dates.iter().enumerate() {
        let d = date.format("%Y-%m-%d").to_string();
        for (j, id) in panel.issuers.iter().enumerate() {
            let v = panel.values[(t, j)];
            if v.is_finite() {
                w.write_record([d.as_str(), id.as_str(), &format!("{v:?}")])
                    .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `issuer_id,region,sector,rating` for every issuer with metadata.
pub fn write_meta(path: &Path, issuers: &[String], meta: &[Option<IssuerMeta>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
    let err = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(["issuer_id", "region", "sector", "rating"])
        .map_err(err)?;
    for (id, m) in issuers.iter().zip(meta) {
        if let Some(m) = m {
            let rating = m.rating.map(|r| r.to_string()).unwrap_or_default();
            w.write_record([id.as_str(), m.region.as_str(), m.sector.as_str(), &rating])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
