use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RatingPdTable;
use crate::error::{Error, Result};
use crate::timeseries::{IssuerMeta, Label, Rating, Sector};

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssuerClass {
    Corporate,
    Sovereign,
}

impl IssuerClass {
    pub fn as_str(self) -> &'static str {
        match self {
            IssuerClass::Corporate => "corporate",
            IssuerClass::Sovereign => "sovereign",
        }
    }
}

impl FromStr for IssuerClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "corporate" | "corp" => Ok(IssuerClass::Corporate),
            "sovereign" | "sov" | "government" => Ok(IssuerClass::Sovereign),
            other => Err(Error::InvalidInput(format!(
                "unknown issuer class `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionPd {
    Rating(Rating),
    /// Used as given, without the rating floor.
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub issuer_id: String,
    /// Signed fraction of portfolio notional.
    pub exposure: f64,
    pub lgd: f64,
    pub pd: PositionPd,
    pub class: IssuerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioKind {
    /// Exposures sum to 1.
    LongOnly,
    /// Exposures sum to 0.
    LongShort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub name: String,
    pub kind: PortfolioKind,
    pub positions: Vec<Position>,
}

impl Portfolio {
    pub fn new(
        name: impl Into<String>,
        kind: PortfolioKind,
        positions: Vec<Position>,
    ) -> Result<Self> {
        let p = Portfolio {
            name: name.into(),
            kind,
            positions,
        };
        p.validate()?;
        Ok(p)
    }

    /// Equal-weight long-only portfolio with unit LGD.
    pub fn equal_weight(
        name: impl Into<String>,
        issuers: &[(String, PositionPd, IssuerClass)],
    ) -> Result<Self> {
        let e = 1.0 / issuers.len() as f64;
        let positions = issuers
            .iter()
            .map(|(id, pd, class)| Position {
                issuer_id: id.clone(),
                exposure: e,
                lgd: 1.0,
                pd: *pd,
                class: *class,
            })
            .collect();
        Portfolio::new(name, PortfolioKind::LongOnly, positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn exposure_sum(&self) -> f64 {
        self.positions.iter().map(|p| p.exposure).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidInput(format!(
                "portfolio `{}` has no positions",
                self.name
            )));
        }
        for p in &self.positions {
            if !p.exposure.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "exposure of `{}` is not finite",
                    p.issuer_id
                )));
            }
            if !(0.0..=1.0).contains(&p.lgd) {
                return Err(Error::InvalidInput(format!(
                    "lgd of `{}` is outside [0, 1]",
                    p.issuer_id
                )));
            }
            if let PositionPd::Explicit(pd) = p.pd {
                if !(0.0..=1.0).contains(&pd) {
                    return Err(Error::InvalidInput(format!(
                        "pd of `{}` is outside [0, 1]",
                        p.issuer_id
                    )));
                }
            }
        }
        let sum = self.exposure_sum();
        match self.kind {
            PortfolioKind::LongOnly => {
                if let Some(p) = self.positions.iter().find(|p| p.exposure < 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "long-only portfolio `{}` has a short position in `{}`",
                        self.name, p.issuer_id
                    )));
                }
                if (sum - 1.0).abs() > SUM_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "long-only exposures of `{}` sum to {sum}, expected 1",
                        self.name
                    )));
                }
            }
            PortfolioKind::LongShort => {
                if sum.abs() > SUM_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "long-short exposures of `{}` sum to {sum}, expected 0",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Default probability of every position.
    pub fn pds(&self, table: &RatingPdTable) -> Result<Vec<f64>> {
        self.positions
            .iter()
            .map(|p| match p.pd {
                PositionPd::Rating(r) => table.pd(r, p.class),
                PositionPd::Explicit(pd) => Ok(pd),
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(["issuer_id", "exposure", "lgd", "rating_or_pd", "class"])
            .map_err(err)?;
        for p in &self.positions {
            let pd = match p.pd {
                PositionPd::Rating(r) => r.to_string(),
                PositionPd::Explicit(v) => format!("{v:?}"),
            };
            w.write_record([
                p.issuer_id.clone(),
                format!("{:?}", p.exposure),
                format!("{:?}", p.lgd),
                pd,
                p.class.as_str().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Reads `issuer_id,exposure,lgd,rating_or_pd,class`. The portfolio is
/// long-short when any exposure is negative, long-only otherwise.
pub fn load_portfolio(path: &Path) -> Result<Portfolio> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, 0, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let expected = ["issuer_id", "exposure", "lgd", "rating_or_pd", "class"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut positions = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let num = |i: usize, what: &str| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                Error::parse(path, line, format!("{what} `{}` is not a number", &rec[i]))
            })
        };
        let exposure = num(1, "exposure")?;
        let lgd = if rec[2].is_empty() {
            1.0
        } else {
            num(2, "lgd")?
        };
        let pd = match rec[3].parse::<f64>() {
            Ok(v) => PositionPd::Explicit(v),
            Err(_) => PositionPd::Rating(
                rec[3]
                    .parse()
                    .map_err(|e: Error| Error::parse(path, line, e.to_string()))?,
            ),
        };
        let class = rec[4]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        positions.push(Position {
            issuer_id: rec[0].to_string(),
            exposure,
            lgd,
            pd,
            class,
        });
    }
    let kind = if positions.iter().any(|p| p.exposure < 0.0) {
        PortfolioKind::LongShort
    } else {
        PortfolioKind::LongOnly
    };
    let name = path
        .file_stem()
        .map_or_else(|| "portfolio".into(), |s| s.to_string_lossy().into_owned());
    Portfolio::new(name, kind, positions)
}

/// The four reference compositions, by rating histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchematicPortfolio {
    /// 36 sovereigns.
    A,
    /// 89 corporates.
    B,
    /// A and B combined.
    C,
    /// 22 long financials against 22 short non-financial corporates.
    D,
}

impl SchematicPortfolio {
    pub const ALL: [SchematicPortfolio; 4] = [
        SchematicPortfolio::A,
        SchematicPortfolio::B,
        SchematicPortfolio::C,
        SchematicPortfolio::D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchematicPortfolio::A => "A",
            SchematicPortfolio::B => "B",
            SchematicPortfolio::C => "C",
            SchematicPortfolio::D => "D",
        }
    }
}

const HIST_A: [(Rating, usize); 5] = [
    (Rating::AAA, 4),
    (Rating::AA, 7),
    (Rating::A, 6),
    (Rating::BBB, 14),
    (Rating::BB, 5),
];
const HIST_B: [(Rating, usize); 3] = [(Rating::AA, 6), (Rating::A, 32), (Rating::BBB, 51)];
const HIST_D_SIDE: [(Rating, usize); 3] = [(Rating::AA, 3), (Rating::A, 15), (Rating::BBB, 4)];

fn expand(hist: &[(Rating, usize)]) -> Vec<Rating> {
    hist.iter()
        .flat_map(|&(r, n)| std::iter::repeat_n(r, n))
        .collect()
}

/// Picks `ratings.len()` issuers satisfying `accept` in universe order,
/// preferring issuers whose own rating matches the slot; remaining slots
/// take the next unused eligible issuer.
fn pick(
    issuers: &[String],
    meta: &[Option<IssuerMeta>],
    accept: impl Fn(&IssuerMeta) -> bool,
    ratings: &[Rating],
    what: &str,
) -> Result<Vec<(String, Rating)>> {
    let eligible: Vec<usize> = (0..issuers.len())
        .filter(|&i| meta[i].as_ref().is_some_and(&accept))
        .collect();
    if eligible.len() < ratings.len() {
        return Err(Error::InvalidInput(format!(
            "schematic portfolio needs {} {what} issuers, universe has {}",
            ratings.len(),
            eligible.len()
        )));
    }
    let mut used = vec![false; eligible.len()];
    let mut slots: Vec<Option<usize>> = vec![None; ratings.len()];
    for (s, r) in ratings.iter().enumerate() {
        if let Some(k) = (0..eligible.len())
            .find(|&k| !used[k] && meta[eligible[k]].as_ref().and_then(|m| m.rating) == Some(*r))
        {
            used[k] = true;
            slots[s] = Some(k);
        }
    }
    for slot in slots.iter_mut().filter(|s| s.is_none()) {
        let k = (0..eligible.len())
            .find(|&k| !used[k])
            .expect("enough eligible issuers");
        used[k] = true;
        *slot = Some(k);
    }
    Ok(slots
        .into_iter()
        .zip(ratings)
        .map(|(k, &r)| (issuers[eligible[k.expect("filled")]].clone(), r))
        .collect())
}

fn is_sovereign(m: &IssuerMeta) -> bool {
    m.sector == Label::Known(Sector::Government)
}

/// Portfolios A-D drawn from an issuer universe. Ratings follow the
/// reference histograms; LGD is 1 and exposures are equal weight.
pub fn schematic_portfolios(
    issuers: &[String],
    meta: &[Option<IssuerMeta>],
) -> Result<Vec<Portfolio>> {
    if issuers.len() != meta.len() {
        return Err(Error::IssuerMismatch(
            "issuer list and metadata differ in length".into(),
        ));
    }
    let sov = pick(issuers, meta, is_sovereign, &expand(&HIST_A), "sovereign")?;
    let corp = pick(
        issuers,
        meta,
        |m| !is_sovereign(m),
        &expand(&HIST_B),
        "corporate",
    )?;
    let fin = pick(
        issuers,
        meta,
        |m| m.sector == Label::Known(Sector::Financials),
        &expand(&HIST_D_SIDE),
        "financial",
    )?;
    let nonfin = pick(
        issuers,
        meta,
        |m| !is_sovereign(m) && m.sector != Label::Known(Sector::Financials),
        &expand(&HIST_D_SIDE),
        "non-financial corporate",
    )?;

    let with_class =
        |v: &[(String, Rating)], c: IssuerClass| -> Vec<(String, PositionPd, IssuerClass)> {
            v.iter()
                .map(|(id, r)| (id.clone(), PositionPd::Rating(*r), c))
                .collect()
        };
    let a = Portfolio::equal_weight("A", &with_class(&sov, IssuerClass::Sovereign))?;
    let b = Portfolio::equal_weight("B", &with_class(&corp, IssuerClass::Corporate))?;
    let mut both = with_class(&sov, IssuerClass::Sovereign);
    both.extend(with_class(&corp, IssuerClass::Corporate));
    let c = Portfolio::equal_weight("C", &both)?;
    let side = 1.0 / fin.len() as f64;
    let d_positions = fin
        .iter()
        .map(|f| (f, side))
        .chain(nonfin.iter().map(|f| (f, -side)))
        .map(|((id, r), e)| Position {
            issuer_id: id.clone(),
            exposure: e,
            lgd: 1.0,
            pd: PositionPd::Rating(*r),
            class: IssuerClass::Corporate,
        })
        .collect();
    let d = Portfolio::new("D", PortfolioKind::LongShort, d_positions)?;
    Ok(vec![a, b, c, d])
}
