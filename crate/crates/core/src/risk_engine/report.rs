use serde::{Deserialize, Serialize};

use super::{simulate_with, var, Portfolio, PortfolioKind, SimulationOptions};
use crate::error::{Error, Result};
use crate::factor_model::{CalibratedModel, ModelVariant};
use crate::normal;
use crate::rng::derive_seed;

/// `Φ⁻¹(0.999) / Φ⁻¹(0.99)`.
pub const NORMAL_TAIL_REFERENCE: f64 = 1.328_362_082_322_672;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub variant: ModelVariant,
    /// One VaR per entry of the report's `alphas`.
    pub var: Vec<f64>,
    pub expected_loss: f64,
    /// `VaR(max alpha) / VaR(min alpha)`; absent when the lower VaR is not positive.
    pub tail_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub portfolio: String,
    pub kind: PortfolioKind,
    pub n_positions: usize,
    pub exposure_sum: f64,
    pub alphas: Vec<f64>,
    pub n_paths: usize,
    /// Seed shared by every model row.
    pub path_seed: u64,
    pub normal_reference: f64,
    pub rows: Vec<QuantileRow>,
}

/// Simulates `portfolio` under every model with common random numbers and
/// tabulates VaR per alpha.
pub fn quantile_report(
    portfolio: &Portfolio,
    models: &[CalibratedModel],
    alphas: &[f64],
    n_paths: usize,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<QuantileReport> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("no quantile levels requested".into()));
    }
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    let path_seed = derive_seed(seed, &format!("portfolio/{}", portfolio.name), 0);
    let lo = alphas[0];
    let hi = alphas[alphas.len() - 1];
    let normal_reference = if lo > 0.5 {
        normal::inverse_cdf(hi)? / normal::inverse_cdf(lo)?
    } else {
        f64::NAN
    };
    let mut rows = Vec::with_capacity(models.len());
    for model in models {
        let dist = simulate_with(portfolio, model, n_paths, path_seed, opts)?;
        let v = alphas
            .iter()
            .map(|&a| var(&dist, a))
            .collect::<Result<Vec<_>>>()?;
        let (first, last) = (v[0], v[v.len() - 1]);
        rows.push(QuantileRow {
            variant: model.variant,
            expected_loss: dist.mean(),
            tail_ratio: (first > 0.0).then(|| last / first),
            var: v,
        });
    }
    Ok(QuantileReport {
        portfolio: portfolio.name.clone(),
        kind: portfolio.kind,
        n_positions: portfolio.len(),
        exposure_sum: portfolio.exposure_sum(),
        alphas,
        n_paths,
        path_seed,
        normal_reference,
        rows,
    })
}

impl QuantileReport {
    /// One row per model: portfolio, model, VaR per alpha, tail ratio, normal reference.
    pub fn write_csv<W: std::io::Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Serde(e.to_string());
        if header {
            let mut h = vec!["portfolio".to_string(), "model".to_string()];
            h.extend(self.alphas.iter().map(|a| format!("var_{a}")));
            h.extend(["expected_loss", "tail_ratio", "normal_ratio"].map(String::from));
            w.write_record(&h).map_err(err)?;
        }
        for row in &self.rows {
            let mut r = vec![self.portfolio.clone(), row.variant.to_string()];
            r.extend(row.var.iter().map(|v| format!("{v:?}")));
            r.push(format!("{:?}", row.expected_loss));
            r.push(
                row.tail_ratio
                    .map_or_else(String::new, |t| format!("{t:?}")),
            );
            r.push(format!("{:?}", self.normal_reference));
            w.write_record(&r).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_engine::{IssuerClass, PositionPd};

    #[test]
    fn normal_reference_value() {
        let r = normal::inverse_cdf(0.999).unwrap() / normal::inverse_cdf(0.99).unwrap();
        assert!((r - NORMAL_TAIL_REFERENCE).abs() < 1e-12);
        assert!((r - 1.33).abs() < 0.005);
    }

    #[test]
    fn identical_models_give_identical_rows() {
        let ids: Vec<_> = (0..20)
            .map(|i| {
                (
                    format!("I{i}"),
                    PositionPd::Explicit(0.05),
                    IssuerClass::Corporate,
                )
            })
            .collect();
        let p = Portfolio::equal_weight("flat", &ids).unwrap();
        let names: Vec<String> = (0..20).map(|i| format!("I{i}")).collect();
        let m = CalibratedModel::homogeneous(names, 0.0).unwrap();
        let rep = quantile_report(
            &p,
            &[m.clone(), m],
            &[0.999, 0.99, 0.995],
            20_000,
            1,
            &SimulationOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.alphas, vec![0.99, 0.995, 0.999]);
        assert_eq!(rep.rows[0], rep.rows[1]);
        assert!((rep.normal_reference - NORMAL_TAIL_REFERENCE).abs() < 1e-12);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("portfolio,model,var_0.99,var_0.995,var_0.999,"));
    }
}
