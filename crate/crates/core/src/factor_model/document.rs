use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::calibration::{r_squared_summary, RSquaredSummary};
use super::{CalibratedModel, FactorId, ModelVariant};
use crate::error::{Error, Result};

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuerCalibration {
    pub issuer: String,
    pub group_path: String,
    /// Display names of the factors the issuer loads on.
    pub factors: Vec<String>,
    pub alpha_hat: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub psi: f64,
    pub r_squared: f64,
}

/// Serialisable form of a [`CalibratedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDocument {
    pub schema_version: u32,
    pub variant: ModelVariant,
    pub factors: Vec<FactorId>,
    /// Row-major factor covariance.
    pub omega: Vec<Vec<f64>>,
    pub r_squared_summary: Option<RSquaredSummary>,
    pub issuers: Vec<IssuerCalibration>,
    pub warnings: Vec<String>,
}

impl CalibrationDocument {
    pub fn from_model(model: &CalibratedModel) -> Self {
        let k = model.n_factors();
        let issuers = (0..model.n_issuers())
            .map(|i| {
                let cols = &model.group_assignment[i];
                IssuerCalibration {
                    issuer: model.issuers[i].clone(),
                    group_path: model.group_paths[i].clone(),
                    factors: cols
                        .iter()
                        .map(|&c| model.factor_names[c].to_string())
                        .collect(),
                    alpha_hat: cols.iter().map(|&c| model.alpha_hat[(i, c)]).collect(),
                    alpha: cols.iter().map(|&c| model.alpha[(i, c)]).collect(),
                    beta: model.beta[i],
                    psi: model.psi[i],
                    r_squared: model.r_squared[i],
                }
            })
            .collect();
        CalibrationDocument {
            schema_version: CALIBRATION_SCHEMA_VERSION,
            variant: model.variant,
            factors: model.factor_names.clone(),
            omega: (0..k)
                .map(|r| (0..k).map(|c| model.omega[(r, c)]).collect())
                .collect(),
            r_squared_summary: r_squared_summary(model),
            issuers,
            warnings: model.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CalibrationDocument = serde_json::from_str(text)?;
        if doc.schema_version != CALIBRATION_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "calibration schema version {} is not supported (expected {CALIBRATION_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    /// Rebuilds the model and re-checks its invariants.
    pub fn to_model(&self) -> Result<CalibratedModel> {
        let k = self.factors.len();
        let n = self.issuers.len();
        if self.omega.len() != k || self.omega.iter().any(|r| r.len() != k) {
            return Err(Error::Serde("omega does not match the factor list".into()));
        }
        let omega = DMatrix::from_fn(k, k, |r, c| self.omega[r][c]);
        let names: Vec<String> = self.factors.iter().map(ToString::to_string).collect();
        let mut alpha = DMatrix::zeros(n, k);
        let mut alpha_hat = DMatrix::zeros(n, k);
        let mut assignment = Vec::with_capacity(n);
        for (i, entry) in self.issuers.iter().enumerate() {
            if entry.factors.len() != entry.alpha.len()
                || entry.factors.len() != entry.alpha_hat.len()
            {
                return Err(Error::Serde(format!(
                    "loadings of `{}` are inconsistent",
                    entry.issuer
                )));
            }
            let mut cols = Vec::with_capacity(entry.factors.len());
            for (f, name) in entry.factors.iter().enumerate() {
                let c = names.iter().position(|x| x == name).ok_or_else(|| {
                    Error::Serde(format!("unknown factor `{name}` for `{}`", entry.issuer))
                })?;
                alpha[(i, c)] = entry.alpha[f];
                alpha_hat[(i, c)] = entry.alpha_hat[f];
                cols.push(c);
            }
            assignment.push(cols);
        }
        let model = CalibratedModel {
            variant: self.variant,
            issuers: self.issuers.iter().map(|e| e.issuer.clone()).collect(),
            factor_names: self.factors.clone(),
            alpha_hat,
            alpha,
            beta: self.issuers.iter().map(|e| e.beta).collect(),
            r_squared: self.issuers.iter().map(|e| e.r_squared).collect(),
            psi: self.issuers.iter().map(|e| e.psi).collect(),
            omega,
            group_assignment: assignment,
            group_paths: self.issuers.iter().map(|e| e.group_path.clone()).collect(),
            warnings: self.warnings.clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let model = CalibratedModel::homogeneous(vec!["a".into(), "b".into()], 0.3).unwrap();
        let doc = CalibrationDocument::from_model(&model);
        let text = doc.to_json().unwrap();
        let back = CalibrationDocument::from_json(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_model().unwrap(), model);
        assert!(text.contains("\"M1_global\""));
    }

    #[test]
    fn rejects_other_schema_versions() {
        let model = CalibratedModel::homogeneous(vec!["a".into()], 0.3).unwrap();
        let mut doc = CalibrationDocument::from_model(&model);
        doc.schema_version = 99;
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(
            CalibrationDocument::from_json(&text),
            Err(Error::Serde(_))
        ));
    }

    #[test]
    fn rejects_unknown_factor() {
        let model = CalibratedModel::homogeneous(vec!["a".into()], 0.3).unwrap();
        let mut doc = CalibrationDocument::from_model(&model);
        doc.issuers[0].factors[0] = "industry:Nope".into();
        assert!(doc.to_model().is_err());
    }
}
