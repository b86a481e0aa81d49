use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FactorId, FactorSet, ModelVariant};
use crate::error::{Error, Result};
use crate::spectra::CorrelationMatrix;
use crate::timeseries::ReturnPanel;

/// Tolerance on `alpha' Omega alpha = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// Fitted systematic parts with a sample SD below this are treated as absent.
const MIN_PSI: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel {
    pub variant: ModelVariant,
    pub issuers: Vec<String>,
    /// Model columns: the global factor first, then the residual group factors.
    pub factor_names: Vec<FactorId>,
    /// N x K raw regression coefficients; zero outside an issuer's regressors.
    pub alpha_hat: DMatrix<f64>,
    /// N x K loadings rescaled to unit systematic variance.
    pub alpha: DMatrix<f64>,
    /// Clipped to [0, 1].
    pub beta: Vec<f64>,
    /// Unclipped regression R².
    pub r_squared: Vec<f64>,
    pub psi: Vec<f64>,
    /// K x K sample covariance of the model columns.
    pub omega: DMatrix<f64>,
    /// Model columns each issuer was regressed on.
    pub group_assignment: Vec<Vec<usize>>,
    /// Labels of the issuer's groups joined by `/`, or `Global`.
    pub group_paths: Vec<String>,
    pub warnings: Vec<String>,
}

impl CalibratedModel {
    pub fn n_issuers(&self) -> usize {
        self.issuers.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factor_names.len()
    }

    /// Assembles a model from given loadings and checks its invariants.
    /// `psi` is set to 1 and `alpha_hat` to `alpha`.
    pub fn from_parts(
        variant: ModelVariant,
        issuers: Vec<String>,
        factor_names: Vec<FactorId>,
        alpha: DMatrix<f64>,
        beta: Vec<f64>,
        omega: DMatrix<f64>,
    ) -> Result<Self> {
        let n = issuers.len();
        let k = factor_names.len();
        if alpha.shape() != (n, k) || omega.shape() != (k, k) || beta.len() != n {
            return Err(Error::InvalidInput(format!(
                "model shapes disagree: alpha {:?}, omega {:?}, beta {}, {n} issuers, {k} factors",
                alpha.shape(),
                omega.shape(),
                beta.len()
            )));
        }
        let group_assignment = (0..n)
            .map(|i| (0..k).filter(|&c| alpha[(i, c)] != 0.0).collect())
            .collect();
        let model = CalibratedModel {
            variant,
            issuers,
            factor_names,
            alpha_hat: alpha.clone(),
            alpha,
            r_squared: beta.clone(),
            beta,
            psi: vec![1.0; n],
            omega,
            group_assignment,
            group_paths: vec!["Global".into(); n],
            warnings: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Single global factor with unit variance and a common beta.
    pub fn homogeneous(issuers: Vec<String>, beta: f64) -> Result<Self> {
        let n = issuers.len();
        CalibratedModel::from_parts(
            ModelVariant::M1Global,
            issuers,
            vec![FactorId::global()],
            DMatrix::from_element(n, 1, 1.0),
            vec![beta; n],
            DMatrix::from_element(1, 1, 1.0),
        )
    }

    /// Systematic variance `alpha_i' Omega alpha_i` of every issuer.
    pub fn systematic_variances(&self) -> Vec<f64> {
        (0..self.n_issuers())
            .map(|i| {
                let a = self.alpha.row(i).transpose();
                (a.transpose() * &self.omega * &a)[(0, 0)]
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_factors();
        for r in 0..k {
            for c in 0..r {
                let (a, b) = (self.omega[(r, c)], self.omega[(c, r)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::Numerical(
                        "factor covariance is not symmetric".into(),
                    ));
                }
            }
        }
        let eig = self.omega.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
            return Err(Error::Numerical(
                "factor covariance is not positive semidefinite".into(),
            ));
        }
        for (i, &b) in self.beta.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidInput(format!(
                    "beta of `{}` is {b}, outside [0, 1]",
                    self.issuers[i]
                )));
            }
        }
        for (i, v) in self.systematic_variances().into_iter().enumerate() {
            if (v - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::Numerical(format!(
                    "loading normalisation of `{}` is {v}, expected 1",
                    self.issuers[i]
                )));
            }
        }
        Ok(())
    }

    pub fn issuer_index(&self, issuer: &str) -> Option<usize> {
        self.issuers.iter().position(|s| s == issuer)
    }
}

fn sample_covariance(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let k = cols.len();
    let t = cols.first().map_or(0, Vec::len);
    let means: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().sum::<f64>() / t as f64)
        .collect();
    let denom = (t - 1) as f64;
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(x, y)| (x - means[a]) * (y - means[b]))
                .sum::<f64>()
                / denom;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

fn sample_sd(x: &[f64]) -> f64 {
    let t = x.len() as f64;
    let m = x.iter().sum::<f64>() / t;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (t - 1.0)).sqrt()
}

struct IssuerFit {
    alpha_hat: Vec<f64>,
    alpha: Vec<f64>,
    beta: f64,
    r_squared: f64,
    psi: f64,
    warnings: Vec<String>,
}

fn fit_issuer(
    x: &[f64],
    cols: &[usize],
    model_series: &[Vec<f64>],
    omega: &DMatrix<f64>,
    issuer: &str,
) -> Result<IssuerFit> {
    let t = x.len();
    let p = cols.len();
    let f = DMatrix::from_fn(t, p, |r, c| model_series[cols[c]][r]);
    let y = DVector::from_column_slice(x);
    let mut warnings = Vec::new();

    let svd = f.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    if svd.singular_values.iter().any(|&s| s <= tol) {
        let msg = format!("issuer `{issuer}`: rank-deficient regressors, using the pseudo-inverse");
        warn!("{msg}");
        warnings.push(msg);
    }
    let coef = svd
        .solve(&y, tol)
        .map_err(|e| Error::Numerical(format!("{issuer}: {e}")))?;
    let fitted = &f * &coef;
    let ssr: f64 = (&y - &fitted).iter().map(|e| e * e).sum();
    let y_mean = x.iter().sum::<f64>() / t as f64;
    let sst: f64 = x.iter().map(|v| (v - y_mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::ZeroVariance {
            issuer: issuer.to_string(),
        });
    }
    let r_squared = 1.0 - ssr / sst;
    let mut beta = r_squared;
    if beta > 1.0 {
        if beta > 1.0 + 1e-12 {
            let msg = format!("issuer `{issuer}`: R² {beta} clipped to 1");
            warn!("{msg}");
            warnings.push(msg);
        }
        beta = 1.0;
    }
    if beta < 0.0 {
        // no intercept: a non-centred series can fit worse than its mean
        let msg = format!("issuer `{issuer}`: R² {beta} clipped to 0");
        warn!("{msg}");
        warnings.push(msg);
        beta = 0.0;
    }

    let k = omega.nrows();
    let mut alpha_hat = vec![0.0; k];
    for (c, &col) in cols.iter().enumerate() {
        alpha_hat[col] = coef[c];
    }
    let fitted: Vec<f64> = fitted.iter().copied().collect();
    let psi = sample_sd(&fitted);
    let alpha = if psi > MIN_PSI {
        alpha_hat.iter().map(|a| a / psi).collect()
    } else {
        let msg = format!(
            "issuer `{issuer}`: no systematic component, loading placed on the global factor"
        );
        warn!("{msg}");
        warnings.push(msg);
        beta = 0.0;
        let mut a = vec![0.0; k];
        a[0] = 1.0 / omega[(0, 0)].sqrt();
        a
    };
    Ok(IssuerFit {
        alpha_hat,
        alpha,
        beta,
        r_squared,
        psi,
        warnings,
    })
}

/// Regresses every issuer on the global factor and the residual factors of
/// its own groups under `variant`.
pub fn calibrate(
    panel: &ReturnPanel,
    factors: &FactorSet,
    variant: ModelVariant,
) -> Result<CalibratedModel> {
    if !factors.orthogonalized {
        return Err(Error::InvalidInput(
            "factors must be orthogonalised before calibration".into(),
        ));
    }
    let n = panel.n_series();
    let t = panel.n_obs();
    if factors.members[0].len() != n || factors.series.nrows() != t {
        return Err(Error::IssuerMismatch(format!(
            "factor set built on {} issuers x {} dates, panel is {n} x {t}",
            factors.members[0].len(),
            factors.series.nrows()
        )));
    }
    let kinds = variant.group_kinds();
    for &kind in kinds {
        if !factors.has_kind(kind) {
            return Err(Error::Config(format!(
                "variant {variant} needs {} factors but none are available",
                kind.as_str()
            )));
        }
    }

    let model_cols: Vec<usize> = std::iter::once(0)
        .chain((1..factors.n_factors()).filter(|&k| kinds.contains(&factors.names[k].kind)))
        .collect();
    let factor_names: Vec<FactorId> = model_cols
        .iter()
        .map(|&k| factors.names[k].clone())
        .collect();
    let model_series: Vec<Vec<f64>> = model_cols
        .iter()
        .map(|&k| factors.residual_series.column(k).iter().copied().collect())
        .collect();
    let omega = sample_covariance(&model_series);

    let mut warnings = Vec::new();
    let mut assignment = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let mut cols = vec![0];
        let mut labels = Vec::new();
        for &kind in kinds {
            let Some(label) = factors.groups.label(kind, i) else {
                return Err(Error::InvalidInput(format!(
                    "issuer `{}` has no {} assignment required by {variant}",
                    panel.issuers[i],
                    kind.as_str()
                )));
            };
            labels.push(label.to_string());
            match factor_names
                .iter()
                .position(|f| f.kind == kind && f.label == label)
            {
                Some(c) => cols.push(c),
                None => {
                    let msg = format!(
                        "issuer `{}`: {} factor `{label}` unavailable, regressor omitted",
                        panel.issuers[i],
                        kind.as_str()
                    );
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        labels.dedup();
        paths.push(if labels.is_empty() {
            "Global".to_string()
        } else {
            labels.join("/")
        });
        assignment.push(cols);
    }

    let fits: Vec<Result<IssuerFit>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = panel.returns.column(i).iter().copied().collect();
            fit_issuer(&x, &assignment[i], &model_series, &omega, &panel.issuers[i])
        })
        .collect();

    let k = factor_names.len();
    let mut model = CalibratedModel {
        variant,
        issuers: panel.issuers.clone(),
        factor_names,
        alpha_hat: DMatrix::zeros(n, k),
        alpha: DMatrix::zeros(n, k),
        beta: Vec::with_capacity(n),
        r_squared: Vec::with_capacity(n),
        psi: Vec::with_capacity(n),
        omega,
        group_assignment: assignment,
        group_paths: paths,
        warnings,
    };
    for (i, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        for c in 0..k {
            model.alpha_hat[(i, c)] = fit.alpha_hat[c];
            model.alpha[(i, c)] = fit.alpha[c];
        }
        model.beta.push(fit.beta);
        model.r_squared.push(fit.r_squared);
        model.psi.push(fit.psi);
        model.warnings.extend(fit.warnings);
    }
    model.validate()?;
    Ok(model)
}

/// `rho_ij = sqrt(beta_i beta_j) alpha_i' Omega alpha_j` off the diagonal, 1 on it.
pub fn model_implied_correlations(model: &CalibratedModel) -> DMatrix<f64> {
    let s = &model.alpha * &model.omega * model.alpha.transpose();
    let n = model.n_issuers();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (model.beta[i] * model.beta[j]).sqrt() * s[(i, j)]
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistogramBin> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v - lo) / width).floor();
        let b = if b < 0.0 {
            0
        } else {
            (b as usize).min(bins - 1)
        };
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count,
        })
        .collect()
}

fn mean_sd(x: &[f64]) -> (Option<f64>, Option<f64>) {
    if x.is_empty() {
        return (None, None);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    (Some(m), Some(sd))
}

/// Off-diagonal `model - empirical` correlation differences, upper triangle
/// in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationErrorReport {
    pub variant: ModelVariant,
    pub n_pairs: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub tail_threshold: f64,
    /// Fraction of pairs with `|difference| > tail_threshold`.
    pub tail_mass: Option<f64>,
    /// Bins of width 0.05 on [-2, 2].
    pub histogram: Vec<HistogramBin>,
    pub empirical_mean: Option<f64>,
    pub empirical_sd: Option<f64>,
    /// Bins of width 0.05 on [-1, 1].
    pub empirical_histogram: Vec<HistogramBin>,
    #[serde(skip)]
    pub differences: Vec<f64>,
}

pub fn correlation_error_report(
    model: &CalibratedModel,
    empirical: &CorrelationMatrix,
    empirical_issuers: &[String],
    tail_threshold: f64,
) -> Result<CorrelationErrorReport> {
    if empirical_issuers != model.issuers.as_slice() || empirical.n_series() != model.n_issuers() {
        return Err(Error::IssuerMismatch(
            "empirical correlations and model cover different issuers".into(),
        ));
    }
    let implied = model_implied_correlations(model);
    let n = model.n_issuers();
    let mut differences = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut observed = Vec::with_capacity(differences.capacity());
    for i in 0..n {
        for j in i + 1..n {
            differences.push(implied[(i, j)] - empirical.entries[(i, j)]);
            observed.push(empirical.entries[(i, j)]);
        }
    }
    let (mean, sd) = mean_sd(&differences);
    let (empirical_mean, empirical_sd) = mean_sd(&observed);
    let tail_mass = (!differences.is_empty()).then(|| {
        differences
            .iter()
            .filter(|d| d.abs() > tail_threshold)
            .count() as f64
            / differences.len() as f64
    });
    Ok(CorrelationErrorReport {
        variant: model.variant,
        n_pairs: differences.len(),
        mean,
        sd,
        tail_threshold,
        tail_mass,
        histogram: histogram(&differences, -2.0, 2.0, 80),
        empirical_mean,
        empirical_sd,
        empirical_histogram: histogram(&observed, -1.0, 1.0, 40),
        differences,
    })
}

/// Cross-sectional summary of individual regression R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RSquaredSummary {
    pub average: f64,
    pub median: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn r_squared_summary(model: &CalibratedModel) -> Option<RSquaredSummary> {
    let mut r = model.r_squared.clone();
    if r.is_empty() {
        return None;
    }
    r.sort_by(f64::total_cmp);
    let n = r.len();
    let median = if n % 2 == 1 {
        r[n / 2]
    } else {
        0.5 * (r[n / 2 - 1] + r[n / 2])
    };
    let (mean, sd) = mean_sd(&r);
    Some(RSquaredSummary {
        average: mean.unwrap_or(f64::NAN),
        median,
        sd: sd.unwrap_or(f64::NAN),
        min: r[0],
        max: r[n - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_model::{build_factors, orthogonalize, FactorKind, GroupAssignments};
    use crate::spectra::correlation;
    use crate::synth::{planted_returns, synthetic_meta, PlantedSpec};
    use crate::timeseries::standardize;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn planted(sizes: Vec<usize>, t: usize, seed: u64) -> (ReturnPanel, Vec<usize>) {
        let spec = PlantedSpec {
            group_sizes: sizes,
            n_obs: t,
            market_loading: 0.5,
            group_loading: 0.5,
            group_correlation: 0.0,
            seed,
        };
        let (raw, truth) = planted_returns(&spec).unwrap();
        let n = raw.n_series();
        let raw = raw.with_meta(synthetic_meta(n, 0)).unwrap();
        (standardize(&raw).unwrap(), truth)
    }

    fn grouped(panel: &ReturnPanel, truth: &[usize]) -> FactorSet {
        let labels: Vec<String> = truth.iter().map(|g| format!("C{g}")).collect();
        let sub: Vec<String> = truth
            .iter()
            .enumerate()
            .map(|(i, g)| format!("C{g}.{}", i % 2))
            .collect();
        let groups = GroupAssignments::from_panel(panel).with_communities(labels, sub);
        orthogonalize(&build_factors(panel, &groups).unwrap()).unwrap()
    }

    #[test]
    fn issuer_equal_to_global_has_beta_one() {
        let (panel, truth) = planted(vec![5, 5], 120, 1);
        let fs = grouped(&panel, &truth);
        let mut p2 = panel.clone();
        p2.returns.set_column(0, &fs.series.column(0));
        let fs2 = FactorSet { ..fs.clone() };
        let model = calibrate(&p2, &fs2, ModelVariant::M1Global).unwrap();
        assert_abs_diff_eq!(model.beta[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            model.alpha[(0, 0)] * model.omega[(0, 0)].sqrt(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn orthogonal_noise_has_small_beta() {
        let (panel, truth) = planted(vec![10, 10], 120, 2);
        let fs = grouped(&panel, &truth);
        // a series orthogonal to the global factor by construction
        let g: Vec<f64> = fs.series.column(0).iter().copied().collect();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let noise: Vec<f64> = (0..120).map(|t| ((t * 7919) % 113) as f64 - 56.0).collect();
        let proj: f64 = noise.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / gg;
        let mut x: Vec<f64> = noise.iter().zip(&g).map(|(a, b)| a - proj * b).collect();
        let m = x.iter().sum::<f64>() / 120.0;
        x.iter_mut().for_each(|v| *v -= m);
        let mut p2 = panel.clone();
        p2.returns.set_column(0, &DVector::from_vec(x));
        let model = calibrate(&p2, &fs, ModelVariant::M1Global).unwrap();
        assert!(model.beta[0] <= 0.05, "{}", model.beta[0]);
    }

    #[test]
    fn all_variants_satisfy_invariants() {
        let (panel, truth) = planted(vec![8, 8, 8], 120, 3);
        let fs = grouped(&panel, &truth);
        for v in ModelVariant::ALL {
            let m = calibrate(&panel, &fs, v).unwrap();
            for s in m.systematic_variances() {
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-8);
            }
            for i in 0..m.n_issuers() {
                // beta against an independent residual-sum-of-squares recomputation
                let cols = &m.group_assignment[i];
                let x = panel.returns.column(i);
                let mut ssr = 0.0;
                for t in 0..120 {
                    let fit: f64 = cols
                        .iter()
                        .map(|&c| {
                            let k = fs
                                .names
                                .iter()
                                .position(|f| *f == m.factor_names[c])
                                .unwrap();
                            m.alpha_hat[(i, c)] * fs.residual_series[(t, k)]
                        })
                        .sum();
                    ssr += (x[t] - fit).powi(2);
                }
                let sst: f64 = x.iter().map(|v| v * v).sum();
                assert_abs_diff_eq!(m.beta[i], 1.0 - ssr / sst, epsilon = 1e-10);
                assert!((0.0..=1.0).contains(&m.beta[i]));
                assert!(!cols.is_empty() && cols.len() <= 1 + v.group_kinds().len());
                if cols.len() < 1 + v.group_kinds().len() {
                    assert!(m.warnings.iter().any(|w| w.contains(&m.issuers[i])));
                }
            }
            let rho = model_implied_correlations(&m);
            for i in 0..m.n_issuers() {
                assert_eq!(rho[(i, i)], 1.0);
                for j in 0..m.n_issuers() {
                    assert_abs_diff_eq!(rho[(i, j)], rho[(j, i)], epsilon = 1e-12);
                    assert!(rho[(i, j)].abs() <= 1.0 + 1e-8);
                }
            }
        }
    }

    #[test]
    fn m1_correlation_by_hand() {
        let (panel, truth) = planted(vec![3], 60, 4);
        let fs = grouped(&panel, &truth);
        let m = calibrate(&panel, &fs, ModelVariant::M1Global).unwrap();
        let rho = model_implied_correlations(&m);
        let var_g = m.omega[(0, 0)];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let hand =
                        (m.beta[i] * m.beta[j]).sqrt() * m.alpha[(i, 0)] * m.alpha[(j, 0)] * var_g;
                    assert_abs_diff_eq!(rho[(i, j)], hand, epsilon = 1e-14);
                    // a positive global loading normalised to unit variance gives 1
                    assert_abs_diff_eq!(m.alpha[(i, 0)] * var_g.sqrt(), 1.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn m2_disjoint_groups_cross_term() {
        let alpha: DMatrix<f64> = DMatrix::from_row_slice(2, 3, &[0.8, 0.5, 0.0, 0.6, 0.0, 0.7]);
        let omega: DMatrix<f64> =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.44, 0.0, 0.0, 0.0, 1.0 - 0.36]);
        // scale rows so alpha' Omega alpha = 1
        let mut a = alpha.clone();
        for i in 0..2 {
            let r = a.row(i).transpose();
            let s: f64 = (r.transpose() * &omega * &r)[(0, 0)];
            let s = s.sqrt();
            a.row_mut(i).apply(|x| *x /= s);
        }
        let names = vec![
            FactorId::global(),
            FactorId {
                kind: FactorKind::Industry,
                label: "X".into(),
            },
            FactorId {
                kind: FactorKind::Industry,
                label: "Y".into(),
            },
        ];
        let m = CalibratedModel::from_parts(
            ModelVariant::M2GlobalIndustry,
            vec!["a".into(), "b".into()],
            names,
            a.clone(),
            vec![0.5, 0.3],
            omega,
        )
        .unwrap();
        let rho = model_implied_correlations(&m);
        assert_abs_diff_eq!(
            rho[(0, 1)],
            (0.15f64).sqrt() * a[(0, 0)] * a[(1, 0)],
            epsilon = 1e-14
        );
    }

    #[test]
    fn from_parts_rejects_bad_models() {
        let names = vec![FactorId::global()];
        let bad_norm = CalibratedModel::from_parts(
            ModelVariant::M1Global,
            vec!["a".into()],
            names.clone(),
            DMatrix::from_element(1, 1, 2.0),
            vec![0.5],
            DMatrix::from_element(1, 1, 1.0),
        );
        assert!(matches!(bad_norm, Err(Error::Numerical(_))));
        let bad_beta = CalibratedModel::from_parts(
            ModelVariant::M1Global,
            vec!["a".into()],
            names,
            DMatrix::from_element(1, 1, 1.0),
            vec![1.5],
            DMatrix::from_element(1, 1, 1.0),
        );
        assert!(matches!(bad_beta, Err(Error::InvalidInput(_))));
        assert!(CalibratedModel::homogeneous(vec!["a".into(), "b".into()], 0.3).is_ok());
    }

    #[test]
    fn missing_kind_is_a_config_error() {
        let (panel, _) = planted(vec![6, 6], 60, 5);
        let groups = GroupAssignments::from_panel(&panel);
        let fs = orthogonalize(&build_factors(&panel, &groups).unwrap()).unwrap();
        assert!(matches!(
            calibrate(&panel, &fs, ModelVariant::M6GlobalSubcommunity),
            Err(Error::Config(_))
        ));
        assert!(calibrate(&panel, &fs, ModelVariant::M4GlobalRegionIndustry).is_ok());
        let unorth = build_factors(&panel, &groups).unwrap();
        assert!(calibrate(&panel, &unorth, ModelVariant::M1Global).is_err());
    }

    /// Returns generated by a global-plus-community model, with the
    /// generating factor paths used directly as the factor set.
    fn model_generated(
        t: usize,
        groups: usize,
        size: usize,
        seed: u64,
    ) -> (ReturnPanel, FactorSet) {
        use crate::rng::StreamKey;
        use rand_distr::{Distribution, StandardNormal};
        let n = groups * size;
        let key = StreamKey::new(seed, "model-generated");
        let mut rng = key.stream(0);
        let mut draw = |rows: usize, cols: usize| {
            DMatrix::from_fn(rows, cols, |_, _| -> f64 {
                StandardNormal.sample(&mut rng)
            })
        };
        let f = draw(t, 1 + groups);
        let eps = draw(t, n);
        let beta: f64 = 0.5;
        let (a_g, a_s) = (0.6f64, 0.8f64);
        let x = DMatrix::from_fn(t, n, |r, i| {
            let sys = a_g * f[(r, 0)] + a_s * f[(r, 1 + i / size)];
            beta.sqrt() * sys + (1.0 - beta).sqrt() * eps[(r, i)]
        });
        let ids = (0..n).map(|i| format!("I{i}")).collect();
        let panel = standardize(&ReturnPanel::from_matrix(ids, x).unwrap()).unwrap();
        let mut series = f.clone();
        for c in 0..series.ncols() {
            let m = series.column(c).mean();
            series.column_mut(c).add_scalar_mut(-m);
        }
        let labels: Vec<String> = (0..n).map(|i| format!("C{}", i / size)).collect();
        let mut names = vec![FactorId::global()];
        let mut members = vec![(0..n).collect::<Vec<_>>()];
        for g in 0..groups {
            names.push(FactorId {
                kind: FactorKind::Community,
                label: format!("C{g}"),
            });
            members.push((g * size..(g + 1) * size).collect());
        }
        let fs = FactorSet {
            names,
            residual_series: series.clone(),
            series,
            gammas: vec![1.0; 1 + groups],
            diagnostics: vec![None; 1 + groups],
            members,
            orthogonalized: false,
            groups: GroupAssignments {
                industry: vec![None; n],
                region: vec![None; n],
                community: labels.iter().cloned().map(Some).collect(),
                subcommunity: labels.into_iter().map(Some).collect(),
            },
            warnings: vec![],
        };
        (panel, orthogonalize(&fs).unwrap())
    }

    #[test]
    fn self_consistent_error_report() {
        let (panel, fs) = model_generated(120, 4, 10, 6);
        let m = calibrate(&panel, &fs, ModelVariant::M5GlobalCommunity).unwrap();
        let emp = correlation(&panel).unwrap();
        let rep = correlation_error_report(&m, &emp, &panel.issuers, 0.2).unwrap();
        assert_eq!(rep.n_pairs, 40 * 39 / 2);
        assert!(rep.mean.unwrap().abs() <= 0.01, "{:?}", rep.mean);
        assert_eq!(
            rep.histogram.iter().map(|b| b.count).sum::<usize>(),
            rep.n_pairs
        );
        assert_eq!(rep.empirical_histogram.len(), 40);
        let wrong: Vec<String> = panel.issuers.iter().rev().cloned().collect();
        assert!(matches!(
            correlation_error_report(&m, &emp, &wrong, 0.2),
            Err(Error::IssuerMismatch(_))
        ));
    }

    #[test]
    fn single_issuer_report_is_empty() {
        let m = CalibratedModel::homogeneous(vec!["a".into()], 0.4).unwrap();
        let emp = CorrelationMatrix::new(DMatrix::from_element(1, 1, 1.0), 10).unwrap();
        let rep = correlation_error_report(&m, &emp, &["a".to_string()], 0.2).unwrap();
        assert_eq!(rep.n_pairs, 0);
        assert!(rep.mean.is_none() && rep.tail_mass.is_none());
    }

    #[test]
    fn summary_statistics() {
        let mut m =
            CalibratedModel::homogeneous(vec!["a".into(), "b".into(), "c".into()], 0.2).unwrap();
        m.r_squared = vec![0.2, 0.6, 0.4];
        let s = r_squared_summary(&m).unwrap();
        assert_abs_diff_eq!(s.average, 0.4, epsilon = 1e-15);
        assert_eq!(s.median, 0.4);
        assert_eq!((s.min, s.max), (0.2, 0.6));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn normalisation_holds_for_random_panels(seed in 0u64..10_000, g in 2usize..5) {
            let (panel, truth) = planted(vec![6; g], 48, seed);
            let fs = grouped(&panel, &truth);
            for v in [ModelVariant::M1Global, ModelVariant::M4GlobalRegionIndustry, ModelVariant::M6GlobalSubcommunity] {
                let m = calibrate(&panel, &fs, v).unwrap();
                for s in m.systematic_variances() {
                    prop_assert!((s - 1.0).abs() <= 1e-8);
                }
            }
        }
    }
}
