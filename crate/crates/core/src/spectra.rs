//! Correlation matrices, Marchenko-Pastur bounds and the split of a
//! correlation spectrum into random, group and market components.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::timeseries::{column_moments, ReturnPanel};

/// Pearson correlation matrix with the sample size it was estimated from.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub entries: DMatrix<f64>,
    pub n_obs: usize,
}

impl CorrelationMatrix {
    /// Wraps a matrix after checking symmetry, unit diagonal and range.
    pub fn new(entries: DMatrix<f64>, n_obs: usize) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::InvalidInput(
                "correlation matrix must be square".into(),
            ));
        }
        for i in 0..n {
            if (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if (a - b).abs() > 1e-12 || !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&a) {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i},{j}) = {a} invalid"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix { entries, n_obs })
    }

    pub fn n_series(&self) -> usize {
        self.entries.nrows()
    }

    /// ‖C‖ = Σ_ij C_ij, the variance of the equally weighted sum of the
    /// standardised series.
    pub fn total_weight(&self) -> f64 {
        self.entries.sum()
    }
}

/// Pearson correlations of the panel columns. Standardisation of the input
/// is not required.
pub fn correlation(panel: &ReturnPanel) -> Result<CorrelationMatrix> {
    let t = panel.n_obs();
    let n = panel.n_series();
    if t < 2 {
        return Err(Error::EmptyPanel(
            "correlation needs at least 2 observations".into(),
        ));
    }
    let mut z = panel.returns.clone();
    for j in 0..n {
        let (mean, sd) = column_moments(&panel.returns, j);
        if !(sd > 1e-300) || !sd.is_finite() {
            return Err(Error::ZeroVariance {
                issuer: panel.issuers[j].clone(),
            });
        }
        z.column_mut(j).apply(|x| *x = (*x - mean) / sd);
    }
    let mut c = z.tr_mul(&z) / t as f64;
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix {
        entries: c,
        n_obs: t,
    })
}

/// Edges of the Marchenko-Pastur bulk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpBounds {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl MpBounds {
    pub fn contains(&self, lambda: f64) -> bool {
        self.lambda_minus <= lambda && lambda <= self.lambda_plus
    }

    /// Marchenko-Pastur density at `lambda` for aspect ratio `q = N/T`.
    pub fn density(&self, q: f64, lambda: f64) -> f64 {
        if !self.contains(lambda) || lambda <= 0.0 {
            return 0.0;
        }
        ((self.lambda_plus - lambda) * (lambda - self.lambda_minus)).sqrt()
            / (2.0 * std::f64::consts::PI * q * lambda)
    }
}

/// λ± = (1 ± √(N/T))².
pub fn mp_bounds(n_series: usize, n_obs: usize) -> Result<MpBounds> {
    if n_series == 0 || n_obs == 0 {
        return Err(Error::InvalidInput(format!(
            "bounds need positive N and T (got N={n_series}, T={n_obs})"
        )));
    }
    if n_obs <= n_series {
        log::warn!(
            "T={n_obs} does not exceed N={n_series}; bulk bounds are outside their usual regime"
        );
    }
    let r = (n_series as f64 / n_obs as f64).sqrt();
    Ok(MpBounds {
        lambda_minus: (1.0 - r).powi(2),
        lambda_plus: (1.0 + r).powi(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    Random,
    Group,
    Market,
    BelowBulk,
}

/// Spectral components of a correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    /// Bulk modes, λ₋ ≤ λ ≤ λ₊.
    Random,
    /// Everything that is neither bulk nor market, including modes below λ₋.
    Group,
    Market,
}

/// Eigenpairs in descending eigenvalue order with their classification.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column k is the unit eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub bounds: MpBounds,
    pub market_index: Option<usize>,
    pub tags: Vec<ModeTag>,
    /// Fraction of market-eigenvector entries sharing the majority sign.
    pub market_sign_coherence: Option<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn count(&self, tag: ModeTag) -> usize {
        self.tags.iter().filter(|t| **t == tag).count()
    }

    /// Σ λ|v⟩⟨v| over the modes selected by `keep`.
    pub fn spectral_sum(&self, keep: impl Fn(usize, ModeTag) -> bool) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for (k, tag) in self.tags.iter().enumerate() {
            if keep(k, *tag) {
                let v = self.eigenvectors.column(k);
                out.ger(self.eigenvalues[k], &v, &v, 1.0);
            }
        }
        out
    }

    /// C − C⁽ʳ⁾ − C⁽ᵐ⁾, the matrix whose modularity is maximised.
    /// With `include_below_bulk = false` modes under λ₋ are left out too.
    pub fn filtered(&self, include_below_bulk: bool) -> DMatrix<f64> {
        self.spectral_sum(|_, tag| match tag {
            ModeTag::Group => true,
            ModeTag::BelowBulk => include_below_bulk,
            _ => false,
        })
    }

    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }
}

/// Full symmetric eigendecomposition and mode classification.
///
/// The leading mode is tagged market when it lies above λ₊; if fewer than
/// 95% of its entries share one sign a warning is logged but the tag stays.
pub fn decompose(corr: &CorrelationMatrix) -> Result<SpectralDecomposition> {
    let n = corr.n_series();
    if n == 0 {
        return Err(Error::EmptyPanel("empty correlation matrix".into()));
    }
    let bounds = mp_bounds(n, corr.n_obs.max(1))?;
    decompose_with_bounds(&corr.entries, bounds)
}

pub(crate) fn decompose_with_bounds(
    matrix: &DMatrix<f64>,
    bounds: MpBounds,
) -> Result<SpectralDecomposition> {
    let n = matrix.nrows();
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge (N={n}, max |entry| = {:.3e})",
            matrix.amax()
        ))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        orient(&mut v);
        eigenvectors.set_column(dst, &v);
    }

    let market_index = (eigenvalues[0] > bounds.lambda_plus).then_some(0);
    let market_sign_coherence = market_index.map(|k| {
        let v = eigenvectors.column(k);
        let pos = v.iter().filter(|x| **x > 0.0).count();
        let neg = v.iter().filter(|x| **x < 0.0).count();
        pos.max(neg) as f64 / n as f64
    });
    if let Some(c) = market_sign_coherence {
        if c < 0.95 {
            log::warn!(
                "leading eigenvector has only {:.1}% same-sign entries; discounting it as the market mode anyway",
                100.0 * c
            );
        }
    }

    let tags = eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            if Some(k) == market_index {
                ModeTag::Market
            } else if bounds.contains(l) {
                ModeTag::Random
            } else if l < bounds.lambda_minus {
                ModeTag::BelowBulk
            } else {
                ModeTag::Group
            }
        })
        .collect();

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        bounds,
        market_index,
        tags,
        market_sign_coherence,
    })
}

/// Fixes the sign of an eigenvector so the majority of entries is positive,
/// breaking ties by the sign of the first largest-magnitude entry.
fn orient(v: &mut DVector<f64>) {
    let pos = v.iter().filter(|x| **x > 0.0).count();
    let neg = v.iter().filter(|x| **x < 0.0).count();
    let flip = match pos.cmp(&neg) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            v.iter().copied().fold(
                0.0f64,
                |best, x| {
                    if x.abs() > best.abs() {
                        x
                    } else {
                        best
                    }
                },
            ) < 0.0
        }
    };
    if flip {
        v.neg_mut();
    }
}

/// C⁽ʳ⁾, C⁽ᵍ⁾ or C⁽ᵐ⁾. The three sum to the decomposed matrix.
pub fn component(dec: &SpectralDecomposition, which: Component) -> DMatrix<f64> {
    dec.spectral_sum(|_, tag| match which {
        Component::Random => tag == ModeTag::Random,
        Component::Market => tag == ModeTag::Market,
        Component::Group => matches!(tag, ModeTag::Group | ModeTag::BelowBulk),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShuffleResult {
    pub eigenvalues: Vec<f64>,
    pub bounds: MpBounds,
    pub fraction_in_bulk: f64,
}

/// Independently permutes every column, destroying cross-correlations, and
/// reports how much of the resulting spectrum falls inside the bulk.
pub fn shuffle_test(panel: &ReturnPanel, seed: u64) -> Result<ShuffleResult> {
    let key = StreamKey::new(seed, "shuffle");
    let mut shuffled = panel.clone();
    for j in 0..panel.n_series() {
        let mut rng = key.stream(j as u64);
        let mut col: Vec<f64> = panel.returns.column(j).iter().copied().collect();
        col.shuffle(&mut rng);
        shuffled.returns.set_column(j, &DVector::from_vec(col));
    }
    let corr = correlation(&shuffled)?;
    let dec = decompose(&corr)?;
    let fraction_in_bulk = bulk_fraction(&dec.eigenvalues, dec.bounds);
    Ok(ShuffleResult {
        eigenvalues: dec.eigenvalues,
        bounds: dec.bounds,
        fraction_in_bulk,
    })
}

pub fn bulk_fraction(eigenvalues: &[f64], bounds: MpBounds) -> f64 {
    eigenvalues.iter().filter(|l| bounds.contains(**l)).count() as f64 / eigenvalues.len() as f64
}

/// Histogram of eigenvalues with `bins` equal-width bins over `[lo, hi]`,
/// normalised to a density, next to the Marchenko-Pastur density at bin
/// centres. Rows: `(centre, empirical, theoretical)`.
pub fn density_histogram(
    eigenvalues: &[f64],
    bounds: MpBounds,
    q: f64,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Vec<(f64, f64, f64)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &l in eigenvalues {
        if l >= lo && l <= hi {
            let b = (((l - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let n = eigenvalues.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let centre = lo + (b as f64 + 0.5) * width;
            (centre, c as f64 / (n * width), bounds.density(q, centre))
        })
        .collect()
}
