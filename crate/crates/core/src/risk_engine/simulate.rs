use std::collections::HashMap;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{threshold_or_limit, Portfolio, RatingPdTable};
use crate::error::{Error, Result};
use crate::factor_model::{CalibratedModel, ModelVariant};
use crate::normal;
use crate::rng::StreamKey;

const PATH_LABEL: &str = "simulate";
const CORRELATION_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    /// Sample the default count of issuers with identical parameters from its
    /// conditional binomial law instead of one draw per issuer.
    pub aggregate_classes: bool,
    pub pd_table: RatingPdTable,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            aggregate_classes: true,
            pd_table: RatingPdTable::default(),
        }
    }
}

/// Simulated portfolio losses, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDistribution {
    pub losses: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub model_variant: ModelVariant,
    pub portfolio: String,
}

impl LossDistribution {
    pub fn from_losses(
        mut losses: Vec<f64>,
        seed: u64,
        model_variant: ModelVariant,
        portfolio: impl Into<String>,
    ) -> Self {
        losses.par_sort_unstable_by(f64::total_cmp);
        LossDistribution {
            n_paths: losses.len(),
            losses,
            seed,
            model_variant,
            portfolio: portfolio.into(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.n_paths as f64
    }
}

/// `inf{l : P(L <= l) >= alpha}` on the empirical distribution.
pub fn var(dist: &LossDistribution, alpha: f64) -> Result<f64> {
    let n = dist.losses.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty loss distribution".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha {alpha} is outside (0, 1)"
        )));
    }
    let nf = n as f64;
    let mut k = ((alpha * nf).ceil() as usize).clamp(1, n);
    // guard the ceiling against rounding in alpha * n
    while k > 1 && (k - 1) as f64 / nf >= alpha {
        k -= 1;
    }
    while k < n && (k as f64) / nf < alpha {
        k += 1;
    }
    Ok(dist.losses[k - 1])
}

/// Sparse loading row of one class against the factor draw `A z`.
#[derive(Debug, Clone)]
struct Class {
    loading: Vec<(usize, f64)>,
    sqrt_beta: f64,
    sqrt_idio: f64,
    threshold: f64,
    weight: f64,
    size: u64,
}

struct Prepared {
    /// Square root of Omega, K x K.
    root: DMatrix<f64>,
    classes: Vec<Class>,
}

fn omega_root(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = omega.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -1e-6 * scale {
        return Err(Error::Numerical(format!(
            "factor covariance is not positive semidefinite (eigenvalue {min})"
        )));
    }
    if min < -1e-8 {
        warn!("clipping factor covariance eigenvalue {min} to 0");
    }
    let sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

fn prepare(
    portfolio: &Portfolio,
    model: &CalibratedModel,
    opts: &SimulationOptions,
) -> Result<Prepared> {
    portfolio.validate()?;
    let index: HashMap<&str, usize> = model
        .issuers
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let pds = portfolio.pds(&opts.pd_table)?;
    let root = omega_root(&model.omega)?;
    let k = model.n_factors();

    let mut classes: Vec<Class> = Vec::new();
    let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
    for (pos, &pd) in portfolio.positions.iter().zip(&pds) {
        let i = *index
            .get(pos.issuer_id.as_str())
            .ok_or_else(|| Error::UnresolvedIssuer(pos.issuer_id.clone()))?;
        let beta = model.beta[i];
        let threshold = threshold_or_limit(pd)?;
        let weight = pos.lgd * pos.exposure;
        let loading: Vec<(usize, f64)> = (0..k)
            .filter(|&c| model.alpha[(i, c)] != 0.0)
            .map(|c| (c, model.alpha[(i, c)]))
            .collect();
        let class = Class {
            loading,
            sqrt_beta: beta.sqrt(),
            sqrt_idio: (1.0 - beta).sqrt(),
            threshold,
            weight,
            size: 1,
        };
        if opts.aggregate_classes {
            let mut key: Vec<u64> = vec![beta.to_bits(), threshold.to_bits(), weight.to_bits()];
            key.extend(
                class
                    .loading
                    .iter()
                    .flat_map(|&(c, v)| [c as u64, v.to_bits()]),
            );
            if let Some(&at) = keys.get(&key) {
                classes[at].size += 1;
                continue;
            }
            keys.insert(key, classes.len());
        }
        classes.push(class);
    }
    Ok(Prepared { root, classes })
}

struct Scratch {
    z: DVector<f64>,
    f: DVector<f64>,
}

impl Prepared {
    fn scratch(&self) -> Scratch {
        let k = self.root.nrows();
        Scratch {
            z: DVector::zeros(k),
            f: DVector::zeros(k),
        }
    }

    /// Draws the factor vector and returns the systematic part of class `c`.
    fn draw_factors(&self, rng: &mut impl rand::Rng, s: &mut Scratch) {
        for v in s.z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        s.f.gemv(1.0, &self.root, &s.z, 0.0);
    }

    fn systematic(class: &Class, f: &DVector<f64>) -> f64 {
        class.loading.iter().map(|&(c, a)| a * f[c]).sum()
    }

    fn path_loss(&self, key: &StreamKey, path: u64, s: &mut Scratch) -> f64 {
        let mut rng = key.stream(path);
        self.draw_factors(&mut rng, s);
        let mut loss = 0.0;
        for class in &self.classes {
            let sys = class.sqrt_beta * Self::systematic(class, &s.f);
            if class.size == 1 {
                let eps: f64 = StandardNormal.sample(&mut rng);
                if sys + class.sqrt_idio * eps <= class.threshold {
                    loss += class.weight;
                }
                continue;
            }
            let p = if class.sqrt_idio > 0.0 {
                normal::cdf((class.threshold - sys) / class.sqrt_idio)
            } else if sys <= class.threshold {
                1.0
            } else {
                0.0
            };
            let count = if p <= 0.0 {
                0
            } else if p >= 1.0 {
                class.size
            } else {
                Binomial::new(class.size, p)
                    .expect("valid binomial")
                    .sample(&mut rng)
            };
            loss += count as f64 * class.weight;
        }
        loss
    }
}

/// Monte Carlo loss distribution. Path `j` draws only from stream `j` of the
/// key derived from `seed`, so results do not depend on the worker count.
pub fn simulate(
    portfolio: &Portfolio,
    model: &CalibratedModel,
    n_paths: usize,
    seed: u64,
) -> Result<LossDistribution> {
    simulate_with(
        portfolio,
        model,
        n_paths,
        seed,
        &SimulationOptions::default(),
    )
}

pub fn simulate_with(
    portfolio: &Portfolio,
    model: &CalibratedModel,
    n_paths: usize,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<LossDistribution> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("at least one path is required".into()));
    }
    let prepared = prepare(portfolio, model, opts)?;
    let key = StreamKey::new(seed, PATH_LABEL);
    let losses: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || prepared.scratch(),
            |s, path| prepared.path_loss(&key, path, s),
        )
        .collect();
    Ok(LossDistribution::from_losses(
        losses,
        seed,
        model.variant,
        portfolio.name.clone(),
    ))
}

/// Per-path default indicators, path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultIndicators {
    pub n_paths: usize,
    pub n_issuers: usize,
    pub defaults: Vec<bool>,
}

impl DefaultIndicators {
    pub fn get(&self, path: usize, issuer: usize) -> bool {
        self.defaults[path * self.n_issuers + issuer]
    }

    pub fn frequency(&self, issuer: usize) -> f64 {
        (0..self.n_paths).filter(|&p| self.get(p, issuer)).count() as f64 / self.n_paths as f64
    }
}

/// Issuer-level defaults drawn with the same streams as a non-aggregated
/// [`simulate_with`] run.
pub fn default_indicators(
    portfolio: &Portfolio,
    model: &CalibratedModel,
    n_paths: usize,
    seed: u64,
    table: &RatingPdTable,
) -> Result<DefaultIndicators> {
    let opts = SimulationOptions {
        aggregate_classes: false,
        pd_table: table.clone(),
    };
    let prepared = prepare(portfolio, model, &opts)?;
    let key = StreamKey::new(seed, PATH_LABEL);
    let m = prepared.classes.len();
    let rows: Vec<Vec<bool>> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || prepared.scratch(),
            |s, path| {
                let mut rng = key.stream(path);
                prepared.draw_factors(&mut rng, s);
                prepared
                    .classes
                    .iter()
                    .map(|c| {
                        let eps: f64 = StandardNormal.sample(&mut rng);
                        c.sqrt_beta * Prepared::systematic(c, &s.f) + c.sqrt_idio * eps
                            <= c.threshold
                    })
                    .collect()
            },
        )
        .collect();
    Ok(DefaultIndicators {
        n_paths,
        n_issuers: m,
        defaults: rows.into_iter().flatten().collect(),
    })
}

/// Sample correlation of `n_draws` simulated creditworthiness vectors.
pub fn creditworthiness_correlation(
    model: &CalibratedModel,
    n_draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if n_draws < 2 {
        return Err(Error::InvalidInput(
            "at least two draws are required".into(),
        ));
    }
    let root = omega_root(&model.omega)?;
    let n = model.n_issuers();
    // issuer loadings on the independent normals: sqrt(beta_i) alpha_i' A
    let load = DMatrix::from_fn(n, root.ncols(), |i, _| model.beta[i].sqrt())
        .component_mul(&(&model.alpha * &root));
    let idio: Vec<f64> = model.beta.iter().map(|b| (1.0 - b).sqrt()).collect();
    let key = StreamKey::new(seed, "creditworthiness");
    let k = root.ncols();
    let chunks = n_draws.div_ceil(CORRELATION_CHUNK);
    let partial: Vec<(DVector<f64>, DMatrix<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CORRELATION_CHUNK.min(n_draws - c * CORRELATION_CHUNK);
            let mut rng = key.stream(c as u64);
            let mut x = DMatrix::zeros(rows, n);
            let mut z = DVector::zeros(k);
            for r in 0..rows {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let sys = &load * &z;
                for i in 0..n {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    x[(r, i)] = sys[i] + idio[i] * eps;
                }
            }
            let sums = DVector::from_iterator(n, x.column_iter().map(|col| col.sum()));
            (sums, x.transpose() * &x)
        })
        .collect();
    let mut sum = DVector::zeros(n);
    let mut cross = DMatrix::zeros(n, n);
    for (s, c) in partial {
        sum += s;
        cross += c;
    }
    let t = n_draws as f64;
    let mean = sum / t;
    let cov = cross / t - &mean * mean.transpose();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
        }
    }))
}
