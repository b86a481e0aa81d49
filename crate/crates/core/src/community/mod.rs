//! Community detection on random-matrix filtered correlation matrices.
//!
//! The modularity of a partition σ is
//! `Q(σ) = (1/‖C‖) Σ_ij [C_ij − (C⁽ʳ⁾_ij + C⁽ᵐ⁾_ij)] δ(σ_i, σ_j)`,
//! i.e. the intra-community mass of the filtered matrix relative to the
//! total correlation mass ‖C‖ = Σ_ij C_ij.

mod document;
mod hierarchy;
mod louvain;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use document::{
    CommunityDocument, CommunityEntry, DocumentParameters, NodeEntry, SpectrumSummary,
    DOCUMENT_SCHEMA_VERSION,
};
pub use hierarchy::{community_name, hierarchy, Hierarchy, HierarchyConfig};
pub use louvain::{louvain, MIN_GAIN};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::spectra::{correlation, decompose, CorrelationMatrix, ModeTag, SpectralDecomposition};
use crate::timeseries::ReturnPanel;

/// Assignment of nodes to communities `0..n_communities`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    n_communities: usize,
    quality: f64,
}

impl Partition {
    /// Canonicalises arbitrary labels to consecutive ids in order of first
    /// appearance. Quality is set to 0 until [`Partition::with_quality`].
    pub fn from_labels(labels: impl Into<Vec<usize>>) -> Self {
        let mut labels = labels.into();
        let mut map = BTreeMap::new();
        for l in labels.iter_mut() {
            let next = map.len();
            *l = *map.entry(*l).or_insert(next);
        }
        Partition {
            n_communities: map.len(),
            labels,
            quality: 0.0,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition::from_labels((0..n).collect::<Vec<_>>())
    }

    pub fn with_quality(mut self, quality: f64) -> Self {
        self.quality = quality;
        self
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn quality(&self) -> f64 {
        self.quality
    }

    /// Node indices of each community, ascending.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Modularity of `labels` under the filtered matrix.
pub fn modularity(filtered: &DMatrix<f64>, norm: f64, labels: &[usize]) -> Result<f64> {
    if !(norm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "normalisation {norm} must be positive"
        )));
    }
    if labels.len() != filtered.nrows() || filtered.nrows() != filtered.ncols() {
        return Err(Error::InvalidInput(
            "labels do not match matrix size".into(),
        ));
    }
    let mut sum = 0.0;
    for j in 0..labels.len() {
        for (i, &x) in filtered.column(j).iter().enumerate() {
            if labels[i] == labels[j] {
                sum += x;
            }
        }
    }
    Ok(sum / norm)
}

/// Per-community share of the modularity.
pub fn community_contributions(filtered: &DMatrix<f64>, norm: f64, p: &Partition) -> Vec<f64> {
    let mut out = vec![0.0; p.n_communities()];
    let l = p.labels();
    for j in 0..l.len() {
        for (i, &x) in filtered.column(j).iter().enumerate() {
            if l[i] == l[j] {
                out[l[i]] += x / norm;
            }
        }
    }
    out
}

/// Degree-based weighted-network null model `s_i s_j / ‖C‖` subtracted from
/// the full correlation matrix. Comparison baseline only.
pub fn biased_baseline_matrix(corr: &CorrelationMatrix) -> DMatrix<f64> {
    let c = &corr.entries;
    let strength: Vec<f64> = c.row_iter().map(|r| r.sum()).collect();
    let total = corr.total_weight();
    DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| {
        c[(i, j)] - strength[i] * strength[j] / total
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub restarts: usize,
    /// Keep modes below λ₋ in the filtered matrix.
    pub include_below_bulk: bool,
    /// Use the degree-based null model instead of the spectral filter.
    pub biased_baseline: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            restarts: 10,
            include_below_bulk: true,
            biased_baseline: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureStatus {
    Mesoscopic,
    NoMesoscopicStructure,
    BiasedBaseline,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub partition: Partition,
    pub norm: f64,
    pub status: StructureStatus,
    pub filtered: DMatrix<f64>,
    pub decomposition: SpectralDecomposition,
}

/// Best of `restarts` seeded Louvain runs: highest quality, then
/// lexicographically smallest canonical labels.
pub fn best_of_restarts(
    filtered: &DMatrix<f64>,
    norm: f64,
    seed: u64,
    restarts: usize,
) -> Result<Partition> {
    let runs: Vec<Partition> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| louvain(filtered, norm, derive_seed(seed, "louvain-restart", r)))
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, p| match p.quality().total_cmp(&best.quality()) {
            std::cmp::Ordering::Greater => p,
            std::cmp::Ordering::Equal if p.labels() < best.labels() => p,
            _ => best,
        })
        .expect("at least one restart"))
}

/// correlation → spectral split → filtered matrix → Louvain restarts.
pub fn detect(panel: &ReturnPanel, seed: u64, cfg: &DetectConfig) -> Result<Detection> {
    if !panel.standardized {
        return Err(Error::InvalidInput(
            "community detection expects a standardized panel".into(),
        ));
    }
    let corr = correlation(panel)?;
    let dec = decompose(&corr)?;
    let norm = corr.total_weight();
    if !(norm > 0.0) {
        return Err(Error::Numerical(format!(
            "total correlation mass {norm} is not positive"
        )));
    }

    if cfg.biased_baseline {
        let filtered = biased_baseline_matrix(&corr);
        let partition = best_of_restarts(&filtered, norm, seed, cfg.restarts)?;
        return Ok(Detection {
            partition,
            norm,
            status: StructureStatus::BiasedBaseline,
            filtered,
            decomposition: dec,
        });
    }

    let filtered = dec.filtered(cfg.include_below_bulk);
    if dec.count(ModeTag::Group) == 0 {
        let singles = Partition::singletons(panel.n_series());
        let q = modularity(&filtered, norm, singles.labels())?;
        return Ok(Detection {
            partition: singles.with_quality(q),
            norm,
            status: StructureStatus::NoMesoscopicStructure,
            filtered,
            decomposition: dec,
        });
    }
    let partition = best_of_restarts(&filtered, norm, seed, cfg.restarts)?;
    Ok(Detection {
        partition,
        norm,
        status: StructureStatus::Mesoscopic,
        filtered,
        decomposition: dec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn planted6() -> (DMatrix<f64>, Vec<usize>) {
        let truth = vec![0, 0, 0, 1, 1, 1];
        let w = DMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                0.7
            } else if truth[i] == truth[j] {
                0.3 + 0.01 * (i + j) as f64
            } else {
                -0.2
            }
        });
        (w, truth)
    }

    #[test]
    fn modularity_examples() {
        let z = DMatrix::zeros(4, 4);
        assert_eq!(modularity(&z, 2.0, &[0, 1, 0, 1]).unwrap(), 0.0);

        let (w, truth) = planted6();
        let single = modularity(&w, 3.0, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert!((single - w.trace() / 3.0).abs() < 1e-15);

        let mut brute = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if truth[i] == truth[j] {
                    brute += w[(i, j)];
                }
            }
        }
        assert!((modularity(&w, 3.0, &truth).unwrap() - brute / 3.0).abs() < 1e-15);
        assert!(modularity(&w, 0.0, &truth).is_err());
    }

    #[test]
    fn partition_canonicalisation() {
        let p = Partition::from_labels(vec![7, 7, 2, 9, 2]);
        assert_eq!(p.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.n_communities(), 3);
        assert_eq!(p.communities(), vec![vec![0, 1], vec![2, 4], vec![3]]);
    }

    #[test]
    fn contributions_sum_to_quality() {
        let (w, truth) = planted6();
        let p = Partition::from_labels(truth);
        let total: f64 = community_contributions(&w, 3.0, &p).iter().sum();
        assert!((total - modularity(&w, 3.0, p.labels()).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn no_single_node_move_improves_louvain_output() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for seed in 0..10 {
            let n = 25;
            let mut w = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            w = (&w + w.transpose()) * 0.5;
            let p = louvain(&w, 40.0, seed).unwrap();
            let q = modularity(&w, 40.0, p.labels()).unwrap();
            for i in 0..n {
                // every existing community plus a fresh one
                for c in 0..=p.n_communities() {
                    let mut l = p.labels().to_vec();
                    l[i] = c;
                    assert!(modularity(&w, 40.0, &l).unwrap() <= q + 1e-12);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quality_invariant_under_relabel_and_permutation(
            labels in prop::collection::vec(0usize..4, 7),
            perm_seed in 0u64..1000,
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let (mut w, _) = planted6();
            w = w.insert_row(6, 0.1).insert_column(6, 0.1);
            let q = modularity(&w, 5.0, &labels).unwrap();
            let relabeled: Vec<usize> = labels.iter().map(|l| 10 - l).collect();
            prop_assert!((modularity(&w, 5.0, &relabeled).unwrap() - q).abs() < 1e-14);

            let mut perm: Vec<usize> = (0..7).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
            let wp = DMatrix::from_fn(7, 7, |i, j| w[(perm[i], perm[j])]);
            let lp: Vec<usize> = perm.iter().map(|&k| labels[k]).collect();
            prop_assert!((modularity(&wp, 5.0, &lp).unwrap() - q).abs() < 1e-13);
        }
    }
}
