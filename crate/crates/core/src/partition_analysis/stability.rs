//! Partition stability across sampling resolutions and across
//! non-overlapping time windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cooccurrence, variation_of_information, vi_matrix, CooccurrenceMatrix};
use crate::community::{detect, DetectConfig, StructureStatus};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::timeseries::{log_returns, standardize, windows, Resolution, ReturnPanel, SpreadPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMode {
    Multiresolution,
    SlidingWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub resolutions: Vec<Resolution>,
    /// Window length in return observations (126 ≈ six months of trading days).
    pub window: usize,
    pub window_resolution: Resolution,
    pub detect: DetectConfig,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            resolutions: Resolution::CANONICAL.to_vec(),
            window: 126,
            window_resolution: Resolution::DAILY,
            detect: DetectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub mode: StabilityMode,
    /// One label per analysed data set (resolution or window span).
    pub labels: Vec<String>,
    pub issuers: Vec<String>,
    pub partitions: Vec<Vec<usize>>,
    pub n_communities: Vec<usize>,
    pub statuses: Vec<StructureStatus>,
    pub vi_matrix: Vec<Vec<f64>>,
    /// VI of every data set against the first one.
    pub vi_vs_first: Vec<f64>,
    /// Sliding-window mode: partition of the whole period.
    pub full_period_partition: Option<Vec<usize>>,
    /// Sliding-window mode: VI matrix with the whole period as last row/column.
    pub vi_matrix_with_full: Option<Vec<Vec<f64>>>,
    pub max_pairwise_vi: f64,
    #[serde(skip)]
    pub cooccurrence: CooccurrenceMatrix,
}

fn run_detection(
    panel: &ReturnPanel,
    cfg: &DetectConfig,
    seed: u64,
) -> Result<(Vec<usize>, StructureStatus)> {
    let standardized = standardize(panel)?;
    let d = detect(&standardized, seed, cfg)?;
    Ok((d.partition.labels().to_vec(), d.status))
}

pub fn stability_study(
    panel: &SpreadPanel,
    mode: StabilityMode,
    params: &StabilityParams,
    seed: u64,
) -> Result<StabilityReport> {
    let (labels, sets): (Vec<String>, Vec<ReturnPanel>) = match mode {
        StabilityMode::Multiresolution => {
            if params.resolutions.is_empty() {
                return Err(Error::InvalidInput("no resolutions requested".into()));
            }
            let sets = params
                .resolutions
                .iter()
                .map(|&r| log_returns(panel, r))
                .collect::<Result<Vec<_>>>()?;
            (
                params.resolutions.iter().map(|r| r.to_string()).collect(),
                sets,
            )
        }
        StabilityMode::SlidingWindow => {
            let returns = log_returns(panel, params.window_resolution)?;
            let sets = windows(&returns, params.window)?;
            if sets.is_empty() {
                return Err(Error::EmptyPanel(format!(
                    "{} observations are fewer than half a {}-observation window",
                    returns.n_obs(),
                    params.window
                )));
            }
            let labels = sets
                .iter()
                .map(|w| format!("{}..{}", w.dates[0], w.dates[w.dates.len() - 1]))
                .collect();
            (labels, sets)
        }
    };

    let label_tag = match mode {
        StabilityMode::Multiresolution => "multiresolution",
        StabilityMode::SlidingWindow => "sliding-window",
    };
    let results: Vec<(Vec<usize>, StructureStatus)> = sets
        .par_iter()
        .enumerate()
        .map(|(k, set)| run_detection(set, &params.detect, derive_seed(seed, label_tag, k as u64)))
        .collect::<Result<_>>()?;
    let (partitions, statuses): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let vi = vi_matrix(&partitions)?;
    let vi_vs_first = vi[0].clone();
    let max_pairwise_vi = vi.iter().flatten().copied().fold(0.0, f64::max);

    let (full_period_partition, vi_matrix_with_full) = if mode == StabilityMode::SlidingWindow {
        let returns = log_returns(panel, params.window_resolution)?;
        let (full, _) = run_detection(
            &returns,
            &params.detect,
            derive_seed(seed, "full-period", 0),
        )?;
        let mut all = partitions.clone();
        all.push(full.clone());
        (Some(full), Some(vi_matrix(&all)?))
    } else {
        (None, None)
    };

    let co = cooccurrence(&partitions)?;
    Ok(StabilityReport {
        mode,
        labels,
        issuers: panel.issuers.clone(),
        n_communities: partitions
            .iter()
            .map(|p| p.iter().collect::<std::collections::BTreeSet<_>>().len())
            .collect(),
        partitions,
        statuses,
        vi_matrix: vi,
        vi_vs_first,
        full_period_partition,
        vi_matrix_with_full,
        max_pairwise_vi,
        cooccurrence: co,
    })
}

impl StabilityReport {
    /// VI of each window against the whole-period partition.
    pub fn vi_vs_full(&self) -> Option<Vec<f64>> {
        let full = self.full_period_partition.as_ref()?;
        self.partitions
            .iter()
            .map(|p| variation_of_information(p, full))
            .collect::<Result<Vec<_>>>()
            .ok()
    }
}
