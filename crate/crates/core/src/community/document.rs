//! Versioned JSON document describing a detected partition and hierarchy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{community_contributions, Detection, Hierarchy, StructureStatus};
use crate::error::{Error, Result};
use crate::timeseries::ReturnPanel;

pub const DOCUMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentParameters {
    pub restarts: usize,
    pub include_below_bulk: bool,
    pub biased_baseline: bool,
    pub max_depth: usize,
    pub min_size: usize,
    pub resolution_step: usize,
    pub min_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub n_series: usize,
    pub n_obs: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub market_eigenvalue: Option<f64>,
    pub group_eigenvalues: Vec<f64>,
    pub n_below_bulk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub issuer: String,
    pub community: String,
    /// e.g. "B/B3".
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityEntry {
    pub name: String,
    pub path: String,
    pub size: usize,
    /// Share of the top-level modularity; absent for nested communities.
    pub q_contribution: Option<f64>,
    /// Modularity of this community's own split, when it was split.
    pub split_quality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regions: Option<BTreeMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sectors: Option<BTreeMap<String, usize>>,
    pub subcommunities: Vec<CommunityEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityDocument {
    pub schema_version: u32,
    pub method: String,
    pub parameters: DocumentParameters,
    pub seed: u64,
    pub norm: f64,
    pub status: StructureStatus,
    pub quality: f64,
    pub n_communities: usize,
    pub spectrum: SpectrumSummary,
    pub nodes: Vec<NodeEntry>,
    pub communities: Vec<CommunityEntry>,
}

fn composition(
    panel: &ReturnPanel,
    members: &[usize],
) -> (
    Option<BTreeMap<String, usize>>,
    Option<BTreeMap<String, usize>>,
) {
    if panel.meta.iter().all(|m| m.is_none()) {
        return (None, None);
    }
    let mut regions = BTreeMap::new();
    let mut sectors = BTreeMap::new();
    for &i in members {
        let (r, s) = match &panel.meta[i] {
            Some(m) => (m.region.as_str().to_string(), m.sector.as_str().to_string()),
            None => ("unknown".to_string(), "unknown".to_string()),
        };
        *regions.entry(r).or_insert(0) += 1;
        *sectors.entry(s).or_insert(0) += 1;
    }
    (Some(regions), Some(sectors))
}

fn entries(
    panel: &ReturnPanel,
    node: &Hierarchy,
    prefix: &str,
    contributions: Option<&[f64]>,
) -> Vec<CommunityEntry> {
    node.partition
        .communities()
        .into_iter()
        .enumerate()
        .map(|(c, positions)| {
            let members: Vec<usize> = positions.iter().map(|&p| node.members[p]).collect();
            let name = node.names[c].clone();
            let path = if prefix.is_empty() {
                name.clone()
            } else {
                format!("{prefix}/{name}")
            };
            let (regions, sectors) = composition(panel, &members);
            let child = node.children.get(&c);
            CommunityEntry {
                size: members.len(),
                q_contribution: contributions.map(|q| q[c]),
                split_quality: child.map(|h| h.partition.quality()),
                regions,
                sectors,
                subcommunities: child
                    .map(|h| entries(panel, h, &path, None))
                    .unwrap_or_default(),
                name,
                path,
            }
        })
        .collect()
}

impl CommunityDocument {
    pub fn build(
        panel: &ReturnPanel,
        detection: &Detection,
        hierarchy: Option<&Hierarchy>,
        parameters: DocumentParameters,
        seed: u64,
    ) -> Result<Self> {
        let n = panel.n_series();
        if detection.partition.len() != n {
            return Err(Error::IssuerMismatch(
                "partition size differs from panel width".into(),
            ));
        }
        let flat = Hierarchy::flat(detection.partition.clone());
        let root = hierarchy.unwrap_or(&flat);
        if root.partition.labels() != detection.partition.labels() {
            return Err(Error::InvalidInput(
                "hierarchy was built from a different partition".into(),
            ));
        }
        let paths = root.paths(n);
        let nodes = panel
            .issuers
            .iter()
            .zip(&paths)
            .map(|(id, p)| NodeEntry {
                issuer: id.clone(),
                community: p[0].clone(),
                path: p.join("/"),
            })
            .collect();
        let contributions =
            community_contributions(&detection.filtered, detection.norm, &detection.partition);
        let dec = &detection.decomposition;
        let spectrum = SpectrumSummary {
            n_series: n,
            n_obs: panel.n_obs(),
            lambda_minus: dec.bounds.lambda_minus,
            lambda_plus: dec.bounds.lambda_plus,
            market_eigenvalue: dec.market_index.map(|k| dec.eigenvalues[k]),
            group_eigenvalues: dec
                .eigenvalues
                .iter()
                .zip(&dec.tags)
                .filter(|(_, t)| **t == crate::spectra::ModeTag::Group)
                .map(|(l, _)| *l)
                .collect(),
            n_below_bulk: dec.count(crate::spectra::ModeTag::BelowBulk),
        };
        let method = if parameters.biased_baseline {
            "biased baseline: degree-based weighted-network null model"
        } else {
            "random-matrix filtered modularity"
        };
        Ok(CommunityDocument {
            schema_version: DOCUMENT_SCHEMA_VERSION,
            method: method.to_string(),
            parameters,
            seed,
            norm: detection.norm,
            status: detection.status,
            quality: detection.partition.quality(),
            n_communities: detection.partition.n_communities(),
            spectrum,
            nodes,
            communities: entries(panel, root, "", Some(&contributions)),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CommunityDocument = serde_json::from_str(text)?;
        if doc.schema_version != DOCUMENT_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported community document version {}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn has_subcommunities(&self) -> bool {
        self.communities
            .iter()
            .any(|c| !c.subcommunities.is_empty())
    }

    /// Top-level community and deepest community name for each of `issuers`.
    pub fn assignments(&self, issuers: &[String]) -> Result<(Vec<String>, Vec<String>)> {
        let by_id: BTreeMap<&str, &NodeEntry> =
            self.nodes.iter().map(|n| (n.issuer.as_str(), n)).collect();
        let mut top = Vec::with_capacity(issuers.len());
        let mut leaf = Vec::with_capacity(issuers.len());
        for id in issuers {
            let node = by_id.get(id.as_str()).ok_or_else(|| {
                Error::IssuerMismatch(format!("`{id}` missing from community document"))
            })?;
            top.push(node.community.clone());
            leaf.push(node.path.rsplit('/').next().unwrap_or_default().to_string());
        }
        Ok((top, leaf))
    }
}
