//! Nested subcommunities: each community is re-analysed on its own
//! correlation matrix with the bulk and the leading "community mode" removed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{best_of_restarts, Partition};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::spectra::{correlation, decompose_with_bounds, mp_bounds, ModeTag};
use crate::timeseries::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    /// Levels including the top-level partition; 2 = one round of splitting.
    pub max_depth: usize,
    pub min_size: usize,
    pub restarts: usize,
    pub include_below_bulk: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            max_depth: 2,
            min_size: 4,
            restarts: 10,
            include_below_bulk: true,
        }
    }
}

/// A partition of `members` with optional nested splits per community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    /// Panel column indices covered by this node.
    pub members: Vec<usize>,
    /// Partition of `members` (positions, not panel indices).
    pub partition: Partition,
    /// Display name of every community in `partition`.
    pub names: Vec<String>,
    pub children: BTreeMap<usize, Hierarchy>,
}

/// "A", "B", ..., "Z", "AA", "AB", ...
pub fn community_name(index: usize) -> String {
    let mut n = index;
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn child_name(parent: &str, index: usize, depth: usize) -> String {
    if depth <= 2 {
        format!("{parent}{}", index + 1)
    } else {
        format!("{parent}.{}", index + 1)
    }
}

impl Hierarchy {
    /// Top-level node with no splits.
    pub fn flat(partition: Partition) -> Self {
        let names = (0..partition.n_communities()).map(community_name).collect();
        Hierarchy {
            members: (0..partition.len()).collect(),
            partition,
            names,
            children: BTreeMap::new(),
        }
    }

    /// For every panel column, the chain of community names from the top
    /// level down to the deepest split containing it.
    pub fn paths(&self, n: usize) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); n];
        self.fill_paths(&mut out);
        out
    }

    fn fill_paths(&self, out: &mut [Vec<String>]) {
        for (pos, &member) in self.members.iter().enumerate() {
            out[member].push(self.names[self.partition.labels()[pos]].clone());
        }
        for child in self.children.values() {
            child.fill_paths(out);
        }
    }

    /// Deepest community name of each panel column.
    pub fn leaf_names(&self, n: usize) -> Vec<String> {
        self.paths(n)
            .into_iter()
            .map(|p| p.last().cloned().unwrap_or_default())
            .collect()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.values().map(|c| c.depth()).max().unwrap_or(0)
    }
}

/// Splits every community of `partition` recursively.
pub fn hierarchy(
    panel: &ReturnPanel,
    partition: &Partition,
    cfg: &HierarchyConfig,
    seed: u64,
) -> Result<Hierarchy> {
    let mut root = Hierarchy::flat(partition.clone());
    split_children(panel, &mut root, 1, cfg, seed)?;
    Ok(root)
}

fn split_children(
    panel: &ReturnPanel,
    node: &mut Hierarchy,
    depth: usize,
    cfg: &HierarchyConfig,
    seed: u64,
) -> Result<()> {
    if depth >= cfg.max_depth {
        return Ok(());
    }
    for (c, positions) in node.partition.communities().into_iter().enumerate() {
        if positions.len() < cfg.min_size {
            continue;
        }
        let members: Vec<usize> = positions.iter().map(|&p| node.members[p]).collect();
        let name = node.names[c].clone();
        if let Some(sub) = split_one(panel, &members, cfg, derive_seed(seed, &name, depth as u64))?
        {
            let names = (0..sub.n_communities())
                .map(|k| child_name(&name, k, depth + 1))
                .collect();
            let mut child = Hierarchy {
                members,
                partition: sub,
                names,
                children: BTreeMap::new(),
            };
            split_children(panel, &mut child, depth + 1, cfg, seed)?;
            node.children.insert(c, child);
        }
    }
    Ok(())
}

/// Louvain on the community's own matrix minus bulk and leading mode, or
/// `None` when nothing structural is left or the split is trivial.
fn split_one(
    panel: &ReturnPanel,
    members: &[usize],
    cfg: &HierarchyConfig,
    seed: u64,
) -> Result<Option<Partition>> {
    let sub = panel.select_columns(members);
    let corr = correlation(&sub)?;
    let bounds = mp_bounds(members.len(), sub.n_obs())?;
    let dec = decompose_with_bounds(&corr.entries, bounds)?;
    // index 0 is the community mode and is dropped whatever its tag
    let structural = |k: usize, tag: ModeTag| {
        k != 0 && (tag == ModeTag::Group || (cfg.include_below_bulk && tag == ModeTag::BelowBulk))
    };
    let has_group = dec.tags.iter().skip(1).any(|&t| t == ModeTag::Group);
    if !has_group {
        return Ok(None);
    }
    let norm = corr.total_weight();
    if !(norm > 0.0) {
        log::warn!(
            "community of {} members has non-positive correlation mass; not split",
            members.len()
        );
        return Ok(None);
    }
    let filtered = dec.spectral_sum(structural);
    let p = best_of_restarts(&filtered, norm, seed, cfg.restarts)?;
    Ok((p.n_communities() > 1).then_some(p))
}
