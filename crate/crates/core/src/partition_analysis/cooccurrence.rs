use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Fraction of partitions placing each pair of nodes together, with a
/// display ordering from average-linkage clustering on `1 − entry`.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub entries: DMatrix<f64>,
    pub ordering: Vec<usize>,
}

impl CooccurrenceMatrix {
    /// Entries with rows and columns permuted into `ordering`.
    pub fn reordered(&self) -> DMatrix<f64> {
        let o = &self.ordering;
        DMatrix::from_fn(o.len(), o.len(), |i, j| self.entries[(o[i], o[j])])
    }
}

pub fn cooccurrence(partitions: &[Vec<usize>]) -> Result<CooccurrenceMatrix> {
    let first = partitions
        .first()
        .ok_or_else(|| Error::InvalidInput("co-occurrence needs at least one partition".into()))?;
    let n = first.len();
    if partitions.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput(
            "partitions cover different node sets".into(),
        ));
    }
    let mut counts = vec![0u32; n * n];
    for p in partitions {
        for i in 0..n {
            for j in 0..n {
                if p[i] == p[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let k = partitions.len() as f64;
    let entries = DMatrix::from_fn(n, n, |i, j| counts[i * n + j] as f64 / k);
    let distance = entries.map(|x| 1.0 - x);
    let ordering = average_linkage_order(&distance);
    Ok(CooccurrenceMatrix { entries, ordering })
}

/// Leaf order of the average-linkage (UPGMA) dendrogram of a symmetric
/// distance matrix. The closest pair merges first (ties: lowest cluster
/// slots); the merged subtree whose smallest original index is lower is
/// placed on the left.
pub fn average_linkage_order(distance: &DMatrix<f64>) -> Vec<usize> {
    let n = distance.nrows();
    let mut d = distance.clone();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut min_index: Vec<usize> = (0..n).collect();
    let mut leaves: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    for _ in 1..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[(i, j)] < best.2 {
                    best = (i, j, d[(i, j)]);
                }
            }
        }
        let (i, j, _) = best;
        if i == usize::MAX {
            break;
        }
        for k in 0..n {
            if active[k] && k != i && k != j {
                let v = (size[i] as f64 * d[(k, i)] + size[j] as f64 * d[(k, j)])
                    / (size[i] + size[j]) as f64;
                d[(k, i)] = v;
                d[(i, k)] = v;
            }
        }
        let right = std::mem::take(&mut leaves[j]);
        if min_index[j] < min_index[i] {
            let left = std::mem::replace(&mut leaves[i], right);
            leaves[i].extend(left);
        } else {
            leaves[i].extend(right);
        }
        min_index[i] = min_index[i].min(min_index[j]);
        size[i] += size[j];
        active[j] = false;
    }
    (0..n)
        .filter(|&i| active[i])
        .flat_map(|i| leaves[i].clone())
        .collect()
}
