//! Two-phase Louvain optimisation for dense, signed modularity matrices.
//!
//! Phase one sweeps the nodes in a seeded random order and moves each one to
//! the community with the largest positive modularity gain (an empty
//! community is always a candidate). Phase two collapses communities into
//! super-nodes by summing matrix entries and repeats phase one on the
//! reduced matrix. After the reduced levels stop improving, the node-level
//! sweep runs again from the current partition, so the result is always
//! locally optimal with respect to single-node moves.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{modularity, Partition};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Minimum modularity improvement for a move to be taken.
pub const MIN_GAIN: f64 = 1e-12;

/// Maximises `(1/norm) Σ_ij filtered_ij δ(σ_i, σ_j)`. The returned partition
/// carries the incrementally tracked modularity as its quality.
pub fn louvain(filtered: &DMatrix<f64>, norm: f64, seed: u64) -> Result<Partition> {
    let n = filtered.nrows();
    if filtered.ncols() != n {
        return Err(Error::InvalidInput(
            "modularity matrix must be square".into(),
        ));
    }
    if !(norm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "normalisation {norm} must be positive"
        )));
    }
    if n == 0 {
        return Ok(Partition::from_labels(Vec::new()));
    }
    let mut rng = StreamKey::new(seed, "louvain").stream(0);
    let mut labels: Vec<usize> = (0..n).collect();
    let mut q = filtered.diagonal().sum() / norm;

    loop {
        let mut improved = local_moves(filtered, &mut labels, norm, &mut q, &mut rng);
        compact(&mut labels);
        loop {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            if k <= 1 {
                break;
            }
            let reduced = aggregate(filtered, &labels, k);
            let mut super_labels: Vec<usize> = (0..k).collect();
            if !local_moves(&reduced, &mut super_labels, norm, &mut q, &mut rng) {
                break;
            }
            improved = true;
            labels.iter_mut().for_each(|l| *l = super_labels[*l]);
            compact(&mut labels);
        }
        if !improved {
            break;
        }
    }
    debug_assert!((modularity(filtered, norm, &labels).unwrap() - q).abs() < 1e-8);
    Ok(Partition::from_labels(labels).with_quality(q))
}

/// Sums matrix entries within each pair of communities.
fn aggregate(w: &DMatrix<f64>, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(k, k);
    for j in 0..w.ncols() {
        let cj = labels[j];
        for (i, &x) in w.column(j).iter().enumerate() {
            out[(labels[i], cj)] += x;
        }
    }
    out
}

/// Relabels to consecutive ids in order of first appearance.
fn compact(labels: &mut [usize]) {
    let mut map = vec![usize::MAX; labels.len()];
    let mut next = 0;
    for l in labels.iter_mut() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
}

/// Repeated sweeps of single-node moves on `w` until none improves `q`.
/// `comm[i] < n` for every node. Returns whether anything moved.
fn local_moves(
    w: &DMatrix<f64>,
    comm: &mut [usize],
    norm: f64,
    q: &mut f64,
    rng: &mut ChaCha8Rng,
) -> bool {
    let n = w.nrows();
    let mut sizes = vec![0usize; n];
    for &c in comm.iter() {
        sizes[c] += 1;
    }
    let mut links = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut moved_any = false;

    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &i in &order {
            let a = comm[i];
            links.iter_mut().for_each(|x| *x = 0.0);
            for (j, &x) in w.column(i).iter().enumerate() {
                links[comm[j]] += x;
            }
            let w_ii = w[(i, i)];
            let stay = links[a] - w_ii;
            let empty = if sizes[a] > 1 {
                sizes.iter().position(|&s| s == 0)
            } else {
                None
            };

            let mut best = a;
            let mut best_gain = 0.0;
            for c in 0..n {
                if c == a {
                    continue;
                }
                let gain = if sizes[c] == 0 {
                    if Some(c) != empty {
                        continue;
                    }
                    -stay
                } else {
                    links[c] - stay
                };
                // strict comparison keeps the lowest id among equal gains
                if gain > best_gain {
                    best_gain = gain;
                    best = c;
                }
            }

            let delta = 2.0 * best_gain / norm;
            if best != a && delta > MIN_GAIN {
                sizes[a] -= 1;
                sizes[best] += 1;
                comm[i] = best;
                *q += delta;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    moved_any
}
