//! Information-theoretic comparison of partitions and stability studies.
//!
//! With `p(a)`, `p(b)` the label frequencies of two partitions and `p(a,b)`
//! their joint frequencies, mutual information is
//! `I = Σ p(a,b) ln[p(a,b) / (p(a) p(b))]`, joint entropy is
//! `H = −Σ p(a,b) ln p(a,b)`, and the normalised variation of information is
//! `VI = 1 − I/H`, a metric on partitions with values in [0, 1].

mod cooccurrence;
mod stability;

use std::collections::HashMap;

pub use cooccurrence::{average_linkage_order, cooccurrence, CooccurrenceMatrix};
pub use stability::{stability_study, StabilityMode, StabilityParams, StabilityReport};

use crate::error::{Error, Result};

fn check_pair(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "partitions cover {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("empty partitions".into()));
    }
    Ok(())
}

struct Contingency {
    joint: HashMap<(usize, usize), usize>,
    left: HashMap<usize, usize>,
    right: HashMap<usize, usize>,
    n: f64,
}

fn contingency(a: &[usize], b: &[usize]) -> Contingency {
    let mut joint = HashMap::new();
    let mut left = HashMap::new();
    let mut right = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *left.entry(x).or_insert(0) += 1;
        *right.entry(y).or_insert(0) += 1;
    }
    Contingency {
        joint,
        left,
        right,
        n: a.len() as f64,
    }
}

/// Sums in sorted order, so the result does not depend on the argument
/// order of the pairwise measures.
fn ordered_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = terms.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Shannon entropy (nats) of a label vector.
pub fn entropy(labels: &[usize]) -> f64 {
    let mut counts = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let n = labels.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    check_pair(a, b)?;
    let c = contingency(a, b);
    let terms = c.joint.iter().map(|(&(x, y), &nxy)| {
        let pxy = nxy as f64 / c.n;
        let px = c.left[&x] as f64 / c.n;
        let py = c.right[&y] as f64 / c.n;
        pxy * (pxy / (px * py)).ln()
    });
    // rounding can leave a tiny negative value for independent partitions
    Ok(ordered_sum(terms).max(0.0))
}

pub fn joint_entropy(a: &[usize], b: &[usize]) -> Result<f64> {
    check_pair(a, b)?;
    let c = contingency(a, b);
    Ok(ordered_sum(c.joint.values().map(|&nxy| {
        let p = nxy as f64 / c.n;
        -p * p.ln()
    })))
}

/// Normalised VI plus a flag set when the joint entropy vanishes (both
/// partitions a single block) and the value 0 is taken by continuity.
pub fn variation_of_information_flagged(a: &[usize], b: &[usize]) -> Result<(f64, bool)> {
    let h = joint_entropy(a, b)?;
    if h <= 0.0 {
        return Ok((0.0, true));
    }
    if same_partition(a, b) {
        // Exact zero; the entropy ratio can round to 1 - 1e-16.
        return Ok((0.0, false));
    }
    let i = mutual_information(a, b)?;
    Ok(((1.0 - i / h).clamp(0.0, 1.0), false))
}

/// Label sequences describe the same partition up to a bijective relabeling.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut ab = std::collections::HashMap::new();
    let mut ba = std::collections::HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

pub fn variation_of_information(a: &[usize], b: &[usize]) -> Result<f64> {
    variation_of_information_flagged(a, b).map(|(v, _)| v)
}

/// Symmetric matrix of pairwise VI values.
pub fn vi_matrix(partitions: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let k = partitions.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..i {
            let v = variation_of_information(&partitions[i], &partitions[j])?;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relabeled_partition_has_exactly_zero_vi() {
        let a = [0, 0, 1, 1, 2, 2, 2, 3, 0, 1, 3];
        let b: Vec<usize> = a.iter().map(|&x| [7, 2, 9, 4][x]).collect();
        assert_eq!(variation_of_information(&a, &b).unwrap(), 0.0);
        assert!(variation_of_information(&a, &[0, 0, 1, 1, 2, 2, 2, 3, 0, 1, 0]).unwrap() > 0.0);
    }

    /// Dense contingency table evaluation, independent of the hash-map path.
    fn brute_mi(a: &[usize], b: &[usize]) -> f64 {
        let ka = a.iter().max().unwrap() + 1;
        let kb = b.iter().max().unwrap() + 1;
        let n = a.len() as f64;
        let mut table = vec![vec![0.0; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            table[x][y] += 1.0 / n;
        }
        let pa: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let pb: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let mut s = 0.0;
        for x in 0..ka {
            for y in 0..kb {
                if table[x][y] > 0.0 {
                    s += table[x][y] * (table[x][y] / (pa[x] * pb[y])).ln();
                }
            }
        }
        s
    }

    #[test]
    fn identical_partitions() {
        let a = [0, 0, 1, 1, 2, 0, 2];
        let i = mutual_information(&a, &a).unwrap();
        assert!((i - entropy(&a)).abs() < 1e-15);
        assert_eq!(variation_of_information(&a, &a).unwrap(), 0.0);
        let relabeled = [5, 5, 3, 3, 9, 5, 9];
        assert_eq!(variation_of_information(&a, &relabeled).unwrap(), 0.0);
    }

    #[test]
    fn crossing_splits_are_independent() {
        let a = [0, 0, 1, 1];
        let b = [0, 1, 0, 1];
        assert!(mutual_information(&a, &b).unwrap().abs() < 1e-15);
        assert!((variation_of_information(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singletons_versus_singletons() {
        let a: Vec<usize> = (0..6).collect();
        let b: Vec<usize> = (0..6).rev().collect();
        assert!(variation_of_information(&a, &b).unwrap().abs() < 1e-15);
    }

    #[test]
    fn single_block_pair_is_flagged() {
        let (v, flagged) = variation_of_information_flagged(&[0, 0, 0], &[4, 4, 4]).unwrap();
        assert_eq!(v, 0.0);
        assert!(flagged);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(mutual_information(&[0, 1], &[0]).is_err());
        assert!(variation_of_information(&[], &[]).is_err());
    }

    #[test]
    fn matches_contingency_oracle_on_random_partitions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let a: Vec<usize> = (0..20).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<usize> = (0..20).map(|_| rng.random_range(0..5)).collect();
            let i = mutual_information(&a, &b).unwrap();
            assert!((i - brute_mi(&a, &b)).abs() < 1e-12);
        }
    }

    fn labels(n: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0usize..5, n)
    }

    proptest! {
        #[test]
        fn vi_properties(a in labels(30), b in labels(30), c in labels(30)) {
            let ab = variation_of_information(&a, &b).unwrap();
            prop_assert_eq!(ab, variation_of_information(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            let ac = variation_of_information(&a, &c).unwrap();
            let bc = variation_of_information(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            let i = mutual_information(&a, &b).unwrap();
            prop_assert!(i >= 0.0);
            prop_assert!(i <= joint_entropy(&a, &b).unwrap() + 1e-12);
            let shifted: Vec<usize> = b.iter().map(|x| (x + 3) % 5).collect();
            prop_assert!((variation_of_information(&a, &shifted).unwrap() - ab).abs() < 1e-12);
        }
    }
}
