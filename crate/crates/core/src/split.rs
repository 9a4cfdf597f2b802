use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SplitMode {
    TriSplit,
    TwoSplit,
}

impl SplitMode {
    pub fn parts(self) -> usize {
        match self {
            SplitMode::TriSplit => 3,
            SplitMode::TwoSplit => 2,
        }
    }
}

/// Random partition of the rows `0..n_total` into two or three groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub mode: SplitMode,
    /// Row indices per group, each sorted ascending.
    pub parts: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn part(&self, k: usize) -> &[usize] {
        &self.parts[k]
    }

    /// True when the groups are pairwise disjoint and cover `0..n_total`.
    pub fn is_partition(&self, n_total: usize) -> bool {
        let mut seen = vec![false; n_total];
        for &i in self.parts.iter().flatten() {
            if i >= n_total || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Uniform random partition determined entirely by `seed`. Group sizes
/// differ by at most one; remainder rows go to the earlier groups.
pub fn split(n_total: usize, mode: SplitMode, seed: u64) -> Result<SplitPlan> {
    let k = mode.parts();
    if n_total < k {
        return Err(Error::TooFewRows {
            needed: k,
            found: n_total,
        });
    }
    let mut rows: Vec<usize> = (0..n_total).collect();
    rows.shuffle(&mut rng_from_seed(seed));

    let base = n_total / k;
    let extra = n_total % k;
    let mut parts = Vec::with_capacity(k);
    let mut start = 0;
    for g in 0..k {
        let len = base + usize::from(g < extra);
        let mut part = rows[start..start + len].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += len;
    }
    Ok(SplitPlan { mode, parts, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_thirds() {
        let plan = split(9, SplitMode::TriSplit, 1).unwrap();
        assert!(plan.parts.iter().all(|p| p.len() == 3));
        assert!(plan.is_partition(9));
    }

    #[test]
    fn remainder_goes_to_first_groups() {
        let plan = split(10, SplitMode::TriSplit, 1).unwrap();
        let sizes: Vec<usize> = plan.parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let plan = split(11, SplitMode::TwoSplit, 1).unwrap();
        let sizes: Vec<usize> = plan.parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![6, 5]);
    }

    #[test]
    fn same_seed_same_partition() {
        assert_eq!(
            split(50, SplitMode::TriSplit, 42).unwrap(),
            split(50, SplitMode::TriSplit, 42).unwrap()
        );
        assert_ne!(
            split(50, SplitMode::TriSplit, 42).unwrap().parts,
            split(50, SplitMode::TriSplit, 43).unwrap().parts
        );
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            split(2, SplitMode::TriSplit, 0),
            Err(Error::TooFewRows { needed: 3, found: 2 })
        ));
        assert!(split(2, SplitMode::TwoSplit, 0).is_ok());
    }

    proptest! {
        #[test]
        fn always_a_balanced_partition(n in 3usize..300, seed: u64, tri: bool) {
            let mode = if tri { SplitMode::TriSplit } else { SplitMode::TwoSplit };
            let plan = split(n, mode, seed).unwrap();
            prop_assert!(plan.is_partition(n));
            let sizes: Vec<usize> = plan.parts.iter().map(Vec::len).collect();
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
