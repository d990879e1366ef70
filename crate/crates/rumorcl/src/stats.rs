//! Structural statistics of propagation trees.
//!
//! Per claim: reply counts split by depth (1-level, 2-level, deeper) and the
//! number of 1-level replies that received replies themselves. Per corpus:
//! arithmetic means of those counts plus depth-bucket shares. The counts are
//! the quantities behind the observation that propagation trees are wide and
//! shallow rather than deep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::par;
use crate::tree::{PropagationTree, TreeError};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("alpha must lie in [0,1], got {0}")]
    AlphaOutOfRange(f64),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Depth-bucketed reply counts for one claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClaimStats {
    pub replies: usize,
    pub level1: usize,
    pub level2: usize,
    pub deeper: usize,
    pub responded_level1: usize,
}

/// Exact counts by level and descendant flags.
pub fn claim_stats(tree: &PropagationTree) -> ClaimStats {
    let mut stats = ClaimStats::default();
    for v in 1..tree.len() {
        stats.replies += 1;
        match tree.level(v) {
            1 => {
                stats.level1 += 1;
                if tree.has_descendants(v) {
                    stats.responded_level1 += 1;
                }
            }
            2 => stats.level2 += 1,
            _ => stats.deeper += 1,
        }
    }
    stats
}

/// Corpus-level aggregation: means over all claims in input order, plus the
/// share of replies per depth bucket (in percent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub claims: usize,
    /// Claim count per class index; classes beyond the largest label absent.
    pub class_counts: Vec<usize>,
    pub unlabeled: usize,
    pub avg_replies: f64,
    pub avg_level1: f64,
    pub avg_level2: f64,
    pub avg_deeper: f64,
    pub avg_responded_level1: f64,
    pub share_level1: f64,
    pub share_level2: f64,
    pub share_deeper: f64,
}

/// Means and shares over all claims. Sums are taken in integers so that the
/// resulting means are exact for any aggregation order.
pub fn corpus_stats(trees: &[PropagationTree]) -> Result<CorpusStats, StatsError> {
    if trees.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let per_claim = par::map_ordered(trees, claim_stats);

    let mut totals = [0u64; 5];
    for s in &per_claim {
        totals[0] += s.replies as u64;
        totals[1] += s.level1 as u64;
        totals[2] += s.level2 as u64;
        totals[3] += s.deeper as u64;
        totals[4] += s.responded_level1 as u64;
    }
    let mut class_counts = Vec::new();
    let mut unlabeled = 0usize;
    for tree in trees {
        match tree.label {
            Some(class) => {
                if class >= class_counts.len() {
                    class_counts.resize(class + 1, 0);
                }
                class_counts[class] += 1;
            }
            None => unlabeled += 1,
        }
    }
    let n = trees.len() as f64;
    let replies_total = totals[0];
    let share = |count: u64| {
        if replies_total == 0 {
            0.0
        } else {
            100.0 * count as f64 / replies_total as f64
        }
    };
    Ok(CorpusStats {
        claims: trees.len(),
        class_counts,
        unlabeled,
        avg_replies: totals[0] as f64 / n,
        avg_level1: totals[1] as f64 / n,
        avg_level2: totals[2] as f64 / n,
        avg_deeper: totals[3] as f64 / n,
        avg_responded_level1: totals[4] as f64 / n,
        share_level1: share(totals[1]),
        share_level2: share(totals[2]),
        share_deeper: share(totals[3]),
    })
}

impl CorpusStats {
    /// Table rows as (name, value, share-in-percent) triples; shares are
    /// reported to one decimal place in the rendered reports.
    pub fn rows(&self) -> Vec<(String, f64, Option<f64>)> {
        let mut rows = vec![("claims".to_string(), self.claims as f64, None)];
        for (class, count) in self.class_counts.iter().enumerate() {
            rows.push((format!("class {class} claims"), *count as f64, None));
        }
        if self.unlabeled > 0 {
            rows.push(("unlabeled claims".to_string(), self.unlabeled as f64, None));
        }
        rows.push(("avg reply".to_string(), self.avg_replies, None));
        rows.push((
            "avg 1-level reply".to_string(),
            self.avg_level1,
            Some(self.share_level1),
        ));
        rows.push((
            "avg 2-level reply".to_string(),
            self.avg_level2,
            Some(self.share_level2),
        ));
        rows.push((
            "avg deeper reply".to_string(),
            self.avg_deeper,
            Some(self.share_deeper),
        ));
        rows.push((
            "avg responded 1-level reply".to_string(),
            self.avg_responded_level1,
            None,
        ));
        rows
    }
}

/// Removes `⌊alpha · k⌋` of the `k` unresponded 1-level replies, chosen
/// uniformly under `seed`. All other nodes survive with their features;
/// indices are re-packed preserving order.
pub fn strip_unresponded(
    tree: &PropagationTree,
    alpha: f64,
    seed: u64,
) -> Result<PropagationTree, StatsError> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(StatsError::AlphaOutOfRange(alpha));
    }
    let candidates = tree.unresponded_level1();
    let target = (alpha * candidates.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut removed = vec![false; tree.len()];
    if target > 0 {
        for idx in rand::seq::index::sample(&mut rng, candidates.len(), target) {
            removed[candidates[idx]] = true;
        }
    }

    let mut new_index = vec![usize::MAX; tree.len()];
    let mut kept = 0usize;
    for v in 0..tree.len() {
        if !removed[v] {
            new_index[v] = kept;
            kept += 1;
        }
    }
    let mut parent = Vec::with_capacity(kept);
    let mut rows = Vec::with_capacity(kept);
    for v in 0..tree.len() {
        if removed[v] {
            continue;
        }
        parent.push(tree.parent(v).map(|p| new_index[p]));
        rows.push(tree.features().row(v).to_vec());
    }
    Ok(PropagationTree::from_parts(
        tree.claim_id.clone(),
        tree.label,
        parent,
        Mat::from_rows(&rows),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::tree::PropagationTree;
    use proptest::prelude::*;

    fn tree_from_parents(parents: &[i64]) -> PropagationTree {
        let parent: Vec<Option<usize>> = parents
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect();
        let n = parent.len();
        PropagationTree::from_parts("t".into(), Some(0), parent, Mat::zeros(n, 2)).unwrap()
    }

    #[test]
    fn counts_for_root_with_three_children_one_grandchild() {
        // root -> {1,2,3}, 1 -> 4
        let tree = tree_from_parents(&[-1, 0, 0, 0, 1]);
        let s = claim_stats(&tree);
        assert_eq!(s.replies, 4);
        assert_eq!(s.level1, 3);
        assert_eq!(s.level2, 1);
        assert_eq!(s.deeper, 0);
        assert_eq!(s.responded_level1, 1);
    }

    #[test]
    fn counts_for_single_root() {
        let tree = tree_from_parents(&[-1]);
        assert_eq!(claim_stats(&tree), ClaimStats::default());
    }

    #[test]
    fn counts_for_depth_four_chain() {
        let tree = tree_from_parents(&[-1, 0, 1, 2, 3]);
        let s = claim_stats(&tree);
        assert_eq!(s.replies, 4);
        assert_eq!(s.level1, 1);
        assert_eq!(s.level2, 1);
        assert_eq!(s.deeper, 2);
        assert_eq!(s.responded_level1, 1);
    }

    #[test]
    fn corpus_of_single_root_claims_averages_zero() {
        let trees = vec![tree_from_parents(&[-1]), tree_from_parents(&[-1])];
        let c = corpus_stats(&trees).unwrap();
        assert_eq!(c.claims, 2);
        assert_eq!(c.avg_replies, 0.0);
        assert_eq!(c.avg_level1, 0.0);
        assert_eq!(c.avg_responded_level1, 0.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(corpus_stats(&[]), Err(StatsError::EmptyCorpus)));
    }

    #[test]
    fn shares_sum_to_one_hundred() {
        let trees = vec![
            tree_from_parents(&[-1, 0, 0, 1, 3]),
            tree_from_parents(&[-1, 0]),
        ];
        let c = corpus_stats(&trees).unwrap();
        let total = c.share_level1 + c.share_level2 + c.share_deeper;
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn strip_zero_alpha_is_identity() {
        let tree = tree_from_parents(&[-1, 0, 0, 1]);
        let stripped = strip_unresponded(&tree, 0.0, 7).unwrap();
        assert_eq!(stripped.len(), tree.len());
        assert_eq!(claim_stats(&stripped), claim_stats(&tree));
    }

    #[test]
    fn strip_full_alpha_removes_all_unresponded_level1() {
        let tree = tree_from_parents(&[-1, 0, 0, 0, 1]);
        let stripped = strip_unresponded(&tree, 1.0, 7).unwrap();
        assert!(stripped.unresponded_level1().is_empty());
        let s = claim_stats(&stripped);
        assert_eq!(s.responded_level1, 1);
        assert_eq!(s.level2, 1);
    }

    #[test]
    fn strip_half_removes_floor_of_half() {
        // root with 10 unresponded 1-level replies plus one responded pair.
        let mut parents: Vec<i64> = vec![-1];
        parents.extend(std::iter::repeat(0).take(10));
        parents.push(0); // node 11, responded below
        parents.push(11);
        let tree = tree_from_parents(&parents);
        assert_eq!(tree.unresponded_level1().len(), 10);
        let before = claim_stats(&tree);
        let stripped = strip_unresponded(&tree, 0.5, 3).unwrap();
        let after = claim_stats(&stripped);
        assert_eq!(after.level1, before.level1 - 5);
        assert_eq!(stripped.unresponded_level1().len(), 5);
        assert_eq!(after.responded_level1, before.responded_level1);
        assert_eq!(after.level2, before.level2);
        assert_eq!(after.deeper, before.deeper);
    }

    #[test]
    fn strip_rejects_alpha_out_of_range() {
        let tree = tree_from_parents(&[-1, 0]);
        assert!(matches!(
            strip_unresponded(&tree, 1.5, 0),
            Err(StatsError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            strip_unresponded(&tree, -0.1, 0),
            Err(StatsError::AlphaOutOfRange(_))
        ));
    }

    proptest! {
        #[test]
        fn replies_always_equal_node_count_minus_one(seed in 0u64..1000, n in 1usize..40) {
            let mut state = seed;
            let mut parents = vec![-1i64];
            for v in 1..n {
                state = crate::hashing::splitmix64(state);
                parents.push((state % v as u64) as i64);
            }
            let tree = tree_from_parents(&parents);
            let s = claim_stats(&tree);
            prop_assert_eq!(s.replies, n - 1);
            prop_assert_eq!(s.level1 + s.level2 + s.deeper, n - 1);
            prop_assert!(s.responded_level1 <= s.level1);
        }

        #[test]
        fn stripping_preserves_deep_structure(seed in 0u64..500, alpha in 0.0f64..=1.0) {
            let mut state = seed;
            let mut parents = vec![-1i64];
            for v in 1..25 {
                state = crate::hashing::splitmix64(state);
                parents.push((state % v as u64) as i64);
            }
            let tree = tree_from_parents(&parents);
            let before = claim_stats(&tree);
            let stripped = strip_unresponded(&tree, alpha, seed).unwrap();
            let after = claim_stats(&stripped);
            prop_assert_eq!(after.responded_level1, before.responded_level1);
            prop_assert_eq!(after.level2, before.level2);
            prop_assert_eq!(after.deeper, before.deeper);
            let unresponded_before = before.level1 - before.responded_level1;
            let expected_removed = (alpha * unresponded_before as f64).floor() as usize;
            prop_assert_eq!(before.level1 - after.level1, expected_removed);
        }
    }
}
