//! Synthetic corpora with planted ground truth.
//!
//! Real rumor corpora are large and external; these generators produce
//! desk-scale stand-ins whose structural counts are known by construction,
//! so statistics can be checked exactly and training behaviour can be probed
//! under controlled noise.
//!
//! Two tree shapes are available: `random_tree` attaches every node to a
//! uniformly random earlier node (generic rooted trees for formula checks),
//! while `random_rpt` mimics observed reply trees — wide at level 1, with a
//! few narrow deep sections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hashing::derive_seed;
use crate::linalg::Mat;
use crate::stats::ClaimStats;
use crate::tree::{build_corpus, ClaimRecord, FeaturizerConfig, NodeRecord, PropagationTree, TreeError};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("spec must declare at least one class with at least one tree")]
    Empty,
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Structural and feature recipe for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRecipe {
    /// Responded 1-level replies per tree (inclusive range).
    pub deep_branches: (usize, usize),
    /// Nodes chained below each responded reply.
    pub branch_depth: (usize, usize),
    /// Extra leaf children attached to each chain node.
    pub branch_width: (usize, usize),
    /// Clean unresponded 1-level replies.
    pub plain_leaves: (usize, usize),
    /// Half-open dimension range carrying this class's signal.
    pub signal_dims: (usize, usize),
    pub signal_strength: f64,
}

/// Generator settings for a labelled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<ClassRecipe>,
    pub trees_per_class: usize,
    pub feature_dim: usize,
    /// Fraction of each tree's nodes that are noise replies: unresponded
    /// 1-level leaves whose features imitate one of the other classes.
    pub noise_fraction: f64,
    /// Uniform feature jitter amplitude applied to every node.
    pub feature_jitter: f64,
    /// Per-tree multiplier range on the class signal. Trees drawn near the
    /// low end lean on structure rather than raw feature mass.
    pub strength_range: (f64, f64),
    /// Restrict the class signal to nodes below level 1: the source post and
    /// the 1-level replies stay neutral, so the class is only readable from
    /// the deep sections.
    pub deep_signal_only: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.classes.is_empty() || self.trees_per_class == 0 {
            return Err(SynthError::Empty);
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(SynthError::Invalid(format!(
                "noise_fraction must lie in [0,1), got {}",
                self.noise_fraction
            )));
        }
        if !(self.strength_range.0 > 0.0 && self.strength_range.0 <= self.strength_range.1) {
            return Err(SynthError::Invalid(format!(
                "strength_range must be positive and ordered, got {:?}",
                self.strength_range
            )));
        }
        for (i, class) in self.classes.iter().enumerate() {
            let ordered = |(lo, hi): (usize, usize)| lo <= hi;
            if !ordered(class.deep_branches)
                || !ordered(class.branch_depth)
                || !ordered(class.branch_width)
                || !ordered(class.plain_leaves)
            {
                return Err(SynthError::Invalid(format!("class {i}: range lo > hi")));
            }
            if class.signal_dims.1 > self.feature_dim || class.signal_dims.0 >= class.signal_dims.1
            {
                return Err(SynthError::Invalid(format!(
                    "class {i}: signal dims {:?} outside feature dim {}",
                    class.signal_dims, self.feature_dim
                )));
            }
        }
        Ok(())
    }

    /// Two well-separated classes, no noise replies.
    pub fn separable(trees_per_class: usize) -> SynthSpec {
        SynthSpec {
            classes: vec![
                ClassRecipe {
                    deep_branches: (2, 4),
                    branch_depth: (2, 4),
                    branch_width: (0, 1),
                    plain_leaves: (3, 8),
                    signal_dims: (0, 4),
                    signal_strength: 1.0,
                },
                ClassRecipe {
                    deep_branches: (2, 4),
                    branch_depth: (2, 4),
                    branch_width: (0, 1),
                    plain_leaves: (3, 8),
                    signal_dims: (4, 8),
                    signal_strength: 1.0,
                },
            ],
            trees_per_class,
            feature_dim: 16,
            noise_fraction: 0.0,
            feature_jitter: 0.25,
            strength_range: (1.0, 1.0),
            deep_signal_only: false,
        }
    }

    /// Two classes whose trees carry a fraction of misleading unresponded
    /// 1-level replies.
    pub fn noisy(trees_per_class: usize, noise_fraction: f64) -> SynthSpec {
        SynthSpec {
            noise_fraction,
            feature_jitter: 0.5,
            strength_range: (0.5, 1.0),
            deep_signal_only: true,
            ..SynthSpec::separable(trees_per_class)
        }
    }
}

/// A generated corpus: serialisable records, built trees, and the counts
/// planted during generation.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<ClaimRecord>,
    pub trees: Vec<PropagationTree>,
    pub truth: Vec<ClaimStats>,
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn jitter(rng: &mut ChaCha8Rng, dim: usize, amplitude: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-amplitude..=amplitude)).collect()
}

fn signal_row(
    rng: &mut ChaCha8Rng,
    dim: usize,
    dims: (usize, usize),
    strength: f64,
    amplitude: f64,
) -> Vec<f64> {
    let mut row = jitter(rng, dim, amplitude);
    for d in dims.0..dims.1 {
        row[d] += strength;
    }
    row
}

/// Generates the corpus. Tree `i` of class `c` is derived from
/// `seed`, `c`, and `i` only, so corpora are reproducible piecewise.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut truth = Vec::new();
    for (class, recipe) in spec.classes.iter().enumerate() {
        for index in 0..spec.trees_per_class {
            let tree_seed = derive_seed(seed, (class as u64) << 32 | index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let (record, stats) = synth_claim(spec, recipe, class, index, &mut rng);
            records.push(record);
            truth.push(stats);
        }
    }
    let trees = build_corpus(&records, &FeaturizerConfig::default())?;
    Ok(SynthCorpus {
        records,
        trees,
        truth,
    })
}

fn synth_claim(
    spec: &SynthSpec,
    recipe: &ClassRecipe,
    class: usize,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> (ClaimRecord, ClaimStats) {
    let dim = spec.feature_dim;
    let (lo, hi) = spec.strength_range;
    let tree_factor = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let strength = recipe.signal_strength * tree_factor;
    let mut parents: Vec<i64> = vec![-1];
    let mut levels: Vec<usize> = vec![0];
    let root_row = if spec.deep_signal_only {
        jitter(rng, dim, spec.feature_jitter)
    } else {
        signal_row(rng, dim, recipe.signal_dims, strength, spec.feature_jitter)
    };
    let mut rows: Vec<Vec<f64>> = vec![root_row];

    let push = |parents: &mut Vec<i64>, levels: &mut Vec<usize>, rows: &mut Vec<Vec<f64>>, parent: usize, row: Vec<f64>| {
        parents.push(parent as i64);
        levels.push(levels[parent] + 1);
        rows.push(row);
        parents.len() - 1
    };

    let deep_branches = sample_range(rng, recipe.deep_branches);
    for _ in 0..deep_branches {
        let anchor_row = if spec.deep_signal_only {
            jitter(rng, dim, spec.feature_jitter)
        } else {
            signal_row(rng, dim, recipe.signal_dims, strength, spec.feature_jitter)
        };
        let anchor = push(&mut parents, &mut levels, &mut rows, 0, anchor_row);
        let depth = sample_range(rng, recipe.branch_depth).max(1);
        let mut cursor = anchor;
        for _ in 0..depth {
            let width = sample_range(rng, recipe.branch_width);
            for _ in 0..width {
                push(
                    &mut parents,
                    &mut levels,
                    &mut rows,
                    cursor,
                    signal_row(rng, dim, recipe.signal_dims, strength, spec.feature_jitter),
                );
            }
            cursor = push(
                &mut parents,
                &mut levels,
                &mut rows,
                cursor,
                signal_row(rng, dim, recipe.signal_dims, strength, spec.feature_jitter),
            );
        }
    }

    let plain_leaves = sample_range(rng, recipe.plain_leaves);
    for _ in 0..plain_leaves {
        push(
            &mut parents,
            &mut levels,
            &mut rows,
            0,
            jitter(rng, dim, spec.feature_jitter),
        );
    }

    // Noise replies imitate one of the other classes at full strength, so
    // the pooled representation of a weak-signal tree drifts toward the
    // wrong class; only the deep sections stay consistent.
    let mut noise_leaves = 0usize;
    if spec.noise_fraction > 0.0 && spec.classes.len() > 1 {
        let base = parents.len() as f64;
        noise_leaves =
            (spec.noise_fraction * base / (1.0 - spec.noise_fraction)).round() as usize;
        for _ in 0..noise_leaves {
            let mut imitated = rng.gen_range(0..spec.classes.len() - 1);
            if imitated >= class {
                imitated += 1;
            }
            let dims = spec.classes[imitated].signal_dims;
            let imitated_strength = spec.classes[imitated].signal_strength;
            push(
                &mut parents,
                &mut levels,
                &mut rows,
                0,
                signal_row(rng, dim, dims, imitated_strength, spec.feature_jitter),
            );
        }
    }

    let level1 = levels.iter().filter(|&&l| l == 1).count();
    let level2 = levels.iter().filter(|&&l| l == 2).count();
    let deeper = levels.iter().filter(|&&l| l > 2).count();
    let stats = ClaimStats {
        replies: parents.len() - 1,
        level1,
        level2,
        deeper,
        responded_level1: deep_branches,
    };
    debug_assert_eq!(
        level1,
        deep_branches + plain_leaves + noise_leaves,
        "planted level-1 count disagrees"
    );

    let nodes = parents
        .iter()
        .enumerate()
        .map(|(id, &parent)| NodeRecord {
            id,
            parent,
            text: None,
            features: Some(rows[id].clone()),
        })
        .collect();
    let record = ClaimRecord {
        id: format!("synth-{class}-{index}"),
        label: Some(class),
        nodes,
    };
    (record, stats)
}

/// Uniform-attachment rooted tree with 2..=max_nodes nodes and uniform
/// jitter features.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize, dim: usize) -> PropagationTree {
    let n = rng.gen_range(2..=max_nodes.max(2));
    let mut parent: Vec<Option<usize>> = vec![None];
    for v in 1..n {
        parent.push(Some(rng.gen_range(0..v)));
    }
    let mut features = Mat::zeros(n, dim);
    for v in 0..n {
        for d in 0..dim {
            features.set(v, d, rng.gen_range(-1.0..=1.0));
        }
    }
    PropagationTree::from_parts(format!("rand-{n}"), Some(0), parent, features)
        .expect("generated parents are valid")
}

/// Reply-shaped random tree: most nodes are 1-level replies, deep sections
/// are narrow (every non-root node has at most 3 children).
pub fn random_rpt(rng: &mut ChaCha8Rng, max_nodes: usize, dim: usize) -> PropagationTree {
    let n = rng.gen_range(5..=max_nodes.max(5));
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut children = vec![0usize; n];
    let mut deep_candidates: Vec<usize> = Vec::new();
    for v in 1..n {
        let deepen = !deep_candidates.is_empty() && rng.gen_bool(0.35);
        let p = if deepen {
            deep_candidates[rng.gen_range(0..deep_candidates.len())]
        } else {
            0
        };
        parent.push(Some(p));
        children[p] += 1;
        if p != 0 && children[p] >= 3 {
            deep_candidates.retain(|&c| c != p);
        }
        let adopt = if p == 0 { rng.gen_bool(0.2) } else { rng.gen_bool(0.5) };
        if adopt {
            deep_candidates.push(v);
        }
    }
    let mut features = Mat::zeros(n, dim);
    for v in 0..n {
        for d in 0..dim {
            features.set(v, d, rng.gen_range(-1.0..=1.0));
        }
    }
    PropagationTree::from_parts(format!("rpt-{n}"), Some(0), parent, features)
        .expect("generated parents are valid")
}
