//! Adaptive view augmentation: centrality-derived drop/mask probabilities
//! and seeded sampling of augmented views.
//!
//! Node importance is the (root-adjusted) centrality; a log transform
//! flattens the orders-of-magnitude spread, and probabilities scale linearly
//! from the per-operator base rate so that the most central nodes are never
//! touched and the least central ones approach the ceiling. The root is
//! exempt from dropping and masking by construction. Edges score the mean of
//! their endpoints.
//!
//! The raw formula takes log of the importance, which is undefined at zero
//! (leaves have zero degree or betweenness), so a smoothing constant is
//! added inside the log; any positive constant preserves the centrality
//! ordering. Probabilities are clipped at `prob_ceiling` to stay valid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::{
    compute_centrality, root_min_adjust, CentralityError, CentralityKind, CentralityMeasure,
    CentralityScores,
};
use crate::hashing::derive_seed;
use crate::linalg::Mat;
use crate::tree::{Direction, PropagationTree};

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("augmentation needs at least 2 nodes, found {0}")]
    TooSmall(usize),
    #[error("probability plans require root-adjusted scores")]
    RequiresRootAdjusted,
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
}

/// The three augmentation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    NodeDrop,
    AttrMask,
    EdgeDrop,
}

impl std::fmt::Display for Augmentation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Augmentation::NodeDrop => "node_drop",
            Augmentation::AttrMask => "attr_mask",
            Augmentation::EdgeDrop => "edge_drop",
        };
        f.write_str(s)
    }
}

/// Where the probabilities come from: centrality-adaptive, or the uniform
/// baseline that ignores structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentStrategy {
    Adaptive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// The two operators; view k is produced by operator k.
    pub operators: (Augmentation, Augmentation),
    pub strategy: AugmentStrategy,
    /// Overall node-drop rate p_n.
    pub node_rate: f64,
    /// Overall mask rate p_m; defaults to `node_rate` when absent.
    pub mask_rate: Option<f64>,
    /// Overall edge-drop rate p_e.
    pub edge_rate: f64,
    /// Probability ceiling p_max.
    pub prob_ceiling: f64,
    /// Log smoothing constant added to importances.
    pub smoothing: f64,
    pub measure: CentralityMeasure,
    /// Apply both operators to each view instead of one per view.
    pub both_per_view: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            operators: (Augmentation::NodeDrop, Augmentation::EdgeDrop),
            strategy: AugmentStrategy::Adaptive,
            node_rate: 0.2,
            mask_rate: None,
            edge_rate: 0.2,
            prob_ceiling: 0.85,
            smoothing: 1.0,
            measure: CentralityMeasure::new(CentralityKind::PageRank),
            both_per_view: false,
        }
    }
}

impl AugmentConfig {
    pub fn mask_rate(&self) -> f64 {
        self.mask_rate.unwrap_or(self.node_rate)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let unit = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                Err(AugmentError::InvalidConfig(format!("{name} must lie in [0,1], got {v}")))
            } else {
                Ok(())
            }
        };
        unit("node_rate", self.node_rate)?;
        unit("mask_rate", self.mask_rate())?;
        unit("edge_rate", self.edge_rate)?;
        if !(self.prob_ceiling > 0.0 && self.prob_ceiling <= 1.0) {
            return Err(AugmentError::InvalidConfig(format!(
                "prob_ceiling must lie in (0,1], got {}",
                self.prob_ceiling
            )));
        }
        if !(self.smoothing > 0.0) {
            return Err(AugmentError::InvalidConfig(format!(
                "smoothing must be positive, got {}",
                self.smoothing
            )));
        }
        if self.operators.0 == self.operators.1 {
            return Err(AugmentError::InvalidConfig(
                "the two operators must be distinct".into(),
            ));
        }
        Ok(())
    }

    fn uses(&self, op: Augmentation) -> bool {
        self.operators.0 == op || self.operators.1 == op
    }
}

/// Drop (or mask) probabilities per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDropPlan {
    /// Node importance w: the root-adjusted centrality.
    pub importance: Vec<f64>,
    /// s = log(w + smoothing).
    pub log_importance: Vec<f64>,
    /// Max of s over non-root nodes.
    pub log_max: f64,
    /// Mean of s over non-root nodes.
    pub log_mean: f64,
    /// Final probabilities; probs[0] == 0.
    pub probs: Vec<f64>,
    /// The base rate the plan was built with.
    pub rate: f64,
}

/// Drop probabilities per tree edge (canonical parent→child order, i.e. the
/// edge ending at child c sits at index c−1).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDropPlan {
    pub edges: Vec<(usize, usize)>,
    /// Edge importance: mean of the two endpoint centralities.
    pub importance: Vec<f64>,
    pub log_importance: Vec<f64>,
    pub log_max: f64,
    pub log_mean: f64,
    pub probs: Vec<f64>,
    pub rate: f64,
}

fn scaled_probs(
    log_importance: &[f64],
    rate: f64,
    ceiling: f64,
) -> (f64, f64, Vec<f64>) {
    let log_max = log_importance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_min = log_importance.iter().copied().fold(f64::INFINITY, f64::min);
    let log_mean = log_importance.iter().sum::<f64>() / log_importance.len() as f64;
    let probs = if log_max == log_min {
        // All importances equal: the normalisation is 0/0, so every item
        // gets the base rate.
        vec![rate.min(ceiling); log_importance.len()]
    } else {
        log_importance
            .iter()
            .map(|&s| ((log_max - s) / (log_max - log_mean) * rate).clamp(0.0, ceiling))
            .collect()
    };
    (log_max, log_mean, probs)
}

fn node_plan(
    scores: &CentralityScores,
    rate: f64,
    cfg: &AugmentConfig,
) -> Result<NodeDropPlan, AugmentError> {
    if !scores.root_adjusted {
        return Err(AugmentError::RequiresRootAdjusted);
    }
    let n = scores.values.len();
    if n < 2 {
        return Err(AugmentError::TooSmall(n));
    }
    let importance = scores.values.clone();
    let log_importance: Vec<f64> = importance.iter().map(|&w| (w + cfg.smoothing).ln()).collect();
    let (log_max, log_mean, non_root_probs) =
        scaled_probs(&log_importance[1..], rate, cfg.prob_ceiling);
    let mut probs = Vec::with_capacity(n);
    probs.push(0.0);
    probs.extend(non_root_probs);
    Ok(NodeDropPlan {
        importance,
        log_importance,
        log_max,
        log_mean,
        probs,
        rate,
    })
}

/// Node-drop probabilities from root-adjusted scores at the configured
/// node rate.
pub fn node_drop_probs(
    scores: &CentralityScores,
    cfg: &AugmentConfig,
) -> Result<NodeDropPlan, AugmentError> {
    node_plan(scores, cfg.node_rate, cfg)
}

/// Mask probabilities: the same construction at the mask rate.
pub fn attr_mask_probs(
    scores: &CentralityScores,
    cfg: &AugmentConfig,
) -> Result<NodeDropPlan, AugmentError> {
    node_plan(scores, cfg.mask_rate(), cfg)
}

/// Edge-drop probabilities; the importance of an edge is the mean of its
/// endpoint centralities and the normalisation runs over all edges.
pub fn edge_drop_probs(
    scores: &CentralityScores,
    tree: &PropagationTree,
    cfg: &AugmentConfig,
) -> Result<EdgeDropPlan, AugmentError> {
    if !scores.root_adjusted {
        return Err(AugmentError::RequiresRootAdjusted);
    }
    if tree.len() < 2 {
        return Err(AugmentError::TooSmall(tree.len()));
    }
    let edges = tree.edges_top_down();
    let importance: Vec<f64> = edges
        .iter()
        .map(|&(u, v)| (scores.values[u] + scores.values[v]) / 2.0)
        .collect();
    let log_importance: Vec<f64> = importance.iter().map(|&w| (w + cfg.smoothing).ln()).collect();
    let (log_max, log_mean, probs) = scaled_probs(&log_importance, cfg.edge_rate, cfg.prob_ceiling);
    Ok(EdgeDropPlan {
        edges,
        importance,
        log_importance,
        log_max,
        log_mean,
        probs,
        rate: cfg.edge_rate,
    })
}

fn uniform_node_plan(n: usize, rate: f64, ceiling: f64) -> NodeDropPlan {
    let mut probs = vec![rate.min(ceiling); n];
    probs[0] = 0.0;
    NodeDropPlan {
        importance: vec![1.0; n],
        log_importance: vec![0.0; n],
        log_max: 0.0,
        log_mean: 0.0,
        probs,
        rate,
    }
}

fn uniform_edge_plan(tree: &PropagationTree, rate: f64, ceiling: f64) -> EdgeDropPlan {
    let edges = tree.edges_top_down();
    let m = edges.len();
    EdgeDropPlan {
        edges,
        importance: vec![1.0; m],
        log_importance: vec![0.0; m],
        log_max: 0.0,
        log_mean: 0.0,
        probs: vec![rate.min(ceiling); m],
        rate,
    }
}

/// A sampled augmented view of one tree.
///
/// `kept` maps view-local index → original node id (ascending; entry 0 is
/// the root). `edges` are view-local parent→child pairs. `masked` holds
/// original ids; their feature rows are zeroed in `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub kept: Vec<usize>,
    pub masked: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub features: Mat,
}

impl AugmentedView {
    pub fn node_count(&self) -> usize {
        self.kept.len()
    }

    /// Edge list oriented for message passing.
    pub fn oriented_edges(&self, direction: Direction) -> Vec<(usize, usize)> {
        match direction {
            Direction::TopDown => self.edges.clone(),
            Direction::BottomUp => self.edges.iter().map(|&(p, c)| (c, p)).collect(),
            Direction::Undirected => self
                .edges
                .iter()
                .copied()
                .chain(self.edges.iter().map(|&(p, c)| (c, p)))
                .collect(),
        }
    }
}

/// Mutable sampling state over original node/edge ids; finalised into an
/// [`AugmentedView`] once all operators have run.
struct ViewState {
    kept: Vec<bool>,
    masked: Vec<bool>,
    edges: Vec<(usize, usize)>,
}

impl ViewState {
    fn identity(tree: &PropagationTree) -> Self {
        ViewState {
            kept: vec![true; tree.len()],
            masked: vec![false; tree.len()],
            edges: tree.edges_top_down(),
        }
    }

    fn drop_nodes(&mut self, plan: &NodeDropPlan, rng: &mut ChaCha8Rng) {
        for v in 1..self.kept.len() {
            if self.kept[v] && rng.gen::<f64>() < plan.probs[v] {
                self.kept[v] = false;
            }
        }
        self.edges.retain(|&(p, c)| self.kept[p] && self.kept[c]);
    }

    fn mask_nodes(&mut self, plan: &NodeDropPlan, rng: &mut ChaCha8Rng) {
        for v in 1..self.masked.len() {
            if self.kept[v] && rng.gen::<f64>() < plan.probs[v] {
                self.masked[v] = true;
            }
        }
    }

    fn drop_edges(&mut self, plan: &EdgeDropPlan, rng: &mut ChaCha8Rng) {
        // The plan indexes canonical edges by child id − 1; surviving edges
        // look their probability up there.
        self.edges.retain(|&(_, c)| !(rng.gen::<f64>() < plan.probs[c - 1]));
    }

    fn finalize(self, tree: &PropagationTree) -> AugmentedView {
        let mut kept = Vec::new();
        let mut local = vec![usize::MAX; tree.len()];
        for v in 0..tree.len() {
            if self.kept[v] {
                local[v] = kept.len();
                kept.push(v);
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|&(p, c)| (local[p], local[c]))
            .collect();
        let dim = tree.features().cols();
        let mut features = Mat::zeros(kept.len(), dim);
        let mut masked = Vec::new();
        for (row, &v) in kept.iter().enumerate() {
            if self.masked[v] {
                masked.push(v);
            } else {
                features.row_mut(row).copy_from_slice(tree.features().row(v));
            }
        }
        AugmentedView {
            kept,
            masked,
            edges,
            features,
        }
    }
}

/// Independently drops each non-root node with its planned probability;
/// edges touching a dropped node vanish, and descendants of dropped nodes
/// stay behind as disconnected nodes.
pub fn apply_node_drop(tree: &PropagationTree, plan: &NodeDropPlan, seed: u64) -> AugmentedView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ViewState::identity(tree);
    state.drop_nodes(plan, &mut rng);
    state.finalize(tree)
}

/// Zeroes the feature rows of masked nodes; edges are untouched and the root
/// is never masked.
pub fn apply_attr_mask(tree: &PropagationTree, plan: &NodeDropPlan, seed: u64) -> AugmentedView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ViewState::identity(tree);
    state.mask_nodes(plan, &mut rng);
    state.finalize(tree)
}

/// Independently drops each edge with its planned probability; nodes and
/// features are untouched.
pub fn apply_edge_drop(tree: &PropagationTree, plan: &EdgeDropPlan, seed: u64) -> AugmentedView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ViewState::identity(tree);
    state.drop_edges(plan, &mut rng);
    state.finalize(tree)
}

/// Precomputed probability plans for one tree under one config. Plans are
/// deterministic; only the view sampling consumes randomness, so a planner
/// can be built once and sampled every epoch.
#[derive(Debug, Clone)]
pub struct AugmentPlanner {
    config: AugmentConfig,
    node_plan: Option<NodeDropPlan>,
    mask_plan: Option<NodeDropPlan>,
    edge_plan: Option<EdgeDropPlan>,
}

impl AugmentPlanner {
    pub fn new(tree: &PropagationTree, config: &AugmentConfig) -> Result<Self, AugmentError> {
        config.validate()?;
        if tree.len() < 2 {
            // A single-node tree admits no augmentation; views are the
            // identity.
            return Ok(AugmentPlanner {
                config: *config,
                node_plan: None,
                mask_plan: None,
                edge_plan: None,
            });
        }
        let scores = match config.strategy {
            AugmentStrategy::Adaptive => {
                Some(root_min_adjust(&compute_centrality(tree, &config.measure)?))
            }
            AugmentStrategy::Random => None,
        };
        let node_plan = if config.uses(Augmentation::NodeDrop) {
            Some(match &scores {
                Some(s) => node_drop_probs(s, config)?,
                None => uniform_node_plan(tree.len(), config.node_rate, config.prob_ceiling),
            })
        } else {
            None
        };
        let mask_plan = if config.uses(Augmentation::AttrMask) {
            Some(match &scores {
                Some(s) => attr_mask_probs(s, config)?,
                None => uniform_node_plan(tree.len(), config.mask_rate(), config.prob_ceiling),
            })
        } else {
            None
        };
        let edge_plan = if config.uses(Augmentation::EdgeDrop) {
            Some(match &scores {
                Some(s) => edge_drop_probs(s, tree, config)?,
                None => uniform_edge_plan(tree, config.edge_rate, config.prob_ceiling),
            })
        } else {
            None
        };
        Ok(AugmentPlanner {
            config: *config,
            node_plan,
            mask_plan,
            edge_plan,
        })
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.config
    }

    pub fn node_plan(&self) -> Option<&NodeDropPlan> {
        self.node_plan.as_ref()
    }

    pub fn mask_plan(&self) -> Option<&NodeDropPlan> {
        self.mask_plan.as_ref()
    }

    pub fn edge_plan(&self) -> Option<&EdgeDropPlan> {
        self.edge_plan.as_ref()
    }

    fn run_op(
        &self,
        op: Augmentation,
        state: &mut ViewState,
        rng: &mut ChaCha8Rng,
    ) {
        match op {
            Augmentation::NodeDrop => {
                if let Some(plan) = &self.node_plan {
                    state.drop_nodes(plan, rng);
                }
            }
            Augmentation::AttrMask => {
                if let Some(plan) = &self.mask_plan {
                    state.mask_nodes(plan, rng);
                }
            }
            Augmentation::EdgeDrop => {
                if let Some(plan) = &self.edge_plan {
                    state.drop_edges(plan, rng);
                }
            }
        }
    }

    /// Samples one view with the given operator(s).
    pub fn sample(&self, tree: &PropagationTree, op: Augmentation, seed: u64) -> AugmentedView {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = ViewState::identity(tree);
        if self.config.both_per_view {
            self.run_op(self.config.operators.0, &mut state, &mut rng);
            self.run_op(self.config.operators.1, &mut state, &mut rng);
        } else {
            self.run_op(op, &mut state, &mut rng);
        }
        state.finalize(tree)
    }

    /// Samples the two training views: view k comes from operator k, each on
    /// its own derived RNG stream.
    pub fn views(&self, tree: &PropagationTree, seed: u64) -> (AugmentedView, AugmentedView) {
        let v1 = self.sample(tree, self.config.operators.0, derive_seed(seed, 1));
        let v2 = self.sample(tree, self.config.operators.1, derive_seed(seed, 2));
        (v1, v2)
    }
}

/// One-shot convenience: plans plus a sampled pair of views.
pub fn generate_views(
    tree: &PropagationTree,
    config: &AugmentConfig,
    seed: u64,
) -> Result<(AugmentedView, AugmentedView), AugmentError> {
    Ok(AugmentPlanner::new(tree, config)?.views(tree, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centrality::{compute_centrality, root_min_adjust, CentralityKind};
    use crate::linalg::Mat;
    use crate::synth::random_tree;
    use crate::tree::PropagationTree;

    fn tree_from_parents(parents: &[i64]) -> PropagationTree {
        let parent: Vec<Option<usize>> = parents
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect();
        let n = parent.len();
        let mut features = Mat::zeros(n, 3);
        for v in 0..n {
            features.set(v, 0, 1.0 + v as f64);
        }
        PropagationTree::from_parts("t".into(), Some(0), parent, features).unwrap()
    }

    /// root -> {1,2}, 1 -> 3.
    fn fork() -> PropagationTree {
        tree_from_parents(&[-1, 0, 0, 1])
    }

    fn degree_adjusted(tree: &PropagationTree) -> CentralityScores {
        root_min_adjust(
            &compute_centrality(tree, &CentralityMeasure::new(CentralityKind::Degree)).unwrap(),
        )
    }

    #[test]
    fn node_probs_match_hand_evaluation_on_fork() {
        // Adjusted degree [0,1,0,0]; smoothing 1 gives s=[0,ln2,0,0]; over
        // non-root nodes max=ln2, mean=ln2/3, so the two leaves scale to
        // 1.5·rate and the internal node to 0.
        let tree = fork();
        let cfg = AugmentConfig {
            node_rate: 0.2,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let plan = node_drop_probs(&degree_adjusted(&tree), &cfg).unwrap();
        assert_eq!(plan.probs[0], 0.0);
        assert!((plan.probs[1] - 0.0).abs() < 1e-12);
        assert!((plan.probs[2] - 0.3).abs() < 1e-12);
        assert!((plan.probs[3] - 0.3).abs() < 1e-12);
        assert!((plan.log_max - 2f64.ln()).abs() < 1e-15);
        assert!((plan.log_mean - 2f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_centralities_give_the_base_rate_exactly() {
        let star = tree_from_parents(&[-1, 0, 0, 0]);
        let cfg = AugmentConfig {
            node_rate: 0.2,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let plan = node_drop_probs(&degree_adjusted(&star), &cfg).unwrap();
        assert_eq!(&plan.probs[1..], &[0.2, 0.2, 0.2]);
    }

    #[test]
    fn zero_rate_means_zero_probabilities() {
        let cfg = AugmentConfig {
            node_rate: 0.0,
            edge_rate: 0.0,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let tree = fork();
        let scores = degree_adjusted(&tree);
        let nodes = node_drop_probs(&scores, &cfg).unwrap();
        assert!(nodes.probs.iter().all(|&p| p == 0.0));
        let edges = edge_drop_probs(&scores, &tree, &cfg).unwrap();
        assert!(edges.probs.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn edge_probs_on_chain_are_uniform() {
        // Adjusted degree on the chain is [0,1,0]; both edges average 0.5,
        // so the normalisation degenerates and both get the base rate.
        let chain = tree_from_parents(&[-1, 0, 1]);
        let cfg = AugmentConfig {
            edge_rate: 0.25,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let plan = edge_drop_probs(&degree_adjusted(&chain), &chain, &cfg).unwrap();
        assert_eq!(plan.importance, vec![0.5, 0.5]);
        assert_eq!(plan.probs, vec![0.25, 0.25]);
    }

    #[test]
    fn root_edge_to_unresponded_leaf_is_likelier_dropped() {
        let tree = fork();
        let cfg = AugmentConfig {
            edge_rate: 0.2,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let plan = edge_drop_probs(&degree_adjusted(&tree), &tree, &cfg).unwrap();
        // Edge order: (0,1), (0,2), (1,3).
        assert!(plan.importance[0] > plan.importance[1]);
        assert!(plan.probs[1] > plan.probs[0]);
    }

    #[test]
    fn higher_centrality_never_raises_drop_probability() {
        let mut rng = rand::SeedableRng::seed_from_u64(77);
        for _ in 0..50 {
            let tree = random_tree(&mut rng, 30, 2);
            if tree.len() < 3 {
                continue;
            }
            let cfg = AugmentConfig {
                node_rate: 0.4,
                ..AugmentConfig::default()
            };
            let scores = root_min_adjust(
                &compute_centrality(&tree, &cfg.measure).unwrap(),
            );
            let plan = node_drop_probs(&scores, &cfg).unwrap();
            for u in 1..tree.len() {
                for v in 1..tree.len() {
                    if scores.values[u] > scores.values[v] {
                        assert!(plan.probs[u] <= plan.probs[v] + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn node_drop_with_zero_probs_is_identity() {
        let tree = fork();
        let plan = uniform_node_plan(tree.len(), 0.0, 0.85);
        let view = apply_node_drop(&tree, &plan, 9);
        assert_eq!(view.kept, vec![0, 1, 2, 3]);
        assert_eq!(view.edges.len(), 3);
        assert!(view.masked.is_empty());
        assert_eq!(view.features, *tree.features());
    }

    #[test]
    fn forced_node_drop_removes_node_and_incident_edges() {
        let tree = fork();
        let mut plan = uniform_node_plan(tree.len(), 0.0, 1.0);
        plan.probs[2] = 1.0;
        let view = apply_node_drop(&tree, &plan, 4);
        assert_eq!(view.kept, vec![0, 1, 3]);
        assert_eq!(view.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn dropping_an_internal_node_leaves_descendants_disconnected() {
        let tree = fork();
        let mut plan = uniform_node_plan(tree.len(), 0.0, 1.0);
        plan.probs[1] = 1.0;
        let view = apply_node_drop(&tree, &plan, 4);
        // Node 3 survives with no incident edge.
        assert_eq!(view.kept, vec![0, 2, 3]);
        assert_eq!(view.edges, vec![(0, 1)]);
    }

    #[test]
    fn mask_zeroes_rows_but_keeps_edges() {
        let tree = fork();
        let mut plan = uniform_node_plan(tree.len(), 0.0, 1.0);
        plan.probs[1] = 1.0;
        plan.probs[2] = 1.0;
        plan.probs[3] = 1.0;
        let view = apply_attr_mask(&tree, &plan, 123);
        assert_eq!(view.kept.len(), 4);
        assert_eq!(view.edges.len(), 3);
        assert_eq!(view.masked, vec![1, 2, 3]);
        assert!(view.features.row(0).iter().any(|&x| x != 0.0));
        for row in 1..4 {
            assert!(view.features.row(row).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn edge_drop_extremes() {
        let tree = fork();
        let keep_all = uniform_edge_plan(&tree, 0.0, 1.0);
        let view = apply_edge_drop(&tree, &keep_all, 5);
        assert_eq!(view.edges.len(), 3);
        assert_eq!(view.kept.len(), 4);
        let mut drop_all = uniform_edge_plan(&tree, 0.0, 1.0);
        drop_all.probs.iter_mut().for_each(|p| *p = 1.0);
        let view = apply_edge_drop(&tree, &drop_all, 5);
        assert!(view.edges.is_empty());
        assert_eq!(view.kept.len(), 4);
        assert_eq!(view.features, *tree.features());
    }

    #[test]
    fn same_seed_gives_identical_view_pairs() {
        let tree = fork();
        let cfg = AugmentConfig::default();
        let a = generate_views(&tree, &cfg, 99).unwrap();
        let b = generate_views(&tree, &cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_views(&tree, &cfg, 100).unwrap();
        assert!(a != c || tree.len() < 2);
    }

    #[test]
    fn zero_rates_reproduce_the_input_graph_in_both_views() {
        let tree = fork();
        let cfg = AugmentConfig {
            node_rate: 0.0,
            edge_rate: 0.0,
            ..AugmentConfig::default()
        };
        let (v1, v2) = generate_views(&tree, &cfg, 42).unwrap();
        for v in [&v1, &v2] {
            assert_eq!(v.kept, vec![0, 1, 2, 3]);
            assert_eq!(v.edges.len(), 3);
            assert!(v.masked.is_empty());
        }
    }

    #[test]
    fn root_survives_unmasked_across_sampled_views() {
        let tree = fork();
        let cfg = AugmentConfig {
            operators: (Augmentation::NodeDrop, Augmentation::AttrMask),
            node_rate: 0.9,
            mask_rate: Some(0.9),
            prob_ceiling: 1.0,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let planner = AugmentPlanner::new(&tree, &cfg).unwrap();
        for seed in 0..500 {
            let (v1, v2) = planner.views(&tree, seed);
            assert_eq!(v1.kept[0], 0);
            assert_eq!(v2.kept[0], 0);
            assert!(!v1.masked.contains(&0));
            assert!(!v2.masked.contains(&0));
        }
    }

    #[test]
    fn empirical_drop_rate_tracks_the_plan() {
        let tree = fork();
        let cfg = AugmentConfig {
            node_rate: 0.3,
            measure: CentralityMeasure::new(CentralityKind::Degree),
            ..AugmentConfig::default()
        };
        let plan = node_drop_probs(&degree_adjusted(&tree), &cfg).unwrap();
        let trials = 4000;
        let mut dropped = vec![0usize; tree.len()];
        for seed in 0..trials {
            let view = apply_node_drop(&tree, &plan, seed);
            for v in 0..tree.len() {
                if !view.kept.contains(&v) {
                    dropped[v] += 1;
                }
            }
        }
        for v in 0..tree.len() {
            let p = plan.probs[v];
            let freq = dropped[v] as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-12,
                "node {v}: freq {freq}, plan {p}"
            );
        }
    }

    #[test]
    fn config_rejects_duplicate_operators_and_bad_rates() {
        let mut cfg = AugmentConfig::default();
        cfg.operators = (Augmentation::NodeDrop, Augmentation::NodeDrop);
        assert!(cfg.validate().is_err());
        let mut cfg = AugmentConfig::default();
        cfg.node_rate = 1.2;
        assert!(cfg.validate().is_err());
        let mut cfg = AugmentConfig::default();
        cfg.smoothing = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_node_tree_yields_identity_views() {
        let tree = tree_from_parents(&[-1]);
        let (v1, v2) = generate_views(&tree, &AugmentConfig::default(), 3).unwrap();
        assert_eq!(v1.kept, vec![0]);
        assert_eq!(v2.kept, vec![0]);
        assert!(v1.edges.is_empty());
    }

    #[test]
    fn node_probs_require_at_least_two_nodes() {
        let tree = tree_from_parents(&[-1]);
        let scores = degree_adjusted(&tree);
        let err = node_drop_probs(&scores, &AugmentConfig::default()).unwrap_err();
        assert!(matches!(err, AugmentError::TooSmall(1)));
    }
}
