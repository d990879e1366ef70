//! Claim records, propagation trees, and adjacency views.
//!
//! The on-disk corpus format is JSON Lines, one claim per line:
//!
//! ```text
//! {"id": "c1", "label": 1, "nodes": [{"id": 0, "parent": -1, "text": "src"},
//!                                    {"id": 1, "parent": 0, "x": [0.5, 1.0]}]}
//! ```
//!
//! Node ids are `0..n-1` in file order, node 0 is the source post and has
//! `parent = -1`, and every other node points at a node with a strictly
//! smaller id. Each node carries `text`, a feature vector `x`, or both; a
//! corpus must be uniformly text-featured or vector-featured.

use serde::{Deserialize, Serialize};
use std::io::BufRead;

use crate::hashing::fnv1a64;
use crate::linalg::Mat;
use crate::par;

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("line {line}: invalid JSON: {source}")]
    Syntax {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: claim {claim_id:?}: {message}")]
    Schema {
        line: usize,
        claim_id: String,
        message: String,
    },
    #[error("claim {claim_id:?}: {message}")]
    InvalidClaim { claim_id: String, message: String },
    #[error("corpus mixes text-derived and user-supplied feature vectors (claim {claim_id:?}, node {node})")]
    MixedFeatures { claim_id: String, node: usize },
    #[error("feature dimension mismatch: expected {expected}, claim {claim_id:?} node {node} has {found}")]
    FeatureDim {
        expected: usize,
        found: usize,
        claim_id: String,
        node: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One post: the root (source) or a reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    /// Parent node id; -1 for the root.
    pub parent: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "x")]
    pub features: Option<Vec<f64>>,
}

/// One claim: a source post plus its replies, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub id: String,
    pub label: Option<usize>,
    pub nodes: Vec<NodeRecord>,
}

impl ClaimRecord {
    /// Structural validation of the record (ids, parent links, payloads).
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("claim has no nodes".into());
        }
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.id != pos {
                return Err(format!(
                    "node at position {pos} has id {} (ids must be 0..n-1 in order)",
                    node.id
                ));
            }
            if pos == 0 {
                if node.parent != -1 {
                    return Err(format!("root node must have parent -1, found {}", node.parent));
                }
            } else if node.parent < 0 || node.parent as usize >= pos {
                return Err(format!(
                    "node {pos} names parent {} (must be an earlier node id)",
                    node.parent
                ));
            }
            if node.text.is_none() && node.features.is_none() {
                return Err(format!("node {pos} has neither text nor features"));
            }
        }
        Ok(())
    }
}

/// Parses a JSON-Lines claim stream. Lines are independent, so they are
/// parsed in parallel; order is restored on output and the failure with the
/// smallest line number wins.
pub fn parse_claims<R: BufRead>(reader: R) -> Result<Vec<ClaimRecord>, TreeError> {
    let lines: Vec<(usize, String)> = reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)))
        .collect::<Result<_, _>>()?;

    let parsed = par::map_ordered(&lines, |(line, text)| -> Result<Option<ClaimRecord>, TreeError> {
        if text.trim().is_empty() {
            return Ok(None);
        }
        let record: ClaimRecord = serde_json::from_str(text).map_err(|source| TreeError::Syntax {
            line: *line,
            source,
        })?;
        record.validate().map_err(|message| TreeError::Schema {
            line: *line,
            claim_id: record.id.clone(),
            message,
        })?;
        Ok(Some(record))
    });

    let mut out = Vec::with_capacity(parsed.len());
    for item in parsed {
        if let Some(record) = item? {
            out.push(record);
        }
    }
    Ok(out)
}

/// How node features are produced for a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSource {
    /// Hashed bag-of-tokens over node text.
    Text,
    /// User-supplied vectors (`x` field).
    Supplied,
}

/// Featurizer settings; `dim` applies to the text hashing path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub dim: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig { dim: 128 }
    }
}

/// Lowercased alphanumeric tokens hashed into `dim` buckets, counted.
pub fn hashed_bag_of_tokens(text: &str, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let lowered = token.to_lowercase();
        let bucket = (fnv1a64(lowered.as_bytes()) % dim as u64) as usize;
        out[bucket] += 1.0;
    }
    out
}

/// Direction of the adjacency view over a propagation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TopDown,
    BottomUp,
    Undirected,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Direction::TopDown => "top_down",
            Direction::BottomUp => "bottom_up",
            Direction::Undirected => "undirected",
        };
        f.write_str(s)
    }
}

/// A claim materialised as an indexed rooted tree with a dense feature
/// matrix. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTree {
    pub claim_id: String,
    pub label: Option<usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    level: Vec<usize>,
    has_descendants: Vec<bool>,
    descendant_count: Vec<usize>,
    features: Mat,
}

impl PropagationTree {
    /// Builds a tree from raw parts, recomputing the derived arrays.
    /// `parent[0]` must be `None` and each `parent[v]` must be `< v`.
    pub fn from_parts(
        claim_id: String,
        label: Option<usize>,
        parent: Vec<Option<usize>>,
        features: Mat,
    ) -> Result<Self, TreeError> {
        let n = parent.len();
        let invalid = |message: String| TreeError::InvalidClaim {
            claim_id: claim_id.clone(),
            message,
        };
        if n == 0 {
            return Err(invalid("tree has no nodes".into()));
        }
        if features.rows() != n {
            return Err(invalid(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                n
            )));
        }
        if parent[0].is_some() {
            return Err(invalid("node 0 must be the root".into()));
        }
        let mut children = vec![Vec::new(); n];
        let mut level = vec![0usize; n];
        for v in 1..n {
            match parent[v] {
                Some(p) if p < v => {
                    children[p].push(v);
                    level[v] = level[p] + 1;
                }
                Some(p) => {
                    return Err(invalid(format!(
                        "node {v} names parent {p}; parents must precede children"
                    )))
                }
                None => return Err(invalid(format!("node {v} is a second root"))),
            }
        }
        let mut descendant_count = vec![0usize; n];
        for v in (1..n).rev() {
            let p = parent[v].expect("non-root checked above");
            descendant_count[p] += descendant_count[v] + 1;
        }
        let has_descendants = descendant_count.iter().map(|&c| c > 0).collect();
        Ok(PropagationTree {
            claim_id,
            label,
            parent,
            children,
            level,
            has_descendants,
            descendant_count,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn level(&self, v: usize) -> usize {
        self.level[v]
    }

    pub fn levels(&self) -> &[usize] {
        &self.level
    }

    pub fn has_descendants(&self, v: usize) -> bool {
        self.has_descendants[v]
    }

    pub fn descendant_count(&self, v: usize) -> usize {
        self.descendant_count[v]
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    /// Tree edges in canonical parent→child orientation.
    pub fn edges_top_down(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.len().saturating_sub(1));
        for v in 1..self.len() {
            edges.push((self.parent[v].expect("non-root"), v));
        }
        edges
    }

    /// Unresponded 1-level replies: direct replies to the source with no
    /// further replies. These are the noise candidates.
    pub fn unresponded_level1(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|&v| self.level[v] == 1 && !self.has_descendants[v])
            .collect()
    }
}

/// An oriented edge list over one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyView {
    pub direction: Direction,
    pub edges: Vec<(usize, usize)>,
    pub in_degree: Vec<usize>,
}

/// Materialises the directed (or symmetrised) edge list of a tree.
pub fn build_view(tree: &PropagationTree, direction: Direction) -> AdjacencyView {
    let top_down = tree.edges_top_down();
    let edges: Vec<(usize, usize)> = match direction {
        Direction::TopDown => top_down,
        Direction::BottomUp => top_down.into_iter().map(|(p, c)| (c, p)).collect(),
        Direction::Undirected => top_down
            .iter()
            .copied()
            .chain(top_down.iter().map(|&(p, c)| (c, p)))
            .collect(),
    };
    let mut in_degree = vec![0usize; tree.len()];
    for &(_, dst) in &edges {
        in_degree[dst] += 1;
    }
    AdjacencyView {
        direction,
        edges,
        in_degree,
    }
}

/// Builds one claim's tree. `source` fixes how features are produced and
/// `dim` the expected width (hash buckets for text, vector length otherwise).
pub fn build_tree(
    record: &ClaimRecord,
    source: FeatureSource,
    dim: usize,
) -> Result<PropagationTree, TreeError> {
    record.validate().map_err(|message| TreeError::InvalidClaim {
        claim_id: record.id.clone(),
        message,
    })?;
    let n = record.nodes.len();
    let mut rows = Vec::with_capacity(n);
    for node in &record.nodes {
        let row = match source {
            FeatureSource::Supplied => {
                let vec = node.features.as_ref().ok_or(TreeError::MixedFeatures {
                    claim_id: record.id.clone(),
                    node: node.id,
                })?;
                if vec.len() != dim {
                    return Err(TreeError::FeatureDim {
                        expected: dim,
                        found: vec.len(),
                        claim_id: record.id.clone(),
                        node: node.id,
                    });
                }
                vec.clone()
            }
            FeatureSource::Text => {
                let text = node.text.as_ref().ok_or(TreeError::MixedFeatures {
                    claim_id: record.id.clone(),
                    node: node.id,
                })?;
                hashed_bag_of_tokens(text, dim)
            }
        };
        rows.push(row);
    }
    let parent = record
        .nodes
        .iter()
        .map(|n| if n.parent < 0 { None } else { Some(n.parent as usize) })
        .collect();
    PropagationTree::from_parts(
        record.id.clone(),
        record.label,
        parent,
        Mat::from_rows(&rows),
    )
}

/// Decides the feature source for a corpus and builds every tree.
///
/// A corpus must be uniform: if any node supplies an `x` vector, all nodes
/// must (their common length becomes the dimension); otherwise all nodes
/// must carry text and `config.dim` applies.
pub fn build_corpus(
    records: &[ClaimRecord],
    config: &FeaturizerConfig,
) -> Result<Vec<PropagationTree>, TreeError> {
    let supplied = records
        .iter()
        .flat_map(|r| r.nodes.iter())
        .any(|n| n.features.is_some());
    let (source, dim) = if supplied {
        let dim = records
            .iter()
            .flat_map(|r| r.nodes.iter())
            .find_map(|n| n.features.as_ref().map(Vec::len))
            .expect("supplied implies at least one vector");
        (FeatureSource::Supplied, dim)
    } else {
        (FeatureSource::Text, config.dim)
    };
    let built = par::map_ordered(records, |record| build_tree(record, source, dim));
    built.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn record(json: &str) -> ClaimRecord {
        serde_json::from_str(json).unwrap()
    }

    /// Tree used across modules: root with children a=1, b=2; a has child c=3.
    pub(crate) fn fork_tree() -> PropagationTree {
        let rec = record(
            r#"{"id":"fork","label":0,"nodes":[
                {"id":0,"parent":-1,"text":"root"},
                {"id":1,"parent":0,"text":"a"},
                {"id":2,"parent":0,"text":"b"},
                {"id":3,"parent":1,"text":"c"}]}"#,
        );
        build_tree(&rec, FeatureSource::Text, 8).unwrap()
    }

    pub(crate) fn chain_tree(len: usize) -> PropagationTree {
        let parent: Vec<Option<usize>> = (0..len).map(|v| v.checked_sub(1)).collect();
        PropagationTree::from_parts("chain".into(), None, parent, Mat::zeros(len, 4)).unwrap()
    }

    #[test]
    fn parses_minimal_root_only_claim() {
        let input = r#"{"id":"c1","label":1,"nodes":[{"id":0,"parent":-1,"text":"src"}]}"#;
        let claims = parse_claims(Cursor::new(input)).unwrap();
        assert_eq!(claims.len(), 1);
        assert_eq!(claims[0].id, "c1");
        assert_eq!(claims[0].label, Some(1));
        assert_eq!(claims[0].nodes.len(), 1);
    }

    #[test]
    fn empty_stream_yields_empty_corpus() {
        let claims = parse_claims(Cursor::new("")).unwrap();
        assert!(claims.is_empty());
    }

    #[test]
    fn bad_parent_reference_names_the_line() {
        let input = concat!(
            r#"{"id":"ok","label":0,"nodes":[{"id":0,"parent":-1,"text":"s"}]}"#,
            "\n",
            r#"{"id":"bad","label":0,"nodes":[{"id":0,"parent":-1,"text":"s"},{"id":1,"parent":5,"text":"r"}]}"#,
        );
        let err = parse_claims(Cursor::new(input)).unwrap_err();
        match err {
            TreeError::Schema { line, claim_id, .. } => {
                assert_eq!(line, 2);
                assert_eq!(claim_id, "bad");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_names_the_line() {
        let input = "{\"id\":\"c\",\"label\":null,\"nodes\":[{\"id\":0,\"parent\":-1,\"text\":\"s\"}]}\nnot json";
        let err = parse_claims(Cursor::new(input)).unwrap_err();
        match err {
            TreeError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn levels_and_descendants_for_root_with_two_children() {
        let rec = record(
            r#"{"id":"c","label":null,"nodes":[
                {"id":0,"parent":-1,"text":"r"},
                {"id":1,"parent":0,"text":"a"},
                {"id":2,"parent":0,"text":"b"}]}"#,
        );
        let tree = build_tree(&rec, FeatureSource::Text, 4).unwrap();
        assert_eq!(tree.levels(), &[0, 1, 1]);
        assert!(tree.has_descendants(0));
        assert!(!tree.has_descendants(1));
        assert!(!tree.has_descendants(2));
    }

    #[test]
    fn levels_for_chain_of_three() {
        let tree = chain_tree(3);
        assert_eq!(tree.levels(), &[0, 1, 2]);
    }

    #[test]
    fn single_root_tree_is_degenerate() {
        let rec = record(r#"{"id":"c","label":0,"nodes":[{"id":0,"parent":-1,"text":"r"}]}"#);
        let tree = build_tree(&rec, FeatureSource::Text, 4).unwrap();
        assert_eq!(tree.levels(), &[0]);
        assert!(!tree.has_descendants(0));
        assert!(build_view(&tree, Direction::TopDown).edges.is_empty());
    }

    #[test]
    fn views_of_chain_of_three() {
        let tree = chain_tree(3);
        let td = build_view(&tree, Direction::TopDown);
        assert_eq!(td.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(td.in_degree, vec![0, 1, 1]);
        let bu = build_view(&tree, Direction::BottomUp);
        assert_eq!(bu.edges, vec![(1, 0), (2, 1)]);
        let un = build_view(&tree, Direction::Undirected);
        assert_eq!(un.edges.len(), 4);
    }

    #[test]
    fn bottom_up_is_edge_reversal_of_top_down() {
        let tree = fork_tree();
        let td = build_view(&tree, Direction::TopDown);
        let bu = build_view(&tree, Direction::BottomUp);
        let reversed: Vec<(usize, usize)> = td.edges.iter().map(|&(a, b)| (b, a)).collect();
        assert_eq!(bu.edges, reversed);
    }

    #[test]
    fn mixed_corpus_is_rejected() {
        let a = record(r#"{"id":"a","label":0,"nodes":[{"id":0,"parent":-1,"text":"r"}]}"#);
        let b = record(r#"{"id":"b","label":0,"nodes":[{"id":0,"parent":-1,"x":[1.0,2.0]}]}"#);
        let err = build_corpus(&[a, b], &FeaturizerConfig::default()).unwrap_err();
        assert!(matches!(err, TreeError::MixedFeatures { .. }));
    }

    #[test]
    fn supplied_vectors_must_share_dimension() {
        let a = record(r#"{"id":"a","label":0,"nodes":[{"id":0,"parent":-1,"x":[1.0,2.0]}]}"#);
        let b = record(r#"{"id":"b","label":0,"nodes":[{"id":0,"parent":-1,"x":[1.0]}]}"#);
        let err = build_corpus(&[a, b], &FeaturizerConfig::default()).unwrap_err();
        assert!(matches!(err, TreeError::FeatureDim { .. }));
    }

    #[test]
    fn bag_of_tokens_counts_case_insensitively() {
        let dim = 16;
        let x = hashed_bag_of_tokens("Fake news, fake NEWS!", dim);
        let fake = (fnv1a64(b"fake") % dim as u64) as usize;
        let news = (fnv1a64(b"news") % dim as u64) as usize;
        assert_eq!(x[fake], 2.0);
        assert_eq!(x[news], 2.0);
        assert_eq!(x.iter().sum::<f64>(), 4.0);
    }

    fn arb_claim() -> impl Strategy<Value = ClaimRecord> {
        // Random parent links with parent < id, random optional label.
        (1usize..12, proptest::option::of(0usize..4), 0u64..u64::MAX).prop_map(
            |(n, label, seed)| {
                let mut state = seed;
                let mut nodes = Vec::with_capacity(n);
                for id in 0..n {
                    state = crate::hashing::splitmix64(state);
                    let parent = if id == 0 { -1 } else { (state % id as u64) as i64 };
                    nodes.push(NodeRecord {
                        id,
                        parent,
                        text: Some(format!("t{id}")),
                        features: None,
                    });
                }
                ClaimRecord {
                    id: format!("claim-{seed}"),
                    label,
                    nodes,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn claim_record_round_trips_through_jsonl(claim in arb_claim()) {
            let line = serde_json::to_string(&claim).unwrap();
            let parsed = parse_claims(Cursor::new(line)).unwrap();
            prop_assert_eq!(parsed.len(), 1);
            prop_assert_eq!(&parsed[0], &claim);
        }

        #[test]
        fn level_buckets_partition_the_replies(claim in arb_claim()) {
            let tree = build_tree(&claim, FeatureSource::Text, 8).unwrap();
            let n = tree.len();
            let l1 = tree.levels().iter().filter(|&&l| l == 1).count();
            let l2 = tree.levels().iter().filter(|&&l| l == 2).count();
            let deeper = tree.levels().iter().filter(|&&l| l > 2).count();
            prop_assert_eq!(l1 + l2 + deeper, n - 1);
        }
    }
}
