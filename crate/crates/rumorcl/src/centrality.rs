//! Node centralities on propagation-tree views, the root-minimum adjustment,
//! and the three augmentation-principle checks.
//!
//! Degree, betweenness, and PageRank are the recommended measures; the
//! eigenvector, Katz, and closeness variants exist so sweeps can show why
//! they are unsuitable for reply trees. Each measure has a conventional
//! default view: degree counts out-edges top-down, PageRank aggregates
//! bottom-up (replies endorse what they reply to), betweenness/Katz/
//! closeness default top-down, eigenvector defaults to the undirected view
//! because power iteration has no dominant eigenvalue on a DAG adjacency.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::par;
use crate::tree::{build_view, Direction, PropagationTree};

#[derive(Debug, thiserror::Error)]
pub enum CentralityError {
    #[error("{kind:?} did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        kind: CentralityKind,
        iterations: usize,
        residual: f64,
    },
    #[error("tree must have at least {required} nodes, found {found}")]
    TooSmall { required: usize, found: usize },
    #[error("principle checks require root-adjusted scores")]
    RequiresRootAdjusted,
    #[error("scores cover {scores} nodes but the tree has {nodes}")]
    LengthMismatch { scores: usize, nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityKind {
    Degree,
    Betweenness,
    PageRank,
    Eigenvector,
    Katz,
    Closeness,
}

impl CentralityKind {
    pub const ALL: [CentralityKind; 6] = [
        CentralityKind::Degree,
        CentralityKind::Betweenness,
        CentralityKind::PageRank,
        CentralityKind::Eigenvector,
        CentralityKind::Katz,
        CentralityKind::Closeness,
    ];

    /// Conventional view for the measure; overridable in the config.
    pub fn default_direction(self) -> Direction {
        match self {
            CentralityKind::Degree => Direction::TopDown,
            CentralityKind::Betweenness => Direction::TopDown,
            CentralityKind::PageRank => Direction::BottomUp,
            CentralityKind::Eigenvector => Direction::Undirected,
            CentralityKind::Katz => Direction::TopDown,
            CentralityKind::Closeness => Direction::TopDown,
        }
    }
}

impl std::fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CentralityKind::Degree => "degree",
            CentralityKind::Betweenness => "betweenness",
            CentralityKind::PageRank => "pagerank",
            CentralityKind::Eigenvector => "eigenvector",
            CentralityKind::Katz => "katz",
            CentralityKind::Closeness => "closeness",
        };
        f.write_str(s)
    }
}

/// A centrality measure bound to a view and its iteration constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralityMeasure {
    pub kind: CentralityKind,
    pub direction: Direction,
    /// PageRank damping factor.
    pub damping: f64,
    /// Katz attenuation factor.
    pub attenuation: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl CentralityMeasure {
    pub fn new(kind: CentralityKind) -> Self {
        CentralityMeasure {
            kind,
            direction: kind.default_direction(),
            damping: 0.85,
            attenuation: 0.05,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }
}

/// Per-node centrality values for one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores {
    pub values: Vec<f64>,
    pub measure: CentralityMeasure,
    pub root_adjusted: bool,
}

/// Computes raw (unadjusted) centralities for a tree under `measure`.
pub fn compute_centrality(
    tree: &PropagationTree,
    measure: &CentralityMeasure,
) -> Result<CentralityScores, CentralityError> {
    if tree.is_empty() {
        return Err(CentralityError::TooSmall { required: 1, found: 0 });
    }
    let values = match measure.kind {
        CentralityKind::Degree => degree(tree, measure.direction),
        CentralityKind::Betweenness => betweenness(tree, measure.direction),
        CentralityKind::PageRank => pagerank(tree, measure)?,
        CentralityKind::Eigenvector => eigenvector(tree, measure)?,
        CentralityKind::Katz => katz(tree, measure)?,
        CentralityKind::Closeness => closeness(tree, measure.direction),
    };
    Ok(CentralityScores {
        values,
        measure: *measure,
        root_adjusted: false,
    })
}

/// Replaces the root's value with the minimum over all nodes (including the
/// root's own). Idempotent; touches no other entry.
pub fn root_min_adjust(scores: &CentralityScores) -> CentralityScores {
    let mut values = scores.values.clone();
    if let Some(min) = values.iter().copied().reduce(f64::min) {
        values[0] = min;
    }
    CentralityScores {
        values,
        measure: scores.measure,
        root_adjusted: true,
    }
}

fn out_adjacency(tree: &PropagationTree, direction: Direction) -> Vec<Vec<usize>> {
    let view = build_view(tree, direction);
    let mut adj = vec![Vec::new(); tree.len()];
    for &(src, dst) in &view.edges {
        adj[src].push(dst);
    }
    adj
}

fn degree(tree: &PropagationTree, direction: Direction) -> Vec<f64> {
    let mut out = vec![0.0; tree.len()];
    let view = build_view(tree, direction);
    for &(src, _) in &view.edges {
        out[src] += 1.0;
    }
    out
}

/// Counts, for every node, the ordered pairs (s,t) whose unique path in the
/// view passes through it, by walking the path of each pair. Trees have
/// unique paths, so the O(n²) pair walk is exact.
fn betweenness(tree: &PropagationTree, direction: Direction) -> Vec<f64> {
    let n = tree.len();
    let mut counts = vec![0.0; n];
    let mut interior: Vec<usize> = Vec::new();
    match direction {
        Direction::TopDown | Direction::BottomUp => {
            // A directed path exists iff one endpoint is an ancestor of the
            // other; which endpoint is the source only swaps (s,t), so the
            // per-node counts agree for the two directed views.
            for s in 0..n {
                for t in 0..n {
                    if s == t {
                        continue;
                    }
                    interior.clear();
                    let mut cursor = tree.parent(t);
                    while let Some(p) = cursor {
                        if p == s {
                            for &w in &interior {
                                counts[w] += 1.0;
                            }
                            break;
                        }
                        interior.push(p);
                        cursor = tree.parent(p);
                    }
                }
            }
        }
        Direction::Undirected => {
            let mut on_chain = vec![usize::MAX; n];
            let mut chain: Vec<usize> = Vec::new();
            for s in 0..n {
                // Ancestor chain of s, positions recorded for LCA lookup.
                chain.clear();
                let mut cursor = Some(s);
                while let Some(v) = cursor {
                    on_chain[v] = chain.len();
                    chain.push(v);
                    cursor = tree.parent(v);
                }
                for t in 0..n {
                    if s == t {
                        continue;
                    }
                    // Walk up from t to the lowest common ancestor.
                    let mut v = t;
                    let mut climbed = 0usize;
                    while on_chain[v] == usize::MAX {
                        v = tree.parent(v).expect("root is on every chain");
                        climbed += 1;
                    }
                    let lca_pos = on_chain[v];
                    // Interior nodes: strictly between s and lca on s's
                    // chain, the lca itself when distinct from both ends,
                    // and strictly between lca and t on t's side.
                    for &w in chain.iter().take(lca_pos).skip(1) {
                        counts[w] += 1.0;
                    }
                    if lca_pos > 0 && climbed > 0 {
                        counts[chain[lca_pos]] += 1.0;
                    }
                    let mut u = t;
                    for _ in 1..climbed {
                        u = tree.parent(u).expect("interior of the climb");
                        counts[u] += 1.0;
                    }
                }
                for &v in &chain {
                    on_chain[v] = usize::MAX;
                }
            }
        }
    }
    counts
}

/// Power iteration with uniform redistribution of dangling mass; the result
/// is a probability distribution over nodes.
fn pagerank(
    tree: &PropagationTree,
    measure: &CentralityMeasure,
) -> Result<Vec<f64>, CentralityError> {
    let n = tree.len();
    let d = measure.damping;
    let view = build_view(tree, measure.direction);
    let mut out_degree = vec![0usize; n];
    for &(src, _) in &view.edges {
        out_degree[src] += 1;
    }
    let base = (1.0 - d) / n as f64;
    let mut rank = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..measure.max_iterations {
        let dangling: f64 = (0..n)
            .filter(|&v| out_degree[v] == 0)
            .map(|v| rank[v])
            .sum();
        let spread = d * dangling / n as f64;
        next.iter_mut().for_each(|x| *x = base + spread);
        for &(src, dst) in &view.edges {
            next[dst] += d * rank[src] / out_degree[src] as f64;
        }
        residual = rank
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut rank, &mut next);
        if residual < measure.tolerance {
            return Ok(rank);
        }
    }
    Err(CentralityError::NonConvergence {
        kind: CentralityKind::PageRank,
        iterations: measure.max_iterations,
        residual,
    })
}

/// Power iteration on (A + I) restricted to in-edges; the identity shift
/// keeps bipartite undirected trees from oscillating. L2-normalised.
fn eigenvector(
    tree: &PropagationTree,
    measure: &CentralityMeasure,
) -> Result<Vec<f64>, CentralityError> {
    let n = tree.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let view = build_view(tree, measure.direction);
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..measure.max_iterations {
        next.copy_from_slice(&x);
        for &(src, dst) in &view.edges {
            next[dst] += x[src];
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= norm);
        residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut x, &mut next);
        if residual < measure.tolerance {
            return Ok(x);
        }
    }
    Err(CentralityError::NonConvergence {
        kind: CentralityKind::Eigenvector,
        iterations: measure.max_iterations,
        residual,
    })
}

/// Fixed-point iteration of x = 1 + α·(in-edge sum of x).
fn katz(tree: &PropagationTree, measure: &CentralityMeasure) -> Result<Vec<f64>, CentralityError> {
    let n = tree.len();
    let view = build_view(tree, measure.direction);
    let alpha = measure.attenuation;
    let mut x = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..measure.max_iterations {
        next.iter_mut().for_each(|v| *v = 1.0);
        for &(src, dst) in &view.edges {
            next[dst] += alpha * x[src];
        }
        residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut x, &mut next);
        if residual < measure.tolerance {
            return Ok(x);
        }
    }
    Err(CentralityError::NonConvergence {
        kind: CentralityKind::Katz,
        iterations: measure.max_iterations,
        residual,
    })
}

/// Classic closeness (n−1)/Σ distances along the view; a node that cannot
/// reach every other node scores 0 (its distance sum is infinite). On
/// directed reply trees only the root reaches everything, which is exactly
/// why this measure degenerates there.
fn closeness(tree: &PropagationTree, direction: Direction) -> Vec<f64> {
    let n = tree.len();
    if n == 1 {
        return vec![0.0];
    }
    let adj = out_adjacency(tree, direction);
    let mut scores = vec![0.0; n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for v in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[v] = 0;
        queue.clear();
        queue.push_back(v);
        let mut sum = 0usize;
        let mut reached = 0usize;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    sum += dist[w];
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        if reached == n - 1 {
            scores[v] = (n - 1) as f64 / sum as f64;
        }
    }
    scores
}

/// Verdicts for the three augmentation principles, computed on root-adjusted
/// scores. A failed check records its first counterexample.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipleReport {
    /// The root-exemption rule applies to this tree (it always does for
    /// n ≥ 2; the actual guarantee is enforced by the samplers).
    pub root_exemption_applicable: bool,
    /// Every non-root node with descendants outranks every leaf.
    pub p2_nodes: bool,
    /// Every edge below a non-root reply outranks every root edge to an
    /// unresponded 1-level reply (mean-of-endpoints importance).
    pub p2_edges: bool,
    /// Centrality never increases along any root-to-leaf path (non-root
    /// segment).
    pub p3_weak: bool,
    /// Additionally strict wherever the parent has other descendants.
    pub p3_strict: bool,
    pub violations: Vec<String>,
}

impl PrincipleReport {
    pub fn p2(&self) -> bool {
        self.p2_nodes && self.p2_edges
    }
}

impl std::fmt::Display for PrincipleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = |ok: bool| if ok { "pass" } else { "fail" };
        writeln!(f, "P1 root exemption: applicable (enforced by samplers)")?;
        writeln!(
            f,
            "P2 deep-reply preservation: {} (nodes {}, edges {})",
            verdict(self.p2()),
            verdict(self.p2_nodes),
            verdict(self.p2_edges)
        )?;
        writeln!(f, "P3 depth monotonicity (weak): {}", verdict(self.p3_weak))?;
        write!(f, "P3 depth monotonicity (strict): {}", verdict(self.p3_strict))?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

/// Checks the augmentation principles for one tree and one set of
/// root-adjusted scores.
pub fn check_principles(
    tree: &PropagationTree,
    scores: &CentralityScores,
) -> Result<PrincipleReport, CentralityError> {
    if tree.len() < 2 {
        return Err(CentralityError::TooSmall {
            required: 2,
            found: tree.len(),
        });
    }
    if !scores.root_adjusted {
        return Err(CentralityError::RequiresRootAdjusted);
    }
    if scores.values.len() != tree.len() {
        return Err(CentralityError::LengthMismatch {
            scores: scores.values.len(),
            nodes: tree.len(),
        });
    }
    let phi = &scores.values;
    let mut violations = Vec::new();

    let internal: Vec<usize> = (1..tree.len()).filter(|&v| tree.has_descendants(v)).collect();
    let leaves: Vec<usize> = (0..tree.len()).filter(|&v| !tree.has_descendants(v)).collect();
    let mut p2_nodes = true;
    'nodes: for &i in &internal {
        for &l in &leaves {
            if phi[i] <= phi[l] {
                p2_nodes = false;
                violations.push(format!(
                    "P2 nodes: internal node {i} ({:.6}) does not exceed leaf {l} ({:.6})",
                    phi[i], phi[l]
                ));
                break 'nodes;
            }
        }
    }

    let edge_importance = |p: usize, c: usize| (phi[p] + phi[c]) / 2.0;
    let deep_edges: Vec<(usize, usize)> = tree
        .edges_top_down()
        .into_iter()
        .filter(|&(p, _)| p != 0)
        .collect();
    let noise_edges: Vec<(usize, usize)> = tree
        .children(0)
        .iter()
        .filter(|&&c| !tree.has_descendants(c))
        .map(|&c| (0usize, c))
        .collect();
    let mut p2_edges = true;
    'edges: for &(p, c) in &deep_edges {
        for &(rp, rc) in &noise_edges {
            if edge_importance(p, c) <= edge_importance(rp, rc) {
                p2_edges = false;
                violations.push(format!(
                    "P2 edges: edge ({p},{c}) importance {:.6} does not exceed root edge ({rp},{rc}) {:.6}",
                    edge_importance(p, c),
                    edge_importance(rp, rc)
                ));
                break 'edges;
            }
        }
    }

    let mut p3_weak = true;
    let mut p3_strict = true;
    for (p, c) in tree.edges_top_down() {
        if p == 0 {
            continue;
        }
        if phi[p] < phi[c] {
            if p3_weak {
                violations.push(format!(
                    "P3 weak: parent {p} ({:.6}) below child {c} ({:.6})",
                    phi[p], phi[c]
                ));
            }
            p3_weak = false;
            p3_strict = false;
        } else if phi[p] == phi[c] && tree.descendant_count(p) >= 2 {
            if p3_strict {
                violations.push(format!(
                    "P3 strict: parent {p} ties child {c} at {:.6} despite other descendants",
                    phi[p]
                ));
            }
            p3_strict = false;
        }
    }

    Ok(PrincipleReport {
        root_exemption_applicable: true,
        p2_nodes,
        p2_edges,
        p3_weak,
        p3_strict,
        violations,
    })
}

/// Centralities for a whole corpus; parallel per tree.
pub fn compute_corpus(
    trees: &[PropagationTree],
    measure: &CentralityMeasure,
) -> Result<Vec<CentralityScores>, CentralityError> {
    par::map_ordered(trees, |tree| compute_centrality(tree, measure))
        .into_iter()
        .collect()
}

/// Sequential per-tree computation with wall-clock timing, for comparing
/// measure costs. Returns the scores and the mean seconds per tree.
pub fn timed_centrality(
    trees: &[PropagationTree],
    measure: &CentralityMeasure,
) -> Result<(Vec<CentralityScores>, f64), CentralityError> {
    let mut scores = Vec::with_capacity(trees.len());
    let mut total = 0.0f64;
    for tree in trees {
        let start = Instant::now();
        let s = compute_centrality(tree, measure)?;
        total += start.elapsed().as_secs_f64();
        scores.push(s);
    }
    let mean = if trees.is_empty() { 0.0 } else { total / trees.len() as f64 };
    Ok((scores, mean))
}
