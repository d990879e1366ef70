//! Dataset splitting, the training loop, and evaluation metrics.
//!
//! One training step: sample two augmented views per graph, encode the views
//! and the untouched graph, take the supervised loss on the original graph's
//! logits and the contrastive loss on the view embeddings, combine them, and
//! descend with a fixed rate. Model selection tracks validation accuracy
//! with ties broken by lower validation loss; training stops early when the
//! best epoch is `early_stop_patience` epochs old.
//!
//! Everything is driven by one seed: parameter init, epoch shuffles, and the
//! per-graph view seeds (`seed ⊕ claim-index ⊕ epoch`). Per-graph work runs
//! in parallel; gradients are folded in index order so results are
//! bit-reproducible regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, AugmentError, AugmentPlanner, AugmentedView};
use crate::encoder::{
    backward_from_embedding, classify, gcn_forward, head_backward, sgd_step, EncoderConfig,
    EncoderError, EncoderParams, Gradients,
};
use crate::hashing::derive_seed;
use crate::loss::{
    contrastive_loss, contrastive_loss_grad, nll_from_logits, total_loss, LossBreakdown, LossError,
};
use crate::par;
use crate::tree::{build_view, Direction, PropagationTree};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("split ratios invalid: {0}")]
    Ratios(String),
    #[error("corpus has no labelled claims")]
    NoLabels,
    #[error("class {class} has {count} labelled claims, fewer than the {required} splits require")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },
    #[error("batch size must be at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("split is empty")]
    EmptySplit,
    #[error("claim {0:?} has no label")]
    MissingLabel(String),
    #[error("training diverged at epoch {epoch}: loss {value}")]
    Diverged { epoch: usize, value: f64 },
    #[error("feature width differs across the corpus: {first} vs {other}")]
    FeatureWidth { first: usize, other: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<(), TrainError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&r| r < 0.0 || r.is_nan()) {
            return Err(TrainError::Ratios("ratios must be non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(TrainError::Ratios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the contrastive regulariser.
    pub lambda: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// View augmentation; `None` trains the plain supervised encoder.
    pub augment: Option<AugmentConfig>,
    /// Message-passing direction for encoding.
    pub direction: Direction,
    pub hidden_dims: Vec<usize>,
    pub ratios: SplitRatios,
    /// One independent train/val/test split per seed.
    pub split_seeds: Vec<u64>,
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.01,
            lambda: 0.1,
            tau: 1.0,
            augment: Some(AugmentConfig::default()),
            direction: Direction::TopDown,
            hidden_dims: vec![64, 64],
            ratios: SplitRatios::default(),
            split_seeds: (1..=10).collect(),
            early_stop_patience: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::BatchTooSmall(self.batch_size));
        }
        self.ratios.validate()?;
        if let Some(aug) = &self.augment {
            aug.validate()?;
        }
        Ok(())
    }
}

/// Disjoint, exhaustive (over labelled claims), class-stratified index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split of the labelled claims. Unlabelled claims join no split.
pub fn make_splits(
    labels: &[Option<usize>],
    ratios: SplitRatios,
    seed: u64,
) -> Result<Splits, TrainError> {
    ratios.validate()?;
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for (idx, label) in labels.iter().enumerate() {
        if let Some(class) = label {
            if *class >= by_class.len() {
                by_class.resize(class + 1, Vec::new());
            }
            by_class[*class].push(idx);
        }
    }
    if by_class.iter().all(Vec::is_empty) {
        return Err(TrainError::NoLabels);
    }
    let required = [ratios.train, ratios.val, ratios.test]
        .iter()
        .filter(|&&r| r > 0.0)
        .count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < required {
            return Err(TrainError::ClassTooSmall {
                class,
                count: members.len(),
                required,
            });
        }
        // Fisher–Yates under the split seed.
        for i in (1..members.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            members.swap(i, j);
        }
        let n = members.len();
        let shares = [ratios.train, ratios.val, ratios.test];
        let mut counts = [0usize; 3];
        let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(3);
        for (k, &share) in shares.iter().enumerate() {
            let exact = share * n as f64;
            counts[k] = exact.floor() as usize;
            remainders.push((k, exact - exact.floor()));
        }
        let mut leftover = n - counts.iter().sum::<usize>();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (k, _) in remainders {
            if leftover == 0 {
                break;
            }
            if shares[k] > 0.0 {
                counts[k] += 1;
                leftover -= 1;
            }
        }
        let mut cursor = members.into_iter();
        splits.train.extend(cursor.by_ref().take(counts[0]));
        splits.val.extend(cursor.by_ref().take(counts[1]));
        splits.test.extend(cursor.by_ref().take(counts[2]));
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}

/// Precision/recall/F1 for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion-matrix metrics for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalMetrics {
    /// Builds metrics from a confusion matrix (rows = true, cols = predicted).
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> EvalMetrics {
        let classes = confusion.len();
        let total: usize = confusion.iter().map(|row| row.iter().sum::<usize>()).sum();
        let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        let per_class = (0..classes)
            .map(|c| {
                let tp = confusion[c][c];
                let fp: usize = (0..classes).filter(|&r| r != c).map(|r| confusion[r][c]).sum();
                let fn_: usize = (0..classes).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
                let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
                let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();
        EvalMetrics {
            accuracy,
            per_class,
            confusion,
        }
    }
}

/// Mean ± population standard deviation over split runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    if values.is_empty() {
        return MetricSummary { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    MetricSummary {
        mean,
        std: var.sqrt(),
    }
}

/// Number of classes implied by the corpus labels.
pub fn corpus_classes(trees: &[PropagationTree]) -> Result<usize, TrainError> {
    trees
        .iter()
        .filter_map(|t| t.label)
        .max()
        .map(|m| m + 1)
        .ok_or(TrainError::NoLabels)
}

fn corpus_feature_dim(trees: &[PropagationTree]) -> Result<usize, TrainError> {
    let first = trees
        .first()
        .map(|t| t.features().cols())
        .ok_or(TrainError::EmptySplit)?;
    for tree in trees {
        if tree.features().cols() != first {
            return Err(TrainError::FeatureWidth {
                first,
                other: tree.features().cols(),
            });
        }
    }
    Ok(first)
}

/// One graph in a batch: the untouched tree and, when augmentation is
/// active, its two sampled views.
pub struct GraphBatchItem<'a> {
    pub tree: &'a PropagationTree,
    pub views: Option<(AugmentedView, AugmentedView)>,
}

struct ItemForward {
    trace: crate::encoder::ForwardTrace,
    logits: Vec<f64>,
    label: usize,
    view_traces: Option<(crate::encoder::ForwardTrace, crate::encoder::ForwardTrace)>,
}

fn forward_item(
    item: &GraphBatchItem<'_>,
    params: &EncoderParams,
    direction: Direction,
) -> Result<ItemForward, TrainError> {
    let label = item
        .tree
        .label
        .ok_or_else(|| TrainError::MissingLabel(item.tree.claim_id.clone()))?;
    let edges = build_view(item.tree, direction).edges;
    let trace = gcn_forward(item.tree.features(), &edges, params)?;
    let (logits, _) = classify(&trace.embedding, params);
    let view_traces = match &item.views {
        Some((v1, v2)) => Some((
            gcn_forward(&v1.features, &v1.oriented_edges(direction), params)?,
            gcn_forward(&v2.features, &v2.oriented_edges(direction), params)?,
        )),
        None => None,
    };
    Ok(ItemForward {
        trace,
        logits,
        label,
        view_traces,
    })
}

/// Forward-only batch objective; the finite-difference oracle drives this.
pub fn batch_loss(
    items: &[GraphBatchItem<'_>],
    params: &EncoderParams,
    lambda: f64,
    tau: f64,
    direction: Direction,
) -> Result<LossBreakdown, TrainError> {
    if items.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let forwards: Vec<ItemForward> = items
        .iter()
        .map(|item| forward_item(item, params, direction))
        .collect::<Result<_, _>>()?;
    let l_sup = forwards
        .iter()
        .map(|f| nll_from_logits(&f.logits, f.label).0)
        .sum::<f64>()
        / forwards.len() as f64;
    let with_views = forwards.iter().filter(|f| f.view_traces.is_some()).count();
    let l_unsup = if with_views == forwards.len() && forwards.len() >= 2 {
        let first: Vec<Vec<f64>> = forwards
            .iter()
            .map(|f| f.view_traces.as_ref().unwrap().0.embedding.clone())
            .collect();
        let second: Vec<Vec<f64>> = forwards
            .iter()
            .map(|f| f.view_traces.as_ref().unwrap().1.embedding.clone())
            .collect();
        contrastive_loss(&first, &second, tau)?
    } else {
        0.0
    };
    Ok(total_loss(l_sup, l_unsup, lambda))
}

/// Batch objective and its gradient for every encoder parameter. Per-graph
/// passes run in parallel; the final reduction is index-ordered.
pub fn batch_gradient(
    items: &[GraphBatchItem<'_>],
    params: &EncoderParams,
    lambda: f64,
    tau: f64,
    direction: Direction,
) -> Result<(LossBreakdown, Gradients), TrainError> {
    if items.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let forwards: Vec<Result<ItemForward, TrainError>> =
        par::map_ordered(items, |item| forward_item(item, params, direction));
    let forwards: Vec<ItemForward> = forwards.into_iter().collect::<Result<_, _>>()?;
    let batch = forwards.len();
    let inv_batch = 1.0 / batch as f64;

    let mut l_sup = 0.0;
    let mut d_logits: Vec<Vec<f64>> = Vec::with_capacity(batch);
    for fwd in &forwards {
        let (loss, mut grad) = nll_from_logits(&fwd.logits, fwd.label);
        l_sup += loss * inv_batch;
        grad.iter_mut().for_each(|g| *g *= inv_batch);
        d_logits.push(grad);
    }

    let contrastive_active =
        lambda != 0.0 && batch >= 2 && forwards.iter().all(|f| f.view_traces.is_some());
    let (l_unsup, view_grads) = if forwards.iter().all(|f| f.view_traces.is_some()) && batch >= 2 {
        let first: Vec<Vec<f64>> = forwards
            .iter()
            .map(|f| f.view_traces.as_ref().unwrap().0.embedding.clone())
            .collect();
        let second: Vec<Vec<f64>> = forwards
            .iter()
            .map(|f| f.view_traces.as_ref().unwrap().1.embedding.clone())
            .collect();
        if contrastive_active {
            let (loss, d_first, d_second) = contrastive_loss_grad(&first, &second, tau)?;
            (loss, Some((d_first, d_second)))
        } else {
            (contrastive_loss(&first, &second, tau)?, None)
        }
    } else {
        (0.0, None)
    };

    let indices: Vec<usize> = (0..batch).collect();
    let per_item: Vec<Gradients> = par::map_ordered(&indices, |&i| {
        let fwd = &forwards[i];
        let mut grads = Gradients::zeros_like(params);
        let (head_grads, d_embedding) = head_backward(&fwd.trace.embedding, &d_logits[i], params);
        grads.head = head_grads;
        let (layer_grads, _) = backward_from_embedding(&fwd.trace, params, &d_embedding);
        for (acc, g) in grads.layers.iter_mut().zip(layer_grads) {
            acc.add_assign(&g);
        }
        if let (Some((d_first, d_second)), Some((t1, t2))) =
            (view_grads.as_ref(), fwd.view_traces.as_ref())
        {
            let scaled_1: Vec<f64> = d_first[i].iter().map(|g| g * lambda).collect();
            let scaled_2: Vec<f64> = d_second[i].iter().map(|g| g * lambda).collect();
            let (g1, _) = backward_from_embedding(t1, params, &scaled_1);
            let (g2, _) = backward_from_embedding(t2, params, &scaled_2);
            for (acc, g) in grads.layers.iter_mut().zip(g1) {
                acc.add_assign(&g);
            }
            for (acc, g) in grads.layers.iter_mut().zip(g2) {
                acc.add_assign(&g);
            }
        }
        grads
    });
    let mut grads = Gradients::zeros_like(params);
    for item in &per_item {
        grads.add_assign(item);
    }
    Ok((total_loss(l_sup, l_unsup, lambda), grads))
}

/// One epoch's logged losses and validation accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_accuracy: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: EncoderParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Trains the encoder on `splits.train`, selecting on `splits.val`.
pub fn train(
    trees: &[PropagationTree],
    splits: &Splits,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let input_dim = corpus_feature_dim(trees)?;
    let classes = corpus_classes(trees)?;
    let encoder_config = EncoderConfig {
        input_dim,
        hidden_dims: config.hidden_dims.clone(),
        classes,
    };
    let mut params = EncoderParams::init(encoder_config, derive_seed(seed, 0xA11))?;

    // Plans are per-tree constants; build them once.
    let planners: Vec<Option<AugmentPlanner>> = match &config.augment {
        Some(aug) => {
            let built: Vec<Result<AugmentPlanner, AugmentError>> =
                par::map_ordered(&splits.train, |&idx| AugmentPlanner::new(&trees[idx], aug));
            let mut planners = vec![None; trees.len()];
            for (&idx, planner) in splits.train.iter().zip(built) {
                planners[idx] = Some(planner?);
            }
            planners
        }
        None => vec![None; trees.len()],
    };

    let mut best: Option<(f64, f64, usize, EncoderParams)> = None;
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order = splits.train.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xE70C ^ epoch as u64));
        for i in (1..order.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            order.swap(i, j);
        }

        let mut sup_sum = 0.0;
        let mut unsup_sum = 0.0;
        let mut total_sum = 0.0;
        let mut counted = 0usize;
        for batch in order.chunks(config.batch_size) {
            let items: Vec<GraphBatchItem<'_>> = batch
                .iter()
                .map(|&idx| {
                    let views = planners[idx].as_ref().map(|planner| {
                        let view_seed = seed ^ idx as u64 ^ epoch as u64;
                        planner.views(&trees[idx], view_seed)
                    });
                    GraphBatchItem {
                        tree: &trees[idx],
                        views,
                    }
                })
                .collect();
            let (breakdown, grads) =
                batch_gradient(&items, &params, config.lambda, config.tau, config.direction)?;
            if !breakdown.total.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    value: breakdown.total,
                });
            }
            sgd_step(&mut params, &grads, config.learning_rate);
            let weight = batch.len() as f64;
            sup_sum += breakdown.l_sup * weight;
            unsup_sum += breakdown.l_unsup * weight;
            total_sum += breakdown.total * weight;
            counted += batch.len();
        }
        let scale = 1.0 / counted as f64;
        let epoch_loss = LossBreakdown {
            l_sup: sup_sum * scale,
            l_unsup: unsup_sum * scale,
            lambda: config.lambda,
            total: total_sum * scale,
        };

        let (val_accuracy, val_loss) = validation_scores(trees, &splits.val, &params, config)?;
        log.push(EpochLog {
            epoch,
            loss: epoch_loss,
            val_accuracy,
            val_loss,
        });

        let improved = match &best {
            None => true,
            Some((acc, loss, _, _)) => {
                val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss)
            }
        };
        if improved {
            best = Some((val_accuracy, val_loss, epoch, params.clone()));
        }
        let best_epoch = best.as_ref().expect("set above").2;
        if epoch - best_epoch >= config.early_stop_patience {
            break;
        }
    }
    let (best_val_accuracy, _, best_epoch, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params: best_params,
        log,
        best_epoch,
        best_val_accuracy,
    })
}

fn validation_scores(
    trees: &[PropagationTree],
    indices: &[usize],
    params: &EncoderParams,
    config: &TrainConfig,
) -> Result<(f64, f64), TrainError> {
    let metrics = evaluate(params, trees, indices, config.direction)?;
    let losses: Vec<Result<f64, TrainError>> = par::map_ordered(indices, |&idx| {
        let tree = &trees[idx];
        let label = tree
            .label
            .ok_or_else(|| TrainError::MissingLabel(tree.claim_id.clone()))?;
        let edges = build_view(tree, config.direction).edges;
        let trace = gcn_forward(tree.features(), &edges, params)?;
        let (logits, _) = classify(&trace.embedding, params);
        Ok(nll_from_logits(&logits, label).0)
    });
    let mut total = 0.0;
    for loss in losses {
        total += loss?;
    }
    Ok((metrics.accuracy, total / indices.len() as f64))
}

/// Deterministic confusion-matrix evaluation of one split.
pub fn evaluate(
    params: &EncoderParams,
    trees: &[PropagationTree],
    indices: &[usize],
    direction: Direction,
) -> Result<EvalMetrics, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let classes = params.config.classes;
    let outcomes: Vec<Result<(usize, usize), TrainError>> = par::map_ordered(indices, |&idx| {
        let tree = &trees[idx];
        let label = tree
            .label
            .ok_or_else(|| TrainError::MissingLabel(tree.claim_id.clone()))?;
        let edges = build_view(tree, direction).edges;
        let trace = gcn_forward(tree.features(), &edges, params)?;
        let (logits, _) = classify(&trace.embedding, params);
        let predicted = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
            .map(|(c, _)| c)
            .expect("at least one class");
        Ok((label, predicted))
    });
    let mut confusion = vec![vec![0usize; classes]; classes];
    for outcome in outcomes {
        let (label, predicted) = outcome?;
        confusion[label][predicted] += 1;
    }
    Ok(EvalMetrics::from_confusion(confusion))
}
