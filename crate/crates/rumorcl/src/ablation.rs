//! Sweep harness: trains and evaluates one configuration per grid cell over
//! all split seeds and reports mean ± std accuracy.
//!
//! Four axes are understood: `alpha` (strip that fraction of unresponded
//! 1-level replies before training), `aug` (none / random / adaptive, or an
//! explicit operator pair), `centrality` (the measure steering adaptive
//! augmentation, with per-tree timing recorded), and `direction`
//! (message-passing orientation). A grid is the cross-product of its axes.

use crate::augment::{AugmentConfig, AugmentStrategy, Augmentation};
use crate::centrality::{timed_centrality, CentralityKind, CentralityMeasure};
use crate::hashing::derive_seed;
use crate::par;
use crate::stats::strip_unresponded;
use crate::train::{evaluate, make_splits, summarize, train, MetricSummary, TrainConfig, TrainError};
use crate::tree::{Direction, PropagationTree};

#[derive(Debug, thiserror::Error)]
pub enum AblationError {
    #[error("unknown grid axis {0:?} (expected alpha, aug, centrality, or direction)")]
    UnknownAxis(String),
    #[error("invalid value {value:?} for axis {axis}: {message}")]
    InvalidValue {
        axis: &'static str,
        value: String,
        message: String,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
}

/// Augmentation modes comparable in one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugMode {
    /// Plain supervised training, no views, no contrastive term.
    None,
    /// Uniform probabilities at the configured rates.
    Random(Augmentation, Augmentation),
    /// Centrality-guided probabilities.
    Adaptive(Augmentation, Augmentation),
}

impl AugMode {
    pub fn parse(value: &str, base: &AugmentConfig) -> Result<AugMode, AblationError> {
        let invalid = |message: String| AblationError::InvalidValue {
            axis: "aug",
            value: value.to_string(),
            message,
        };
        let parse_op = |s: &str| -> Result<Augmentation, AblationError> {
            match s {
                "node_drop" => Ok(Augmentation::NodeDrop),
                "attr_mask" => Ok(Augmentation::AttrMask),
                "edge_drop" => Ok(Augmentation::EdgeDrop),
                other => Err(invalid(format!("unknown operator {other:?}"))),
            }
        };
        let parse_pair = |s: &str| -> Result<(Augmentation, Augmentation), AblationError> {
            let mut parts = s.split('+');
            let first = parse_op(parts.next().ok_or_else(|| invalid("missing operator".into()))?)?;
            let second = parse_op(parts.next().ok_or_else(|| invalid("expected two operators joined by '+'".into()))?)?;
            if parts.next().is_some() {
                return Err(invalid("expected exactly two operators".into()));
            }
            Ok((first, second))
        };
        match value {
            "none" => Ok(AugMode::None),
            "random" => Ok(AugMode::Random(base.operators.0, base.operators.1)),
            "adaptive" => Ok(AugMode::Adaptive(base.operators.0, base.operators.1)),
            other => {
                if let Some(pair) = other.strip_prefix("random:") {
                    let (a, b) = parse_pair(pair)?;
                    Ok(AugMode::Random(a, b))
                } else {
                    let (a, b) = parse_pair(other)?;
                    Ok(AugMode::Adaptive(a, b))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            AugMode::None => "none".to_string(),
            AugMode::Random(a, b) => format!("random:{a}+{b}"),
            AugMode::Adaptive(a, b) => format!("{a}+{b}"),
        }
    }

    /// Applies the mode to a config.
    pub fn apply(&self, config: &mut TrainConfig) {
        let base = config.augment.unwrap_or_default();
        match self {
            AugMode::None => {
                config.augment = None;
                config.lambda = 0.0;
            }
            AugMode::Random(a, b) => {
                config.augment = Some(AugmentConfig {
                    operators: (*a, *b),
                    strategy: AugmentStrategy::Random,
                    ..base
                });
            }
            AugMode::Adaptive(a, b) => {
                config.augment = Some(AugmentConfig {
                    operators: (*a, *b),
                    strategy: AugmentStrategy::Adaptive,
                    ..base
                });
            }
        }
    }
}

/// One grid cell before expansion into a config.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub alpha: Option<f64>,
    pub aug: Option<String>,
    pub centrality: Option<CentralityKind>,
    pub direction: Option<Direction>,
}

impl CellSpec {
    fn empty() -> Self {
        CellSpec {
            alpha: None,
            aug: None,
            centrality: None,
            direction: None,
        }
    }

    pub fn settings(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(alpha) = self.alpha {
            out.push(("alpha".to_string(), format!("{alpha}")));
        }
        if let Some(aug) = &self.aug {
            out.push(("aug".to_string(), aug.clone()));
        }
        if let Some(kind) = self.centrality {
            out.push(("centrality".to_string(), kind.to_string()));
        }
        if let Some(direction) = self.direction {
            out.push(("direction".to_string(), direction.to_string()));
        }
        out
    }
}

/// Expands `axis=v1,v2,...` declarations into the cross-product of cells,
/// in declaration order (last axis varies fastest).
pub fn cross_product(axes: &[(String, Vec<String>)]) -> Result<Vec<CellSpec>, AblationError> {
    let mut cells = vec![CellSpec::empty()];
    for (axis, values) in axes {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for value in values {
                let mut expanded = cell.clone();
                match axis.as_str() {
                    "alpha" => {
                        let alpha: f64 = value.parse().map_err(|_| AblationError::InvalidValue {
                            axis: "alpha",
                            value: value.clone(),
                            message: "expected a number in [0,1]".into(),
                        })?;
                        expanded.alpha = Some(alpha);
                    }
                    "aug" => {
                        expanded.aug = Some(value.clone());
                    }
                    "centrality" => {
                        expanded.centrality = Some(parse_centrality(value)?);
                    }
                    "direction" => {
                        expanded.direction = Some(parse_direction(value)?);
                    }
                    other => return Err(AblationError::UnknownAxis(other.to_string())),
                }
                next.push(expanded);
            }
        }
        cells = next;
    }
    Ok(cells)
}

pub fn parse_centrality(value: &str) -> Result<CentralityKind, AblationError> {
    match value {
        "degree" => Ok(CentralityKind::Degree),
        "betweenness" => Ok(CentralityKind::Betweenness),
        "pagerank" => Ok(CentralityKind::PageRank),
        "eigenvector" => Ok(CentralityKind::Eigenvector),
        "katz" => Ok(CentralityKind::Katz),
        "closeness" => Ok(CentralityKind::Closeness),
        other => Err(AblationError::InvalidValue {
            axis: "centrality",
            value: other.to_string(),
            message: "unknown measure".into(),
        }),
    }
}

pub fn parse_direction(value: &str) -> Result<Direction, AblationError> {
    match value {
        "top_down" => Ok(Direction::TopDown),
        "bottom_up" => Ok(Direction::BottomUp),
        "undirected" => Ok(Direction::Undirected),
        other => Err(AblationError::InvalidValue {
            axis: "direction",
            value: other.to_string(),
            message: "unknown direction".into(),
        }),
    }
}

/// Accuracy summary for one configuration over all split seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub accuracy: MetricSummary,
    pub per_split: Vec<f64>,
}

/// Trains and evaluates `config` once per split seed; split runs are
/// independent and execute in parallel.
pub fn evaluate_config(
    trees: &[PropagationTree],
    config: &TrainConfig,
) -> Result<RunSummary, TrainError> {
    let labels: Vec<Option<usize>> = trees.iter().map(|t| t.label).collect();
    let outcomes: Vec<Result<f64, TrainError>> = par::map_ordered(&config.split_seeds, |&seed| {
        let splits = make_splits(&labels, config.ratios, seed)?;
        let outcome = train(trees, &splits, config, seed)?;
        let metrics = evaluate(&outcome.params, trees, &splits.test, config.direction)?;
        Ok(metrics.accuracy)
    });
    let per_split: Vec<f64> = outcomes.into_iter().collect::<Result<_, _>>()?;
    Ok(RunSummary {
        accuracy: summarize(&per_split),
        per_split,
    })
}

/// One completed grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub settings: Vec<(String, String)>,
    pub accuracy: MetricSummary,
    pub per_split: Vec<f64>,
    /// Mean seconds per tree for the cell's centrality, when the grid sweeps
    /// centralities.
    pub centrality_seconds: Option<f64>,
}

/// Runs every cell of the grid against the corpus.
pub fn run_grid(
    trees: &[PropagationTree],
    base: &TrainConfig,
    axes: &[(String, Vec<String>)],
    seed: u64,
) -> Result<Vec<CellResult>, AblationError> {
    let cells = cross_product(axes)?;
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        results.push(run_cell(trees, base, &cell, seed)?);
    }
    Ok(results)
}

/// Runs one cell: applies its settings to the base config, optionally strips
/// unresponded replies, times the centrality when swept, then trains and
/// evaluates over all split seeds.
pub fn run_cell(
    trees: &[PropagationTree],
    base: &TrainConfig,
    cell: &CellSpec,
    seed: u64,
) -> Result<CellResult, AblationError> {
    let mut config = base.clone();
    if let Some(value) = &cell.aug {
        let mode = AugMode::parse(value, &base.augment.unwrap_or_default())?;
        mode.apply(&mut config);
    }
    if let Some(kind) = cell.centrality {
        let aug = config.augment.get_or_insert_with(AugmentConfig::default);
        aug.measure = CentralityMeasure::new(kind);
    }
    if let Some(direction) = cell.direction {
        config.direction = direction;
    }

    let stripped;
    let corpus: &[PropagationTree] = match cell.alpha {
        Some(alpha) => {
            let stripped_trees: Vec<Result<PropagationTree, _>> =
                par::map_indexed(trees, |idx, tree| {
                    strip_unresponded(tree, alpha, derive_seed(seed, 0xA1FA ^ idx as u64))
                });
            stripped = stripped_trees
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            &stripped
        }
        None => trees,
    };

    let centrality_seconds = match (cell.centrality, &config.augment) {
        (Some(_), Some(aug)) => {
            let (_, mean_seconds) =
                timed_centrality(corpus, &aug.measure).map_err(AugmentErrorShim)?;
            Some(mean_seconds)
        }
        _ => None,
    };

    let summary = evaluate_config(corpus, &config)?;
    Ok(CellResult {
        settings: cell.settings(),
        accuracy: summary.accuracy,
        per_split: summary.per_split,
        centrality_seconds,
    })
}

// timed_centrality returns a CentralityError; route it through the train
// error for a single error surface here.
struct AugmentErrorShim(crate::centrality::CentralityError);

impl From<AugmentErrorShim> for AblationError {
    fn from(shim: AugmentErrorShim) -> Self {
        AblationError::Train(TrainError::Augment(shim.0.into()))
    }
}

/// The three-way comparison used to sanity-check augmentation: supervised
/// only, uniform-probability views, and centrality-guided views, everything
/// else equal.
pub fn augmentation_comparison(
    trees: &[PropagationTree],
    base: &TrainConfig,
) -> Result<[CellResult; 3], AblationError> {
    let modes = ["none", "random", "adaptive"];
    let mut out = Vec::with_capacity(3);
    for mode in modes {
        let cell = CellSpec {
            aug: Some(mode.to_string()),
            ..CellSpec::empty()
        };
        out.push(run_cell(trees, base, &cell, 0)?);
    }
    Ok(out.try_into().expect("three modes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_product_is_exhaustive_and_ordered() {
        let axes = vec![
            ("alpha".to_string(), vec!["0".to_string(), "0.5".to_string()]),
            (
                "direction".to_string(),
                vec!["top_down".to_string(), "bottom_up".to_string(), "undirected".to_string()],
            ),
        ];
        let cells = cross_product(&axes).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].alpha, Some(0.0));
        assert_eq!(cells[0].direction, Some(Direction::TopDown));
        assert_eq!(cells[5].alpha, Some(0.5));
        assert_eq!(cells[5].direction, Some(Direction::Undirected));
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let axes = vec![("widgets".to_string(), vec!["1".to_string()])];
        assert!(matches!(
            cross_product(&axes),
            Err(AblationError::UnknownAxis(_))
        ));
    }

    #[test]
    fn aug_modes_parse_and_label() {
        let base = AugmentConfig::default();
        assert_eq!(AugMode::parse("none", &base).unwrap(), AugMode::None);
        assert_eq!(
            AugMode::parse("random", &base).unwrap(),
            AugMode::Random(Augmentation::NodeDrop, Augmentation::EdgeDrop)
        );
        let explicit = AugMode::parse("node_drop+attr_mask", &base).unwrap();
        assert_eq!(
            explicit,
            AugMode::Adaptive(Augmentation::NodeDrop, Augmentation::AttrMask)
        );
        assert_eq!(explicit.label(), "node_drop+attr_mask");
        let random_pair = AugMode::parse("random:attr_mask+edge_drop", &base).unwrap();
        assert_eq!(
            random_pair,
            AugMode::Random(Augmentation::AttrMask, Augmentation::EdgeDrop)
        );
        assert!(AugMode::parse("node_drop", &base).is_err());
        assert!(AugMode::parse("node_drop+spoon", &base).is_err());
    }

    #[test]
    fn none_mode_disables_contrast() {
        let mut config = TrainConfig::default();
        AugMode::None.apply(&mut config);
        assert!(config.augment.is_none());
        assert_eq!(config.lambda, 0.0);
    }
}
