//! Rumor detection on propagation trees via centrality-guided graph
//! contrastive learning.
//!
//! A claim (source post plus replies) is modelled as a rooted propagation
//! tree. The library computes structural statistics over such trees, scores
//! nodes with graph centralities, derives adaptive drop/mask probabilities
//! from those scores, samples augmented views, and trains a small graph
//! convolutional encoder with a combined supervised + contrastive objective.
//!
//! The crate is organised bottom-up:
//!
//! * [`tree`] — claim parsing, validation, featurization, adjacency views
//! * [`stats`] — per-claim and corpus-level structural statistics
//! * [`centrality`] — centrality measures, root adjustment, principle checks
//! * [`augment`] — drop/mask probability plans and view sampling
//! * [`encoder`] — from-scratch GCN forward/backward with mean pooling
//! * [`loss`] — cosine similarity, contrastive and supervised objectives
//! * [`synth`] — synthetic corpora with planted ground truth
//! * [`train`] — splits, the training loop, and evaluation metrics
//! * [`ablation`] — grid sweeps over augmentation/centrality/direction/alpha
//! * [`gradcheck`] — finite-difference verification of all gradients
//! * [`cli`] — the command-line driver
//!
//! Batch operations run on rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential loops otherwise.

pub mod ablation;
pub mod augment;
pub mod centrality;
pub mod cli;
pub mod encoder;
pub mod gradcheck;
pub mod hashing;
pub mod linalg;
pub mod loss;
pub mod par;
pub mod stats;
pub mod synth;
pub mod train;
pub mod tree;

pub use augment::{AugmentConfig, AugmentStrategy, Augmentation, AugmentedView};
pub use centrality::{CentralityKind, CentralityMeasure, CentralityScores, PrincipleReport};
pub use encoder::{EncoderConfig, EncoderParams};
pub use loss::LossBreakdown;
pub use stats::{ClaimStats, CorpusStats};
pub use train::{EvalMetrics, TrainConfig};
pub use tree::{ClaimRecord, Direction, NodeRecord, PropagationTree};
