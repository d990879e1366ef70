//! Finite-difference verification of the end-to-end gradient.
//!
//! The loss landscape is probed with central differences around the current
//! parameters: the forward-only objective (`train::batch_loss`) supplies the
//! numerator while `train::batch_gradient` supplies the analytic values, so
//! the two sides share no backward code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::AugmentConfig;
use crate::augment::AugmentPlanner;
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::hashing::derive_seed;
use crate::synth::random_tree;
use crate::train::{batch_gradient, batch_loss, GraphBatchItem, TrainError};
use crate::tree::{Direction, PropagationTree};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub worst: f64,
    pub step: f64,
    pub graphs: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst < tolerance
    }
}

fn relative_error(numeric: f64, analytic: f64) -> f64 {
    let scale = numeric.abs().max(analytic.abs());
    // Central differences carry ~1e-11 absolute noise at unit-scale losses;
    // below that the comparison is vacuous.
    if scale < 1e-7 {
        return 0.0;
    }
    (numeric - analytic).abs() / scale
}

/// Builds a small random batch (graphs of ≤ `max_nodes` nodes, fixed views)
/// and compares the analytic gradient of the combined objective against
/// central finite differences for every parameter.
pub fn run_gradcheck(
    seed: u64,
    graphs: usize,
    max_nodes: usize,
    step: f64,
) -> Result<GradCheckReport, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature_dim = 4;
    let mut trees: Vec<PropagationTree> = Vec::with_capacity(graphs);
    for i in 0..graphs {
        let mut tree = random_tree(&mut rng, max_nodes, feature_dim);
        // Random binary labels.
        tree.label = Some((rng.gen::<u32>() % 2) as usize);
        tree.claim_id = format!("gradcheck-{i}");
        trees.push(tree);
    }

    let lambda = 0.7;
    let tau = 1.0;
    let direction = Direction::TopDown;
    let aug = AugmentConfig::default();
    let views: Vec<_> = trees
        .iter()
        .enumerate()
        .map(|(i, tree)| {
            let planner = AugmentPlanner::new(tree, &aug)?;
            Ok(planner.views(tree, derive_seed(seed, 0xF1ED ^ i as u64)))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;

    let items: Vec<GraphBatchItem<'_>> = trees
        .iter()
        .zip(views)
        .map(|(tree, views)| GraphBatchItem {
            tree,
            views: Some(views),
        })
        .collect();

    let params = EncoderParams::init(
        EncoderConfig {
            input_dim: feature_dim,
            hidden_dims: vec![8, 6],
            classes: 2,
        },
        derive_seed(seed, 0xBEE),
    )?;
    let (_, grads) = batch_gradient(&items, &params, lambda, tau, direction)?;

    let loss_at = |p: &EncoderParams| -> Result<f64, TrainError> {
        Ok(batch_loss(&items, p, lambda, tau, direction)?.total)
    };

    let mut entries = Vec::new();
    let mut worst = 0.0f64;
    let mut check_tensor =
        |name: String,
         read: &dyn Fn(&EncoderParams) -> Vec<f64>,
         write: &dyn Fn(&mut EncoderParams, usize, f64),
         analytic: &[f64]|
         -> Result<(), TrainError> {
            let baseline = read(&params);
            let mut max_rel = 0.0f64;
            for idx in 0..baseline.len() {
                let mut plus = params.clone();
                write(&mut plus, idx, baseline[idx] + step);
                let mut minus = params.clone();
                write(&mut minus, idx, baseline[idx] - step);
                let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * step);
                max_rel = max_rel.max(relative_error(numeric, analytic[idx]));
            }
            worst = worst.max(max_rel);
            entries.push(GradCheckEntry {
                tensor: name,
                max_rel_error: max_rel,
                checked: baseline.len(),
            });
            Ok(())
        };

    for l in 0..params.layers.len() {
        check_tensor(
            format!("layer{l}.weight"),
            &move |p: &EncoderParams| p.layers[l].weight.data().to_vec(),
            &move |p: &mut EncoderParams, idx, v| p.layers[l].weight.data_mut()[idx] = v,
            grads.layers[l].weight.data(),
        )?;
        check_tensor(
            format!("layer{l}.bias"),
            &move |p: &EncoderParams| p.layers[l].bias.clone(),
            &move |p: &mut EncoderParams, idx, v| p.layers[l].bias[idx] = v,
            &grads.layers[l].bias,
        )?;
    }
    check_tensor(
        "head.weight".to_string(),
        &|p: &EncoderParams| p.head.weight.data().to_vec(),
        &|p: &mut EncoderParams, idx, v| p.head.weight.data_mut()[idx] = v,
        grads.head.weight.data(),
    )?;
    check_tensor(
        "head.bias".to_string(),
        &|p: &EncoderParams| p.head.bias.clone(),
        &|p: &mut EncoderParams, idx, v| p.head.bias[idx] = v,
        &grads.head.bias,
    )?;

    Ok(GradCheckReport {
        entries,
        worst,
        step,
        graphs,
    })
}
