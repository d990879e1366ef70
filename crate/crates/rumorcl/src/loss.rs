//! Cosine similarity, the in-batch contrastive objective over view pairs,
//! the supervised negative log-likelihood, and their combination.
//!
//! The contrastive term for a batch of B embedding pairs (h1ᵢ, h2ᵢ) is
//!
//! ```text
//! mean_i [ −sim(h1ᵢ,h2ᵢ)/τ + log( mean_{j≠i} exp(sim(h1ᵢ,h2ⱼ)/τ) )
//!                           + log( mean_{j≠i} exp(sim(h1ⱼ,h2ᵢ)/τ) ) ]
//! ```
//!
//! i.e. the expectation over negatives is estimated by the other in-batch
//! pairs, averaged (not summed) inside the log so batch size does not shift
//! the loss scale. τ defaults to 1.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm};

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("contrastive loss needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("embedding lengths disagree within the batch")]
    LengthMismatch,
    #[error("item {index} has no label")]
    MissingLabel { index: usize },
    #[error("empty batch")]
    EmptyBatch,
}

/// Cosine similarity in [−1, 1]. A zero vector is degenerate; the similarity
/// is defined as 0 and a warning is logged.
pub fn cosine_sim(x: &[f64], y: &[f64]) -> f64 {
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        log::warn!("cosine similarity of a zero vector; returning 0");
        return 0.0;
    }
    dot(x, y) / (nx * ny)
}

/// ∂ cos(x,y)/∂x; zero when either vector is zero.
fn cosine_grad_x(x: &[f64], y: &[f64]) -> Vec<f64> {
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return vec![0.0; x.len()];
    }
    let c = dot(x, y) / (nx * ny);
    x.iter()
        .zip(y)
        .map(|(&xv, &yv)| yv / (nx * ny) - c * xv / (nx * nx))
        .collect()
}

fn sim_matrix(first: &[Vec<f64>], second: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LossError> {
    let b = first.len();
    let dim = first[0].len();
    if first.iter().chain(second.iter()).any(|h| h.len() != dim) {
        return Err(LossError::LengthMismatch);
    }
    Ok((0..b)
        .map(|i| (0..b).map(|j| cosine_sim(&first[i], &second[j])).collect())
        .collect())
}

/// Contrastive loss over a batch of view-embedding pairs.
pub fn contrastive_loss(
    first: &[Vec<f64>],
    second: &[Vec<f64>],
    tau: f64,
) -> Result<f64, LossError> {
    let b = first.len();
    if b < 2 || second.len() != b {
        return Err(LossError::BatchTooSmall(b.min(second.len())));
    }
    let sims = sim_matrix(first, second)?;
    let m = (b - 1) as f64;
    let mut total = 0.0;
    for i in 0..b {
        let mut row = 0.0;
        let mut col = 0.0;
        for j in 0..b {
            if j == i {
                continue;
            }
            row += (sims[i][j] / tau).exp();
            col += (sims[j][i] / tau).exp();
        }
        total += -sims[i][i] / tau + (row / m).ln() + (col / m).ln();
    }
    Ok(total / b as f64)
}

/// Contrastive loss plus its gradients w.r.t. every embedding in the batch.
pub fn contrastive_loss_grad(
    first: &[Vec<f64>],
    second: &[Vec<f64>],
    tau: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>), LossError> {
    let b = first.len();
    if b < 2 || second.len() != b {
        return Err(LossError::BatchTooSmall(b.min(second.len())));
    }
    let sims = sim_matrix(first, second)?;
    let m = (b - 1) as f64;
    let exps: Vec<Vec<f64>> = sims
        .iter()
        .map(|row| row.iter().map(|&s| (s / tau).exp()).collect())
        .collect();
    let row_sums: Vec<f64> = (0..b)
        .map(|i| (0..b).filter(|&j| j != i).map(|j| exps[i][j]).sum())
        .collect();
    let col_sums: Vec<f64> = (0..b)
        .map(|j| (0..b).filter(|&i| i != j).map(|i| exps[i][j]).sum())
        .collect();

    let mut loss = 0.0;
    for i in 0..b {
        loss += -sims[i][i] / tau + (row_sums[i] / m).ln() + (col_sums[i] / m).ln();
    }
    loss /= b as f64;

    // dL/dS[i][j]: the positive pair appears only on the diagonal; an
    // off-diagonal similarity appears in row i's log and column j's log.
    let mut d_sims = vec![vec![0.0; b]; b];
    let scale = 1.0 / (b as f64 * tau);
    for i in 0..b {
        for j in 0..b {
            d_sims[i][j] = if i == j {
                -scale
            } else {
                scale * (exps[i][j] / row_sums[i] + exps[i][j] / col_sums[j])
            };
        }
    }

    let dim = first[0].len();
    let mut d_first = vec![vec![0.0; dim]; b];
    let mut d_second = vec![vec![0.0; dim]; b];
    for i in 0..b {
        for j in 0..b {
            let g = d_sims[i][j];
            if g == 0.0 {
                continue;
            }
            for (slot, v) in d_first[i].iter_mut().zip(cosine_grad_x(&first[i], &second[j])) {
                *slot += g * v;
            }
            for (slot, v) in d_second[j].iter_mut().zip(cosine_grad_x(&second[j], &first[i])) {
                *slot += g * v;
            }
        }
    }
    Ok((loss, d_first, d_second))
}

/// Per-item negative log-likelihood and its logit gradient (softmax − onehot).
pub fn nll_from_logits(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let log_total = total.ln() + max;
    let loss = log_total - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|&e| e / total).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Mean negative log-likelihood over a labelled batch of logits.
pub fn supervised_loss(
    logits: &[Vec<f64>],
    labels: &[Option<usize>],
) -> Result<f64, LossError> {
    if logits.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let mut total = 0.0;
    for (index, (row, label)) in logits.iter().zip(labels).enumerate() {
        let label = label.ok_or(LossError::MissingLabel { index })?;
        total += nll_from_logits(row, label).0;
    }
    Ok(total / logits.len() as f64)
}

/// The combined objective: supervised loss plus λ times the contrastive
/// regulariser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_sup: f64,
    pub l_unsup: f64,
    pub lambda: f64,
    pub total: f64,
}

pub fn total_loss(l_sup: f64, l_unsup: f64, lambda: f64) -> LossBreakdown {
    LossBreakdown {
        l_sup,
        l_unsup,
        lambda,
        total: l_sup + lambda * l_unsup,
    }
}
