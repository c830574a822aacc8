//! Synthetic rank-recovery experiment.
//!
//! Measures how accurately each rank derivation reproduces true sort ranks
//! on random score vectors, reported as the average (over vectors) of the
//! L1 distance between derived and true ranks. Three methods are compared:
//!
//! * `smooth` — sigmoid-approximated ranks, one row per steepness value;
//!   accuracy improves as the steepness grows, but never reaches zero.
//! * `hard` — hard pairwise comparisons without tie-breaking (tied scores
//!   share a rank), which is exact whenever scores are distinct.
//! * `hard-tiebreak` — hard comparisons with seeded random tie-breaking,
//!   which returns a true permutation even under ties.
//!
//! Scores are uniform in `[0, 1)`, mimicking `v1` queries of `v2`
//! documents each.

use super::{mix_seed, STREAM_TIES};
use crate::data::generate_uniform_vectors;
use crate::error::{Error, Result};
use crate::ranking::{competition_ranks, l1_rank_loss, rank_minus, rank_plus, true_ranks};

/// Shape and randomness of the synthetic rank-recovery run.
#[derive(Debug, Clone)]
pub struct RankExpConfig {
    /// Number of score vectors ("queries").
    pub v1: usize,
    /// Values per vector ("documents").
    pub v2: usize,
    /// Steepness values for the smooth method, one result row each.
    pub alphas: Vec<f64>,
    pub seed: u64,
}

/// One line of the experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct RankExpRow {
    pub method: String,
    /// Steepness for `smooth` rows; `None` for the hard methods.
    pub alpha: Option<f64>,
    pub v1: usize,
    pub v2: usize,
    /// Average over vectors of the summed absolute rank error.
    pub mean_l1: f64,
}

/// Run the experiment: one `smooth` row per steepness, then the two hard
/// rows.
pub fn rank_accuracy_experiment(cfg: &RankExpConfig) -> Result<Vec<RankExpRow>> {
    if cfg.v1 < 1 || cfg.v2 < 1 {
        return Err(Error::Config(format!(
            "experiment shape must be at least 1x1, got {}x{}",
            cfg.v1, cfg.v2
        )));
    }
    if cfg.alphas.is_empty() {
        return Err(Error::Config("at least one steepness value is required".into()));
    }
    if let Some(&bad) = cfg.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::Config(format!(
            "steepness values must be positive and finite, got {bad}"
        )));
    }

    let vectors = generate_uniform_vectors(cfg.v1, cfg.v2, cfg.seed);
    let references: Vec<Vec<f64>> = vectors.iter().map(|z| true_ranks(z)).collect();
    let mean_l1 = |ranks_of: &mut dyn FnMut(usize, &[f64]) -> Vec<f64>| -> f64 {
        let total: f64 = vectors
            .iter()
            .zip(&references)
            .enumerate()
            .map(|(i, (z, r))| l1_rank_loss(&ranks_of(i, z), r))
            .sum();
        total / cfg.v1 as f64
    };

    let mut rows = Vec::with_capacity(cfg.alphas.len() + 2);
    for &alpha in &cfg.alphas {
        rows.push(RankExpRow {
            method: "smooth".into(),
            alpha: Some(alpha),
            v1: cfg.v1,
            v2: cfg.v2,
            mean_l1: mean_l1(&mut |_, z| rank_minus(z, alpha)),
        });
    }
    rows.push(RankExpRow {
        method: "hard".into(),
        alpha: None,
        v1: cfg.v1,
        v2: cfg.v2,
        mean_l1: mean_l1(&mut |_, z| competition_ranks(z)),
    });
    rows.push(RankExpRow {
        method: "hard-tiebreak".into(),
        alpha: None,
        v1: cfg.v1,
        v2: cfg.v2,
        mean_l1: mean_l1(&mut |i, z| {
            rank_plus(z, mix_seed(cfg.seed, STREAM_TIES, i as u64))
                .ranks()
                .to_vec()
        }),
    });
    Ok(rows)
}

/// CSV rendering: `method,alpha,v1,v2,mean_l1` with an empty steepness
/// field on the hard rows.
pub fn rankexp_csv(rows: &[RankExpRow]) -> String {
    let mut out = String::from("method,alpha,v1,v2,mean_l1\n");
    for r in rows {
        let alpha = r.alpha.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{alpha},{},{},{}\n",
            r.method, r.v1, r.v2, r.mean_l1
        ));
    }
    out
}
