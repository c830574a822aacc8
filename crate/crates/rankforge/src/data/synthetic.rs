//! Seeded synthetic data: uniform score vectors for the rank-accuracy
//! experiment and rankable feature datasets for training sanity checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, QueryGroup};
use crate::metrics::GRADE_MAX;
use crate::numerics::DenseMatrix;

/// `count` vectors of `dim` values drawn uniformly from `[0, 1)`.
pub fn generate_uniform_vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

/// Synthetic ranking dataset: features are uniform in `[0, 1)`, labels
/// come from a fixed linear scoring function binned per query into the
/// five grades by within-query quantile.  With `noise = 0` the generating
/// linear function ranks every query perfectly; with `noise > 0` each
/// label is independently resampled uniformly from the grade range with
/// that probability.
pub fn generate_synthetic_ranking_data(
    n_queries: usize,
    docs_per_query: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Dataset {
    assert!(n_queries >= 1 && docs_per_query >= 1 && dim >= 1, "degenerate shape");
    assert!((0.0..=1.0).contains(&noise), "noise must be a probability");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // The hidden scoring function, fixed for the whole dataset.
    let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let n_grades = (GRADE_MAX + 1) as usize;
    let mut groups = Vec::with_capacity(n_queries);
    for q in 0..n_queries {
        let mut features = DenseMatrix::zeros(docs_per_query, dim);
        let mut true_scores = Vec::with_capacity(docs_per_query);
        for r in 0..docs_per_query {
            let row = features.row_mut(r);
            for v in row.iter_mut() {
                *v = rng.gen::<f64>();
            }
            true_scores.push(
                row.iter()
                    .zip(&weights)
                    .map(|(x, w)| x * w)
                    .sum::<f64>(),
            );
        }
        // Quantile binning: documents ordered by true score split into
        // five grade bands, so labels are monotone in the true score.
        let mut order: Vec<usize> = (0..docs_per_query).collect();
        order.sort_by(|&a, &b| true_scores[a].partial_cmp(&true_scores[b]).unwrap());
        let mut labels = vec![0u32; docs_per_query];
        for (pos, &doc) in order.iter().enumerate() {
            labels[doc] = ((n_grades * pos) / docs_per_query) as u32;
        }
        for label in &mut labels {
            if noise > 0.0 && rng.gen::<f64>() < noise {
                *label = rng.gen_range(0..=GRADE_MAX);
            }
        }
        groups.push(QueryGroup {
            qid: format!("{}", q + 1),
            labels,
            features,
        });
    }
    Dataset {
        groups,
        dim,
        grade_max: GRADE_MAX,
    }
}

/// The generating linear score of each document in a group (test helper
/// for checking separability); recomputes the weights from the seed.
#[cfg(test)]
fn linear_scores_for_seed(group: &QueryGroup, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (0..group.len())
        .map(|r| {
            group
                .features
                .row(r)
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum()
        })
        .collect()
}
