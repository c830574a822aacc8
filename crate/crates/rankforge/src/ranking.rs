//! Rank derivations from raw scores, and the surrogate gradients that
//! make them trainable.
//!
//! Two derivations of the rank vector `r` from scores `y`:
//!
//! - [`rank_plus`]: the exact one.  Each pairwise comparison is a hard
//!   step, so `r_i = 1 + |{j : y_j > y_i}|` plus a randomized resolution
//!   of exact score ties; the result is always exactly the permutation
//!   `1..=m`.  The step function's true derivative is useless (zero
//!   almost everywhere), so backward passes substitute a scaled sigmoid
//!   derivative — the forward value stays exact while gradients flow.
//! - [`rank_minus`]: the smooth approximation.  Each comparison is a
//!   sigmoid of steepness `alpha`, giving fractional ranks that approach
//!   the exact ones as `alpha` grows; [`approx_bound_check`] evaluates
//!   how fast, via the closed-form error bound
//!   `(m - 1) / (exp(delta * alpha) + 1)` where `delta` is the smallest
//!   pairwise score gap.
//!
//! Three gradient strategies for the backward substitution, in
//! increasing order of label awareness:
//!
//! - `type1`: the plain sigmoid derivative `alpha_b * s * (1 - s)` of the
//!   score difference.  Vanishes for large score gaps in *either*
//!   direction, so badly mis-ordered pairs stop learning.
//! - `type2`: `type1` times the sign of the label difference, so pairs
//!   the labels order get a direction and label-tied pairs drop out.
//! - `type3`: keeps the sign trick but replaces the bell-shaped magnitude
//!   with one-sided slopes `2 * alpha_b * (1 - s)` / `-2 * alpha_b * s`,
//!   which stay bounded away from zero on mis-ordered pairs no matter how
//!   large the gap — correctly ordered pairs still decay to zero.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;

/// How the backward pass substitutes a gradient for the step function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientStrategy {
    Type1,
    Type2,
    Type3,
}

impl std::fmt::Display for GradientStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GradientStrategy::Type1 => "type1",
            GradientStrategy::Type2 => "type2",
            GradientStrategy::Type3 => "type3",
        };
        f.write_str(s)
    }
}

impl FromStr for GradientStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "type1" => Ok(GradientStrategy::Type1),
            "type2" => Ok(GradientStrategy::Type2),
            "type3" => Ok(GradientStrategy::Type3),
            other => Err(Error::Config(format!(
                "unknown gradient strategy `{other}` (expected type1, type2, or type3)"
            ))),
        }
    }
}

/// Configuration of the exact-forward / sigmoid-backward rank
/// derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinSigmoidSpec {
    /// Steepness of the backward sigmoid.
    pub alpha_b: f64,
    pub strategy: GradientStrategy,
    /// Seed for the tie-breaking permutation of this evaluation.  Draw a
    /// fresh value per loss evaluation (the trainer mixes run seed, epoch,
    /// and step) so repeated evaluations re-randomize ties.
    pub tie_seed: u64,
}

impl TwinSigmoidSpec {
    pub fn new(alpha_b: f64, strategy: GradientStrategy, tie_seed: u64) -> Self {
        assert!(alpha_b.is_finite() && alpha_b > 0.0, "alpha_b must be positive");
        TwinSigmoidSpec {
            alpha_b,
            strategy,
            tie_seed,
        }
    }
}

/// Exact rank vector produced by [`rank_plus`]: a permutation of
/// `1..=m` stored as `f64`, plus the ascending order it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    ranks: Vec<f64>,
    ascending: Vec<usize>,
}

impl RankVector {
    /// `ranks()[i]` is the exact rank (1 = best) of document `i`.
    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    /// `ascending()[p]` is the document at rank `p + 1`.
    pub fn ascending(&self) -> &[usize] {
        &self.ascending
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Exact rank derivation with randomized tie-breaking.
///
/// `r_i = 1 + sum_{j != i} (1 - step(y_i - y_j))`: one plus the number of
/// documents that beat document `i`.  Exact score ties are resolved by a
/// random permutation drawn from `tie_seed` — the tied pair's half-step
/// is rectified up or down so that, tie-broken, `r` is exactly the
/// permutation `1..=m`.
pub fn rank_plus(y: &[f64], tie_seed: u64) -> RankVector {
    let m = y.len();
    assert!(m >= 1, "rank derivation needs at least one document");
    assert!(y.iter().all(|v| v.is_finite()), "scores must be finite");

    // Tie-break priorities: one random permutation per evaluation.  Among
    // tied documents, larger priority wins (smaller rank).
    let mut priority: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    priority.shuffle(&mut rng);

    let mut ranks = vec![0.0; m];
    let mut ascending = vec![0usize; m];
    for i in 0..m {
        let mut beaten_by = 0usize;
        for j in 0..m {
            if j == i {
                continue;
            }
            if y[j] > y[i] || (y[j] == y[i] && priority[j] > priority[i]) {
                beaten_by += 1;
            }
        }
        let rank = beaten_by + 1;
        ranks[i] = rank as f64;
        ascending[rank - 1] = i;
    }
    RankVector { ranks, ascending }
}

/// Smooth rank approximation: every hard comparison becomes a sigmoid of
/// steepness `alpha`, so `r_i = 1 + sum_{j != i} 1 / (1 + exp(alpha *
/// (y_i - y_j)))`.  Fractional, order-consistent for distinct scores, and
/// converging to the exact ranks as `alpha` grows.
pub fn rank_minus(y: &[f64], alpha: f64) -> Vec<f64> {
    assert!(alpha.is_finite() && alpha > 0.0, "alpha must be positive");
    assert!(y.iter().all(|v| v.is_finite()), "scores must be finite");
    let m = y.len();
    let mut ranks = vec![0.0; m];
    for i in 0..m {
        let yi = y[i];
        let mut sum = 1.0;
        for (j, &yj) in y.iter().enumerate() {
            if j != i {
                sum += sigmoid(-alpha * (yi - yj));
            }
        }
        ranks[i] = sum;
    }
    ranks
}

/// Ranks induced by a stable descending sort (ties keep ascending
/// original-index order).  The reference ranking for accuracy
/// experiments.
pub fn true_ranks(y: &[f64]) -> Vec<f64> {
    assert!(y.iter().all(|v| v.is_finite()), "scores must be finite");
    let m = y.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap());
    let mut ranks = vec![0.0; m];
    for (pos, &doc) in order.iter().enumerate() {
        ranks[doc] = (pos + 1) as f64;
    }
    ranks
}

/// Backward substitution for one pairwise comparison.
///
/// `y_ij` is the score difference `y_i - y_j`; `u_ij` must be the sign
/// (`-1`, `0`, `1`) of the label difference for the label-aware
/// strategies (it is ignored by `type1`).
pub fn sigma_backward(y_ij: f64, u_ij: i8, spec: &TwinSigmoidSpec) -> f64 {
    assert!(
        (-1..=1).contains(&u_ij),
        "pair label sign must be -1, 0, or 1, got {u_ij}"
    );
    let s = sigmoid(spec.alpha_b * y_ij);
    match spec.strategy {
        GradientStrategy::Type1 => spec.alpha_b * s * (1.0 - s),
        GradientStrategy::Type2 => f64::from(u_ij) * spec.alpha_b * s * (1.0 - s),
        GradientStrategy::Type3 => match u_ij {
            1 => 2.0 * spec.alpha_b * (1.0 - s),
            0 => 0.0,
            _ => -2.0 * spec.alpha_b * s,
        },
    }
}

/// Pairwise rank-gradient accessor and the chain rule that turns a
/// gradient with respect to ranks into one with respect to scores.
///
/// For the substituted backward pass, `d r_i / d y_i = -sum_{j != i}
/// g_ij` and `d r_i / d y_j = +g_ij`, where `g_ij` is the pair's
/// [`sigma_backward`] value.  Pairs are visited blockwise; nothing
/// quadratic in `m` is materialized.
pub struct RankGradients<'a> {
    y: &'a [f64],
    labels: Option<&'a [u32]>,
    spec: TwinSigmoidSpec,
}

impl<'a> RankGradients<'a> {
    /// The label-aware strategies (`type2`, `type3`) require labels; the
    /// lengths must match `y`.
    pub fn new(y: &'a [f64], labels: Option<&'a [u32]>, spec: TwinSigmoidSpec) -> Self {
        if spec.strategy != GradientStrategy::Type1 {
            let labels = labels.expect("label-aware gradient strategies need labels");
            assert_eq!(labels.len(), y.len(), "labels/scores length mismatch");
        } else if let Some(labels) = labels {
            assert_eq!(labels.len(), y.len(), "labels/scores length mismatch");
        }
        RankGradients {
            y,
            labels,
            spec,
        }
    }

    #[inline]
    fn u(&self, i: usize, j: usize) -> i8 {
        match self.labels {
            Some(ls) => match ls[i].cmp(&ls[j]) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Less => -1,
            },
            None => 0,
        }
    }

    /// `g_ij` for the ordered pair `(i, j)`.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        assert!(i != j, "pair gradient needs two distinct documents");
        sigma_backward(self.y[i] - self.y[j], self.u(i, j), &self.spec)
    }

    /// Chain a loss gradient with respect to ranks (`dl_dr[i]` is the
    /// derivative at document `i`'s rank) into a gradient with respect to
    /// scores: `dl_dy[i] = sum_{j != i} (-dl_dr[i] * g_ij + dl_dr[j] *
    /// g_ji)`.
    pub fn chain(&self, dl_dr: &[f64]) -> Vec<f64> {
        let m = self.y.len();
        assert_eq!(dl_dr.len(), m, "rank gradient length mismatch");
        let mut out = vec![0.0; m];
        for i in 0..m {
            for j in (i + 1)..m {
                let g_ij = self.pair(i, j);
                let g_ji = self.pair(j, i);
                out[i] += -dl_dr[i] * g_ij + dl_dr[j] * g_ji;
                out[j] += -dl_dr[j] * g_ji + dl_dr[i] * g_ij;
            }
        }
        out
    }
}

/// Hard ranks without tie-breaking: each document's rank is one plus the
/// number of documents that strictly outscore it, so tied documents share
/// a rank ("1224" competition ranking).  With distinct scores this equals
/// [`true_ranks`]; with ties the result is not a permutation.
pub fn competition_ranks(y: &[f64]) -> Vec<f64> {
    assert!(y.iter().all(|v| v.is_finite()), "ranking needs finite scores");
    y.iter()
        .map(|&yi| (y.iter().filter(|&&yj| yj > yi).count() + 1) as f64)
        .collect()
}

/// L1 distance between two rank vectors: the sum of the absolute
/// per-document rank differences.
pub fn l1_rank_loss(predicted: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(predicted.len(), reference.len(), "rank vector length mismatch");
    predicted
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r).abs())
        .sum()
}

/// Evaluate the smooth approximation's worst-case accuracy against its
/// closed-form bound.
///
/// Returns `(lhs, rhs)`: the largest elementwise deviation of
/// [`rank_minus`] from the true ranks, and the bound `(m - 1) /
/// (exp(delta * alpha) + 1)` with `delta` the smallest pairwise score
/// gap.  Scores must be distinct (`delta > 0`) for the bound to be
/// defined.  The caller compares; nothing is asserted here.
///
/// The deviation is accumulated one comparison at a time — each pair
/// contributes `sigmoid(-alpha (y_i - y_j))` minus its hard step, a
/// quantity that is tiny exactly when the deviation is tiny.  Taking
/// `rank_minus(y) - true_ranks(y)` instead would cancel the shared
/// integer baseline and lose the digits the comparison runs on once the
/// deviation drops below ~1e-8.
pub fn approx_bound_check(y: &[f64], alpha: f64) -> (f64, f64) {
    let m = y.len();
    assert!(m >= 2, "the accuracy bound needs at least two documents");
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut delta = f64::INFINITY;
    for w in sorted.windows(2) {
        delta = delta.min(w[1] - w[0]);
    }
    assert!(delta > 0.0, "accuracy bound requires distinct scores");

    let mut lhs = 0f64;
    for (i, &yi) in y.iter().enumerate() {
        let mut deviation = 0.0;
        for (j, &yj) in y.iter().enumerate() {
            if j != i {
                // sigmoid(-a(yi-yj)) - step(yj - yi), with the j-beats-i
                // branch rewritten through 1 - sigmoid(z) = sigmoid(-z)
                // so both branches stay in the small-magnitude regime.
                deviation += if yj > yi {
                    -sigmoid(alpha * (yi - yj))
                } else {
                    sigmoid(-alpha * (yi - yj))
                };
            }
        }
        lhs = lhs.max(deviation.abs());
    }
    let rhs = (m - 1) as f64 / ((delta * alpha).exp() + 1.0);
    (lhs, rhs)
}
