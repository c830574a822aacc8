//! Rank-based differentiable losses for the four IR metrics.
//!
//! Each metric is rewritten as a function of per-document rank values
//! `r̄` instead of hard sort positions, which makes the metric a smooth
//! function of the ranks. The loss is the negated metric. Two rank bases
//! share all of the machinery:
//!
//! * **Exact**: ranks come from [`rank_plus`], so they are the true integer
//!   sort positions (ties broken by seeded random priorities) and the loss
//!   value equals the negated metric exactly. Gradients flow through the
//!   substituted scaled-sigmoid pairwise derivative selected by the
//!   [`TwinSigmoidSpec`] strategy.
//! * **Soft**: ranks come from [`rank_minus`], the sigmoid approximation, so
//!   the whole composite is genuinely differentiable and the analytic
//!   gradient can be validated against finite differences. The smooth nDCG
//!   variant doubles as the `approxndcg` training baseline.
//!
//! In both bases the per-position constants of the metric (which document
//! sits at which sorted position, binary relevance, gains, stopping
//! probabilities) are taken from the current ordering and treated as locally
//! constant; only the rank values `r̄` carry derivatives. The chain from rank
//! space to score space is [`RankGradients::chain`].

use super::LossOutput;
use crate::metrics::gain;
use crate::ranking::{rank_minus, rank_plus, GradientStrategy, RankGradients, TwinSigmoidSpec};

/// How rank values are derived from scores.
enum RankBasis<'a> {
    /// Exact integer ranks with seeded tie-breaking; gradients substituted
    /// per the [`TwinSigmoidSpec`]'s strategy.
    Exact(&'a TwinSigmoidSpec),
    /// Sigmoid-approximated ranks at the given steepness; true gradients.
    Soft { alpha: f64 },
}

/// Documents of one query arranged by rank.
struct RankedQuery {
    /// Document index occupying each sorted position, best first.
    order: Vec<usize>,
    /// Rank value of the document at each sorted position (`p + 1` exactly
    /// in the exact basis, a fractional value near it in the soft basis).
    rbar: Vec<f64>,
    /// Labels rearranged into rank order.
    labels: Vec<u32>,
}

fn rank_query(y: &[f64], labels: &[u32], basis: &RankBasis) -> RankedQuery {
    let m = y.len();
    match basis {
        RankBasis::Exact(spec) => {
            let rv = rank_plus(y, spec.tie_seed);
            let order = rv.ascending().to_vec();
            let rbar: Vec<f64> = (1..=m).map(|r| r as f64).collect();
            let labels = order.iter().map(|&doc| labels[doc]).collect();
            RankedQuery { order, rbar, labels }
        }
        RankBasis::Soft { alpha } => {
            let r = rank_minus(y, *alpha);
            let mut order: Vec<usize> = (0..m).collect();
            // Stable ascending sort on the soft rank; tied scores produce
            // equal soft ranks and keep their original index order, matching
            // the evaluation-metric tie convention.
            order.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).expect("soft ranks are finite"));
            let rbar = order.iter().map(|&doc| r[doc]).collect();
            let labels = order.iter().map(|&doc| labels[doc]).collect();
            RankedQuery { order, rbar, labels }
        }
    }
}

/// Metric value and its derivative with respect to each sorted-position rank
/// value, before negation.
struct MetricCore {
    value: f64,
    /// `d_rbar[p]` is the partial derivative of the metric with respect to
    /// `rbar[p]`.
    d_rbar: Vec<f64>,
}

/// Precision at `k` as a rank function: each relevant document at sorted
/// position `p` (1-based rank `p + 1`) contributes `(p + 1) / r̄_p`, the sum
/// is divided by `k`. With true ranks every contribution is exactly 1 and
/// the value reduces to hits / k.
fn precision_core(rq: &RankedQuery, k: usize) -> MetricCore {
    let m = rq.rbar.len();
    let top = k.min(m);
    let kf = k as f64;
    let mut num = 0.0;
    let mut d_rbar = vec![0.0; m];
    for p in 0..top {
        if rq.labels[p] > 0 {
            let pos = (p + 1) as f64;
            let r = rq.rbar[p];
            num += pos / r;
            d_rbar[p] = -pos / (kf * r * r);
        }
    }
    MetricCore { value: num / kf, d_rbar }
}

/// Average precision as a rank function: relevant position `p` contributes
/// `(p + 1) / r̄_p` times the suffix sum `S_p = Σ_{q ≥ p, relevant} 1/(q+1)`,
/// normalized by the number of relevant documents.
fn ap_core(rq: &RankedQuery) -> MetricCore {
    let m = rq.rbar.len();
    let n_rel = rq.labels.iter().filter(|&&l| l > 0).count();
    debug_assert!(n_rel > 0, "flagged queries are handled before the core");
    let mut suffix = vec![0.0; m + 1];
    for p in (0..m).rev() {
        let own = if rq.labels[p] > 0 {
            1.0 / (p + 1) as f64
        } else {
            0.0
        };
        suffix[p] = suffix[p + 1] + own;
    }
    let nr = n_rel as f64;
    let mut num = 0.0;
    let mut d_rbar = vec![0.0; m];
    for p in 0..m {
        if rq.labels[p] > 0 {
            let pos = (p + 1) as f64;
            let r = rq.rbar[p];
            num += pos / r * suffix[p];
            d_rbar[p] = -pos * suffix[p] / (nr * r * r);
        }
    }
    MetricCore { value: num / nr, d_rbar }
}

/// nDCG over the full list as a rank function: position `p` contributes
/// `gain_p / log2(r̄_p + 1)`, normalized by the ideal DCG.
///
/// The exact derivative of `1/log2(u + 1)` carries a `1/ln 2` factor from
/// the base-2 logarithm; `shortcut_grad` drops that factor, reproducing the
/// widespread shortcut of differentiating `log2` as if it were the natural
/// logarithm. The shortcut only rescales every gradient by `ln 2`.
fn ndcg_core(rq: &RankedQuery, shortcut_grad: bool) -> MetricCore {
    let m = rq.rbar.len();
    let mut ideal = rq.labels.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (p, &l) in ideal.iter().enumerate() {
        idcg += gain(l) / ((p + 2) as f64).log2();
    }
    debug_assert!(idcg > 0.0, "flagged queries are handled before the core");
    let mut dcg = 0.0;
    let mut d_rbar = vec![0.0; m];
    for p in 0..m {
        let g = gain(rq.labels[p]);
        if g == 0.0 {
            continue;
        }
        let r = rq.rbar[p];
        let log_term = (r + 1.0).log2();
        dcg += g / log_term;
        let mut deriv = -(g / idcg) / (log_term * log_term * (r + 1.0));
        if !shortcut_grad {
            deriv /= std::f64::consts::LN_2;
        }
        d_rbar[p] = deriv;
    }
    MetricCore {
        value: dcg / idcg,
        d_rbar,
    }
}

/// nERR at `k` as a rank function: position `p < k` contributes
/// `w_p / r̄_p` where `w_p` is the cascade weight (probability the user
/// reaches position `p` and stops there), normalized by the ideal ERR at the
/// same cutoff. The cascade weights depend only on the ordering and are
/// treated as constants of the current ranking.
fn nerr_core(rq: &RankedQuery, k: usize) -> MetricCore {
    let m = rq.rbar.len();
    let max_grade = rq.labels.iter().copied().max().unwrap_or(0);
    debug_assert!(max_grade > 0, "flagged queries are handled before the core");
    let denom = (1u64 << max_grade) as f64;
    let top = k.min(m);

    let mut ideal = rq.labels.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let mut ideal_err = 0.0;
    let mut not_stopped = 1.0;
    for (p, &l) in ideal.iter().take(top).enumerate() {
        let pr = gain(l) / denom;
        ideal_err += not_stopped * pr / (p + 1) as f64;
        not_stopped *= 1.0 - pr;
    }

    let mut num = 0.0;
    let mut d_rbar = vec![0.0; m];
    let mut not_stopped = 1.0;
    for p in 0..top {
        let pr = gain(rq.labels[p]) / denom;
        let w = not_stopped * pr;
        let r = rq.rbar[p];
        num += w / r;
        d_rbar[p] = -w / (ideal_err * r * r);
        not_stopped *= 1.0 - pr;
    }
    MetricCore {
        value: num / ideal_err,
        d_rbar,
    }
}

/// Which metric core to run.
enum MetricFamily {
    Precision { k: usize },
    Ap,
    Ndcg { shortcut_grad: bool },
    Nerr { k: usize },
}

fn metric_loss(y: &[f64], labels: &[u32], basis: RankBasis, family: MetricFamily) -> LossOutput {
    let m = y.len();
    assert_eq!(m, labels.len(), "scores and labels must have the same length");
    assert!(m > 0, "metric losses need at least one document");
    assert!(
        y.iter().all(|v| v.is_finite()),
        "metric losses need finite scores"
    );
    assert!(
        labels.iter().all(|&l| l <= 31),
        "relevance grades above 31 overflow the exponential gain"
    );
    if let MetricFamily::Precision { k } | MetricFamily::Nerr { k } = family {
        assert!(k >= 1, "cutoff must be at least 1");
    }
    if labels.iter().all(|&l| l == 0) {
        return LossOutput::flagged_zero(m);
    }

    let rq = rank_query(y, labels, &basis);
    let core = match family {
        MetricFamily::Precision { k } => precision_core(&rq, k),
        MetricFamily::Ap => ap_core(&rq),
        MetricFamily::Ndcg { shortcut_grad } => ndcg_core(&rq, shortcut_grad),
        MetricFamily::Nerr { k } => nerr_core(&rq, k),
    };

    // Negate the metric into a loss and scatter the positional derivatives
    // back onto document indices.
    let mut dl_dr = vec![0.0; m];
    for (p, &doc) in rq.order.iter().enumerate() {
        dl_dr[doc] = -core.d_rbar[p];
    }
    let grad = match basis {
        RankBasis::Exact(spec) => RankGradients::new(y, Some(labels), *spec).chain(&dl_dr),
        RankBasis::Soft { alpha } => {
            let spec = TwinSigmoidSpec::new(alpha, GradientStrategy::Type1, 0);
            RankGradients::new(y, None, spec).chain(&dl_dr)
        }
    };
    LossOutput {
        value: -core.value,
        grad,
        flagged: false,
    }
}

/// Negated precision at `k` on exact ranks; gradients substituted per
/// `spec`. Queries with no relevant documents are flagged and contribute
/// zero value and gradient.
pub fn diff_precision_loss(
    y: &[f64],
    labels: &[u32],
    k: usize,
    spec: &TwinSigmoidSpec,
) -> LossOutput {
    metric_loss(y, labels, RankBasis::Exact(spec), MetricFamily::Precision { k })
}

/// Negated average precision over the full list on exact ranks.
pub fn diff_ap_loss(y: &[f64], labels: &[u32], spec: &TwinSigmoidSpec) -> LossOutput {
    metric_loss(y, labels, RankBasis::Exact(spec), MetricFamily::Ap)
}

/// Negated nDCG over the full list on exact ranks. `shortcut_grad` drops
/// the `1/ln 2` factor from the rank derivative (see [`self`] docs).
pub fn diff_ndcg_loss(
    y: &[f64],
    labels: &[u32],
    spec: &TwinSigmoidSpec,
    shortcut_grad: bool,
) -> LossOutput {
    metric_loss(
        y,
        labels,
        RankBasis::Exact(spec),
        MetricFamily::Ndcg { shortcut_grad },
    )
}

/// Negated nERR at `k` on exact ranks.
pub fn diff_nerr_loss(y: &[f64], labels: &[u32], k: usize, spec: &TwinSigmoidSpec) -> LossOutput {
    metric_loss(y, labels, RankBasis::Exact(spec), MetricFamily::Nerr { k })
}

/// Negated nDCG on sigmoid-approximated ranks: the fully smooth surrogate
/// used as the `approxndcg` training baseline. Equivalent to
/// [`soft::soft_ndcg_loss`].
pub fn approx_ndcg_loss(y: &[f64], labels: &[u32], alpha: f64) -> LossOutput {
    soft::soft_ndcg_loss(y, labels, alpha)
}

/// Fully smooth variants of the four metric losses on sigmoid-approximated
/// ranks (steepness `alpha`). The forward value only approximates the
/// metric, but the analytic gradient is the true gradient of the smooth
/// composite, so these variants are verifiable by finite differences.
pub mod soft {
    use super::*;

    /// Smooth precision at `k`.
    pub fn soft_precision_loss(y: &[f64], labels: &[u32], k: usize, alpha: f64) -> LossOutput {
        metric_loss(
            y,
            labels,
            RankBasis::Soft { alpha },
            MetricFamily::Precision { k },
        )
    }

    /// Smooth average precision over the full list.
    pub fn soft_ap_loss(y: &[f64], labels: &[u32], alpha: f64) -> LossOutput {
        metric_loss(y, labels, RankBasis::Soft { alpha }, MetricFamily::Ap)
    }

    /// Smooth nDCG over the full list.
    pub fn soft_ndcg_loss(y: &[f64], labels: &[u32], alpha: f64) -> LossOutput {
        metric_loss(
            y,
            labels,
            RankBasis::Soft { alpha },
            MetricFamily::Ndcg { shortcut_grad: false },
        )
    }

    /// Smooth nERR at `k`.
    pub fn soft_nerr_loss(y: &[f64], labels: &[u32], k: usize, alpha: f64) -> LossOutput {
        metric_loss(y, labels, RankBasis::Soft { alpha }, MetricFamily::Nerr { k })
    }
}
