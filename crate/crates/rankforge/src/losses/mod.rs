//! Listwise training losses over per-query score vectors.
//!
//! Every loss here consumes the scores `y` and integer relevance labels of a
//! single query and produces a [`LossOutput`]: the scalar loss, its gradient
//! with respect to each score, and a flag marking queries without relevant
//! documents. Lower is better for every loss; the metric-derived ones are
//! simply negated metrics so that minimizing the loss maximizes the metric.
//!
//! Two families live side by side:
//!
//! * **Rank-based metric losses** ([`diff_precision_loss`], [`diff_ap_loss`],
//!   [`diff_ndcg_loss`], [`diff_nerr_loss`]): the metric is rewritten as a
//!   function of document ranks, the ranks come from the exact rank
//!   derivation in [`crate::ranking`], and the backward pass substitutes the
//!   scaled sigmoid derivative chosen by a [`GradientStrategy`]. The forward
//!   value always equals the true metric. The [`soft`] submodule provides the
//!   fully smooth variants (sigmoid-approximated ranks in the forward pass
//!   too), which are finite-difference checkable end to end.
//! * **Classical listwise baselines**: [`listnet_top1_loss`] (top-one
//!   cross entropy between score and label softmaxes) and [`listmle_loss`]
//!   (negative Plackett-Luce log-likelihood of a label-sorted permutation).
//!
//! [`LossSpec`] parses command-line loss strings such as `ndcg.type2`,
//! `pre@5.type3`, or `listmle` and dispatches to the right function with the
//! right hyperparameters.

mod baselines;
mod metric_losses;

pub use baselines::{listmle_loss, listnet_top1_loss};
pub use metric_losses::{
    approx_ndcg_loss, diff_ap_loss, diff_ndcg_loss, diff_nerr_loss, diff_precision_loss, soft,
};

use crate::error::{Error, Result};
use crate::ranking::{GradientStrategy, TwinSigmoidSpec};
use std::fmt;

/// Default cutoff for the truncated losses (`pre`, `nerr`) when the loss
/// string does not carry an explicit `@k`.
pub const DEFAULT_LOSS_CUTOFF: usize = 10;

/// Value and gradient of a listwise loss on one query.
#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Scalar loss (lower is better).
    pub value: f64,
    /// `grad[i]` is the partial derivative of the loss with respect to the
    /// score of document `i`.
    pub grad: Vec<f64>,
    /// True when the query has no relevant documents. The metric-derived
    /// losses return a zero value and zero gradient in that case because the
    /// underlying metric is undefined; the baselines still return their
    /// ordinary value but flag the query so callers can count it.
    pub flagged: bool,
}

impl LossOutput {
    pub(crate) fn flagged_zero(m: usize) -> Self {
        LossOutput {
            value: 0.0,
            grad: vec![0.0; m],
            flagged: true,
        }
    }
}

/// Loss family selected by the head of a loss string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFamily {
    /// Negated precision at `k`, rank-based.
    Precision,
    /// Negated average precision over the full list, rank-based.
    Ap,
    /// Negated nDCG over the full list, rank-based.
    Ndcg,
    /// Negated nERR at `k`, rank-based.
    Nerr,
    /// Negated nDCG on sigmoid-approximated ranks (fully smooth).
    ApproxNdcg,
    /// ListNet with the top-one target distribution.
    ListNet,
    /// ListMLE likelihood loss.
    ListMle,
}

impl LossFamily {
    fn token(self) -> &'static str {
        match self {
            LossFamily::Precision => "pre",
            LossFamily::Ap => "ap",
            LossFamily::Ndcg => "ndcg",
            LossFamily::Nerr => "nerr",
            LossFamily::ApproxNdcg => "approxndcg",
            LossFamily::ListNet => "listnet",
            LossFamily::ListMle => "listmle",
        }
    }

    /// Whether this family is one of the rank-based metric losses that need a
    /// gradient strategy suffix.
    fn takes_strategy(self) -> bool {
        matches!(
            self,
            LossFamily::Precision | LossFamily::Ap | LossFamily::Ndcg | LossFamily::Nerr
        )
    }

    /// Whether this family accepts an `@k` cutoff.
    fn takes_cutoff(self) -> bool {
        matches!(self, LossFamily::Precision | LossFamily::Nerr)
    }
}

/// A fully resolved training-loss configuration.
///
/// Built by [`LossSpec::parse`] from a loss string plus the shared
/// hyperparameters, then applied to one query at a time with
/// [`LossSpec::evaluate`].
#[derive(Debug, Clone)]
pub struct LossSpec {
    pub family: LossFamily,
    /// Cutoff for truncated families; `None` for the untruncated ones.
    pub k: Option<usize>,
    /// Backward-pass strategy for the rank-based families; `None` otherwise.
    pub strategy: Option<GradientStrategy>,
    /// Backward sigmoid scale for the rank-based families.
    pub alpha_b: f64,
    /// Forward sigmoid scale for the smooth approximation (`approxndcg`).
    pub alpha: f64,
    /// Drop the `1/ln 2` factor from the nDCG rank derivative, reproducing
    /// the common shortcut of differentiating `log2` as if it were `ln`.
    pub ndcg_shortcut_grad: bool,
}

impl LossSpec {
    /// Parse a loss string of the form `family[@k][.typeN]`.
    ///
    /// The rank-based families (`pre`, `ap`, `ndcg`, `nerr`) require a
    /// strategy suffix (`.type1`, `.type2`, `.type3`); the others forbid it.
    /// `pre` and `nerr` accept an optional `@k` cutoff and default to
    /// `@10`; `ap` and `ndcg` always score the full list and reject `@k`.
    ///
    /// `alpha_b`, `alpha`, and `ndcg_shortcut_grad` come from the caller
    /// (typically CLI flags) and are stored for [`LossSpec::evaluate`].
    pub fn parse(s: &str, alpha_b: f64, alpha: f64, ndcg_shortcut_grad: bool) -> Result<LossSpec> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty loss string".into()));
        }
        let (head, strategy) = match s.split_once('.') {
            Some((head, suffix)) => {
                let strategy = suffix.parse::<GradientStrategy>().map_err(|_| {
                    Error::Config(format!(
                        "unknown gradient strategy `{suffix}` in loss `{s}` \
                         (expected type1, type2, or type3)"
                    ))
                })?;
                (head, Some(strategy))
            }
            None => (s, None),
        };
        let (name, k) = match head.split_once('@') {
            Some((name, kstr)) => {
                let k: usize = kstr.parse().map_err(|_| {
                    Error::Config(format!("invalid cutoff `{kstr}` in loss `{s}`"))
                })?;
                if k == 0 {
                    return Err(Error::Config(format!(
                        "cutoff must be at least 1 in loss `{s}`"
                    )));
                }
                (name, Some(k))
            }
            None => (head, None),
        };
        let family = match name {
            "pre" => LossFamily::Precision,
            "ap" => LossFamily::Ap,
            "ndcg" => LossFamily::Ndcg,
            "nerr" => LossFamily::Nerr,
            "approxndcg" => LossFamily::ApproxNdcg,
            "listnet" => LossFamily::ListNet,
            "listmle" => LossFamily::ListMle,
            other => {
                return Err(Error::Config(format!(
                    "unknown loss family `{other}` in loss `{s}`"
                )))
            }
        };
        if family.takes_strategy() && strategy.is_none() {
            return Err(Error::Config(format!(
                "loss `{s}` needs a gradient strategy suffix, e.g. `{name}.type2`"
            )));
        }
        if !family.takes_strategy() && strategy.is_some() {
            return Err(Error::Config(format!(
                "loss `{name}` does not take a gradient strategy"
            )));
        }
        if !family.takes_cutoff() && k.is_some() {
            return Err(Error::Config(format!(
                "loss `{name}` always scores the full list and does not take a cutoff"
            )));
        }
        let k = if family.takes_cutoff() {
            Some(k.unwrap_or(DEFAULT_LOSS_CUTOFF))
        } else {
            None
        };
        if !(alpha_b.is_finite() && alpha_b > 0.0) {
            return Err(Error::Config(format!(
                "alpha_b must be a positive finite number, got {alpha_b}"
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be a positive finite number, got {alpha}"
            )));
        }
        Ok(LossSpec {
            family,
            k,
            strategy,
            alpha_b,
            alpha,
            ndcg_shortcut_grad,
        })
    }

    /// Evaluate the loss on one query.
    ///
    /// `eval_seed` feeds the stochastic parts of a single evaluation: the
    /// tie-breaking priorities of the exact rank derivation and the target
    /// permutation shuffle of ListMLE. Calls with the same arguments and the
    /// same seed are fully deterministic.
    pub fn evaluate(&self, y: &[f64], labels: &[u32], eval_seed: u64) -> LossOutput {
        assert_eq!(
            y.len(),
            labels.len(),
            "scores and labels must have the same length"
        );
        assert!(!y.is_empty(), "loss evaluation needs at least one document");
        match self.family {
            LossFamily::Precision | LossFamily::Ap | LossFamily::Ndcg | LossFamily::Nerr => {
                let strategy = self.strategy.expect("rank-based loss carries a strategy");
                let spec = TwinSigmoidSpec::new(self.alpha_b, strategy, eval_seed);
                match self.family {
                    LossFamily::Precision => {
                        diff_precision_loss(y, labels, self.k.unwrap(), &spec)
                    }
                    LossFamily::Ap => diff_ap_loss(y, labels, &spec),
                    LossFamily::Ndcg => {
                        diff_ndcg_loss(y, labels, &spec, self.ndcg_shortcut_grad)
                    }
                    LossFamily::Nerr => diff_nerr_loss(y, labels, self.k.unwrap(), &spec),
                    _ => unreachable!(),
                }
            }
            LossFamily::ApproxNdcg => approx_ndcg_loss(y, labels, self.alpha),
            LossFamily::ListNet => listnet_top1_loss(y, labels),
            LossFamily::ListMle => listmle_loss(y, labels, eval_seed),
        }
    }

    /// Canonical loss string (defaults made explicit), e.g. `pre@10.type1`.
    pub fn name(&self) -> String {
        let mut out = String::from(self.family.token());
        if let Some(k) = self.k {
            out.push('@');
            out.push_str(&k.to_string());
        }
        if let Some(strategy) = self.strategy {
            out.push('.');
            out.push_str(&strategy.to_string());
        }
        out
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
