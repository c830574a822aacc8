//! Exact information-retrieval metrics.
//!
//! Everything operates on a [`SortedLabels`] view: the label vector
//! reordered by descending score, ties broken by ascending original index
//! (a stable sort).  Graded labels are non-negative integers; a document
//! is *relevant* when its label is positive.
//!
//! Conventions, applied consistently here and in the differentiable
//! losses:
//!
//! - `Precision@k` keeps `k` in the divisor even when the list is shorter
//!   than `k` (short lists are penalized, metrics stay comparable across
//!   queries).
//! - Truncated `AP@k` divides by `min(|relevant|, k)`; untruncated AP
//!   divides by `|relevant|`.
//! - `nDCG@k` normalizes by the ideal DCG at the same cutoff; the ideal
//!   ordering sorts labels descending.
//! - `nERR@k` uses grade probabilities `(2^y - 1) / 2^max(y)` with the
//!   maximum taken over the query's own labels.
//! - Queries with no relevant documents score 0 on every metric and are
//!   flagged, but still count toward averages.

use std::fmt;

/// Largest label value the toolkit accepts (grades `0..=4`).
pub const GRADE_MAX: u32 = 4;

/// Label vector in rank order (descending score), with the bookkeeping
/// the metric definitions need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedLabels {
    /// Labels in rank order (position 0 = rank 1).
    labels: Vec<u32>,
    /// `perm[p]` = original index of the document at rank position `p`.
    perm: Vec<usize>,
    /// Number of positive labels.
    n_relevant: usize,
}

impl SortedLabels {
    /// Sort labels by descending score; equal scores keep ascending
    /// original-index order (stable sort).  Lengths must match and scores
    /// must be finite.
    pub fn from_scores(scores: &[f64], labels: &[u32]) -> Self {
        assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
        assert!(
            scores.iter().all(|s| s.is_finite()),
            "scores must be finite to define a ranking"
        );
        let mut perm: Vec<usize> = (0..scores.len()).collect();
        perm.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let ordered: Vec<u32> = perm.iter().map(|&i| labels[i]).collect();
        Self::build(ordered, perm)
    }

    /// Adopt an externally determined rank order (e.g. from an exact rank
    /// derivation with randomized tie-breaking).
    pub fn from_rank_order(labels_in_rank_order: &[u32]) -> Self {
        let perm = (0..labels_in_rank_order.len()).collect();
        Self::build(labels_in_rank_order.to_vec(), perm)
    }

    fn build(labels: Vec<u32>, perm: Vec<usize>) -> Self {
        assert!(
            labels.iter().all(|&y| y <= 31),
            "labels too large for exponential gains"
        );
        let n_relevant = labels.iter().filter(|&&y| y > 0).count();
        SortedLabels {
            labels,
            perm,
            n_relevant,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in rank order.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Original index of each rank position.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn n_relevant(&self) -> usize {
        self.n_relevant
    }
}

/// Convenience wrapper matching the common call site: sort then keep.
pub fn sort_by_scores(scores: &[f64], labels: &[u32]) -> SortedLabels {
    SortedLabels::from_scores(scores, labels)
}

/// Exponential gain `2^y - 1`, exact for integer grades.
#[inline]
pub(crate) fn gain(y: u32) -> f64 {
    ((1u64 << y) - 1) as f64
}

/// Fraction of relevant documents among the top `k` positions; the
/// divisor stays `k` even when fewer than `k` documents exist.
pub fn precision_at_k(sl: &SortedLabels, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    let top = k.min(sl.len());
    let hits = sl.labels[..top].iter().filter(|&&y| y > 0).count();
    hits as f64 / k as f64
}

/// Average precision: the mean of `Precision@j` over the rank positions
/// `j` of relevant documents.  With `Some(k)` the sum truncates at `k`
/// and the divisor becomes `min(|relevant|, k)`; with `None` the full
/// list is used.  Queries with no relevant documents score 0.
pub fn average_precision(sl: &SortedLabels, k: Option<usize>) -> f64 {
    if let Some(k) = k {
        assert!(k >= 1, "cutoff must be at least 1");
    }
    if sl.n_relevant == 0 {
        return 0.0;
    }
    let top = k.unwrap_or(sl.len()).min(sl.len());
    let divisor = k.map_or(sl.n_relevant, |k| sl.n_relevant.min(k));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (j, &y) in sl.labels[..top].iter().enumerate() {
        if y > 0 {
            hits += 1;
            sum += hits as f64 / (j + 1) as f64;
        }
    }
    sum / divisor as f64
}

fn dcg_at_k(labels: &[u32], k: usize) -> f64 {
    let top = k.min(labels.len());
    let mut sum = 0.0;
    for (j, &y) in labels[..top].iter().enumerate() {
        sum += gain(y) / ((j + 2) as f64).log2();
    }
    sum
}

/// Normalized discounted cumulative gain at cutoff `k` with exponential
/// gains; 0 when the query has no relevant documents.
pub fn ndcg_at_k(sl: &SortedLabels, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    if sl.n_relevant == 0 {
        return 0.0;
    }
    let mut ideal = sl.labels.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        // Possible when the cutoff is positive but all labels are zero;
        // already excluded by the n_relevant check, kept for safety.
        return 0.0;
    }
    dcg_at_k(&sl.labels, k) / idcg
}

fn err_at_k(labels: &[u32], k: usize, max_grade: u32) -> f64 {
    let top = k.min(labels.len());
    let denom = (1u64 << max_grade) as f64;
    let mut not_stopped = 1.0;
    let mut sum = 0.0;
    for (j, &y) in labels[..top].iter().enumerate() {
        let pr = gain(y) / denom;
        sum += not_stopped * pr / (j + 1) as f64;
        not_stopped *= 1.0 - pr;
    }
    sum
}

/// Normalized expected reciprocal rank at cutoff `k`; 0 when the query
/// has no relevant documents.
pub fn nerr_at_k(sl: &SortedLabels, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    let max_grade = sl.labels.iter().copied().max().unwrap_or(0);
    if max_grade == 0 {
        return 0.0;
    }
    let mut ideal = sl.labels.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let ideal_err = err_at_k(&ideal, k, max_grade);
    err_at_k(&sl.labels, k, max_grade) / ideal_err
}

/// Metric families reported by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    Precision,
    Map,
    Ndcg,
    Nerr,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Precision,
        MetricKind::Map,
        MetricKind::Ndcg,
        MetricKind::Nerr,
    ];
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricKind::Precision => "pre",
            MetricKind::Map => "map",
            MetricKind::Ndcg => "ndcg",
            MetricKind::Nerr => "nerr",
        };
        f.write_str(s)
    }
}

/// One query's metric values at every requested cutoff.
#[derive(Debug, Clone)]
pub struct QueryEval {
    /// `(metric, cutoff, value)` rows in a fixed metric-major order.
    pub values: Vec<(MetricKind, usize, f64)>,
    /// True when the query has no relevant documents (all values are 0).
    pub no_relevant: bool,
}

/// Evaluate every metric family at every cutoff for one query.
pub fn evaluate_all(scores: &[f64], labels: &[u32], cutoffs: &[usize]) -> QueryEval {
    assert!(!cutoffs.is_empty(), "cutoff list must not be empty");
    assert!(cutoffs.iter().all(|&k| k >= 1), "cutoffs must be at least 1");
    let sl = sort_by_scores(scores, labels);
    let mut values = Vec::with_capacity(4 * cutoffs.len());
    for kind in MetricKind::ALL {
        for &k in cutoffs {
            let v = match kind {
                MetricKind::Precision => precision_at_k(&sl, k),
                MetricKind::Map => average_precision(&sl, Some(k)),
                MetricKind::Ndcg => ndcg_at_k(&sl, k),
                MetricKind::Nerr => nerr_at_k(&sl, k),
            };
            values.push((kind, k, v));
        }
    }
    QueryEval {
        values,
        no_relevant: sl.n_relevant() == 0,
    }
}

/// Mean metric values over a set of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(metric, cutoff, mean)` rows, metric-major, cutoffs ascending as
    /// given.
    pub rows: Vec<(MetricKind, usize, f64)>,
    pub n_queries: usize,
    /// How many queries had no relevant documents.
    pub n_flagged: usize,
}

impl EvalReport {
    /// Macro-average per metric/cutoff across queries.  Every query must
    /// carry the same metric/cutoff grid.
    pub fn from_queries(evals: &[QueryEval]) -> Self {
        assert!(!evals.is_empty(), "cannot aggregate zero queries");
        let grid: Vec<(MetricKind, usize)> =
            evals[0].values.iter().map(|&(m, k, _)| (m, k)).collect();
        let mut sums = vec![0.0; grid.len()];
        let mut n_flagged = 0usize;
        for ev in evals {
            assert_eq!(
                ev.values.len(),
                grid.len(),
                "inconsistent metric grids across queries"
            );
            for (i, &(m, k, v)) in ev.values.iter().enumerate() {
                assert_eq!((m, k), grid[i], "inconsistent metric grids across queries");
                sums[i] += v;
            }
            if ev.no_relevant {
                n_flagged += 1;
            }
        }
        let n = evals.len();
        let rows = grid
            .into_iter()
            .zip(sums)
            .map(|((m, k), s)| (m, k, s / n as f64))
            .collect();
        EvalReport {
            rows,
            n_queries: n,
            n_flagged,
        }
    }

    /// Mean value for one metric/cutoff pair, if present.
    pub fn mean(&self, kind: MetricKind, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|&&(m, c, _)| m == kind && c == k)
            .map(|&(_, _, v)| v)
    }

    /// CSV rendering with a one-line header: `metric,k,mean,n_queries`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,k,mean,n_queries\n");
        for &(m, k, v) in &self.rows {
            out.push_str(&format!("{m},{k},{v},{}\n", self.n_queries));
        }
        out
    }
}
