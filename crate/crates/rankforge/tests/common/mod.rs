//! Shared helpers for the integration suite: a brute-force metric oracle
//! written directly from the metric definitions (kept deliberately
//! independent of the library's implementations) and a central
//! finite-difference gradient helper.

#![allow(dead_code)]

/// Exponential gain used by the graded metrics.
fn oracle_gain(label: u32) -> f64 {
    2f64.powi(label as i32) - 1.0
}

/// Fraction of the top `k` ranks holding a relevant document.  The
/// divisor is `k` itself even when the list is shorter.
pub fn oracle_precision_at_k(ranked_labels: &[u32], k: usize) -> f64 {
    let mut hits = 0.0;
    for pos in 0..k.min(ranked_labels.len()) {
        if ranked_labels[pos] > 0 {
            hits += 1.0;
        }
    }
    hits / k as f64
}

/// Mean of Precision@j over the ranks j that hold a relevant document.
/// With a cutoff the sum stops at `k` and the divisor is
/// `min(k, total relevant)`; without one the whole list counts and the
/// divisor is the total number of relevant documents.
pub fn oracle_average_precision(ranked_labels: &[u32], k: Option<usize>) -> f64 {
    let total_relevant = ranked_labels.iter().filter(|&&l| l > 0).count();
    if total_relevant == 0 {
        return 0.0;
    }
    let stop = k.unwrap_or(ranked_labels.len()).min(ranked_labels.len());
    let mut seen = 0.0;
    let mut acc = 0.0;
    for pos in 0..stop {
        if ranked_labels[pos] > 0 {
            seen += 1.0;
            acc += seen / (pos + 1) as f64;
        }
    }
    let divisor = match k {
        Some(k) => k.min(total_relevant),
        None => total_relevant,
    };
    acc / divisor as f64
}

fn oracle_dcg(ranked_labels: &[u32], k: usize) -> f64 {
    let mut acc = 0.0;
    for pos in 0..k.min(ranked_labels.len()) {
        acc += oracle_gain(ranked_labels[pos]) / ((pos + 2) as f64).log2();
    }
    acc
}

/// DCG with gain 2^label − 1 and log2(position+1) discount, divided by
/// the DCG of the best possible ordering; 0 when nothing is relevant.
/// The ideal ordering is built by a counting pass over the grades so the
/// oracle does not share a sorting step with the library.
pub fn oracle_ndcg_at_k(ranked_labels: &[u32], k: usize) -> f64 {
    let max_grade = ranked_labels.iter().copied().max().unwrap_or(0);
    if max_grade == 0 {
        return 0.0;
    }
    let mut ideal = Vec::with_capacity(ranked_labels.len());
    for grade in (0..=max_grade).rev() {
        for &l in ranked_labels {
            if l == grade {
                ideal.push(l);
            }
        }
    }
    oracle_dcg(ranked_labels, k) / oracle_dcg(&ideal, k)
}

fn oracle_err(ranked_labels: &[u32], k: usize, max_grade: u32) -> f64 {
    let mut continue_prob = 1.0;
    let mut acc = 0.0;
    for pos in 0..k.min(ranked_labels.len()) {
        let stop = oracle_gain(ranked_labels[pos]) / 2f64.powi(max_grade as i32);
        acc += continue_prob * stop / (pos + 1) as f64;
        continue_prob *= 1.0 - stop;
    }
    acc
}

/// Expected reciprocal rank under the cascade model with stop
/// probability (2^label − 1) / 2^max, where max is the highest grade in
/// the list, normalized by the ideal ordering's value; 0 when nothing is
/// relevant.
pub fn oracle_nerr_at_k(ranked_labels: &[u32], k: usize) -> f64 {
    let max_grade = ranked_labels.iter().copied().max().unwrap_or(0);
    if max_grade == 0 {
        return 0.0;
    }
    let mut ideal = Vec::with_capacity(ranked_labels.len());
    for grade in (0..=max_grade).rev() {
        for &l in ranked_labels {
            if l == grade {
                ideal.push(l);
            }
        }
    }
    oracle_err(ranked_labels, k, max_grade) / oracle_err(&ideal, k, max_grade)
}

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let m = used.len();
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                extend(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

/// All length-`m` label vectors over `0..=max_grade`, counted in base
/// `max_grade + 1`.
pub fn label_assignments(m: usize, max_grade: u32) -> Vec<Vec<u32>> {
    let base = max_grade as usize + 1;
    let total = base.pow(m as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut v = Vec::with_capacity(m);
        let mut rest = code;
        for _ in 0..m {
            v.push((rest % base) as u32);
            rest /= base;
        }
        out.push(v);
    }
    out
}

/// Central finite-difference gradient of `f` at `y` with step `h`.
pub fn fd_grad(mut f: impl FnMut(&[f64]) -> f64, y: &[f64], h: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(y.len());
    let mut probe = y.to_vec();
    for i in 0..y.len() {
        probe[i] = y[i] + h;
        let up = f(&probe);
        probe[i] = y[i] - h;
        let down = f(&probe);
        probe[i] = y[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Largest componentwise difference between two vectors, relative to the
/// larger of the two max-norms.  Returns 0 when both vectors are
/// essentially zero.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    let scale = a
        .iter()
        .chain(b)
        .fold(0f64, |acc, &v| acc.max(v.abs()));
    if scale < 1e-12 {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .fold(0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
        / scale
}
