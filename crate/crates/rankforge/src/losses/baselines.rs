//! Classical listwise baselines: ListNet (top-one) and ListMLE.
//!
//! Both treat the score vector as the parameter of a distribution over
//! rankings and minimize a cross entropy / negative log-likelihood, so their
//! gradients are smooth everywhere and independent of the rank-derivation
//! machinery. They serve as reference points for the metric-driven losses.

use super::LossOutput;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn validate(y: &[f64], labels: &[u32]) {
    assert_eq!(
        y.len(),
        labels.len(),
        "scores and labels must have the same length"
    );
    assert!(!y.is_empty(), "listwise losses need at least one document");
    assert!(y.iter().all(|v| v.is_finite()), "scores must be finite");
}

/// `log(exp(a) + exp(b))` without overflow; `a` may be negative infinity.
fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Numerically stable softmax together with its log-normalizer.
fn softmax(v: &[f64]) -> (Vec<f64>, f64) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut out: Vec<f64> = v
        .iter()
        .map(|&x| {
            let e = (x - max).exp();
            sum += e;
            e
        })
        .collect();
    for p in &mut out {
        *p /= sum;
    }
    (out, max + sum.ln())
}

/// ListNet with the top-one target: cross entropy from the softmax of the
/// labels to the softmax of the scores.
///
/// `L = -Σ_i p*_i · log p_i` with `p* = softmax(labels)` and
/// `p = softmax(y)`; the gradient is the classic `p - p*`. The loss is
/// minimized (at the entropy of `p*`) when the score softmax matches the
/// label softmax. Queries whose labels are all zero are flagged but still
/// scored: the uniform target is well defined.
pub fn listnet_top1_loss(y: &[f64], labels: &[u32]) -> LossOutput {
    validate(y, labels);
    let label_scores: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let (p_star, _) = softmax(&label_scores);
    let (p, log_z) = softmax(y);
    // -Σ p*_i (y_i - log Z), accumulated in the stable shifted form.
    let mut value = 0.0;
    for (pi_star, &yi) in p_star.iter().zip(y) {
        value -= pi_star * (yi - log_z);
    }
    let grad: Vec<f64> = p.iter().zip(&p_star).map(|(&pi, &si)| pi - si).collect();
    LossOutput {
        value,
        grad,
        flagged: labels.iter().all(|&l| l == 0),
    }
}

/// ListMLE: negative log-likelihood of a target permutation under the
/// Plackett-Luce model induced by the scores.
///
/// The target permutation sorts documents by descending label; ties are
/// broken by a random shuffle seeded with `shuffle_seed`, so repeated calls
/// with the same seed are deterministic while different seeds sample
/// different valid target orders. `L = Σ_t [log Σ_{s ≥ t} exp(y_{π_s}) -
/// y_{π_t}]`, accumulated with suffix log-sum-exp for stability. Queries
/// whose labels are all zero are flagged but still scored: the permutation
/// is then pure noise, which is inherent to the method.
pub fn listmle_loss(y: &[f64], labels: &[u32], shuffle_seed: u64) -> LossOutput {
    validate(y, labels);
    let m = y.len();
    let mut pi: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    pi.shuffle(&mut rng);
    pi.sort_by(|&a, &b| labels[b].cmp(&labels[a]));

    // lse[t] = log Σ_{s >= t} exp(y[pi[s]]), built back to front.
    let mut lse = vec![0.0; m];
    let mut acc = f64::NEG_INFINITY;
    for t in (0..m).rev() {
        acc = logaddexp(acc, y[pi[t]]);
        lse[t] = acc;
    }
    let mut value = 0.0;
    for t in 0..m {
        value += lse[t] - y[pi[t]];
    }
    // d L / d y_{π_s} = Σ_{t <= s} softmax over suffix t at π_s, minus 1.
    let mut grad = vec![0.0; m];
    for t in 0..m {
        for &doc in &pi[t..] {
            grad[doc] += (y[doc] - lse[t]).exp();
        }
        grad[pi[t]] -= 1.0;
    }
    LossOutput {
        value,
        grad,
        flagged: labels.iter().all(|&l| l == 0),
    }
}
