//! Training and evaluation orchestration.
//!
//! This module turns the building blocks (data, network, losses, metrics)
//! into reproducible experiments:
//!
//! * [`train`] runs the per-query stochastic training loop on one
//!   train/validation/test split and records an [`EpochRecord`] per epoch.
//! * [`evaluate_dataset`] / [`evaluate_per_query`] score a dataset with a
//!   trained network in evaluation mode and aggregate the metric grid.
//! * [`cross_validate`] drives the k-fold protocol and writes the summary,
//!   per-fold, and per-query reports.
//! * [`rank_accuracy_experiment`] measures how closely the smooth and the
//!   hard rank derivations recover true sort ranks on synthetic score
//!   vectors.
//!
//! Determinism is a contract: a configuration plus a seed fully determines
//! every emitted number. All stochastic choices (weight init, epoch
//! shuffles, tie-breaking, ListMLE target shuffles) draw from seeds derived
//! with [`mix_seed`], and wall-clock timings are kept out of the CSV
//! reports (they only appear in the `plotdata` companion files).
//!
//! Features are z-score normalized per query inside the entry points that
//! consume datasets, so callers always pass raw feature values.

mod cv;
mod rankexp;

pub use cv::{cross_validate, CvConfig, CvOutcome, FoldOutcome};
pub use rankexp::{rank_accuracy_experiment, rankexp_csv, RankExpConfig, RankExpRow};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{zscore_dataset, Dataset, FoldSplit};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::metrics::{evaluate_all, ndcg_at_k, sort_by_scores, EvalReport, QueryEval};
use crate::numerics::{AdamState, ArchCode, Network};

/// Domain tags for [`mix_seed`], so the same run seed feeds independent
/// random streams.
const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_TIES: u64 = 3;

/// Derive an independent 64-bit seed from a base seed, a stream tag, and an
/// index, using a splitmix-style finalizer. Same inputs, same output.
pub fn mix_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything a single training run needs besides the data.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub arch: ArchCode,
    pub loss: LossSpec,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
    /// Cutoffs for the final evaluation reports (per-epoch tracking always
    /// uses nDCG@5 regardless).
    pub cutoffs: Vec<usize>,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("training needs at least one epoch".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative and finite, got {}",
                self.l2
            )));
        }
        if self.cutoffs.is_empty() {
            return Err(Error::Config("at least one metric cutoff is required".into()));
        }
        if let Some(&k) = self.cutoffs.iter().find(|&&k| k == 0) {
            return Err(Error::Config(format!("cutoff must be at least 1, got {k}")));
        }
        Ok(())
    }
}

/// Bookkeeping for one training epoch.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Training loss averaged over the epoch's query steps.
    pub mean_train_loss: f64,
    pub train_ndcg5: f64,
    pub vali_ndcg5: f64,
    pub test_ndcg5: f64,
    /// Wall-clock duration of the epoch. Excluded from CSV reports so that
    /// report files stay byte-stable across runs.
    pub seconds: f64,
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Network state after the last epoch.
    pub final_network: Network,
    /// Snapshot from the epoch with the highest validation nDCG@5 (earliest
    /// epoch on ties).
    pub best_network: Network,
    /// 1-based epoch the best snapshot came from.
    pub best_epoch: usize,
    pub records: Vec<EpochRecord>,
}

/// Run the training loop on one split of `data`.
///
/// Each epoch visits the training queries in a freshly shuffled order and
/// takes one optimizer step per query (the query group is the batch). After
/// each epoch the current network is scored in evaluation mode on all three
/// splits. Non-finite scores or losses abort with the offending query id.
pub fn train(cfg: &RunConfig, data: &Dataset, split: &FoldSplit) -> Result<TrainOutcome> {
    cfg.validate()?;
    for (part, name) in [
        (&split.train, "training"),
        (&split.vali, "validation"),
        (&split.test, "test"),
    ] {
        if part.is_empty() {
            return Err(Error::Data(format!("{name} split has no queries")));
        }
    }
    let n_groups = data.groups.len();
    if let Some(&bad) = split
        .train
        .iter()
        .chain(&split.vali)
        .chain(&split.test)
        .find(|&&i| i >= n_groups)
    {
        return Err(Error::Data(format!(
            "split references group {bad} but the dataset has {n_groups} groups"
        )));
    }

    let ds = zscore_dataset(data);
    let mut net = Network::new(cfg.arch, ds.dim, mix_seed(cfg.seed, STREAM_INIT, 0));
    let mut adam = AdamState::new(&mut net);

    let mut records: Vec<EpochRecord> = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0usize;
    let mut best_vali = f64::NEG_INFINITY;
    let mut best_network = net.clone();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order = split.train.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_SHUFFLE, epoch as u64));
        order.shuffle(&mut rng);

        let epoch_seed = mix_seed(cfg.seed, STREAM_TIES, epoch as u64);
        let mut loss_sum = 0.0;
        for (step, &gi) in order.iter().enumerate() {
            let group = &ds.groups[gi];
            let (scores, cache) = net
                .score_train(&group.features)
                .map_err(|e| at_query(e, &group.qid))?;
            let out = cfg
                .loss
                .evaluate(&scores, &group.labels, mix_seed(epoch_seed, STREAM_TIES, step as u64));
            if !out.value.is_finite() || out.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite loss for query {} at epoch {epoch}",
                    group.qid
                )));
            }
            loss_sum += out.value;
            let grads = net.backward_scores(&cache, &out.grad);
            adam.apply(&mut net, &grads, cfg.lr, cfg.l2);
        }

        let record = EpochRecord {
            epoch,
            mean_train_loss: loss_sum / order.len() as f64,
            train_ndcg5: mean_ndcg5(&net, &ds, &split.train)?,
            vali_ndcg5: mean_ndcg5(&net, &ds, &split.vali)?,
            test_ndcg5: mean_ndcg5(&net, &ds, &split.test)?,
            seconds: started.elapsed().as_secs_f64(),
        };
        if record.vali_ndcg5 > best_vali {
            best_vali = record.vali_ndcg5;
            best_epoch = epoch;
            best_network = net.clone();
        }
        records.push(record);
    }

    Ok(TrainOutcome {
        final_network: net,
        best_network,
        best_epoch,
        records,
    })
}

fn at_query(e: Error, qid: &str) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("query {qid}: {msg}")),
        other => other,
    }
}

/// Macro-averaged nDCG@5 over the given groups, evaluation-mode scoring.
fn mean_ndcg5(net: &Network, ds: &Dataset, indices: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for &gi in indices {
        let g = &ds.groups[gi];
        let scores = net
            .score_eval(&g.features)
            .map_err(|e| at_query(e, &g.qid))?;
        sum += ndcg_at_k(&sort_by_scores(&scores, &g.labels), 5);
    }
    Ok(sum / indices.len() as f64)
}

/// Per-query metric grids with their query ids, for reports and external
/// significance testing. Features are z-score normalized here.
pub fn evaluate_per_query(
    net: &Network,
    data: &Dataset,
    cutoffs: &[usize],
) -> Result<Vec<(String, QueryEval)>> {
    if cutoffs.is_empty() {
        return Err(Error::Config("at least one metric cutoff is required".into()));
    }
    if let Some(&k) = cutoffs.iter().find(|&&k| k == 0) {
        return Err(Error::Config(format!("cutoff must be at least 1, got {k}")));
    }
    if data.groups.is_empty() {
        return Err(Error::Data("no query groups to evaluate".into()));
    }
    let ds = zscore_dataset(data);
    let mut out = Vec::with_capacity(ds.groups.len());
    for g in &ds.groups {
        let scores = net
            .score_eval(&g.features)
            .map_err(|e| at_query(e, &g.qid))?;
        out.push((g.qid.clone(), evaluate_all(&scores, &g.labels, cutoffs)));
    }
    Ok(out)
}

/// Score a dataset and macro-average the metric grid across its queries.
pub fn evaluate_dataset(net: &Network, data: &Dataset, cutoffs: &[usize]) -> Result<EvalReport> {
    let per_query = evaluate_per_query(net, data, cutoffs)?;
    let evals: Vec<QueryEval> = per_query.into_iter().map(|(_, ev)| ev).collect();
    Ok(EvalReport::from_queries(&evals))
}

/// Render epoch records as CSV. Timing is deliberately omitted so the file
/// is byte-stable for a fixed configuration and seed.
pub fn epochs_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,mean_train_loss,train_ndcg5,vali_ndcg5,test_ndcg5\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.mean_train_loss, r.train_ndcg5, r.vali_ndcg5, r.test_ndcg5
        ));
    }
    out
}

/// Render the plotting series for one run: the epoch metrics plus
/// wall-clock seconds. This is the one per-run output that is not
/// byte-stable across repeats.
pub fn plotdata(records: &[EpochRecord]) -> String {
    let mut out = String::from("# epoch mean_train_loss train_ndcg5 vali_ndcg5 test_ndcg5 seconds\n");
    for r in records {
        out.push_str(&format!(
            "{} {} {} {} {} {:.3}\n",
            r.epoch, r.mean_train_loss, r.train_ndcg5, r.vali_ndcg5, r.test_ndcg5, r.seconds
        ));
    }
    out
}

/// Render per-query metric values as CSV.
pub fn per_query_csv(rows: &[(String, QueryEval)]) -> String {
    let mut out = String::from("qid,metric,k,value\n");
    for (qid, ev) in rows {
        for &(m, k, v) in &ev.values {
            out.push_str(&format!("{qid},{m},{k},{v}\n"));
        }
    }
    out
}
