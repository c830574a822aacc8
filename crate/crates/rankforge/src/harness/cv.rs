//! k-fold cross-validation driver.
//!
//! [`cross_validate`] splits the dataset with the fold seed, trains one run
//! per fold, and writes a small tree of reports under the output directory:
//!
//! ```text
//! out/
//!   cv_summary_best.csv       metric,k,mean,n_folds  (best-epoch networks)
//!   cv_summary_final.csv      same, final-epoch networks
//!   cv_per_query_best.csv     fold,qid,metric,k,value
//!   cv_per_query_final.csv    same, final-epoch networks
//!   fold1/
//!     epochs.csv              per-epoch record (no timing column)
//!     run.plotdata            per-epoch series including seconds
//!     best.ckpt, final.ckpt   network checkpoints
//!     eval_best.csv           fold test-set report, best network
//!     eval_final.csv          same, final network
//!   fold2/ ...
//! ```
//!
//! Whether the interesting numbers come from the best-validation epoch or
//! the final epoch depends on the protocol being compared against, so both
//! are always emitted and labeled. All CSV files are byte-stable for a
//! fixed configuration and seed; `run.plotdata` is not (it carries wall
//! clock timings).

use std::fs;
use std::path::Path;

use super::{epochs_csv, evaluate_per_query, plotdata, train, RunConfig};
use crate::data::{make_folds, Dataset};
use crate::error::Result;
use crate::metrics::{EvalReport, MetricKind, QueryEval};
use crate::numerics::save_checkpoint;

/// Cross-validation settings: one training configuration applied to every
/// fold of a seeded split.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub run: RunConfig,
    /// Number of folds (the standard protocol uses 5).
    pub folds: usize,
    /// Seed for the fold partition, independent of the training seed.
    pub folds_seed: u64,
}

/// What one fold produced.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold_index: usize,
    pub best_epoch: usize,
    /// Test-set report of the best-validation-epoch network.
    pub report_best: EvalReport,
    /// Test-set report of the final-epoch network.
    pub report_final: EvalReport,
}

/// Fold outcomes plus the fold-averaged metric grids.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: Vec<FoldOutcome>,
    /// `(metric, cutoff, mean over folds)` rows for best-epoch networks.
    pub summary_best: Vec<(MetricKind, usize, f64)>,
    /// Same for final-epoch networks.
    pub summary_final: Vec<(MetricKind, usize, f64)>,
}

/// Run the full k-fold protocol on `data` and write reports to `out_dir`
/// (created if missing).
pub fn cross_validate(cfg: &CvConfig, data: &Dataset, out_dir: &Path) -> Result<CvOutcome> {
    let splits = make_folds(data, cfg.folds, cfg.folds_seed)?;
    fs::create_dir_all(out_dir)?;

    let mut folds = Vec::with_capacity(splits.len());
    let mut reports_best = Vec::with_capacity(splits.len());
    let mut reports_final = Vec::with_capacity(splits.len());
    let mut per_query_best: Vec<(usize, String, QueryEval)> = Vec::new();
    let mut per_query_final: Vec<(usize, String, QueryEval)> = Vec::new();

    for split in &splits {
        let outcome = train(&cfg.run, data, split)?;
        let fold_dir = out_dir.join(format!("fold{}", split.fold_index));
        fs::create_dir_all(&fold_dir)?;
        fs::write(fold_dir.join("epochs.csv"), epochs_csv(&outcome.records))?;
        fs::write(fold_dir.join("run.plotdata"), plotdata(&outcome.records))?;
        save_checkpoint(&outcome.best_network, &fold_dir.join("best.ckpt"))?;
        save_checkpoint(&outcome.final_network, &fold_dir.join("final.ckpt"))?;

        let test_data = data.subset(&split.test);
        let pq_best = evaluate_per_query(&outcome.best_network, &test_data, &cfg.run.cutoffs)?;
        let pq_final = evaluate_per_query(&outcome.final_network, &test_data, &cfg.run.cutoffs)?;
        let report_best =
            EvalReport::from_queries(&pq_best.iter().map(|(_, ev)| ev.clone()).collect::<Vec<_>>());
        let report_final = EvalReport::from_queries(
            &pq_final.iter().map(|(_, ev)| ev.clone()).collect::<Vec<_>>(),
        );
        fs::write(fold_dir.join("eval_best.csv"), report_best.to_csv())?;
        fs::write(fold_dir.join("eval_final.csv"), report_final.to_csv())?;

        for (qid, ev) in pq_best {
            per_query_best.push((split.fold_index, qid, ev));
        }
        for (qid, ev) in pq_final {
            per_query_final.push((split.fold_index, qid, ev));
        }
        folds.push(FoldOutcome {
            fold_index: split.fold_index,
            best_epoch: outcome.best_epoch,
            report_best: report_best.clone(),
            report_final: report_final.clone(),
        });
        reports_best.push(report_best);
        reports_final.push(report_final);
    }

    let summary_best = average_fold_rows(&reports_best);
    let summary_final = average_fold_rows(&reports_final);
    fs::write(
        out_dir.join("cv_summary_best.csv"),
        summary_csv(&summary_best, splits.len()),
    )?;
    fs::write(
        out_dir.join("cv_summary_final.csv"),
        summary_csv(&summary_final, splits.len()),
    )?;
    fs::write(
        out_dir.join("cv_per_query_best.csv"),
        cv_per_query_csv(&per_query_best),
    )?;
    fs::write(
        out_dir.join("cv_per_query_final.csv"),
        cv_per_query_csv(&per_query_final),
    )?;

    Ok(CvOutcome {
        folds,
        summary_best,
        summary_final,
    })
}

/// Average the per-fold macro means cell by cell. All folds carry the same
/// metric grid by construction.
fn average_fold_rows(reports: &[EvalReport]) -> Vec<(MetricKind, usize, f64)> {
    let grid: Vec<(MetricKind, usize)> =
        reports[0].rows.iter().map(|&(m, k, _)| (m, k)).collect();
    let mut sums = vec![0.0; grid.len()];
    for rep in reports {
        assert_eq!(rep.rows.len(), grid.len(), "fold reports share one grid");
        for (i, &(m, k, v)) in rep.rows.iter().enumerate() {
            assert_eq!((m, k), grid[i], "fold reports share one grid");
            sums[i] += v;
        }
    }
    let n = reports.len() as f64;
    grid.into_iter()
        .zip(sums)
        .map(|((m, k), s)| (m, k, s / n))
        .collect()
}

fn summary_csv(rows: &[(MetricKind, usize, f64)], n_folds: usize) -> String {
    let mut out = String::from("metric,k,mean,n_folds\n");
    for &(m, k, v) in rows {
        out.push_str(&format!("{m},{k},{v},{n_folds}\n"));
    }
    out
}

fn cv_per_query_csv(rows: &[(usize, String, QueryEval)]) -> String {
    let mut out = String::from("fold,qid,metric,k,value\n");
    for (fold, qid, ev) in rows {
        for &(m, k, v) in &ev.values {
            out.push_str(&format!("{fold},{qid},{m},{k},{v}\n"));
        }
    }
    out
}
