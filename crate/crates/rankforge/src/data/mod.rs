//! Dataset handling: LETOR-format I/O, per-query feature normalization,
//! deterministic fold splits, and synthetic data generators.
//!
//! A dataset is a list of query groups; each group holds the graded
//! labels and the dense feature rows of that query's documents.  Feature
//! ids in files are 1-based and may be sparse; columns are materialized
//! densely with absent features at 0.0, and the feature dimension is the
//! dataset-wide maximum id.

mod letor;
mod synthetic;

pub use letor::{parse_letor, parse_letor_str, to_letor_string, write_letor};
pub use synthetic::{generate_synthetic_ranking_data, generate_uniform_vectors};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::GRADE_MAX;
use crate::numerics::DenseMatrix;

/// One query's documents: graded labels plus a dense feature row per
/// document.  Groups are never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub qid: String,
    /// Graded labels in `0..=GRADE_MAX`, one per document.
    pub labels: Vec<u32>,
    /// `m x d` feature rows, one per document.
    pub features: DenseMatrix,
}

impl QueryGroup {
    /// Number of documents.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A parsed dataset: query groups over a common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub groups: Vec<QueryGroup>,
    /// Dataset-wide feature dimension (maximum 1-based feature id seen).
    pub dim: usize,
    /// Largest label value the grade scale allows.
    pub grade_max: u32,
}

impl Dataset {
    /// Total number of documents across groups.
    pub fn n_docs(&self) -> usize {
        self.groups.iter().map(QueryGroup::len).sum()
    }

    /// Clone out the groups at `indices`, in the given order, as a
    /// standalone dataset with the same feature dimension.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            groups: indices.iter().map(|&i| self.groups[i].clone()).collect(),
            dim: self.dim,
            grade_max: self.grade_max,
        }
    }
}

/// Z-score each feature column within the group: subtract the column
/// mean, divide by the population standard deviation.  Constant columns
/// (and every column when the group has a single document) come out
/// all-zero instead of dividing by zero.
pub fn zscore_normalize(group: &QueryGroup) -> QueryGroup {
    let m = group.len();
    let d = group.features.cols();
    let mut out = DenseMatrix::zeros(m, d);
    if m == 0 || d == 0 {
        return QueryGroup {
            qid: group.qid.clone(),
            labels: group.labels.clone(),
            features: out,
        };
    }
    let mf = m as f64;
    for c in 0..d {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut mean = 0.0;
        for r in 0..m {
            let v = group.features.get(r, c);
            min = min.min(v);
            max = max.max(v);
            mean += v;
        }
        mean /= mf;
        if m == 1 || min == max {
            // Constant column: no scale information, map to zeros.
            continue;
        }
        let mut var = 0.0;
        for r in 0..m {
            let dv = group.features.get(r, c) - mean;
            var += dv * dv;
        }
        var /= mf;
        let std = var.sqrt();
        for r in 0..m {
            out.set(r, c, (group.features.get(r, c) - mean) / std);
        }
    }
    QueryGroup {
        qid: group.qid.clone(),
        labels: group.labels.clone(),
        features: out,
    }
}

/// Z-score every group of a dataset.
pub fn zscore_dataset(ds: &Dataset) -> Dataset {
    Dataset {
        groups: ds.groups.iter().map(zscore_normalize).collect(),
        dim: ds.dim,
        grade_max: ds.grade_max,
    }
}

/// One rotation of a k-fold split, holding group indices into
/// `Dataset::groups`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    /// 1-based fold number.
    pub fold_index: usize,
    pub train: Vec<usize>,
    pub vali: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic k-fold split by query group.
///
/// Groups are shuffled once with the seed and partitioned into `k`
/// near-equal subsets.  Fold `f` (1-based) takes subset `f-1` as test,
/// the next subset (cyclically) as validation, and the remaining `k-2`
/// subsets as training data — with `k = 5` that is the 3:1:1 protocol.
/// Every group appears in exactly one test subset across folds.
pub fn make_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 3 {
        return Err(Error::Config(format!(
            "k-fold split needs at least 3 subsets, got {k}"
        )));
    }
    let n = ds.groups.len();
    if n < k {
        return Err(Error::Data(format!(
            "cannot split {n} query groups into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // Subset sizes differ by at most one; the first n % k subsets get the
    // extra element.
    let base = n / k;
    let extra = n % k;
    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut start = 0usize;
    for s in 0..k {
        let size = base + usize::from(s < extra);
        let mut subset: Vec<usize> = order[start..start + size].to_vec();
        subset.sort_unstable();
        subsets.push(subset);
        start += size;
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let test = subsets[f].clone();
        let vali = subsets[(f + 1) % k].clone();
        let mut train = Vec::with_capacity(n - test.len() - vali.len());
        for (s, subset) in subsets.iter().enumerate() {
            if s != f && s != (f + 1) % k {
                train.extend_from_slice(subset);
            }
        }
        train.sort_unstable();
        folds.push(FoldSplit {
            fold_index: f + 1,
            train,
            vali,
            test,
        });
    }
    Ok(folds)
}

/// The largest label value allowed in datasets (re-exported for
/// convenience alongside the parser that enforces it).
pub fn grade_max() -> u32 {
    GRADE_MAX
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(rows: &[Vec<f64>]) -> QueryGroup {
        QueryGroup {
            qid: "q".to_string(),
            labels: vec![0; rows.len()],
            features: DenseMatrix::from_rows(rows),
        }
    }

    #[test]
    fn zscore_basic_column() {
        let g = group(&[vec![1.0], vec![2.0], vec![3.0]]);
        let z = zscore_normalize(&g);
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z.features.get(0, 0) + expect).abs() < 1e-12);
        assert!(z.features.get(1, 0).abs() < 1e-12);
        assert!((z.features.get(2, 0) - expect).abs() < 1e-12);
        // Matches the familiar value for [1, 2, 3].
        assert!((z.features.get(2, 0) - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn zscore_constant_column_and_singleton_group() {
        let g = group(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]]);
        let z = zscore_normalize(&g);
        for r in 0..3 {
            assert_eq!(z.features.get(r, 0), 0.0, "constant column must zero out");
        }
        assert!(z.features.get(2, 1) > 0.0);

        let single = group(&[vec![7.0, -2.0]]);
        let z1 = zscore_normalize(&single);
        assert_eq!(z1.features.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn zscore_output_has_zero_mean_unit_variance() {
        let g = group(&[
            vec![1.0, 10.0],
            vec![4.0, -3.0],
            vec![-2.0, 6.5],
            vec![0.5, 2.25],
        ]);
        let z = zscore_normalize(&g);
        for c in 0..2 {
            let mut mean = 0.0;
            for r in 0..4 {
                mean += z.features.get(r, c);
            }
            mean /= 4.0;
            let mut var = 0.0;
            for r in 0..4 {
                let d = z.features.get(r, c) - mean;
                var += d * d;
            }
            var /= 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
        // Idempotent within tolerance.
        let zz = zscore_normalize(&z);
        for r in 0..4 {
            for c in 0..2 {
                assert!((zz.features.get(r, c) - z.features.get(r, c)).abs() < 1e-12);
            }
        }
    }

    fn dataset_with_groups(n: usize) -> Dataset {
        let groups = (0..n)
            .map(|i| QueryGroup {
                qid: format!("{}", i + 1),
                labels: vec![1, 0],
                features: DenseMatrix::from_rows(&[vec![i as f64], vec![-(i as f64)]]),
            })
            .collect();
        Dataset {
            groups,
            dim: 1,
            grade_max: GRADE_MAX,
        }
    }

    #[test]
    fn five_folds_over_ten_groups_have_expected_shape() {
        let ds = dataset_with_groups(10);
        let folds = make_folds(&ds, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let mut test_seen = vec![false; 10];
        for (i, f) in folds.iter().enumerate() {
            assert_eq!(f.fold_index, i + 1);
            assert_eq!(f.test.len(), 2);
            assert_eq!(f.vali.len(), 2);
            assert_eq!(f.train.len(), 6);
            let mut all: Vec<usize> = f
                .train
                .iter()
                .chain(&f.vali)
                .chain(&f.test)
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..10).collect::<Vec<_>>(), "parts must partition");
            for &t in &f.test {
                assert!(!test_seen[t], "group {t} tested twice");
                test_seen[t] = true;
            }
        }
        assert!(test_seen.iter().all(|&b| b), "every group tested once");
    }

    #[test]
    fn folds_are_deterministic_in_the_seed() {
        let ds = dataset_with_groups(13);
        assert_eq!(make_folds(&ds, 5, 3).unwrap(), make_folds(&ds, 5, 3).unwrap());
        assert_ne!(make_folds(&ds, 5, 3).unwrap(), make_folds(&ds, 5, 4).unwrap());
    }

    #[test]
    fn too_few_groups_is_a_data_error() {
        let ds = dataset_with_groups(4);
        match make_folds(&ds, 5, 0) {
            Err(Error::Data(msg)) => assert!(msg.contains("4 query groups")),
            other => panic!("expected data error, got {other:?}"),
        }
        match make_folds(&ds, 2, 0) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn uneven_group_counts_spread_the_remainder() {
        let ds = dataset_with_groups(12);
        let folds = make_folds(&ds, 5, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 3, 3]);
    }
}
