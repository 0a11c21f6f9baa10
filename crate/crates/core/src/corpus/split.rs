use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::generate::largest_remainder;
use crate::assessment::GradeLabel;
use crate::error::{Error, Result};
use crate::featureset::{DefectRecord, LabeledRecord};
use crate::rng::{stream, streams};

/// Per-class counts of the labeled training and test sets plus the size of
/// the unlabeled pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: [usize; 4],
    pub test: [usize; 4],
    pub unlabeled: usize,
}

impl SplitSpec {
    /// 489 training and 511 test records in the reference class proportions
    /// and 1250 unlabeled records; exactly partitions a 2250-record corpus.
    pub fn reference() -> Self {
        Self {
            train: [288, 126, 58, 17],
            test: [320, 114, 49, 28],
            unlabeled: 1250,
        }
    }

    /// Half-and-half stratified labeled split with the remainder unlabeled.
    /// The 2250/1000 shape yields [`SplitSpec::reference`].
    pub fn for_corpus(n_records: usize, labeled_count: usize, class_mix: &[f64; 4]) -> Self {
        if n_records == 2250 && labeled_count == 1000 {
            return Self::reference();
        }
        let labeled = largest_remainder(class_mix, labeled_count);
        let train: [usize; 4] = std::array::from_fn(|k| labeled[k].div_ceil(2));
        let test: [usize; 4] = std::array::from_fn(|k| labeled[k] - train[k]);
        Self {
            train,
            test,
            unlabeled: n_records - labeled_count,
        }
    }

    pub fn labeled_total(&self) -> usize {
        self.train.iter().chain(&self.test).sum()
    }
}

/// Labeled sets carry their grade; the unlabeled pool does not, and its
/// ground truth is kept apart for oracle evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<LabeledRecord>,
    pub test: Vec<LabeledRecord>,
    pub unlabeled: Vec<DefectRecord>,
    pub unlabeled_truth: Vec<GradeLabel>,
}

pub fn split(records: &[DefectRecord], grades: &[GradeLabel], spec: &SplitSpec, seed: u64) -> Result<Split> {
    if records.len() != grades.len() {
        return Err(Error::invalid(format!(
            "{} records but {} grades",
            records.len(),
            grades.len()
        )));
    }
    let mut rng = stream(seed, streams::SPLIT);
    let mut by_class: [Vec<usize>; 4] = Default::default();
    for (i, g) in grades.iter().enumerate() {
        by_class[g.index()].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut rest = Vec::new();
    for (k, pool) in by_class.iter_mut().enumerate() {
        let need = spec.train[k] + spec.test[k];
        if need > pool.len() {
            return Err(Error::invalid(format!(
                "class {} has {} records, the split asks for {need}",
                GradeLabel::ALL[k],
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        train.extend_from_slice(&pool[..spec.train[k]]);
        test.extend_from_slice(&pool[spec.train[k]..need]);
        rest.extend_from_slice(&pool[need..]);
    }
    if spec.unlabeled > rest.len() {
        return Err(Error::invalid(format!(
            "{} records remain after the labeled split, the split asks for {} unlabeled",
            rest.len(),
            spec.unlabeled
        )));
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let mut unlabeled = rest[..spec.unlabeled].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    unlabeled.sort_unstable();

    let labeled = |idx: &[usize]| -> Vec<LabeledRecord> {
        idx.iter()
            .map(|&i| LabeledRecord {
                record: records[i].clone(),
                grade: grades[i],
            })
            .collect()
    };
    Ok(Split {
        train: labeled(&train),
        test: labeled(&test),
        unlabeled: unlabeled.iter().map(|&i| records[i].clone()).collect(),
        unlabeled_truth: unlabeled.iter().map(|&i| grades[i]).collect(),
    })
}
