use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assessment::GradeLabel;
use crate::error::{Error, Result};

/// Rows are actual grades, columns predicted grades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, actual: GradeLabel, predicted: GradeLabel) -> u64 {
        self.counts[actual.index()][predicted.index()]
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let report = f1_report(self);
        writeln!(
            f,
            "{:<14}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
            "actual\\pred", "Normal", "Attention", "Abnormal", "Serious", "F1", "Overall"
        )?;
        for g in GradeLabel::ALL {
            let row = self.counts[g.index()];
            write!(f, "{:<14}{:>10}{:>10}{:>10}{:>10}{:>10.3}", g.name(), row[0], row[1], row[2], row[3], report.per_class[g.index()])?;
            if g == GradeLabel::Normal {
                write!(f, "{:>10.3}", report.macro_f1)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn confusion(actual: &[GradeLabel], predicted: &[GradeLabel]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("cannot build a confusion matrix from no samples"));
    }
    let mut cm = ConfusionMatrix::default();
    for (a, p) in actual.iter().zip(predicted) {
        cm.counts[a.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: [f64; 4],
    pub precision: [f64; 4],
    pub recall: [f64; 4],
    /// Classes that occur among actual or predicted labels; only these enter
    /// the macro mean.
    pub present: [bool; 4],
    pub macro_f1: f64,
}

/// Per-class `F1 = 2TP / (2TP + FP + FN)` and their unweighted mean over
/// the classes that appear at all.
pub fn f1_report(cm: &ConfusionMatrix) -> F1Report {
    let mut per_class = [0.0; 4];
    let mut precision = [0.0; 4];
    let mut recall = [0.0; 4];
    let mut present = [false; 4];
    for k in 0..4 {
        let tp = cm.counts[k][k] as f64;
        let fp = (0..4).filter(|&a| a != k).map(|a| cm.counts[a][k]).sum::<u64>() as f64;
        let fn_ = (0..4).filter(|&p| p != k).map(|p| cm.counts[k][p]).sum::<u64>() as f64;
        present[k] = tp + fp + fn_ > 0.0;
        if present[k] {
            per_class[k] = 2.0 * tp / (2.0 * tp + fp + fn_);
        }
        if tp + fp > 0.0 {
            precision[k] = tp / (tp + fp);
        }
        if tp + fn_ > 0.0 {
            recall[k] = tp / (tp + fn_);
        }
    }
    let used: Vec<f64> = (0..4).filter(|&k| present[k]).map(|k| per_class[k]).collect();
    let macro_f1 = if used.is_empty() {
        0.0
    } else {
        used.iter().sum::<f64>() / used.len() as f64
    };
    F1Report {
        per_class,
        precision,
        recall,
        present,
        macro_f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) const SUPERVISED: [[u64; 4]; 4] = [[287, 25, 8, 0], [14, 85, 15, 0], [0, 12, 29, 8], [0, 0, 8, 20]];
    pub(crate) const SEMI_SUPERVISED: [[u64; 4]; 4] = [[298, 18, 4, 0], [10, 102, 2, 0], [0, 4, 43, 2], [0, 0, 4, 24]];

    #[test]
    fn reference_tables() {
        let r = f1_report(&ConfusionMatrix { counts: SUPERVISED });
        for (a, b) in r.per_class.iter().zip([0.924, 0.720, 0.532, 0.714]) {
            assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
        }
        assert!((r.macro_f1 - 0.723).abs() <= 1e-3);
        let s = f1_report(&ConfusionMatrix { counts: SEMI_SUPERVISED });
        for (a, b) in s.per_class.iter().zip([0.949, 0.857, 0.843, 0.889]) {
            assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
        }
        assert!((s.macro_f1 - 0.885).abs() <= 1e-3);
        assert!((s.macro_f1 - r.macro_f1 - 0.162).abs() <= 1e-3);
    }

    #[test]
    fn confusion_basics() {
        let y = [GradeLabel::Normal, GradeLabel::Serious, GradeLabel::Abnormal];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!(cm.total(), 3);
        assert_eq!(cm.get(GradeLabel::Serious, GradeLabel::Serious), 1);
        let cm = confusion(&[GradeLabel::Normal], &[GradeLabel::Serious]).unwrap();
        assert_eq!(cm.counts[0][3], 1);
        assert_eq!(cm.total(), 1);
        assert!(confusion(&y, &y[..2]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn confusion_matches_counting_oracle() {
        let mut rng = stream(4, 0);
        let a: Vec<GradeLabel> = (0..300).map(|_| GradeLabel::ALL[rng.random_range(0..4)]).collect();
        let p: Vec<GradeLabel> = (0..300).map(|_| GradeLabel::ALL[rng.random_range(0..4)]).collect();
        let cm = confusion(&a, &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let naive = (0..300).filter(|&n| a[n].index() == i && p[n].index() == j).count() as u64;
                assert_eq!(cm.counts[i][j], naive);
            }
        }
    }

    #[test]
    fn perfect_and_partial_support() {
        let diag = ConfusionMatrix {
            counts: [[5, 0, 0, 0], [0, 3, 0, 0], [0, 0, 2, 0], [0, 0, 0, 1]],
        };
        let r = f1_report(&diag);
        assert_eq!(r.per_class, [1.0; 4]);
        assert_eq!(r.macro_f1, 1.0);

        let y = [GradeLabel::Normal, GradeLabel::Normal, GradeLabel::Abnormal];
        let r = f1_report(&confusion(&y, &y).unwrap());
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.present, [true, false, true, false]);

        // Support without a single hit scores zero and still counts.
        let r = f1_report(&confusion(&[GradeLabel::Serious, GradeLabel::Normal], &[GradeLabel::Normal, GradeLabel::Normal]).unwrap());
        assert_eq!(r.per_class[3], 0.0);
        assert!((r.macro_f1 - (2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn table_layout_prints() {
        let text = ConfusionMatrix { counts: SEMI_SUPERVISED }.to_string();
        assert!(text.contains("Normal") && text.contains("0.885") && text.contains("298"));
    }

    proptest! {
        #[test]
        fn scaling_and_relabeling_invariance(
            raw in prop::collection::vec(0u64..50, 16),
            scale in 1u64..7,
            perm_seed in 0u64..24,
        ) {
            let mut counts = [[0u64; 4]; 4];
            for (i, v) in raw.iter().enumerate() {
                counts[i / 4][i % 4] = *v;
            }
            let cm = ConfusionMatrix { counts };
            let base = f1_report(&cm);
            let mut scaled = cm;
            scaled.counts.iter_mut().flatten().for_each(|v| *v *= scale);
            let s = f1_report(&scaled);
            for k in 0..4 {
                prop_assert!((base.per_class[k] - s.per_class[k]).abs() < 1e-12);
            }

            let mut perm = [0usize, 1, 2, 3];
            let mut r = perm_seed;
            for i in (1..4).rev() {
                perm.swap(i, (r % (i as u64 + 1)) as usize);
                r /= i as u64 + 1;
            }
            let mut relabeled = ConfusionMatrix::default();
            for a in 0..4 {
                for p in 0..4 {
                    relabeled.counts[perm[a]][perm[p]] = cm.counts[a][p];
                }
            }
            prop_assert!((f1_report(&relabeled).macro_f1 - base.macro_f1).abs() < 1e-12);
        }
    }
}
