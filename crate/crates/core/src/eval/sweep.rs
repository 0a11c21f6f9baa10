use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, f1_report, F1Report};
use crate::assessment::GradeLabel;
use crate::error::{Error, Result};
use crate::featureset::{Codebook, DefectRecord, LabeledRecord};
use crate::pipeline::{fit_classifier, FeatureModel, PipelineConfig};
use crate::rng::{stream, streams};
use crate::ssl::{predict, CorrectedPrototypeSet};
use crate::embedding::embed_all;

/// Test scores of one `(fraction, seed)` point; both reports are absent when
/// the demotion left some class without labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub fraction: f64,
    pub seed: u64,
    pub labeled_count: usize,
    pub semi_supervised: Option<F1Report>,
    pub supervised: Option<F1Report>,
}

impl SweepRun {
    pub fn skipped(&self) -> bool {
        self.semi_supervised.is_none()
    }

    pub fn report(&self, variant: SweepVariant) -> Option<&F1Report> {
        match variant {
            SweepVariant::SemiSupervised => self.semi_supervised.as_ref(),
            SweepVariant::Supervised => self.supervised.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariant {
    SemiSupervised,
    /// Uncorrected labeled centers, the `alpha = 1` limit.
    Supervised,
}

/// Mean and sample standard deviation of macro-F1 over the seeds of one
/// fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub labeled_count: f64,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub skipped: usize,
}

/// Labels kept per class for a fraction, or `None` if a class would lose all
/// of its labels.
fn kept_per_class(counts: [usize; 4], fraction: f64) -> Option<[usize; 4]> {
    let kept = counts.map(|n| (fraction * n as f64).round() as usize);
    kept.iter().all(|k| *k > 0).then_some(kept)
}

/// Re-runs training and correction with a shrinking share of the training
/// labels, demoting the rest to the unlabeled pool. The label-independent
/// feature stage is fitted once on the base seed and shared by every point.
pub fn label_efficiency_sweep(
    train: &[LabeledRecord],
    test: &[LabeledRecord],
    unlabeled: &[DefectRecord],
    codebook: &Codebook,
    fractions: &[f64],
    seeds: &[u64],
    config: &PipelineConfig,
) -> Result<Vec<SweepRun>> {
    config.validate()?;
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::invalid(format!("sweep fraction {f} is outside (0, 1]")));
    }
    if fractions.is_empty() || seeds.is_empty() || test.is_empty() {
        return Err(Error::invalid("a sweep needs fractions, seeds and a test set"));
    }
    let all: Vec<&DefectRecord> = train.iter().map(|r| &r.record).chain(unlabeled).collect();
    let (features, inputs) = FeatureModel::fit(&all, codebook, config)?;
    let test_records: Vec<DefectRecord> = test.iter().map(|r| r.record.clone()).collect();
    let test_inputs = features.inputs(&test_records)?;
    let actual: Vec<GradeLabel> = test.iter().map(|r| r.grade).collect();

    let mut class_rows: [Vec<usize>; 4] = Default::default();
    for (i, r) in train.iter().enumerate() {
        class_rows[r.grade.index()].push(i);
    }
    let counts = class_rows.clone().map(|rows| rows.len());

    let mut points: Vec<(f64, u64)> = fractions.iter().flat_map(|f| seeds.iter().map(move |s| (*f, *s))).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    points.dedup();

    points
        .par_iter()
        .map(|&(fraction, seed)| {
            let Some(kept) = kept_per_class(counts, fraction) else {
                let labeled_count = counts.iter().map(|n| (fraction * *n as f64).round() as usize).sum();
                return Ok(SweepRun {
                    fraction,
                    seed,
                    labeled_count,
                    semi_supervised: None,
                    supervised: None,
                });
            };
            let mut rng = stream(seed, streams::SWEEP_DEMOTE);
            let mut keep = vec![false; train.len()];
            for (k, rows) in class_rows.iter().enumerate() {
                let mut rows = rows.clone();
                rows.shuffle(&mut rng);
                for &i in &rows[..kept[k]] {
                    keep[i] = true;
                }
            }
            let labeled: Vec<(Vec<f64>, GradeLabel)> = (0..train.len())
                .filter(|&i| keep[i])
                .map(|i| (inputs[i].clone(), train[i].grade))
                .collect();
            let pool: Vec<Vec<f64>> = (0..train.len())
                .filter(|&i| !keep[i])
                .map(|i| inputs[i].clone())
                .chain(inputs[train.len()..].iter().cloned())
                .collect();
            let point_config = PipelineConfig {
                seed,
                ..config.clone()
            };
            let model = fit_classifier(&labeled, &pool, &point_config)?;
            let embedded = embed_all(&model.mlp, &test_inputs)?;
            let score = |centers: &CorrectedPrototypeSet| -> Result<F1Report> {
                let predicted = embedded.iter().map(|v| predict(v, centers).map(|p| p.0)).collect::<Result<Vec<_>>>()?;
                Ok(f1_report(&confusion(&actual, &predicted)?))
            };
            Ok(SweepRun {
                fraction,
                seed,
                labeled_count: labeled.len(),
                semi_supervised: Some(score(&model.corrected)?),
                supervised: Some(score(&CorrectedPrototypeSet::supervised(&model.prototypes))?),
            })
        })
        .collect()
}

pub fn summarize_sweep(runs: &[SweepRun], variant: SweepVariant) -> Vec<SweepPoint> {
    let mut fractions: Vec<f64> = runs.iter().map(|r| r.fraction).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    fractions
        .into_iter()
        .map(|fraction| {
            let at: Vec<&SweepRun> = runs.iter().filter(|r| r.fraction == fraction).collect();
            let scores: Vec<f64> = at.iter().filter_map(|r| r.report(variant)).map(|r| r.macro_f1).collect();
            let n = scores.len();
            let mean = if n > 0 { scores.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std = if n > 1 {
                (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SweepPoint {
                fraction,
                labeled_count: at.iter().map(|r| r.labeled_count as f64).sum::<f64>() / at.len() as f64,
                mean,
                std,
                runs: n,
                skipped: at.len() - n,
            }
        })
        .collect()
}

pub const SWEEP_HEADER: [&str; 8] = [
    "fraction",
    "labeled_count",
    "seed",
    "macro_f1",
    "f1_normal",
    "f1_attention",
    "f1_abnormal",
    "f1_serious",
];

/// One row per run; skipped runs keep their metric cells empty.
pub fn write_sweep_csv<W: Write>(runs: &[SweepRun], variant: SweepVariant, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |source| Error::Csv {
        path: "sweep".into(),
        source,
    };
    w.write_record(SWEEP_HEADER).map_err(wrap)?;
    for r in runs {
        let mut row = vec![r.fraction.to_string(), r.labeled_count.to_string(), r.seed.to_string()];
        match r.report(variant) {
            Some(rep) => {
                row.push(rep.macro_f1.to_string());
                row.extend(rep.per_class.iter().map(f64::to_string));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("sweep", e))
}
