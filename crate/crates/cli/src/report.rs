use std::collections::BTreeMap;

use linecond::eval::{confusion, f1_report, ConfusionMatrix, F1Report};
use linecond::{Error, GradeLabel, RecordKey};
use serde::Serialize;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Scores of one prediction set against the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    pub samples: u64,
    pub confusion: ConfusionMatrix,
    pub f1: F1Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub scores: Scores,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Scores>,
    /// `scores.f1.macro_f1 − baseline.f1.macro_f1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_f1_delta: Option<f64>,
}

/// Scores predictions keyed by record against labels covering exactly the
/// same records.
pub fn score(predicted: &[(RecordKey, GradeLabel)], truth: &[(RecordKey, GradeLabel)]) -> Result<Scores, Error> {
    let lookup: BTreeMap<&RecordKey, GradeLabel> = truth.iter().map(|(k, g)| (k, *g)).collect();
    let mut actual = Vec::with_capacity(predicted.len());
    let mut seen = BTreeMap::new();
    for (key, _) in predicted {
        let g = lookup
            .get(key)
            .ok_or_else(|| Error::InvalidInput(format!("prediction for {key} has no true label")))?;
        if seen.insert(key, ()).is_some() {
            return Err(Error::InvalidInput(format!("record {key} is predicted twice")));
        }
        actual.push(*g);
    }
    if let Some((key, _)) = truth.iter().find(|(k, _)| !seen.contains_key(k)) {
        return Err(Error::InvalidInput(format!("labeled record {key} has no prediction")));
    }
    let grades: Vec<GradeLabel> = predicted.iter().map(|(_, g)| *g).collect();
    let cm = confusion(&actual, &grades)?;
    Ok(Scores {
        samples: cm.total(),
        confusion: cm,
        f1: f1_report(&cm),
    })
}

pub fn render(scores: &Scores) -> String {
    let mut out = format!("{}", scores.confusion);
    out.push_str(&format!("{:<14}{:>10}{:>10}{:>10}\n", "grade", "precision", "recall", "F1"));
    for g in GradeLabel::ALL {
        let k = g.index();
        if scores.f1.present[k] {
            out.push_str(&format!(
                "{:<14}{:>10.4}{:>10.4}{:>10.4}\n",
                g.name(),
                scores.f1.precision[k],
                scores.f1.recall[k],
                scores.f1.per_class[k]
            ));
        } else {
            out.push_str(&format!("{:<14}{:>10}{:>10}{:>10}\n", g.name(), "-", "-", "-"));
        }
    }
    out.push_str(&format!("macro F1 {:.4} over {} samples\n", scores.f1.macro_f1, scores.samples));
    out
}
