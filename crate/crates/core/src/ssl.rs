//! Semi-supervised prototype classifier.
//!
//! Class centers start as the mean labeled embedding of each grade.
//! Unlabeled embeddings are hard-assigned to their nearest center and each
//! center is then blended with the mean of its pseudo-labeled members:
//! `c'_k = α·c_k + (1 − α)·mean(pseudo_k)`. The blend repeats until the
//! centers stop moving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assessment::GradeLabel;
use crate::error::{Error, Result};
use crate::numerics::euclidean_distance;

pub const CLASS_COUNT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    /// One center per grade, indexed by [`GradeLabel::index`].
    pub centers: Vec<Vec<f64>>,
    pub support_counts: [usize; CLASS_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedPrototypeSet {
    pub centers: Vec<Vec<f64>>,
    pub alpha: f64,
    pub iterations_run: usize,
    /// Pseudo-label counts from the final iteration.
    pub pseudo_counts: [usize; CLASS_COUNT],
    /// Largest center displacement of every iteration.
    pub displacement_trace: Vec<f64>,
}

impl CorrectedPrototypeSet {
    /// The uncorrected centers, as if no unlabeled data existed.
    pub fn supervised(base: &PrototypeSet) -> Self {
        Self {
            centers: base.centers.clone(),
            alpha: 1.0,
            iterations_run: 0,
            pseudo_counts: [0; CLASS_COUNT],
            displacement_trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior {
    pub probs: [f64; CLASS_COUNT],
}

impl ClassPosterior {
    pub fn get(&self, grade: GradeLabel) -> f64 {
        self.probs[grade.index()]
    }

    /// Most probable grade; ties go to the lower code.
    pub fn argmax(&self) -> GradeLabel {
        let mut best = 0;
        for k in 1..CLASS_COUNT {
            if self.probs[k] > self.probs[best] {
                best = k;
            }
        }
        GradeLabel::ALL[best]
    }
}

/// Per-grade mean embedding. Every grade needs at least one sample.
pub fn compute_prototypes<'a>(labeled: impl IntoIterator<Item = (&'a [f64], GradeLabel)>) -> Result<PrototypeSet> {
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); CLASS_COUNT];
    let mut counts = [0usize; CLASS_COUNT];
    let mut dim = None;
    for (v, g) in labeled {
        if *dim.get_or_insert(v.len()) != v.len() {
            return Err(Error::invalid("labeled embeddings differ in dimension"));
        }
        let k = g.index();
        if sums[k].is_empty() {
            sums[k] = vec![0.0; v.len()];
        }
        for (s, x) in sums[k].iter_mut().zip(v) {
            *s += x;
        }
        counts[k] += 1;
    }
    if let Some(k) = counts.iter().position(|c| *c == 0) {
        return Err(Error::insufficient(format!(
            "no labeled samples of class {}",
            GradeLabel::ALL[k]
        )));
    }
    let centers = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| s.into_iter().map(|x| x / n as f64).collect())
        .collect();
    Ok(PrototypeSet {
        centers,
        support_counts: counts,
    })
}

/// `softmax(−d)` with the smallest distance subtracted first.
pub fn softmax_neg_distances(distances: &[f64]) -> Vec<f64> {
    let shift = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = distances.iter().map(|d| (-(d - shift)).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn class_posteriors(v: &[f64], centers: &[Vec<f64>]) -> Result<ClassPosterior> {
    if centers.len() != CLASS_COUNT {
        return Err(Error::invalid(format!("expected {CLASS_COUNT} centers, got {}", centers.len())));
    }
    if v.iter().chain(centers.iter().flatten()).any(|x| !x.is_finite()) {
        return Err(Error::invalid("posterior inputs must be finite"));
    }
    if centers.iter().any(|c| c.len() != v.len()) {
        return Err(Error::invalid("embedding and center dimensions differ"));
    }
    let d: Vec<f64> = centers.iter().map(|c| euclidean_distance(v, c)).collect();
    let p = softmax_neg_distances(&d);
    Ok(ClassPosterior {
        probs: [p[0], p[1], p[2], p[3]],
    })
}

/// Nearest center by Euclidean distance; ties go to the lower grade code.
pub fn classify(v: &[f64], centers: &[Vec<f64>]) -> GradeLabel {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate().take(CLASS_COUNT) {
        let d = euclidean_distance(v, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    GradeLabel::ALL[best.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendAnchor {
    /// Always blend toward the labeled centers.
    Labeled,
    /// Blend toward the previous iterate.
    Chained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub anchor: BlendAnchor,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            tol: 1e-6,
            max_iter: 100,
            anchor: BlendAnchor::Labeled,
        }
    }
}

/// Pseudo-label / re-center fixed point. A grade that attracts no
/// unlabeled point keeps its anchor center.
pub fn refine_prototypes(base: &PrototypeSet, unlabeled: &[Vec<f64>], config: &RefineConfig) -> Result<CorrectedPrototypeSet> {
    let alpha = config.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let dim = base.centers.first().map_or(0, Vec::len);
    if unlabeled.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("unlabeled embeddings do not match the center dimension"));
    }
    let mut out = CorrectedPrototypeSet {
        centers: base.centers.clone(),
        alpha,
        iterations_run: 0,
        pseudo_counts: [0; CLASS_COUNT],
        displacement_trace: Vec::new(),
    };
    if unlabeled.is_empty() {
        return Ok(out);
    }

    for _ in 0..config.max_iter {
        let labels: Vec<usize> = unlabeled.par_iter().map(|v| classify(v, &out.centers).index()).collect();
        let mut sums = vec![vec![0.0; dim]; CLASS_COUNT];
        let mut counts = [0usize; CLASS_COUNT];
        for (v, &k) in unlabeled.iter().zip(&labels) {
            counts[k] += 1;
            for (s, x) in sums[k].iter_mut().zip(v) {
                *s += x;
            }
        }
        let mut displacement: f64 = 0.0;
        let mut next = Vec::with_capacity(CLASS_COUNT);
        for k in 0..CLASS_COUNT {
            let anchor = match config.anchor {
                BlendAnchor::Labeled => &base.centers[k],
                BlendAnchor::Chained => &out.centers[k],
            };
            let center: Vec<f64> = if counts[k] == 0 {
                anchor.clone()
            } else {
                let n = counts[k] as f64;
                anchor
                    .iter()
                    .zip(&sums[k])
                    .map(|(c, s)| alpha * c + (1.0 - alpha) * (s / n))
                    .collect()
            };
            displacement = displacement.max(euclidean_distance(&center, &out.centers[k]));
            next.push(center);
        }
        out.centers = next;
        out.pseudo_counts = counts;
        out.iterations_run += 1;
        out.displacement_trace.push(displacement);
        if displacement < config.tol {
            break;
        }
    }
    Ok(out)
}

/// Grade and posterior of a new embedding against corrected centers.
pub fn predict(v: &[f64], corrected: &CorrectedPrototypeSet) -> Result<(GradeLabel, ClassPosterior)> {
    let posterior = class_posteriors(v, &corrected.centers)?;
    Ok((classify(v, &corrected.centers), posterior))
}
