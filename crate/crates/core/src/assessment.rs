//! Historical condition scoring of line sections.
//!
//! Each of the eight equipment units accumulates weighted demerit points,
//! the line-section score deducts the weighted unit scores from 100, and the
//! score is mapped onto one of four condition grades. Unit weights come from
//! the principal eigenvector of an AHP pairwise-comparison matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNIT_COUNT: usize = 8;

/// Default unit weights, in [`DEFAULT_UNIT_NAMES`] order.
pub const DEFAULT_UNIT_WEIGHTS: [f64; UNIT_COUNT] = [0.062, 0.198, 0.198, 0.110, 0.110, 0.062, 0.062, 0.198];

pub const DEFAULT_UNIT_NAMES: [&str; UNIT_COUNT] = [
    "foundation",
    "towers",
    "fittings",
    "insulators",
    "conductors",
    "lightning_grounding",
    "ancillary",
    "access_environment",
];

/// Condition grade of a line section, ordered from best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GradeLabel {
    Normal = 1,
    Attention = 2,
    Abnormal = 3,
    Serious = 4,
}

impl GradeLabel {
    pub const ALL: [GradeLabel; 4] = [
        GradeLabel::Normal,
        GradeLabel::Attention,
        GradeLabel::Abnormal,
        GradeLabel::Serious,
    ];

    /// Integer code 1..=4.
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Zero-based position, handy for indexing per-class arrays.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn from_code(code: u8) -> Option<Self> {
        code.checked_sub(1).and_then(|i| Self::from_index(i as usize))
    }

    pub fn name(self) -> &'static str {
        match self {
            GradeLabel::Normal => "Normal",
            GradeLabel::Attention => "Attention",
            GradeLabel::Abnormal => "Abnormal",
            GradeLabel::Serious => "Serious",
        }
    }
}

impl fmt::Display for GradeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradeLabel {
    type Err = Error;

    /// Accepts the grade name (any case) or its integer code.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Ok(code) = t.parse::<u8>() {
            return Self::from_code(code).ok_or_else(|| Error::invalid(format!("grade code {code} is not in 1..=4")));
        }
        Self::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::invalid(format!("unknown grade `{t}`")))
    }
}

/// Lower (exclusive) score bounds of the three better grades.
///
/// Scores in `(normal, 100]` are Normal, `(attention, normal]` Attention,
/// `(abnormal, attention]` Abnormal and `[0, abnormal]` Serious.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradeScale {
    pub normal: f64,
    pub attention: f64,
    pub abnormal: f64,
}

impl Default for GradeScale {
    fn default() -> Self {
        Self {
            normal: 95.0,
            attention: 85.0,
            abnormal: 75.0,
        }
    }
}

impl GradeScale {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.abnormal && self.abnormal < self.attention && self.attention < self.normal && self.normal < 100.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "grade bounds must satisfy 0 < abnormal < attention < normal < 100, got {self:?}"
            )))
        }
    }

    pub fn grade_of(&self, score: f64) -> Result<GradeLabel> {
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::invalid(format!("score {score} is outside [0, 100]")));
        }
        Ok(if score > self.normal {
            GradeLabel::Normal
        } else if score > self.attention {
            GradeLabel::Attention
        } else if score > self.abnormal {
            GradeLabel::Abnormal
        } else {
            GradeLabel::Serious
        })
    }
}

/// Maps a line-section score onto the default grade intervals.
pub fn grade_of(score: f64) -> Result<GradeLabel> {
    GradeScale::default().grade_of(score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorDeduction {
    /// 1-based equipment unit.
    pub unit_index: usize,
    /// 1-based indicator within the unit.
    pub indicator_index: usize,
    pub weight: f64,
    pub demerit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScore {
    pub unit_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAssessment {
    pub score: f64,
    pub grade: GradeLabel,
    pub unit_scores: Vec<UnitScore>,
}

/// Weighted sum of one unit's demerits. An empty list scores 0 for unit 1;
/// use [`assess_line`] to score units that may have no deductions.
pub fn score_unit(deductions: &[IndicatorDeduction]) -> Result<UnitScore> {
    let unit_index = deductions.first().map_or(1, |d| d.unit_index);
    score_unit_as(unit_index, deductions)
}

fn score_unit_as(unit_index: usize, deductions: &[IndicatorDeduction]) -> Result<UnitScore> {
    let mut score = 0.0;
    for d in deductions {
        if d.unit_index != unit_index {
            return Err(Error::invalid(format!(
                "deductions mix equipment units {unit_index} and {}",
                d.unit_index
            )));
        }
        if !(d.weight.is_finite() && d.weight >= 0.0 && d.demerit.is_finite() && d.demerit >= 0.0) {
            return Err(Error::invalid(format!(
                "unit {} indicator {}: weight {} and demerit {} must be finite and non-negative",
                d.unit_index, d.indicator_index, d.weight, d.demerit
            )));
        }
        score += d.weight * d.demerit;
    }
    Ok(UnitScore { unit_index, score })
}

fn check_unit_weights(weights: &[f64]) -> Result<()> {
    if weights.len() != UNIT_COUNT {
        return Err(Error::invalid(format!(
            "expected {UNIT_COUNT} unit weights, got {}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("unit weights must be finite and non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("unit weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Line-section score `100 − Σ αᵢ·Mᵢ`, clamped to `[0, 100]`.
pub fn score_line(unit_scores: &[f64], weights: &[f64]) -> Result<f64> {
    if unit_scores.len() != UNIT_COUNT {
        return Err(Error::invalid(format!(
            "expected {UNIT_COUNT} unit scores, got {}",
            unit_scores.len()
        )));
    }
    check_unit_weights(weights)?;
    let deduction: f64 = unit_scores.iter().zip(weights).map(|(m, a)| m * a).sum();
    if !deduction.is_finite() {
        return Err(Error::invalid("unit scores must be finite"));
    }
    Ok((100.0 - deduction).clamp(0.0, 100.0))
}

/// Scores every unit from a flat list of deductions and grades the section.
pub fn assess_line(deductions: &[IndicatorDeduction], weights: &[f64], scale: &GradeScale) -> Result<LineAssessment> {
    check_unit_weights(weights)?;
    let mut unit_scores = Vec::with_capacity(UNIT_COUNT);
    for unit in 1..=UNIT_COUNT {
        let own: Vec<IndicatorDeduction> = deductions.iter().copied().filter(|d| d.unit_index == unit).collect();
        unit_scores.push(score_unit_as(unit, &own)?);
    }
    if let Some(d) = deductions.iter().find(|d| d.unit_index == 0 || d.unit_index > UNIT_COUNT) {
        return Err(Error::invalid(format!("unit index {} is outside 1..={UNIT_COUNT}", d.unit_index)));
    }
    let raw: Vec<f64> = unit_scores.iter().map(|u| u.score).collect();
    let score = score_line(&raw, weights)?;
    Ok(LineAssessment {
        score,
        grade: scale.grade_of(score)?,
        unit_scores,
    })
}

/// Reciprocal pairwise-comparison matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AhpMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl AhpMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if !(2..=15).contains(&n) {
            return Err(Error::invalid(format!("AHP matrix order {n} outside 2..=15")));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::invalid(format!("AHP row {i} has {} entries, expected {n}", r.len())));
            }
            entries.extend_from_slice(r);
        }
        for i in 0..n {
            for j in 0..n {
                let a = entries[i * n + j];
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::invalid(format!("AHP entry ({i},{j}) = {a} must be positive")));
                }
                let product = a * entries[j * n + i];
                if (product - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "AHP entries ({i},{j}) and ({j},{i}) are not reciprocal (product {product})"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Perfectly consistent matrix `aᵢⱼ = wᵢ / wⱼ`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = weights.iter().map(|wi| weights.iter().map(|wj| wi / wj).collect()).collect();
        Self::new(&rows)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AhpWeights {
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub consistency_index: f64,
    pub consistency_ratio: f64,
}

/// Saaty's random consistency index for matrix orders 1..=15.
const RANDOM_INDEX: [f64; 15] = [
    0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49, 1.51, 1.48, 1.56, 1.57, 1.59,
];

/// Principal-eigenvector weights by power iteration, plus the consistency
/// ratio. The ratio is reported, not enforced.
pub fn ahp_weights(matrix: &AhpMatrix) -> Result<AhpWeights> {
    let n = matrix.order();
    let mut w = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..10_000 {
        for (i, out) in next.iter_mut().enumerate() {
            *out = (0..n).map(|j| matrix.at(i, j) * w[j]).sum();
        }
        let norm: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= norm);
        delta = w.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut w, &mut next);
        if delta < 1e-15 {
            break;
        }
    }
    // Rounding noise can keep the iterate wobbling around the last few ulps.
    if delta > 1e-10 {
        return Err(Error::Numeric("AHP power iteration did not converge".into()));
    }

    let lambda_max = (0..n)
        .map(|i| (0..n).map(|j| matrix.at(i, j) * w[j]).sum::<f64>() / w[i])
        .sum::<f64>()
        / n as f64;
    let consistency_index = ((lambda_max - n as f64) / (n as f64 - 1.0)).max(0.0);
    let ri = RANDOM_INDEX[n - 1];
    let consistency_ratio = if ri > 0.0 { consistency_index / ri } else { 0.0 };
    Ok(AhpWeights {
        weights: w,
        lambda_max,
        consistency_index,
        consistency_ratio,
    })
}
