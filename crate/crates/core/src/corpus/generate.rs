use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::reference::{Domain, ARCHETYPES, CODED_COLUMNS, METEO_NOISE, METEO_PROFILES};
use super::level_distribution;
use crate::assessment::{GradeLabel, IndicatorDeduction, DEFAULT_UNIT_WEIGHTS, UNIT_COUNT};
use crate::error::{Error, Result};
use crate::featureset::{DefectRecord, MeteoWindow, METEO_FEATURES, SELF_FEATURES, ST_FEATURES};
use crate::rng::{stream, streams};

const WEEKS_PER_SEGMENT: usize = 18;
const FIRST_WEEK: i64 = 27;
const SLOTS: usize = SELF_FEATURES + METEO_FEATURES + ST_FEATURES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_records: usize,
    pub labeled_count: usize,
    /// Relative frequencies of Normal, Attention, Abnormal and Serious
    /// records; normalized before use.
    pub class_mix: [f64; 4],
    /// Fraction of records with at least one absent slot.
    pub missing_record_rate: f64,
    /// Relative weights of 1, 2, 3, 4 and 5 absent slots in an affected record.
    pub missing_per_record: [f64; 5],
    pub window_length: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_records: 2250,
            labeled_count: 1000,
            class_mix: [0.576, 0.252, 0.116, 0.034],
            missing_record_rate: 0.293,
            missing_per_record: [0.35, 0.25, 0.2, 0.12, 0.08],
            window_length: 5,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::invalid("corpus needs at least one record"));
        }
        if self.labeled_count > self.n_records {
            return Err(Error::invalid(format!(
                "labeled_count {} exceeds n_records {}",
                self.labeled_count, self.n_records
            )));
        }
        if self.class_mix.iter().any(|p| !p.is_finite() || *p < 0.0) || self.class_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(format!(
                "class_mix {:?} needs non-negative weights with a positive sum",
                self.class_mix
            )));
        }
        if !(0.0..=1.0).contains(&self.missing_record_rate) {
            return Err(Error::invalid(format!(
                "missing_record_rate {} is outside [0, 1]",
                self.missing_record_rate
            )));
        }
        if self.missing_per_record.iter().any(|w| !w.is_finite() || *w < 0.0)
            || self.missing_per_record.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::invalid("missing_per_record needs non-negative weights with a positive sum"));
        }
        if self.window_length == 0 {
            return Err(Error::invalid("window_length must be positive"));
        }
        Ok(())
    }
}

/// Generated records with their latent grades and inspection deductions, all
/// index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<DefectRecord>,
    pub grades: Vec<GradeLabel>,
    pub deductions: Vec<Vec<IndicatorDeduction>>,
}

/// Integer counts proportional to `weights` summing to `total`, by largest
/// remainder with ties to the lower index.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        counts[k] += 1;
    }
    counts
}

pub fn generate(config: &CorpusConfig) -> Result<Corpus> {
    config.validate()?;
    let n = config.n_records;

    let mut grades = Vec::with_capacity(n);
    for (k, count) in largest_remainder(&config.class_mix, n).into_iter().enumerate() {
        grades.extend(std::iter::repeat_n(GradeLabel::ALL[k], count));
    }
    grades.shuffle(&mut stream(config.seed, streams::CORPUS_GRADES));

    let mut feature_rng = stream(config.seed, streams::CORPUS_FEATURES);
    let mut records: Vec<DefectRecord> = grades
        .iter()
        .enumerate()
        .map(|(i, g)| draw_record(i, *g, config.window_length, &mut feature_rng))
        .collect::<Result<_>>()?;

    inject_missing(&mut records, config)?;

    let mut deduction_rng = stream(config.seed, streams::CORPUS_DEDUCTIONS);
    let deductions = grades.iter().map(|g| draw_deductions(*g, &mut deduction_rng)).collect();

    Ok(Corpus {
        records,
        grades,
        deductions,
    })
}

fn draw_level<R: Rng>(levels: usize, grade: GradeLabel, strength: f64, rng: &mut R) -> usize {
    let p = level_distribution(levels, grade.index(), strength);
    WeightedIndex::new(&p).expect("level table is a distribution").sample(rng)
}

fn draw_raw<R: Rng>(domain: Domain, level: usize, rng: &mut R) -> String {
    match domain {
        Domain::Categories(names) => names[level].to_string(),
        Domain::Bands(edges) => {
            let lower = edges[level];
            let width = match edges.get(level + 1) {
                Some(upper) => upper - lower,
                None => lower - edges[level - 1],
            };
            let x = lower + width * rng.random_range(0.05..0.95);
            format!("{x:.1}")
        }
    }
}

fn draw_record<R: Rng>(i: usize, grade: GradeLabel, days: usize, rng: &mut R) -> Result<DefectRecord> {
    let mut coded: Vec<String> = Vec::with_capacity(CODED_COLUMNS.len());
    for (_, domain, strength) in CODED_COLUMNS {
        let level = draw_level(domain.levels(), grade, strength, rng);
        coded.push(draw_raw(domain, level, rng));
    }
    let mut values = Vec::with_capacity(METEO_FEATURES * days);
    for profile in &METEO_PROFILES {
        let shape = &ARCHETYPES[draw_level(ARCHETYPES.len(), grade, profile.strength, rng)];
        for d in 0..days {
            let at = if days > 1 { (d * (shape.len() - 1) + (days - 1) / 2) / (days - 1) } else { 0 };
            let z: f64 = rng.sample(StandardNormal);
            let mut x = profile.base + profile.scale * (shape[at] + METEO_NOISE * z);
            if let Some(floor) = profile.floor {
                x = x.max(floor);
            }
            values.push(Some((x * 100.0).round() / 100.0));
        }
    }
    let mut coded = coded.into_iter().map(Some);
    Ok(DefectRecord {
        segment_id: format!("T{:04}", i / WEEKS_PER_SEGMENT + 1),
        week: FIRST_WEEK + (i % WEEKS_PER_SEGMENT) as i64,
        self_raw: std::array::from_fn(|_| coded.next().flatten()),
        meteo: MeteoWindow::new(days, values)?,
        st_raw: std::array::from_fn(|_| coded.next().flatten()),
    })
}

fn inject_missing(records: &mut [DefectRecord], config: &CorpusConfig) -> Result<()> {
    let mut rng = stream(config.seed, streams::CORPUS_MISSING);
    let affected = (config.missing_record_rate * records.len() as f64).round() as usize;
    let how_many = WeightedIndex::new(config.missing_per_record)
        .map_err(|e| Error::invalid(format!("missing_per_record: {e}")))?;
    let mut chosen = index::sample(&mut rng, records.len(), affected).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let k = how_many.sample(&mut rng) + 1;
        let record = &mut records[i];
        for slot in index::sample(&mut rng, SLOTS, k) {
            if slot < SELF_FEATURES {
                record.self_raw[slot] = None;
            } else if slot < SELF_FEATURES + METEO_FEATURES {
                let days = record.meteo.days();
                let blank = rng.random_range(1..=days);
                let row = record.meteo.row_mut(slot - SELF_FEATURES);
                for d in index::sample(&mut rng, days, blank) {
                    row[d] = None;
                }
            } else {
                record.st_raw[slot - SELF_FEATURES - METEO_FEATURES] = None;
            }
        }
    }
    Ok(())
}

/// Score band each grade's target is drawn from, kept clear of the default
/// grade boundaries.
fn target_range(grade: GradeLabel) -> (f64, f64) {
    match grade {
        GradeLabel::Normal => (95.5, 99.5),
        GradeLabel::Attention => (85.5, 94.5),
        GradeLabel::Abnormal => (75.5, 84.5),
        GradeLabel::Serious => (45.0, 74.5),
    }
}

/// Deductions whose weighted total puts the section inside its grade band
/// under the default unit weights.
fn draw_deductions<R: Rng>(grade: GradeLabel, rng: &mut R) -> Vec<IndicatorDeduction> {
    if grade == GradeLabel::Normal && rng.random_bool(0.3) {
        return Vec::new();
    }
    let (lo, hi) = target_range(grade);
    let total = 100.0 - rng.random_range(lo..hi);
    let min_units = if grade == GradeLabel::Serious { 2 } else { 1 };
    let n_units = rng.random_range(min_units..=4);
    let mut units = index::sample(rng, UNIT_COUNT, n_units).into_vec();
    units.sort_unstable();
    let shares: Vec<f64> = (0..n_units).map(|_| rng.random_range(0.2..1.0)).collect();
    let share_sum: f64 = shares.iter().sum();

    let mut out = Vec::new();
    for (unit, share) in units.into_iter().zip(shares) {
        let unit_score = total * share / share_sum / DEFAULT_UNIT_WEIGHTS[unit];
        let demerit = (unit_score * 1000.0).round() / 1000.0;
        let first = rng.random_range(1..=3);
        if rng.random_bool(0.5) {
            out.push(IndicatorDeduction {
                unit_index: unit + 1,
                indicator_index: first,
                weight: 1.0,
                demerit,
            });
        } else {
            let w = rng.random_range(30..=70);
            for (offset, weight) in [(0, w), (1, 100 - w)] {
                out.push(IndicatorDeduction {
                    unit_index: unit + 1,
                    indicator_index: first + offset,
                    weight: f64::from(weight) / 100.0,
                    demerit,
                });
            }
        }
    }
    out
}
