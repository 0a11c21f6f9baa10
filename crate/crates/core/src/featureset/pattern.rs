//! Pattern coding of meteorological windows: z-score each day position,
//! project onto a few principal components, and replace the window by the
//! id of its nearest K-means centroid.

use serde::{Deserialize, Serialize};

use super::record::{DefectRecord, MeteoWindow, METEO_FEATURES, METEO_NAMES};
use crate::error::{Error, Result};
use crate::numerics::{kmeans_assign, kmeans_fit, pca_fit, pca_transform, DenseMatrix, KMeansModel, PcaModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternMode {
    /// One coder per meteorological series; each fills its own slot.
    PerFeature,
    /// One coder over the concatenated 6×W window; its code fills all six slots.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternConfig {
    pub window_length: usize,
    pub components: usize,
    pub clusters: usize,
    pub max_iter: usize,
    pub mode: PatternMode,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            window_length: 5,
            components: 4,
            clusters: 5,
            max_iter: 100,
            mode: PatternMode::PerFeature,
        }
    }
}

/// Standardize → project → assign for one input series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoder {
    pub day_mean: Vec<f64>,
    pub day_std: Vec<f64>,
    pub pca: PcaModel,
    /// Centroids live in PCA space, sorted by their first coordinate so that
    /// codes follow the dominant direction of variation.
    pub kmeans: KMeansModel,
}

impl SeriesCoder {
    fn fit(rows: &[Vec<f64>], config: &PatternConfig, seed: u64) -> Result<Self> {
        let d = rows[0].len();
        let m = rows.len() as f64;
        let mut day_mean = vec![0.0; d];
        for r in rows {
            for (acc, x) in day_mean.iter_mut().zip(r) {
                *acc += x;
            }
        }
        day_mean.iter_mut().for_each(|v| *v /= m);
        let mut day_std = vec![0.0; d];
        for r in rows {
            for ((acc, x), mu) in day_std.iter_mut().zip(r).zip(&day_mean) {
                *acc += (x - mu) * (x - mu);
            }
        }
        for s in &mut day_std {
            *s = (*s / m).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }

        let mut coder = Self {
            day_mean,
            day_std,
            pca: PcaModel {
                mean: vec![],
                components: DenseMatrix::zeros(1, 1),
                explained_variance: vec![],
            },
            kmeans: KMeansModel {
                centroids: DenseMatrix::zeros(1, 1),
                inertia: 0.0,
                iterations_run: 0,
                inertia_trace: vec![],
            },
        };
        let standardized: Vec<Vec<f64>> = rows.iter().map(|r| coder.standardize(r)).collect();
        let z = DenseMatrix::from_rows(&standardized)?;
        coder.pca = pca_fit(&z, config.components)?;
        let scores = pca_transform(&coder.pca, &z)?;
        let mut kmeans = kmeans_fit(&scores, config.clusters, seed, config.max_iter)?;
        let mut order: Vec<usize> = (0..kmeans.k()).collect();
        order.sort_by(|&a, &b| kmeans.centroids[(a, 0)].total_cmp(&kmeans.centroids[(b, 0)]));
        kmeans.reorder(&order);
        coder.kmeans = kmeans;
        Ok(coder)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.day_mean.iter().zip(&self.day_std))
            .map(|(x, (mu, sd))| (x - mu) / sd)
            .collect()
    }

    /// PCA scores of one raw series.
    pub fn project(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.day_mean.len() {
            return Err(Error::invalid(format!(
                "series has {} days, coder expects {}",
                row.len(),
                self.day_mean.len()
            )));
        }
        self.pca.transform_row(&self.standardize(row))
    }

    pub fn code(&self, row: &[f64]) -> Result<u32> {
        let projected = self.project(row)?;
        Ok(kmeans_assign(&self.kmeans, &projected)? as u32)
    }

    pub fn clusters(&self) -> usize {
        self.kmeans.k()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCoder {
    pub mode: PatternMode,
    pub window_length: usize,
    pub coders: Vec<SeriesCoder>,
}

impl PatternCoder {
    pub fn clusters(&self) -> usize {
        self.coders[0].clusters()
    }
}

/// Fits the meteorological pattern coder on every window row that is fully
/// observed.
pub fn fit_pattern_coder<'a>(
    records: impl IntoIterator<Item = &'a DefectRecord>,
    config: &PatternConfig,
    seed: u64,
) -> Result<PatternCoder> {
    let w = config.window_length;
    let records: Vec<&DefectRecord> = records.into_iter().collect();
    if let Some(r) = records.iter().find(|r| r.meteo.days() != w) {
        return Err(Error::invalid(format!(
            "record {} has a {}-day window, expected {w}",
            r.key(),
            r.meteo.days()
        )));
    }
    let min_rows = 6.max(config.clusters).max(config.components + 1);

    let coders = match config.mode {
        PatternMode::PerFeature => (0..METEO_FEATURES)
            .map(|f| {
                let rows: Vec<Vec<f64>> = records.iter().filter_map(|r| r.meteo.complete_row(f)).collect();
                if rows.len() < min_rows {
                    return Err(Error::insufficient(format!(
                        "only {} complete `{}` windows, need {min_rows}",
                        rows.len(),
                        METEO_NAMES[f]
                    )));
                }
                SeriesCoder::fit(&rows, config, seed.wrapping_add(f as u64))
            })
            .collect::<Result<Vec<_>>>()?,
        PatternMode::Joint => {
            let rows: Vec<Vec<f64>> = records.iter().filter_map(|r| joint_row(&r.meteo)).collect();
            if rows.len() < min_rows {
                return Err(Error::insufficient(format!(
                    "only {} fully observed meteorological windows, need {min_rows}",
                    rows.len()
                )));
            }
            vec![SeriesCoder::fit(&rows, config, seed)?]
        }
    };
    Ok(PatternCoder {
        mode: config.mode,
        window_length: w,
        coders,
    })
}

fn joint_row(window: &MeteoWindow) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(METEO_FEATURES * window.days());
    for f in 0..METEO_FEATURES {
        out.extend(window.complete_row(f)?);
    }
    Some(out)
}

/// Pattern code of each meteorological series; a series with any missing day
/// has no code.
pub fn encode_meteo(window: &MeteoWindow, coder: &PatternCoder) -> Result<[Option<u32>; METEO_FEATURES]> {
    if window.days() != coder.window_length {
        return Err(Error::invalid(format!(
            "window covers {} days, coder expects {}",
            window.days(),
            coder.window_length
        )));
    }
    let mut out = [None; METEO_FEATURES];
    match coder.mode {
        PatternMode::PerFeature => {
            for (f, slot) in out.iter_mut().enumerate() {
                if let Some(row) = window.complete_row(f) {
                    *slot = Some(coder.coders[f].code(&row)?);
                }
            }
        }
        PatternMode::Joint => {
            if let Some(row) = joint_row(window) {
                let code = coder.coders[0].code(&row)?;
                out = [Some(code); METEO_FEATURES];
            }
        }
    }
    Ok(out)
}
