//! End-to-end fitting and prediction over raw records.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::assessment::{GradeLabel, GradeScale, DEFAULT_UNIT_WEIGHTS, UNIT_COUNT};
use crate::corpus::Prediction;
use crate::embedding::{embed_all, train, MlpArchitecture, MlpParams, TrainConfig};
use crate::error::{Error, Result};
use crate::featureset::{
    build_feature_vector, fit_pattern_coder, max_codes, Codebook, DefectRecord, LabeledRecord, PatternCoder,
    PatternConfig, FEATURE_DIM,
};
use crate::imputation::{factorize, impute, snap, snap_to_codes, FactorPair, FactorizeConfig, ObservedMatrix};
use crate::rng::{stream, streams};
use crate::ssl::{compute_prototypes, predict, refine_prototypes, CorrectedPrototypeSet, PrototypeSet, RefineConfig};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub pattern: PatternConfig,
    pub factorize: FactorizeConfig,
    pub architecture: MlpArchitecture,
    pub train: TrainConfig,
    pub refine: RefineConfig,
    pub seed: u64,
    pub unit_weights: Vec<f64>,
    pub grade_scale: GradeScale,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pattern: PatternConfig::default(),
            factorize: FactorizeConfig::default(),
            architecture: MlpArchitecture::default(),
            train: TrainConfig::default(),
            refine: RefineConfig::default(),
            seed: 0,
            unit_weights: DEFAULT_UNIT_WEIGHTS.to_vec(),
            grade_scale: GradeScale::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "pipeline config".into(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        self.train.validate()?;
        self.grade_scale.validate()?;
        if self.architecture.layer_dims.first() != Some(&FEATURE_DIM) {
            return Err(Error::invalid(format!(
                "network input width must be {FEATURE_DIM}, got {:?}",
                self.architecture.layer_dims.first()
            )));
        }
        if self.unit_weights.len() != UNIT_COUNT
            || self.unit_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (self.unit_weights.iter().sum::<f64>() - 1.0).abs() > 1e-6
        {
            return Err(Error::invalid(format!(
                "unit weights {:?} must be {UNIT_COUNT} non-negative values summing to 1",
                self.unit_weights
            )));
        }
        let f = &self.factorize;
        if f.rank == 0 || !(f.lambda > 0.0) || f.max_iter == 0 || !(f.tol > 0.0) {
            return Err(Error::invalid("factorization needs rank ≥ 1, lambda > 0, max_iter ≥ 1 and tol > 0"));
        }
        let r = &self.refine;
        if !(0.0..=1.0).contains(&r.alpha) || r.max_iter == 0 || !(r.tol >= 0.0) {
            return Err(Error::invalid("refinement needs alpha in [0, 1], max_iter ≥ 1 and tol ≥ 0"));
        }
        Ok(())
    }
}

/// Everything needed to turn a raw record into a complete network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub codebook: Codebook,
    pub pattern: PatternCoder,
    pub factors: FactorPair,
    pub max_codes: Vec<u32>,
}

impl FeatureModel {
    /// Fits the pattern coder and the factorization on `records` and returns
    /// their network inputs in the same order.
    pub fn fit(records: &[&DefectRecord], codebook: &Codebook, config: &PipelineConfig) -> Result<(Self, Vec<Vec<f64>>)> {
        let coder_seed = stream(config.seed, streams::PATTERN_CODER).next_u64();
        let pattern = fit_pattern_coder(records.iter().copied(), &config.pattern, coder_seed)
            .map_err(Error::in_stage("pattern coding"))?;
        let features = records
            .iter()
            .map(|r| build_feature_vector(r, codebook, &pattern))
            .collect::<Result<Vec<_>>>()
            .map_err(Error::in_stage("feature encoding"))?;
        let obs = ObservedMatrix::from_features(&features).map_err(Error::in_stage("feature encoding"))?;
        let factors = factorize(&obs, &config.factorize, config.seed).map_err(Error::in_stage("factorization"))?;
        let codes = max_codes(codebook, &pattern)?.to_vec();
        let filled = impute(&obs, &factors).and_then(|m| snap_to_codes(&m, &obs, &codes))?;
        let model = Self {
            codebook: codebook.clone(),
            pattern,
            factors,
            max_codes: codes,
        };
        let inputs = filled.row_iter().map(|row| model.scale(row)).collect();
        Ok((model, inputs))
    }

    /// Codes divided by each slot's largest code, so every input lies in
    /// `[0, 1]`.
    pub fn scale(&self, codes: &[f64]) -> Vec<f64> {
        codes.iter().zip(&self.max_codes).map(|(x, m)| x / f64::from((*m).max(1))).collect()
    }

    /// Network input of a record.
    pub fn input(&self, record: &DefectRecord) -> Result<Vec<f64>> {
        Ok(self.scale(&self.codes(record)?))
    }

    /// Complete code vector of a record: observed codes verbatim, absent
    /// slots reconstructed from the record's folded-in factor and snapped.
    pub fn codes(&self, record: &DefectRecord) -> Result<Vec<f64>> {
        let feature = build_feature_vector(record, &self.codebook, &self.pattern)?;
        if feature.is_complete() {
            return Ok(feature.values.to_vec());
        }
        let row: Vec<Option<f64>> = (0..FEATURE_DIM).map(|j| feature.get(j)).collect();
        let u = self.factors.fold_in(&row)?;
        Ok((0..FEATURE_DIM)
            .map(|j| match row[j] {
                Some(x) => x,
                None => {
                    let estimate: f64 = (0..self.factors.rank).map(|k| u[k] * self.factors.v[(k, j)]).sum();
                    snap(estimate, self.max_codes[j])
                }
            })
            .collect())
    }

    pub fn inputs(&self, records: &[DefectRecord]) -> Result<Vec<Vec<f64>>> {
        records.iter().map(|r| self.input(r)).collect()
    }
}

/// Trained network with its class centers before and after correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub mlp: MlpParams,
    pub prototypes: PrototypeSet,
    pub corrected: CorrectedPrototypeSet,
    pub loss_trace: Vec<f64>,
}

/// Trains the embedding on labeled inputs and corrects the class centers with
/// the unlabeled ones.
pub fn fit_classifier(
    labeled: &[(Vec<f64>, GradeLabel)],
    unlabeled: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<ClassifierModel> {
    let outcome = train(labeled, &config.architecture, &config.train, config.seed).map_err(Error::in_stage("embedding training"))?;
    let labeled_inputs: Vec<Vec<f64>> = labeled.iter().map(|(x, _)| x.clone()).collect();
    let embedded = embed_all(&outcome.params, &labeled_inputs)?;
    let prototypes = compute_prototypes(embedded.iter().map(Vec::as_slice).zip(labeled.iter().map(|(_, y)| *y)))
        .map_err(Error::in_stage("prototype estimation"))?;
    let unlabeled_embedded = embed_all(&outcome.params, unlabeled)?;
    let corrected =
        refine_prototypes(&prototypes, &unlabeled_embedded, &config.refine).map_err(Error::in_stage("prototype refinement"))?;
    Ok(ClassifierModel {
        mlp: outcome.params,
        prototypes,
        corrected,
        loss_trace: outcome.loss_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub features: FeatureModel,
    pub classifier: ClassifierModel,
    pub config: PipelineConfig,
}

impl ModelBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "model bundle".into(),
            source,
        })?;
        if bundle.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "model bundle format {} is not supported (expected {BUNDLE_FORMAT_VERSION})",
                bundle.format_version
            )));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn embed(&self, records: &[DefectRecord]) -> Result<Vec<Vec<f64>>> {
        embed_all(&self.classifier.mlp, &self.features.inputs(records)?)
    }

    pub fn predict(&self, records: &[DefectRecord]) -> Result<Vec<Prediction>> {
        predict_with(&self.features, &self.classifier.mlp, &self.classifier.corrected, records)
    }

    /// Predictions from the uncorrected, labeled-only centers.
    pub fn predict_supervised(&self, records: &[DefectRecord]) -> Result<Vec<Prediction>> {
        let plain = CorrectedPrototypeSet::supervised(&self.classifier.prototypes);
        predict_with(&self.features, &self.classifier.mlp, &plain, records)
    }
}

pub(crate) fn predict_with(
    features: &FeatureModel,
    mlp: &MlpParams,
    centers: &CorrectedPrototypeSet,
    records: &[DefectRecord],
) -> Result<Vec<Prediction>> {
    let embedded = embed_all(mlp, &features.inputs(records)?)?;
    records
        .iter()
        .zip(&embedded)
        .map(|(r, v)| {
            let (grade, posterior) = predict(v, centers)?;
            Ok(Prediction {
                key: r.key(),
                grade,
                posterior,
            })
        })
        .collect()
}

/// Full fit: pattern coding and factorization over labeled and unlabeled
/// records together, then embedding training and center correction.
pub fn fit(
    labeled: &[LabeledRecord],
    unlabeled: &[DefectRecord],
    codebook: &Codebook,
    config: &PipelineConfig,
) -> Result<ModelBundle> {
    config.validate()?;
    for g in GradeLabel::ALL {
        if !labeled.iter().any(|r| r.grade == g) {
            return Err(Error::insufficient(format!("no labeled records of class {g}")));
        }
    }
    let all: Vec<&DefectRecord> = labeled.iter().map(|r| &r.record).chain(unlabeled).collect();
    let (features, inputs) = FeatureModel::fit(&all, codebook, config)?;
    let (labeled_inputs, unlabeled_inputs) = inputs.split_at(labeled.len());
    let training: Vec<(Vec<f64>, GradeLabel)> =
        labeled_inputs.iter().cloned().zip(labeled.iter().map(|r| r.grade)).collect();
    let classifier = fit_classifier(&training, unlabeled_inputs, config)?;
    Ok(ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        features,
        classifier,
        config: config.clone(),
    })
}
