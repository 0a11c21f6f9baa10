//! Condition assessment of overhead transmission-line sections and
//! semi-supervised prediction of their defect grade.
//!
//! The pipeline encodes each segment-week into an 18-slot quantized feature
//! vector ([`featureset`]), fills absent slots from a regularized low-rank
//! factorization ([`imputation`]), maps the result into a small embedding
//! space ([`embedding`]) and classifies by distance to class prototypes that
//! are corrected with unlabeled data ([`ssl`]). Historical grades come from
//! weighted inspection deductions ([`assessment`]).

pub mod assessment;
pub mod corpus;
pub mod embedding;
mod error;
pub mod eval;
pub mod featureset;
pub mod imputation;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod ssl;

pub use assessment::{GradeLabel, GradeScale, IndicatorDeduction};
pub use error::{Error, Result};
pub use featureset::{Codebook, DefectRecord, ExtendedFeature, LabeledRecord, RecordKey};
pub use pipeline::{fit, ModelBundle, PipelineConfig};
pub use ssl::{ClassPosterior, CorrectedPrototypeSet, PrototypeSet};
