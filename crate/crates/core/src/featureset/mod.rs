//! Extended feature vector construction from raw defect records.

mod codebook;
mod pattern;
mod record;
mod vector;

pub use codebook::{encode_hierarchical, Band, Codebook, CodebookEntry};
pub use pattern::{encode_meteo, fit_pattern_coder, PatternCoder, PatternConfig, PatternMode, SeriesCoder};
pub use record::{
    DefectRecord, LabeledRecord, MeteoWindow, RecordKey, METEO_FEATURES, METEO_NAMES, SELF_COLUMNS, SELF_FEATURES,
    ST_COLUMNS, ST_FEATURES,
};
pub use vector::{build_feature_vector, max_codes, ExtendedFeature, FEATURE_DIM, SLOT_NAMES};
