use super::codebook::{encode_hierarchical, Codebook};
use super::pattern::{encode_meteo, PatternCoder};
use super::record::{DefectRecord, METEO_FEATURES, SELF_COLUMNS, SELF_FEATURES, ST_COLUMNS, ST_FEATURES};
use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = SELF_FEATURES + METEO_FEATURES + ST_FEATURES;

/// Slot names of the extended feature vector, in order:
/// `s1..s8` (line itself), `e1..e6` (meteorological patterns), `t1..t4`
/// (spatiotemporal).
pub const SLOT_NAMES: [&str; FEATURE_DIM] = [
    "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "e1", "e2", "e3", "e4", "e5", "e6", "t1", "t2", "t3", "t4",
];

const METEO_OFFSET: usize = SELF_FEATURES;
const ST_OFFSET: usize = SELF_FEATURES + METEO_FEATURES;

/// Quantized 18-slot feature vector with an observation mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedFeature {
    /// Level or pattern codes; unobserved slots hold NaN.
    pub values: [f64; FEATURE_DIM],
    /// `true` where the slot was observed.
    pub mask: [bool; FEATURE_DIM],
}

impl ExtendedFeature {
    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|m| *m)
    }

    pub fn get(&self, slot: usize) -> Option<f64> {
        self.mask[slot].then_some(self.values[slot])
    }
}

/// Encodes one record: hierarchical codes for the line's own and
/// spatiotemporal features, pattern codes for the meteorological windows.
pub fn build_feature_vector(record: &DefectRecord, codebook: &Codebook, coder: &PatternCoder) -> Result<ExtendedFeature> {
    let mut values = [f64::NAN; FEATURE_DIM];
    let mut mask = [false; FEATURE_DIM];
    let mut put = |slot: usize, code: Option<u32>| {
        if let Some(c) = code {
            values[slot] = f64::from(c);
            mask[slot] = true;
        }
    };
    for (i, column) in SELF_COLUMNS.iter().enumerate() {
        let code = encode_hierarchical(record.self_raw[i].as_deref(), codebook.entry(column)?)
            .map_err(|e| Error::invalid(format!("record {} feature `{column}`: {e}", record.key())))?;
        put(i, code);
    }
    let meteo = encode_meteo(&record.meteo, coder).map_err(|e| Error::invalid(format!("record {}: {e}", record.key())))?;
    for (i, code) in meteo.into_iter().enumerate() {
        put(METEO_OFFSET + i, code);
    }
    for (i, column) in ST_COLUMNS.iter().enumerate() {
        let code = encode_hierarchical(record.st_raw[i].as_deref(), codebook.entry(column)?)
            .map_err(|e| Error::invalid(format!("record {} feature `{column}`: {e}", record.key())))?;
        put(ST_OFFSET + i, code);
    }
    Ok(ExtendedFeature { values, mask })
}

/// Largest valid code of every slot.
pub fn max_codes(codebook: &Codebook, coder: &PatternCoder) -> Result<[u32; FEATURE_DIM]> {
    let mut out = [0u32; FEATURE_DIM];
    for (i, column) in SELF_COLUMNS.iter().enumerate() {
        out[i] = codebook.entry(column)?.levels() as u32 - 1;
    }
    for slot in out.iter_mut().skip(METEO_OFFSET).take(METEO_FEATURES) {
        *slot = coder.clusters() as u32 - 1;
    }
    for (i, column) in ST_COLUMNS.iter().enumerate() {
        out[ST_OFFSET + i] = codebook.entry(column)?.levels() as u32 - 1;
    }
    Ok(out)
}
