use serde::{Deserialize, Serialize};

use crate::assessment::GradeLabel;
use crate::error::{Error, Result};

pub const SELF_FEATURES: usize = 8;
pub const METEO_FEATURES: usize = 6;
pub const ST_FEATURES: usize = 4;

/// CSV column names of the line's own features, in slot order: voltage level,
/// conductor splits, conductor type, call height, full height, span, tower
/// type, years in operation.
pub const SELF_COLUMNS: [&str; SELF_FEATURES] = ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"];

/// Spatiotemporal columns: quarter, terrain, elevation, special section.
pub const ST_COLUMNS: [&str; ST_FEATURES] = ["t1", "t2", "t3", "t4"];

/// Meteorological series, each a daily window ending at the record's week.
pub const METEO_NAMES: [&str; METEO_FEATURES] = ["temp", "hum", "wind", "rain", "lightning", "haze"];

/// Six daily meteorological series over a window of `days` days, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeteoWindow {
    days: usize,
    values: Vec<Option<f64>>,
}

impl MeteoWindow {
    pub fn new(days: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if days == 0 {
            return Err(Error::invalid("meteorological window must cover at least one day"));
        }
        if values.len() != METEO_FEATURES * days {
            return Err(Error::invalid(format!(
                "meteorological window has {} cells, expected {METEO_FEATURES}x{days}",
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("meteorological values must be finite"));
        }
        Ok(Self { days, values })
    }

    pub fn from_rows(rows: [Vec<Option<f64>>; METEO_FEATURES]) -> Result<Self> {
        let days = rows[0].len();
        if rows.iter().any(|r| r.len() != days) {
            return Err(Error::invalid("meteorological rows differ in length"));
        }
        Self::new(days, rows.into_iter().flatten().collect())
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn row(&self, feature: usize) -> &[Option<f64>] {
        &self.values[feature * self.days..(feature + 1) * self.days]
    }

    pub fn row_mut(&mut self, feature: usize) -> &mut [Option<f64>] {
        &mut self.values[feature * self.days..(feature + 1) * self.days]
    }

    /// The row as plain numbers, or `None` if any day is missing.
    pub fn complete_row(&self, feature: usize) -> Option<Vec<f64>> {
        self.row(feature).iter().copied().collect()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }
}

/// One line-segment/week observation. Ground-truth grades live in
/// [`LabeledRecord`], never here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub segment_id: String,
    pub week: i64,
    pub self_raw: [Option<String>; SELF_FEATURES],
    pub meteo: MeteoWindow,
    pub st_raw: [Option<String>; ST_FEATURES],
}

impl DefectRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            segment_id: self.segment_id.clone(),
            week: self.week,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub segment_id: String,
    pub week: i64,
}

impl std::fmt::Display for RecordKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.segment_id, self.week)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: DefectRecord,
    pub grade: GradeLabel,
}
