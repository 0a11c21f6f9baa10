use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Writer};

use crate::assessment::{GradeLabel, IndicatorDeduction};
use crate::error::{Error, Result};
use crate::featureset::{
    DefectRecord, LabeledRecord, MeteoWindow, RecordKey, METEO_FEATURES, METEO_NAMES, SELF_COLUMNS, ST_COLUMNS,
};
use crate::ssl::ClassPosterior;

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub key: RecordKey,
    pub grade: GradeLabel,
    pub posterior: ClassPosterior,
}

pub const LABEL_HEADER: [&str; 3] = ["segment_id", "week", "grade"];
pub const DEDUCTION_HEADER: [&str; 6] = ["segment_id", "week", "unit", "indicator", "weight", "demerit"];
pub const PREDICTION_HEADER: [&str; 7] = [
    "segment_id",
    "week",
    "grade",
    "p_normal",
    "p_attention",
    "p_abnormal",
    "p_serious",
];

/// Header of a records file with `days`-long meteorological windows.
pub fn record_header(days: usize) -> Vec<String> {
    let mut h = vec!["segment_id".to_string(), "week".to_string()];
    h.extend(SELF_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(ST_COLUMNS.iter().map(|s| s.to_string()));
    for name in METEO_NAMES {
        h.extend((0..days).map(|d| format!("{name}_d{d}")));
    }
    h
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_error(path: &Path, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Header-checked CSV rows with positional lookup by column name.
struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read<R: Read>(reader: R, path: &Path, allowed: impl Fn(&str) -> bool) -> Result<Self> {
        let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(csv_error(path))?.clone();
        let mut columns = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            if !allowed(h) {
                return Err(parse_error(path, 1, h, "unknown column"));
            }
            if columns.insert(h.to_string(), i).is_some() {
                return Err(parse_error(path, 1, h, "duplicate column"));
            }
        }
        let mut rows = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(csv_error(path))?;
            let line = row.position().map_or(0, |p| p.line());
            rows.push((line, row));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn require(&self, column: &str) -> Result<usize> {
        self.columns
            .get(column)
            .copied()
            .ok_or_else(|| parse_error(&self.path, 1, column, "required column is missing"))
    }

    fn text<'a>(&self, row: &'a StringRecord, idx: usize) -> &'a str {
        row.get(idx).unwrap_or("")
    }

    fn parse<T: FromStr>(&self, line: u64, row: &StringRecord, column: &str, idx: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.text(row, idx).trim();
        raw.parse()
            .map_err(|e| parse_error(&self.path, line, column, format!("cannot parse `{raw}`: {e}")))
    }

    fn optional<T: FromStr>(&self, line: u64, row: &StringRecord, column: &str, idx: usize) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.text(row, idx).trim().is_empty() {
            Ok(None)
        } else {
            self.parse(line, row, column, idx).map(Some)
        }
    }

    fn key(&self, line: u64, row: &StringRecord) -> Result<RecordKey> {
        let seg = self.require("segment_id")?;
        let week = self.require("week")?;
        let segment_id = self.text(row, seg).trim().to_string();
        if segment_id.is_empty() {
            return Err(parse_error(&self.path, line, "segment_id", "empty segment id"));
        }
        Ok(RecordKey {
            segment_id,
            week: self.parse(line, row, "week", week)?,
        })
    }
}

fn meteo_column(h: &str) -> Option<(usize, usize)> {
    let (name, day) = h.rsplit_once("_d")?;
    let f = METEO_NAMES.iter().position(|n| *n == name)?;
    let d: usize = day.parse().ok()?;
    (day == d.to_string()).then_some((f, d))
}

pub fn read_records_from<R: Read>(reader: R, path: &Path) -> Result<Vec<DefectRecord>> {
    let table = Table::read(reader, path, |h| {
        h == "segment_id" || h == "week" || SELF_COLUMNS.contains(&h) || ST_COLUMNS.contains(&h) || meteo_column(h).is_some()
    })?;
    let self_idx: Vec<usize> = SELF_COLUMNS.iter().map(|c| table.require(c)).collect::<Result<_>>()?;
    let st_idx: Vec<usize> = ST_COLUMNS.iter().map(|c| table.require(c)).collect::<Result<_>>()?;
    let days = table.columns.keys().filter(|h| meteo_column(h).is_some_and(|(f, _)| f == 0)).count();
    if days == 0 {
        return Err(parse_error(path, 1, "temp_d0", "required column is missing"));
    }
    let mut meteo_idx = vec![0usize; METEO_FEATURES * days];
    for (f, name) in METEO_NAMES.iter().enumerate() {
        for d in 0..days {
            meteo_idx[f * days + d] = table.require(&format!("{name}_d{d}"))?;
        }
    }
    let meteo_count = table.columns.keys().filter(|h| meteo_column(h).is_some()).count();
    if meteo_count != METEO_FEATURES * days {
        let stray = table
            .columns
            .keys()
            .filter(|h| meteo_column(h).is_some_and(|(_, d)| d >= days))
            .min()
            .cloned()
            .unwrap_or_default();
        return Err(parse_error(path, 1, &stray, format!("meteorological windows must all span {days} days")));
    }

    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let line = *line;
        let key = table.key(line, row)?;
        let raw = |idx: &usize| {
            let t = table.text(row, *idx).trim();
            (!t.is_empty()).then(|| t.to_string())
        };
        let self_raw: Vec<Option<String>> = self_idx.iter().map(raw).collect();
        let st_raw: Vec<Option<String>> = st_idx.iter().map(raw).collect();
        let mut values = Vec::with_capacity(meteo_idx.len());
        for (k, idx) in meteo_idx.iter().enumerate() {
            let column = format!("{}_d{}", METEO_NAMES[k / days], k % days);
            let v: Option<f64> = table.optional(line, row, &column, *idx)?;
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(parse_error(path, line, &column, "value is not finite"));
            }
            values.push(v);
        }
        out.push(DefectRecord {
            segment_id: key.segment_id,
            week: key.week,
            self_raw: self_raw.try_into().expect("eight columns"),
            meteo: MeteoWindow::new(days, values)?,
            st_raw: st_raw.try_into().expect("four columns"),
        });
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<DefectRecord>> {
    read_records_from(open(path)?, path)
}

pub fn write_records_to<W: Write>(records: &[DefectRecord], out: W, path: &Path) -> Result<()> {
    let days = records.first().map_or(5, |r| r.meteo.days());
    if let Some(r) = records.iter().find(|r| r.meteo.days() != days) {
        return Err(Error::invalid(format!(
            "record {} has a {}-day window, others have {days}",
            r.key(),
            r.meteo.days()
        )));
    }
    let mut w = Writer::from_writer(out);
    let err = csv_error(path);
    w.write_record(record_header(days)).map_err(&err)?;
    for r in records {
        let mut row: Vec<String> = vec![r.segment_id.clone(), r.week.to_string()];
        row.extend(r.self_raw.iter().chain(&r.st_raw).map(|v| v.clone().unwrap_or_default()));
        for f in 0..METEO_FEATURES {
            row.extend(r.meteo.row(f).iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_records(records: &[DefectRecord], path: &Path) -> Result<()> {
    write_records_to(records, create(path)?, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<(RecordKey, GradeLabel)>> {
    let table = Table::read(open(path)?, path, |h| LABEL_HEADER.contains(&h))?;
    let grade = table.require("grade")?;
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let key = table.key(*line, row)?;
        let g: GradeLabel = table.parse(*line, row, "grade", grade)?;
        if seen.insert(key.clone(), *line).is_some() {
            return Err(parse_error(path, *line, "segment_id", format!("duplicate label for {key}")));
        }
        out.push((key, g));
    }
    Ok(out)
}

pub fn write_labels(labels: &[(RecordKey, GradeLabel)], path: &Path) -> Result<()> {
    let mut w = Writer::from_writer(create(path)?);
    let err = csv_error(path);
    w.write_record(LABEL_HEADER).map_err(&err)?;
    for (key, g) in labels {
        w.write_record([key.segment_id.as_str(), &key.week.to_string(), g.name()]).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pairs every record with its label; a record without one is an error.
pub fn attach_labels(records: Vec<DefectRecord>, labels: &[(RecordKey, GradeLabel)]) -> Result<Vec<LabeledRecord>> {
    let lookup: BTreeMap<&RecordKey, GradeLabel> = labels.iter().map(|(k, g)| (k, *g)).collect();
    records
        .into_iter()
        .map(|record| {
            let grade = *lookup
                .get(&record.key())
                .ok_or_else(|| Error::invalid(format!("record {} has no label", record.key())))?;
            Ok(LabeledRecord { record, grade })
        })
        .collect()
}

/// Deductions grouped per section in order of first appearance. A row with
/// empty unit, indicator, weight and demerit cells registers a section
/// without deductions.
pub fn read_deductions(path: &Path) -> Result<Vec<(RecordKey, Vec<IndicatorDeduction>)>> {
    let table = Table::read(open(path)?, path, |h| DEDUCTION_HEADER.contains(&h))?;
    let idx: Vec<usize> = DEDUCTION_HEADER[2..].iter().map(|c| table.require(c)).collect::<Result<_>>()?;
    let mut order: Vec<(RecordKey, Vec<IndicatorDeduction>)> = Vec::new();
    let mut position: HashMap<RecordKey, usize> = HashMap::new();
    for (line, row) in &table.rows {
        let line = *line;
        let key = table.key(line, row)?;
        let slot = *position.entry(key.clone()).or_insert_with(|| {
            order.push((key, Vec::new()));
            order.len() - 1
        });
        let unit: Option<usize> = table.optional(line, row, "unit", idx[0])?;
        let indicator: Option<usize> = table.optional(line, row, "indicator", idx[1])?;
        let weight: Option<f64> = table.optional(line, row, "weight", idx[2])?;
        let demerit: Option<f64> = table.optional(line, row, "demerit", idx[3])?;
        match (unit, indicator, weight, demerit) {
            (None, None, None, None) => {}
            (Some(unit_index), Some(indicator_index), Some(weight), Some(demerit)) => {
                order[slot].1.push(IndicatorDeduction {
                    unit_index,
                    indicator_index,
                    weight,
                    demerit,
                });
            }
            _ => {
                let column = ["unit", "indicator", "weight", "demerit"][[unit.is_none(), indicator.is_none(), weight.is_none(), demerit.is_none()]
                    .iter()
                    .position(|m| *m)
                    .unwrap_or(0)];
                return Err(parse_error(path, line, column, "partially filled deduction row"));
            }
        }
    }
    Ok(order)
}

pub fn write_deductions(sections: &[(RecordKey, Vec<IndicatorDeduction>)], path: &Path) -> Result<()> {
    let mut w = Writer::from_writer(create(path)?);
    let err = csv_error(path);
    w.write_record(DEDUCTION_HEADER).map_err(&err)?;
    for (key, deductions) in sections {
        let week = key.week.to_string();
        if deductions.is_empty() {
            w.write_record([key.segment_id.as_str(), &week, "", "", "", ""]).map_err(&err)?;
        }
        for d in deductions {
            w.write_record([
                key.segment_id.clone(),
                week.clone(),
                d.unit_index.to_string(),
                d.indicator_index.to_string(),
                d.weight.to_string(),
                d.demerit.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_predictions_to<W: Write>(predictions: &[Prediction], out: W, path: &Path) -> Result<()> {
    let mut w = Writer::from_writer(out);
    let err = csv_error(path);
    w.write_record(PREDICTION_HEADER).map_err(&err)?;
    for p in predictions {
        let mut row = vec![p.key.segment_id.clone(), p.key.week.to_string(), p.grade.name().to_string()];
        row.extend(p.posterior.probs.iter().map(f64::to_string));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_predictions(predictions: &[Prediction], path: &Path) -> Result<()> {
    write_predictions_to(predictions, create(path)?, path)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let table = Table::read(open(path)?, path, |h| PREDICTION_HEADER.contains(&h))?;
    let grade = table.require("grade")?;
    let probs: Vec<usize> = PREDICTION_HEADER[3..].iter().map(|c| table.require(c)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let mut p = [0.0; 4];
        for (k, idx) in probs.iter().enumerate() {
            p[k] = table.parse(*line, row, PREDICTION_HEADER[3 + k], *idx)?;
        }
        out.push(Prediction {
            key: table.key(*line, row)?,
            grade: table.parse(*line, row, "grade", grade)?,
            posterior: ClassPosterior { probs: p },
        });
    }
    Ok(out)
}
