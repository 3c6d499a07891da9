//! Reading and writing the patient CSV.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use stroke_core::ingest::{encode, fit_encoding, Provenance, UNKNOWN_SMOKING};
use stroke_core::{EhrRecord, EncodedMatrix, EncodingMap};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot open {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("required column {0:?} is missing from the header")]
    MissingColumn(&'static str),
    #[error("row {row}: cannot parse {column} value {value:?}")]
    UnparseableValue { row: usize, column: &'static str, value: String },
    #[error("row {row}: invalid {column}: {reason}")]
    InvalidValue { row: usize, column: &'static str, reason: String },
    #[error("the file has no data rows")]
    EmptyFile,
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] stroke_core::Error),
}

const COLUMNS: [&str; 11] = [
    "gender",
    "age",
    "hypertension",
    "heart_disease",
    "ever_married",
    "work_type",
    "residence_type",
    "avg_glucose_level",
    "bmi",
    "smoking_status",
    "stroke",
];

fn is_missing(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "" | "n/a" | "na" | "nan")
}

/// Parses records from CSV text. Header names are matched case-insensitively;
/// an `id` column is optional (row numbers are used when absent).
pub fn parse_csv(reader: impl Read) -> Result<Vec<EhrRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: HashMap<String, usize> =
        rdr.headers()?.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
    let mut idx = [0usize; 11];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = *header.get(name).ok_or(DatasetError::MissingColumn(name))?;
    }
    let id_col = header.get("id").copied();

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64, DatasetError> {
            let v = field(k);
            v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| DatasetError::UnparseableValue {
                row: line,
                column: COLUMNS[k],
                value: v.to_string(),
            })
        };
        let flag = |k: usize| -> Result<u8, DatasetError> {
            match number(k)? {
                x if x == 0.0 => Ok(0),
                x if x == 1.0 => Ok(1),
                _ => Err(DatasetError::UnparseableValue { row: line, column: COLUMNS[k], value: field(k).to_string() }),
            }
        };
        let bmi = if is_missing(field(8)) { None } else { Some(number(8)?) };
        let smoking = if field(9).is_empty() { UNKNOWN_SMOKING.to_string() } else { field(9).to_string() };
        let record = EhrRecord {
            id: id_col.and_then(|c| row.get(c)).map_or_else(|| line.to_string(), str::to_string),
            gender: field(0).to_string(),
            age: number(1)?,
            hypertension: flag(2)?,
            heart_disease: flag(3)?,
            ever_married: field(4).to_string(),
            work_type: field(5).to_string(),
            residence_type: field(6).to_string(),
            avg_glucose_level: number(7)?,
            bmi,
            smoking_status: smoking,
            stroke: flag(10)?,
        };
        record.validate().map_err(|(column, reason)| DatasetError::InvalidValue { row: line, column, reason })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    Ok(records)
}

pub fn load_records(path: &Path) -> Result<Vec<EhrRecord>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_csv(std::io::BufReader::new(file))
}

/// Records, their encoding and the encoded design matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<EhrRecord>,
    pub encoding: EncodingMap,
    pub matrix: EncodedMatrix,
}

impl Dataset {
    pub fn from_records(records: Vec<EhrRecord>, source: &str) -> Result<Self, DatasetError> {
        let encoding = fit_encoding(&records)?;
        let mut matrix = encode(&records, &encoding)?;
        matrix.provenance = Provenance { source: source.to_string(), encoding_digest: encoding.digest() };
        Ok(Self { records, encoding, matrix })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::from_records(load_records(path)?, &path.display().to_string())
    }
}

/// Writes records in the dataset's own column layout.
pub fn write_csv(records: &[EhrRecord], out: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id",
        "gender",
        "age",
        "hypertension",
        "heart_disease",
        "ever_married",
        "work_type",
        "Residence_type",
        "avg_glucose_level",
        "bmi",
        "smoking_status",
        "stroke",
    ])?;
    for r in records {
        w.write_record([
            r.id.clone(),
            r.gender.clone(),
            r.age.to_string(),
            r.hypertension.to_string(),
            r.heart_disease.to_string(),
            r.ever_married.clone(),
            r.work_type.clone(),
            r.residence_type.clone(),
            r.avg_glucose_level.to_string(),
            r.bmi.map_or_else(|| "N/A".to_string(), |b| b.to_string()),
            r.smoking_status.clone(),
            r.stroke.to_string(),
        ])?;
    }
    w.flush().map_err(|source| DatasetError::Io { path: "<output>".into(), source })?;
    Ok(())
}
