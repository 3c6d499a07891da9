//! Patient records, categorical encoding and the numeric design matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feature::Feature;

/// Level used for a missing or unrecorded smoking status.
pub const UNKNOWN_SMOKING: &str = "Unknown";

/// One patient row as read from the dataset.
///
/// Categorical attributes are kept as their raw level strings; they only
/// become numbers through an [`EncodingMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrRecord {
    /// Patient identifier. Never used as a feature.
    pub id: String,
    pub gender: String,
    pub age: f64,
    pub hypertension: u8,
    pub heart_disease: u8,
    pub ever_married: String,
    pub work_type: String,
    pub residence_type: String,
    pub avg_glucose_level: f64,
    /// `None` when the source marks the value as missing.
    pub bmi: Option<f64>,
    pub smoking_status: String,
    pub stroke: u8,
}

impl EhrRecord {
    /// Checks the value-range invariants, returning the offending column and a
    /// reason on failure.
    pub fn validate(&self) -> core::result::Result<(), (&'static str, String)> {
        if !(0.0..=130.0).contains(&self.age) {
            return Err(("age", format!("age {} outside [0, 130]", self.age)));
        }
        if !(self.avg_glucose_level > 0.0) || !self.avg_glucose_level.is_finite() {
            return Err((
                "avg_glucose_level",
                format!("glucose {} must be positive", self.avg_glucose_level),
            ));
        }
        if let Some(b) = self.bmi {
            if !(b > 5.0 && b < 120.0) {
                return Err(("bmi", format!("bmi {b} outside (5, 120)")));
            }
        }
        for (name, v) in [
            ("hypertension", self.hypertension),
            ("heart_disease", self.heart_disease),
            ("stroke", self.stroke),
        ] {
            if v > 1 {
                return Err((name, format!("{name} flag must be 0 or 1, got {v}")));
            }
        }
        Ok(())
    }

    pub fn categorical_level(&self, feature: Feature) -> Option<&str> {
        match feature {
            Feature::Gender => Some(&self.gender),
            Feature::EverMarried => Some(&self.ever_married),
            Feature::WorkType => Some(&self.work_type),
            Feature::ResidenceType => Some(&self.residence_type),
            Feature::SmokingStatus => Some(&self.smoking_status),
            _ => None,
        }
    }
}

/// Level-to-code table for one categorical attribute. The code of a level is
/// its position in `levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub feature: Feature,
    pub levels: Vec<String>,
}

impl CategoricalEncoding {
    pub fn code(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    pub fn level(&self, code: usize) -> Option<&str> {
        self.levels.get(code).map(String::as_str)
    }
}

/// How missing values of a numeric attribute are filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Imputation {
    /// Missing cells take the mean of the observed values.
    Mean { value: f64 },
    /// Missing values are their own categorical level.
    OwnLevel { level: String },
}

/// Fitted encoding for the five categorical attributes plus the imputation
/// rules. Serializes to the JSON audit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMap {
    /// One entry per categorical feature, in column order.
    pub categorical: Vec<CategoricalEncoding>,
    pub imputation: BTreeMap<Feature, Imputation>,
}

/// Levels that always get the low codes, in this order, when present.
fn canonical_levels(feature: Feature) -> &'static [&'static str] {
    match feature {
        Feature::Gender => &["Female", "Male"],
        Feature::EverMarried => &["No", "Yes"],
        Feature::ResidenceType => &["Rural", "Urban"],
        _ => &[],
    }
}

impl EncodingMap {
    pub fn encoding(&self, feature: Feature) -> Option<&CategoricalEncoding> {
        self.categorical.iter().find(|c| c.feature == feature)
    }

    pub fn bmi_fill(&self) -> f64 {
        match self.imputation.get(&Feature::Bmi) {
            Some(Imputation::Mean { value }) => *value,
            _ => f64::NAN,
        }
    }

    /// Inverse mapping of one encoded categorical cell.
    pub fn decode(&self, feature: Feature, code: f64) -> Option<&str> {
        if code < 0.0 || crate::math::floor(code) != code {
            return None;
        }
        self.encoding(feature)?.level(code as usize)
    }

    /// Hex SHA-256 over a canonical rendering of the map.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.categorical {
            hasher.update(c.feature.column_name().as_bytes());
            hasher.update(b"=");
            for l in &c.levels {
                hasher.update(l.as_bytes());
                hasher.update(b"\x1f");
            }
            hasher.update(b"\n");
        }
        for (f, imp) in &self.imputation {
            hasher.update(f.column_name().as_bytes());
            match imp {
                Imputation::Mean { value } => {
                    hasher.update(b":mean:");
                    hasher.update(value.to_bits().to_le_bytes());
                }
                Imputation::OwnLevel { level } => {
                    hasher.update(b":level:");
                    hasher.update(level.as_bytes());
                }
            }
            hasher.update(b"\n");
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use core::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Learns level codes (first-seen order, canonical binaries first) and the
/// BMI imputation mean.
pub fn fit_encoding(records: &[EhrRecord]) -> Result<EncodingMap> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut categorical = Vec::new();
    for feature in Feature::ALL.into_iter().filter(|f| f.is_categorical()) {
        let mut levels: Vec<String> = canonical_levels(feature).iter().map(|s| s.to_string()).collect();
        for r in records {
            let level = r.categorical_level(feature).unwrap_or_default();
            if !levels.iter().any(|l| l == level) {
                levels.push(level.to_string());
            }
        }
        categorical.push(CategoricalEncoding { feature, levels });
    }

    let observed: Vec<f64> = records.iter().filter_map(|r| r.bmi).collect();
    // A cohort without a single BMI reading still needs a finite fill value.
    let bmi_mean = if observed.is_empty() { 0.0 } else { crate::math::mean(&observed) };

    let mut imputation = BTreeMap::new();
    imputation.insert(Feature::Bmi, Imputation::Mean { value: bmi_mean });
    imputation.insert(
        Feature::SmokingStatus,
        Imputation::OwnLevel { level: UNKNOWN_SMOKING.to_string() },
    );
    Ok(EncodingMap { categorical, imputation })
}

/// Where an [`EncodedMatrix`] came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub encoding_digest: String,
}

/// Row-major numeric design matrix with a binary label per row.
///
/// Encoded datasets carry the ten features in [`Feature::ALL`] order; feature
/// selection and PCA projection produce matrices with other column sets.
/// `row_ids` track the identity of each row back to the encoded source so
/// that partitions can be checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    columns: Vec<String>,
    values: Vec<f64>,
    labels: Vec<u8>,
    row_ids: Vec<usize>,
    pub provenance: Provenance,
}

impl EncodedMatrix {
    /// Builds a matrix from row-major values. Row ids default to `0..n`.
    pub fn new(columns: Vec<String>, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let n = labels.len();
        let ids = (0..n).collect();
        Self::with_row_ids(columns, values, labels, ids)
    }

    pub fn with_row_ids(
        columns: Vec<String>,
        values: Vec<f64>,
        labels: Vec<u8>,
        row_ids: Vec<usize>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::SchemaMismatch("matrix needs at least one column".into()));
        }
        if values.len() != labels.len() * columns.len() {
            return Err(Error::LengthMismatch { left: values.len(), right: labels.len() * columns.len() });
        }
        if row_ids.len() != labels.len() {
            return Err(Error::LengthMismatch { left: row_ids.len(), right: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        Ok(Self { columns, values, labels, row_ids, provenance: Provenance::default() })
    }

    /// Convenience constructor from a slice of rows.
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let width = columns.len();
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::LengthMismatch { left: r.len(), right: width });
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch { left: rows.len(), right: labels.len() });
        }
        Self::new(columns, rows.concat(), labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    pub fn count_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// True when the columns are exactly the ten features in canonical order.
    pub fn has_full_schema(&self) -> bool {
        self.columns.len() == Feature::COUNT
            && self.columns.iter().zip(Feature::ALL).all(|(c, f)| c == f.column_name())
    }

    /// Copies the given rows (by position) into a new matrix, keeping row ids.
    pub fn select_rows(&self, positions: &[usize]) -> Self {
        let w = self.n_cols();
        let mut values = Vec::with_capacity(positions.len() * w);
        let mut labels = Vec::with_capacity(positions.len());
        let mut row_ids = Vec::with_capacity(positions.len());
        for &p in positions {
            values.extend_from_slice(self.row(p));
            labels.push(self.labels[p]);
            row_ids.push(self.row_ids[p]);
        }
        Self {
            columns: self.columns.clone(),
            values,
            labels,
            row_ids,
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps only the named feature columns, in the order given.
    pub fn select_features(&self, features: &[Feature]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidParameter { name: "features", reason: "empty feature list".into() });
        }
        let idx = features
            .iter()
            .map(|f| {
                self.column_index(f.column_name())
                    .ok_or_else(|| Error::SchemaMismatch(format!("column {f} not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self.rows().flat_map(|r| idx.iter().map(move |&j| r[j])).collect();
        Ok(Self {
            columns: features.iter().map(|f| f.column_name().to_string()).collect(),
            values,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Same rows and labels with a new set of columns (e.g. PCA scores).
    pub fn replace_columns(&self, columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let mut m = Self::with_row_ids(columns, values, self.labels.clone(), self.row_ids.clone())?;
        m.provenance = self.provenance.clone();
        Ok(m)
    }

    /// Overwrites one cell. Used to build perturbed copies in tests and tools.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let w = self.n_cols();
        self.values[row * w + col] = value;
    }
}

/// Encodes records into the ten-column design matrix, imputing missing BMI.
pub fn encode(records: &[EhrRecord], map: &EncodingMap) -> Result<EncodedMatrix> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let bmi_fill = map.bmi_fill();
    let mut values = Vec::with_capacity(records.len() * Feature::COUNT);
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        for feature in Feature::ALL {
            let v = match feature {
                Feature::Age => r.age,
                Feature::Hypertension => f64::from(r.hypertension),
                Feature::HeartDisease => f64::from(r.heart_disease),
                Feature::AvgGlucoseLevel => r.avg_glucose_level,
                Feature::Bmi => r.bmi.unwrap_or(bmi_fill),
                categorical => {
                    let level = r.categorical_level(categorical).unwrap_or_default();
                    let code = map
                        .encoding(categorical)
                        .and_then(|e| e.code(level))
                        .ok_or_else(|| Error::UnknownLevel {
                            feature: categorical.column_name().to_string(),
                            level: level.to_string(),
                        })?;
                    code as f64
                }
            };
            values.push(v);
        }
        labels.push(r.stroke);
    }
    let columns = Feature::ALL.iter().map(|f| f.column_name().to_string()).collect();
    let mut m = EncodedMatrix::new(columns, values, labels)?;
    m.provenance.encoding_digest = map.digest();
    Ok(m)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn record(id: &str, married: &str, work: &str, bmi: Option<f64>, smoking: &str) -> EhrRecord {
        EhrRecord {
            id: id.into(),
            gender: "Male".into(),
            age: 50.0,
            hypertension: 0,
            heart_disease: 1,
            ever_married: married.into(),
            work_type: work.into(),
            residence_type: "Urban".into(),
            avg_glucose_level: 105.5,
            bmi,
            smoking_status: smoking.into(),
            stroke: 0,
        }
    }

    #[test]
    fn binary_levels_use_canonical_codes() {
        // "Yes" is seen first but still gets code 1.
        let recs = vec![
            record("1", "Yes", "Private", Some(20.0), "smokes"),
            record("2", "No", "Private", Some(30.0), "smokes"),
        ];
        let map = fit_encoding(&recs).unwrap();
        let married = map.encoding(Feature::EverMarried).unwrap();
        assert_eq!(married.code("No"), Some(0));
        assert_eq!(married.code("Yes"), Some(1));
        assert_eq!(map.encoding(Feature::ResidenceType).unwrap().code("Urban"), Some(1));
    }

    #[test]
    fn bmi_mean_imputation() {
        let recs = vec![
            record("1", "Yes", "Private", Some(20.0), "smokes"),
            record("2", "Yes", "Private", Some(30.0), "smokes"),
            record("3", "Yes", "Private", None, "smokes"),
        ];
        let map = fit_encoding(&recs).unwrap();
        assert_eq!(map.bmi_fill(), 25.0);
        let m = encode(&recs, &map).unwrap();
        assert_eq!(m.row(2)[Feature::Bmi.index()], 25.0);
    }

    #[test]
    fn smoking_levels_each_get_a_code() {
        let recs: Vec<_> = ["never smoked", "smokes", "formerly smoked", "Unknown"]
            .iter()
            .enumerate()
            .map(|(i, s)| record(&alloc::format!("{i}"), "No", "Private", Some(22.0), s))
            .collect();
        let map = fit_encoding(&recs).unwrap();
        let enc = map.encoding(Feature::SmokingStatus).unwrap();
        assert_eq!(enc.levels.len(), 4);
        assert_eq!(enc.code("never smoked"), Some(0));
        assert_eq!(enc.code("Unknown"), Some(3));
    }

    #[test]
    fn encode_shape_and_label_vector() {
        let recs = vec![
            record("1", "Yes", "Private", Some(20.0), "smokes"),
            record("2", "No", "Govt_job", Some(30.0), "never smoked"),
            record("3", "Yes", "children", Some(31.0), "Unknown"),
        ];
        let map = fit_encoding(&recs).unwrap();
        let m = encode(&recs, &map).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (3, 10));
        assert_eq!(m.labels().len(), 3);
        assert!(m.has_full_schema());
        assert_eq!(m.provenance.encoding_digest, map.digest());
    }

    #[test]
    fn unseen_level_is_rejected() {
        let recs = vec![record("1", "Yes", "Private", Some(20.0), "smokes")];
        let map = fit_encoding(&recs).unwrap();
        let other = vec![record("2", "Yes", "Self-employed", Some(20.0), "smokes")];
        match encode(&other, &map) {
            Err(Error::UnknownLevel { feature, level }) => {
                assert_eq!(feature, "work_type");
                assert_eq!(level, "Self-employed");
            }
            other => panic!("expected UnknownLevel, got {other:?}"),
        }
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(fit_encoding(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn decode_recovers_levels() {
        let recs = vec![
            record("1", "Yes", "Private", Some(20.0), "smokes"),
            record("2", "No", "Govt_job", None, "Unknown"),
        ];
        let map = fit_encoding(&recs).unwrap();
        let m = encode(&recs, &map).unwrap();
        for (i, r) in recs.iter().enumerate() {
            for f in Feature::ALL.into_iter().filter(|f| f.is_categorical()) {
                assert_eq!(map.decode(f, m.row(i)[f.index()]), r.categorical_level(f));
            }
        }
    }

    #[test]
    fn validation_flags_out_of_range() {
        let mut r = record("1", "Yes", "Private", Some(4.0), "smokes");
        assert_eq!(r.validate().unwrap_err().0, "bmi");
        r.bmi = Some(25.0);
        r.age = 131.0;
        assert_eq!(r.validate().unwrap_err().0, "age");
        r.age = 30.0;
        r.stroke = 2;
        assert_eq!(r.validate().unwrap_err().0, "stroke");
    }
}
