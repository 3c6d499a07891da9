//! The ten patient attributes and their fixed column order.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the ten input attributes of an encoded record.
///
/// The discriminant is the column index in an [`EncodedMatrix`](crate::EncodedMatrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Gender = 0,
    Age = 1,
    Hypertension = 2,
    HeartDisease = 3,
    EverMarried = 4,
    WorkType = 5,
    ResidenceType = 6,
    AvgGlucoseLevel = 7,
    Bmi = 8,
    SmokingStatus = 9,
}

impl Feature {
    pub const COUNT: usize = 10;

    pub const ALL: [Feature; 10] = [
        Feature::Gender,
        Feature::Age,
        Feature::Hypertension,
        Feature::HeartDisease,
        Feature::EverMarried,
        Feature::WorkType,
        Feature::ResidenceType,
        Feature::AvgGlucoseLevel,
        Feature::Bmi,
        Feature::SmokingStatus,
    ];

    /// Age, heart disease, glucose and hypertension.
    pub const TOP_FOUR: [Feature; 4] = [
        Feature::Age,
        Feature::HeartDisease,
        Feature::AvgGlucoseLevel,
        Feature::Hypertension,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Feature::ALL.get(i).copied()
    }

    /// Column name as it appears in the dataset header (lower case).
    pub fn column_name(self) -> &'static str {
        match self {
            Feature::Gender => "gender",
            Feature::Age => "age",
            Feature::Hypertension => "hypertension",
            Feature::HeartDisease => "heart_disease",
            Feature::EverMarried => "ever_married",
            Feature::WorkType => "work_type",
            Feature::ResidenceType => "residence_type",
            Feature::AvgGlucoseLevel => "avg_glucose_level",
            Feature::Bmi => "bmi",
            Feature::SmokingStatus => "smoking_status",
        }
    }

    /// Short symbol: G, A, HT, HD, M, W, RT, AG, BMI, SS.
    pub fn code(self) -> &'static str {
        match self {
            Feature::Gender => "G",
            Feature::Age => "A",
            Feature::Hypertension => "HT",
            Feature::HeartDisease => "HD",
            Feature::EverMarried => "M",
            Feature::WorkType => "W",
            Feature::ResidenceType => "RT",
            Feature::AvgGlucoseLevel => "AG",
            Feature::Bmi => "BMI",
            Feature::SmokingStatus => "SS",
        }
    }

    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            Feature::Gender
                | Feature::EverMarried
                | Feature::WorkType
                | Feature::ResidenceType
                | Feature::SmokingStatus
        )
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    /// Accepts either the column name or the short code, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.column_name().eq_ignore_ascii_case(s) || f.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter {
                name: "feature",
                reason: alloc::format!("unknown feature {s:?}"),
            })
    }
}
