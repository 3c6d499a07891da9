//! Seeded synthetic cohort shaped like the public stroke dataset.
//!
//! Marginals are coarse: ages spread over 0-85, hypertension and heart
//! disease become more common with age, glucose is log-normal with a
//! diabetic tail and a few percent of BMI values are missing. Stroke labels
//! are assigned to exactly `round(n * class_balance)` rows, drawn by a
//! weighted sample without replacement whose weights follow a logistic risk
//! in age, hypertension, heart disease and glucose.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ingest::{EhrRecord, UNKNOWN_SMOKING};
use crate::math::{self, sigmoid};
use crate::sampling::RandomSource;

fn pick<'a>(rng: &mut RandomSource, table: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut u = rng.uniform() * total;
    for (level, w) in table {
        if u < *w {
            return level;
        }
        u -= w;
    }
    table[table.len() - 1].0
}

fn one_record(rng: &mut RandomSource, id: usize) -> EhrRecord {
    let raw_age = rng.uniform_range(0.08, 85.0);
    let age = if raw_age < 2.0 { math::round(raw_age * 100.0) / 100.0 } else { math::round(raw_age) };

    let gender = pick(rng, &[("Female", 0.586), ("Male", 0.4138), ("Other", 0.0002)]);
    let hypertension = u8::from(rng.bernoulli(0.02 + 0.30 * sigmoid((age - 60.0) / 10.0)));
    let heart_disease = u8::from(rng.bernoulli(0.005 + 0.20 * sigmoid((age - 70.0) / 8.0)));
    let ever_married = if age < 18.0 {
        "No"
    } else if rng.bernoulli(0.2 + 0.7 * sigmoid((age - 30.0) / 5.0)) {
        "Yes"
    } else {
        "No"
    };
    let work_type = if age < 16.0 {
        pick(rng, &[("children", 0.9), ("Never_worked", 0.1)])
    } else if age > 60.0 {
        pick(rng, &[("Private", 0.5), ("Self-employed", 0.3), ("Govt_job", 0.2)])
    } else {
        pick(
            rng,
            &[("Private", 0.66), ("Self-employed", 0.14), ("Govt_job", 0.18), ("Never_worked", 0.02)],
        )
    };
    let residence_type = if rng.bernoulli(0.5) { "Urban" } else { "Rural" };

    let diabetic = rng.bernoulli(0.04 + 0.14 * age / 85.0 + 0.08 * f64::from(heart_disease));
    let glucose = if diabetic {
        175.0 + 35.0 * rng.normal().abs()
    } else {
        math::exp(4.5 + 0.18 * rng.normal())
    };
    let avg_glucose_level = math::round(glucose.clamp(55.0, 272.0) * 100.0) / 100.0;

    let bmi_value = if age < 18.0 {
        16.0 + 0.4 * age + 3.5 * rng.normal()
    } else {
        29.0 + 6.5 * rng.normal()
    };
    let bmi = if rng.bernoulli(0.04) {
        None
    } else {
        Some(math::round(bmi_value.clamp(10.3, 97.6) * 10.0) / 10.0)
    };

    let smoking_status = if age < 13.0 {
        if rng.bernoulli(0.95) { UNKNOWN_SMOKING } else { "never smoked" }
    } else {
        let former = 0.08 + 0.15 * age / 85.0;
        pick(
            rng,
            &[
                ("never smoked", 0.37),
                (UNKNOWN_SMOKING, 0.25),
                ("formerly smoked", former),
                ("smokes", 0.16),
            ],
        )
    };

    EhrRecord {
        id: format!("{}", 10_000 + id),
        gender: gender.to_string(),
        age,
        hypertension,
        heart_disease,
        ever_married: ever_married.to_string(),
        work_type: work_type.to_string(),
        residence_type: residence_type.to_string(),
        avg_glucose_level,
        bmi,
        smoking_status: String::from(smoking_status),
        stroke: 0,
    }
}

fn stroke_weight(r: &EhrRecord) -> f64 {
    sigmoid(
        -7.0 + 0.07 * r.age
            + 0.6 * f64::from(r.hypertension)
            + 0.6 * f64::from(r.heart_disease)
            + 0.008 * (r.avg_glucose_level - 100.0),
    )
}

/// Generates `n` records with exactly `round(n * class_balance)` strokes.
pub fn synthesize(n: usize, class_balance: f64, seed: u64) -> Result<Vec<EhrRecord>> {
    if n < 2 {
        return Err(Error::InvalidParameter { name: "n", reason: format!("need at least 2 records, got {n}") });
    }
    if !(class_balance > 0.0 && class_balance < 1.0) {
        return Err(Error::InvalidBalance(class_balance));
    }
    let mut rng = RandomSource::new(seed);
    let mut records: Vec<EhrRecord> = (0..n).map(|i| one_record(&mut rng, i)).collect();

    // Efraimidis-Spirakis: keep the k largest ln(u) / w.
    let k = math::round(n as f64 * class_balance) as usize;
    let mut keys: Vec<(f64, usize)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (math::ln(1.0 - rng.uniform()) / stroke_weight(r), i))
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in keys.iter().take(k) {
        records[i].stroke = 1;
    }
    Ok(records)
}
