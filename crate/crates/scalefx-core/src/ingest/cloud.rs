//! Cloud-portal export reader.
//!
//! The portal's readings list exposes only date/time, weight, and BMI, so
//! the export is a three-column CSV with header
//! `timestamp_local,weight_kg,bmi`. An optional `profile.json` next to it
//! carries the account page (name, birthday, height, weight, gender,
//! location, plus the account e-mail and timezone when known).

use super::{local_to_utc, looks_like_interchange, parse_local_ts, IngestOptions, Ingested};
use crate::error::{Error, Result};
use crate::model::{
    parse_tz_offset_min, EvidenceSet, NormalizedReading, Source, UserAccount,
};
use crate::record::Gender;
use crate::units::Deci;
use chrono::NaiveDate;
use serde::Deserialize;
use std::path::Path;

const EXPECTED_HEADER: [&str; 3] = ["timestamp_local", "weight_kg", "bmi"];

/// The portal profile page, as captured to `profile.json`.
#[derive(Debug, Clone, Default, Deserialize)]
struct CloudProfile {
    email: Option<String>,
    name: Option<String>,
    birthday: Option<NaiveDate>,
    gender: Option<String>,
    height_cm: Option<u16>,
    weight_kg: Option<Deci>,
    location: Option<String>,
    timezone: Option<String>,
}

pub fn ingest_cloud(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    if looks_like_interchange(path) {
        return super::read_interchange_as(path, Source::Cloud);
    }
    let (csv_path, profile_path) = if path.is_dir() {
        (path.join("readings.csv"), Some(path.join("profile.json")))
    } else {
        (path.to_path_buf(), None)
    };

    let mut set = EvidenceSet::empty(Source::Cloud, path.display().to_string());
    let mut warnings = Vec::new();

    let mut tz_offset_min = opts.default_tz_offset_min;
    if let Some(profile_path) = profile_path.filter(|p| p.is_file()) {
        let profile: CloudProfile = serde_json::from_str(&std::fs::read_to_string(&profile_path)?)?;
        if let Some(tz) = &profile.timezone {
            match parse_tz_offset_min(tz) {
                Ok(min) => tz_offset_min = min,
                Err(e) => warnings.push(format!("profile.json: {e}; using default offset")),
            }
        }
        let account = UserAccount {
            user_id: None,
            username: profile.email,
            name: profile.name,
            birthday: profile.birthday,
            gender: profile.gender.as_deref().map(|g| match g {
                "male" => Gender::Male,
                "female" => Gender::Female,
                _ => Gender::Other(0xFF),
            }),
            height_cm: profile.height_cm,
            weight_kg: profile.weight_kg,
            country: None,
            timezone: profile.timezone,
            location: profile.location,
        };
        if super::warn_unidentified(&account, "profile.json", &mut warnings) {
            set.accounts.push(account);
        }
    }

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&csv_path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if header != EXPECTED_HEADER {
        return Err(Error::SchemaMismatch {
            context: csv_path.display().to_string(),
            detail: format!(
                "header {:?}, expected {:?}",
                header.join(","),
                EXPECTED_HEADER.join(",")
            ),
        });
    }

    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let record = row?;
        let parsed: Result<NormalizedReading> = (|| {
            let local = parse_local_ts(record.get(0).unwrap_or_default())?;
            let weight_kg: Deci = record.get(1).unwrap_or_default().parse()?;
            let bmi: Deci = record.get(2).unwrap_or_default().parse()?;
            if weight_kg.tenths() <= 0 {
                return Err(Error::InvalidInput("weight must be positive".into()));
            }
            Ok(NormalizedReading {
                source: Source::Cloud,
                source_ref: format!("export row {row_no}"),
                user_id: None,
                timestamp_utc: local_to_utc(local, tz_offset_min),
                weight_kg,
                bmi: Some(bmi),
                body_fat_pct: None,
                body_water_pct: None,
                muscle_kg: None,
                bone_kg: None,
                visceral_rating: None,
                calories: None,
                environment: None,
            })
        })();
        match parsed {
            Ok(reading) => set.readings.push(reading),
            Err(e) => {
                return Err(Error::MalformedRow {
                    context: csv_path.display().to_string(),
                    row: row_no,
                    detail: e.to_string(),
                })
            }
        }
    }

    Ok(Ingested { set, warnings })
}
