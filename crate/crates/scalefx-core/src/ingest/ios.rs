//! iOS extraction reader: `ihealth.sqlite`.
//!
//! Canonical column names, mirroring the Android schema with the Core-Data
//! style `Z` prefix:
//!
//! - `ZUSER(ZIHEALTHID, ZUSERNAME, ZNAME, ZBIRTHDAY, ZGENDER, ZHEIGHT,
//!   ZWEIGHT, ZTIMEZONE, ZLOCATION, ZPASSWORD)` — the password column is
//!   plaintext and becomes a credential artifact.
//! - `ZSCALEMEASUREMENT(ZIHEALTHID, ZMEASURETIME, ZWEIGHT, ZBMI, ZFATVALUE,
//!   ZWATERVALUE, ZVISCERALFATLEVEL, ZMUSCLEVALUE, ZDCI, ZBONEVALUE)`
//! - `ZSCALETEMPRHINFO(ZTIMESTAMP, ZTEMPERATURE, ZHUMIDITY)` — attached to
//!   the nearest reading within the matching window, retained otherwise.
//! - `ZACCESSORYCONNECTLOG(ZDEVICENAME, ZDEVICETYPE, ZFIRMWAREVERSION,
//!   ZHARDWAREVERSION, ZMODELNUMBER, ZSERIALNUMBER)`

use super::android::RawReadingRow;
use super::{
    existing_tables, file_name_of, local_to_utc, locate_artifacts, looks_like_interchange,
    open_readonly, parse_local_ts, schema_mismatch, IngestOptions, Ingested,
};
use crate::error::{Error, Result};
use crate::model::{
    parse_tz_offset_min, CredentialArtifact, CredentialKind, DeviceInfo, EnvironmentAnnotation,
    EnvironmentSample, EvidenceSet, Source, UserAccount,
};
use crate::record::Gender;
use crate::units::Deci;
use rusqlite::Connection;
use std::path::Path;

pub const IOS_DB_NAME: &str = "ihealth.sqlite";
const TABLES: [&str; 4] = ["ZUSER", "ZSCALEMEASUREMENT", "ZSCALETEMPRHINFO", "ZACCESSORYCONNECTLOG"];

pub fn ingest_ios(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    if looks_like_interchange(path) {
        return super::read_interchange_as(path, Source::Ios);
    }
    let (db_path, _) = locate_artifacts(path, IOS_DB_NAME)?;
    let mut set = EvidenceSet::empty(Source::Ios, path.display().to_string());
    let mut warnings = Vec::new();
    let mut tz_offset_min = opts.default_tz_offset_min;

    let Some(db_path) = db_path else {
        warnings.push(format!("no application database found under {}", path.display()));
        return Ok(Ingested { set, warnings });
    };
    let conn = open_readonly(&db_path)?;
    let tables = existing_tables(&conn)?;
    if TABLES.iter().all(|t| !tables.contains(*t)) {
        return Err(Error::MissingTable {
            path: db_path.display().to_string(),
            table: "ZSCALEMEASUREMENT".into(),
        });
    }
    for table in TABLES {
        if !tables.contains(table) {
            warnings.push(format!("{}: table {table} missing", file_name_of(&db_path)));
        }
    }
    if tables.contains("ZUSER") {
        parse_users(&conn, &mut set, &mut warnings, &mut tz_offset_min)?;
    }
    if tables.contains("ZACCESSORYCONNECTLOG") {
        parse_devices(&conn, &mut set, &mut warnings)?;
    }
    if tables.contains("ZSCALEMEASUREMENT") {
        parse_readings(&conn, tz_offset_min, &mut set, &mut warnings)?;
    }
    if tables.contains("ZSCALETEMPRHINFO") {
        let samples = parse_environment(&conn, tz_offset_min, &mut warnings)?;
        attach_environment(samples, &mut set, opts.match_window_s);
    }
    Ok(Ingested { set, warnings })
}

fn parse_users(
    conn: &Connection,
    set: &mut EvidenceSet,
    warnings: &mut Vec<String>,
    tz_offset_min: &mut i32,
) -> Result<()> {
    let mut stmt = conn
        .prepare(
            "SELECT rowid, ZIHEALTHID, ZUSERNAME, ZNAME, ZBIRTHDAY, ZGENDER, ZHEIGHT, \
             ZWEIGHT, ZTIMEZONE, ZLOCATION, ZPASSWORD FROM ZUSER ORDER BY rowid",
        )
        .map_err(|e| schema_mismatch("ZUSER", e))?;
    let rows = stmt.query_map([], |row| {
        Ok((
            row.get::<_, i64>(0)?,
            row.get::<_, Option<i64>>(1)?,
            row.get::<_, Option<String>>(2)?,
            row.get::<_, Option<String>>(3)?,
            row.get::<_, Option<String>>(4)?,
            row.get::<_, Option<i64>>(5)?,
            row.get::<_, Option<f64>>(6)?,
            row.get::<_, Option<f64>>(7)?,
            row.get::<_, Option<String>>(8)?,
            row.get::<_, Option<String>>(9)?,
            row.get::<_, Option<String>>(10)?,
        ))
    })?;
    let mut tz_declared = false;
    for row in rows {
        let (rowid, id, username, name, birthday, gender, height, weight, timezone, location, password) =
            match row {
                Ok(v) => v,
                Err(e) => {
                    warnings.push(format!("ZUSER: unreadable row skipped: {e}"));
                    continue;
                }
            };
        let context = format!("ZUSER rowid {rowid}");
        if let Some(tz) = timezone.as_deref() {
            match parse_tz_offset_min(tz) {
                Ok(min) if !tz_declared => {
                    *tz_offset_min = min;
                    tz_declared = true;
                }
                Ok(_) => {}
                Err(e) => warnings.push(format!("{context}: {e}; using default offset")),
            }
        }
        if let Some(password) = password.filter(|p| !p.is_empty()) {
            set.credentials.push(CredentialArtifact {
                kind: CredentialKind::PlaintextPassword,
                value: password,
                origin: format!("{IOS_DB_NAME} {context}, column ZPASSWORD"),
            });
        }
        let account = UserAccount {
            user_id: id.and_then(|v| u32::try_from(v).ok()),
            username,
            name,
            birthday: birthday.as_deref().and_then(super::android::parse_birthday(&context, warnings)),
            gender: gender.map(|g| Gender::from_byte(g.clamp(0, 255) as u8)),
            height_cm: height.map(|h| h.round().clamp(0.0, f64::from(u16::MAX)) as u16),
            weight_kg: weight.map(Deci::from_f64),
            country: None,
            timezone,
            location,
        };
        if super::warn_unidentified(&account, &context, warnings) {
            set.accounts.push(account);
        }
    }
    Ok(())
}

fn parse_devices(
    conn: &Connection,
    set: &mut EvidenceSet,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let mut stmt = conn
        .prepare(
            "SELECT rowid, ZDEVICENAME, ZDEVICETYPE, ZFIRMWAREVERSION, ZHARDWAREVERSION, \
             ZMODELNUMBER, ZSERIALNUMBER FROM ZACCESSORYCONNECTLOG ORDER BY rowid",
        )
        .map_err(|e| schema_mismatch("ZACCESSORYCONNECTLOG", e))?;
    let rows = stmt.query_map([], |row| {
        Ok((
            row.get::<_, i64>(0)?,
            row.get::<_, Option<String>>(1)?,
            row.get::<_, Option<String>>(2)?,
            row.get::<_, Option<String>>(3)?,
            row.get::<_, Option<String>>(4)?,
            row.get::<_, Option<String>>(5)?,
            row.get::<_, Option<String>>(6)?,
        ))
    })?;
    for row in rows {
        let (rowid, name, dtype, firmware, hardware, model, serial) = match row {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("ZACCESSORYCONNECTLOG: unreadable row skipped: {e}"));
                continue;
            }
        };
        let Some(identifier) = serial.clone().or_else(|| name.clone()) else {
            warnings.push(format!(
                "ZACCESSORYCONNECTLOG rowid {rowid}: no serial or name; skipped"
            ));
            continue;
        };
        set.devices.push(DeviceInfo {
            device_name: name.unwrap_or_else(|| identifier.clone()),
            device_identifier: identifier,
            device_type: dtype,
            mac_address: None,
            firmware_version: firmware,
            hardware_version: hardware,
            model_number: model,
            serial_number: serial,
        });
    }
    Ok(())
}

fn parse_readings(
    conn: &Connection,
    tz_offset_min: i32,
    set: &mut EvidenceSet,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let mut stmt = conn
        .prepare(
            "SELECT rowid, ZIHEALTHID, ZMEASURETIME, ZWEIGHT, ZBMI, ZFATVALUE, ZWATERVALUE, \
             ZVISCERALFATLEVEL, ZMUSCLEVALUE, ZDCI, ZBONEVALUE \
             FROM ZSCALEMEASUREMENT ORDER BY rowid",
        )
        .map_err(|e| schema_mismatch("ZSCALEMEASUREMENT", e))?;
    let rows = stmt.query_map([], |row| {
        Ok(RawReadingRow {
            rowid: row.get(0)?,
            user_id: row.get(1)?,
            measure_time: row.get(2)?,
            weight: row.get(3)?,
            bmi: row.get(4)?,
            fat: row.get(5)?,
            water: row.get(6)?,
            visceral: row.get(7)?,
            muscle: row.get(8)?,
            dci: row.get(9)?,
            bone: row.get(10)?,
        })
    })?;
    for row in rows {
        let raw = match row {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("ZSCALEMEASUREMENT: unreadable row skipped: {e}"));
                continue;
            }
        };
        let source_ref = format!("ZSCALEMEASUREMENT rowid {}", raw.rowid);
        match raw.normalize(Source::Ios, &source_ref, tz_offset_min) {
            Ok(reading) => set.readings.push(reading),
            Err(e) => warnings.push(format!("{source_ref}: {e}; row skipped")),
        }
    }
    Ok(())
}

fn parse_environment(
    conn: &Connection,
    tz_offset_min: i32,
    warnings: &mut Vec<String>,
) -> Result<Vec<EnvironmentSample>> {
    let mut stmt = conn
        .prepare(
            "SELECT rowid, ZTIMESTAMP, ZTEMPERATURE, ZHUMIDITY \
             FROM ZSCALETEMPRHINFO ORDER BY rowid",
        )
        .map_err(|e| schema_mismatch("ZSCALETEMPRHINFO", e))?;
    let rows = stmt.query_map([], |row| {
        Ok((
            row.get::<_, i64>(0)?,
            row.get::<_, Option<String>>(1)?,
            row.get::<_, Option<f64>>(2)?,
            row.get::<_, Option<f64>>(3)?,
        ))
    })?;
    let mut samples = Vec::new();
    for row in rows {
        let (rowid, ts, temperature, humidity) = match row {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("ZSCALETEMPRHINFO: unreadable row skipped: {e}"));
                continue;
            }
        };
        let source_ref = format!("ZSCALETEMPRHINFO rowid {rowid}");
        let parsed: Result<EnvironmentSample> = (|| {
            let ts = ts.ok_or_else(|| Error::InvalidInput("timestamp is NULL".into()))?;
            let local = parse_local_ts(&ts)?;
            Ok(EnvironmentSample {
                timestamp_utc: local_to_utc(local, tz_offset_min),
                temperature_c: temperature.map(Deci::from_f64).unwrap_or(Deci::ZERO),
                humidity_pct: humidity.map(Deci::from_f64).unwrap_or(Deci::ZERO),
                source_ref,
            })
        })();
        match parsed {
            Ok(sample) => samples.push(sample),
            Err(e) => warnings.push(format!("ZSCALETEMPRHINFO rowid {rowid}: {e}; row skipped")),
        }
    }
    Ok(samples)
}

/// Attach each environment row to the nearest not-yet-annotated reading
/// within the window; rows that match nothing are retained unattached.
fn attach_environment(samples: Vec<EnvironmentSample>, set: &mut EvidenceSet, window_s: i64) {
    for sample in samples {
        let best = set
            .readings
            .iter_mut()
            .filter(|r| r.environment.is_none())
            .map(|r| {
                let dt = (r.timestamp_utc - sample.timestamp_utc).num_seconds().abs();
                (dt, r)
            })
            .filter(|(dt, _)| *dt <= window_s)
            .min_by_key(|(dt, _)| *dt);
        match best {
            Some((_, reading)) => {
                reading.environment = Some(EnvironmentAnnotation {
                    temperature_c: sample.temperature_c,
                    humidity_pct: sample.humidity_pct,
                    source_ref: sample.source_ref,
                });
            }
            None => set.environment.push(sample),
        }
    }
}
