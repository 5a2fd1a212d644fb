//! Android extraction reader: `androidNin.db` plus shared-preference XML.
//!
//! Canonical column names (the apps' real schemas vary by version; a
//! mismatch surfaces as [`Error::SchemaMismatch`] rather than a guess):
//!
//! - `TB_UserInfo(iHealthID, UserName, Name, Birthday, Gender, Height,
//!   Weight, Country, TimeZone)`
//! - `TB_Device(DeviceName, DeviceID, FirmwareVersion)`
//! - `TB_WeightOnlineResult(iHealthID, MeasureTime, Weight, BMI, FatValue,
//!   WaterValue, VisceralFatLevel, MuscleValue, DCI, BoneValue)`
//!
//! Preference XML contributes the account e-mail, the paired device's MAC
//! address, and the credential artifacts (access token, password hash).

use super::{
    existing_tables, file_name_of, local_to_utc, locate_artifacts, looks_like_interchange,
    open_readonly, parse_local_ts, prefs_xml, schema_mismatch, IngestOptions, Ingested,
};
use crate::error::{Error, Result};
use crate::model::{
    is_valid_mac, parse_tz_offset_min, CredentialArtifact, CredentialKind, DeviceInfo,
    EvidenceSet, NormalizedReading, Source, UserAccount,
};
use crate::record::Gender;
use crate::units::Deci;
use chrono::NaiveDate;
use rusqlite::Connection;
use std::collections::BTreeMap;
use std::path::Path;

pub const ANDROID_DB_NAME: &str = "androidNin.db";
const TABLES: [&str; 3] = ["TB_UserInfo", "TB_Device", "TB_WeightOnlineResult"];

pub fn ingest_android(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    if looks_like_interchange(path) {
        return super::read_interchange_as(path, Source::Android);
    }
    let (db_path, xml_paths) = locate_artifacts(path, ANDROID_DB_NAME)?;
    let mut set = EvidenceSet::empty(Source::Android, path.display().to_string());
    let mut warnings = Vec::new();
    let mut tz_offset_min = opts.default_tz_offset_min;

    if let Some(db_path) = &db_path {
        let conn = open_readonly(db_path)?;
        let tables = existing_tables(&conn)?;
        if TABLES.iter().all(|t| !tables.contains(*t)) {
            return Err(Error::MissingTable {
                path: db_path.display().to_string(),
                table: "TB_WeightOnlineResult".into(),
            });
        }
        for table in TABLES {
            if !tables.contains(table) {
                warnings.push(format!("{}: table {table} missing", file_name_of(db_path)));
            }
        }
        if tables.contains("TB_UserInfo") {
            parse_accounts(&conn, &mut set, &mut warnings, &mut tz_offset_min)?;
        }
        if tables.contains("TB_Device") {
            parse_devices(&conn, &mut set, &mut warnings)?;
        }
        if tables.contains("TB_WeightOnlineResult") {
            parse_readings(&conn, tz_offset_min, &mut set, &mut warnings)?;
        }
    } else {
        warnings.push(format!("no application database found under {}", path.display()));
    }

    for xml_path in &xml_paths {
        let contents = std::fs::read_to_string(xml_path)?;
        match prefs_xml::parse_prefs(&contents) {
            Ok(prefs) => merge_prefs(&prefs, &file_name_of(xml_path), &mut set, &mut warnings),
            Err(e) => warnings.push(format!("{}: {e}; file skipped", file_name_of(xml_path))),
        }
    }

    Ok(Ingested { set, warnings })
}

fn parse_accounts(
    conn: &Connection,
    set: &mut EvidenceSet,
    warnings: &mut Vec<String>,
    tz_offset_min: &mut i32,
) -> Result<()> {
    let mut stmt = conn
        .prepare(
            "SELECT rowid, iHealthID, UserName, Name, Birthday, Gender, Height, Weight, \
             Country, TimeZone FROM TB_UserInfo ORDER BY rowid",
        )
        .map_err(|e| schema_mismatch("TB_UserInfo", e))?;
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
        ))
    })?;
    let mut tz_declared = false;
    for row in rows {
        let (rowid, id, username, name, birthday, gender, height, weight, country, timezone) =
            match row {
                Ok(v) => v,
                Err(e) => {
                    warnings.push(format!("TB_UserInfo: unreadable row skipped: {e}"));
                    continue;
                }
            };
        let context = format!("TB_UserInfo rowid {rowid}");
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
        let account = UserAccount {
            user_id: id.and_then(|v| u32::try_from(v).ok()),
            username,
            name,
            birthday: birthday.as_deref().and_then(parse_birthday(&context, warnings)),
            gender: gender.map(|g| Gender::from_byte(g.clamp(0, 255) as u8)),
            height_cm: height.map(|h| h.round().clamp(0.0, f64::from(u16::MAX)) as u16),
            weight_kg: weight.map(Deci::from_f64),
            country,
            timezone,
            location: None,
        };
        if super::warn_unidentified(&account, &context, warnings) {
            set.accounts.push(account);
        }
    }
    Ok(())
}

pub(crate) fn parse_birthday<'a>(
    context: &'a str,
    warnings: &'a mut Vec<String>,
) -> impl FnMut(&str) -> Option<NaiveDate> + 'a {
    move |raw| match NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        Ok(d) => Some(d),
        Err(e) => {
            warnings.push(format!("{context}: bad birthday {raw:?}: {e}"));
            None
        }
    }
}

fn parse_devices(
    conn: &Connection,
    set: &mut EvidenceSet,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let mut stmt = conn
        .prepare("SELECT rowid, DeviceName, DeviceID, FirmwareVersion FROM TB_Device ORDER BY rowid")
        .map_err(|e| schema_mismatch("TB_Device", e))?;
    let rows = stmt.query_map([], |row| {
        Ok((
            row.get::<_, i64>(0)?,
            row.get::<_, Option<String>>(1)?,
            row.get::<_, Option<String>>(2)?,
            row.get::<_, Option<String>>(3)?,
        ))
    })?;
    for row in rows {
        let (rowid, name, id, firmware) = match row {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("TB_Device: unreadable row skipped: {e}"));
                continue;
            }
        };
        let Some(identifier) = id.clone().or_else(|| name.clone()) else {
            warnings.push(format!("TB_Device rowid {rowid}: no name or identifier; skipped"));
            continue;
        };
        let mac_address = id.filter(|v| is_valid_mac(v));
        set.devices.push(DeviceInfo {
            device_name: name.unwrap_or_else(|| identifier.clone()),
            device_identifier: identifier,
            device_type: None,
            mac_address,
            firmware_version: firmware,
            hardware_version: None,
            model_number: None,
            serial_number: None,
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
            "SELECT rowid, iHealthID, MeasureTime, Weight, BMI, FatValue, WaterValue, \
             VisceralFatLevel, MuscleValue, DCI, BoneValue \
             FROM TB_WeightOnlineResult ORDER BY rowid",
        )
        .map_err(|e| schema_mismatch("TB_WeightOnlineResult", e))?;
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
                warnings.push(format!("TB_WeightOnlineResult: unreadable row skipped: {e}"));
                continue;
            }
        };
        let source_ref = format!("TB_WeightOnlineResult rowid {}", raw.rowid);
        match raw.normalize(Source::Android, &source_ref, tz_offset_min) {
            Ok(reading) => set.readings.push(reading),
            Err(e) => warnings.push(format!("{source_ref}: {e}; row skipped")),
        }
    }
    Ok(())
}

/// One measurement row as stored by either app database; normalization is
/// shared with the iOS reader.
pub(crate) struct RawReadingRow {
    pub rowid: i64,
    pub user_id: Option<i64>,
    pub measure_time: Option<String>,
    pub weight: Option<f64>,
    pub bmi: Option<f64>,
    pub fat: Option<f64>,
    pub water: Option<f64>,
    pub visceral: Option<i64>,
    pub muscle: Option<f64>,
    pub dci: Option<i64>,
    pub bone: Option<f64>,
}

impl RawReadingRow {
    pub(crate) fn normalize(
        &self,
        source: Source,
        source_ref: &str,
        tz_offset_min: i32,
    ) -> Result<NormalizedReading> {
        let measure_time = self
            .measure_time
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("measure time is NULL".into()))?;
        let local = parse_local_ts(measure_time)?;
        let weight = self
            .weight
            .map(Deci::from_f64)
            .filter(|w| w.tenths() > 0)
            .ok_or_else(|| Error::InvalidInput("weight missing or non-positive".into()))?;
        let opt = |v: Option<f64>| v.map(Deci::from_f64).filter(|d| d.tenths() != 0);
        Ok(NormalizedReading {
            source,
            source_ref: source_ref.to_string(),
            user_id: self.user_id.and_then(|v| u32::try_from(v).ok()),
            timestamp_utc: local_to_utc(local, tz_offset_min),
            weight_kg: weight,
            bmi: opt(self.bmi),
            body_fat_pct: opt(self.fat),
            body_water_pct: opt(self.water),
            muscle_kg: opt(self.muscle),
            bone_kg: opt(self.bone),
            visceral_rating: self.visceral.and_then(|v| u8::try_from(v).ok()).filter(|&v| v != 0),
            calories: self.dci.and_then(|v| u32::try_from(v).ok()).filter(|&v| v != 0),
            environment: None,
        })
    }
}

/// Fold preference-file findings into the set: credentials always; the
/// e-mail and MAC only when the database did not already establish them.
fn merge_prefs(
    prefs: &BTreeMap<String, String>,
    file_name: &str,
    set: &mut EvidenceSet,
    warnings: &mut Vec<String>,
) {
    if let Some(email) = prefs.get("email").filter(|v| !v.is_empty()) {
        let known = set.accounts.iter().any(|a| a.username.as_deref() == Some(email));
        if !known {
            set.accounts.push(UserAccount {
                user_id: None,
                username: Some(email.clone()),
                name: None,
                birthday: None,
                gender: None,
                height_cm: None,
                weight_kg: None,
                country: None,
                timezone: None,
                location: None,
            });
        }
    }
    if let Some(mac) = prefs.get("mac_address").filter(|v| !v.is_empty()) {
        if !is_valid_mac(mac) {
            warnings.push(format!("{file_name}: {mac:?} is not a MAC address; ignored"));
        } else if !set.devices.iter().any(|d| d.mac_address.as_deref() == Some(mac.as_str())) {
            set.devices.push(DeviceInfo {
                device_name: "paired device".into(),
                device_identifier: mac.clone(),
                device_type: None,
                mac_address: Some(mac.clone()),
                firmware_version: None,
                hardware_version: None,
                model_number: None,
                serial_number: None,
            });
        }
    }
    for (key, kind) in [
        ("access_token", CredentialKind::AccessToken),
        ("password_hash", CredentialKind::PasswordHash),
    ] {
        if let Some(value) = prefs.get(key).filter(|v| !v.is_empty()) {
            set.credentials.push(CredentialArtifact {
                kind,
                value: value.clone(),
                origin: format!("{file_name} key {key}"),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PREFS_XML: &str = r#"<?xml version='1.0' encoding='utf-8' standalone='yes' ?>
<map>
    <string name="email">jdoe@example.com</string>
    <string name="mac_address">A0:B1:C2:D3:E4:F5</string>
    <string name="access_token">tok-0badc0de</string>
    <string name="password_hash">5e884898da28047151d0e56f8dc6292773603d0d6aabbdd62a11ef721d1542d8</string>
</map>
"#;

    fn create_schema(conn: &Connection) {
        conn.execute_batch(
            "CREATE TABLE TB_UserInfo (
                 iHealthID INTEGER, UserName TEXT, Name TEXT, Birthday TEXT, Gender INTEGER,
                 Height INTEGER, Weight REAL, Country TEXT, TimeZone TEXT
             );
             CREATE TABLE TB_Device (DeviceName TEXT, DeviceID TEXT, FirmwareVersion TEXT);
             CREATE TABLE TB_WeightOnlineResult (
                 iHealthID INTEGER, MeasureTime TEXT, Weight REAL, BMI REAL, FatValue REAL,
                 WaterValue REAL, VisceralFatLevel INTEGER, MuscleValue REAL, DCI INTEGER,
                 BoneValue REAL
             );",
        )
        .unwrap();
    }

    fn populate(conn: &Connection) {
        conn.execute(
            "INSERT INTO TB_UserInfo VALUES (3966528, 'jdoe@example.com', 'J. Doe',
             '1984-02-20', 1, 186, 89.6, 'US', '+00:00')",
            [],
        )
        .unwrap();
        conn.execute(
            "INSERT INTO TB_Device VALUES ('HS6', 'A0:B1:C2:D3:E4:F5', '1.0.5')",
            [],
        )
        .unwrap();
        for (t, w, bmi, fat, water, visc, muscle, dci, bone) in [
            ("2019-05-15 16:27:36", 89.6, 25.9, Some(24.4), Some(51.6), Some(8), Some(64.6), Some(2219), Some(3.3)),
            ("2019-05-16 16:55:00", 88.9, 25.7, Some(24.4), Some(51.8), Some(8), Some(64.3), Some(2205), Some(3.3)),
            ("2019-05-17 18:28:00", 90.4, 26.1, None, None, None, None, None, None),
        ] {
            conn.execute(
                "INSERT INTO TB_WeightOnlineResult VALUES (3966528, ?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
                rusqlite::params![t, w, bmi, fat, water, visc, muscle, dci, bone],
            )
            .unwrap();
        }
    }

    fn build_extraction(root: &Path, with_xml: bool) {
        let db_dir = root.join("iHealthMyVitals.V2/databases");
        std::fs::create_dir_all(&db_dir).unwrap();
        let conn = Connection::open(db_dir.join(ANDROID_DB_NAME)).unwrap();
        create_schema(&conn);
        populate(&conn);
        drop(conn);
        if with_xml {
            let prefs_dir = root.join("iHealthMyVitals.V2/shared_prefs");
            std::fs::create_dir_all(&prefs_dir).unwrap();
            std::fs::write(prefs_dir.join("ihealth_preferences.xml"), PREFS_XML).unwrap();
        }
    }

    #[test]
    fn full_extraction_days_1_to_3() {
        let dir = tempfile::tempdir().unwrap();
        build_extraction(dir.path(), true);
        let out = ingest_android(dir.path(), &IngestOptions::default()).unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let set = &out.set;
        assert_eq!(set.source, Source::Android);

        let weights: Vec<i32> = set.readings.iter().map(|r| r.weight_kg.tenths()).collect();
        assert_eq!(weights, vec![896, 889, 904]);
        let r1 = &set.readings[0];
        assert_eq!(r1.user_id, Some(3_966_528));
        assert_eq!(r1.source_ref, "TB_WeightOnlineResult rowid 1");
        assert_eq!(crate::model::ts::to_string(&r1.timestamp_utc), "2019-05-15T16:27:36Z");
        assert_eq!(r1.bmi, Some(Deci::from_tenths(259)));
        assert_eq!(r1.calories, Some(2219));
        let r3 = &set.readings[2];
        assert_eq!(r3.body_fat_pct, None);
        assert_eq!(r3.calories, None);

        assert_eq!(set.accounts.len(), 1);
        let acct = &set.accounts[0];
        assert_eq!(acct.user_id, Some(3_966_528));
        assert_eq!(acct.username.as_deref(), Some("jdoe@example.com"));
        assert_eq!(acct.timezone.as_deref(), Some("+00:00"));
        assert_eq!(acct.gender, Some(Gender::Male));

        assert_eq!(set.devices.len(), 1, "XML MAC matches the TB_Device row");
        assert_eq!(set.devices[0].mac_address.as_deref(), Some("A0:B1:C2:D3:E4:F5"));

        assert_eq!(set.credentials.len(), 2);
        assert_eq!(set.credentials[0].kind, CredentialKind::AccessToken);
        assert_eq!(set.credentials[1].kind, CredentialKind::PasswordHash);
        assert!(set.credentials[1].origin.contains("ihealth_preferences.xml"));
    }

    #[test]
    fn timezone_declaration_shifts_readings() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join(ANDROID_DB_NAME);
        let conn = Connection::open(&db).unwrap();
        create_schema(&conn);
        conn.execute(
            "INSERT INTO TB_UserInfo VALUES (1, 'a@b.c', NULL, NULL, NULL, NULL, NULL, NULL, '-05:30')",
            [],
        )
        .unwrap();
        conn.execute(
            "INSERT INTO TB_WeightOnlineResult VALUES
             (1, '2019-05-15 10:00:00', 80.0, 24.0, NULL, NULL, NULL, NULL, NULL, NULL)",
            [],
        )
        .unwrap();
        drop(conn);
        let out = ingest_android(&db, &IngestOptions::default()).unwrap();
        assert_eq!(
            crate::model::ts::to_string(&out.set.readings[0].timestamp_utc),
            "2019-05-15T15:30:00Z"
        );
    }

    #[test]
    fn empty_database_with_schema() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join(ANDROID_DB_NAME);
        create_schema(&Connection::open(&db).unwrap());
        let out = ingest_android(&db, &IngestOptions::default()).unwrap();
        assert!(out.set.readings.is_empty());
        assert!(out.set.accounts.is_empty());
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn missing_readings_table_is_partial() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join(ANDROID_DB_NAME);
        let conn = Connection::open(&db).unwrap();
        conn.execute_batch(
            "CREATE TABLE TB_UserInfo (
                 iHealthID INTEGER, UserName TEXT, Name TEXT, Birthday TEXT, Gender INTEGER,
                 Height INTEGER, Weight REAL, Country TEXT, TimeZone TEXT
             );
             INSERT INTO TB_UserInfo VALUES (5, 'x@y.z', NULL, NULL, NULL, NULL, NULL, NULL, NULL);",
        )
        .unwrap();
        drop(conn);
        let out = ingest_android(&db, &IngestOptions::default()).unwrap();
        assert_eq!(out.set.accounts.len(), 1);
        assert!(out.set.readings.is_empty());
        assert!(out.warnings.iter().any(|w| w.contains("TB_WeightOnlineResult")));
    }

    #[test]
    fn unrelated_database_is_missing_table() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join("other.db");
        Connection::open(&db).unwrap().execute_batch("CREATE TABLE t (x INTEGER);").unwrap();
        assert!(matches!(
            ingest_android(&db, &IngestOptions::default()),
            Err(Error::MissingTable { .. })
        ));
    }

    #[test]
    fn xml_only_extraction() {
        let dir = tempfile::tempdir().unwrap();
        let prefs_dir = dir.path().join("shared_prefs");
        std::fs::create_dir_all(&prefs_dir).unwrap();
        std::fs::write(prefs_dir.join("ihealth_preferences.xml"), PREFS_XML).unwrap();
        let out = ingest_android(dir.path(), &IngestOptions::default()).unwrap();
        assert!(out.warnings.iter().any(|w| w.contains("no application database")));
        assert_eq!(out.set.accounts.len(), 1, "e-mail stub account");
        assert_eq!(out.set.accounts[0].username.as_deref(), Some("jdoe@example.com"));
        assert_eq!(out.set.devices.len(), 1, "MAC stub device");
        assert_eq!(out.set.credentials.len(), 2);
        assert!(out.set.readings.is_empty());
    }

    #[test]
    fn bad_rows_skipped_with_warnings() {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join(ANDROID_DB_NAME);
        let conn = Connection::open(&db).unwrap();
        create_schema(&conn);
        conn.execute_batch(
            "INSERT INTO TB_WeightOnlineResult VALUES
                 (1, '2019-05-15 10:00:00', NULL, NULL, NULL, NULL, NULL, NULL, NULL, NULL);
             INSERT INTO TB_WeightOnlineResult VALUES
                 (1, 'garbage', 80.0, NULL, NULL, NULL, NULL, NULL, NULL, NULL);
             INSERT INTO TB_WeightOnlineResult VALUES
                 (1, '2019-05-15 11:00:00', 80.0, 24.0, NULL, NULL, NULL, NULL, NULL, NULL);",
        )
        .unwrap();
        drop(conn);
        let out = ingest_android(&db, &IngestOptions::default()).unwrap();
        assert_eq!(out.set.readings.len(), 1);
        assert_eq!(out.warnings.len(), 2);
        assert!(out.warnings[0].contains("rowid 1"));
        assert!(out.warnings[1].contains("rowid 2"));
    }
}
