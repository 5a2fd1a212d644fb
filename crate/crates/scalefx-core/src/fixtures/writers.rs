//! Write generated ecosystems to disk in the exact on-disk shapes the
//! ingest readers expect, so end-to-end runs exercise the real parsers.
//!
//! Per-snapshot layout:
//!
//! ```text
//! <dir>/
//!   scale.bin
//!   android/iHealthMyVitals.V2/databases/androidNin.db
//!   android/iHealthMyVitals.V2/shared_prefs/ihealth_preferences.xml
//!   ios/com.ihealthlabs.iHealth/Documents/ihealth.sqlite
//!   cloud/readings.csv
//!   cloud/profile.json
//!   expected.json
//! ```
//!
//! When the snapshot caught the apps wiped, `android/` and `ios/` exist but
//! are empty — exactly what an extraction of a freshly reset phone yields.

use super::{
    generate_ecosystem, tz_string, EcosystemSnapshot, ExpectedOutcome, GroundTruthScript, Profile,
    ResolvedReading,
};
use crate::carve::sha256_hex;
use crate::error::Result;
use crate::ingest::{ANDROID_DB_NAME, IOS_DB_NAME};
use crate::units::Deci;
use chrono::NaiveDateTime;
use rusqlite::Connection;
use std::path::{Path, PathBuf};

/// Generate the ecosystem for `script` and write one directory per
/// snapshot under `root`, named by acquisition label. Returns the
/// snapshot directories in acquisition order.
pub fn write_scenario(script: &GroundTruthScript, seed: u64, root: &Path) -> Result<Vec<PathBuf>> {
    let snapshots = generate_ecosystem(script, seed)?;
    let mut dirs = Vec::new();
    for snap in &snapshots {
        let dir = root.join(&snap.label);
        write_snapshot(snap, &script.profile, &dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Write a single snapshot's artifacts under `dir` (created if absent).
pub fn write_snapshot(snap: &EcosystemSnapshot, profile: &Profile, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("scale.bin"), &snap.scale_dump)?;

    let android_dir = dir.join("android");
    let ios_dir = dir.join("ios");
    std::fs::create_dir_all(&android_dir)?;
    std::fs::create_dir_all(&ios_dir)?;
    if !snap.apps_wiped {
        write_android(&android_dir, profile, &snap.app_readings)?;
        write_ios(&ios_dir, profile, &snap.app_readings)?;
    }

    let cloud_dir = dir.join("cloud");
    std::fs::create_dir_all(&cloud_dir)?;
    write_cloud(&cloud_dir, profile, &snap.cloud_readings)?;

    let expected = ExpectedOutcome {
        label: snap.label.clone(),
        matrix: snap.expected_matrix.clone(),
        findings: snap.expected_findings.clone(),
    };
    let mut json = serde_json::to_string_pretty(&expected)?;
    json.push('\n');
    std::fs::write(dir.join("expected.json"), json)?;
    Ok(())
}

fn local_ts(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%d %H:%M:%S").to_string()
}

fn weight_kg(r: &ResolvedReading) -> f64 {
    f64::from(r.spec.weight_dkg) / 10.0
}

/// The measurement columns shared by both app databases, in insert order.
fn reading_params(r: &ResolvedReading, user_id: u32) -> rusqlite::ParamsFromIter<Vec<rusqlite::types::Value>> {
    use rusqlite::types::Value;
    let opt_f = |v: Option<f64>| v.map_or(Value::Null, Value::Real);
    let opt_i = |v: Option<i64>| v.map_or(Value::Null, Value::Integer);
    let c = r.spec.composition;
    rusqlite::params_from_iter(vec![
        Value::Integer(i64::from(user_id)),
        Value::Text(local_ts(r.spec.local_time)),
        Value::Real(weight_kg(r)),
        Value::Real(r.bmi.to_f64()),
        opt_f(c.map(|c| f64::from(c.fat_dpct) / 10.0)),
        opt_f(c.map(|c| f64::from(c.water_dpct) / 10.0)),
        opt_i(c.map(|c| i64::from(c.visceral_rating))),
        opt_f(c.map(|c| f64::from(c.muscle_dkg) / 10.0)),
        opt_i(r.spec.dci.map(i64::from)),
        opt_f(c.map(|c| f64::from(c.bone_dkg) / 10.0)),
    ])
}

fn write_android(root: &Path, profile: &Profile, readings: &[ResolvedReading]) -> Result<()> {
    let db_dir = root.join("iHealthMyVitals.V2/databases");
    std::fs::create_dir_all(&db_dir)?;
    let conn = Connection::open(db_dir.join(ANDROID_DB_NAME))?;
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
    )?;
    conn.execute(
        "INSERT INTO TB_UserInfo VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
        rusqlite::params![
            i64::from(profile.user_id),
            profile.username,
            profile.name,
            profile.birthday.format("%Y-%m-%d").to_string(),
            i64::from(profile.gender.byte()),
            i64::from(profile.height_cm),
            profile.enrollment_weight_kg.to_f64(),
            profile.country,
            tz_string(profile),
        ],
    )?;
    conn.execute(
        "INSERT INTO TB_Device VALUES (?1, ?2, ?3)",
        rusqlite::params![profile.device_name, profile.mac_address, profile.firmware_version],
    )?;
    for r in readings {
        conn.execute(
            "INSERT INTO TB_WeightOnlineResult VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            reading_params(r, profile.user_id),
        )?;
    }
    drop(conn);

    let prefs_dir = root.join("iHealthMyVitals.V2/shared_prefs");
    std::fs::create_dir_all(&prefs_dir)?;
    let entries = [
        ("email", profile.username.clone()),
        ("mac_address", profile.mac_address.clone()),
        ("access_token", profile.access_token.clone()),
        ("password_hash", sha256_hex(profile.password.as_bytes())),
    ];
    let mut xml = String::from("<?xml version='1.0' encoding='utf-8' standalone='yes' ?>\n<map>\n");
    for (key, value) in entries {
        xml.push_str(&format!(
            "    <string name=\"{key}\">{}</string>\n",
            xml_escape(&value)
        ));
    }
    xml.push_str("</map>\n");
    std::fs::write(prefs_dir.join("ihealth_preferences.xml"), xml)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn write_ios(root: &Path, profile: &Profile, readings: &[ResolvedReading]) -> Result<()> {
    let docs = root.join("com.ihealthlabs.iHealth/Documents");
    std::fs::create_dir_all(&docs)?;
    let conn = Connection::open(docs.join(IOS_DB_NAME))?;
    conn.execute_batch(
        "CREATE TABLE ZUSER (
             ZIHEALTHID INTEGER, ZUSERNAME TEXT, ZNAME TEXT, ZBIRTHDAY TEXT, ZGENDER INTEGER,
             ZHEIGHT INTEGER, ZWEIGHT REAL, ZTIMEZONE TEXT, ZLOCATION TEXT, ZPASSWORD TEXT
         );
         CREATE TABLE ZSCALEMEASUREMENT (
             ZIHEALTHID INTEGER, ZMEASURETIME TEXT, ZWEIGHT REAL, ZBMI REAL, ZFATVALUE REAL,
             ZWATERVALUE REAL, ZVISCERALFATLEVEL INTEGER, ZMUSCLEVALUE REAL, ZDCI INTEGER,
             ZBONEVALUE REAL
         );
         CREATE TABLE ZSCALETEMPRHINFO (ZTIMESTAMP TEXT, ZTEMPERATURE REAL, ZHUMIDITY REAL);
         CREATE TABLE ZACCESSORYCONNECTLOG (
             ZDEVICENAME TEXT, ZDEVICETYPE TEXT, ZFIRMWAREVERSION TEXT, ZHARDWAREVERSION TEXT,
             ZMODELNUMBER TEXT, ZSERIALNUMBER TEXT
         );",
    )?;
    conn.execute(
        "INSERT INTO ZUSER VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
        rusqlite::params![
            i64::from(profile.user_id),
            profile.username,
            profile.name,
            profile.birthday.format("%Y-%m-%d").to_string(),
            i64::from(profile.gender.byte()),
            i64::from(profile.height_cm),
            profile.enrollment_weight_kg.to_f64(),
            tz_string(profile),
            profile.location,
            profile.password,
        ],
    )?;
    conn.execute(
        "INSERT INTO ZACCESSORYCONNECTLOG VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
        rusqlite::params![
            profile.device_name,
            profile.device_type,
            profile.firmware_version,
            profile.hardware_version,
            profile.model_number,
            profile.serial_number,
        ],
    )?;
    for (i, r) in readings.iter().enumerate() {
        conn.execute(
            "INSERT INTO ZSCALEMEASUREMENT VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            reading_params(r, profile.user_id),
        )?;
        // the scale reports ambient conditions alongside each upload
        conn.execute(
            "INSERT INTO ZSCALETEMPRHINFO VALUES (?1, ?2, ?3)",
            rusqlite::params![
                local_ts(r.spec.local_time),
                (215.0 + i as f64) / 10.0,
                (420.0 + 2.0 * i as f64) / 10.0,
            ],
        )?;
    }
    Ok(())
}

fn write_cloud(dir: &Path, profile: &Profile, readings: &[ResolvedReading]) -> Result<()> {
    let mut csv = String::from("timestamp_local,weight_kg,bmi\n");
    for r in readings {
        csv.push_str(&format!(
            "{},{},{}\n",
            local_ts(r.spec.local_time),
            Deci::from_tenths(i32::from(r.spec.weight_dkg)),
            r.bmi,
        ));
    }
    std::fs::write(dir.join("readings.csv"), csv)?;

    let gender = profile.gender.as_str();
    let mut json = serde_json::to_string_pretty(&serde_json::json!({
        "email": profile.username,
        "name": profile.name,
        "birthday": profile.birthday.format("%Y-%m-%d").to_string(),
        "gender": gender,
        "height_cm": profile.height_cm,
        "weight_kg": profile.enrollment_weight_kg,
        "location": profile.location,
        "timezone": tz_string(profile),
    }))?;
    json.push('\n');
    std::fs::write(dir.join("profile.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::canonical_paper_scenario;
    use super::*;
    use crate::carve::{carve, detect_zero_regions, CarveConfig, DumpImage, Fill};
    use crate::correlate::{build_presence_matrix, infer_manipulations, match_readings};
    use crate::ingest::{
        ingest_android, ingest_cloud, ingest_ios, ingest_scale, IngestOptions,
    };
    use crate::model::{CredentialKind, EvidenceSet, Source};
    use crate::record::RECORD_LEN;

    /// Run the real pipeline over a written snapshot directory.
    fn pipeline(dir: &Path) -> (crate::correlate::PresenceMatrix, Vec<crate::correlate::ManipulationFinding>) {
        let opts = IngestOptions::default();
        let dump = DumpImage::load(dir.join("scale.bin")).unwrap();
        let hits = carve(&dump, &CarveConfig::default());
        let scale = ingest_scale(&hits, opts.device_utc_offset_min, "scale.bin").set;
        let android = ingest_android(&dir.join("android"), &opts).unwrap().set;
        let ios = ingest_ios(&dir.join("ios"), &opts).unwrap().set;
        let cloud = ingest_cloud(&dir.join("cloud"), &opts).unwrap().set;
        let sets: Vec<&EvidenceSet> = vec![&scale, &android, &ios, &cloud];
        let clusters = match_readings(
            &sets,
            crate::correlate::DEFAULT_MATCH_WINDOW_S,
            crate::correlate::DEFAULT_WEIGHT_TOLERANCE,
        );
        let matrix = build_presence_matrix(&clusters, &Source::ALL);
        let zero_regions = detect_zero_regions(&dump, RECORD_LEN).unwrap();
        let findings = infer_manipulations(&matrix, &zero_regions);
        (matrix, findings)
    }

    #[test]
    fn written_snapshots_reproduce_their_expected_outcomes() {
        let dir = tempfile::tempdir().unwrap();
        let script = canonical_paper_scenario();
        let dirs = write_scenario(&script, 42, dir.path()).unwrap();
        assert_eq!(dirs.len(), 5);
        let snaps = generate_ecosystem(&script, 42).unwrap();
        for (dir, snap) in dirs.iter().zip(&snaps) {
            let (matrix, findings) = pipeline(dir);
            assert_eq!(matrix, snap.expected_matrix, "{}", snap.label);
            assert_eq!(findings.len(), snap.expected_findings.len(), "{}", snap.label);
            for (got, want) in findings.iter().zip(&snap.expected_findings) {
                assert!(
                    got.equivalent(want),
                    "{}: {got:?} vs {want:?}",
                    snap.label
                );
            }
        }
    }

    #[test]
    fn first_snapshot_artifacts_parse_with_full_detail() {
        let dir = tempfile::tempdir().unwrap();
        let script = canonical_paper_scenario();
        let dirs = write_scenario(&script, 1, dir.path()).unwrap();
        let opts = IngestOptions::default();

        let android = ingest_android(&dirs[0].join("android"), &opts).unwrap();
        assert!(android.warnings.is_empty(), "{:?}", android.warnings);
        assert_eq!(android.set.readings.len(), 3);
        assert_eq!(android.set.readings[0].calories, Some(2219));
        assert_eq!(android.set.accounts[0].username.as_deref(), Some("jdoe@example.com"));
        assert_eq!(android.set.credentials.len(), 2, "token and password hash");

        let ios = ingest_ios(&dirs[0].join("ios"), &opts).unwrap();
        assert!(ios.warnings.is_empty(), "{:?}", ios.warnings);
        assert_eq!(ios.set.readings.len(), 3);
        assert!(ios.set.readings.iter().all(|r| r.environment.is_some()));
        let pw = ios.set.credentials.iter().find(|c| c.kind == CredentialKind::PlaintextPassword);
        assert_eq!(pw.unwrap().value, "Sc@le2019!");
        assert_eq!(ios.set.devices[0].serial_number.as_deref(), Some("SN-7F3K9"));

        let cloud = ingest_cloud(&dirs[0].join("cloud"), &opts).unwrap();
        assert_eq!(cloud.set.readings.len(), 3);
        assert_eq!(cloud.set.readings[0].bmi, Some(Deci::from_tenths(259)));
        assert_eq!(cloud.set.accounts[0].location.as_deref(), Some("Omaha, NE"));

        let dump = DumpImage::load(dirs[0].join("scale.bin")).unwrap();
        let hits = carve(&dump, &CarveConfig::default());
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].reading.weight_dkg, 896);
    }

    #[test]
    fn wiped_snapshot_has_empty_app_directories() {
        let dir = tempfile::tempdir().unwrap();
        let script = canonical_paper_scenario();
        let dirs = write_scenario(&script, 3, dir.path()).unwrap();
        // snapshot 2 follows the app wipe
        let opts = IngestOptions::default();
        let android = ingest_android(&dirs[1].join("android"), &opts).unwrap();
        assert!(android.set.readings.is_empty());
        assert!(android.warnings.iter().any(|w| w.contains("no application database")));
        let ios = ingest_ios(&dirs[1].join("ios"), &opts).unwrap();
        assert!(ios.set.readings.is_empty());
        // snapshot 3 follows the reinstall: apps are populated again
        let android3 = ingest_android(&dirs[2].join("android"), &opts).unwrap();
        assert_eq!(android3.set.readings.len(), 3);
    }

    #[test]
    fn user_delete_snapshot_dump_is_zeroed_not_missing() {
        let dir = tempfile::tempdir().unwrap();
        let script = canonical_paper_scenario();
        let dirs = write_scenario(&script, 8, dir.path()).unwrap();
        let dump = DumpImage::load(dirs[2].join("scale.bin")).unwrap();
        assert!(carve(&dump, &CarveConfig::default()).is_empty());
        let zeroed: Vec<_> = detect_zero_regions(&dump, RECORD_LEN)
            .unwrap()
            .into_iter()
            .filter(|r| r.fill == Fill::Zeros)
            .collect();
        assert_eq!(zeroed.len(), 3);
    }

    #[test]
    fn expected_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let script = canonical_paper_scenario();
        let dirs = write_scenario(&script, 4, dir.path()).unwrap();
        let raw = std::fs::read_to_string(dirs[4].join("expected.json")).unwrap();
        let expected: ExpectedOutcome = serde_json::from_str(&raw).unwrap();
        assert_eq!(expected.label, "result-set-5");
        assert_eq!(expected.matrix.rows.len(), 4);
        assert_eq!(expected.findings.len(), 2);
    }
}
