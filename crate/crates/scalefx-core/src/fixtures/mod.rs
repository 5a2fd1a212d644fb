//! Synthetic ecosystems from ground-truth scripts.
//!
//! Everything else in this crate is tested against data this module emits:
//! a script says what "really happened" (who weighed what, when, and which
//! manipulations followed), and [`generate_ecosystem`] turns it into the
//! artifacts an investigator would seize — a scale flash dump, app database
//! contents, a cloud export — plus the presence matrix and findings those
//! artifacts *should* produce. The expectations are computed from the
//! script alone, never by running the carver or correlator, so they can
//! serve as an independent oracle.
//!
//! Dump layout guarantees 100 % carver recall by construction:
//!
//! - records are separated by at least one full record length (26 bytes) of
//!   erased flash (`0xFF`), so no 26-byte window ever spans two records;
//! - user ids keep byte 3 zero and byte 1 in 32..=255, and device years are
//!   at least 2013 — under those constraints every window that starts
//!   before a record boundary fails to decode (the would-be month or day
//!   byte is structurally out of range);
//! - windows starting *inside* a record may decode, but they sit at a
//!   higher offset than the record itself and always lose overlap
//!   resolution to it.

mod writers;

pub use writers::{write_scenario, write_snapshot};

use crate::correlate::{
    Confidence, ManipulationFinding, Presence, PresenceMatrix, PresenceRow, RuleId,
};
use crate::error::{Error, Result};
use crate::model::{format_tz_offset_min, Source};
use crate::record::{
    compute_bmi, encode_record, Gender, ScaleReading, DEFAULT_DEVICE_UTC_OFFSET_MIN, RECORD_LEN,
};
use crate::units::Deci;
use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeDelta, Utc};
use rand::prelude::*;
use serde::{Deserialize, Serialize};

// Re-exported so callers can drive the seeded generators without naming
// the RNG crates themselves.
pub use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Minimum erased gap between planted records; one full record length keeps
/// any scan window from touching two records at once.
pub const MIN_GAP: usize = RECORD_LEN;
const MAX_GAP: usize = 57;

/// Minimum spacing between scripted readings, comfortably beyond the
/// correlation window so distinct readings never co-cluster.
pub const MIN_READING_SPACING_S: i64 = 600;

/// The scripted user and their surrounding identity artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub user_id: u32,
    pub gender: Gender,
    pub height_cm: u8,
    pub age_years: u8,
    /// Declared in app databases and the cloud profile, e.g. `+00:00`.
    pub tz_offset_min: i32,
    pub username: String,
    pub name: String,
    pub birthday: NaiveDate,
    pub enrollment_weight_kg: Deci,
    pub country: String,
    pub location: String,
    pub password: String,
    pub access_token: String,
    pub mac_address: String,
    pub device_name: String,
    pub device_type: String,
    pub firmware_version: String,
    pub hardware_version: String,
    pub model_number: String,
    pub serial_number: String,
}

/// Body-composition metrics for one reading; all-or-nothing by contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub fat_dpct: u16,
    pub water_dpct: u16,
    pub muscle_dkg: u16,
    pub bone_dkg: u8,
    pub visceral_rating: u8,
}

/// One scripted step onto the scale, in the profile's local wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingSpec {
    pub local_time: NaiveDateTime,
    pub weight_dkg: u16,
    pub composition: Option<Composition>,
    pub opaque: [u8; 3],
    /// Daily calorie intake figure shown by the apps only.
    pub dci: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manipulation {
    /// Clear and uninstall both apps; they are reinstalled and resync from
    /// the cloud after the next acquisition.
    AppWipe,
    /// Delete the user at the scale: every record window in the dump is
    /// overwritten with zeros. Apps and cloud are untouched.
    ScaleUserDelete,
    /// Step on the scale again; the reading lands on the scale, both apps,
    /// and the cloud, still tagged with the user's id.
    NewReading(ReadingSpec),
    /// Delete one reading through the apps: removed from apps and cloud,
    /// never from the scale's flash.
    ReadingDelete { reading: usize },
}

/// Emit a snapshot after the first `after_manipulations` manipulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionPoint {
    pub label: String,
    pub after_manipulations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScript {
    pub profile: Profile,
    pub readings: Vec<ReadingSpec>,
    pub manipulations: Vec<Manipulation>,
    pub acquisitions: Vec<AcquisitionPoint>,
}

/// One reading with everything derived from the script resolved:
/// UTC instant, device-side timestamp, encoded record bytes, dump offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedReading {
    pub spec: ReadingSpec,
    pub timestamp_utc: DateTime<Utc>,
    pub device_timestamp: NaiveDateTime,
    pub bmi: Deci,
    pub record_bytes: [u8; RECORD_LEN],
    pub dump_offset: usize,
}

/// The artifacts and expectations for one acquisition point.
#[derive(Debug, Clone, PartialEq)]
pub struct EcosystemSnapshot {
    pub label: String,
    pub scale_dump: Vec<u8>,
    /// True when this snapshot caught the apps wiped: extraction dirs are
    /// empty and `app_readings` is empty.
    pub apps_wiped: bool,
    /// Identical content for the Android and iOS databases.
    pub app_readings: Vec<ResolvedReading>,
    pub cloud_readings: Vec<ResolvedReading>,
    pub expected_matrix: PresenceMatrix,
    pub expected_findings: Vec<ManipulationFinding>,
}

/// Serialized form of the per-snapshot expectations (`expected.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub label: String,
    pub matrix: PresenceMatrix,
    pub findings: Vec<ManipulationFinding>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScript(msg.into())
}

impl GroundTruthScript {
    /// Structural validation; [`generate_ecosystem`] calls this first.
    pub fn validate(&self) -> Result<()> {
        let p = &self.profile;
        if p.user_id == 0 {
            return Err(invalid("user_id must be nonzero"));
        }
        let id = p.user_id.to_le_bytes();
        if id[3] != 0 {
            return Err(invalid("user_id must fit in 24 bits"));
        }
        if id[1] < 32 {
            return Err(invalid("user_id byte 1 must be at least 32"));
        }
        if !(50..=250).contains(&p.height_cm) {
            return Err(invalid("height must be 50..=250 cm"));
        }
        if !(1..=120).contains(&p.age_years) {
            return Err(invalid("age must be 1..=120 years"));
        }
        if !(-720..=840).contains(&p.tz_offset_min) {
            return Err(invalid("timezone offset must be within -12:00..=+14:00"));
        }

        if self.acquisitions.is_empty() {
            return Err(invalid("at least one acquisition point is required"));
        }
        let mut last_after = 0usize;
        for acq in &self.acquisitions {
            if acq.after_manipulations > self.manipulations.len() {
                return Err(invalid(format!(
                    "acquisition {:?} is after manipulation {} but only {} are scripted",
                    acq.label,
                    acq.after_manipulations,
                    self.manipulations.len()
                )));
            }
            if acq.after_manipulations < last_after {
                return Err(invalid("acquisition points must be in manipulation order"));
            }
            last_after = acq.after_manipulations;
        }

        let mut prev_utc: Option<DateTime<Utc>> = None;
        let mut check_reading = |spec: &ReadingSpec, what: &str| -> Result<()> {
            if !(10..=3000).contains(&spec.weight_dkg) {
                return Err(invalid(format!("{what}: weight must be 1.0..=300.0 kg")));
            }
            if let Some(c) = &spec.composition {
                if c.fat_dpct == 0 || c.water_dpct == 0 || c.muscle_dkg == 0 || c.bone_dkg == 0
                    || c.visceral_rating == 0
                {
                    return Err(invalid(format!(
                        "{what}: composition metrics must all be nonzero when present"
                    )));
                }
                if c.fat_dpct > 750 || c.water_dpct > 750 {
                    return Err(invalid(format!("{what}: fat/water must be at most 75.0 %")));
                }
            }
            let utc = local_to_utc(spec.local_time, p.tz_offset_min);
            let device = utc - TimeDelta::minutes(i64::from(DEFAULT_DEVICE_UTC_OFFSET_MIN));
            let device_year = device.year();
            if !(2013..=2039).contains(&device_year) {
                return Err(invalid(format!(
                    "{what}: device-side year {device_year} outside 2013..=2039"
                )));
            }
            if let Some(prev) = prev_utc {
                if (utc - prev).num_seconds() < MIN_READING_SPACING_S {
                    return Err(invalid(format!(
                        "{what}: readings must be at least {MIN_READING_SPACING_S} s apart and chronological"
                    )));
                }
            }
            prev_utc = Some(utc);
            Ok(())
        };

        for (i, spec) in self.readings.iter().enumerate() {
            check_reading(spec, &format!("reading {i}"))?;
        }
        let mut existing = self.readings.len();
        let mut deleted = std::collections::BTreeSet::new();
        for (i, m) in self.manipulations.iter().enumerate() {
            match m {
                Manipulation::AppWipe | Manipulation::ScaleUserDelete => {}
                Manipulation::NewReading(spec) => {
                    check_reading(spec, &format!("manipulation {i} new reading"))?;
                    existing += 1;
                }
                Manipulation::ReadingDelete { reading } => {
                    if *reading >= existing {
                        return Err(invalid(format!(
                            "manipulation {i} deletes reading {reading} which does not exist yet"
                        )));
                    }
                    if !deleted.insert(*reading) {
                        return Err(invalid(format!(
                            "manipulation {i} deletes reading {reading} twice"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn local_to_utc(local: NaiveDateTime, tz_offset_min: i32) -> DateTime<Utc> {
    (local - TimeDelta::minutes(i64::from(tz_offset_min))).and_utc()
}

fn resolve_reading(spec: &ReadingSpec, profile: &Profile) -> Result<ResolvedReading> {
    let timestamp_utc = local_to_utc(spec.local_time, profile.tz_offset_min);
    let device_timestamp = timestamp_utc.naive_utc()
        - TimeDelta::minutes(i64::from(DEFAULT_DEVICE_UTC_OFFSET_MIN));
    let c = spec.composition;
    let reading = ScaleReading {
        user_id: profile.user_id,
        date: device_timestamp.date(),
        device_time: device_timestamp.time(),
        weight_dkg: spec.weight_dkg,
        body_fat_dpct: c.map_or(0, |c| c.fat_dpct),
        body_water_dpct: c.map_or(0, |c| c.water_dpct),
        muscle_dkg: c.map_or(0, |c| c.muscle_dkg),
        bone_dkg: c.map_or(0, |c| c.bone_dkg),
        visceral_rating: c.map_or(0, |c| c.visceral_rating),
        opaque: spec.opaque,
        gender: profile.gender,
        height_cm: profile.height_cm,
        age_years: profile.age_years,
    };
    Ok(ResolvedReading {
        spec: spec.clone(),
        timestamp_utc,
        device_timestamp,
        bmi: compute_bmi(spec.weight_dkg, profile.height_cm)?,
        record_bytes: encode_record(&reading)?,
        dump_offset: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScaleState {
    NotYetWritten,
    Live,
    Zeroed,
}

/// Walk the script and emit one snapshot per acquisition point.
pub fn generate_ecosystem(script: &GroundTruthScript, seed: u64) -> Result<Vec<EcosystemSnapshot>> {
    script.validate()?;
    let profile = &script.profile;

    // resolve every reading that will ever exist, in chronological order
    let mut resolved: Vec<ResolvedReading> = Vec::new();
    for spec in &script.readings {
        resolved.push(resolve_reading(spec, profile)?);
    }
    for m in &script.manipulations {
        if let Manipulation::NewReading(spec) = m {
            resolved.push(resolve_reading(spec, profile)?);
        }
    }

    // seed-stable dump placements; the dump size never changes between
    // snapshots (flash does not grow), unwritten slots stay erased
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cursor = 0usize;
    for r in &mut resolved {
        cursor += rng.random_range(MIN_GAP..=MAX_GAP);
        r.dump_offset = cursor;
        cursor += RECORD_LEN;
    }
    let dump_len = cursor + rng.random_range(MIN_GAP..=MAX_GAP);

    let initial = script.readings.len();
    let mut scale: Vec<ScaleState> = vec![ScaleState::NotYetWritten; resolved.len()];
    let mut cloud: Vec<bool> = vec![false; resolved.len()];
    for i in 0..initial {
        scale[i] = ScaleState::Live;
        cloud[i] = true;
    }
    let mut wipe_pending = false;
    let mut next_new = initial;

    let mut snapshots = Vec::new();
    let mut applied = 0usize;
    for acq in &script.acquisitions {
        while applied < acq.after_manipulations {
            match &script.manipulations[applied] {
                Manipulation::AppWipe => wipe_pending = true,
                Manipulation::ScaleUserDelete => {
                    for s in scale.iter_mut() {
                        if *s == ScaleState::Live {
                            *s = ScaleState::Zeroed;
                        }
                    }
                }
                Manipulation::NewReading(_) => {
                    scale[next_new] = ScaleState::Live;
                    cloud[next_new] = true;
                    next_new += 1;
                }
                Manipulation::ReadingDelete { reading } => cloud[*reading] = false,
            }
            applied += 1;
        }
        snapshots.push(emit_snapshot(
            &acq.label,
            &resolved,
            &scale,
            &cloud,
            wipe_pending,
            dump_len,
        ));
        // the wiped state is only ever observed once: the apps are
        // reinstalled and resync from the cloud after the acquisition
        wipe_pending = false;
    }
    Ok(snapshots)
}

fn emit_snapshot(
    label: &str,
    resolved: &[ResolvedReading],
    scale: &[ScaleState],
    cloud: &[bool],
    wipe_pending: bool,
    dump_len: usize,
) -> EcosystemSnapshot {
    let mut dump = vec![0xFFu8; dump_len];
    for (r, state) in resolved.iter().zip(scale) {
        let window = &mut dump[r.dump_offset..r.dump_offset + RECORD_LEN];
        match state {
            ScaleState::NotYetWritten => {}
            ScaleState::Live => window.copy_from_slice(&r.record_bytes),
            ScaleState::Zeroed => window.fill(0),
        }
    }

    let mut rows = Vec::new();
    let mut row_presence = Vec::new();
    for (i, r) in resolved.iter().enumerate() {
        let on_scale = scale[i] == ScaleState::Live;
        let in_cloud = cloud[i];
        let in_apps = in_cloud && !wipe_pending;
        if !(on_scale || in_cloud || in_apps) {
            continue;
        }
        let cell = |b: bool| if b { Presence::Present } else { Presence::Absent };
        rows.push(PresenceRow {
            cluster_id: format!("cluster-{}", rows.len() + 1),
            timestamp_utc: r.timestamp_utc,
            weight_kg: Deci::from_tenths(i32::from(r.spec.weight_dkg)),
            cells: vec![cell(on_scale), cell(in_apps), cell(in_apps), cell(in_cloud)],
        });
        row_presence.push((on_scale, in_apps, in_cloud));
    }
    let matrix = PresenceMatrix { columns: Source::ALL.to_vec(), rows };

    let any_zeroed = scale.contains(&ScaleState::Zeroed);
    let mut findings: Vec<ManipulationFinding> = Vec::new();
    for (row, &(on_scale, in_apps, in_cloud)) in matrix.rows.iter().zip(&row_presence) {
        let (rule, confidence) = match (on_scale, in_apps, in_cloud) {
            (true, true, true) => (RuleId::R4Consistent, Confidence::Corroborated),
            (true, false, true) => (RuleId::R1AppWipe, Confidence::Corroborated),
            (false, true, true) => (
                RuleId::R2ScaleUserDeleted,
                if any_zeroed { Confidence::Corroborated } else { Confidence::Uncorroborated },
            ),
            (true, false, false) => (RuleId::R3AppDeletedReading, Confidence::Corroborated),
            _ => (RuleId::R0Undetermined, Confidence::Uncorroborated),
        };
        match findings.iter_mut().find(|f| f.rule_id == rule && f.confidence == confidence) {
            Some(f) => f.affected_clusters.push(row.cluster_id.clone()),
            None => findings.push(ManipulationFinding {
                rule_id: rule,
                affected_clusters: vec![row.cluster_id.clone()],
                supporting_evidence: Vec::new(),
                confidence,
            }),
        }
    }

    let present_in_apps: Vec<ResolvedReading> = resolved
        .iter()
        .enumerate()
        .filter(|(i, _)| cloud[*i] && !wipe_pending)
        .map(|(_, r)| r.clone())
        .collect();
    let present_in_cloud: Vec<ResolvedReading> = resolved
        .iter()
        .enumerate()
        .filter(|(i, _)| cloud[*i])
        .map(|(_, r)| r.clone())
        .collect();

    EcosystemSnapshot {
        label: label.to_string(),
        scale_dump: dump,
        apps_wiped: wipe_pending,
        app_readings: present_in_apps,
        cloud_readings: present_in_cloud,
        expected_matrix: matrix,
        expected_findings: findings,
    }
}

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn dt(y: i32, m: u32, day: u32, h: u32, mi: u32, s: u32) -> NaiveDateTime {
    d(y, m, day).and_hms_opt(h, mi, s).unwrap()
}

/// The four observed days and four manipulations, with the Day-1 record
/// chosen so that its encoded bytes reproduce the reference dump extract
/// byte for byte. Day 3 was taken with shoes on: weight only, no
/// composition block.
pub fn canonical_paper_scenario() -> GroundTruthScript {
    let profile = Profile {
        user_id: 3_966_528,
        gender: Gender::Male,
        height_cm: 186,
        age_years: 35,
        tz_offset_min: 0,
        username: "jdoe@example.com".into(),
        name: "J. Doe".into(),
        birthday: d(1984, 2, 20),
        enrollment_weight_kg: Deci::from_tenths(896),
        country: "US".into(),
        location: "Omaha, NE".into(),
        password: "Sc@le2019!".into(),
        access_token: "tok-0badc0de00112233".into(),
        mac_address: "A0:B1:C2:D3:E4:F5".into(),
        device_name: "HS6".into(),
        device_type: "Wireless Scale".into(),
        firmware_version: "1.0.5".into(),
        hardware_version: "2.1".into(),
        model_number: "HS6-0001".into(),
        serial_number: "SN-7F3K9".into(),
    };
    let day = |date: NaiveDateTime, weight, comp, opaque, dci| ReadingSpec {
        local_time: date,
        weight_dkg: weight,
        composition: comp,
        opaque,
        dci,
    };
    let comp = |fat, water, muscle, bone, visceral| {
        Some(Composition {
            fat_dpct: fat,
            water_dpct: water,
            muscle_dkg: muscle,
            bone_dkg: bone,
            visceral_rating: visceral,
        })
    };
    let readings = vec![
        day(dt(2019, 5, 15, 16, 27, 36), 896, comp(244, 516, 646, 33, 8), [0x27, 0x0C, 0xD6], Some(2219)),
        day(dt(2019, 5, 16, 16, 55, 0), 889, comp(244, 518, 643, 33, 8), [0x27, 0x0C, 0xD7], Some(2205)),
        day(dt(2019, 5, 17, 18, 28, 0), 904, None, [0x27, 0x0C, 0xD8], None),
    ];
    let day4 = day(dt(2019, 5, 18, 15, 46, 0), 902, comp(228, 524, 650, 34, 7), [0x27, 0x0C, 0xD9], Some(2227));
    GroundTruthScript {
        profile,
        readings,
        manipulations: vec![
            Manipulation::AppWipe,
            Manipulation::ScaleUserDelete,
            Manipulation::NewReading(day4),
            Manipulation::ReadingDelete { reading: 3 },
        ],
        acquisitions: (1..=5)
            .map(|i| AcquisitionPoint {
                label: format!("result-set-{i}"),
                after_manipulations: i - 1,
            })
            .collect(),
    }
}

/// A random but always-valid script: one user, 1–5 readings, up to six
/// manipulations with an acquisition after each (plus one before any).
/// An app wipe is never scheduled after a scale-side user delete — that
/// ordering produces a presence pattern the rule table cannot name.
pub fn random_script(seed: u64) -> GroundTruthScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user_id = u32::from_le_bytes([rng.random(), rng.random_range(32..=255), rng.random(), 0]);
    let height_cm: u8 = rng.random_range(150..=200);
    let age_years: u8 = rng.random_range(18..=80);
    let gender = if rng.random_bool(0.5) { Gender::Male } else { Gender::Female };
    let tz_offset_min = rng.random_range(-24i32..=28) * 30;
    let year = rng.random_range(2015..=2034);
    let birthday = d(year - i32::from(age_years), rng.random_range(1..=12), rng.random_range(1..=28));

    let first = rng.random_range(0..NAMES.len());
    let profile = Profile {
        user_id,
        gender,
        height_cm,
        age_years,
        tz_offset_min,
        username: format!("{}{}@example.com", NAMES[first].to_lowercase(), rng.random_range(10..100)),
        name: format!("{} {}.", NAMES[first], SURNAME_INITIALS[rng.random_range(0..SURNAME_INITIALS.len())]),
        birthday,
        enrollment_weight_kg: Deci::from_tenths(rng.random_range(400..=1500)),
        country: "US".into(),
        location: format!("Unit {}", rng.random_range(1..100)),
        password: format!("pw-{:08x}", rng.random::<u32>()),
        access_token: format!("tok-{:016x}", rng.random::<u64>()),
        mac_address: random_mac(&mut rng),
        device_name: "HS6".into(),
        device_type: "Wireless Scale".into(),
        firmware_version: format!("1.0.{}", rng.random_range(0..10)),
        hardware_version: "2.1".into(),
        model_number: "HS6-0001".into(),
        serial_number: format!("SN-{:05X}", rng.random_range(0..0xFFFFFu32)),
    };

    let mut when = dt(year, rng.random_range(2..=10), rng.random_range(1..=28), 0, 0, 0)
        + TimeDelta::minutes(rng.random_range(6 * 60..21 * 60));
    let next_reading = |rng: &mut ChaCha8Rng, when: &mut NaiveDateTime| {
        let weight = rng.random_range(300..=1800);
        let composition = rng.random_bool(0.75).then(|| Composition {
            fat_dpct: rng.random_range(100..=450),
            water_dpct: rng.random_range(400..=700),
            muscle_dkg: rng.random_range(200..=900),
            bone_dkg: rng.random_range(15..=60),
            visceral_rating: rng.random_range(1..=30),
        });
        let spec = ReadingSpec {
            local_time: *when,
            weight_dkg: weight,
            composition,
            opaque: [rng.random(), rng.random(), rng.random()],
            dci: composition.map(|_| rng.random_range(1500..=2600)),
        };
        *when += TimeDelta::minutes(rng.random_range(11..=26 * 60));
        spec
    };

    let reading_count = rng.random_range(1..=5usize);
    let readings: Vec<ReadingSpec> =
        (0..reading_count).map(|_| next_reading(&mut rng, &mut when)).collect();

    let mut manipulations = Vec::new();
    let mut existing = reading_count;
    let mut deleted: Vec<usize> = Vec::new();
    let mut wipes_left = usize::from(rng.random_bool(0.6));
    let mut user_deletes_left = usize::from(rng.random_bool(0.6));
    let mut new_left = rng.random_range(0..=2usize);
    let mut delete_left = rng.random_range(0..=2usize);
    loop {
        // candidate moves this step; app wipe is only offered while no
        // user delete has been emitted yet (see doc comment)
        let mut moves: Vec<u8> = Vec::new();
        if wipes_left > 0 {
            moves.push(0);
        }
        if user_deletes_left > 0 {
            moves.push(1);
        }
        if new_left > 0 {
            moves.push(2);
        }
        if delete_left > 0 && deleted.len() < existing {
            moves.push(3);
        }
        if moves.is_empty() {
            break;
        }
        match moves[rng.random_range(0..moves.len())] {
            0 => {
                manipulations.push(Manipulation::AppWipe);
                wipes_left -= 1;
            }
            1 => {
                manipulations.push(Manipulation::ScaleUserDelete);
                user_deletes_left -= 1;
                wipes_left = 0;
            }
            2 => {
                manipulations.push(Manipulation::NewReading(next_reading(&mut rng, &mut when)));
                existing += 1;
                new_left -= 1;
            }
            _ => {
                let candidates: Vec<usize> =
                    (0..existing).filter(|i| !deleted.contains(i)).collect();
                let target = candidates[rng.random_range(0..candidates.len())];
                deleted.push(target);
                manipulations.push(Manipulation::ReadingDelete { reading: target });
                delete_left -= 1;
            }
        }
    }

    let acquisitions = (0..=manipulations.len())
        .map(|i| AcquisitionPoint { label: format!("snapshot-{}", i + 1), after_manipulations: i })
        .collect();
    GroundTruthScript { profile, readings, manipulations, acquisitions }
}

const NAMES: [&str; 8] = ["Avery", "Blake", "Casey", "Drew", "Emery", "Flynn", "Gray", "Harper"];
const SURNAME_INITIALS: [&str; 6] = ["B", "D", "K", "M", "R", "S"];

fn random_mac(rng: &mut ChaCha8Rng) -> String {
    let bytes: [u8; 6] = rng.random();
    bytes.map(|b| format!("{b:02X}")).join(":")
}

/// A reading drawn from the full storable domain — any user id, any valid
/// date in 2000..=2255, any metrics. For codec round-trip properties.
pub fn arbitrary_reading(rng: &mut ChaCha8Rng) -> ScaleReading {
    let year = rng.random_range(2000..=2255);
    let month = rng.random_range(1..=12u32);
    let day = rng.random_range(1..=28u32);
    ScaleReading {
        user_id: rng.random(),
        date: d(year, month, day),
        device_time: chrono::NaiveTime::from_hms_opt(
            rng.random_range(0..24),
            rng.random_range(0..60),
            rng.random_range(0..60),
        )
        .unwrap(),
        weight_dkg: rng.random(),
        body_fat_dpct: rng.random(),
        body_water_dpct: rng.random(),
        muscle_dkg: rng.random(),
        bone_dkg: rng.random(),
        visceral_rating: rng.random(),
        opaque: rng.random(),
        gender: Gender::from_byte(rng.random()),
        height_cm: rng.random(),
        age_years: rng.random(),
    }
}

/// A reading that satisfies every carve heuristic at maximum score and the
/// dump-layout recall constraints (24-bit id with byte 1 ≥ 32, year ≥ 2013).
pub fn plantable_reading(rng: &mut ChaCha8Rng) -> ScaleReading {
    let with_composition = rng.random_bool(0.8);
    ScaleReading {
        user_id: u32::from_le_bytes([rng.random(), rng.random_range(32..=255), rng.random(), 0]),
        date: d(rng.random_range(2013..=2039), rng.random_range(1..=12), rng.random_range(1..=28)),
        device_time: chrono::NaiveTime::from_hms_opt(
            rng.random_range(0..24),
            rng.random_range(0..60),
            rng.random_range(0..60),
        )
        .unwrap(),
        weight_dkg: rng.random_range(100..=2999),
        body_fat_dpct: if with_composition { rng.random_range(1..=750) } else { 0 },
        body_water_dpct: if with_composition { rng.random_range(1..=750) } else { 0 },
        muscle_dkg: if with_composition { rng.random_range(1..=2000) } else { 0 },
        bone_dkg: if with_composition { rng.random_range(1..=80) } else { 0 },
        visceral_rating: if with_composition { rng.random_range(1..=59) } else { 0 },
        opaque: rng.random(),
        gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
        height_cm: rng.random_range(50..=250),
        age_years: rng.random_range(1..=120),
    }
}

/// Encode `readings` into an erased-flash image at seeded offsets.
/// Returns the image and the record offsets, in order.
pub fn plant_records(readings: &[ScaleReading], seed: u64) -> Result<(Vec<u8>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = Vec::new();
    let mut offsets = Vec::new();
    for r in readings {
        bytes.resize(bytes.len() + rng.random_range(MIN_GAP..=MAX_GAP), 0xFF);
        offsets.push(bytes.len());
        bytes.extend_from_slice(&encode_record(r)?);
    }
    bytes.resize(bytes.len() + rng.random_range(MIN_GAP..=MAX_GAP), 0xFF);
    Ok((bytes, offsets))
}

/// Like [`plant_records`], but fills the gaps with random bytes instead of
/// erased flash. Random filler can spell out decodable ghost windows, so
/// after placement the gaps are scrubbed until a carve restricted to the
/// planted user ids returns exactly the planted records.
pub fn plant_records_with_noise(
    readings: &[ScaleReading],
    seed: u64,
) -> Result<(Vec<u8>, Vec<usize>)> {
    use crate::carve::{carve, CarveConfig, DumpImage};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = Vec::new();
    let mut offsets = Vec::new();
    let gap = |bytes: &mut Vec<u8>, rng: &mut ChaCha8Rng| {
        let len = rng.random_range(MIN_GAP..=MAX_GAP);
        let start = bytes.len();
        bytes.resize(start + len, 0);
        rng.fill_bytes(&mut bytes[start..]);
    };
    for r in readings {
        gap(&mut bytes, &mut rng);
        offsets.push(bytes.len());
        bytes.extend_from_slice(&encode_record(r)?);
    }
    gap(&mut bytes, &mut rng);

    let cfg = CarveConfig {
        user_id_allowlist: Some(readings.iter().map(|r| r.user_id).collect()),
        ..CarveConfig::default()
    };
    for _ in 0..32 {
        let dump = DumpImage::from_bytes(bytes.clone(), "noise fixture");
        let hits = carve(&dump, &cfg);
        let ghost_offsets: Vec<usize> = hits
            .iter()
            .map(|h| h.offset)
            .filter(|o| !offsets.contains(o))
            .collect();
        if ghost_offsets.is_empty() && hits.len() == readings.len() {
            return Ok((bytes, offsets));
        }
        for o in ghost_offsets {
            // spoil the ghost's month byte; it is always in a gap
            bytes[o + 5] = 0xFF;
        }
    }
    Err(Error::InvalidInput(
        "noise scrubbing did not converge in 32 passes".into(),
    ))
}

pub(crate) fn tz_string(profile: &Profile) -> String {
    format_tz_offset_min(profile.tz_offset_min)
}
