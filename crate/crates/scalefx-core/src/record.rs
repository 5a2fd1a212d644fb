//! Bit-exact decode/encode of the scale's 26-byte in-memory reading record.
//!
//! Layout (offsets within the record):
//!
//! ```text
//! 0..4    user id, little-endian u32
//! 4..7    date: year-2000, month, day (one byte each)
//! 7..10   time: hour, minute, second (one byte each, stored order)
//! 10..12  weight, little-endian u16, 0.1 kg units
//! 12..14  body fat, little-endian u16, 0.1 % units
//! 14..16  body water, little-endian u16, 0.1 % units
//! 16..18  muscle, little-endian u16, 0.1 kg units
//! 18      bone, u8, 0.1 kg units
//! 19      visceral fat rating, u8
//! 20..23  opaque, preserved verbatim, meaning unknown
//! 23      gender (1 = male, 0 = female, other values unknown)
//! 24      height, cm
//! 25      age, years
//! ```
//!
//! A metric stored as zero means "not recorded" (the scale writes `0000` for
//! the whole composition block when the user steps on with shoes); decode
//! keeps the raw zeros, and [`to_normalized`] maps them to absent fields.

use crate::error::{Error, RejectReason, Result};
use crate::model::{NormalizedReading, Source};
use crate::units::Deci;
use chrono::{Datelike, NaiveDate, NaiveTime, TimeDelta, Timelike};
use serde::{Deserialize, Serialize, Serializer};

pub const RECORD_LEN: usize = 26;

/// Minutes added to a stored device timestamp to reach UTC. The scale's
/// clock runs three hours behind the wall clock it was observed against.
pub const DEFAULT_DEVICE_UTC_OFFSET_MIN: i32 = 180;

/// A 26-byte window at a known offset of a source dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawRecord {
    bytes: [u8; RECORD_LEN],
    offset: usize,
}

impl RawRecord {
    pub fn new(bytes: &[u8], offset: usize) -> Result<Self> {
        let bytes: [u8; RECORD_LEN] = bytes
            .try_into()
            .map_err(|_| Error::MalformedRecord { expected: RECORD_LEN, got: bytes.len() })?;
        Ok(RawRecord { bytes, offset })
    }

    pub fn from_array(bytes: [u8; RECORD_LEN], offset: usize) -> Self {
        RawRecord { bytes, offset }
    }

    pub fn bytes(&self) -> &[u8; RECORD_LEN] {
        &self.bytes
    }

    pub fn offset(&self) -> usize {
        self.offset
    }
}

/// Gender byte as stored by the scale. Values other than 0/1 are preserved
/// so that decode/encode round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Female,
    Male,
    Other(u8),
}

impl Gender {
    pub fn from_byte(b: u8) -> Gender {
        match b {
            0 => Gender::Female,
            1 => Gender::Male,
            other => Gender::Other(other),
        }
    }

    pub fn byte(self) -> u8 {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
            Gender::Other(b) => b,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other(_) => "unknown",
        }
    }
}

impl std::fmt::Display for Gender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Gender {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Gender {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        match raw.as_str() {
            "female" => Ok(Gender::Female),
            "male" => Ok(Gender::Male),
            "unknown" => Ok(Gender::Other(0xFF)),
            other => Err(serde::de::Error::custom(format!("unknown gender {other:?}"))),
        }
    }
}

/// One decoded scale record. Metric fields keep the raw fixed-point integers
/// (zero = not recorded); use [`ScaleReading::view`] or [`to_normalized`] for
/// interpreted values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleReading {
    pub user_id: u32,
    pub date: NaiveDate,
    pub device_time: NaiveTime,
    pub weight_dkg: u16,
    pub body_fat_dpct: u16,
    pub body_water_dpct: u16,
    pub muscle_dkg: u16,
    pub bone_dkg: u8,
    pub visceral_rating: u8,
    pub opaque: [u8; 3],
    pub gender: Gender,
    pub height_cm: u8,
    pub age_years: u8,
}

fn nonzero_deci(raw: u16) -> Option<Deci> {
    (raw != 0).then(|| Deci::from_tenths(i32::from(raw)))
}

impl ScaleReading {
    pub fn weight_kg(&self) -> Option<Deci> {
        nonzero_deci(self.weight_dkg)
    }

    pub fn body_fat_pct(&self) -> Option<Deci> {
        nonzero_deci(self.body_fat_dpct)
    }

    pub fn body_water_pct(&self) -> Option<Deci> {
        nonzero_deci(self.body_water_dpct)
    }

    pub fn muscle_kg(&self) -> Option<Deci> {
        nonzero_deci(self.muscle_dkg)
    }

    pub fn bone_kg(&self) -> Option<Deci> {
        nonzero_deci(u16::from(self.bone_dkg))
    }

    pub fn visceral(&self) -> Option<u8> {
        (self.visceral_rating != 0).then_some(self.visceral_rating)
    }

    pub fn bmi(&self) -> Option<Deci> {
        if self.weight_dkg > 0 && self.height_cm > 0 {
            compute_bmi(self.weight_dkg, self.height_cm).ok()
        } else {
            None
        }
    }

    /// Investigator-facing presentation with interpreted units.
    pub fn view(&self) -> RecordView {
        RecordView {
            user_id: self.user_id,
            date: self.date,
            device_time: self.device_time,
            weight_kg: self.weight_kg(),
            bmi: self.bmi(),
            body_fat_pct: self.body_fat_pct(),
            body_water_pct: self.body_water_pct(),
            muscle_kg: self.muscle_kg(),
            bone_kg: self.bone_kg(),
            visceral_rating: self.visceral(),
            opaque_hex: hex::encode(self.opaque),
            gender: self.gender,
            height_cm: self.height_cm,
            age_years: self.age_years,
        }
    }
}

impl Serialize for ScaleReading {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.view().serialize(s)
    }
}

/// Serialization form of a decoded record: interpreted units, absent fields
/// omitted, opaque bytes surfaced as hex without interpretation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordView {
    pub user_id: u32,
    pub date: NaiveDate,
    pub device_time: NaiveTime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_kg: Option<Deci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bmi: Option<Deci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body_fat_pct: Option<Deci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body_water_pct: Option<Deci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub muscle_kg: Option<Deci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bone_kg: Option<Deci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visceral_rating: Option<u8>,
    pub opaque_hex: String,
    pub gender: Gender,
    pub height_cm: u8,
    pub age_years: u8,
}

#[inline]
fn le16(lo: u8, hi: u8) -> u16 {
    u16::from_le_bytes([lo, hi])
}

/// Decode a 26-byte window. Invalid stored date/time returns
/// [`Error::DecodeRejected`]; the carver uses this as a validity signal.
pub fn decode_bytes(bytes: &[u8]) -> Result<ScaleReading> {
    let b: &[u8; RECORD_LEN] = bytes
        .try_into()
        .map_err(|_| Error::MalformedRecord { expected: RECORD_LEN, got: bytes.len() })?;

    let (yy, mo, dd) = (b[4], b[5], b[6]);
    let date = NaiveDate::from_ymd_opt(2000 + i32::from(yy), u32::from(mo), u32::from(dd))
        .ok_or(Error::DecodeRejected(RejectReason::InvalidDate { yy, mm: mo, dd }))?;

    let (hh, mi, ss) = (b[7], b[8], b[9]);
    let device_time = NaiveTime::from_hms_opt(u32::from(hh), u32::from(mi), u32::from(ss))
        .ok_or(Error::DecodeRejected(RejectReason::InvalidTime { hh, mm: mi, ss }))?;

    Ok(ScaleReading {
        user_id: u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
        date,
        device_time,
        weight_dkg: le16(b[10], b[11]),
        body_fat_dpct: le16(b[12], b[13]),
        body_water_dpct: le16(b[14], b[15]),
        muscle_dkg: le16(b[16], b[17]),
        bone_dkg: b[18],
        visceral_rating: b[19],
        opaque: [b[20], b[21], b[22]],
        gender: Gender::from_byte(b[23]),
        height_cm: b[24],
        age_years: b[25],
    })
}

pub fn decode_record(raw: &RawRecord) -> Result<ScaleReading> {
    decode_bytes(raw.bytes())
}

/// Inverse of [`decode_bytes`]: produces the exact 26-byte wire form.
pub fn encode_record(reading: &ScaleReading) -> Result<[u8; RECORD_LEN]> {
    let year = reading.date.year();
    if !(2000..=2255).contains(&year) {
        return Err(Error::FieldOutOfRange {
            field: "date",
            detail: format!("year {year} not storable as a single byte offset from 2000"),
        });
    }
    let mut b = [0u8; RECORD_LEN];
    b[0..4].copy_from_slice(&reading.user_id.to_le_bytes());
    b[4] = (year - 2000) as u8;
    b[5] = reading.date.month() as u8;
    b[6] = reading.date.day() as u8;
    b[7] = reading.device_time.hour() as u8;
    b[8] = reading.device_time.minute() as u8;
    b[9] = reading.device_time.second() as u8;
    b[10..12].copy_from_slice(&reading.weight_dkg.to_le_bytes());
    b[12..14].copy_from_slice(&reading.body_fat_dpct.to_le_bytes());
    b[14..16].copy_from_slice(&reading.body_water_dpct.to_le_bytes());
    b[16..18].copy_from_slice(&reading.muscle_dkg.to_le_bytes());
    b[18] = reading.bone_dkg;
    b[19] = reading.visceral_rating;
    b[20..23].copy_from_slice(&reading.opaque);
    b[23] = reading.gender.byte();
    b[24] = reading.height_cm;
    b[25] = reading.age_years;
    Ok(b)
}

/// BMI = weight / height², rounded half-up to one fractional digit.
///
/// Computed entirely in integers: with weight in 0.1 kg and height in cm,
/// BMI in tenths is (2·10000·weight_dkg + height²) / (2·height²) truncated,
/// which is exactly round-half-up of 10000·weight_dkg / height².
pub fn compute_bmi(weight_dkg: u16, height_cm: u8) -> Result<Deci> {
    if height_cm == 0 {
        return Err(Error::FieldOutOfRange {
            field: "height_cm",
            detail: "height is zero; BMI undefined".into(),
        });
    }
    if weight_dkg == 0 {
        return Err(Error::FieldOutOfRange {
            field: "weight_dkg",
            detail: "weight is zero; BMI undefined".into(),
        });
    }
    let w = u64::from(weight_dkg);
    let h2 = u64::from(height_cm) * u64::from(height_cm);
    let tenths = (2 * 10_000 * w + h2) / (2 * h2);
    Ok(Deci::from_tenths(tenths as i32))
}

/// Lift a decoded record into the source-independent representation.
///
/// The scale's clock lags the real time; `device_utc_offset_min` is *added*
/// to the stored timestamp to obtain UTC (default +180 at the CLI level, per
/// the observed three-hour lag). Zero-valued metrics become absent fields.
pub fn to_normalized(
    reading: &ScaleReading,
    device_utc_offset_min: i32,
    source_ref: impl Into<String>,
) -> Result<NormalizedReading> {
    let weight_kg = reading.weight_kg().ok_or(Error::FieldOutOfRange {
        field: "weight_dkg",
        detail: "record has no weight; not a measurement".into(),
    })?;
    let naive = reading.date.and_time(reading.device_time);
    let timestamp_utc = naive
        .checked_add_signed(TimeDelta::minutes(i64::from(device_utc_offset_min)))
        .ok_or(Error::FieldOutOfRange {
            field: "device_utc_offset_min",
            detail: format!("offset {device_utc_offset_min} overflows the timestamp"),
        })?
        .and_utc();
    Ok(NormalizedReading {
        source: Source::Scale,
        source_ref: source_ref.into(),
        user_id: Some(reading.user_id),
        timestamp_utc,
        weight_kg,
        bmi: reading.bmi(),
        body_fat_pct: reading.body_fat_pct(),
        body_water_pct: reading.body_water_pct(),
        muscle_kg: reading.muscle_kg(),
        bone_kg: reading.bone_kg(),
        visceral_rating: reading.visceral(),
        calories: None,
        environment: None,
    })
}
