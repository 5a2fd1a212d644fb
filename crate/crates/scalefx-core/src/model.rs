//! Source-independent domain model.
//!
//! Everything that crosses a module boundary — readings, accounts, devices,
//! credentials — lives here in normalized form so the correlator never has
//! to know which parser produced a value.

use crate::units::Deci;
use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

/// One of the four ecosystem components holding residual data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Scale,
    Android,
    Ios,
    Cloud,
}

impl Source {
    /// Fixed column order used by the presence matrix and for tie-breaking.
    pub const ALL: [Source; 4] = [Source::Scale, Source::Android, Source::Ios, Source::Cloud];

    pub fn rank(self) -> u8 {
        match self {
            Source::Scale => 0,
            Source::Android => 1,
            Source::Ios => 2,
            Source::Cloud => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Scale => "scale",
            Source::Android => "android",
            Source::Ios => "ios",
            Source::Cloud => "cloud",
        }
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Source {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "scale" => Ok(Source::Scale),
            "android" => Ok(Source::Android),
            "ios" => Ok(Source::Ios),
            "cloud" => Ok(Source::Cloud),
            other => Err(crate::Error::InvalidInput(format!(
                "unknown source {other:?} (expected scale, android, ios, or cloud)"
            ))),
        }
    }
}

/// Timestamp (de)serialization: ISO-8601 UTC, seconds precision, explicit `Z`.
///
/// Chrono's default formatting varies precision with the value; reports must
/// be byte-identical across runs, so the format is pinned here.
pub mod ts {
    use chrono::{DateTime, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn to_string(ts: &DateTime<Utc>) -> String {
        ts.format(FORMAT).to_string()
    }

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// Parse a declared timezone like `+03:00` or `-05:30` into signed minutes.
pub fn parse_tz_offset_min(s: &str) -> crate::Result<i32> {
    let bad = || crate::Error::InvalidInput(format!("invalid timezone offset {s:?} (want ±HH:MM)"));
    let bytes = s.as_bytes();
    if bytes.len() != 6 || bytes[3] != b':' {
        return Err(bad());
    }
    let sign = match bytes[0] {
        b'+' => 1,
        b'-' => -1,
        _ => return Err(bad()),
    };
    let hh: i32 = s[1..3].parse().map_err(|_| bad())?;
    let mm: i32 = s[4..6].parse().map_err(|_| bad())?;
    if hh > 14 || mm > 59 {
        return Err(bad());
    }
    Ok(sign * (hh * 60 + mm))
}

pub fn format_tz_offset_min(minutes: i32) -> String {
    let sign = if minutes < 0 { '-' } else { '+' };
    let abs = minutes.unsigned_abs();
    format!("{sign}{:02}:{:02}", abs / 60, abs % 60)
}

/// True when `mac` is six colon-separated hex octets, e.g. `A0:B1:C2:D3:E4:F5`.
pub fn is_valid_mac(mac: &str) -> bool {
    let parts: Vec<&str> = mac.split(':').collect();
    parts.len() == 6
        && parts
            .iter()
            .all(|p| p.len() == 2 && p.bytes().all(|b| b.is_ascii_hexdigit()))
}

/// Temperature/humidity context attached to a reading when an environment
/// row's timestamp falls within the matching window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentAnnotation {
    pub temperature_c: Deci,
    pub humidity_pct: Deci,
    pub source_ref: String,
}

/// A temperature/humidity row that matched no reading; retained so nothing
/// recovered from the artifact is silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSample {
    #[serde(with = "ts")]
    pub timestamp_utc: DateTime<Utc>,
    pub temperature_c: Deci,
    pub humidity_pct: Deci,
    pub source_ref: String,
}

/// A source-independent representation of one scale measurement.
///
/// Optional fields are absent — never zero — when the source did not record
/// them: the scale stores 0 for "not recorded" and the cloud portal exposes
/// only weight and BMI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedReading {
    pub source: Source,
    /// Free-text locator: dump offset, table row id, or export row number.
    pub source_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<u32>,
    #[serde(with = "ts")]
    pub timestamp_utc: DateTime<Utc>,
    pub weight_kg: Deci,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmi: Option<Deci>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_fat_pct: Option<Deci>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_water_pct: Option<Deci>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muscle_kg: Option<Deci>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bone_kg: Option<Deci>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visceral_rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calories: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentAnnotation>,
}

/// Account metadata recovered from an app database or the cloud profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAccount {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<u32>,
    /// Login identity; the ecosystem uses the e-mail address.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birthday: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<crate::record::Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cm: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_kg: Option<Deci>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timezone: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl UserAccount {
    /// At least one of user_id, username must be present for the account to
    /// be usable as an identity anchor.
    pub fn is_identified(&self) -> bool {
        self.user_id.is_some() || self.username.is_some()
    }
}

/// A paired or logged accessory (the scale itself, from the app's viewpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub device_name: String,
    pub device_identifier: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac_address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub firmware_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_number: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial_number: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredentialKind {
    PasswordHash,
    PlaintextPassword,
    AccessToken,
}

impl CredentialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CredentialKind::PasswordHash => "password_hash",
            CredentialKind::PlaintextPassword => "plaintext_password",
            CredentialKind::AccessToken => "access_token",
        }
    }
}

/// A recovered authentication artifact. Reported in its own section, never
/// mixed into the readings timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredentialArtifact {
    pub kind: CredentialKind,
    pub value: String,
    /// Free-text locator of where the value was found.
    pub origin: String,
}

/// Normalized readings plus account/device artifacts from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub source: Source,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub acquisition_label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub readings: Vec<NormalizedReading>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accounts: Vec<UserAccount>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub devices: Vec<DeviceInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub credentials: Vec<CredentialArtifact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub environment: Vec<EnvironmentSample>,
}

impl EvidenceSet {
    pub fn empty(source: Source, acquisition_label: impl Into<String>) -> Self {
        EvidenceSet {
            source,
            acquisition_label: acquisition_label.into(),
            readings: Vec::new(),
            accounts: Vec::new(),
            devices: Vec::new(),
            credentials: Vec::new(),
            environment: Vec::new(),
        }
    }

    /// Equality on evidence content, ignoring the acquisition label (which
    /// records *where the set came from*, not *what it contains*).
    pub fn content_eq(&self, other: &EvidenceSet) -> bool {
        self.source == other.source
            && self.readings == other.readings
            && self.accounts == other.accounts
            && self.devices == other.devices
            && self.credentials == other.credentials
            && self.environment == other.environment
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn source_order_matches_matrix_columns() {
        let ranks: Vec<u8> = Source::ALL.iter().map(|s| s.rank()).collect();
        assert_eq!(ranks, vec![0, 1, 2, 3]);
        assert_eq!(Source::Android.to_string(), "android");
        assert_eq!("cloud".parse::<Source>().unwrap(), Source::Cloud);
        assert!("portal".parse::<Source>().is_err());
    }

    #[test]
    fn timestamps_serialize_with_explicit_z() {
        let t = Utc.with_ymd_and_hms(2019, 5, 15, 16, 27, 36).unwrap();
        assert_eq!(ts::to_string(&t), "2019-05-15T16:27:36Z");
    }

    #[test]
    fn tz_offsets_parse_and_format() {
        assert_eq!(parse_tz_offset_min("+00:00").unwrap(), 0);
        assert_eq!(parse_tz_offset_min("+03:00").unwrap(), 180);
        assert_eq!(parse_tz_offset_min("-05:30").unwrap(), -330);
        assert!(parse_tz_offset_min("03:00").is_err());
        assert!(parse_tz_offset_min("+3:00").is_err());
        assert!(parse_tz_offset_min("+25:00").is_err());
        assert_eq!(format_tz_offset_min(180), "+03:00");
        assert_eq!(format_tz_offset_min(-330), "-05:30");
        assert_eq!(format_tz_offset_min(0), "+00:00");
    }

    #[test]
    fn mac_validation() {
        assert!(is_valid_mac("A0:B1:C2:D3:E4:F5"));
        assert!(is_valid_mac("00:11:22:aa:bb:cc"));
        assert!(!is_valid_mac("A0:B1:C2:D3:E4"));
        assert!(!is_valid_mac("A0-B1-C2-D3-E4-F5"));
        assert!(!is_valid_mac("A0:B1:C2:D3:E4:ZZ"));
        assert!(!is_valid_mac("A0:B1:C2:D3:E4:F5:66"));
    }

    #[test]
    fn absent_fields_are_omitted_from_json() {
        let r = NormalizedReading {
            source: Source::Cloud,
            source_ref: "row 2".into(),
            user_id: None,
            timestamp_utc: Utc.with_ymd_and_hms(2019, 5, 15, 16, 27, 36).unwrap(),
            weight_kg: Deci::from_tenths(896),
            bmi: Some(Deci::from_tenths(259)),
            body_fat_pct: None,
            body_water_pct: None,
            muscle_kg: None,
            bone_kg: None,
            visceral_rating: None,
            calories: None,
            environment: None,
        };
        let j = serde_json::to_value(&r).unwrap();
        assert_eq!(j["weight_kg"], serde_json::json!(89.6));
        assert_eq!(j["timestamp_utc"], serde_json::json!("2019-05-15T16:27:36Z"));
        let obj = j.as_object().unwrap();
        assert!(!obj.contains_key("body_fat_pct"));
        assert!(!obj.contains_key("user_id"));
        let back: NormalizedReading = serde_json::from_value(j).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn evidence_set_content_eq_ignores_label() {
        let mut a = EvidenceSet::empty(Source::Android, "snapshot-1/android");
        let b = EvidenceSet::empty(Source::Android, "android.json");
        assert!(a.content_eq(&b));
        a.credentials.push(CredentialArtifact {
            kind: CredentialKind::AccessToken,
            value: "tok".into(),
            origin: "prefs".into(),
        });
        assert!(!a.content_eq(&b));
    }
}
