//! Parse Android, iOS, and cloud evidence exports into [`EvidenceSet`]s.
//!
//! Each source has a native form (SQLite database + XML preferences for
//! Android, SQLite database for iOS, CSV export + profile document for the
//! cloud portal, raw dump for the scale) and every source can also arrive as
//! the canonical JSON interchange document. Native and interchange ingestion
//! of the same evidence yield identical sets.
//!
//! Parsing is tolerant at the row level — a bad row becomes a warning and
//! ingestion proceeds — but strict at the schema level, because a schema
//! that doesn't match expectations means the tool's assumptions about the
//! artifact may be wrong and silence would be misleading.

mod android;
mod cloud;
pub mod interchange;
mod ios;
mod prefs_xml;
mod scale;

pub use android::{ingest_android, ANDROID_DB_NAME};
pub use cloud::ingest_cloud;
pub use ios::{ingest_ios, IOS_DB_NAME};
pub use scale::ingest_scale;

use crate::error::{Error, Result};
use crate::model::{EvidenceSet, Source};
use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use std::path::Path;

/// Knobs shared by the ingest operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    /// Signed minutes *added* to a scale record's stored timestamp to reach
    /// UTC. The scale's clock runs behind; +180 matches the observed lag.
    pub device_utc_offset_min: i32,
    /// Timezone offset assumed for app/cloud local timestamps when the
    /// artifact declares none. This is a property of where the *user* was,
    /// not of the device clock, so it defaults to 0 rather than sharing the
    /// device offset.
    pub default_tz_offset_min: i32,
    /// Window for attaching environment rows to readings, seconds.
    pub match_window_s: i64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            device_utc_offset_min: crate::record::DEFAULT_DEVICE_UTC_OFFSET_MIN,
            default_tz_offset_min: 0,
            match_window_s: crate::correlate::DEFAULT_MATCH_WINDOW_S,
        }
    }
}

/// An ingested set plus any row-level diagnostics produced along the way.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub set: EvidenceSet,
    pub warnings: Vec<String>,
}

impl Ingested {
    pub fn clean(set: EvidenceSet) -> Self {
        Ingested { set, warnings: Vec::new() }
    }
}

/// Dispatch on the declared source kind. For `scale` the path must be a raw
/// dump file; it is carved with default bounds first.
pub fn ingest(source: Source, path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    match source {
        Source::Android => ingest_android(path, opts),
        Source::Ios => ingest_ios(path, opts),
        Source::Cloud => ingest_cloud(path, opts),
        Source::Scale => {
            let dump = crate::carve::DumpImage::load(path)?;
            let hits = crate::carve::carve(&dump, &crate::carve::CarveConfig::default());
            Ok(ingest_scale(&hits, opts.device_utc_offset_min, dump.source_label()))
        }
    }
}

/// Accept `2019-05-15 16:27:36` and `2019-05-15T16:27:36`.
pub(crate) fn parse_local_ts(raw: &str) -> Result<NaiveDateTime> {
    let normalized = raw.trim().replacen(' ', "T", 1);
    NaiveDateTime::parse_from_str(&normalized, "%Y-%m-%dT%H:%M:%S")
        .map_err(|e| Error::InvalidInput(format!("bad local timestamp {raw:?}: {e}")))
}

/// Convert a declared-local timestamp to UTC: local = UTC + offset.
pub(crate) fn local_to_utc(local: NaiveDateTime, tz_offset_min: i32) -> DateTime<Utc> {
    (local - TimeDelta::minutes(i64::from(tz_offset_min))).and_utc()
}

/// Interchange documents are routed by extension; everything else goes to
/// the native parser.
pub(crate) fn looks_like_interchange(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub(crate) fn read_interchange_as(path: &Path, expected: Source) -> Result<Ingested> {
    let set = interchange::read_set(path)?;
    if set.source != expected {
        return Err(Error::SchemaMismatch {
            context: path.display().to_string(),
            detail: format!(
                "interchange document declares source {:?}, but {:?} was requested",
                set.source.as_str(),
                expected.as_str()
            ),
        });
    }
    Ok(Ingested::clean(set))
}

pub(crate) fn file_name_of(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub(crate) const SQLITE_MAGIC: &[u8; 16] = b"SQLite format 3\0";

pub(crate) fn has_sqlite_magic(path: &Path) -> bool {
    let mut magic = [0u8; 16];
    std::fs::File::open(path)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut magic))
        .is_ok()
        && &magic == SQLITE_MAGIC
}

pub(crate) fn open_readonly(path: &Path) -> Result<rusqlite::Connection> {
    use rusqlite::OpenFlags;
    let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX;
    Ok(rusqlite::Connection::open_with_flags(path, flags)?)
}

pub(crate) fn existing_tables(conn: &rusqlite::Connection) -> Result<std::collections::BTreeSet<String>> {
    let mut stmt = conn.prepare("SELECT name FROM sqlite_master WHERE type = 'table'")?;
    let names = stmt
        .query_map([], |row| row.get::<_, String>(0))?
        .collect::<rusqlite::Result<_>>()?;
    Ok(names)
}

/// A failed SELECT against a table we verified exists means the columns are
/// not what this tool understands.
pub(crate) fn schema_mismatch(table: &str, err: rusqlite::Error) -> Error {
    Error::SchemaMismatch { context: table.to_string(), detail: err.to_string() }
}

/// Walk an extraction tree for the app database and preference files.
/// Returns (database path if any, XML paths sorted by file name).
pub(crate) fn locate_artifacts(
    path: &Path,
    preferred_db_name: &str,
) -> Result<(Option<std::path::PathBuf>, Vec<std::path::PathBuf>)> {
    if path.is_file() {
        if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("xml"))
        {
            return Ok((None, vec![path.to_path_buf()]));
        }
        return Ok((Some(path.to_path_buf()), Vec::new()));
    }
    let mut dbs = Vec::new();
    let mut xmls = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::InvalidInput(format!("cannot walk {}: {e}", path.display())))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let p = entry.path();
        match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("xml") => xmls.push(p.to_path_buf()),
            Some("db") | Some("sqlite") | Some("sqlite3") => dbs.push(p.to_path_buf()),
            _ => {
                if has_sqlite_magic(p) {
                    dbs.push(p.to_path_buf());
                }
            }
        }
    }
    dbs.sort_by_key(|p| {
        // the canonical database name sorts first, everything else after
        (file_name_of(p) != preferred_db_name, p.clone())
    });
    xmls.sort();
    Ok((dbs.into_iter().next(), xmls))
}

/// The identity invariant check shared by account parsers: an account with
/// neither user id nor username can't anchor anything.
pub(crate) fn warn_unidentified(
    account: &crate::model::UserAccount,
    context: &str,
    warnings: &mut Vec<String>,
) -> bool {
    if account.is_identified() {
        true
    } else {
        warnings.push(format!("{context}: account has neither user id nor username; skipped"));
        false
    }
}
