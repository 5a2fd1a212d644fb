//! Canonical JSON interchange: one document per source with top-level keys
//! `source`, `readings[]`, `accounts[]`, `devices[]`, `credentials[]` (and
//! `environment[]` for unattached temperature/humidity rows). Absent
//! sections are omitted entirely.

use crate::error::{Error, Result};
use crate::model::EvidenceSet;
use std::path::Path;

/// Serialize a set as an interchange document. The acquisition label is a
/// property of how *this* copy was obtained, not of the evidence, so it is
/// not written.
pub fn to_json_string(set: &EvidenceSet) -> Result<String> {
    let mut portable = set.clone();
    portable.acquisition_label = String::new();
    let mut out = serde_json::to_string_pretty(&portable)?;
    out.push('\n');
    Ok(out)
}

pub fn write_set(set: &EvidenceSet, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(set)?)?;
    Ok(())
}

/// Read an interchange document. The acquisition label is set to the file
/// path; every reading must carry the document's declared source.
pub fn read_set(path: &Path) -> Result<EvidenceSet> {
    let raw = std::fs::read_to_string(path)?;
    let mut set: EvidenceSet = serde_json::from_str(&raw)?;
    for r in &set.readings {
        if r.source != set.source {
            return Err(Error::SchemaMismatch {
                context: path.display().to_string(),
                detail: format!(
                    "reading {:?} carries source {:?} inside a {:?} document",
                    r.source_ref,
                    r.source.as_str(),
                    set.source.as_str()
                ),
            });
        }
    }
    set.acquisition_label = path.display().to_string();
    Ok(set)
}
