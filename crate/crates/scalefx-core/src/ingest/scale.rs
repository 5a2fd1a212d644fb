//! Bridge from carve hits to an [`EvidenceSet`].

use super::Ingested;
use crate::carve::CarveHit;
use crate::model::{EvidenceSet, Source};
use crate::record;

/// Normalize every carved record. Hits with a zero weight field are profile
/// blocks or stray matches rather than measurements; they are skipped with a
/// warning instead of polluting the reading timeline.
pub fn ingest_scale(
    hits: &[CarveHit],
    device_utc_offset_min: i32,
    acquisition_label: impl Into<String>,
) -> Ingested {
    let mut set = EvidenceSet::empty(Source::Scale, acquisition_label);
    let mut warnings = Vec::new();
    for hit in hits {
        let source_ref = format!("dump offset {}", hit.offset);
        match record::to_normalized(&hit.reading, device_utc_offset_min, &source_ref) {
            Ok(reading) => set.readings.push(reading),
            Err(e) => warnings.push(format!("{source_ref}: {e}; hit skipped")),
        }
    }
    Ingested { set, warnings }
}
