//! Locate reading records, zero-overwritten regions, and inter-dump
//! differences within raw flash-dump images.
//!
//! Record alignment in flash is unknown, so the scan walks every byte offset
//! (stride 1) and validates each 26-byte window. Validation is split into
//! mandatory heuristics — failing any disqualifies the window — and scored
//! plausibility heuristics that only affect `validity_score`: a forensic
//! tool must not silently discard candidate evidence, so implausible-but-
//! well-formed windows are reported with a low score rather than dropped.

use crate::error::{Error, Result};
use crate::record::{self, ScaleReading, RECORD_LEN};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

/// Hex-encoded SHA-256, the digest used everywhere provenance is recorded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An immutable raw flash-dump byte buffer with provenance metadata.
#[derive(Debug, Clone)]
pub struct DumpImage {
    bytes: Vec<u8>,
    source_label: String,
    content_hash: String,
}

impl DumpImage {
    pub fn from_bytes(bytes: Vec<u8>, source_label: impl Into<String>) -> Self {
        let content_hash = sha256_hex(&bytes);
        DumpImage { bytes, source_label: source_label.into(), content_hash }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        Ok(Self::from_bytes(bytes, path.display().to_string()))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    /// SHA-256 of the buffer, computed at load and never recomputed — the
    /// buffer is immutable.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }
}

/// Scan parameters and plausibility bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarveConfig {
    /// Scan step in bytes. 1 trades scan cost for recall.
    pub stride: usize,
    /// Scored heuristic: decoded year within this inclusive range.
    pub year_range: (i32, i32),
    /// Mandatory: weight within this inclusive range (0.1 kg units) or zero.
    pub weight_range_dkg: (u16, u16),
    /// Scored heuristic: body fat at most this (0.1 % units) or zero.
    pub max_fat_dpct: u16,
    /// Scored heuristic: body water at most this (0.1 % units) or zero.
    pub max_water_dpct: u16,
    /// Scored heuristic: height within this inclusive range (cm).
    pub height_range_cm: (u8, u8),
    /// Scored heuristic: age within this inclusive range (years).
    pub age_range_years: (u8, u8),
    /// Mandatory when set: user id must be in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id_allowlist: Option<BTreeSet<u32>>,
}

impl Default for CarveConfig {
    fn default() -> Self {
        CarveConfig {
            stride: 1,
            year_range: (2010, 2040),
            weight_range_dkg: (10, 3000),
            max_fat_dpct: 750,
            max_water_dpct: 750,
            height_range_cm: (50, 250),
            age_range_years: (1, 120),
            user_id_allowlist: None,
        }
    }
}

/// Number of scored heuristics; a hit passing everything scores
/// `MANDATORY_HEURISTICS + SCORED_HEURISTICS`.
pub const SCORED_HEURISTICS: u32 = 6;
pub const MANDATORY_HEURISTICS: u32 = 3;
pub const MAX_VALIDITY_SCORE: u32 = MANDATORY_HEURISTICS + SCORED_HEURISTICS;

/// A decoded record found at some offset of a dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarveHit {
    pub offset: usize,
    pub validity_score: u32,
    pub reading: ScaleReading,
}

/// Fill value of a recovered run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    /// 0x00 — the overwrite pattern observed when a scale user is deleted.
    Zeros,
    /// 0xFF — erased/never-programmed flash.
    ErasedFf,
}

/// A maximal run of 0x00 or 0xFF bytes of at least the configured length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroRegion {
    pub start_offset: usize,
    pub length: usize,
    pub fill: Fill,
}

/// Byte-level difference between two equal-length dumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffReport {
    /// Maximal runs of differing bytes, as (offset, length), sorted.
    pub changed_ranges: Vec<ChangedRange>,
    /// Records carved from `after` that intersect a changed range.
    pub new_records: Vec<CarveHit>,
    /// Records carved from `before` that intersect a changed range — their
    /// bytes were zero-filled or replaced in `after`.
    pub removed_records: Vec<CarveHit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangedRange {
    pub offset: usize,
    pub length: usize,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.changed_ranges.is_empty()
    }
}

fn in_range<T: PartialOrd>(v: T, (lo, hi): (T, T)) -> bool {
    v >= lo && v <= hi
}

fn scored_heuristics(r: &ScaleReading, cfg: &CarveConfig) -> u32 {
    use chrono::Datelike;
    let mut score = 0;
    if in_range(r.date.year(), cfg.year_range) {
        score += 1;
    }
    if r.body_fat_dpct == 0 || r.body_fat_dpct <= cfg.max_fat_dpct {
        score += 1;
    }
    if r.body_water_dpct == 0 || r.body_water_dpct <= cfg.max_water_dpct {
        score += 1;
    }
    if in_range(r.height_cm, cfg.height_range_cm) {
        score += 1;
    }
    if in_range(r.age_years, cfg.age_range_years) {
        score += 1;
    }
    // Composition is recorded all-or-nothing (shoes suppress the whole
    // block); a mixed pattern suggests a misaligned window.
    let comp = [
        r.body_fat_dpct,
        r.body_water_dpct,
        r.muscle_dkg,
        u16::from(r.bone_dkg),
        u16::from(r.visceral_rating),
    ];
    if comp.iter().all(|&v| v == 0) || comp.iter().all(|&v| v != 0) {
        score += 1;
    }
    score
}

fn try_window(bytes: &[u8], offset: usize, cfg: &CarveConfig) -> Option<CarveHit> {
    let window = &bytes[offset..offset + RECORD_LEN];
    // Mandatory heuristic 1: the window decodes (valid date and time).
    let reading = record::decode_bytes(window).ok()?;
    // Mandatory heuristic 2: weight plausible or zero.
    if reading.weight_dkg != 0 && !in_range(reading.weight_dkg, cfg.weight_range_dkg) {
        return None;
    }
    // Mandatory heuristic 3: allowlisted user id, when a list is given.
    if let Some(allow) = &cfg.user_id_allowlist {
        if !allow.contains(&reading.user_id) {
            return None;
        }
    }
    let validity_score = MANDATORY_HEURISTICS + scored_heuristics(&reading, cfg);
    Some(CarveHit { offset, validity_score, reading })
}

/// Keep the best hit of every overlapping group: higher validity score wins,
/// ties go to the lower offset. Returns hits sorted by offset.
fn resolve_overlaps(candidates: Vec<CarveHit>) -> Vec<CarveHit> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .validity_score
            .cmp(&candidates[a].validity_score)
            .then(candidates[a].offset.cmp(&candidates[b].offset))
    });
    // Accepted intervals keyed by start offset; a candidate survives only if
    // it overlaps none of them.
    let mut accepted: BTreeMap<usize, usize> = BTreeMap::new();
    let mut keep = vec![false; candidates.len()];
    for &i in &order {
        let (start, end) = (candidates[i].offset, candidates[i].offset + RECORD_LEN);
        if let Some((_, &prev_end)) = accepted.range(..=start).next_back() {
            if prev_end > start {
                continue;
            }
        }
        if let Some((&next_start, _)) = accepted.range(start..).next() {
            if next_start < end {
                continue;
            }
        }
        accepted.insert(start, end);
        keep[i] = true;
    }
    let mut hits: Vec<CarveHit> = candidates
        .into_iter()
        .enumerate()
        .filter_map(|(i, h)| keep[i].then_some(h))
        .collect();
    hits.sort_by_key(|h| h.offset);
    hits
}

/// Scan a dump for reading records. Hits are sorted by offset; overlapping
/// candidates are resolved by validity score, then offset.
///
/// The scan partitions the offset space across workers; each worker reads
/// into the shared immutable buffer, so windows spanning partition borders
/// are still seen exactly once. The merged result is deterministic.
pub fn carve(dump: &DumpImage, cfg: &CarveConfig) -> Vec<CarveHit> {
    let bytes = dump.bytes();
    if bytes.len() < RECORD_LEN {
        return Vec::new();
    }
    let stride = cfg.stride.max(1);
    let max_offset = bytes.len() - RECORD_LEN;
    let candidates: Vec<CarveHit> = (0..=max_offset)
        .into_par_iter()
        .filter(|offset| offset % stride == 0)
        .filter_map(|offset| try_window(bytes, offset, cfg))
        .collect();
    resolve_overlaps(candidates)
}

/// Report maximal runs of 0x00 and 0xFF of at least `min_len` bytes,
/// sorted by offset. 0x00 runs mark deliberate overwriting of records;
/// 0xFF runs mark erased or never-programmed flash.
pub fn detect_zero_regions(dump: &DumpImage, min_len: usize) -> Result<Vec<ZeroRegion>> {
    if min_len == 0 {
        return Err(Error::InvalidInput("min_len must be at least 1".into()));
    }
    let bytes = dump.bytes();
    let mut regions = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == 0x00 || b == 0xFF {
            let start = i;
            while i < bytes.len() && bytes[i] == b {
                i += 1;
            }
            let length = i - start;
            if length >= min_len {
                regions.push(ZeroRegion {
                    start_offset: start,
                    length,
                    fill: if b == 0x00 { Fill::Zeros } else { Fill::ErasedFf },
                });
            }
        } else {
            i += 1;
        }
    }
    Ok(regions)
}

fn changed_ranges(before: &[u8], after: &[u8]) -> Vec<ChangedRange> {
    let mut ranges = Vec::new();
    let mut i = 0;
    while i < before.len() {
        if before[i] != after[i] {
            let start = i;
            while i < before.len() && before[i] != after[i] {
                i += 1;
            }
            ranges.push(ChangedRange { offset: start, length: i - start });
        } else {
            i += 1;
        }
    }
    ranges
}

fn intersects(hit: &CarveHit, ranges: &[ChangedRange]) -> bool {
    let (start, end) = (hit.offset, hit.offset + RECORD_LEN);
    ranges.iter().any(|r| r.offset < end && r.offset + r.length > start)
}

/// Compare two acquisitions of the same chip. Records carved from `after`
/// inside changed ranges are new; records carved from `before` inside
/// changed ranges were removed (zero-filled or replaced). Swapping the
/// arguments swaps the two lists.
pub fn diff_dumps(before: &DumpImage, after: &DumpImage) -> Result<DiffReport> {
    diff_dumps_with(before, after, &CarveConfig::default())
}

pub fn diff_dumps_with(
    before: &DumpImage,
    after: &DumpImage,
    cfg: &CarveConfig,
) -> Result<DiffReport> {
    if before.len() != after.len() {
        return Err(Error::LengthMismatch { before: before.len(), after: after.len() });
    }
    let ranges = changed_ranges(before.bytes(), after.bytes());
    if ranges.is_empty() {
        return Ok(DiffReport {
            changed_ranges: ranges,
            new_records: Vec::new(),
            removed_records: Vec::new(),
        });
    }
    let new_records =
        carve(after, cfg).into_iter().filter(|h| intersects(h, &ranges)).collect();
    let removed_records =
        carve(before, cfg).into_iter().filter(|h| intersects(h, &ranges)).collect();
    Ok(DiffReport { changed_ranges: ranges, new_records, removed_records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{decode_bytes, encode_record};
    use chrono::{NaiveDate, NaiveTime};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fig3_bytes() -> Vec<u8> {
        hex::decode("40863c0013050f0d1b248003f400040286022108270cd601ba23").unwrap()
    }

    fn sample_reading(day: u32, weight_dkg: u16) -> crate::record::ScaleReading {
        crate::record::ScaleReading {
            user_id: 3_966_528,
            date: NaiveDate::from_ymd_opt(2019, 5, 14 + day).unwrap(),
            device_time: NaiveTime::from_hms_opt(13, 27, 36).unwrap(),
            weight_dkg,
            body_fat_dpct: 244,
            body_water_dpct: 516,
            muscle_dkg: 646,
            bone_dkg: 33,
            visceral_rating: 8,
            opaque: [0x27, 0x0c, 0xd6],
            gender: crate::record::Gender::Male,
            height_cm: 186,
            age_years: 35,
        }
    }

    fn dump_with(records: &[(usize, crate::record::ScaleReading)], len: usize, fill: u8) -> DumpImage {
        let mut bytes = vec![fill; len];
        for (offset, r) in records {
            bytes[*offset..*offset + RECORD_LEN].copy_from_slice(&encode_record(r).unwrap());
        }
        DumpImage::from_bytes(bytes, "test dump")
    }

    #[test]
    fn carves_contiguous_records() {
        let dump = dump_with(
            &[(0, sample_reading(1, 896)), (26, sample_reading(2, 889)), (52, sample_reading(3, 904))],
            96,
            0xFF,
        );
        let hits = carve(&dump, &CarveConfig::default());
        let offsets: Vec<usize> = hits.iter().map(|h| h.offset).collect();
        assert_eq!(offsets, vec![0, 26, 52]);
        assert_eq!(hits[1].reading.weight_dkg, 889);
        for h in &hits {
            assert_eq!(h.validity_score, MAX_VALIDITY_SCORE);
        }
    }

    #[test]
    fn erased_flash_has_no_hits() {
        let dump = DumpImage::from_bytes(vec![0xFF; 512], "erased");
        assert!(carve(&dump, &CarveConfig::default()).is_empty());
        let dump = DumpImage::from_bytes(vec![0x00; 512], "zeroed");
        assert!(carve(&dump, &CarveConfig::default()).is_empty());
    }

    #[test]
    fn recovers_unaligned_record() {
        let dump = dump_with(&[(13, sample_reading(1, 896))], 64, 0xFF);
        let hits = carve(&dump, &CarveConfig::default());
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].offset, 13);
    }

    #[test]
    fn allowlist_filters_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
        let mut bytes = vec![0u8; 2048];
        rng.fill_bytes(&mut bytes);
        bytes[1000..1026].copy_from_slice(&fig3_bytes());
        let dump = DumpImage::from_bytes(bytes, "noisy");
        let cfg = CarveConfig {
            user_id_allowlist: Some([3_966_528].into_iter().collect()),
            ..CarveConfig::default()
        };
        let hits = carve(&dump, &cfg);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].offset, 1000);
        assert_eq!(hits[0].reading.user_id, 3_966_528);
    }

    #[test]
    fn every_hit_reencodes_to_its_bytes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut bytes = vec![0u8; 4096];
        rng.fill_bytes(&mut bytes);
        bytes[100..126].copy_from_slice(&encode_record(&sample_reading(1, 896)).unwrap());
        let dump = DumpImage::from_bytes(bytes, "soundness");
        for hit in carve(&dump, &CarveConfig::default()) {
            let window = &dump.bytes()[hit.offset..hit.offset + RECORD_LEN];
            assert_eq!(encode_record(&hit.reading).unwrap().as_slice(), window);
            assert_eq!(decode_bytes(window).unwrap(), hit.reading);
        }
    }

    #[test]
    fn overlap_resolution_prefers_score_then_offset() {
        let r = sample_reading(1, 896);
        let hit = |offset: usize, score: u32| CarveHit {
            offset,
            validity_score: score,
            reading: r.clone(),
        };
        // higher score wins regardless of position
        let kept = resolve_overlaps(vec![hit(0, 7), hit(10, 9)]);
        assert_eq!(kept.iter().map(|h| h.offset).collect::<Vec<_>>(), vec![10]);
        // equal scores: lower offset wins
        let kept = resolve_overlaps(vec![hit(0, 9), hit(10, 9)]);
        assert_eq!(kept.iter().map(|h| h.offset).collect::<Vec<_>>(), vec![0]);
        // non-overlapping hits both survive
        let kept = resolve_overlaps(vec![hit(0, 9), hit(26, 4)]);
        assert_eq!(kept.len(), 2);
        // chain: middle loses to both sides
        let kept = resolve_overlaps(vec![hit(0, 9), hit(20, 8), hit(46, 9)]);
        assert_eq!(kept.iter().map(|h| h.offset).collect::<Vec<_>>(), vec![0, 46]);
    }

    #[test]
    fn zero_region_detection() {
        let mut bytes = vec![0x4d; 256];
        bytes[100..152].fill(0x00);
        let dump = DumpImage::from_bytes(bytes, "z");
        let regions = detect_zero_regions(&dump, 26).unwrap();
        assert_eq!(
            regions,
            vec![ZeroRegion { start_offset: 100, length: 52, fill: Fill::Zeros }]
        );
    }

    #[test]
    fn all_ff_dump_is_one_erased_region() {
        let dump = DumpImage::from_bytes(vec![0xFF; 64], "ff");
        let regions = detect_zero_regions(&dump, 26).unwrap();
        assert_eq!(
            regions,
            vec![ZeroRegion { start_offset: 0, length: 64, fill: Fill::ErasedFf }]
        );
    }

    #[test]
    fn adjacent_fills_are_separate_regions() {
        let mut bytes = vec![0x4d; 200];
        bytes[50..90].fill(0x00);
        bytes[90..130].fill(0xFF);
        bytes[130..140].fill(0x00); // below min_len, not reported
        let dump = DumpImage::from_bytes(bytes, "mixed");
        let regions = detect_zero_regions(&dump, 26).unwrap();
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0], ZeroRegion { start_offset: 50, length: 40, fill: Fill::Zeros });
        assert_eq!(regions[1], ZeroRegion { start_offset: 90, length: 40, fill: Fill::ErasedFf });
    }

    #[test]
    fn min_len_zero_is_invalid() {
        let dump = DumpImage::from_bytes(vec![0u8; 32], "z");
        assert!(detect_zero_regions(&dump, 0).is_err());
    }

    #[test]
    fn identical_dumps_diff_empty() {
        let dump = dump_with(&[(0, sample_reading(1, 896))], 64, 0xFF);
        let report = diff_dumps(&dump, &dump).unwrap();
        assert!(report.is_empty());
        assert!(report.new_records.is_empty());
        assert!(report.removed_records.is_empty());
    }

    #[test]
    fn appended_record_is_the_single_difference() {
        let before = dump_with(&[(0, sample_reading(1, 896))], 128, 0xFF);
        let after =
            dump_with(&[(0, sample_reading(1, 896)), (40, sample_reading(2, 889))], 128, 0xFF);
        let report = diff_dumps(&before, &after).unwrap();
        assert_eq!(report.changed_ranges.len(), 1);
        assert_eq!(report.new_records.len(), 1);
        assert_eq!(report.new_records[0].offset, 40);
        assert_eq!(report.new_records[0].reading.weight_dkg, 889);
        assert!(report.removed_records.is_empty());
    }

    #[test]
    fn zero_filled_records_are_removed() {
        let records = [
            (0, sample_reading(1, 896)),
            (26, sample_reading(2, 889)),
            (52, sample_reading(3, 904)),
        ];
        let before = dump_with(&records, 128, 0xFF);
        let mut after_bytes = before.bytes().to_vec();
        after_bytes[0..78].fill(0x00);
        let after = DumpImage::from_bytes(after_bytes, "after");
        let report = diff_dumps(&before, &after).unwrap();
        assert_eq!(report.removed_records.len(), 3);
        assert!(report.new_records.is_empty());
    }

    #[test]
    fn diff_is_symmetric() {
        let before = dump_with(&[(4, sample_reading(1, 896))], 100, 0xFF);
        let after = dump_with(&[(4, sample_reading(1, 896)), (60, sample_reading(2, 889))], 100, 0xFF);
        let fwd = diff_dumps(&before, &after).unwrap();
        let rev = diff_dumps(&after, &before).unwrap();
        assert_eq!(fwd.changed_ranges, rev.changed_ranges);
        assert_eq!(fwd.new_records, rev.removed_records);
        assert_eq!(fwd.removed_records, rev.new_records);
    }

    #[test]
    fn diff_requires_equal_lengths() {
        let a = DumpImage::from_bytes(vec![0xFF; 64], "a");
        let b = DumpImage::from_bytes(vec![0xFF; 65], "b");
        assert!(matches!(
            diff_dumps(&a, &b),
            Err(Error::LengthMismatch { before: 64, after: 65 })
        ));
    }

    #[test]
    fn content_hash_is_sha256() {
        let dump = DumpImage::from_bytes(b"abc".to_vec(), "abc");
        assert_eq!(
            dump.content_hash(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
