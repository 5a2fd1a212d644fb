//! Cross-source correlation: reading clusters, the presence matrix, and
//! manipulation inference.
//!
//! The same physical step on the scale leaves up to four records — one per
//! evidence source. Clustering reunites them by user, time, and weight;
//! the presence matrix then shows, per reading and per source, whether a
//! copy survived. Holes in that grid are not noise: each manipulation of
//! the ecosystem (app wipe, scale-side user delete, app-side reading
//! delete) leaves a characteristic hole pattern, and the inference rules
//! here name them.

use crate::carve::{Fill, ZeroRegion};
use crate::model::{
    ts, CredentialArtifact, DeviceInfo, NormalizedReading, Source, UserAccount,
};
use crate::record::RECORD_LEN;
use crate::units::Deci;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Readings further apart than this are never the same step on the scale.
pub const DEFAULT_MATCH_WINDOW_S: i64 = 120;
/// Allowed weight disagreement between copies of one reading, in kg.
pub const DEFAULT_WEIGHT_TOLERANCE: Deci = Deci::from_tenths(1);

/// One physical reading, reunited across sources (≤ 1 member per source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingCluster {
    pub cluster_id: String,
    #[serde(with = "ts")]
    pub canonical_timestamp_utc: DateTime<Utc>,
    pub canonical_weight_kg: Deci,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub user_id: Option<u32>,
    pub members: Vec<NormalizedReading>,
}

impl ReadingCluster {
    pub fn has_source(&self, source: Source) -> bool {
        self.members.iter().any(|m| m.source == source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Present,
    Absent,
    NotApplicable,
}

impl Presence {
    pub fn symbol(self) -> &'static str {
        match self {
            Presence::Present => "+",
            Presence::Absent => "x",
            Presence::NotApplicable => "n/a",
        }
    }
}

/// One matrix row: a cluster and its per-source presence cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceRow {
    pub cluster_id: String,
    #[serde(with = "ts")]
    pub timestamp_utc: DateTime<Utc>,
    pub weight_kg: Deci,
    /// Aligned with [`PresenceMatrix::columns`].
    pub cells: Vec<Presence>,
}

/// Clusters × sources grid. A cell is `present` iff the cluster has a
/// member from that source; sources that were never supplied to the
/// correlation are `not_applicable` for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceMatrix {
    pub columns: Vec<Source>,
    pub rows: Vec<PresenceRow>,
}

impl PresenceMatrix {
    pub fn cell(&self, row: &PresenceRow, source: Source) -> Presence {
        match self.columns.iter().position(|&c| c == source) {
            Some(i) => row.cells[i],
            None => Presence::NotApplicable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R1_app_wipe")]
    R1AppWipe,
    #[serde(rename = "R2_scale_user_deleted")]
    R2ScaleUserDeleted,
    #[serde(rename = "R3_app_deleted_reading")]
    R3AppDeletedReading,
    #[serde(rename = "R4_consistent")]
    R4Consistent,
    #[serde(rename = "R0_undetermined")]
    R0Undetermined,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::R1AppWipe => "R1_app_wipe",
            RuleId::R2ScaleUserDeleted => "R2_scale_user_deleted",
            RuleId::R3AppDeletedReading => "R3_app_deleted_reading",
            RuleId::R4Consistent => "R4_consistent",
            RuleId::R0Undetermined => "R0_undetermined",
        }
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Corroborated,
    Uncorroborated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationFinding {
    pub rule_id: RuleId,
    pub affected_clusters: Vec<String>,
    pub supporting_evidence: Vec<String>,
    pub confidence: Confidence,
}

impl ManipulationFinding {
    /// Equality on the adjudicated parts — rule, clusters, confidence —
    /// ignoring the free-text evidence strings.
    pub fn equivalent(&self, other: &ManipulationFinding) -> bool {
        self.rule_id == other.rule_id
            && self.affected_clusters == other.affected_clusters
            && self.confidence == other.confidence
    }
}

/// Greedy agglomeration of readings into clusters.
///
/// Readings are visited in (timestamp, source, source_ref) order; each joins
/// the best matching open cluster or opens a new one. A reading matches a
/// cluster iff the cluster has no member from its source yet, the user ids
/// agree (a side without an id — cloud exports — matches on weight and time
/// alone), and both |Δt| ≤ `window_s` and |Δweight| ≤ `tolerance` hold
/// against the cluster's canonical member. Ties prefer the smallest |Δt|,
/// then smallest |Δweight|, then the earliest-ranked canonical source.
pub fn match_readings(
    sets: &[&crate::model::EvidenceSet],
    window_s: i64,
    tolerance: Deci,
) -> Vec<ReadingCluster> {
    let mut readings: Vec<&NormalizedReading> =
        sets.iter().flat_map(|s| s.readings.iter()).collect();
    readings.sort_by(|a, b| {
        (a.timestamp_utc, a.source.rank(), &a.source_ref)
            .cmp(&(b.timestamp_utc, b.source.rank(), &b.source_ref))
    });

    let mut clusters: Vec<ReadingCluster> = Vec::new();
    for reading in readings {
        let candidate = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.has_source(reading.source))
            .filter(|(_, c)| match (c.user_id, reading.user_id) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            })
            .filter_map(|(i, c)| {
                let dt = (reading.timestamp_utc - c.canonical_timestamp_utc)
                    .num_seconds()
                    .abs();
                let dw = reading.weight_kg.abs_diff(c.canonical_weight_kg);
                (dt <= window_s && dw <= tolerance.tenths().unsigned_abs())
                    .then_some((dt, dw, i))
            })
            .min_by_key(|&(dt, dw, i)| (dt, dw, clusters[i].members[0].source.rank(), i));
        match candidate {
            Some((_, _, i)) => {
                let cluster = &mut clusters[i];
                if cluster.user_id.is_none() {
                    cluster.user_id = reading.user_id;
                }
                cluster.members.push(reading.clone());
            }
            None => clusters.push(ReadingCluster {
                cluster_id: String::new(),
                canonical_timestamp_utc: reading.timestamp_utc,
                canonical_weight_kg: reading.weight_kg,
                user_id: reading.user_id,
                members: vec![reading.clone()],
            }),
        }
    }
    for (i, cluster) in clusters.iter_mut().enumerate() {
        cluster.cluster_id = format!("cluster-{}", i + 1);
        cluster.members.sort_by_key(|m| m.source.rank());
    }
    clusters
}

/// Build the presence grid for `clusters` over the canonical four columns.
/// Sources not in `declared` (never acquired) yield `not_applicable` cells.
pub fn build_presence_matrix(clusters: &[ReadingCluster], declared: &[Source]) -> PresenceMatrix {
    let columns = Source::ALL.to_vec();
    let rows = clusters
        .iter()
        .map(|cluster| PresenceRow {
            cluster_id: cluster.cluster_id.clone(),
            timestamp_utc: cluster.canonical_timestamp_utc,
            weight_kg: cluster.canonical_weight_kg,
            cells: columns
                .iter()
                .map(|&source| {
                    if !declared.contains(&source) {
                        Presence::NotApplicable
                    } else if cluster.has_source(source) {
                        Presence::Present
                    } else {
                        Presence::Absent
                    }
                })
                .collect(),
        })
        .collect();
    PresenceMatrix { columns, rows }
}

/// Classify each matrix row and aggregate rows with the same verdict.
///
/// Per row (`not_applicable` cells are outside every pattern):
/// - every declared source present → `R4_consistent`;
/// - scale and cloud present, both apps declared and absent → `R1_app_wipe`;
/// - scale declared and absent, cloud present, at least one app present →
///   `R2_scale_user_deleted`;
/// - scale present, at least one other source declared, all of them absent
///   → `R3_app_deleted_reading`;
/// - anything else → `R0_undetermined`, quoting the pattern.
///
/// R2 is `corroborated` only when the dump supplies a zero-filled region of
/// at least one record length — mere absence from the scale could predate
/// pairing, but an overwritten stretch of flash is positive evidence.
pub fn infer_manipulations(
    matrix: &PresenceMatrix,
    zero_regions: &[ZeroRegion],
) -> Vec<ManipulationFinding> {
    let corroboration: Vec<&ZeroRegion> = zero_regions
        .iter()
        .filter(|z| z.fill == Fill::Zeros && z.length >= RECORD_LEN)
        .collect();

    // Verdict per row; rows sharing a (rule, confidence) verdict merge into
    // one finding, ordered by each verdict's first appearance.
    let mut findings: Vec<ManipulationFinding> = Vec::new();
    for row in &matrix.rows {
        let cell = |s: Source| matrix.cell(row, s);
        let declared = |s: Source| cell(s) != Presence::NotApplicable;
        let present = |s: Source| cell(s) == Presence::Present;
        let absent = |s: Source| cell(s) == Presence::Absent;

        let all_present = Source::ALL.iter().all(|&s| !declared(s) || present(s));
        let apps_wiped = present(Source::Scale)
            && present(Source::Cloud)
            && absent(Source::Android)
            && absent(Source::Ios);
        let scale_scrubbed = absent(Source::Scale)
            && present(Source::Cloud)
            && (present(Source::Android) || present(Source::Ios));
        let others_declared = Source::ALL
            .iter()
            .any(|&s| s != Source::Scale && declared(s));
        let scale_only = present(Source::Scale)
            && others_declared
            && Source::ALL
                .iter()
                .all(|&s| s == Source::Scale || !declared(s) || absent(s));

        let (rule, confidence, evidence) = if all_present {
            (
                RuleId::R4Consistent,
                Confidence::Corroborated,
                vec![format!(
                    "{}: recovered from every declared source",
                    row.cluster_id
                )],
            )
        } else if apps_wiped {
            (
                RuleId::R1AppWipe,
                Confidence::Corroborated,
                vec![format!(
                    "{}: android and ios copies gone while scale and cloud retain the reading",
                    row.cluster_id
                )],
            )
        } else if scale_scrubbed {
            let mut ev = vec![format!(
                "{}: missing from the scale dump while app/cloud copies survive",
                row.cluster_id
            )];
            let confidence = if corroboration.is_empty() {
                Confidence::Uncorroborated
            } else {
                for z in &corroboration {
                    ev.push(format!(
                        "zero-filled dump region at offset {} ({} bytes)",
                        z.start_offset, z.length
                    ));
                }
                Confidence::Corroborated
            };
            (RuleId::R2ScaleUserDeleted, confidence, ev)
        } else if scale_only {
            (
                RuleId::R3AppDeletedReading,
                Confidence::Corroborated,
                vec![format!(
                    "{}: survives only in the scale dump; app and cloud copies removed",
                    row.cluster_id
                )],
            )
        } else {
            let pattern: Vec<String> = matrix
                .columns
                .iter()
                .map(|&s| format!("{}={}", s.as_str(), cell(s).symbol()))
                .collect();
            (
                RuleId::R0Undetermined,
                Confidence::Uncorroborated,
                vec![format!(
                    "{}: unrecognized pattern [{}]",
                    row.cluster_id,
                    pattern.join(", ")
                )],
            )
        };

        match findings
            .iter_mut()
            .find(|f| f.rule_id == rule && f.confidence == confidence)
        {
            Some(f) => {
                f.affected_clusters.push(row.cluster_id.clone());
                for line in evidence {
                    if !f.supporting_evidence.contains(&line) {
                        f.supporting_evidence.push(line);
                    }
                }
            }
            None => findings.push(ManipulationFinding {
                rule_id: rule,
                affected_clusters: vec![row.cluster_id.clone()],
                supporting_evidence: evidence,
                confidence,
            }),
        }
    }
    findings
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Reading,
    Finding,
}

/// One entry in the investigator-facing chronology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    #[serde(with = "ts")]
    pub timestamp_utc: DateTime<Utc>,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cluster_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule_id: Option<RuleId>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sources: Vec<Source>,
    pub description: String,
}

/// Chronology plus the identity appendix (accounts, devices, credentials —
/// the latter never mixed into the event stream).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    pub events: Vec<TimelineEvent>,
    pub accounts: Vec<UserAccount>,
    pub devices: Vec<DeviceInfo>,
    pub credentials: Vec<CredentialArtifact>,
}

/// Interleave reading events and finding events into one chronology.
/// Findings are anchored at their first affected cluster's timestamp and
/// sort after readings at the same instant.
pub fn build_timeline(
    clusters: &[ReadingCluster],
    findings: &[ManipulationFinding],
    accounts: &[UserAccount],
    devices: &[DeviceInfo],
    credentials: &[CredentialArtifact],
) -> TimelineReport {
    let mut events: Vec<TimelineEvent> = Vec::new();
    for cluster in clusters {
        let sources: Vec<Source> = Source::ALL
            .into_iter()
            .filter(|&s| cluster.has_source(s))
            .collect();
        let names: Vec<&str> = sources.iter().map(|s| s.as_str()).collect();
        let who = match cluster.user_id {
            Some(id) => format!("user {id}"),
            None => "unidentified user".to_string(),
        };
        let bmi = cluster
            .members
            .iter()
            .find_map(|m| m.bmi)
            .map(|b| format!(" (BMI {b})"))
            .unwrap_or_default();
        events.push(TimelineEvent {
            timestamp_utc: cluster.canonical_timestamp_utc,
            kind: EventKind::Reading,
            cluster_id: Some(cluster.cluster_id.clone()),
            rule_id: None,
            sources,
            description: format!(
                "{} kg reading{bmi} for {who}, recovered from {}",
                cluster.canonical_weight_kg,
                names.join(", ")
            ),
        });
    }
    for finding in findings {
        let anchor = finding
            .affected_clusters
            .first()
            .and_then(|id| clusters.iter().find(|c| &c.cluster_id == id));
        let Some(anchor) = anchor else { continue };
        events.push(TimelineEvent {
            timestamp_utc: anchor.canonical_timestamp_utc,
            kind: EventKind::Finding,
            cluster_id: Some(anchor.cluster_id.clone()),
            rule_id: Some(finding.rule_id),
            sources: Vec::new(),
            description: format!(
                "{} ({:?}) affecting {}",
                finding.rule_id,
                finding.confidence,
                finding.affected_clusters.join(", ")
            ),
        });
    }
    events.sort_by(|a, b| {
        let key = |e: &TimelineEvent| {
            (
                e.timestamp_utc,
                matches!(e.kind, EventKind::Finding),
                e.cluster_id.clone(),
                e.rule_id.map(|r| r.as_str()),
            )
        };
        key(a).cmp(&key(b))
    });

    let mut report = TimelineReport {
        events,
        accounts: Vec::new(),
        devices: Vec::new(),
        credentials: Vec::new(),
    };
    for a in accounts {
        if !report.accounts.contains(a) {
            report.accounts.push(a.clone());
        }
    }
    for d in devices {
        if !report.devices.contains(d) {
            report.devices.push(d.clone());
        }
    }
    for c in credentials {
        if !report.credentials.contains(c) {
            report.credentials.push(c.clone());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EvidenceSet;
    use chrono::NaiveDateTime;

    fn at(s: &str) -> DateTime<Utc> {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").unwrap().and_utc()
    }

    fn reading(source: Source, ts: &str, tenths: i32, user: Option<u32>) -> NormalizedReading {
        NormalizedReading {
            source,
            source_ref: format!("{} {}", source.as_str(), ts),
            user_id: user,
            timestamp_utc: at(ts),
            weight_kg: Deci::from_tenths(tenths),
            bmi: None,
            body_fat_pct: None,
            body_water_pct: None,
            muscle_kg: None,
            bone_kg: None,
            visceral_rating: None,
            calories: None,
            environment: None,
        }
    }

    fn set_of(source: Source, readings: Vec<NormalizedReading>) -> EvidenceSet {
        let mut set = EvidenceSet::empty(source, source.as_str().to_string());
        set.readings = readings;
        set
    }

    #[test]
    fn four_sources_within_a_minute_form_one_cluster() {
        let scale = set_of(Source::Scale, vec![reading(Source::Scale, "2019-05-15 16:27:36", 896, Some(3966528))]);
        let android = set_of(Source::Android, vec![reading(Source::Android, "2019-05-15 16:27:40", 896, Some(3966528))]);
        let ios = set_of(Source::Ios, vec![reading(Source::Ios, "2019-05-15 16:28:20", 896, Some(3966528))]);
        let cloud = set_of(Source::Cloud, vec![reading(Source::Cloud, "2019-05-15 16:27:36", 896, None)]);
        let clusters = match_readings(
            &[&scale, &android, &ios, &cloud],
            DEFAULT_MATCH_WINDOW_S,
            DEFAULT_WEIGHT_TOLERANCE,
        );
        assert_eq!(clusters.len(), 1);
        let c = &clusters[0];
        assert_eq!(c.cluster_id, "cluster-1");
        assert_eq!(c.members.len(), 4);
        assert_eq!(c.user_id, Some(3966528));
        assert_eq!(c.canonical_timestamp_utc, at("2019-05-15 16:27:36"));
        assert_eq!(c.canonical_weight_kg, Deci::from_tenths(896));
        // members ordered scale < android < ios < cloud
        let order: Vec<Source> = c.members.iter().map(|m| m.source).collect();
        assert_eq!(order, Source::ALL.to_vec());
    }

    #[test]
    fn same_weight_ten_hours_apart_stays_two_clusters() {
        let scale = set_of(
            Source::Scale,
            vec![
                reading(Source::Scale, "2019-05-15 06:00:00", 896, Some(1)),
                reading(Source::Scale, "2019-05-15 16:00:00", 896, Some(1)),
            ],
        );
        let clusters = match_readings(&[&scale], DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].cluster_id, "cluster-1");
        assert_eq!(clusters[1].cluster_id, "cluster-2");
    }

    #[test]
    fn differing_user_ids_never_merge() {
        let scale = set_of(Source::Scale, vec![reading(Source::Scale, "2019-05-15 16:00:00", 896, Some(1))]);
        let android = set_of(Source::Android, vec![reading(Source::Android, "2019-05-15 16:00:00", 896, Some(2))]);
        let clusters = match_readings(&[&scale, &android], DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE);
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn cloud_reading_adopts_cluster_user_id_by_time_and_weight() {
        let cloud = set_of(Source::Cloud, vec![reading(Source::Cloud, "2019-05-15 16:00:30", 895, None)]);
        let scale = set_of(Source::Scale, vec![reading(Source::Scale, "2019-05-15 16:00:00", 896, Some(7))]);
        let clusters = match_readings(&[&scale, &cloud], DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].user_id, Some(7));
    }

    #[test]
    fn tie_breaks_prefer_smaller_time_delta() {
        // two scale readings 60 s apart, android reading 10 s from the second
        let scale = set_of(
            Source::Scale,
            vec![
                reading(Source::Scale, "2019-05-15 16:00:00", 896, Some(1)),
                reading(Source::Scale, "2019-05-15 16:01:00", 896, Some(1)),
            ],
        );
        let android = set_of(Source::Android, vec![reading(Source::Android, "2019-05-15 16:01:10", 896, Some(1))]);
        let clusters = match_readings(&[&scale, &android], DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE);
        assert_eq!(clusters.len(), 2);
        assert!(!clusters[0].has_source(Source::Android));
        assert!(clusters[1].has_source(Source::Android));
    }

    fn row_pattern(matrix: &PresenceMatrix, row: usize) -> Vec<Presence> {
        matrix.rows[row].cells.clone()
    }

    #[test]
    fn matrix_marks_undeclared_sources_not_applicable() {
        let scale = set_of(Source::Scale, vec![reading(Source::Scale, "2019-05-15 16:00:00", 896, Some(1))]);
        let clusters = match_readings(&[&scale], DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE);
        let matrix = build_presence_matrix(&clusters, &[Source::Scale, Source::Cloud]);
        assert_eq!(matrix.columns, Source::ALL.to_vec());
        assert_eq!(
            row_pattern(&matrix, 0),
            vec![Presence::Present, Presence::NotApplicable, Presence::NotApplicable, Presence::Absent]
        );
    }

    fn matrix_from(rows: Vec<(Vec<Presence>, &str)>) -> PresenceMatrix {
        PresenceMatrix {
            columns: Source::ALL.to_vec(),
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, (cells, ts_))| PresenceRow {
                    cluster_id: format!("cluster-{}", i + 1),
                    timestamp_utc: at(ts_),
                    weight_kg: Deci::from_tenths(896),
                    cells,
                })
                .collect(),
        }
    }

    use Presence::{Absent as X, Present as P};

    #[test]
    fn all_present_rows_are_consistent() {
        let m = matrix_from(vec![
            (vec![P, P, P, P], "2019-05-15 16:27:36"),
            (vec![P, P, P, P], "2019-05-16 16:55:00"),
        ]);
        let findings = infer_manipulations(&m, &[]);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, RuleId::R4Consistent);
        assert_eq!(findings[0].affected_clusters, vec!["cluster-1", "cluster-2"]);
    }

    #[test]
    fn app_wipe_pattern_is_r1() {
        let m = matrix_from(vec![(vec![P, X, X, P], "2019-05-15 16:27:36")]);
        let findings = infer_manipulations(&m, &[]);
        assert_eq!(findings[0].rule_id, RuleId::R1AppWipe);
    }

    #[test]
    fn scale_user_delete_needs_zeros_for_corroboration() {
        let m = matrix_from(vec![(vec![X, P, P, P], "2019-05-15 16:27:36")]);

        let weak = infer_manipulations(&m, &[]);
        assert_eq!(weak[0].rule_id, RuleId::R2ScaleUserDeleted);
        assert_eq!(weak[0].confidence, Confidence::Uncorroborated);

        let zeros = ZeroRegion { start_offset: 128, length: 26, fill: Fill::Zeros };
        let strong = infer_manipulations(&m, &[zeros]);
        assert_eq!(strong[0].confidence, Confidence::Corroborated);
        assert!(
            strong[0].supporting_evidence.iter().any(|e| e.contains("offset 128")),
            "corroborated R2 must cite the region: {:?}",
            strong[0].supporting_evidence
        );

        // erased (0xFF) regions and short runs do not corroborate
        let erased = ZeroRegion { start_offset: 128, length: 260, fill: Fill::ErasedFf };
        let short = ZeroRegion { start_offset: 0, length: 25, fill: Fill::Zeros };
        let still_weak = infer_manipulations(&m, &[erased, short]);
        assert_eq!(still_weak[0].confidence, Confidence::Uncorroborated);
    }

    #[test]
    fn scale_only_row_is_r3() {
        let m = matrix_from(vec![(vec![P, X, X, X], "2019-05-18 15:46:00")]);
        let findings = infer_manipulations(&m, &[]);
        assert_eq!(findings[0].rule_id, RuleId::R3AppDeletedReading);
    }

    #[test]
    fn unmatched_pattern_is_r0_with_quoted_cells() {
        let m = matrix_from(vec![(vec![X, P, X, X], "2019-05-15 16:27:36")]);
        let findings = infer_manipulations(&m, &[]);
        assert_eq!(findings[0].rule_id, RuleId::R0Undetermined);
        assert!(
            findings[0].supporting_evidence[0].contains("scale=x")
                && findings[0].supporting_evidence[0].contains("android=+"),
            "{:?}",
            findings[0].supporting_evidence
        );
    }

    #[test]
    fn not_applicable_cells_sit_outside_patterns() {
        // scale + cloud declared and present, apps never acquired: consistent
        let m = matrix_from(vec![(
            vec![P, Presence::NotApplicable, Presence::NotApplicable, P],
            "2019-05-15 16:27:36",
        )]);
        let findings = infer_manipulations(&m, &[]);
        assert_eq!(findings[0].rule_id, RuleId::R4Consistent);
    }

    #[test]
    fn mixed_rows_group_by_rule_in_first_seen_order() {
        let m = matrix_from(vec![
            (vec![X, P, P, P], "2019-05-15 16:27:36"),
            (vec![X, P, P, P], "2019-05-16 16:55:00"),
            (vec![X, P, P, P], "2019-05-17 18:28:00"),
            (vec![P, X, X, X], "2019-05-18 15:46:00"),
        ]);
        let findings = infer_manipulations(&m, &[]);
        assert_eq!(findings.len(), 2);
        assert_eq!(findings[0].rule_id, RuleId::R2ScaleUserDeleted);
        assert_eq!(findings[0].affected_clusters, vec!["cluster-1", "cluster-2", "cluster-3"]);
        assert_eq!(findings[1].rule_id, RuleId::R3AppDeletedReading);
        assert_eq!(findings[1].affected_clusters, vec!["cluster-4"]);
    }

    #[test]
    fn timeline_interleaves_readings_and_findings() {
        let scale = set_of(
            Source::Scale,
            vec![
                reading(Source::Scale, "2019-05-15 16:27:36", 896, Some(1)),
                reading(Source::Scale, "2019-05-18 15:46:00", 902, Some(1)),
            ],
        );
        let clusters = match_readings(&[&scale], DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE);
        let matrix = build_presence_matrix(&clusters, &[Source::Scale, Source::Android]);
        let findings = infer_manipulations(&matrix, &[]);
        let timeline = build_timeline(&clusters, &findings, &[], &[], &[]);
        assert_eq!(timeline.events.len(), clusters.len() + findings.len());
        // events are chronological; a finding never precedes the reading it anchors to
        for pair in timeline.events.windows(2) {
            assert!(pair[0].timestamp_utc <= pair[1].timestamp_utc);
        }
        assert_eq!(timeline.events[0].kind, EventKind::Reading);
        assert!(timeline.events[0].description.contains("89.6 kg"));
        assert!(timeline.accounts.is_empty() && timeline.devices.is_empty());
    }

    #[test]
    fn empty_inputs_empty_timeline() {
        let t = build_timeline(&[], &[], &[], &[], &[]);
        assert!(t.events.is_empty());
        assert!(t.accounts.is_empty());
        assert!(t.devices.is_empty());
        assert!(t.credentials.is_empty());
    }

    #[test]
    fn timeline_appendix_deduplicates() {
        let account = UserAccount {
            user_id: Some(1),
            username: Some("jdoe@example.com".into()),
            name: None,
            birthday: None,
            gender: None,
            height_cm: None,
            weight_kg: None,
            country: None,
            timezone: None,
            location: None,
        };
        let t = build_timeline(&[], &[], &[account.clone(), account.clone()], &[], &[]);
        assert_eq!(t.accounts.len(), 1);
    }

    #[test]
    fn rule_ids_serialize_with_stable_names() {
        for (rule, name) in [
            (RuleId::R1AppWipe, "\"R1_app_wipe\""),
            (RuleId::R2ScaleUserDeleted, "\"R2_scale_user_deleted\""),
            (RuleId::R3AppDeletedReading, "\"R3_app_deleted_reading\""),
            (RuleId::R4Consistent, "\"R4_consistent\""),
            (RuleId::R0Undetermined, "\"R0_undetermined\""),
        ] {
            assert_eq!(serde_json::to_string(&rule).unwrap(), name);
            assert_eq!(serde_json::from_str::<RuleId>(name).unwrap(), rule);
        }
    }
}
