//! Report assembly and rendering.
//!
//! JSON is the canonical format; the text and CSV renderings are derived
//! from the same struct and never computed separately. Serialization is
//! byte-deterministic: no wall-clock fields, no hash-map ordering, pretty
//! JSON with a trailing newline.

use crate::carve::{CarveHit, DumpImage, ZeroRegion};
use crate::correlate::{
    build_presence_matrix, build_timeline, infer_manipulations, match_readings,
    ManipulationFinding, PresenceMatrix, ReadingCluster, TimelineEvent,
    DEFAULT_MATCH_WINDOW_S, DEFAULT_WEIGHT_TOLERANCE,
};
use crate::error::Result;
use crate::model::{CredentialArtifact, DeviceInfo, EvidenceSet, Source, UserAccount};
use crate::record::DEFAULT_DEVICE_UTC_OFFSET_MIN;
use crate::units::Deci;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TOOL_NAME: &str = "scalefx";

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Provenance of one input artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub label: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        Ok(InputDigest {
            label: path.display().to_string(),
            sha256: crate::carve::sha256_hex(&bytes),
        })
    }
}

/// Echo of the run configuration that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub device_utc_offset_min: i32,
    pub match_window_s: i64,
    pub weight_tolerance_kg: Deci,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            device_utc_offset_min: DEFAULT_DEVICE_UTC_OFFSET_MIN,
            match_window_s: DEFAULT_MATCH_WINDOW_S,
            weight_tolerance_kg: DEFAULT_WEIGHT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub config: ReportConfig,
    pub inputs: Vec<InputDigest>,
    pub notes: Vec<String>,
}

/// The full correlation product. Top-level JSON keys are stable:
/// `meta`, `clusters`, `presence_matrix`, `findings`, `timeline`,
/// `accounts`, `devices`, `credentials`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub clusters: Vec<ReadingCluster>,
    pub presence_matrix: PresenceMatrix,
    pub findings: Vec<ManipulationFinding>,
    pub timeline: Vec<TimelineEvent>,
    pub accounts: Vec<UserAccount>,
    pub devices: Vec<DeviceInfo>,
    pub credentials: Vec<CredentialArtifact>,
}

/// Correlate the given evidence sets into a report.
///
/// The declared-source list for the presence matrix is exactly the sources
/// of `sets`; an empty set still declares its source (acquired but blank is
/// `absent`, never `not_applicable`).
pub fn build_report(
    sets: &[&EvidenceSet],
    zero_regions: &[ZeroRegion],
    config: ReportConfig,
    inputs: Vec<InputDigest>,
) -> Report {
    let clusters = match_readings(sets, config.match_window_s, config.weight_tolerance_kg);
    let declared: Vec<Source> = Source::ALL
        .into_iter()
        .filter(|s| sets.iter().any(|set| set.source == *s))
        .collect();
    let matrix = build_presence_matrix(&clusters, &declared);
    let findings = infer_manipulations(&matrix, zero_regions);

    let mut accounts: Vec<UserAccount> = Vec::new();
    let mut devices: Vec<DeviceInfo> = Vec::new();
    let mut credentials: Vec<CredentialArtifact> = Vec::new();
    let mut ordered: Vec<&&EvidenceSet> = sets.iter().collect();
    ordered.sort_by_key(|s| s.source.rank());
    for set in ordered {
        accounts.extend(set.accounts.iter().cloned());
        devices.extend(set.devices.iter().cloned());
        credentials.extend(set.credentials.iter().cloned());
    }
    let timeline = build_timeline(&clusters, &findings, &accounts, &devices, &credentials);

    let mut notes = vec![
        "cloud export rows carry no user id; cloud readings join clusters on weight and time alone"
            .to_string(),
    ];
    if !declared.contains(&Source::Scale) && !zero_regions.is_empty() {
        notes.push("zero regions supplied without a scale evidence set".to_string());
    }
    Report {
        meta: ReportMeta {
            tool: TOOL_NAME.to_string(),
            version: tool_version().to_string(),
            config,
            inputs,
            notes,
        },
        clusters,
        presence_matrix: matrix,
        findings,
        timeline: timeline.events,
        accounts: timeline.accounts,
        devices: timeline.devices,
        credentials: timeline.credentials,
    }
}

/// Canonical serialization: pretty JSON, trailing newline, deterministic.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Carver artifact: dump provenance, hits, zero regions. `correlate
/// --zero-regions` consumes this file (only the regions are read back).
#[derive(Debug, Clone, Serialize)]
pub struct CarveOutput {
    pub dump: DumpMeta,
    pub hits: Vec<CarveHit>,
    pub zero_regions: Vec<ZeroRegion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpMeta {
    pub source_label: String,
    pub length: usize,
    pub sha256: String,
}

impl CarveOutput {
    pub fn new(dump: &DumpImage, hits: Vec<CarveHit>, zero_regions: Vec<ZeroRegion>) -> Self {
        CarveOutput {
            dump: DumpMeta {
                source_label: dump.source_label().to_string(),
                length: dump.len(),
                sha256: dump.content_hash().to_string(),
            },
            hits,
            zero_regions,
        }
    }
}

/// Read the `zero_regions` section back out of a carve artifact.
pub fn read_zero_regions(path: impl AsRef<Path>) -> Result<Vec<ZeroRegion>> {
    #[derive(Deserialize)]
    struct Regions {
        zero_regions: Vec<ZeroRegion>,
    }
    let text = std::fs::read_to_string(path)?;
    let parsed: Regions = serde_json::from_str(&text)?;
    Ok(parsed.zero_regions)
}

/// Human-readable rendering, derived from the report struct.
pub fn render_text(report: &Report) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "{} report (v{})", report.meta.tool, report.meta.version);
    let _ = writeln!(
        w,
        "config: device UTC offset {:+} min, match window {} s, weight tolerance {} kg",
        report.meta.config.device_utc_offset_min,
        report.meta.config.match_window_s,
        report.meta.config.weight_tolerance_kg,
    );
    if !report.meta.inputs.is_empty() {
        let _ = writeln!(w, "\ninputs:");
        for input in &report.meta.inputs {
            let _ = writeln!(w, "  {}  sha256={}", input.label, input.sha256);
        }
    }
    for note in &report.meta.notes {
        let _ = writeln!(w, "note: {note}");
    }

    let _ = writeln!(w, "\npresence matrix ({} clusters):", report.presence_matrix.rows.len());
    let header: Vec<String> = report
        .presence_matrix
        .columns
        .iter()
        .map(|s| s.as_str().to_string())
        .collect();
    let _ = writeln!(
        w,
        "  {:<12} {:<22} {:>8}  {}",
        "cluster", "timestamp (UTC)", "kg", header.join("  ")
    );
    for row in &report.presence_matrix.rows {
        let cells: Vec<String> = row
            .cells
            .iter()
            .zip(&header)
            .map(|(c, h)| format!("{:<width$}", c.symbol(), width = h.len()))
            .collect();
        let _ = writeln!(
            w,
            "  {:<12} {:<22} {:>8}  {}",
            row.cluster_id,
            crate::model::ts::to_string(&row.timestamp_utc),
            row.weight_kg.to_string(),
            cells.join("  ").trim_end()
        );
    }

    let _ = writeln!(w, "\nfindings ({}):", report.findings.len());
    for f in &report.findings {
        let _ = writeln!(
            w,
            "  {} [{}] affecting {}",
            f.rule_id,
            match f.confidence {
                crate::correlate::Confidence::Corroborated => "corroborated",
                crate::correlate::Confidence::Uncorroborated => "uncorroborated",
            },
            f.affected_clusters.join(", ")
        );
        for e in &f.supporting_evidence {
            let _ = writeln!(w, "      - {e}");
        }
    }

    let _ = writeln!(w, "\ntimeline ({} events):", report.timeline.len());
    for e in &report.timeline {
        let _ = writeln!(
            w,
            "  {}  {}",
            crate::model::ts::to_string(&e.timestamp_utc),
            e.description
        );
    }

    let _ = writeln!(w, "\naccounts ({}):", report.accounts.len());
    for a in &report.accounts {
        let mut bits = Vec::new();
        if let Some(id) = a.user_id {
            bits.push(format!("id {id}"));
        }
        if let Some(u) = &a.username {
            bits.push(u.clone());
        }
        if let Some(n) = &a.name {
            bits.push(n.clone());
        }
        if let Some(b) = a.birthday {
            bits.push(format!("born {b}"));
        }
        if let Some(h) = a.height_cm {
            bits.push(format!("{h} cm"));
        }
        if let Some(tz) = &a.timezone {
            bits.push(format!("tz {tz}"));
        }
        let _ = writeln!(w, "  - {}", bits.join(", "));
    }

    let _ = writeln!(w, "\ndevices ({}):", report.devices.len());
    for d in &report.devices {
        let mut bits = vec![d.device_name.clone()];
        if d.device_identifier != d.device_name {
            bits.push(d.device_identifier.clone());
        }
        if let Some(mac) = &d.mac_address {
            bits.push(format!("mac {mac}"));
        }
        if let Some(fw) = &d.firmware_version {
            bits.push(format!("fw {fw}"));
        }
        let _ = writeln!(w, "  - {}", bits.join(", "));
    }

    let _ = writeln!(w, "\ncredentials ({}):", report.credentials.len());
    for c in &report.credentials {
        let _ = writeln!(w, "  - {}: {} ({})", c.kind.as_str(), c.value, c.origin);
    }
    out
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        // record write into an in-memory buffer cannot fail
        writer.write_record(&row).expect("csv write");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// CSV rendering: one `(file_name, content)` pair per report section.
pub fn render_csv(report: &Report) -> Vec<(String, String)> {
    let mut files = Vec::new();

    let mut meta = vec![vec!["key".to_string(), "value".to_string()]];
    meta.push(vec!["tool".into(), report.meta.tool.clone()]);
    meta.push(vec!["version".into(), report.meta.version.clone()]);
    meta.push(vec![
        "device_utc_offset_min".into(),
        report.meta.config.device_utc_offset_min.to_string(),
    ]);
    meta.push(vec![
        "match_window_s".into(),
        report.meta.config.match_window_s.to_string(),
    ]);
    meta.push(vec![
        "weight_tolerance_kg".into(),
        report.meta.config.weight_tolerance_kg.to_string(),
    ]);
    for input in &report.meta.inputs {
        meta.push(vec![format!("input {}", input.label), input.sha256.clone()]);
    }
    for (i, note) in report.meta.notes.iter().enumerate() {
        meta.push(vec![format!("note {}", i + 1), note.clone()]);
    }
    files.push(("meta.csv".to_string(), csv_string(meta)));

    let mut clusters = vec![vec![
        "cluster_id".to_string(),
        "timestamp_utc".to_string(),
        "weight_kg".to_string(),
        "user_id".to_string(),
        "sources".to_string(),
    ]];
    for c in &report.clusters {
        let sources: Vec<&str> = c.members.iter().map(|m| m.source.as_str()).collect();
        clusters.push(vec![
            c.cluster_id.clone(),
            crate::model::ts::to_string(&c.canonical_timestamp_utc),
            c.canonical_weight_kg.to_string(),
            opt(&c.user_id),
            sources.join(" "),
        ]);
    }
    files.push(("clusters.csv".to_string(), csv_string(clusters)));

    let mut matrix = vec![{
        let mut h = vec![
            "cluster_id".to_string(),
            "timestamp_utc".to_string(),
            "weight_kg".to_string(),
        ];
        h.extend(report.presence_matrix.columns.iter().map(|s| s.as_str().to_string()));
        h
    }];
    for row in &report.presence_matrix.rows {
        let mut r = vec![
            row.cluster_id.clone(),
            crate::model::ts::to_string(&row.timestamp_utc),
            row.weight_kg.to_string(),
        ];
        r.extend(row.cells.iter().map(|c| {
            match c {
                crate::correlate::Presence::Present => "present",
                crate::correlate::Presence::Absent => "absent",
                crate::correlate::Presence::NotApplicable => "not_applicable",
            }
            .to_string()
        }));
        matrix.push(r);
    }
    files.push(("presence_matrix.csv".to_string(), csv_string(matrix)));

    let mut findings = vec![vec![
        "rule_id".to_string(),
        "confidence".to_string(),
        "affected_clusters".to_string(),
        "supporting_evidence".to_string(),
    ]];
    for f in &report.findings {
        findings.push(vec![
            f.rule_id.as_str().to_string(),
            match f.confidence {
                crate::correlate::Confidence::Corroborated => "corroborated".to_string(),
                crate::correlate::Confidence::Uncorroborated => "uncorroborated".to_string(),
            },
            f.affected_clusters.join(" "),
            f.supporting_evidence.join("; "),
        ]);
    }
    files.push(("findings.csv".to_string(), csv_string(findings)));

    let mut timeline = vec![vec![
        "timestamp_utc".to_string(),
        "kind".to_string(),
        "cluster_id".to_string(),
        "rule_id".to_string(),
        "description".to_string(),
    ]];
    for e in &report.timeline {
        timeline.push(vec![
            crate::model::ts::to_string(&e.timestamp_utc),
            match e.kind {
                crate::correlate::EventKind::Reading => "reading".to_string(),
                crate::correlate::EventKind::Finding => "finding".to_string(),
            },
            e.cluster_id.clone().unwrap_or_default(),
            e.rule_id.map(|r| r.as_str().to_string()).unwrap_or_default(),
            e.description.clone(),
        ]);
    }
    files.push(("timeline.csv".to_string(), csv_string(timeline)));

    let mut accounts = vec![vec![
        "user_id".to_string(),
        "username".to_string(),
        "name".to_string(),
        "birthday".to_string(),
        "gender".to_string(),
        "height_cm".to_string(),
        "weight_kg".to_string(),
        "country".to_string(),
        "timezone".to_string(),
        "location".to_string(),
    ]];
    for a in &report.accounts {
        accounts.push(vec![
            opt(&a.user_id),
            opt(&a.username),
            opt(&a.name),
            opt(&a.birthday),
            a.gender.map(|g| g.as_str().to_string()).unwrap_or_default(),
            opt(&a.height_cm),
            opt(&a.weight_kg),
            opt(&a.country),
            opt(&a.timezone),
            opt(&a.location),
        ]);
    }
    files.push(("accounts.csv".to_string(), csv_string(accounts)));

    let mut devices = vec![vec![
        "device_name".to_string(),
        "device_identifier".to_string(),
        "device_type".to_string(),
        "mac_address".to_string(),
        "firmware_version".to_string(),
        "hardware_version".to_string(),
        "model_number".to_string(),
        "serial_number".to_string(),
    ]];
    for d in &report.devices {
        devices.push(vec![
            d.device_name.clone(),
            d.device_identifier.clone(),
            opt(&d.device_type),
            opt(&d.mac_address),
            opt(&d.firmware_version),
            opt(&d.hardware_version),
            opt(&d.model_number),
            opt(&d.serial_number),
        ]);
    }
    files.push(("devices.csv".to_string(), csv_string(devices)));

    let mut credentials = vec![vec![
        "kind".to_string(),
        "value".to_string(),
        "origin".to_string(),
    ]];
    for c in &report.credentials {
        credentials.push(vec![
            c.kind.as_str().to_string(),
            c.value.clone(),
            c.origin.clone(),
        ]);
    }
    files.push(("credentials.csv".to_string(), csv_string(credentials)));

    files
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carve::Fill;
    use crate::model::NormalizedReading;
    use chrono::NaiveDateTime;

    fn reading(source: Source, ts: &str, tenths: i32, user: Option<u32>) -> NormalizedReading {
        NormalizedReading {
            source,
            source_ref: format!("{} r", source.as_str()),
            user_id: user,
            timestamp_utc: NaiveDateTime::parse_from_str(ts, "%Y-%m-%d %H:%M:%S")
                .unwrap()
                .and_utc(),
            weight_kg: Deci::from_tenths(tenths),
            bmi: Some(Deci::from_tenths(259)),
            body_fat_pct: None,
            body_water_pct: None,
            muscle_kg: None,
            bone_kg: None,
            visceral_rating: None,
            calories: None,
            environment: None,
        }
    }

    fn sample_sets() -> Vec<EvidenceSet> {
        let mut scale = EvidenceSet::empty(Source::Scale, "dump.bin");
        scale.readings.push(reading(Source::Scale, "2019-05-15 16:27:36", 896, Some(1)));
        let mut cloud = EvidenceSet::empty(Source::Cloud, "export");
        cloud.readings.push(reading(Source::Cloud, "2019-05-15 16:27:36", 896, None));
        vec![scale, cloud]
    }

    #[test]
    fn report_composes_all_sections() {
        let sets = sample_sets();
        let refs: Vec<&EvidenceSet> = sets.iter().collect();
        let report = build_report(&refs, &[], ReportConfig::default(), vec![]);
        assert_eq!(report.clusters.len(), 1);
        assert_eq!(report.presence_matrix.rows.len(), 1);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].rule_id, crate::correlate::RuleId::R4Consistent);
        assert_eq!(report.timeline.len(), 2, "one reading event, one finding event");
        assert!(report.meta.notes[0].contains("cloud"), "weakness note always present");
    }

    #[test]
    fn json_is_deterministic_and_round_trips() {
        let sets = sample_sets();
        let refs: Vec<&EvidenceSet> = sets.iter().collect();
        let a = build_report(&refs, &[], ReportConfig::default(), vec![]);
        let b = build_report(&refs, &[], ReportConfig::default(), vec![]);
        let ja = to_json_string(&a).unwrap();
        let jb = to_json_string(&b).unwrap();
        assert_eq!(ja, jb);
        assert!(ja.ends_with('\n'));
        let back: Report = serde_json::from_str(&ja).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn input_order_does_not_change_the_report() {
        let sets = sample_sets();
        let fwd: Vec<&EvidenceSet> = sets.iter().collect();
        let rev: Vec<&EvidenceSet> = sets.iter().rev().collect();
        let a = build_report(&fwd, &[], ReportConfig::default(), vec![]);
        let b = build_report(&rev, &[], ReportConfig::default(), vec![]);
        assert_eq!(to_json_string(&a).unwrap(), to_json_string(&b).unwrap());
    }

    #[test]
    fn text_rendering_shows_matrix_and_findings() {
        let sets = sample_sets();
        let refs: Vec<&EvidenceSet> = sets.iter().collect();
        let report = build_report(&refs, &[], ReportConfig::default(), vec![]);
        let text = render_text(&report);
        assert!(text.contains("cluster-1"));
        assert!(text.contains("89.6"));
        assert!(text.contains("R4_consistent"));
        assert!(text.contains("2019-05-15T16:27:36Z"));
    }

    #[test]
    fn csv_rendering_emits_one_file_per_section() {
        let sets = sample_sets();
        let refs: Vec<&EvidenceSet> = sets.iter().collect();
        let report = build_report(&refs, &[], ReportConfig::default(), vec![]);
        let files = render_csv(&report);
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "meta.csv",
                "clusters.csv",
                "presence_matrix.csv",
                "findings.csv",
                "timeline.csv",
                "accounts.csv",
                "devices.csv",
                "credentials.csv"
            ]
        );
        let matrix = &files[2].1;
        assert!(matrix.starts_with("cluster_id,timestamp_utc,weight_kg,scale,android,ios,cloud"));
        assert!(matrix.contains("present"));
        assert!(matrix.contains("not_applicable"), "apps undeclared in sample");
    }

    #[test]
    fn carve_output_serializes_and_regions_read_back() {
        let dump = DumpImage::from_bytes(vec![0u8; 64], "test.bin");
        let regions = vec![ZeroRegion { start_offset: 0, length: 64, fill: Fill::Zeros }];
        let artifact = CarveOutput::new(&dump, vec![], regions.clone());
        let json = to_json_string(&artifact).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("carve.json");
        std::fs::write(&path, json).unwrap();
        assert_eq!(read_zero_regions(&path).unwrap(), regions);
    }
}
