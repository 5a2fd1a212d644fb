//! `scalefx` — investigator-facing command line over the scalefx-core
//! pipeline: decode, carve, diff, ingest, correlate, synth, report.
//!
//! Exit codes: 0 success, 1 usage, 2 input unreadable, 3 parse/schema
//! error, 4 internal invariant violation. Failures additionally emit a
//! single-line machine-readable JSON object on stderr. Stdout carries the
//! requested artifact (canonical JSON unless a text rendering was asked
//! for); row-level ingest warnings go to stderr so they never contaminate
//! machine output.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use scalefx_core::carve::{carve, detect_zero_regions, diff_dumps, CarveConfig, DumpImage};
use scalefx_core::correlate::DEFAULT_MATCH_WINDOW_S;
use scalefx_core::fixtures::{canonical_paper_scenario, random_script, write_scenario};
use scalefx_core::ingest::{ingest, interchange, IngestOptions};
use scalefx_core::model::{EvidenceSet, Source};
use scalefx_core::record::{decode_bytes, RecordView, DEFAULT_DEVICE_UTC_OFFSET_MIN, RECORD_LEN};
use scalefx_core::report::{
    build_report, read_zero_regions, render_csv, render_text, to_json_string, CarveOutput,
    InputDigest, Report, ReportConfig,
};
use scalefx_core::units::Deci;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

const EXIT_USAGE: i32 = 1;
const EXIT_UNREADABLE: i32 = 2;
const EXIT_PARSE: i32 = 3;
const EXIT_INTERNAL: i32 = 4;

#[derive(Parser)]
#[command(
    name = "scalefx",
    version,
    about = "Decode, carve, and cross-correlate residual data from a smart-scale ecosystem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Clock handling shared by the subcommands that normalize timestamps.
#[derive(Args, Debug)]
struct TimeArgs {
    /// Minutes added to scale-stored timestamps to reach UTC
    /// (flag beats SCALEFX_UTC_OFFSET_MIN, which beats the built-in +180)
    #[arg(
        long,
        value_name = "MINUTES",
        env = "SCALEFX_UTC_OFFSET_MIN",
        default_value_t = DEFAULT_DEVICE_UTC_OFFSET_MIN,
        allow_negative_numbers = true,
        value_parser = parse_offset_min
    )]
    utc_offset_min: i32,
}

#[derive(Subcommand)]
enum Command {
    /// Decode one 26-byte record from a dump and print its fields
    Decode {
        /// Flash dump file
        dump: PathBuf,
        /// Byte offset of the record inside the dump
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long, value_enum, default_value_t = DecodeFormat::Text)]
        format: DecodeFormat,
    },
    /// Scan a dump for valid records and zero-filled regions
    Carve {
        /// Flash dump file
        dump: PathBuf,
        /// Only accept records with this user id (repeatable)
        #[arg(long = "allow-user", value_name = "USER_ID")]
        allow_user: Vec<u32>,
        /// Scan stride in bytes
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Write the JSON artifact here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare two same-sized dumps of one flash region
    Diff {
        before: PathBuf,
        after: PathBuf,
        /// Write the JSON report here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Parse one evidence source into interchange JSON
    Ingest {
        /// Evidence kind the path holds
        #[arg(long, value_enum)]
        source: SourceArg,
        /// Dump file, app extraction directory, or cloud export directory
        path: PathBuf,
        /// Timezone offset (minutes east of UTC) assumed for app and cloud
        /// local timestamps when the artifact declares none
        #[arg(
            long,
            value_name = "MINUTES",
            default_value_t = 0,
            allow_negative_numbers = true,
            value_parser = parse_offset_min
        )]
        tz_offset_min: i32,
        #[command(flatten)]
        time: TimeArgs,
        /// Write the interchange document here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Correlate interchange sets into the full report
    Correlate {
        /// Interchange documents produced by `ingest`, one per source
        #[arg(required = true, value_name = "SET.json")]
        sets: Vec<PathBuf>,
        /// Carve artifact whose zero regions corroborate scale-side deletion
        #[arg(long, value_name = "FILE")]
        zero_regions: Option<PathBuf>,
        /// Cluster match window, seconds
        #[arg(long, value_name = "SECONDS", default_value_t = DEFAULT_MATCH_WINDOW_S)]
        window_s: i64,
        /// Cluster weight tolerance, kilograms
        #[arg(long, value_name = "KG", default_value_t = 0.1)]
        weight_tol: f64,
        #[command(flatten)]
        time: TimeArgs,
        /// Write the report JSON here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scale/app/cloud ecosystem with known ground truth
    Synth {
        #[arg(long, value_enum)]
        scenario: Scenario,
        /// Seed for dump layout (and, for `random`, the script itself)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to create the snapshot tree under
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Render a correlation report as text, CSV files, or canonical JSON
    Report {
        /// Report JSON produced by `correlate`
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderFormat::Text)]
        format: RenderFormat,
        /// Output file, or output directory for CSV (required for CSV)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecodeFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderFormat {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Scale,
    Android,
    Ios,
    Cloud,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Source {
        match s {
            SourceArg::Scale => Source::Scale,
            SourceArg::Android => Source::Android,
            SourceArg::Ios => Source::Ios,
            SourceArg::Cloud => Source::Cloud,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    /// The built-in four-day reference scenario
    Paper,
    /// A seed-derived script: 1-5 readings, up to six manipulations
    Random,
}

fn parse_offset_min(raw: &str) -> Result<i32, String> {
    let v: i32 = raw.parse().map_err(|_| format!("`{raw}` is not a whole number of minutes"))?;
    if (-1440..=1440).contains(&v) {
        Ok(v)
    } else {
        Err(format!("offset {v} is outside [-1440, 1440] minutes"))
    }
}

/// A failure ready for the stderr JSON channel.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn unreadable(path: &Path, err: &std::io::Error) -> Self {
        Failure { code: EXIT_UNREADABLE, message: format!("{}: {err}", path.display()) }
    }

    fn kind(&self) -> &'static str {
        match self.code {
            EXIT_USAGE => "usage",
            EXIT_UNREADABLE => "unreadable",
            EXIT_PARSE => "parse",
            _ => "internal",
        }
    }

    fn emit(&self) {
        let doc = serde_json::json!({
            "error": { "exit_code": self.code, "kind": self.kind(), "message": self.message }
        });
        eprintln!("{doc}");
    }
}

impl From<scalefx_core::Error> for Failure {
    fn from(e: scalefx_core::Error) -> Self {
        Failure { code: e.exit_code(), message: e.to_string() }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                std::process::exit(0);
            }
            let failure = Failure::usage(err.render().to_string());
            failure.emit();
            std::process::exit(EXIT_USAGE);
        }
    };
    // A panic is a tool bug, never an evidence problem: report it on the
    // same stderr channel and reserve exit 4 for it.
    std::panic::set_hook(Box::new(|_| {}));
    let code = match std::panic::catch_unwind(move || run(cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(failure)) => {
            failure.emit();
            failure.code
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unidentified panic".to_string());
            let failure = Failure { code: EXIT_INTERNAL, message };
            failure.emit();
            EXIT_INTERNAL
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Decode { dump, offset, format } => cmd_decode(&dump, offset, format),
        Command::Carve { dump, allow_user, stride, out } => {
            cmd_carve(&dump, &allow_user, stride, out.as_deref())
        }
        Command::Diff { before, after, out } => cmd_diff(&before, &after, out.as_deref()),
        Command::Ingest { source, path, tz_offset_min, time, out } => {
            cmd_ingest(source.into(), &path, tz_offset_min, &time, out.as_deref())
        }
        Command::Correlate { sets, zero_regions, window_s, weight_tol, time, out } => cmd_correlate(
            &sets,
            zero_regions.as_deref(),
            window_s,
            weight_tol,
            &time,
            out.as_deref(),
        ),
        Command::Synth { scenario, seed, out } => cmd_synth(scenario, seed, &out),
        Command::Report { report, format, out } => cmd_report(&report, format, out.as_deref()),
    }
}

/// Route finished output to `--out` or stdout.
fn deliver(out: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, contents).map_err(|e| Failure::unreadable(path, &e)),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Core errors name tables and rows but not files; put the path back in
/// front so a multi-input invocation stays diagnosable.
fn with_path(path: &Path, e: scalefx_core::Error) -> Failure {
    let mut failure = Failure::from(e);
    failure.message = format!("{}: {}", path.display(), failure.message);
    failure
}

fn read_dump(path: &Path) -> Result<DumpImage, Failure> {
    DumpImage::load(path).map_err(|e| with_path(path, e))
}

fn cmd_decode(dump: &Path, offset: usize, format: DecodeFormat) -> Result<(), Failure> {
    let image = read_dump(dump)?;
    let end = offset.checked_add(RECORD_LEN).filter(|end| *end <= image.len());
    let window = end.map(|end| &image.bytes()[offset..end]).ok_or_else(|| Failure {
        code: EXIT_PARSE,
        message: format!(
            "offset {offset} leaves fewer than {RECORD_LEN} bytes in a {}-byte dump",
            image.len()
        ),
    })?;
    let view = decode_bytes(window)?.view();
    match format {
        DecodeFormat::Json => deliver(None, &to_json_string(&view)?),
        DecodeFormat::Text => deliver(None, &decode_table(&view)),
    }
}

fn decode_table(view: &RecordView) -> String {
    fn u<T: std::fmt::Display>(v: &Option<T>, unit: &str) -> String {
        match v {
            Some(v) if unit.is_empty() => v.to_string(),
            Some(v) => format!("{v} {unit}"),
            None => "not recorded".to_string(),
        }
    }
    let rows: Vec<(&str, String)> = vec![
        ("user id", view.user_id.to_string()),
        ("date", view.date.to_string()),
        ("device time", view.device_time.to_string()),
        ("weight", u(&view.weight_kg, "kg")),
        ("bmi", u(&view.bmi, "")),
        ("body fat", u(&view.body_fat_pct, "%")),
        ("body water", u(&view.body_water_pct, "%")),
        ("muscle", u(&view.muscle_kg, "kg")),
        ("bone", u(&view.bone_kg, "kg")),
        ("visceral rating", u(&view.visceral_rating, "")),
        ("opaque bytes", view.opaque_hex.clone()),
        ("gender", view.gender.as_str().to_string()),
        ("height", format!("{} cm", view.height_cm)),
        ("age", format!("{} y", view.age_years)),
    ];
    let mut table = String::new();
    for (name, value) in rows {
        table.push_str(&format!("{name:<16} {value}\n"));
    }
    table
}

fn cmd_carve(
    dump: &Path,
    allow_user: &[u32],
    stride: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if stride == 0 {
        return Err(Failure::usage("--stride must be at least 1"));
    }
    let image = read_dump(dump)?;
    let cfg = CarveConfig {
        stride,
        user_id_allowlist: if allow_user.is_empty() {
            None
        } else {
            Some(allow_user.iter().copied().collect::<BTreeSet<u32>>())
        },
        ..CarveConfig::default()
    };
    let hits = carve(&image, &cfg);
    let regions = detect_zero_regions(&image, RECORD_LEN)?;
    let artifact = CarveOutput::new(&image, hits, regions);
    deliver(out, &to_json_string(&artifact)?)
}

fn cmd_diff(before: &Path, after: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let before = read_dump(before)?;
    let after = read_dump(after)?;
    let report = diff_dumps(&before, &after)?;
    deliver(out, &to_json_string(&report)?)
}

fn cmd_ingest(
    source: Source,
    path: &Path,
    tz_offset_min: i32,
    time: &TimeArgs,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let opts = IngestOptions {
        device_utc_offset_min: time.utc_offset_min,
        default_tz_offset_min: tz_offset_min,
        ..IngestOptions::default()
    };
    let ingested = ingest(source, path, &opts).map_err(|e| with_path(path, e))?;
    for warning in &ingested.warnings {
        eprintln!("warning: {warning}");
    }
    deliver(out, &interchange::to_json_string(&ingested.set)?)
}

fn cmd_correlate(
    sets: &[PathBuf],
    zero_regions: Option<&Path>,
    window_s: i64,
    weight_tol: f64,
    time: &TimeArgs,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if window_s <= 0 {
        return Err(Failure::usage("--window-s must be positive"));
    }
    if !(weight_tol > 0.0 && weight_tol.is_finite()) {
        return Err(Failure::usage("--weight-tol must be a positive number"));
    }
    let mut inputs = Vec::new();
    let mut parsed: Vec<EvidenceSet> = Vec::new();
    for path in sets {
        inputs.push(InputDigest::from_path(path).map_err(|e| with_path(path, e))?);
        parsed.push(interchange::read_set(path).map_err(|e| with_path(path, e))?);
    }
    let regions = match zero_regions {
        Some(path) => {
            inputs.push(InputDigest::from_path(path).map_err(|e| with_path(path, e))?);
            read_zero_regions(path).map_err(|e| with_path(path, e))?
        }
        None => Vec::new(),
    };
    let config = ReportConfig {
        device_utc_offset_min: time.utc_offset_min,
        match_window_s: window_s,
        weight_tolerance_kg: Deci::from_f64(weight_tol),
    };
    let refs: Vec<&EvidenceSet> = parsed.iter().collect();
    let report = build_report(&refs, &regions, config, inputs);
    deliver(out, &to_json_string(&report)?)
}

fn cmd_synth(scenario: Scenario, seed: u64, out: &Path) -> Result<(), Failure> {
    let script = match scenario {
        Scenario::Paper => canonical_paper_scenario(),
        Scenario::Random => random_script(seed),
    };
    std::fs::create_dir_all(out).map_err(|e| Failure::unreadable(out, &e))?;
    let script_path = out.join("script.json");
    std::fs::write(&script_path, to_json_string(&script)?)
        .map_err(|e| Failure::unreadable(&script_path, &e))?;
    let dirs = write_scenario(&script, seed, out)?;
    let mut listing = format!("{}\n", script_path.display());
    for dir in dirs {
        listing.push_str(&format!("{}\n", dir.display()));
    }
    deliver(None, &listing)
}

fn cmd_report(path: &Path, format: RenderFormat, out: Option<&Path>) -> Result<(), Failure> {
    let raw = std::fs::read_to_string(path).map_err(|e| Failure::unreadable(path, &e))?;
    let report: Report = serde_json::from_str(&raw).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    })?;
    match format {
        RenderFormat::Text => deliver(out, &render_text(&report)),
        RenderFormat::Json => deliver(out, &to_json_string(&report)?),
        RenderFormat::Csv => {
            let dir = out.ok_or_else(|| {
                Failure::usage("--format csv writes one file per section; pass --out <DIR>")
            })?;
            std::fs::create_dir_all(dir).map_err(|e| Failure::unreadable(dir, &e))?;
            let mut listing = String::new();
            for (name, contents) in render_csv(&report) {
                let file = dir.join(name);
                std::fs::write(&file, contents).map_err(|e| Failure::unreadable(&file, &e))?;
                listing.push_str(&format!("{}\n", file.display()));
            }
            deliver(None, &listing)
        }
    }
}
