//! Forensic toolkit for a smart-scale IoT ecosystem.
//!
//! A body-composition scale keeps its reading history in raw flash; the
//! companion Android/iOS apps mirror those readings into SQLite databases,
//! and the vendor cloud keeps a third copy. When someone wipes an app,
//! deletes a reading, or removes their profile from the scale, the copies
//! disagree — and the disagreement pattern is itself evidence.
//!
//! This crate decodes the scale's 26-byte record format ([`record`]), carves
//! records and zero-overwritten regions out of flash dumps ([`carve`]),
//! parses app databases / preference files / cloud exports into a common
//! model ([`ingest`]), and cross-correlates everything into a presence
//! matrix, manipulation findings, and a timeline ([`correlate`], [`report`]).
//! [`fixtures`] generates internally consistent synthetic ecosystems used as
//! the independent oracle for the rest of the crate.

pub mod carve;
pub mod correlate;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod model;
pub mod record;
pub mod report;
pub mod units;

pub use error::{Error, Result};

// Every fenced Rust block in the guide compiles and runs as a doc-test of
// this crate, so the book cannot drift from the code it documents.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/record-format.md")]
    mod record_format {}
    #[doc = include_str!("../../../book/src/carving.md")]
    mod carving {}
    #[doc = include_str!("../../../book/src/evidence-sources.md")]
    mod evidence_sources {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/fixtures.md")]
    mod fixtures_guide {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
