//! Android shared-preferences XML reader.
//!
//! The app keeps account plumbing in preference files shaped like
//!
//! ```xml
//! <?xml version='1.0' encoding='utf-8' standalone='yes' ?>
//! <map>
//!     <string name="email">jdoe@example.com</string>
//!     <string name="access_token">…</string>
//! </map>
//! ```
//!
//! Only `<string>` entries matter here; other preference types are skipped.

use crate::error::{Error, Result};
use quick_xml::events::Event;
use quick_xml::{Reader, XmlVersion};
use std::collections::BTreeMap;

pub(crate) fn parse_prefs(xml: &str) -> Result<BTreeMap<String, String>> {
    let mut reader = Reader::from_str(xml);
    let mut entries = BTreeMap::new();
    let mut current_key: Option<String> = None;
    let mut current_value = String::new();
    loop {
        match reader.read_event().map_err(Error::Xml)? {
            Event::Start(e) if e.name().as_ref() == b"string" => {
                let mut key = None;
                for attr in e.attributes() {
                    let attr = attr.map_err(|e| Error::InvalidInput(format!("bad attribute: {e}")))?;
                    if attr.key.as_ref() == b"name" {
                        key = Some(
                            attr.normalized_value(XmlVersion::Implicit1_0)
                                .map_err(Error::Xml)?
                                .into_owned(),
                        );
                    }
                }
                current_key = key;
                current_value.clear();
            }
            Event::Text(t) => {
                if current_key.is_some() {
                    let text = t.xml10_content().map_err(|e| Error::Xml(e.into()))?;
                    current_value.push_str(&text);
                }
            }
            Event::GeneralRef(r) => {
                if current_key.is_some() {
                    let name = r.decode().map_err(|e| Error::Xml(e.into()))?;
                    let resolved = match name.as_ref() {
                        "amp" => '&',
                        "lt" => '<',
                        "gt" => '>',
                        "apos" => '\'',
                        "quot" => '"',
                        _ => r
                            .resolve_char_ref()
                            .map_err(Error::Xml)?
                            .ok_or_else(|| {
                                Error::InvalidInput(format!("unresolvable entity &{name};"))
                            })?,
                    };
                    current_value.push(resolved);
                }
            }
            Event::End(e) if e.name().as_ref() == b"string" => {
                if let Some(key) = current_key.take() {
                    entries.insert(key, std::mem::take(&mut current_value));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(entries)
}
