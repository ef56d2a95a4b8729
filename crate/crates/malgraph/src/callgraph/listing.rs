//! Canonical call-listing documents.
//!
//! One document describes one application: its id, ground-truth label when
//! known, and per-method call sequences in execution order. A corpus file is
//! a sequence of such documents, one JSON document per line. Unknown fields
//! are ignored so corpora can carry extra annotations.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth label attached to a listing or graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malware,
    Unknown,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Benign => "benign",
            Label::Malware => "malware",
            Label::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Whether a call site targets an API identifier or another method of the
/// same application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallKind {
    Api,
    Method,
}

/// One call instruction inside a method body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallItem {
    pub kind: CallKind,
    pub target: String,
}

impl CallItem {
    pub fn api(target: impl Into<String>) -> Self {
        CallItem { kind: CallKind::Api, target: target.into() }
    }

    pub fn method(target: impl Into<String>) -> Self {
        CallItem { kind: CallKind::Method, target: target.into() }
    }
}

/// A method body as an ordered list of calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodListing {
    pub name: String,
    pub calls: Vec<CallItem>,
}

/// One application's call listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallListing {
    pub app_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<NaiveDate>,
    pub methods: Vec<MethodListing>,
}

impl CallListing {
    /// Names of all declared methods, used to resolve method-call targets.
    pub fn method_names(&self) -> std::collections::BTreeSet<&str> {
        self.methods.iter().map(|m| m.name.as_str()).collect()
    }
}

/// Parse one listing document. Errors name the offending field path, and
/// duplicate method names are rejected.
pub fn parse_call_listing(text: &str) -> Result<CallListing> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let listing: CallListing = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        location: format!("field {}", e.path()),
        detail: e.inner().to_string(),
    })?;
    validate_listing(&listing)?;
    Ok(listing)
}

fn validate_listing(listing: &CallListing) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for method in &listing.methods {
        if !seen.insert(method.name.as_str()) {
            return Err(Error::Validation(format!(
                "app {}: method {} declared more than once",
                listing.app_id, method.name
            )));
        }
    }
    if listing.app_id.is_empty() {
        return Err(Error::Validation("app_id must not be empty".into()));
    }
    Ok(())
}

/// Serialize a listing to its canonical single-line document.
pub fn serialize_call_listing(listing: &CallListing) -> String {
    serde_json::to_string(listing).expect("listing serialization cannot fail")
}

/// Read a corpus file: one listing per line, blank lines allowed.
pub fn load_corpus(path: &Path) -> Result<Vec<CallListing>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut listings = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let listing = parse_call_listing(&line).map_err(|e| match e {
            Error::Parse { location, detail } => Error::Parse {
                location: format!("{}:{} {}", path.display(), line_no + 1, location),
                detail,
            },
            other => other,
        })?;
        listings.push(listing);
    }
    Ok(listings)
}

/// Write a corpus in canonical form.
pub fn write_corpus(out: &mut impl Write, listings: &[CallListing]) -> std::io::Result<()> {
    for listing in listings {
        writeln!(out, "{}", serialize_call_listing(listing))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_document_parses() {
        let text = r#"{"app_id":"a1","label":"benign","methods":[{"name":"m1","calls":[{"kind":"api","target":"Lx/Y;->z()V"}]}]}"#;
        let listing = parse_call_listing(text).unwrap();
        assert_eq!(listing.app_id, "a1");
        assert_eq!(listing.label, Label::Benign);
        assert_eq!(listing.methods[0].calls[0].kind, CallKind::Api);
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let text = r#"{"app_id":"a1","label":"malware","sha256":"ff","methods":[]}"#;
        let listing = parse_call_listing(text).unwrap();
        assert_eq!(listing.label, Label::Malware);
    }

    #[test]
    fn bad_kind_error_names_the_field() {
        let text = r#"{"app_id":"a1","label":"benign","methods":[{"name":"m1","calls":[{"kind":"jump","target":"x"}]}]}"#;
        let err = parse_call_listing(text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("methods[0].calls[0].kind"),
            "error should name the offending field: {msg}"
        );
    }

    #[test]
    fn duplicate_method_names_are_rejected() {
        let text = r#"{"app_id":"a1","label":"benign","methods":[{"name":"m1","calls":[]},{"name":"m1","calls":[]}]}"#;
        assert!(matches!(parse_call_listing(text), Err(Error::Validation(_))));
    }

    #[test]
    fn timestamp_parses_iso_dates() {
        let text = r#"{"app_id":"a1","label":"benign","timestamp":"2019-07-14","methods":[]}"#;
        let listing = parse_call_listing(text).unwrap();
        assert_eq!(listing.timestamp, Some(NaiveDate::from_ymd_opt(2019, 7, 14).unwrap()));
    }

    fn identifier() -> impl Strategy<Value = String> {
        "[a-zA-Z][a-zA-Z0-9_/;>$().-]{0,24}"
    }

    fn arb_listing() -> impl Strategy<Value = CallListing> {
        let call = prop_oneof![
            identifier().prop_map(CallItem::api),
            identifier().prop_map(CallItem::method),
        ];
        let method = (0usize..8, proptest::collection::vec(call, 0..6)).prop_map(|(i, calls)| {
            MethodListing { name: format!("m{i}"), calls }
        });
        (
            "[a-z0-9-]{1,12}",
            prop_oneof![Just(Label::Benign), Just(Label::Malware), Just(Label::Unknown)],
            proptest::option::of("[a-z]{1,8}"),
            proptest::option::of((2000i32..2030, 1u32..13, 1u32..29)),
            proptest::collection::vec(method, 0..5),
        )
            .prop_map(|(app_id, label, family, date, mut methods)| {
                // Deduplicate the generated method names so the listing is valid.
                let mut seen = std::collections::BTreeSet::new();
                methods.retain(|m| seen.insert(m.name.clone()));
                CallListing {
                    app_id,
                    label,
                    family,
                    timestamp: date.map(|(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).unwrap()),
                    methods,
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn serialize_parse_round_trip(listing in arb_listing()) {
            let text = serialize_call_listing(&listing);
            let back = parse_call_listing(&text).unwrap();
            prop_assert_eq!(back, listing);
        }
    }
}
