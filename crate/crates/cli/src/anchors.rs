//! The checked-in table mapping check ids to anchors and default tolerances.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

const TABLE: &str = include_str!("../anchors.toml");
const MANIFEST: &str = include_str!("../anchors.manifest");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub anchor: String,
    pub tolerance: f64,
}

/// Anchors keyed by `"<suite>.<check>"`.
pub fn table() -> &'static BTreeMap<String, Anchor> {
    static CELL: OnceLock<BTreeMap<String, Anchor>> = OnceLock::new();
    CELL.get_or_init(|| {
        let nested: BTreeMap<String, BTreeMap<String, Anchor>> =
            toml::from_str(TABLE).expect("anchors.toml is valid");
        nested
            .into_iter()
            .flat_map(|(suite, checks)| {
                checks
                    .into_iter()
                    .map(move |(check, a)| (format!("{suite}.{check}"), a))
            })
            .collect()
    })
}

/// In-scope items that some anchor must mention.
pub fn manifest() -> Vec<&'static str> {
    MANIFEST
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .collect()
}

/// Manifest items not contained in any anchor string.
pub fn uncovered() -> Vec<&'static str> {
    let anchors: Vec<&str> = table().values().map(|a| a.anchor.as_str()).collect();
    manifest()
        .into_iter()
        .filter(|item| !anchors.iter().any(|a| a.contains(item)))
        .collect()
}
