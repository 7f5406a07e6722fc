//! Blueprint dependency manifests and the engine-wide catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackagePin {
    pub name: String,
    pub version: String,
}

/// `blueprint.manifest`: what one blueprint imports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyManifest {
    pub runtime: String,
    #[serde(default)]
    pub packages: Vec<PackagePin>,
}

/// `catalog.manifest`: allowlisted packages per runtime.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyCatalog {
    #[serde(default)]
    pub v: u32,
    pub runtimes: BTreeMap<String, BTreeSet<PackagePin>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unparseable manifest at line {line}, column {column}: {message}")]
pub struct ManifestParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownRuntime { runtime: String },
    NotPinned { name: String, version: String },
    NotInCatalog { name: String, version: String },
    Duplicate { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestVerdict {
    pub accepted: bool,
    pub violations: Vec<Violation>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ManifestParseError> {
    serde_json::from_str(text).map_err(|e| ManifestParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

impl DependencyManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestParseError> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManifestParseError {
            line: 0,
            column: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// The package set this manifest resolves to.
    pub fn resolve(&self) -> BTreeSet<PackagePin> {
        self.packages.iter().cloned().collect()
    }
}

impl DependencyCatalog {
    pub fn parse(text: &str) -> Result<Self, ManifestParseError> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManifestParseError {
            line: 0,
            column: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }
}

/// Exact versions only: dot-separated numeric components with an optional
/// alphanumeric suffix on the last one (`2.31.0`, `1.0.0rc1`). Ranges,
/// wildcards and comparison operators are rejected.
pub fn is_pinned(version: &str) -> bool {
    let parts: Vec<&str> = version.split('.').collect();
    !version.is_empty()
        && parts.iter().enumerate().all(|(i, part)| {
            let digits = part.chars().take_while(|c| c.is_ascii_digit()).count();
            let rest = &part[digits..];
            digits > 0
                && (rest.is_empty()
                    || (i == parts.len() - 1 && rest.chars().all(|c| c.is_ascii_alphanumeric())))
        })
}

/// Accept iff every (package, version) is pinned and catalogued for the
/// manifest's runtime. Lists every violation, not just the first.
pub fn validate_manifest(
    manifest: &DependencyManifest,
    catalog: &DependencyCatalog,
) -> ManifestVerdict {
    let mut violations = Vec::new();
    let allowed = catalog.runtimes.get(&manifest.runtime);
    if allowed.is_none() {
        violations.push(Violation::UnknownRuntime {
            runtime: manifest.runtime.clone(),
        });
    }
    let mut seen = BTreeSet::new();
    for pin in &manifest.packages {
        if !seen.insert(pin.name.as_str()) {
            violations.push(Violation::Duplicate {
                name: pin.name.clone(),
            });
            continue;
        }
        if !is_pinned(&pin.version) {
            violations.push(Violation::NotPinned {
                name: pin.name.clone(),
                version: pin.version.clone(),
            });
        } else if allowed.is_some_and(|set| !set.contains(pin)) {
            violations.push(Violation::NotInCatalog {
                name: pin.name.clone(),
                version: pin.version.clone(),
            });
        }
    }
    ManifestVerdict {
        accepted: violations.is_empty(),
        violations,
    }
}
