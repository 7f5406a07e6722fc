use std::fmt;

use agent_core::config::Toggles;
use serde::{Deserialize, Serialize};

/// Agent under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Blueprint,
    Fc,
    React,
    Act,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Blueprint, Variant::Fc, Variant::React, Variant::Act];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Blueprint => "blueprint",
            Variant::Fc => "fc",
            Variant::React => "react",
            Variant::Act => "act",
        }
    }

    pub fn parse(name: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn is_baseline(self) -> bool {
        self != Variant::Blueprint
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Agent variant plus the workflow toggles it runs with. Toggles only
/// affect the blueprint variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentSetup {
    pub variant: Variant,
    pub dc: bool,
    pub rt: bool,
}

impl AgentSetup {
    pub fn blueprint(dc: bool, rt: bool) -> Self {
        AgentSetup { variant: Variant::Blueprint, dc, rt }
    }

    pub fn baseline(variant: Variant) -> Self {
        AgentSetup { variant, dc: false, rt: false }
    }

    pub fn toggles(&self) -> Toggles {
        Toggles {
            dc_enabled: self.dc,
            consolidated_tools: self.rt,
        }
    }

    /// Short label, e.g. `blueprint[dc,rt]` or `fc`.
    pub fn label(&self) -> String {
        if self.variant.is_baseline() {
            return self.variant.name().to_string();
        }
        let on: Vec<&str> = [("dc", self.dc), ("rt", self.rt)]
            .into_iter()
            .filter_map(|(n, v)| v.then_some(n))
            .collect();
        format!("blueprint[{}]", on.join(","))
    }
}
