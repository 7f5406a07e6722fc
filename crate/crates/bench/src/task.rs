//! Benchmark tasks: the simulated user's script, the expected outcome, and
//! the scripted model behaviour for each agent variant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domains::{state_hash, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub utterance: String,
    /// Substring of the last assistant message that releases this line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// JSON merge patch from the initial state to the golden final state.
    pub patch: Value,
    pub state_hash: String,
}

/// One user turn of the blueprint agent: either a direct reply, or an
/// intent the extraction node selects and the reply that words its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanTurn {
    Say {
        say: String,
    },
    Intent {
        intent: String,
        args: Value,
        /// Validator answer when the intent reaches the double-check gate.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        verdict: Option<String>,
        reply: String,
        /// Reply used instead of `reply` when the gate is enabled.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        revise_reply: Option<String>,
    },
}

/// One model step of a baseline trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaselineStep {
    Tool {
        tool: String,
        args: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thought: Option<String>,
    },
    Respond {
        respond: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thought: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub domain: Domain,
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    pub user_script: Vec<ScriptLine>,
    pub required_outputs: Vec<String>,
    pub expected: Expected,
    pub plan: Vec<PlanTurn>,
    pub baseline: Vec<BaselineStep>,
    /// Per-variant trajectories that differ from `baseline`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub baseline_overrides: BTreeMap<String, Vec<BaselineStep>>,
}

impl Task {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    pub fn is_conflict(&self) -> bool {
        self.has_tag("conflict")
    }

    pub fn is_case_study(&self) -> bool {
        self.has_tag("case_study")
    }

    pub fn baseline_for(&self, variant: &str) -> &[BaselineStep] {
        self.baseline_overrides
            .get(variant)
            .map(Vec::as_slice)
            .unwrap_or(&self.baseline)
    }

    /// The golden final state: `initial` with the expected patch applied.
    pub fn expected_state(&self, initial: &Value) -> Value {
        let mut state = initial.clone();
        json_patch::merge(&mut state, &self.expected.patch);
        state
    }

    /// Hash of the golden final state, recomputed from the patch.
    pub fn golden_hash(&self, initial: &Value) -> String {
        state_hash(&self.expected_state(initial))
    }
}
