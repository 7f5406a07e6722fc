//! Scripted user. Lines are released in order; a line with a trigger waits
//! until the last assistant message contains it.

use agent_blueprints::workflows::assistant::STOP_TOKEN;

use crate::task::ScriptLine;

/// Utterance sent when the next line's trigger has not appeared yet.
pub const PROCEED: &str = "proceed";

/// How many times the simulator says [`PROCEED`] before giving up.
pub const MAX_PROCEEDS: u32 = 2;

#[derive(Debug, Clone)]
pub struct UserSimulator {
    script: Vec<ScriptLine>,
    next: usize,
    proceeds: u32,
    said: Vec<String>,
}

impl UserSimulator {
    pub fn new(script: &[ScriptLine]) -> Self {
        UserSimulator {
            script: script.to_vec(),
            next: 0,
            proceeds: 0,
            said: Vec::new(),
        }
    }

    /// The opening utterance.
    pub fn first(&mut self) -> String {
        self.respond("")
    }

    /// Reply to `last_assistant`. Returns [`STOP_TOKEN`] once the script
    /// is exhausted or the fallback budget is spent.
    pub fn respond(&mut self, last_assistant: &str) -> String {
        let text = match self.script.get(self.next) {
            Some(line) if line.trigger.as_deref().is_none_or(|t| last_assistant.contains(t)) => {
                self.next += 1;
                line.utterance.clone()
            }
            Some(_) if self.proceeds < MAX_PROCEEDS => {
                self.proceeds += 1;
                PROCEED.to_string()
            }
            _ => STOP_TOKEN.to_string(),
        };
        if text != STOP_TOKEN {
            self.said.push(text.clone());
        }
        text
    }

    /// Utterances delivered so far, excluding the stop token.
    pub fn said(&self) -> &[String] {
        &self.said
    }

    pub fn finished(&self) -> bool {
        self.next == self.script.len()
    }
}

pub fn is_stop(text: &str) -> bool {
    text.contains(STOP_TOKEN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(utterance: &str, trigger: Option<&str>) -> ScriptLine {
        ScriptLine {
            utterance: utterance.into(),
            trigger: trigger.map(str::to_string),
        }
    }

    #[test]
    fn triggers_gate_lines_and_fallback_is_bounded() {
        let mut sim = UserSimulator::new(&[line("cancel #1", None), line("yes", Some("Shall I proceed?"))]);
        assert_eq!(sim.first(), "cancel #1");
        assert_eq!(sim.respond("Looking into it."), PROCEED);
        assert_eq!(sim.respond("Shall I proceed?"), "yes");
        assert!(sim.finished());
        assert!(is_stop(&sim.respond("Done.")));
        assert_eq!(sim.said(), ["cancel #1", "proceed", "yes"]);

        let mut stuck = UserSimulator::new(&[line("hi", None), line("never", Some("unmatched"))]);
        stuck.first();
        for _ in 0..MAX_PROCEEDS {
            assert_eq!(stuck.respond("x"), PROCEED);
        }
        assert!(is_stop(&stuck.respond("x")));
    }
}
