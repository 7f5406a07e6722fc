//! Stub blueprint interpreter speaking the engine protocol with raw frames,
//! plus the reference workflows it runs.
//!
//! A blueprint here is a `.bp` file naming a workflow and its parameters.
//! The interpreter is registered with the engine under the `rawframe`
//! runtime tag and exits 0 after `finish`, 64 when the engine address is
//! missing and 65 on a protocol failure.

pub mod client;
pub mod dc;
pub mod workflows;

use std::path::Path;

pub use client::{Client, EXIT_MISSING_ENV, EXIT_PROTOCOL};

/// Runtime tag under which the interpreter is registered.
pub const RUNTIME_TAG: &str = "rawframe";

/// Exit code for an unreadable or invalid `.bp` file.
pub const EXIT_USAGE: i32 = 2;

/// Interpreter entry point: `args` is `[<entry.bp>]`.
pub fn interpreter_main<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let Some(entry) = args.into_iter().next() else {
        eprintln!("usage: bp-stub <blueprint.bp>");
        return EXIT_USAGE;
    };
    let entry = Path::new(&entry);
    let doc: serde_json::Value = match std::fs::read_to_string(entry)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("cannot load {}: {e}", entry.display());
            return EXIT_USAGE;
        }
    };
    let Some(workflow) = doc["workflow"].as_str() else {
        eprintln!("{}: missing `workflow`", entry.display());
        return EXIT_USAGE;
    };
    workflows::run(workflow, &doc, entry)
}
