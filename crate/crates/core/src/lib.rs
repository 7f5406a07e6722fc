//! Deterministic execution engine for source-code agent blueprints.
//!
//! A blueprint is an ordinary program that owns the workflow. It runs in a
//! sandbox and reaches the model, knowledge bases, tools and the user only
//! through framed requests to the engine, which serves them, enforces
//! quotas and records a telemetry trail for every execution.

pub mod config;
pub mod executor;
pub mod protocol;
pub mod providers;
pub mod runtime;
pub mod sandbox;
