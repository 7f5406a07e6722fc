use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::QuotaDimension;

/// Error taxonomy shared by every component that reports a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Transient,
    Fatal,
    Quota,
    Validation,
    Protocol,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Transient => "transient",
            ErrorClass::Fatal => "fatal",
            ErrorClass::Quota => "quota",
            ErrorClass::Validation => "validation",
            ErrorClass::Protocol => "protocol",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classified failure carried in result frames and telemetry.
///
/// `retryable` is derived from the class and cannot disagree with it: the
/// constructor computes it and deserialization rejects documents where the
/// two are inconsistent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WireErrorInfo")]
pub struct ErrorInfo {
    pub class: ErrorClass,
    pub message: String,
    retryable: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireErrorInfo {
    class: ErrorClass,
    message: String,
    retryable: bool,
}

impl TryFrom<WireErrorInfo> for ErrorInfo {
    type Error = String;

    fn try_from(wire: WireErrorInfo) -> Result<Self, Self::Error> {
        let expected = wire.class == ErrorClass::Transient;
        if wire.retryable != expected {
            return Err(format!(
                "error class {} requires retryable={expected}",
                wire.class
            ));
        }
        Ok(ErrorInfo::new(wire.class, wire.message))
    }
}

impl ErrorInfo {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        ErrorInfo {
            class,
            message: message.into(),
            retryable: class == ErrorClass::Transient,
        }
    }

    pub fn transient(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Transient, message)
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Fatal, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Validation, message)
    }

    pub fn protocol(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Protocol, message)
    }

    pub fn retryable(&self) -> bool {
        self.retryable
    }
}

impl fmt::Display for ErrorInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class, self.message)
    }
}

impl std::error::Error for ErrorInfo {}

/// A failure as observed at its source, before classification.
#[derive(Debug, Clone, PartialEq)]
pub enum RawFailure {
    ProviderTimeout,
    RateLimited,
    ConnectionReset,
    /// Blueprint process exited (or was signalled) while the protocol was live.
    BlueprintExit { status: Option<i32> },
    ProtocolViolation(String),
    QuotaKill(QuotaDimension),
    /// Tool arguments failed schema validation at `path`.
    SchemaMismatch { path: String, reason: String },
    UnknownTool(String),
    /// Anything without a dedicated mapping.
    Other { source: String, description: String },
}

/// Total, deterministic mapping from raw failures to the error taxonomy.
pub fn classify_error(failure: &RawFailure) -> ErrorInfo {
    match failure {
        RawFailure::ProviderTimeout => ErrorInfo::transient("provider timeout"),
        RawFailure::RateLimited => ErrorInfo::transient("provider rate limit"),
        RawFailure::ConnectionReset => ErrorInfo::transient("connection reset"),
        RawFailure::BlueprintExit { status: Some(code) } => {
            ErrorInfo::fatal(format!("blueprint exited with status {code} mid-protocol"))
        }
        RawFailure::BlueprintExit { status: None } => {
            ErrorInfo::fatal("blueprint terminated by signal mid-protocol")
        }
        RawFailure::ProtocolViolation(detail) => {
            ErrorInfo::fatal(format!("protocol violation: {detail}"))
        }
        RawFailure::QuotaKill(dimension) => ErrorInfo::new(
            ErrorClass::Quota,
            format!("quota exceeded: {}", dimension.as_str()),
        ),
        RawFailure::SchemaMismatch { path, reason } => {
            ErrorInfo::validation(format!("invalid argument `{path}`: {reason}"))
        }
        RawFailure::UnknownTool(name) => ErrorInfo::validation(format!("unknown_tool: {name}")),
        RawFailure::Other {
            source,
            description,
        } => ErrorInfo::fatal(format!("{source}: {description}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provider_timeout_is_transient() {
        let info = classify_error(&RawFailure::ProviderTimeout);
        assert_eq!(info.class, ErrorClass::Transient);
        assert!(info.retryable());
    }

    #[test]
    fn nonzero_exit_is_fatal() {
        let info = classify_error(&RawFailure::BlueprintExit { status: Some(3) });
        assert_eq!(info.class, ErrorClass::Fatal);
        assert!(!info.retryable());
    }

    #[test]
    fn missing_required_field_is_validation() {
        let info = classify_error(&RawFailure::SchemaMismatch {
            path: "order_id".into(),
            reason: "required field missing".into(),
        });
        assert_eq!(info.class, ErrorClass::Validation);
        assert!(!info.retryable());
        assert!(info.message.contains("order_id"));
    }

    #[test]
    fn unknown_sources_are_fatal() {
        let info = classify_error(&RawFailure::Other {
            source: "disk".into(),
            description: "EIO".into(),
        });
        assert_eq!(info.class, ErrorClass::Fatal);
    }

    #[test]
    fn quota_kill_maps_to_quota() {
        let info = classify_error(&RawFailure::QuotaKill(QuotaDimension::Memory));
        assert_eq!(info.class, ErrorClass::Quota);
        assert!(info.message.contains("memory"));
    }

    #[test]
    fn inconsistent_retryable_is_rejected() {
        let doc = r#"{"class":"fatal","message":"x","retryable":true}"#;
        assert!(serde_json::from_str::<ErrorInfo>(doc).is_err());
        let doc = r#"{"class":"transient","message":"x","retryable":true}"#;
        assert!(serde_json::from_str::<ErrorInfo>(doc).unwrap().retryable());
    }
}
