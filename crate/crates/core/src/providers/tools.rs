//! Tool registry with schema-validated dispatch.

use std::collections::BTreeMap;
use std::io;
use std::net::TcpStream;
use std::os::unix::net::UnixStream;
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use crate::protocol::{
    classify_error, read_document, validate_args, write_document, CodecError, ErrorInfo,
    RawFailure, ToolSpec,
};

/// Executes built-in domain functions. A domain-level refusal is an
/// `Err(message)` and is reported to the caller as `{ok: false, error}`.
pub trait ToolBackend: Send + Sync {
    fn call(&self, function: &str, args: &Value) -> Result<Value, String>;
}

#[derive(Clone)]
pub enum ToolBinding {
    Builtin {
        backend: Arc<dyn ToolBackend>,
        function: String,
    },
    Remote {
        endpoint: RemoteEndpoint,
        timeout: Duration,
    },
}

impl std::fmt::Debug for ToolBinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ToolBinding::Builtin { function, .. } => write!(f, "builtin({function})"),
            ToolBinding::Remote { endpoint, .. } => write!(f, "remote({endpoint:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemoteEndpoint {
    Unix(std::path::PathBuf),
    Tcp(String),
}

impl RemoteEndpoint {
    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some(path) = s.strip_prefix("unix:") {
            Ok(RemoteEndpoint::Unix(path.into()))
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            Ok(RemoteEndpoint::Tcp(addr.to_string()))
        } else {
            Err(format!("unsupported endpoint `{s}` (expected unix:PATH or tcp:HOST:PORT)"))
        }
    }
}

#[derive(Debug, Clone)]
struct RegisteredTool {
    spec: ToolSpec,
    binding: ToolBinding,
}

#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, RegisteredTool>,
}

impl ToolRegistry {
    pub fn register(&mut self, spec: ToolSpec, binding: ToolBinding) -> Result<(), String> {
        spec.validate()?;
        if self.tools.contains_key(&spec.name) {
            return Err(format!("tool `{}` is already registered", spec.name));
        }
        self.tools
            .insert(spec.name.clone(), RegisteredTool { spec, binding });
        Ok(())
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.values().map(|t| t.spec.clone()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Validate and invoke. Returns the tool result document
    /// (`{ok: true, value}` or `{ok: false, error}`); `Err` is reserved for
    /// failures of the call itself (unknown tool, bad arguments, transport).
    pub fn dispatch(&self, name: &str, args: &Value) -> Result<Value, ErrorInfo> {
        let tool = self
            .tools
            .get(name)
            .ok_or_else(|| classify_error(&RawFailure::UnknownTool(name.to_string())))?;
        validate_args(&tool.spec.parameters, args).map_err(|v| {
            classify_error(&RawFailure::SchemaMismatch {
                path: v.path,
                reason: v.reason,
            })
        })?;
        match &tool.binding {
            ToolBinding::Builtin { backend, function } => Ok(match backend.call(function, args) {
                Ok(value) => json!({"ok": true, "value": value}),
                Err(error) => json!({"ok": false, "error": error}),
            }),
            ToolBinding::Remote { endpoint, timeout } => {
                remote_call(endpoint, *timeout, name, args)
            }
        }
    }
}

fn remote_call(
    endpoint: &RemoteEndpoint,
    timeout: Duration,
    name: &str,
    args: &Value,
) -> Result<Value, ErrorInfo> {
    let request = json!({"name": name, "args": args});
    let result = match endpoint {
        RemoteEndpoint::Unix(path) => UnixStream::connect(path).and_then(|s| {
            s.set_read_timeout(Some(timeout))?;
            s.set_write_timeout(Some(timeout))?;
            Ok(s)
        }).map_err(CodecError::Io).and_then(|mut s| exchange(&mut s, &request)),
        RemoteEndpoint::Tcp(addr) => {
            let addrs: Vec<_> = std::net::ToSocketAddrs::to_socket_addrs(addr.as_str())
                .map_err(|e| CodecError::Io(e))
                .map_err(|e| transport_failure(&e))?
                .collect();
            let addr = addrs.first().ok_or_else(|| {
                classify_error(&RawFailure::Other {
                    source: "remote tool".into(),
                    description: format!("cannot resolve {addr}"),
                })
            })?;
            TcpStream::connect_timeout(addr, timeout)
                .and_then(|s| {
                    s.set_read_timeout(Some(timeout))?;
                    s.set_write_timeout(Some(timeout))?;
                    Ok(s)
                })
                .map_err(CodecError::Io)
                .and_then(|mut s| exchange(&mut s, &request))
        }
    };
    let doc = result.map_err(|e| transport_failure(&e))?;
    match doc.get("ok").and_then(Value::as_bool) {
        Some(_) => Ok(doc),
        None => Err(classify_error(&RawFailure::ProtocolViolation(
            "remote tool result lacks `ok`".into(),
        ))),
    }
}

fn exchange<S: io::Read + io::Write>(stream: &mut S, request: &Value) -> Result<Value, CodecError> {
    write_document(stream, request)?;
    read_document(stream)
}

fn transport_failure(err: &CodecError) -> ErrorInfo {
    let raw = match err {
        CodecError::Io(e) => match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => RawFailure::ProviderTimeout,
            io::ErrorKind::ConnectionRefused
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::BrokenPipe
            | io::ErrorKind::NotFound => RawFailure::ConnectionReset,
            _ => RawFailure::Other {
                source: "remote tool".into(),
                description: e.to_string(),
            },
        },
        CodecError::Closed => RawFailure::ConnectionReset,
        other => RawFailure::ProtocolViolation(other.to_string()),
    };
    classify_error(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ErrorClass;
    use std::os::unix::net::UnixListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Orders {
        calls: AtomicUsize,
    }

    impl ToolBackend for Orders {
        fn call(&self, function: &str, args: &Value) -> Result<Value, String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match (function, args["order_id"].as_str()) {
                ("get_order", Some("#W87")) => Ok(json!({"order_id": "#W87", "status": "delivered"})),
                ("get_order", Some(other)) => Err(format!("order {other} not found")),
                _ => Err("unknown function".into()),
            }
        }
    }

    fn spec() -> ToolSpec {
        ToolSpec {
            name: "get_order".into(),
            description: "Look up an order".into(),
            parameters: json!({
                "type": "object",
                "properties": {"order_id": {"type": "string"}},
                "required": ["order_id"]
            }),
        }
    }

    fn registry() -> (ToolRegistry, Arc<Orders>) {
        let backend = Arc::new(Orders {
            calls: AtomicUsize::new(0),
        });
        let mut reg = ToolRegistry::default();
        reg.register(
            spec(),
            ToolBinding::Builtin {
                backend: backend.clone(),
                function: "get_order".into(),
            },
        )
        .unwrap();
        (reg, backend)
    }

    #[test]
    fn dispatch_builtin() {
        let (reg, _) = registry();
        let out = reg.dispatch("get_order", &json!({"order_id": "#W87"})).unwrap();
        assert_eq!(out["ok"], true);
        assert_eq!(out["value"]["status"], "delivered");
        let out = reg.dispatch("get_order", &json!({"order_id": "#W1"})).unwrap();
        assert_eq!(out["ok"], false);
    }

    #[test]
    fn schema_mismatch_never_reaches_backend() {
        let (reg, backend) = registry();
        let err = reg.dispatch("get_order", &json!({})).unwrap_err();
        assert_eq!(err.class, ErrorClass::Validation);
        assert!(err.message.contains("order_id"));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn unknown_tool_is_validation() {
        let (reg, _) = registry();
        let err = reg.dispatch("fly_me", &json!({})).unwrap_err();
        assert_eq!(err.class, ErrorClass::Validation);
        assert!(err.message.contains("unknown_tool"));
    }

    #[test]
    fn duplicate_registration_rejected() {
        let (mut reg, backend) = registry();
        let again = reg.register(
            spec(),
            ToolBinding::Builtin {
                backend,
                function: "get_order".into(),
            },
        );
        assert!(again.is_err());
    }

    #[test]
    fn remote_binding_round_trip_and_timeout() {
        let dir = tempfile::tempdir().unwrap();
        let sock = dir.path().join("tool.sock");
        let listener = UnixListener::bind(&sock).unwrap();
        let server = std::thread::spawn(move || {
            // First connection answers, second stalls past the timeout.
            let (mut conn, _) = listener.accept().unwrap();
            let req = read_document(&mut conn).unwrap();
            write_document(&mut conn, &json!({"ok": true, "value": req["args"]})).unwrap();
            let (mut stalled, _) = listener.accept().unwrap();
            let _ = read_document(&mut stalled);
            std::thread::sleep(Duration::from_millis(400));
        });
        let mut reg = ToolRegistry::default();
        reg.register(
            spec(),
            ToolBinding::Remote {
                endpoint: RemoteEndpoint::Unix(sock.clone()),
                timeout: Duration::from_millis(150),
            },
        )
        .unwrap();
        let out = reg.dispatch("get_order", &json!({"order_id": "#W9"})).unwrap();
        assert_eq!(out["value"]["order_id"], "#W9");
        let err = reg.dispatch("get_order", &json!({"order_id": "#W9"})).unwrap_err();
        assert_eq!(err.class, ErrorClass::Transient);
        server.join().unwrap();
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(
            RemoteEndpoint::parse("tcp:127.0.0.1:9000").unwrap(),
            RemoteEndpoint::Tcp("127.0.0.1:9000".into())
        );
        assert!(RemoteEndpoint::parse("http://x").is_err());
    }
}
