//! Chat-completions style adapter. Converts the uniform request into the
//! common `choices[0].message` wire shape and back, over a pluggable
//! transport.

use serde_json::{json, Value};

use super::mock::{completion_tokens, prompt_tokens};
use super::LlmProvider;
use crate::protocol::{
    classify_error, ChatMessage, ErrorInfo, FinishReason, LlmRequest, LlmResponse, RawFailure,
    Role, ToolCall, Usage,
};

/// Transport-level failure, classified by the adapter.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    Timeout,
    RateLimited,
    ConnectionReset,
    Status(u16, String),
    Other(String),
}

pub trait ChatTransport: Send {
    fn send(&mut self, body: &Value) -> Result<Value, TransportError>;
}

pub struct ChatCompletionsAdapter<T> {
    transport: T,
}

impl<T: ChatTransport> ChatCompletionsAdapter<T> {
    pub fn new(transport: T) -> Self {
        ChatCompletionsAdapter { transport }
    }
}

impl<T: ChatTransport> LlmProvider for ChatCompletionsAdapter<T> {
    fn invoke(&mut self, request: &LlmRequest) -> Result<LlmResponse, ErrorInfo> {
        let body = wire_request(request);
        let reply = self.transport.send(&body).map_err(|e| {
            classify_error(&match e {
                TransportError::Timeout => RawFailure::ProviderTimeout,
                TransportError::RateLimited | TransportError::Status(429, _) => {
                    RawFailure::RateLimited
                }
                TransportError::ConnectionReset => RawFailure::ConnectionReset,
                // Upstream 5xx is treated like a dropped connection.
                TransportError::Status(code, _) if code >= 500 => RawFailure::ConnectionReset,
                TransportError::Status(code, body) => RawFailure::Other {
                    source: "provider".into(),
                    description: format!("status {code}: {body}"),
                },
                TransportError::Other(msg) => RawFailure::Other {
                    source: "provider".into(),
                    description: msg,
                },
            })
        })?;
        parse_reply(request, &reply).map_err(|msg| {
            classify_error(&RawFailure::Other {
                source: "provider".into(),
                description: format!("unparseable reply: {msg}"),
            })
        })
    }
}

pub fn wire_request(request: &LlmRequest) -> Value {
    let mut body = json!({
        "model": request.model,
        "messages": request.messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    });
    if let Some(tools) = &request.tools {
        body["tools"] = tools
            .iter()
            .map(|t| {
                json!({"type": "function", "function": {
                    "name": t.name, "description": t.description, "parameters": t.parameters
                }})
            })
            .collect();
    }
    body
}

fn parse_reply(request: &LlmRequest, reply: &Value) -> Result<LlmResponse, String> {
    let choice = reply
        .pointer("/choices/0")
        .ok_or("missing choices[0]")?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut calls = Vec::new();
    if let Some(raw_calls) = choice.pointer("/message/tool_calls").and_then(Value::as_array) {
        for call in raw_calls {
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or("tool call without name")?;
            let arguments = match call.pointer("/function/arguments") {
                Some(Value::String(s)) => {
                    serde_json::from_str(s).map_err(|e| format!("tool arguments: {e}"))?
                }
                Some(other) => other.clone(),
                None => Value::Object(Default::default()),
            };
            calls.push(ToolCall {
                name: name.to_string(),
                arguments,
            });
        }
    }
    let tool_calls = (!calls.is_empty()).then_some(calls);
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("tool_calls") | Some("tool_call") => FinishReason::ToolCall,
        Some("length") => FinishReason::Length,
        _ if tool_calls.is_some() => FinishReason::ToolCall,
        _ => FinishReason::Stop,
    };
    let usage = match (
        reply.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        reply.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    ) {
        (Some(prompt_tokens), Some(completion_tokens)) => Usage {
            prompt_tokens,
            completion_tokens,
        },
        _ => Usage {
            prompt_tokens: prompt_tokens(request),
            completion_tokens: completion_tokens(&content, tool_calls.as_deref()),
        },
    };
    let response = LlmResponse {
        message: ChatMessage::new(Role::Assistant, content),
        tool_calls,
        usage,
        finish_reason,
    };
    response.validate()?;
    Ok(response)
}

/// In-process transport that answers with the last user message, in the
/// wire shape a hosted endpoint would use. Exercises the adapter's full
/// encode/parse path without a network.
#[derive(Debug, Default)]
pub struct LoopbackTransport;

impl ChatTransport for LoopbackTransport {
    fn send(&mut self, body: &Value) -> Result<Value, TransportError> {
        let last_user = body["messages"]
            .as_array()
            .into_iter()
            .flatten()
            .rev()
            .find(|m| m["role"] == "user")
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default()
            .to_string();
        Ok(json!({
            "choices": [{
                "message": {"role": "assistant", "content": last_user},
                "finish_reason": "stop"
            }]
        }))
    }
}

#[cfg(feature = "live")]
pub use http::HttpTransport;

#[cfg(feature = "live")]
mod http {
    use super::{ChatTransport, TransportError};
    use serde_json::Value;
    use std::time::Duration;

    /// Blocking HTTP transport for hosted chat-completions endpoints.
    pub struct HttpTransport {
        endpoint: String,
        api_key: Option<String>,
        agent: ureq::Agent,
    }

    impl HttpTransport {
        pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(false)
                .build()
                .into();
            HttpTransport {
                endpoint: endpoint.into(),
                api_key,
                agent,
            }
        }
    }

    impl ChatTransport for HttpTransport {
        fn send(&mut self, body: &Value) -> Result<Value, TransportError> {
            let mut req = self.agent.post(&self.endpoint);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req.send_json(body).map_err(|e| match e {
                ureq::Error::Timeout(_) => TransportError::Timeout,
                ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::ConnectionReset => {
                    TransportError::ConnectionReset
                }
                other => TransportError::Other(other.to_string()),
            })?;
            let status = resp.status().as_u16();
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| TransportError::Other(e.to_string()))?;
            if status == 429 {
                return Err(TransportError::RateLimited);
            }
            if status >= 400 {
                return Err(TransportError::Status(status, text));
            }
            serde_json::from_str(&text).map_err(|e| TransportError::Other(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ErrorClass;

    struct Failing(TransportError);
    impl ChatTransport for Failing {
        fn send(&mut self, _: &Value) -> Result<Value, TransportError> {
            Err(self.0.clone())
        }
    }

    fn req() -> LlmRequest {
        LlmRequest::new("m", vec![ChatMessage::new(Role::User, "ping")])
    }

    #[test]
    fn loopback_echoes_in_standard_shape() {
        let mut adapter = ChatCompletionsAdapter::new(LoopbackTransport);
        let resp = adapter.invoke(&req()).unwrap();
        assert_eq!(resp.message.role, Role::Assistant);
        assert_eq!(resp.message.content, "ping");
        assert_eq!(resp.usage.completion_tokens, 1);
    }

    #[test]
    fn transport_failures_are_classified() {
        for (err, class) in [
            (TransportError::Timeout, ErrorClass::Transient),
            (TransportError::Status(429, String::new()), ErrorClass::Transient),
            (TransportError::Status(503, String::new()), ErrorClass::Transient),
            (TransportError::Status(400, "bad".into()), ErrorClass::Fatal),
            (TransportError::Other("tls".into()), ErrorClass::Fatal),
        ] {
            let mut adapter = ChatCompletionsAdapter::new(Failing(err));
            assert_eq!(adapter.invoke(&req()).unwrap_err().class, class);
        }
    }

    #[test]
    fn parses_string_encoded_tool_arguments() {
        let reply = json!({"choices": [{"message": {"content": null, "tool_calls": [
            {"function": {"name": "get_order_details", "arguments": "{\"order_id\":\"#W1\"}"}}
        ]}, "finish_reason": "tool_calls"}], "usage": {"prompt_tokens": 5, "completion_tokens": 3}});
        let resp = parse_reply(&req(), &reply).unwrap();
        assert_eq!(resp.finish_reason, FinishReason::ToolCall);
        assert_eq!(resp.tool_calls()[0].arguments, json!({"order_id": "#W1"}));
        assert_eq!(resp.usage.prompt_tokens, 5);
    }
}
