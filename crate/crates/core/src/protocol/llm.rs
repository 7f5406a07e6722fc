use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

fn default_max_tokens() -> u32 {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    #[serde(default)]
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tools: Option<Vec<ToolSpec>>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

impl LlmRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        LlmRequest {
            model: model.into(),
            messages,
            tools: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        if let Some(tools) = &self.tools {
            for tool in tools {
                tool.validate()?;
            }
        }
        Ok(())
    }

    /// Content of the most recent user message, if any.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    ToolCall,
    Length,
}

/// Provider-independent model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub message: ChatMessage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_calls: Option<Vec<ToolCall>>,
    pub usage: Usage,
    pub finish_reason: FinishReason,
}

impl LlmResponse {
    pub fn validate(&self) -> Result<(), String> {
        if self.message.role != Role::Assistant {
            return Err(format!(
                "response message role must be assistant, got {}",
                self.message.role.as_str()
            ));
        }
        if self.finish_reason == FinishReason::ToolCall
            && self.tool_calls.as_ref().is_none_or(|c| c.is_empty())
        {
            return Err("finish_reason tool_call without tool calls".into());
        }
        Ok(())
    }

    pub fn tool_calls(&self) -> &[ToolCall] {
        self.tool_calls.as_deref().unwrap_or_default()
    }
}

/// Registration document for a callable tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub parameters: Value,
}

impl ToolSpec {
    pub fn validate(&self) -> Result<(), String> {
        validate_tool_name(&self.name)?;
        match self.parameters.get("type").and_then(Value::as_str) {
            Some("object") => {}
            _ => {
                return Err(format!(
                    "tool `{}`: parameters must be an object schema",
                    self.name
                ))
            }
        }
        if let Some(props) = self.parameters.get("properties") {
            if !props.is_object() {
                return Err(format!("tool `{}`: properties must be an object", self.name));
            }
        }
        if let Some(required) = self.parameters.get("required") {
            let names = required
                .as_array()
                .filter(|r| r.iter().all(Value::is_string))
                .ok_or_else(|| format!("tool `{}`: required must be a list of names", self.name))?;
            for name in names {
                let name = name.as_str().unwrap_or_default();
                if self.parameters.pointer(&format!("/properties/{name}")).is_none() {
                    return Err(format!(
                        "tool `{}`: required field `{name}` is not declared",
                        self.name
                    ));
                }
            }
        }
        Ok(())
    }
}

/// snake_case identifier, at most 64 characters.
pub fn validate_tool_name(name: &str) -> Result<(), String> {
    let mut chars = name.chars();
    let valid = name.len() <= 64
        && chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if valid {
        Ok(())
    } else {
        Err(format!("invalid tool name `{name}`: expected snake_case, <= 64 chars"))
    }
}
