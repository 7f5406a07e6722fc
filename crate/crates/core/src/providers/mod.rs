//! Engine-side services behind the blueprint SDK calls: model invocation,
//! knowledge-base retrieval and tool dispatch.

mod adapter;
mod kb;
mod mock;
mod tools;

pub use adapter::{wire_request, ChatCompletionsAdapter, ChatTransport, LoopbackTransport, TransportError};
#[cfg(feature = "live")]
pub use adapter::HttpTransport;
pub use kb::{tokenize, Document, KbError, KbHit, KnowledgeBase, KnowledgeStore, EXCERPT_CHARS};
pub use mock::{
    completion_tokens, prompt_tokens, MockProvider, MockScript, ScriptStep, ScriptedResponse,
    StepMatch, ToggleFilter,
};
pub use tools::{RemoteEndpoint, ToolBackend, ToolBinding, ToolRegistry};

use crate::protocol::{ErrorInfo, LlmRequest, LlmResponse};

/// Uniform model invocation. Implementations return the standardized
/// response shape regardless of provider and classify their own failures.
pub trait LlmProvider: Send {
    fn invoke(&mut self, request: &LlmRequest) -> Result<LlmResponse, ErrorInfo>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for Box<P> {
    fn invoke(&mut self, request: &LlmRequest) -> Result<LlmResponse, ErrorInfo> {
        (**self).invoke(request)
    }
}

/// Token count estimator: `ceil(utf8_bytes / 4)`. Stands in for a real
/// tokenizer so token accounting is reproducible.
pub fn token_estimate(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn estimator_examples() {
        assert_eq!(token_estimate(""), 0);
        assert_eq!(token_estimate("abcdefgh"), 2);
        assert_eq!(token_estimate("abcdefghi"), 3);
        // Multi-byte characters count by bytes.
        assert_eq!(token_estimate("éé"), 1);
    }

    proptest! {
        #[test]
        fn estimator_is_subadditive(a in ".{0,64}", b in ".{0,64}") {
            let joined = format!("{a}{b}");
            prop_assert!(token_estimate(&joined) <= token_estimate(&a) + token_estimate(&b) + 1);
        }
    }
}
