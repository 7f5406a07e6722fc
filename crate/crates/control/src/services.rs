//! Providers handed to each execution launched by the gateway.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use agent_bench::domains::{Domain, DomainBackend};
use agent_bench::Fixtures;
use agent_core::config::{AgentConfig, ToolBindingSpec};
use agent_core::executor::ExecutionServices;
use agent_core::protocol::ToolSpec;
use agent_core::providers::{
    ChatCompletionsAdapter, KnowledgeStore, LlmProvider, LoopbackTransport, MockProvider, MockScript, RemoteEndpoint,
    ToolBinding, ToolRegistry,
};

const REMOTE_TOOL_TIMEOUT: Duration = Duration::from_secs(10);

/// Builds the providers for one execution of `agent` in `session_id`.
pub trait ServiceFactory: Send + Sync {
    fn services(&self, agent: &AgentConfig, session_id: &str) -> Result<ExecutionServices, String>;
}

pub fn model_provider(agent: &AgentConfig) -> Result<Box<dyn LlmProvider>, String> {
    match agent.model.provider.as_str() {
        "mock" => {
            let path = agent
                .model
                .script
                .as_ref()
                .ok_or_else(|| format!("agent {}: the mock provider needs a script", agent.agent_id))?;
            let script = MockScript::load(path)?.for_toggles(&agent.toggles);
            Ok(Box::new(MockProvider::new(script)))
        }
        "loopback" => Ok(Box::new(ChatCompletionsAdapter::new(LoopbackTransport))),
        other => Err(format!("agent {}: provider `{other}` is not available in this build", agent.agent_id)),
    }
}

/// Built-in domain tool sets backed by the fixture stores, plus any remote
/// tools the agent registers. Domain state lives as long as the session.
pub struct DomainServices {
    fixtures: Fixtures,
    knowledge: Mutex<HashMap<String, Arc<KnowledgeStore>>>,
    states: Mutex<HashMap<(String, Domain), DomainBackend>>,
}

impl DomainServices {
    pub fn new(fixtures: Fixtures) -> Self {
        DomainServices {
            fixtures,
            knowledge: Mutex::new(HashMap::new()),
            states: Mutex::new(HashMap::new()),
        }
    }

    /// The domain state of a session, if it has used `domain`.
    pub fn backend(&self, session_id: &str, domain: Domain) -> Option<DomainBackend> {
        self.states.lock().expect("states").get(&(session_id.to_string(), domain)).cloned()
    }

    fn knowledge(&self, agent: &AgentConfig) -> Result<Arc<KnowledgeStore>, String> {
        let mut cache = self.knowledge.lock().expect("knowledge cache");
        if let Some(store) = cache.get(&agent.agent_id) {
            return Ok(store.clone());
        }
        let store = Arc::new(Fixtures::knowledge(agent).map_err(|e| e.to_string())?);
        cache.insert(agent.agent_id.clone(), store.clone());
        Ok(store)
    }

    fn tools(&self, agent: &AgentConfig, session_id: &str) -> Result<ToolRegistry, String> {
        let mut registry = ToolRegistry::default();
        for set in &agent.tool_sets {
            let domain = Domain::parse(set).ok_or_else(|| format!("unknown tool set `{set}`"))?;
            let backend = {
                let mut states = self.states.lock().expect("states");
                match states.get(&(session_id.to_string(), domain)) {
                    Some(b) => b.clone(),
                    None => {
                        let initial = self.fixtures.state(domain).map_err(|e| e.to_string())?;
                        let b = DomainBackend::new(domain, initial);
                        states.insert((session_id.to_string(), domain), b.clone());
                        b
                    }
                }
            };
            let domain_tools = backend.registry(agent.toggles.consolidated_tools);
            for spec in domain_tools.specs() {
                let function = spec.name.clone();
                let binding = ToolBinding::Builtin { backend: Arc::new(backend.clone()), function };
                registry.register(spec, binding)?;
            }
        }
        for tool in &agent.tools {
            let binding = match &tool.binding {
                ToolBindingSpec::Remote(address) => ToolBinding::Remote {
                    endpoint: RemoteEndpoint::parse(address)?,
                    timeout: REMOTE_TOOL_TIMEOUT,
                },
                ToolBindingSpec::Builtin(function) => {
                    return Err(format!("tool {}: builtin `{function}` must come from a tool set", tool.name))
                }
            };
            let spec = ToolSpec {
                name: tool.name.clone(),
                description: tool.description.clone(),
                parameters: tool.parameters.clone(),
            };
            registry.register(spec, binding)?;
        }
        Ok(registry)
    }
}

impl ServiceFactory for DomainServices {
    fn services(&self, agent: &AgentConfig, session_id: &str) -> Result<ExecutionServices, String> {
        Ok(ExecutionServices {
            llm: model_provider(agent)?,
            knowledge: self.knowledge(agent)?,
            tools: Arc::new(self.tools(agent, session_id)?),
        })
    }
}
