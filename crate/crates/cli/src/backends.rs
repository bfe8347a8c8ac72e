use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use ifcnav_core::agent::{Agent, AgentConfig, HttpChatBackend, LlmBackend, PromptTemplates, ScriptedBackend};

/// Backend and loop settings shared by `query`, `repl`, `eval` and `serve`.
#[derive(Args, Clone, Debug, Default)]
pub struct BackendArgs {
    /// OpenAI-compatible chat-completions URL of the primary model.
    #[arg(long, env = "IFCNAV_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Model name sent to the primary endpoint.
    #[arg(long, env = "IFCNAV_MODEL")]
    pub model: Option<String>,
    #[arg(long, env = "IFCNAV_FALLBACK_ENDPOINT")]
    pub fallback_endpoint: Option<String>,
    #[arg(long, env = "IFCNAV_FALLBACK_MODEL")]
    pub fallback_model: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[arg(long, env = "IFCNAV_TOKEN_ENV", default_value = "IFCNAV_TOKEN")]
    pub token_env: String,
    /// Sampling temperature for live backends.
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Replay responses from a JSON array instead of calling a model.
    #[arg(long, conflicts_with = "endpoint")]
    pub transcript: Option<PathBuf>,
    #[arg(long, conflicts_with = "fallback_endpoint")]
    pub fallback_transcript: Option<PathBuf>,
    #[arg(long, default_value_t = ifcnav_core::agent::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Estimated-token budget per batch of query results.
    #[arg(long, default_value_t = ifcnav_core::agent::DEFAULT_CONTEXT_GUARD)]
    pub context_guard: usize,
    /// Directory with system.txt, loop.txt and final.txt.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
}

fn http(endpoint: &str, model: Option<&str>, role: &str, args: &BackendArgs) -> Result<Arc<dyn LlmBackend>, String> {
    let model = model.ok_or_else(|| format!("--{role}model is required with --{role}endpoint"))?;
    let token = std::env::var(&args.token_env).is_ok().then(|| args.token_env.clone());
    Ok(Arc::new(HttpChatBackend::new(endpoint, model, token).with_temperature(args.temperature)))
}

fn scripted(path: &PathBuf, name: &str) -> Result<Arc<dyn LlmBackend>, String> {
    ScriptedBackend::from_file(name, path)
        .map(|b| Arc::new(b) as Arc<dyn LlmBackend>)
        .map_err(|e| format!("{}: {e}", path.display()))
}

impl BackendArgs {
    pub fn config(&self) -> Result<AgentConfig, String> {
        let config = AgentConfig::new(self.max_iters, self.context_guard).map_err(|e| e.to_string())?;
        match &self.prompts {
            Some(dir) => {
                PromptTemplates::load_dir(dir).and_then(|t| config.with_templates(t)).map_err(|e| e.to_string())
            }
            None => Ok(config),
        }
    }

    pub fn primary(&self) -> Result<Arc<dyn LlmBackend>, String> {
        match (&self.transcript, &self.endpoint) {
            (Some(path), _) => scripted(path, "primary"),
            (None, Some(url)) => http(url, self.model.as_deref(), "", self),
            (None, None) => Err("no backend: pass --endpoint (or IFCNAV_ENDPOINT) or --transcript".into()),
        }
    }

    pub fn fallback(&self) -> Result<Option<Arc<dyn LlmBackend>>, String> {
        match (&self.fallback_transcript, &self.fallback_endpoint) {
            (Some(path), _) => scripted(path, "fallback").map(Some),
            (None, Some(url)) => http(url, self.fallback_model.as_deref(), "fallback-", self).map(Some),
            (None, None) => Ok(None),
        }
    }

    pub fn agent(&self) -> Result<Agent, String> {
        let mut agent = Agent::new(self.config()?, self.primary()?);
        if let Some(f) = self.fallback()? {
            agent = agent.with_fallback(f);
        }
        Ok(agent)
    }
}
