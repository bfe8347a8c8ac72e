//! The question-answering loop: decide, query, refine, answer.
//!
//! One user turn calls the backend at most `max_iters + 3` times: the
//! decision, up to `max_iters` loop turns, one guard retry and the final
//! answer.

mod backend;
mod decision;
mod grade;
mod prompt;
mod trace;

use std::sync::Arc;

pub use backend::{BackendError, BackendSpec, ChatMessage, HttpChatBackend, LlmBackend, Role, ScriptedBackend};
pub use decision::{parse_decision, split_statements, DecisionError, LlmDecision, Phase};
pub use grade::{grade_attempt, satisfied_by, Expected, Grade, OracleSpec};
pub use prompt::{render_results, render_system_prompt, PromptTemplates, PROMPT_VERSION};
pub use trace::{
    AgentRun, AgentState, BackendRole, CallPhase, CallRecord, GuardEvent, Outcome, QueryKind, ResultEntry, Termination,
};

use crate::graph::{run_graph_query, GraphQuery, TopoGraph};
use crate::store::{result_size_estimate, RelationalStore, StoreError};

pub const DEFAULT_MAX_ITERS: usize = 5;
/// Estimated tokens allowed per batch of results.
pub const DEFAULT_CONTEXT_GUARD: usize = 8_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("backend {backend} unavailable: {message}")]
    BackendUnavailable { backend: String, message: String, retryable: bool },
    #[error("scripted backend {backend} ran out of responses after {calls} calls")]
    TranscriptExhausted { backend: String, calls: usize },
    #[error("store summary failed: {0}")]
    Store(String),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

impl From<BackendError> for AgentError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Unavailable { backend, message, retryable } => {
                AgentError::BackendUnavailable { backend, message, retryable }
            }
            BackendError::TranscriptExhausted { backend, calls } => AgentError::TranscriptExhausted { backend, calls },
        }
    }
}

impl From<StoreError> for AgentError {
    fn from(e: StoreError) -> Self {
        AgentError::Store(e.to_string())
    }
}

/// A failed turn, with everything recorded up to the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct AgentFailure {
    pub error: AgentError,
    pub state: Box<AgentState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    max_iters: usize,
    context_guard: usize,
    templates: PromptTemplates,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_iters: DEFAULT_MAX_ITERS,
            context_guard: DEFAULT_CONTEXT_GUARD,
            templates: PromptTemplates::default(),
        }
    }
}

impl AgentConfig {
    pub fn new(max_iters: usize, context_guard: usize) -> Result<Self, AgentError> {
        if max_iters == 0 {
            return Err(AgentError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if context_guard == 0 {
            return Err(AgentError::InvalidConfig("context_guard must be positive".into()));
        }
        Ok(AgentConfig { max_iters, context_guard, templates: PromptTemplates::default() })
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Result<Self, AgentError> {
        templates.validate()?;
        self.templates = templates;
        Ok(self)
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    pub fn context_guard(&self) -> usize {
        self.context_guard
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }
}

/// Read-only access to both representations of one model.
#[derive(Copy, Clone)]
pub struct Stores<'a> {
    pub relational: &'a RelationalStore,
    pub graph: &'a TopoGraph,
}

/// Chat history of one session. Once the fallback is engaged it stays engaged.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Conversation {
    pub history: Vec<ChatMessage>,
    pub on_fallback: bool,
}

pub struct Agent {
    config: AgentConfig,
    primary: Arc<dyn LlmBackend>,
    fallback: Option<Arc<dyn LlmBackend>>,
}

impl Agent {
    pub fn new(config: AgentConfig, primary: Arc<dyn LlmBackend>) -> Self {
        Agent { config, primary, fallback: None }
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn LlmBackend>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn has_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    /// Answers one user turn and appends it to `conversation`.
    pub fn run(
        &self,
        stores: Stores<'_>,
        conversation: &mut Conversation,
        user_query: &str,
    ) -> Result<AgentRun, AgentFailure> {
        let role = if conversation.on_fallback && self.fallback.is_some() {
            BackendRole::Fallback
        } else {
            BackendRole::Primary
        };
        self.run_as(stores, conversation, user_query, role)
    }

    /// Answers with the fallback backend from the first call, as a second attempt.
    pub fn run_on_fallback(
        &self,
        stores: Stores<'_>,
        conversation: &mut Conversation,
        user_query: &str,
    ) -> Result<AgentRun, AgentFailure> {
        if self.fallback.is_none() {
            return Err(AgentFailure {
                error: AgentError::InvalidConfig("no fallback backend configured".into()),
                state: Box::new(AgentState::new(user_query, empty_summary(), String::new())),
            });
        }
        self.run_as(stores, conversation, user_query, BackendRole::Fallback)
    }

    fn run_as(
        &self,
        stores: Stores<'_>,
        conversation: &mut Conversation,
        user_query: &str,
        role: BackendRole,
    ) -> Result<AgentRun, AgentFailure> {
        let schema = match stores.relational.summarize() {
            Ok(s) => s,
            Err(e) => {
                return Err(AgentFailure {
                    error: e.into(),
                    state: Box::new(AgentState::new(user_query, empty_summary(), String::new())),
                })
            }
        };
        let mut turn = Turn {
            agent: self,
            stores,
            state: AgentState::new(user_query, schema, stores.graph.summary_text()),
            role,
            trips: 0,
            retry_pending: false,
            engaged_now: false,
        };
        turn.state.fallback_engaged = role == BackendRole::Fallback;
        let outcome = turn.drive(&conversation.history);
        if turn.engaged_now {
            conversation.on_fallback = true;
        }
        match outcome {
            Ok((answer, termination)) => {
                conversation.history.push(ChatMessage::user(user_query));
                conversation.history.push(ChatMessage::assistant(answer.clone()));
                Ok(AgentRun {
                    answer,
                    termination,
                    incomplete: termination == Termination::IterationLimit,
                    state: turn.state,
                })
            }
            Err(error) => Err(AgentFailure { error, state: Box::new(turn.state) }),
        }
    }
}

fn empty_summary() -> crate::store::SchemaSummary {
    crate::store::SchemaSummary {
        tables: Vec::new(),
        element_types: Vec::new(),
        property_names: Vec::new(),
        distinct_property_names: 0,
    }
}

struct Turn<'a> {
    agent: &'a Agent,
    stores: Stores<'a>,
    state: AgentState,
    role: BackendRole,
    trips: usize,
    retry_pending: bool,
    engaged_now: bool,
}

impl Turn<'_> {
    fn backend(&self) -> &dyn LlmBackend {
        match (self.role, &self.agent.fallback) {
            (BackendRole::Fallback, Some(f)) => f.as_ref(),
            _ => self.agent.primary.as_ref(),
        }
    }

    fn call(&mut self, phase: CallPhase, messages: Vec<ChatMessage>) -> Result<String, AgentError> {
        let backend = self.backend();
        let name = backend.name().to_owned();
        let response = backend.complete(&messages)?;
        self.state.calls.push(CallRecord { phase, role: self.role, backend: name, response: response.clone() });
        Ok(response)
    }

    fn drive(&mut self, history: &[ChatMessage]) -> Result<(String, Termination), AgentError> {
        let config = &self.agent.config;
        let templates = config.templates.clone();
        let query = self.state.user_query.clone();

        let prompt = templates.render_system(&self.state.schema_summary, &self.state.graph_summary, &query);
        let raw = self.call(CallPhase::Decision, vec![ChatMessage::user(prompt)])?;
        let mut termination = match parse_decision(&raw, Phase::Initial) {
            Ok(d) if d.direct_answer => {
                self.state.log.push("direct answer, no queries".into());
                Termination::DirectAnswer
            }
            Ok(d) => {
                self.execute(d.sql_queries, d.graph_queries, None);
                Termination::IterationLimit
            }
            Err(DecisionError::MalformedGraphQuery { text, reason, sql_queries }) => {
                self.execute(sql_queries, Vec::new(), Some((text, reason)));
                Termination::IterationLimit
            }
        };

        if termination != Termination::DirectAnswer {
            while self.state.iter < config.max_iters || self.retry_pending {
                let phase = if self.retry_pending {
                    self.retry_pending = false;
                    CallPhase::GuardRetry
                } else {
                    self.state.iter += 1;
                    CallPhase::Loop
                };
                let prompt = templates.render_iteration(
                    &self.state.schema_summary,
                    &self.state.graph_summary,
                    &query,
                    &self.state.results,
                );
                let raw = self.call(phase, vec![ChatMessage::user(prompt)])?;
                match parse_decision(&raw, Phase::Loop) {
                    Ok(u) if u.complete => {
                        termination = Termination::Complete;
                        break;
                    }
                    Ok(u) => self.execute(u.sql_queries, u.graph_queries, None),
                    Err(DecisionError::MalformedGraphQuery { text, reason, sql_queries }) => {
                        self.execute(sql_queries, Vec::new(), Some((text, reason)))
                    }
                }
            }
            if termination == Termination::IterationLimit {
                self.state.log.push(format!("stopped after {} iterations without ANALYSIS_COMPLETE", self.state.iter));
            }
        }

        let mut messages = history.to_vec();
        messages.push(ChatMessage::user(templates.render_final(&query, &self.state.results)));
        let answer = self.call(CallPhase::Final, messages)?;
        Ok((answer, termination))
    }

    /// Runs one batch, applies the context guard and appends the batch.
    fn execute(&mut self, sql: Vec<String>, graph: Vec<GraphQuery>, malformed: Option<(String, String)>) {
        let mut batch = Vec::with_capacity(sql.len() + graph.len() + 1);
        let entry = |kind, query, outcome| ResultEntry {
            kind,
            query,
            requested_by: self.role,
            iteration: self.state.iter,
            outcome,
        };
        for q in sql {
            let outcome = match self.stores.relational.execute_sql(&q) {
                Ok(table) => Outcome::Rows { table },
                Err(e) => Outcome::Error { message: e.to_string() },
            };
            batch.push(entry(QueryKind::Sql, q, outcome));
        }
        for g in graph {
            let outcome = match run_graph_query(self.stores.graph, &g) {
                Ok(table) => Outcome::Rows { table },
                Err(e) => Outcome::Error { message: e.to_string() },
            };
            batch.push(entry(QueryKind::Graph, g.to_json(), outcome));
        }
        if let Some((text, reason)) = malformed {
            batch.push(entry(
                QueryKind::Graph,
                text,
                Outcome::Error { message: format!("malformed graph query: {reason}") },
            ));
        }
        self.guard(&mut batch);
        self.state.results.extend(batch);
    }

    /// Withholds the largest results until the batch fits the budget.
    fn guard(&mut self, batch: &mut [ResultEntry]) {
        let budget = self.agent.config.context_guard;
        let sizes: Vec<usize> = batch.iter().map(|e| e.table().map_or(0, result_size_estimate)).collect();
        let mut total: usize = sizes.iter().sum();
        if total <= budget {
            return;
        }
        self.trips += 1;
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(sizes[i]));
        let base = self.state.results.len();
        for i in order {
            if total <= budget {
                break;
            }
            batch[i].outcome = Outcome::Withheld { estimated_tokens: sizes[i], budget };
            total -= sizes[i];
            self.state.guard_events.push(GuardEvent {
                entry: base + i,
                estimated_tokens: sizes[i],
                budget,
                trip: self.trips,
            });
            self.state.log.push(format!("guard withheld result {} ({} estimated tokens)", base + i, sizes[i]));
        }
        match self.trips {
            1 => self.retry_pending = true,
            2 if self.role == BackendRole::Primary => {
                if self.agent.fallback.is_some() {
                    self.role = BackendRole::Fallback;
                    self.state.fallback_engaged = true;
                    self.engaged_now = true;
                    self.state.log.push("second guard trip, fallback backend engaged".into());
                } else {
                    self.state.log.push("second guard trip, no fallback backend configured".into());
                }
            }
            _ => {}
        }
    }
}
