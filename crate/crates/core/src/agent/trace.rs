use serde::{Deserialize, Serialize};

use crate::store::{ResultTable, SchemaSummary};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Sql,
    Graph,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendRole {
    Primary,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Rows {
        table: ResultTable,
    },
    Error {
        message: String,
    },
    /// The result was too large for the context and never shown to the model.
    Withheld {
        estimated_tokens: usize,
        budget: usize,
    },
}

/// One executed query and what came back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub kind: QueryKind,
    pub query: String,
    pub requested_by: BackendRole,
    /// 0 for the initial decision, then the loop iteration.
    pub iteration: usize,
    pub outcome: Outcome,
}

impl ResultEntry {
    pub fn table(&self) -> Option<&ResultTable> {
        match &self.outcome {
            Outcome::Rows { table } => Some(table),
            _ => None,
        }
    }

    pub fn to_prompt_text(&self) -> String {
        let label = match self.kind {
            QueryKind::Sql => "SQL",
            QueryKind::Graph => "GRAPH",
        };
        let body = match &self.outcome {
            Outcome::Rows { table } if table.is_empty() => "Result: no rows".to_owned(),
            Outcome::Rows { table } => format!("Result ({} rows):\n{}", table.rows.len(), table.to_prompt_text()),
            Outcome::Error { message } => format!("Error: {message}"),
            Outcome::Withheld { estimated_tokens, budget } => format!(
                "Result withheld: about {estimated_tokens} estimated tokens exceeds the {budget}-token budget. \
                 Refine the query to return fewer rows or columns, for example with DISTINCT or an aggregate."
            ),
        };
        format!("{label}: {}\n{body}", self.query)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallPhase {
    Decision,
    Loop,
    GuardRetry,
    Final,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub phase: CallPhase,
    pub role: BackendRole,
    pub backend: String,
    pub response: String,
}

/// A result replaced by a guard notice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardEvent {
    /// Index into the result store.
    pub entry: usize,
    pub estimated_tokens: usize,
    pub budget: usize,
    /// 1-based count of batches that tripped the guard so far.
    pub trip: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DirectAnswer,
    Complete,
    IterationLimit,
}

/// Everything one user turn did. `results` only grows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub user_query: String,
    pub schema_summary: SchemaSummary,
    pub graph_summary: String,
    pub results: Vec<ResultEntry>,
    pub iter: usize,
    pub calls: Vec<CallRecord>,
    pub guard_events: Vec<GuardEvent>,
    pub fallback_engaged: bool,
    /// Free-form log lines, in order.
    pub log: Vec<String>,
}

impl AgentState {
    pub(super) fn new(user_query: &str, schema_summary: SchemaSummary, graph_summary: String) -> Self {
        AgentState {
            user_query: user_query.to_owned(),
            schema_summary,
            graph_summary,
            results: Vec::new(),
            iter: 0,
            calls: Vec::new(),
            guard_events: Vec::new(),
            fallback_engaged: false,
            log: Vec::new(),
        }
    }

    pub fn backend_calls(&self) -> usize {
        self.calls.len()
    }

    pub fn count(&self, kind: QueryKind) -> usize {
        self.results.iter().filter(|e| e.kind == kind).count()
    }
}

/// Answer plus the full state of the turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub answer: String,
    pub termination: Termination,
    /// Set when the loop stopped at the iteration limit.
    pub incomplete: bool,
    pub state: AgentState,
}

impl AgentRun {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}
