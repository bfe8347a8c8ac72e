//! Scenario suite, scripted evaluation runs and accuracy metrics.
//!
//! A scenario is first-attempt correct when the primary backend's own
//! results satisfy the oracle without the fallback being engaged. Every
//! other scenario is a failure; it is recovered when the fallback's results
//! satisfy the oracle, either after the guard engaged it mid-turn or in a
//! second attempt started on the fallback.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::{
    grade_attempt, satisfied_by, Agent, AgentConfig, AgentState, BackendRole, Conversation, LlmBackend, OracleSpec,
    ScriptedBackend, Stores, Termination, PROMPT_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("scenario {scenario}: no binding for {{{var}}}")]
    Unbound { scenario: String, var: String },
    #[error("scenario {scenario}: bad oracle: {message}")]
    BadOracle { scenario: String, message: String },
    #[error("duplicate scenario id {0}")]
    Duplicate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "SQL")]
    Sql,
    #[serde(rename = "Graph")]
    Graph,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Sql => "SQL",
            Category::Graph => "Graph",
        }
    }
}

/// A scenario before binding; `query_text` and `oracle` may hold `{var}` placeholders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub scenario_id: String,
    pub category: Category,
    pub title: String,
    pub query_text: String,
    pub oracle: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSuite {
    pub version: String,
    pub scenarios: Vec<ScenarioTemplate>,
}

/// Model-specific values for the suite placeholders.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bindings {
    pub model: String,
    pub values: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub category: Category,
    pub query_text: String,
    pub oracle: OracleSpec,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::File { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text)
        .map_err(|e| EvalError::File { path: path.display().to_string(), message: e.to_string() })
}

impl ScenarioSuite {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        read_json(path.as_ref())
    }

    /// The suite shipped with this crate.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../../data/scenarios.json")).expect("shipped suite parses")
    }

    /// Substitutes placeholders and parses the oracles.
    pub fn bind(&self, bindings: &Bindings) -> Result<Vec<Scenario>, EvalError> {
        let mut seen = std::collections::HashSet::new();
        self.scenarios
            .iter()
            .map(|t| {
                if !seen.insert(t.scenario_id.as_str()) {
                    return Err(EvalError::Duplicate(t.scenario_id.clone()));
                }
                let unbound = |var: String| EvalError::Unbound { scenario: t.scenario_id.clone(), var };
                let query_text = substitute_str(&t.query_text, bindings).map_err(unbound)?;
                let oracle = substitute_value(&t.oracle, bindings).map_err(unbound)?;
                let oracle = serde_json::from_value(oracle)
                    .map_err(|e| EvalError::BadOracle { scenario: t.scenario_id.clone(), message: e.to_string() })?;
                Ok(Scenario { scenario_id: t.scenario_id.clone(), category: t.category, query_text, oracle })
            })
            .collect()
    }
}

impl Bindings {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        read_json(path.as_ref())
    }

    /// Bindings for the bundled FZK-Haus fixture.
    pub fn fzk() -> Self {
        serde_json::from_str(include_str!("../../data/fzk.bindings.json")).expect("shipped bindings parse")
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn binding_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Replaces `{var}` inside a string; other braces are kept.
fn substitute_str(s: &str, bindings: &Bindings) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').map(|close| &after[..close]).filter(|name| is_ident(name)) {
            Some(name) => {
                let v = bindings.values.get(name).ok_or_else(|| name.to_owned())?;
                out.push_str(&binding_text(v));
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// A string that is exactly `{var}` takes the bound JSON value as is.
fn substitute_value(v: &Value, bindings: &Bindings) -> Result<Value, String> {
    Ok(match v {
        Value::String(s) => {
            let whole = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')).filter(|n| is_ident(n));
            match whole {
                Some(name) => bindings.values.get(name).cloned().ok_or_else(|| name.to_owned())?,
                None => Value::String(substitute_str(s, bindings)?),
            }
        }
        Value::Array(items) => {
            Value::Array(items.iter().map(|i| substitute_value(i, bindings)).collect::<Result<_, _>>()?)
        }
        Value::Object(map) => Value::Object(
            map.iter().map(|(k, i)| Ok((k.clone(), substitute_value(i, bindings)?))).collect::<Result<_, String>>()?,
        ),
        other => other.clone(),
    })
}

/// Scripted replies per scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default)]
    pub primary: Vec<String>,
    #[serde(default)]
    pub fallback: Vec<String>,
}

pub type TranscriptSet = BTreeMap<String, ScenarioScript>;

pub fn load_transcripts(path: impl AsRef<Path>) -> Result<TranscriptSet, EvalError> {
    read_json(path.as_ref())
}

/// How the agent supplies backends for each scenario.
pub trait BackendSource {
    fn primary(&self, scenario: &str) -> Arc<dyn LlmBackend>;
    fn fallback(&self, scenario: &str) -> Option<Arc<dyn LlmBackend>>;
}

impl BackendSource for TranscriptSet {
    fn primary(&self, scenario: &str) -> Arc<dyn LlmBackend> {
        let replies = self.get(scenario).map(|s| s.primary.clone()).unwrap_or_default();
        Arc::new(ScriptedBackend::new("primary", replies))
    }

    fn fallback(&self, scenario: &str) -> Option<Arc<dyn LlmBackend>> {
        let replies = self.get(scenario)?.fallback.clone();
        (!replies.is_empty()).then(|| Arc::new(ScriptedBackend::new("fallback", replies)) as Arc<dyn LlmBackend>)
    }
}

/// Shared live backends; each scenario starts a fresh conversation.
pub struct FixedBackends {
    pub primary: Arc<dyn LlmBackend>,
    pub fallback: Option<Arc<dyn LlmBackend>>,
}

impl BackendSource for FixedBackends {
    fn primary(&self, _: &str) -> Arc<dyn LlmBackend> {
        self.primary.clone()
    }

    fn fallback(&self, _: &str) -> Option<Arc<dyn LlmBackend>> {
        self.fallback.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// Backend the attempt started on.
    pub started_on: BackendRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub state: AgentState,
}

/// Everything recorded for one scenario; one JSON line on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub scenario_id: String,
    pub category: Category,
    pub query_text: String,
    pub prompt_version: String,
    pub attempts: Vec<Attempt>,
    pub first_attempt_correct: bool,
    pub recovered: bool,
}

impl ScenarioTrace {
    pub fn guard_events(&self) -> usize {
        self.attempts.iter().map(|a| a.state.guard_events.len()).sum()
    }

    pub fn fallback_engaged(&self) -> bool {
        self.attempts.iter().any(|a| a.state.fallback_engaged)
    }
}

fn attempt(agent: &Agent, stores: Stores<'_>, query: &str, on_fallback: bool) -> Attempt {
    let mut conversation = Conversation::default();
    let (started_on, result) = if on_fallback {
        (BackendRole::Fallback, agent.run_on_fallback(stores, &mut conversation, query))
    } else {
        (BackendRole::Primary, agent.run(stores, &mut conversation, query))
    };
    match result {
        Ok(run) => Attempt {
            started_on,
            answer: Some(run.answer),
            termination: Some(run.termination),
            error: None,
            state: run.state,
        },
        Err(failure) => Attempt {
            started_on,
            answer: None,
            termination: None,
            error: Some(failure.error.to_string()),
            state: *failure.state,
        },
    }
}

/// Runs one scenario: a primary attempt, then a fallback attempt if the
/// first one was wrong and never reached the fallback.
pub fn run_scenario(
    scenario: &Scenario,
    stores: Stores<'_>,
    backends: &dyn BackendSource,
    config: &AgentConfig,
) -> ScenarioTrace {
    let id = scenario.scenario_id.as_str();
    let mut agent = Agent::new(config.clone(), backends.primary(id));
    if let Some(f) = backends.fallback(id) {
        agent = agent.with_fallback(f);
    }
    let first = attempt(&agent, stores, &scenario.query_text, false);
    let grade = grade_attempt(&first.state, &scenario.oracle);
    let mut attempts = vec![first];
    let mut recovered = grade.recovered;
    if !grade.first_attempt_correct && !grade.recovered && !attempts[0].state.fallback_engaged && agent.has_fallback() {
        let second = attempt(&agent, stores, &scenario.query_text, true);
        recovered = satisfied_by(&second.state, BackendRole::Fallback, &scenario.oracle);
        attempts.push(second);
    }
    ScenarioTrace {
        scenario_id: scenario.scenario_id.clone(),
        category: scenario.category,
        query_text: scenario.query_text.clone(),
        prompt_version: PROMPT_VERSION.to_owned(),
        attempts,
        first_attempt_correct: grade.first_attempt_correct,
        recovered,
    }
}

pub fn run_eval(
    scenarios: &[Scenario],
    stores: Stores<'_>,
    backends: &dyn BackendSource,
    config: &AgentConfig,
) -> Vec<ScenarioTrace> {
    scenarios.iter().map(|s| run_scenario(s, stores, backends, config)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub scenarios: usize,
    pub first_attempt_correct: usize,
    /// `None` for an empty category.
    pub first_attempt_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub prompt_version: String,
    pub overall: CategoryMetrics,
    pub by_category: BTreeMap<Category, CategoryMetrics>,
    /// Scenarios not correct on the first attempt.
    pub failed: Vec<String>,
    pub recovered: Vec<String>,
    /// `None` when nothing failed.
    pub recovery_accuracy: Option<f64>,
    pub guard_events: usize,
    pub fallback_engaged: usize,
}

fn ratio(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

fn tally(m: &mut CategoryMetrics, correct: bool) {
    m.scenarios += 1;
    m.first_attempt_correct += usize::from(correct);
    m.first_attempt_accuracy = ratio(m.first_attempt_correct, m.scenarios);
}

/// Pure fold over traces.
pub fn compute_metrics(traces: &[ScenarioTrace]) -> EvalReport {
    let mut report = EvalReport {
        prompt_version: PROMPT_VERSION.to_owned(),
        overall: CategoryMetrics::default(),
        by_category: [Category::Sql, Category::Graph].into_iter().map(|c| (c, CategoryMetrics::default())).collect(),
        failed: Vec::new(),
        recovered: Vec::new(),
        recovery_accuracy: None,
        guard_events: 0,
        fallback_engaged: 0,
    };
    for t in traces {
        tally(&mut report.overall, t.first_attempt_correct);
        tally(report.by_category.entry(t.category).or_default(), t.first_attempt_correct);
        if !t.first_attempt_correct {
            report.failed.push(t.scenario_id.clone());
            if t.recovered {
                report.recovered.push(t.scenario_id.clone());
            }
        }
        report.guard_events += t.guard_events();
        report.fallback_engaged += usize::from(t.fallback_engaged());
    }
    report.recovery_accuracy = ratio(report.recovered.len(), report.failed.len());
    report
}

fn percent(v: Option<f64>) -> String {
    v.map_or("n/a".to_owned(), |x| format!("{:.1}%", x * 100.0))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>10}", "category", "scenarios", "correct", "accuracy");
        let row = |s: &mut String, name: &str, m: &CategoryMetrics| {
            let _ = writeln!(
                s,
                "{:<10} {:>9} {:>9} {:>10}",
                name,
                m.scenarios,
                m.first_attempt_correct,
                percent(m.first_attempt_accuracy)
            );
        };
        for (c, m) in &self.by_category {
            row(&mut s, c.label(), m);
        }
        row(&mut s, "overall", &self.overall);
        let list = |v: &[String]| if v.is_empty() { "none".to_owned() } else { v.join(", ") };
        let _ = writeln!(s, "failed: {}", list(&self.failed));
        let _ = writeln!(s, "recovered: {}", list(&self.recovered));
        let _ = writeln!(s, "recovery accuracy: {}", percent(self.recovery_accuracy));
        let _ = writeln!(s, "guard events: {}, fallback engaged: {}", self.guard_events, self.fallback_engaged);
        s
    }
}

/// Writes `<dir>/<scenario_id>.jsonl`, one line per scenario.
pub fn write_traces(dir: impl AsRef<Path>, traces: &[ScenarioTrace]) -> std::io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for t in traces {
        let mut line = serde_json::to_string(t).map_err(std::io::Error::other)?;
        line.push('\n');
        std::fs::write(dir.join(format!("{}.jsonl", t.scenario_id)), line)?;
    }
    Ok(())
}

/// Reads every `.jsonl` file in `dir`, in file-name order.
pub fn read_traces(dir: impl AsRef<Path>) -> Result<Vec<ScenarioTrace>, EvalError> {
    let mut files: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        for line in std::fs::read_to_string(&path)?.lines().filter(|l| !l.trim().is_empty()) {
            out.push(
                serde_json::from_str(line)
                    .map_err(|e| EvalError::File { path: path.display().to_string(), message: e.to_string() })?,
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bindings() -> Bindings {
        Bindings {
            model: "t".into(),
            values: [("room_x".to_owned(), Value::from("1")), ("n".to_owned(), Value::from(4))].into_iter().collect(),
        }
    }

    #[test]
    fn substitution() {
        let b = bindings();
        assert_eq!(substitute_str("room {room_x} {\"k\": 1} {n}", &b).unwrap(), "room 1 {\"k\": 1} 4");
        assert_eq!(substitute_str("{missing}", &b), Err("missing".into()));
        let v = substitute_value(&serde_json::json!({"values": ["{n}", "x{room_x}"]}), &b).unwrap();
        assert_eq!(v, serde_json::json!({"values": [4, "x1"]}));
    }

    #[test]
    fn empty_suite_has_no_ratios() {
        let r = compute_metrics(&[]);
        assert_eq!(r.overall.scenarios, 0);
        assert_eq!(r.overall.first_attempt_accuracy, None);
        assert_eq!(r.recovery_accuracy, None);
        assert!(r.to_table().contains("n/a"));
    }

    #[test]
    fn shipped_suite_binds() {
        let suite = ScenarioSuite::builtin();
        let scenarios = suite.bind(&Bindings::fzk()).unwrap();
        assert_eq!(scenarios.len(), 30);
        let graph = scenarios.iter().filter(|s| s.category == Category::Graph).count();
        assert_eq!(graph, 7);
    }
}
