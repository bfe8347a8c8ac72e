use serde::{Deserialize, Serialize};

use crate::graph::GraphQuery;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Loop,
}

/// Parsed model reply. `direct_answer` implies both query lists are empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LlmDecision {
    pub direct_answer: bool,
    pub sql_queries: Vec<String>,
    pub graph_queries: Vec<GraphQuery>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecisionError {
    #[error("malformed graph query `{text}`: {reason}")]
    MalformedGraphQuery {
        text: String,
        reason: String,
        /// SQL parsed from the same reply, still worth running.
        sql_queries: Vec<String>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Marker {
    Sql,
    Graph,
    Complete,
}

/// Longest first, so `MORE_SQL_NEEDED:` is not read as `SQL_NEEDED:`.
const MARKERS: [(&str, Marker); 5] = [
    ("MORE_GRAPH_NEEDED:", Marker::Graph),
    ("MORE_SQL_NEEDED:", Marker::Sql),
    ("GRAPH_NEEDED:", Marker::Graph),
    ("SQL_NEEDED:", Marker::Sql),
    ("ANALYSIS_COMPLETE", Marker::Complete),
];

/// Tracks quoting and brace depth so separators inside literals are ignored.
#[derive(Default)]
struct Scanner {
    single: bool,
    double: bool,
    depth: usize,
}

impl Scanner {
    fn top_level(&self) -> bool {
        !self.single && !self.double && self.depth == 0
    }

    fn step(&mut self, prev: Option<char>, c: char) {
        match c {
            '\'' if !self.double => self.single = !self.single,
            '"' if !self.single && prev != Some('\\') => self.double = !self.double,
            '{' if !self.single && !self.double => self.depth += 1,
            '}' if !self.single && !self.double => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
    }
}

/// Markers at a line start or after a top-level semicolon, as (offset, len, kind).
fn find_markers(raw: &str) -> Vec<(usize, usize, Marker)> {
    let mut found = Vec::new();
    let mut scanner = Scanner::default();
    let mut boundary = true;
    let mut prev = None;
    for (i, c) in raw.char_indices() {
        if boundary && scanner.top_level() && !c.is_whitespace() {
            if let Some((text, kind)) = MARKERS.iter().find(|(m, _)| raw[i..].starts_with(m)) {
                found.push((i, text.len(), *kind));
            }
            boundary = false;
        }
        scanner.step(prev, c);
        if c == '\n' {
            // a newline inside an unterminated quote still ends the line
            scanner.single = false;
            scanner.double = false;
            boundary = scanner.depth == 0;
        } else if c == ';' && scanner.top_level() {
            boundary = true;
        }
        prev = Some(c);
    }
    found
}

/// Splits on top-level semicolons; quoted semicolons survive.
pub fn split_statements(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut scanner = Scanner::default();
    let mut start = 0;
    let mut prev = None;
    for (i, c) in body.char_indices() {
        scanner.step(prev, c);
        if c == ';' && scanner.top_level() {
            out.push(body[start..i].to_owned());
            start = i + 1;
        }
        prev = Some(c);
    }
    out.push(body[start..].to_owned());
    out.into_iter().map(|s| strip_fences(&s).trim().to_owned()).filter(|s| !s.is_empty()).collect()
}

fn strip_fences(s: &str) -> String {
    s.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n")
}

/// Reads a model reply.
///
/// Markers are case-sensitive. In the initial phase a reply without any
/// marker is a direct answer; in the loop phase it counts as complete,
/// since the model answered instead of asking for more.
pub fn parse_decision(raw: &str, phase: Phase) -> Result<LlmDecision, DecisionError> {
    let markers = find_markers(raw);
    let mut decision = LlmDecision::default();
    if markers.is_empty() {
        match phase {
            Phase::Initial => decision.direct_answer = true,
            Phase::Loop => decision.complete = true,
        }
        return Ok(decision);
    }
    let mut graph_texts = Vec::new();
    for (n, &(at, len, kind)) in markers.iter().enumerate() {
        let end = markers.get(n + 1).map_or(raw.len(), |m| m.0);
        let body = &raw[at + len..end];
        match kind {
            Marker::Complete => decision.complete = true,
            Marker::Sql => decision.sql_queries.extend(split_statements(body)),
            Marker::Graph => graph_texts.extend(split_statements(body)),
        }
    }
    for text in graph_texts {
        match GraphQuery::from_text(&text) {
            Ok(q) => decision.graph_queries.push(q),
            Err(e) => {
                return Err(DecisionError::MalformedGraphQuery {
                    text,
                    reason: e.to_string(),
                    sql_queries: decision.sql_queries,
                })
            }
        }
    }
    Ok(decision)
}
