//! Result-based grading: a turn is correct when one of its query results
//! carries the expected values.

use serde::{Deserialize, Serialize};

use super::trace::{AgentState, BackendRole};
use crate::store::{CellValue, ResultTable};

/// One expected cell. Numbers compare within a tolerance, everything else
/// as trimmed, case-insensitive text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Expected {
    fn as_f64(&self) -> Option<f64> {
        match self {
            Expected::Number(n) => Some(*n),
            Expected::Text(t) => t.trim().parse().ok(),
            Expected::Bool(_) => None,
        }
    }

    fn text(&self) -> String {
        match self {
            Expected::Bool(b) => b.to_string(),
            Expected::Number(n) => n.to_string(),
            Expected::Text(t) => t.trim().to_owned(),
        }
    }

    pub fn matches(&self, cell: &CellValue, tolerance: f64) -> bool {
        if let (Some(a), Some(b)) = (self.as_f64(), cell.as_f64()) {
            return (a - b).abs() <= tolerance;
        }
        if matches!(cell, CellValue::Null) {
            return false;
        }
        self.text().eq_ignore_ascii_case(cell.to_prompt_text().trim())
    }
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    /// Every value appears somewhere in the result; optionally an exact row count.
    Values {
        values: Vec<Expected>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default)]
        row_count: Option<usize>,
    },
    /// The rows equal these, in any order.
    Rows {
        rows: Vec<Vec<Expected>>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// The distinct values of one column (the named one, or any) equal this set.
    ColumnSet {
        values: Vec<Expected>,
        #[serde(default)]
        column: Option<String>,
    },
    /// The `name` column lists exactly this sequence.
    Path { names: Vec<String> },
    /// A query succeeded with no rows.
    Empty,
}

impl OracleSpec {
    pub fn matches(&self, table: &ResultTable) -> bool {
        match self {
            OracleSpec::Values { values, tolerance, row_count } => {
                row_count.is_none_or(|n| table.rows.len() == n)
                    && values.iter().all(|v| table.rows.iter().flatten().any(|c| v.matches(c, *tolerance)))
            }
            OracleSpec::Rows { rows, tolerance } => rows_match(table, rows, *tolerance),
            OracleSpec::ColumnSet { values, column } => {
                let columns: Vec<usize> = match column {
                    Some(name) => table.columns.iter().position(|c| c == name).into_iter().collect(),
                    None => (0..table.columns.len()).collect(),
                };
                !table.rows.is_empty() && columns.into_iter().any(|i| column_set_matches(table, i, values))
            }
            OracleSpec::Path { names } => table.column("name").is_some_and(|col| {
                col.len() == names.len()
                    && col.iter().zip(names).all(|(c, n)| c.to_prompt_text().trim().eq_ignore_ascii_case(n.trim()))
            }),
            OracleSpec::Empty => table.rows.is_empty(),
        }
    }
}

fn rows_match(table: &ResultTable, expected: &[Vec<Expected>], tolerance: f64) -> bool {
    if table.rows.len() != expected.len() {
        return false;
    }
    let mut used = vec![false; table.rows.len()];
    expected.iter().all(|want| {
        let hit = table.rows.iter().enumerate().find(|(i, row)| {
            !used[*i] && row.len() == want.len() && row.iter().zip(want).all(|(c, w)| w.matches(c, tolerance))
        });
        hit.map(|(i, _)| used[i] = true).is_some()
    })
}

fn column_set_matches(table: &ResultTable, column: usize, values: &[Expected]) -> bool {
    let cells: Vec<&CellValue> = table.rows.iter().map(|r| &r[column]).collect();
    let tol = default_tolerance();
    cells.iter().all(|c| values.iter().any(|v| v.matches(c, tol)))
        && values.iter().all(|v| cells.iter().any(|c| v.matches(c, tol)))
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grade {
    pub first_attempt_correct: bool,
    pub recovered: bool,
}

/// Whether any successful result requested by `role` satisfies the oracle.
pub fn satisfied_by(state: &AgentState, role: BackendRole, oracle: &OracleSpec) -> bool {
    state.results.iter().filter(|e| e.requested_by == role).filter_map(|e| e.table()).any(|t| oracle.matches(t))
}

/// Grades a turn. A turn that engaged the fallback is never a first-attempt
/// success; it counts as recovered when the fallback's results are correct.
pub fn grade_attempt(state: &AgentState, oracle: &OracleSpec) -> Grade {
    if state.fallback_engaged {
        Grade { first_attempt_correct: false, recovered: satisfied_by(state, BackendRole::Fallback, oracle) }
    } else {
        Grade { first_attempt_correct: satisfied_by(state, BackendRole::Primary, oracle), recovered: false }
    }
}
