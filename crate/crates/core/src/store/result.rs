use serde::{Deserialize, Serialize};

use crate::semantics::format_real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl CellValue {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            CellValue::Integer(i) => Some(*i),
            CellValue::Real(r) if r.fract() == 0.0 => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Integer(i) => Some(*i as f64),
            CellValue::Real(r) => Some(*r),
            CellValue::Text(t) => t.trim().parse().ok(),
            CellValue::Null => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(t) => Some(t),
            _ => None,
        }
    }

    /// Text handed to the model; NULL is spelled out.
    pub fn to_prompt_text(&self) -> String {
        match self {
            CellValue::Null => "NULL".to_owned(),
            CellValue::Integer(i) => i.to_string(),
            CellValue::Real(r) => format_real(*r),
            CellValue::Text(t) => t.clone(),
        }
    }
}

/// Rows of a query or graph command. Every row has one cell per column.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CellValue>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable { columns, rows: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Pipe-separated header and rows; empty when there are no rows.
    pub fn to_prompt_text(&self) -> String {
        if self.rows.is_empty() {
            return String::new();
        }
        let mut out = self.columns.join(" | ");
        for row in &self.rows {
            out.push('\n');
            out.push_str(&row.iter().map(CellValue::to_prompt_text).collect::<Vec<_>>().join(" | "));
        }
        out
    }

    /// Values of one column by name.
    pub fn column(&self, name: &str) -> Option<Vec<&CellValue>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Estimated prompt tokens of a result: serialized characters / 4, rounded up.
pub fn result_size_estimate(result: &ResultTable) -> usize {
    result.to_prompt_text().chars().count().div_ceil(4)
}
