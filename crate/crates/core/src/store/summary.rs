use serde::{Deserialize, Serialize};

use super::{table_columns, table_names, RelationalStore, StoreError};
use crate::semantics::ElementClass;

/// At most this many distinct property names are listed.
pub const PROPERTY_NAME_LIMIT: usize = 100;

const SAMPLE_NAMES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementTypeSummary {
    pub table: String,
    pub count: usize,
    pub sample_names: Vec<String>,
}

/// What the model is told about the relational store. Ordering is stable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaSummary {
    pub tables: Vec<TableSummary>,
    /// Element tables with at least one row, alphabetical.
    pub element_types: Vec<ElementTypeSummary>,
    /// Most frequent first, ties alphabetical, truncated to [`PROPERTY_NAME_LIMIT`].
    pub property_names: Vec<String>,
    pub distinct_property_names: usize,
}

impl SchemaSummary {
    pub fn element_types_text(&self) -> String {
        if self.element_types.is_empty() {
            return "(none)".to_owned();
        }
        self.element_types.iter().map(|e| e.table.as_str()).collect::<Vec<_>>().join(", ")
    }

    pub fn property_names_text(&self) -> String {
        let mut s = if self.property_names.is_empty() { "(none)".to_owned() } else { self.property_names.join(", ") };
        if self.is_truncated() {
            s.push_str(&format!(
                "\n(showing {} of {} distinct property names)",
                self.property_names.len(),
                self.distinct_property_names
            ));
        }
        s
    }

    pub fn is_truncated(&self) -> bool {
        self.distinct_property_names > self.property_names.len()
    }

    /// Full text block for prompts.
    pub fn to_text(&self) -> String {
        let mut out = String::from("TABLES:\n");
        for t in &self.tables {
            out.push_str(&format!("- {}({})\n", t.name, t.columns.join(", ")));
        }
        out.push_str("ELEMENT TYPES PRESENT:\n");
        if self.element_types.is_empty() {
            out.push_str("(none)\n");
        }
        for e in &self.element_types {
            out.push_str(&format!("- {}: {} rows", e.table, e.count));
            if !e.sample_names.is_empty() {
                out.push_str(&format!(", e.g. {}", e.sample_names.join("; ")));
            }
            out.push('\n');
        }
        out.push_str("PROPERTY NAMES:\n");
        out.push_str(&self.property_names_text());
        out.push('\n');
        out
    }
}

pub(super) fn summarize(store: &RelationalStore) -> Result<SchemaSummary, StoreError> {
    let mut tables = Vec::new();
    for name in table_names() {
        let columns = table_columns(name).iter().map(|c| (*c).to_owned()).collect();
        tables.push(TableSummary { name: name.to_owned(), columns });
    }
    let mut element_types = Vec::new();
    for class in ElementClass::ALL {
        let table = class.table();
        let count = store.count(table)?;
        if count == 0 {
            continue;
        }
        let names = store.execute_sql(&format!(
            "SELECT DISTINCT name FROM {table} WHERE name IS NOT NULL ORDER BY name LIMIT {SAMPLE_NAMES}"
        ))?;
        element_types.push(ElementTypeSummary {
            table: table.to_owned(),
            count,
            sample_names: names.rows.iter().map(|r| r[0].to_prompt_text()).collect(),
        });
    }
    let distinct = store.execute_sql("SELECT COUNT(DISTINCT property_name) FROM property")?;
    let distinct_property_names = distinct.rows[0][0].as_i64().unwrap_or(0) as usize;
    let names = store.execute_sql(&format!(
        "SELECT property_name FROM property GROUP BY property_name \
         ORDER BY COUNT(*) DESC, property_name LIMIT {PROPERTY_NAME_LIMIT}"
    ))?;
    Ok(SchemaSummary {
        tables,
        element_types,
        property_names: names.rows.iter().map(|r| r[0].to_prompt_text()).collect(),
        distinct_property_names,
    })
}
