use std::sync::{Arc, Mutex};

use rusqlite::hooks::{AuthAction, AuthContext, Authorization};
use rusqlite::types::ValueRef;
use rusqlite::Connection;

use super::result::{CellValue, ResultTable};
use super::StoreError;

/// First keyword of a statement, skipping whitespace and comments, upper-cased.
pub fn leading_keyword(sql: &str) -> Option<String> {
    let mut rest = sql;
    loop {
        rest = rest.trim_start();
        if let Some(r) = rest.strip_prefix("--") {
            rest = r.split_once('\n').map_or("", |(_, tail)| tail);
        } else if let Some(r) = rest.strip_prefix("/*") {
            rest = r.split_once("*/").map_or("", |(_, tail)| tail);
        } else {
            break;
        }
    }
    let word: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    (!word.is_empty()).then(|| word.to_ascii_uppercase())
}

pub(super) fn check_leading_keyword(sql: &str) -> Result<(), StoreError> {
    match leading_keyword(sql).as_deref() {
        Some("SELECT" | "WITH" | "VALUES") => Ok(()),
        Some(other) => Err(StoreError::NonSelectRejected { reason: format!("statement starts with {other}") }),
        None => Err(StoreError::NonSelectRejected { reason: "empty statement".into() }),
    }
}

/// Functions with side effects outside the database.
const BLOCKED_FUNCTIONS: [&str; 4] = ["load_extension", "fts3_tokenizer", "readfile", "writefile"];

/// Lets statements compile only if every action they need is a read.
pub(super) fn install_authorizer(conn: &Connection, denials: Arc<Mutex<Vec<String>>>) {
    conn.authorizer(Some(move |ctx: AuthContext<'_>| match ctx.action {
        AuthAction::Function { function_name }
            if !BLOCKED_FUNCTIONS.contains(&function_name.to_ascii_lowercase().as_str()) =>
        {
            Authorization::Allow
        }
        AuthAction::Select | AuthAction::Read { .. } | AuthAction::Recursive => Authorization::Allow,
        other => {
            denials.lock().expect("denial log").push(format!("{other:?}"));
            Authorization::Deny
        }
    }));
}

pub(super) fn run_select(
    conn: &Connection,
    denials: &Mutex<Vec<String>>,
    sql: &str,
    row_cap: usize,
) -> Result<ResultTable, StoreError> {
    denials.lock().expect("denial log").clear();
    let mut stmt = match conn.prepare(sql) {
        Ok(s) => s,
        Err(rusqlite::Error::MultipleStatement) => {
            return Err(StoreError::NonSelectRejected { reason: "more than one statement".into() })
        }
        Err(e) => return Err(classify(e, denials)),
    };
    if !stmt.readonly() {
        return Err(StoreError::NonSelectRejected { reason: "statement writes to the database".into() });
    }
    let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_owned).collect();
    let width = columns.len();
    let mut rows = Vec::new();
    let mut cursor = stmt.query([]).map_err(|e| classify(e, denials))?;
    while let Some(row) = cursor.next().map_err(|e| classify(e, denials))? {
        if rows.len() == row_cap {
            return Err(StoreError::RowLimitExceeded { cap: row_cap });
        }
        let mut cells = Vec::with_capacity(width);
        for i in 0..width {
            cells.push(match row.get_ref(i)? {
                ValueRef::Null => CellValue::Null,
                ValueRef::Integer(v) => CellValue::Integer(v),
                ValueRef::Real(v) => CellValue::Real(v),
                ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => CellValue::Text(b.iter().map(|x| format!("{x:02x}")).collect()),
            });
        }
        rows.push(cells);
    }
    Ok(ResultTable { columns, rows })
}

/// Authorization failures (at compile or step time) are gate rejections.
fn classify(e: rusqlite::Error, denials: &Mutex<Vec<String>>) -> StoreError {
    let denied = std::mem::take(&mut *denials.lock().expect("denial log"));
    let auth = e.sqlite_error_code() == Some(rusqlite::ErrorCode::AuthorizationForStatementDenied);
    if !auth && denied.is_empty() {
        return StoreError::SqlError(e.to_string());
    }
    let reason = if denied.is_empty() { "not a read".to_owned() } else { format!("not a read: {}", denied.join(", ")) };
    StoreError::NonSelectRejected { reason }
}
