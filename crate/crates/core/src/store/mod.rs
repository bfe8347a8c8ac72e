//! SQLite persistence of an extracted model and a read-only query gate.

mod gate;
mod result;
mod summary;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rusqlite::{params, Connection, OpenFlags};
use sha2::{Digest, Sha256};

pub use gate::leading_keyword;
pub use result::{result_size_estimate, CellValue, ResultTable};
pub use summary::{SchemaSummary, PROPERTY_NAME_LIMIT};

use crate::semantics::{ElementClass, ExtractedModel};

/// Results larger than this are refused.
pub const DEFAULT_ROW_CAP: usize = 10_000;

pub const ELEMENT_COLUMNS: [&str; 15] = [
    "id",
    "name",
    "description",
    "storey_id",
    "centroid_x",
    "centroid_y",
    "centroid_z",
    "bounding_box_min_x",
    "bounding_box_min_y",
    "bounding_box_min_z",
    "bounding_box_max_x",
    "bounding_box_max_y",
    "bounding_box_max_z",
    "volume",
    "predefined_type",
];

/// Every table of the store, in creation order.
pub fn table_names() -> Vec<&'static str> {
    let mut names = vec!["building", "storey"];
    names.extend(ElementClass::ALL.iter().map(|c| c.table()));
    names.extend(["property", "real_geometry"]);
    names
}

const BUILDING_COLUMNS: [&str; 5] = ["id", "name", "description", "long_name", "object_type"];
const STOREY_COLUMNS: [&str; 6] = ["id", "name", "elevation", "building_id", "long_name", "description"];
const PROPERTY_COLUMNS: [&str; 4] = ["element_id", "element_type", "property_name", "property_value"];
const GEOMETRY_COLUMNS: [&str; 6] = ["element_id", "element_type", "vertices", "faces", "solid_volume", "approximate"];

/// Column names of `table`, in schema order; empty for unknown tables.
pub fn table_columns(table: &str) -> &'static [&'static str] {
    match table {
        "building" => &BUILDING_COLUMNS,
        "storey" => &STOREY_COLUMNS,
        "property" => &PROPERTY_COLUMNS,
        "real_geometry" => &GEOMETRY_COLUMNS,
        t if ElementClass::from_table(t).is_some() => &ELEMENT_COLUMNS,
        _ => &[],
    }
}

fn schema_sql() -> String {
    let mut sql = String::from(
        "CREATE TABLE building (id TEXT PRIMARY KEY, name TEXT, description TEXT, long_name TEXT, object_type TEXT);\n\
         CREATE TABLE storey (id TEXT PRIMARY KEY, name TEXT, elevation REAL, building_id TEXT, long_name TEXT, description TEXT);\n",
    );
    for class in ElementClass::ALL {
        sql.push_str(&format!(
            "CREATE TABLE {} (id TEXT PRIMARY KEY, name TEXT, description TEXT, storey_id TEXT, \
             centroid_x REAL, centroid_y REAL, centroid_z REAL, \
             bounding_box_min_x REAL, bounding_box_min_y REAL, bounding_box_min_z REAL, \
             bounding_box_max_x REAL, bounding_box_max_y REAL, bounding_box_max_z REAL, \
             volume REAL, predefined_type TEXT);\n",
            class.table()
        ));
    }
    sql.push_str(
        "CREATE TABLE property (element_id TEXT, element_type TEXT, property_name TEXT, property_value TEXT);\n\
         CREATE TABLE real_geometry (element_id TEXT, element_type TEXT, vertices TEXT, faces TEXT, \
         solid_volume REAL, approximate INTEGER);\n",
    );
    sql
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("duplicate GlobalId {id} in table {table}")]
    DuplicateGuid { table: &'static str, id: String },
    #[error("only SELECT statements are allowed: {reason}")]
    NonSelectRejected { reason: String },
    #[error("{0}")]
    SqlError(String),
    #[error("query returned more than {cap} rows")]
    RowLimitExceeded { cap: usize },
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::SqlError(e.to_string())
    }
}

/// A pooled read-only connection and the denials its authorizer recorded.
struct Reader {
    conn: Connection,
    denials: Arc<Mutex<Vec<String>>>,
}

/// Handle to a built store file. Reads may run concurrently.
pub struct RelationalStore {
    path: PathBuf,
    row_cap: usize,
    pool: Mutex<Vec<Reader>>,
}

impl std::fmt::Debug for RelationalStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelationalStore").field("path", &self.path).finish()
    }
}

impl RelationalStore {
    /// Writes `model` to a fresh database at `path`, replacing any old file.
    pub fn build(model: &ExtractedModel, path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        check_duplicates(model)?;
        if path.exists() {
            std::fs::remove_file(path)?;
        }
        let result = write_all(model, path);
        if result.is_err() {
            let _ = std::fs::remove_file(path);
        }
        result?;
        Self::open(path)
    }

    /// Opens an existing store read-only.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if !path.exists() {
            return Err(StoreError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} does not exist", path.display()),
            )));
        }
        let store = RelationalStore { path, row_cap: DEFAULT_ROW_CAP, pool: Mutex::new(Vec::new()) };
        let reader = store.reader()?;
        store.release(reader);
        Ok(store)
    }

    pub fn with_row_cap(mut self, cap: usize) -> Self {
        self.row_cap = cap;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn reader(&self) -> Result<Reader, StoreError> {
        if let Some(r) = self.pool.lock().expect("pool lock").pop() {
            return Ok(r);
        }
        let conn = Connection::open_with_flags(
            &self.path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )?;
        let denials = Arc::new(Mutex::new(Vec::new()));
        gate::install_authorizer(&conn, Arc::clone(&denials));
        Ok(Reader { conn, denials })
    }

    fn release(&self, r: Reader) {
        self.pool.lock().expect("pool lock").push(r);
    }

    /// Runs one read-only statement.
    ///
    /// The statement must start with SELECT, WITH or VALUES, may only read
    /// (enforced by an authorizer while it is compiled) and must return at
    /// most the row cap.
    pub fn execute_sql(&self, sql: &str) -> Result<ResultTable, StoreError> {
        gate::check_leading_keyword(sql)?;
        let reader = self.reader()?;
        let result = gate::run_select(&reader.conn, &reader.denials, sql, self.row_cap);
        self.release(reader);
        result
    }

    /// Row count of one table (names outside the schema are rejected).
    pub fn count(&self, table: &str) -> Result<usize, StoreError> {
        if !table_names().contains(&table) {
            return Err(StoreError::SqlError(format!("no such table: {table}")));
        }
        let t = self.execute_sql(&format!("SELECT COUNT(*) FROM {table}"))?;
        Ok(t.rows[0][0].as_i64().unwrap_or(0) as usize)
    }

    pub fn summarize(&self) -> Result<SchemaSummary, StoreError> {
        summary::summarize(self)
    }

    /// SHA-256 over every row of every table, in rowid order.
    pub fn table_checksums(&self) -> Result<BTreeMap<String, String>, StoreError> {
        let mut out = BTreeMap::new();
        for table in table_names() {
            let t = self.execute_sql(&format!("SELECT * FROM {table} ORDER BY rowid")).or_else(|e| match e {
                // checksums cover large geometry tables too
                StoreError::RowLimitExceeded { .. } => self.unbounded(&format!("SELECT * FROM {table} ORDER BY rowid")),
                other => Err(other),
            })?;
            let mut h = Sha256::new();
            h.update(t.columns.join("\u{1f}").as_bytes());
            for row in &t.rows {
                h.update([0x1e]);
                for cell in row {
                    h.update(cell.to_prompt_text().as_bytes());
                    h.update([0x1f]);
                }
            }
            out.insert(table.to_owned(), h.finalize().iter().map(|b| format!("{b:02x}")).collect());
        }
        Ok(out)
    }

    fn unbounded(&self, sql: &str) -> Result<ResultTable, StoreError> {
        let reader = self.reader()?;
        let result = gate::run_select(&reader.conn, &reader.denials, sql, usize::MAX);
        self.release(reader);
        result
    }
}

/// Convenience wrapper for [`RelationalStore::build`].
pub fn build_store(model: &ExtractedModel, path: impl AsRef<Path>) -> Result<RelationalStore, StoreError> {
    RelationalStore::build(model, path)
}

fn check_duplicates(model: &ExtractedModel) -> Result<(), StoreError> {
    let mut seen: HashSet<(&'static str, &str)> = HashSet::new();
    for b in &model.buildings {
        if !seen.insert(("building", b.id.as_str())) {
            return Err(StoreError::DuplicateGuid { table: "building", id: b.id.to_string() });
        }
    }
    for s in &model.storeys {
        if !seen.insert(("storey", s.id.as_str())) {
            return Err(StoreError::DuplicateGuid { table: "storey", id: s.id.to_string() });
        }
    }
    for e in &model.elements {
        let table = e.class.table();
        if !seen.insert((table, e.id.as_str())) {
            return Err(StoreError::DuplicateGuid { table, id: e.id.to_string() });
        }
    }
    Ok(())
}

fn write_all(model: &ExtractedModel, path: &Path) -> Result<(), StoreError> {
    let mut conn = Connection::open(path)?;
    conn.execute_batch("PRAGMA journal_mode = OFF; PRAGMA synchronous = OFF;")?;
    let tx = conn.transaction()?;
    tx.execute_batch(&schema_sql())?;
    {
        let mut st = tx.prepare("INSERT INTO building VALUES (?1, ?2, ?3, ?4, ?5)")?;
        for b in &model.buildings {
            st.execute(params![b.id.as_str(), b.name, b.description, b.long_name, b.object_type])?;
        }
        let mut st = tx.prepare("INSERT INTO storey VALUES (?1, ?2, ?3, ?4, ?5, ?6)")?;
        for s in &model.storeys {
            st.execute(params![
                s.id.as_str(),
                s.name,
                s.elevation,
                s.building_id.as_str(),
                s.long_name,
                s.description
            ])?;
        }
        for class in ElementClass::ALL {
            let mut st = tx.prepare(&format!(
                "INSERT INTO {} VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14, ?15)",
                class.table()
            ))?;
            for e in model.elements_of(class) {
                let (c, lo, hi) = (e.centroid, e.aabb.min, e.aabb.max);
                st.execute(params![
                    e.id.as_str(),
                    e.name,
                    e.description,
                    e.storey_id.as_str(),
                    c.x,
                    c.y,
                    c.z,
                    lo.x,
                    lo.y,
                    lo.z,
                    hi.x,
                    hi.y,
                    hi.z,
                    e.volume,
                    e.predefined_type
                ])?;
            }
        }
        let mut st = tx.prepare("INSERT INTO property VALUES (?1, ?2, ?3, ?4)")?;
        for p in &model.properties {
            st.execute(params![p.element_id.as_str(), p.element_type, p.property_name, p.property_value])?;
        }
        let mut st = tx.prepare("INSERT INTO real_geometry VALUES (?1, ?2, ?3, ?4, ?5, ?6)")?;
        for m in &model.meshes {
            let vertices: Vec<[f64; 3]> = m.mesh.vertices.iter().map(|p| p.to_array()).collect();
            let vertices = serde_json::to_string(&vertices).expect("finite vertices serialize");
            let faces = serde_json::to_string(&m.mesh.faces).expect("faces serialize");
            st.execute(params![m.element_id.as_str(), m.element_type, vertices, faces, m.solid_volume, m.approximate])?;
        }
    }
    tx.commit()?;
    Ok(())
}
