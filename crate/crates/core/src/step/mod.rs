//! ISO 10303-21 (STEP physical file) reader and writer.
//!
//! The reader keeps every instance of the DATA section, including entity
//! types it knows nothing about. Downstream code filters by type name.

mod parse;
mod strings;
mod write;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

pub use parse::parse_step;
pub use strings::{decode_step_string, encode_step_string};

/// Files larger than this are refused outright.
pub const MAX_FILE_BYTES: u64 = 2 * 1024 * 1024 * 1024;

/// Instance name (`#123`) of an entity in the DATA section.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// One attribute value of an entity instance.
#[derive(Clone, Debug, PartialEq)]
pub enum StepValue {
    Integer(i64),
    Real(f64),
    /// Decoded string (ISO 10303-21 escapes already resolved).
    String(String),
    /// Binary literal, kept as its hex digits.
    Binary(String),
    /// Enumeration token without the surrounding dots, e.g. `T` for `.T.`.
    Enum(String),
    Ref(EntityId),
    /// Typed parameter such as `IFCLABEL('x')`.
    Typed(String, Box<StepValue>),
    List(Vec<StepValue>),
    /// `$`
    Unset,
    /// `*`
    Derived,
}

impl StepValue {
    pub fn as_ref_id(&self) -> Option<EntityId> {
        match self {
            StepValue::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            StepValue::String(s) => Some(s),
            StepValue::Typed(_, inner) => inner.as_str(),
            _ => None,
        }
    }

    /// Numeric value; integers widen to `f64`, typed wrappers are looked through.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            StepValue::Real(v) => Some(*v),
            StepValue::Integer(v) => Some(*v as f64),
            StepValue::Typed(_, inner) => inner.as_f64(),
            _ => None,
        }
    }

    pub fn as_enum(&self) -> Option<&str> {
        match self {
            StepValue::Enum(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[StepValue]> {
        match self {
            StepValue::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn is_unset(&self) -> bool {
        matches!(self, StepValue::Unset | StepValue::Derived)
    }

    /// Calls `f` for every entity reference nested in this value.
    pub fn visit_refs(&self, f: &mut impl FnMut(EntityId)) {
        match self {
            StepValue::Ref(id) => f(*id),
            StepValue::Typed(_, inner) => inner.visit_refs(f),
            StepValue::List(items) => items.iter().for_each(|v| v.visit_refs(f)),
            _ => {}
        }
    }
}

/// One instance of the DATA section.
#[derive(Clone, Debug, PartialEq)]
pub struct StepEntity {
    pub id: EntityId,
    /// Upper-case entity type, e.g. `IFCWALL`.
    pub type_name: String,
    pub attributes: Vec<StepValue>,
    /// Further records of a complex (multi-record) instance, in file order.
    pub extra_records: Vec<(String, Vec<StepValue>)>,
}

impl StepEntity {
    pub fn attr(&self, index: usize) -> Option<&StepValue> {
        self.attributes.get(index)
    }

    pub fn attr_str(&self, index: usize) -> Option<&str> {
        self.attr(index).and_then(StepValue::as_str)
    }

    pub fn attr_ref(&self, index: usize) -> Option<EntityId> {
        self.attr(index).and_then(StepValue::as_ref_id)
    }

    pub fn attr_f64(&self, index: usize) -> Option<f64> {
        self.attr(index).and_then(StepValue::as_f64)
    }

    pub fn attr_enum(&self, index: usize) -> Option<&str> {
        self.attr(index).and_then(StepValue::as_enum)
    }

    pub fn attr_list(&self, index: usize) -> Option<&[StepValue]> {
        self.attr(index).and_then(StepValue::as_list)
    }

    /// References held by a list attribute, skipping non-reference items.
    pub fn attr_ref_list(&self, index: usize) -> Vec<EntityId> {
        self.attr_list(index).map(|items| items.iter().filter_map(StepValue::as_ref_id).collect()).unwrap_or_default()
    }

    pub fn is_a(&self, type_name: &str) -> bool {
        self.type_name == type_name
    }
}

/// Header section records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepHeader {
    /// FILE_DESCRIPTION description strings.
    pub description: Vec<String>,
    /// All string values of FILE_NAME, flattened in order.
    pub file_name: Vec<String>,
    /// FILE_SCHEMA identifiers, e.g. `["IFC4"]`.
    pub schema_identifiers: Vec<String>,
    /// Raw header records in file order, used when writing the file back.
    pub records: Vec<(String, Vec<StepValue>)>,
}

/// A parsed SPF document. Immutable once built.
#[derive(Clone, Debug, Default)]
pub struct StepFile {
    pub header: StepHeader,
    entities: BTreeMap<EntityId, StepEntity>,
    by_type: HashMap<String, Vec<EntityId>>,
}

impl PartialEq for StepFile {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.entities == other.entities
    }
}

/// Supported-element subtypes. Anything not listed needs an exact type match.
const SUBTYPES: &[(&str, &[&str])] = &[
    ("IFCWALL", &["IFCWALLSTANDARDCASE", "IFCWALLELEMENTEDCASE"]),
    ("IFCSLAB", &["IFCSLABSTANDARDCASE", "IFCSLABELEMENTEDCASE"]),
    ("IFCDOOR", &["IFCDOORSTANDARDCASE"]),
    ("IFCWINDOW", &["IFCWINDOWSTANDARDCASE"]),
    ("IFCCOLUMN", &["IFCCOLUMNSTANDARDCASE"]),
    ("IFCBEAM", &["IFCBEAMSTANDARDCASE"]),
    ("IFCMEMBER", &["IFCMEMBERSTANDARDCASE"]),
    ("IFCPLATE", &["IFCPLATESTANDARDCASE"]),
    ("IFCOPENINGELEMENT", &["IFCOPENINGSTANDARDCASE"]),
];

/// Known subtypes of `type_name` (not including itself).
pub fn subtypes_of(type_name: &str) -> &'static [&'static str] {
    SUBTYPES.iter().find(|(base, _)| *base == type_name).map(|(_, subs)| *subs).unwrap_or(&[])
}

impl StepFile {
    pub(crate) fn from_parts(header: StepHeader, entities: BTreeMap<EntityId, StepEntity>) -> Self {
        let mut by_type: HashMap<String, Vec<EntityId>> = HashMap::new();
        for (id, entity) in &entities {
            by_type.entry(entity.type_name.clone()).or_default().push(*id);
        }
        StepFile { header, entities, by_type }
    }

    /// Reads and parses a file, refusing anything above [`MAX_FILE_BYTES`].
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StepError> {
        let path = path.as_ref();
        let size = std::fs::metadata(path)?.len();
        if size > MAX_FILE_BYTES {
            return Err(StepError::TooLarge { size });
        }
        let bytes = std::fs::read(path)?;
        parse_step(&bytes)
    }

    pub fn get(&self, id: EntityId) -> Option<&StepEntity> {
        self.entities.get(&id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// All instances in ascending id order.
    pub fn entities(&self) -> impl Iterator<Item = &StepEntity> {
        self.entities.values()
    }

    /// Instances of one type in ascending id order. Unknown types yield nothing.
    pub fn entities_of_type(&self, type_name: &str, include_subtypes: bool) -> Vec<&StepEntity> {
        let type_name = type_name.to_ascii_uppercase();
        let mut ids: Vec<EntityId> = self.by_type.get(&type_name).cloned().unwrap_or_default();
        if include_subtypes {
            for sub in subtypes_of(&type_name) {
                if let Some(more) = self.by_type.get(*sub) {
                    ids.extend_from_slice(more);
                }
            }
            ids.sort_unstable();
        }
        ids.iter().filter_map(|id| self.entities.get(id)).collect()
    }

    /// First FILE_SCHEMA identifier, upper-cased (e.g. `IFC2X3`, `IFC4`).
    pub fn schema(&self) -> Option<String> {
        self.header.schema_identifiers.first().map(|s| s.to_ascii_uppercase())
    }

    /// Serializes back to SPF text.
    pub fn to_spf(&self) -> String {
        write::write_file(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { offset: usize, line: usize, column: usize, message: String },
    #[error("dangling reference(s): {}", fmt_ids(.ids))]
    DanglingReference { ids: Vec<EntityId> },
    #[error("missing {section} section")]
    MissingSection { section: &'static str },
    #[error("file is {size} bytes, above the 2 GiB limit")]
    TooLarge { size: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_ids(ids: &[EntityId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(data: &str) -> String {
        format!(
            "ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION(('ViewDefinition'),'2;1');\n\
             FILE_NAME('t.ifc','2024-01-01T00:00:00',('a'),('o'),'p','s','');\n\
             FILE_SCHEMA(('IFC4'));\nENDSEC;\nDATA;\n{data}\nENDSEC;\nEND-ISO-10303-21;\n"
        )
    }

    #[test]
    fn subtype_lookup() {
        let f =
            parse_step(doc("#1=IFCWALLSTANDARDCASE('a',$,$,$,$,$,$,$);\n#2=IFCWALL('b',$,$,$,$,$,$,$);").as_bytes())
                .unwrap();
        let exact: Vec<_> = f.entities_of_type("IFCWALL", false).iter().map(|e| e.id.0).collect();
        assert_eq!(exact, vec![2]);
        let all: Vec<_> = f.entities_of_type("IfcWall", true).iter().map(|e| e.id.0).collect();
        assert_eq!(all, vec![1, 2]);
        assert!(f.entities_of_type("IFCWALLSTANDARDCASE", true).len() == 1);
        assert!(f.entities_of_type("IFCNOTHING", true).is_empty());
    }

    #[test]
    fn empty_data_section() {
        let f = parse_step(doc("").as_bytes()).unwrap();
        assert!(f.is_empty());
        assert!(f.entities_of_type("IFCSPACE", true).is_empty());
        assert_eq!(f.schema().as_deref(), Some("IFC4"));
    }
}
