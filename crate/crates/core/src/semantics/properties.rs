use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Guid;
use crate::step::{EntityId, StepEntity, StepFile, StepValue};

/// One property value of an element, stringified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub element_id: Guid,
    /// Base IFC class name, e.g. `IfcDoor`.
    pub element_type: String,
    /// Name of the property set the value came from (not persisted).
    pub property_set: String,
    pub property_name: String,
    /// Never empty.
    pub property_value: String,
}

/// Element id to property set ids, from `IFCRELDEFINESBYPROPERTIES`.
#[derive(Debug, Default)]
pub struct PropertyIndex {
    sets: HashMap<EntityId, Vec<EntityId>>,
}

impl PropertyIndex {
    pub fn build(file: &StepFile) -> Self {
        let mut sets: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
        for rel in file.entities_of_type("IFCRELDEFINESBYPROPERTIES", false) {
            let Some(definition) = rel.attr_ref(5) else { continue };
            for obj in rel.attr_ref_list(4) {
                sets.entry(obj).or_default().push(definition);
            }
        }
        PropertyIndex { sets }
    }
}

/// Single-value properties of `element` in relation order, then property order.
pub fn extract_properties(
    file: &StepFile,
    index: &PropertyIndex,
    element: &StepEntity,
    element_id: &Guid,
    element_type: &str,
) -> Vec<PropertyRecord> {
    let mut out = Vec::new();
    for &set_id in index.sets.get(&element.id).map(Vec::as_slice).unwrap_or(&[]) {
        let Some(set) = file.get(set_id).filter(|s| s.type_name == "IFCPROPERTYSET") else {
            continue;
        };
        let set_name = set.attr_str(2).unwrap_or("").to_owned();
        for prop_id in set.attr_ref_list(4) {
            let Some(prop) = file.get(prop_id).filter(|p| p.type_name == "IFCPROPERTYSINGLEVALUE") else {
                continue;
            };
            let (Some(name), Some(value)) = (prop.attr_str(0), prop.attr(2).and_then(stringify_value)) else {
                continue;
            };
            out.push(PropertyRecord {
                element_id: element_id.clone(),
                element_type: element_type.to_owned(),
                property_set: set_name.clone(),
                property_name: name.to_owned(),
                property_value: value,
            });
        }
    }
    out
}

/// Text form of a nominal value; `None` for unset or empty values.
pub fn stringify_value(v: &StepValue) -> Option<String> {
    let s = match v {
        StepValue::Typed(ty, inner) if ty == "IFCBOOLEAN" || ty == "IFCLOGICAL" => match inner.as_enum()? {
            "T" => "True".to_owned(),
            "F" => "False".to_owned(),
            "U" => "Unknown".to_owned(),
            other => other.to_owned(),
        },
        StepValue::Typed(_, inner) => return stringify_value(inner),
        StepValue::Real(r) => format_real(*r),
        StepValue::Integer(i) => i.to_string(),
        StepValue::String(s) => s.clone(),
        StepValue::Enum(e) => e.clone(),
        _ => return None,
    };
    (!s.is_empty()).then_some(s)
}

/// Shortest round-trip decimal; integral values keep a trailing `.0`.
pub fn format_real(r: f64) -> String {
    let s = r.to_string();
    if r.is_finite() && !s.contains('.') {
        format!("{s}.0")
    } else {
        s
    }
}
