use super::SemanticsError;
use crate::step::{EntityId, StepFile};

fn si_prefix(prefix: &str) -> Option<f64> {
    Some(match prefix {
        "EXA" => 1e18,
        "PETA" => 1e15,
        "TERA" => 1e12,
        "GIGA" => 1e9,
        "MEGA" => 1e6,
        "KILO" => 1e3,
        "HECTO" => 1e2,
        "DECA" => 1e1,
        "DECI" => 1e-1,
        "CENTI" => 1e-2,
        "MILLI" => 1e-3,
        "MICRO" => 1e-6,
        "NANO" => 1e-9,
        "PICO" => 1e-12,
        "FEMTO" => 1e-15,
        "ATTO" => 1e-18,
        _ => return None,
    })
}

/// Factor converting model length values to meters.
///
/// Uses the unit assignment of the project, or the first unit assignment in
/// the file when the project has none.
pub fn length_unit_scale(file: &StepFile) -> Result<f64, SemanticsError> {
    let assignment = file
        .entities_of_type("IFCPROJECT", false)
        .first()
        .and_then(|p| p.attr_ref(8))
        .or_else(|| file.entities_of_type("IFCUNITASSIGNMENT", false).first().map(|u| u.id))
        .ok_or(SemanticsError::MissingUnit)?;
    let units = file.get(assignment).map(|a| a.attr_ref_list(0)).unwrap_or_default();
    units
        .into_iter()
        .find_map(|u| {
            let e = file.get(u)?;
            (e.attr_enum(1) == Some("LENGTHUNIT")).then(|| unit_scale(file, u, 0))
        })
        .flatten()
        .ok_or(SemanticsError::MissingUnit)
}

fn unit_scale(file: &StepFile, id: EntityId, depth: usize) -> Option<f64> {
    if depth > 8 {
        return None;
    }
    let e = file.get(id)?;
    match e.type_name.as_str() {
        "IFCSIUNIT" => {
            if e.attr_enum(3) != Some("METRE") {
                return None;
            }
            match e.attr_enum(2) {
                Some(p) => si_prefix(p),
                None => Some(1.0),
            }
        }
        "IFCCONVERSIONBASEDUNIT" | "IFCCONVERSIONBASEDUNITWITHOFFSET" => {
            let measure = file.get(e.attr_ref(3)?)?;
            let value = measure.attr_f64(0)?;
            let base = unit_scale(file, measure.attr_ref(1)?, depth + 1)?;
            Some(value * base)
        }
        _ => None,
    }
}
