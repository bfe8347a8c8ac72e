use std::fmt::Write as _;

use super::strings::encode_step_string;
use super::{StepFile, StepValue};

pub(super) fn write_file(file: &StepFile) -> String {
    let mut out = String::from("ISO-10303-21;\nHEADER;\n");
    for (name, attrs) in &file.header.records {
        write_record(&mut out, name, attrs);
        out.push_str(";\n");
    }
    out.push_str("ENDSEC;\nDATA;\n");
    for e in file.entities() {
        let _ = write!(out, "{}=", e.id);
        if e.extra_records.is_empty() {
            write_record(&mut out, &e.type_name, &e.attributes);
        } else {
            out.push('(');
            write_record(&mut out, &e.type_name, &e.attributes);
            for (name, attrs) in &e.extra_records {
                write_record(&mut out, name, attrs);
            }
            out.push(')');
        }
        out.push_str(";\n");
    }
    out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    out
}

fn write_record(out: &mut String, name: &str, attrs: &[StepValue]) {
    out.push_str(name);
    write_list(out, attrs);
}

fn write_list(out: &mut String, items: &[StepValue]) {
    out.push('(');
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_value(out, v);
    }
    out.push(')');
}

fn write_value(out: &mut String, v: &StepValue) {
    match v {
        StepValue::Integer(i) => {
            let _ = write!(out, "{i}");
        }
        StepValue::Real(r) => out.push_str(&format_real(*r)),
        StepValue::String(s) => {
            out.push('\'');
            out.push_str(&encode_step_string(s));
            out.push('\'');
        }
        StepValue::Binary(hex) => {
            let _ = write!(out, "\"{hex}\"");
        }
        StepValue::Enum(e) => {
            let _ = write!(out, ".{e}.");
        }
        StepValue::Ref(id) => {
            let _ = write!(out, "{id}");
        }
        StepValue::Typed(name, inner) => {
            out.push_str(name);
            out.push('(');
            write_value(out, inner);
            out.push(')');
        }
        StepValue::List(items) => write_list(out, items),
        StepValue::Unset => out.push('$'),
        StepValue::Derived => out.push('*'),
    }
}

/// Shortest round-trip form in SPF real syntax: `1.`, `0.25`, `1.5E-20`.
pub(super) fn format_real(r: f64) -> String {
    if !r.is_finite() {
        // SPF has no literal for these
        return "0.".to_owned();
    }
    let s = format!("{r:?}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let mantissa = if mantissa.contains('.') { mantissa.to_owned() } else { format!("{mantissa}.") };
            format!("{mantissa}E{exp}")
        }
        None => s.strip_suffix(".0").map(|m| format!("{m}.")).unwrap_or(s),
    }
}
