use std::path::Path;

use super::trace::ResultEntry;
use super::AgentError;
use crate::store::SchemaSummary;

/// Bumped whenever a shipped template changes wording.
pub const PROMPT_VERSION: &str = "1";

const SYSTEM: &str = include_str!("../../prompts/system.txt");
const LOOP: &str = include_str!("../../prompts/loop.txt");
const FINAL: &str = include_str!("../../prompts/final.txt");

/// The three prompt templates. Placeholders are `{name}` with a lower-case
/// identifier; any other brace text is left alone.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptTemplates {
    pub system: String,
    pub iteration: String,
    pub final_answer: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates { system: SYSTEM.to_owned(), iteration: LOOP.to_owned(), final_answer: FINAL.to_owned() }
    }
}

const SYSTEM_KEYS: [&str; 4] = ["element_types", "graph_summary", "property_names", "user_input"];
const LOOP_KEYS: [&str; 4] = ["user_input", "schema_summary", "graph_summary", "results"];
const FINAL_KEYS: [&str; 2] = ["user_input", "results"];

impl PromptTemplates {
    /// Reads `system.txt`, `loop.txt` and `final.txt` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, AgentError> {
        let read = |name: &str| {
            let path = dir.as_ref().join(name);
            std::fs::read_to_string(&path).map_err(|e| AgentError::InvalidConfig(format!("{}: {e}", path.display())))
        };
        let t = PromptTemplates {
            system: read("system.txt")?,
            iteration: read("loop.txt")?,
            final_answer: read("final.txt")?,
        };
        t.validate()?;
        Ok(t)
    }

    /// Every template must use each of its placeholders.
    pub fn validate(&self) -> Result<(), AgentError> {
        for (name, text, keys) in [
            ("system", &self.system, &SYSTEM_KEYS[..]),
            ("loop", &self.iteration, &LOOP_KEYS[..]),
            ("final", &self.final_answer, &FINAL_KEYS[..]),
        ] {
            if let Some(k) = keys.iter().find(|k| !text.contains(&format!("{{{k}}}"))) {
                return Err(AgentError::InvalidConfig(format!("{name} template lacks {{{k}}}")));
            }
        }
        Ok(())
    }

    pub fn render_system(&self, schema: &SchemaSummary, graph_summary: &str, user_query: &str) -> String {
        fill(
            &self.system,
            &[
                ("element_types", &schema.element_types_text()),
                ("graph_summary", graph_summary.trim_end()),
                ("property_names", &schema.property_names_text()),
                ("user_input", user_query),
            ],
        )
    }

    pub fn render_iteration(
        &self,
        schema: &SchemaSummary,
        graph_summary: &str,
        user_query: &str,
        results: &[ResultEntry],
    ) -> String {
        fill(
            &self.iteration,
            &[
                ("user_input", user_query),
                ("schema_summary", schema.to_text().trim_end()),
                ("graph_summary", graph_summary.trim_end()),
                ("results", &render_results(results)),
            ],
        )
    }

    pub fn render_final(&self, user_query: &str, results: &[ResultEntry]) -> String {
        fill(&self.final_answer, &[("user_input", user_query), ("results", &render_results(results))])
    }
}

/// Renders the system prompt with the shipped template.
pub fn render_system_prompt(schema: &SchemaSummary, graph_summary: &str, user_query: &str) -> String {
    PromptTemplates::default().render_system(schema, graph_summary, user_query)
}

/// All entries in order, or `(none)`.
pub fn render_results(results: &[ResultEntry]) -> String {
    if results.is_empty() {
        return "(none)".to_owned();
    }
    results.iter().map(ResultEntry::to_prompt_text).collect::<Vec<_>>().join("\n\n")
}

/// Single-pass substitution, so inserted values are never re-expanded.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let ident_len = after.find(|c: char| !(c.is_ascii_lowercase() || c == '_')).unwrap_or(after.len());
        let value = (ident_len > 0 && after[ident_len..].starts_with('}'))
            .then(|| values.iter().find(|(k, _)| *k == &after[..ident_len]))
            .flatten();
        match value {
            Some((_, v)) => {
                out.push_str(v);
                rest = &after[ident_len + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_leaves_json_and_unknown_keys() {
        let s = fill(r#"a {x} {"k": 1} {y} {x}"#, &[("x", "{y}")]);
        assert_eq!(s, r#"a {y} {"k": 1} {y} {y}"#);
    }

    #[test]
    fn shipped_templates_are_complete() {
        PromptTemplates::default().validate().unwrap();
        let broken = PromptTemplates { final_answer: "no placeholders".into(), ..PromptTemplates::default() };
        assert!(broken.validate().is_err());
    }

    #[test]
    fn empty_store_prompt() {
        let schema =
            SchemaSummary { tables: vec![], element_types: vec![], property_names: vec![], distinct_property_names: 0 };
        let p = render_system_prompt(&schema, "", "hi");
        assert!(p.contains("AVAILABLE ELEMENT TYPES: (none)"));
        assert!(p.contains("SQL must be SELECT-only"));
        assert!(p.ends_with("User Query: hi\n"));
        assert!(p.matches("GRAPH_NEEDED:").count() >= 4);
        assert!(p.matches("SQL_NEEDED:").count() >= 4);
    }
}
