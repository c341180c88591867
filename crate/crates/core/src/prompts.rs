//! Named prompt templates with `{placeholder}` slots.
//!
//! The built-in catalog is compiled in; [`PromptCatalog::load_dir`] overlays
//! `<name>.txt` files from a directory so prompts can be edited without a
//! rebuild.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").unwrap());

const BUILTIN: &[(&str, &str)] = &[
    (
        "confidence_gpt",
        include_str!("../prompts/confidence_gpt.txt"),
    ),
    (
        "confidence_llama",
        include_str!("../prompts/confidence_llama.txt"),
    ),
    (
        "decontextualize",
        include_str!("../prompts/decontextualize.txt"),
    ),
    (
        "decompose_gpt",
        include_str!("../prompts/decompose_gpt.txt"),
    ),
    (
        "decompose_llama",
        include_str!("../prompts/decompose_llama.txt"),
    ),
    (
        "premise_supportive",
        include_str!("../prompts/premise_supportive.txt"),
    ),
    (
        "premise_contradictory",
        include_str!("../prompts/premise_contradictory.txt"),
    ),
    ("question_gpt", include_str!("../prompts/question_gpt.txt")),
    (
        "question_llama",
        include_str!("../prompts/question_llama.txt"),
    ),
    ("answer", include_str!("../prompts/answer.txt")),
    ("revise", include_str!("../prompts/revise.txt")),
    ("strategy_gpt", include_str!("../prompts/strategy_gpt.txt")),
    (
        "strategy_llama",
        include_str!("../prompts/strategy_llama.txt"),
    ),
    ("nli", include_str!("../prompts/nli.txt")),
];

/// Placeholders each template must contain.
const REQUIRED: &[(&str, &[&str])] = &[
    ("confidence_gpt", &["statement"]),
    ("confidence_llama", &["statement"]),
    ("decontextualize", &["context", "statement"]),
    ("decompose_gpt", &["statement"]),
    ("decompose_llama", &["statement"]),
    ("premise_supportive", &["statement"]),
    ("premise_contradictory", &["statement"]),
    ("question_gpt", &["statement"]),
    ("question_llama", &["statement"]),
    ("answer", &["question"]),
    ("revise", &["answer", "statement"]),
    ("strategy_gpt", &["statement"]),
    ("strategy_llama", &["statement"]),
    ("nli", &["premise", "hypothesis"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template:?} lacks placeholder {{{placeholder}}}")]
    MissingPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("no value for {{{placeholder}}} in template {template:?}")]
    MissingValue {
        template: String,
        placeholder: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Which model family's wording to use where the catalog ships two.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    Gpt,
    Llama,
}

impl PromptVariant {
    fn suffix(self) -> &'static str {
        match self {
            PromptVariant::Gpt => "gpt",
            PromptVariant::Llama => "llama",
        }
    }

    /// Template name for a family such as `decompose`.
    pub fn template(self, family: &str) -> String {
        format!("{family}_{}", self.suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCatalog {
    templates: BTreeMap<String, String>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptCatalog {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
            .collect();
        Self { templates }
    }

    /// Built-in catalog with every `<name>.txt` in `dir` replacing or adding
    /// the template of that name.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let io = |e: std::io::Error| PromptError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut catalog = Self::builtin();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            catalog.insert(name, text)?;
        }
        Ok(catalog)
    }

    /// Adds or replaces a template, checking required placeholders.
    pub fn insert(&mut self, name: &str, text: impl Into<String>) -> Result<(), PromptError> {
        let text = text.into();
        if let Some((_, required)) = REQUIRED.iter().find(|(n, _)| *n == name) {
            for placeholder in *required {
                if !text.contains(&format!("{{{placeholder}}}")) {
                    return Err(PromptError::MissingPlaceholder {
                        template: name.to_owned(),
                        placeholder: (*placeholder).to_owned(),
                    });
                }
            }
        }
        self.templates.insert(name.to_owned(), text);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Substitutes `{key}` slots in one pass, so values containing braces are
    /// never re-expanded. Unknown slots are left as written.
    pub fn render(&self, name: &str, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let template = self
            .get(name)
            .ok_or_else(|| PromptError::UnknownTemplate(name.to_owned()))?;
        if let Some((_, required)) = REQUIRED.iter().find(|(n, _)| *n == name) {
            for placeholder in *required {
                if !values.iter().any(|(k, _)| k == placeholder) {
                    return Err(PromptError::MissingValue {
                        template: name.to_owned(),
                        placeholder: (*placeholder).to_owned(),
                    });
                }
            }
        }
        let rendered = PLACEHOLDER.replace_all(template, |caps: &regex::Captures<'_>| {
            let key = &caps[1];
            match values.iter().find(|(k, _)| *k == key) {
                Some((_, v)) => (*v).to_owned(),
                None => caps[0].to_owned(),
            }
        });
        Ok(rendered.into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_have_their_placeholders() {
        let catalog = PromptCatalog::builtin();
        for (name, required) in REQUIRED {
            let text = catalog.get(name).unwrap();
            for p in *required {
                assert!(text.contains(&format!("{{{p}}}")), "{name} lacks {p}");
            }
        }
        assert_eq!(catalog.names().count(), BUILTIN.len());
    }

    #[test]
    fn confidence_prompt_renders() {
        let catalog = PromptCatalog::builtin();
        let out = catalog
            .render("confidence_gpt", &[("statement", "Water is wet.")])
            .unwrap();
        assert_eq!(out, "True or False? Water is wet.\n");
    }

    #[test]
    fn values_are_not_reexpanded() {
        let catalog = PromptCatalog::builtin();
        let out = catalog
            .render("revise", &[("answer", "{statement}"), ("statement", "S")])
            .unwrap();
        assert!(out.contains("**Background Knowledge**: {statement}"));
        assert!(out.contains("**Statement**: S"));
    }

    #[test]
    fn missing_value_and_unknown_template() {
        let catalog = PromptCatalog::builtin();
        assert!(matches!(
            catalog.render("revise", &[("answer", "a")]),
            Err(PromptError::MissingValue { .. })
        ));
        assert!(matches!(
            catalog.render("nope", &[]),
            Err(PromptError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("confidence_gpt.txt"), "T/F: {statement}").unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let catalog = PromptCatalog::load_dir(dir.path()).unwrap();
        assert_eq!(
            catalog
                .render("confidence_gpt", &[("statement", "x")])
                .unwrap(),
            "T/F: x"
        );

        std::fs::write(dir.path().join("nli.txt"), "no slots").unwrap();
        assert!(matches!(
            PromptCatalog::load_dir(dir.path()),
            Err(PromptError::MissingPlaceholder { .. })
        ));
    }

    #[test]
    fn variant_names() {
        assert_eq!(PromptVariant::Gpt.template("decompose"), "decompose_gpt");
        assert_eq!(PromptVariant::Llama.template("strategy"), "strategy_llama");
    }
}
