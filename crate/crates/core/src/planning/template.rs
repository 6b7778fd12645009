//! Prompt templates with `{name}` placeholders.

use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template} has no value for {{{name}}}")]
    Missing { template: String, name: String },
    #[error("template file {0}: {1}")]
    Io(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    name: String,
    text: String,
}

fn placeholder_at(text: &str, start: usize) -> Option<(usize, &str)> {
    let rest = &text[start + 1..];
    let end = rest.find('}')?;
    let name = &rest[..end];
    let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    valid.then_some((start + 1 + end + 1, name))
}

impl Template {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self { name: name.into(), text: text.into() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Placeholder names the template uses.
    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut i = 0;
        while let Some(off) = self.text[i..].find('{') {
            let start = i + off;
            match placeholder_at(&self.text, start) {
                Some((next, name)) => {
                    out.insert(name.to_string());
                    i = next;
                }
                None => i = start + 1,
            }
        }
        out
    }

    /// Substitutes every `{name}`; a placeholder without a value is an error.
    /// Braces that do not form a placeholder are copied through.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        let mut i = 0;
        while let Some(off) = self.text[i..].find('{') {
            let start = i + off;
            out.push_str(&self.text[i..start]);
            match placeholder_at(&self.text, start) {
                Some((next, name)) => {
                    let value = vars.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| {
                        TemplateError::Missing { template: self.name.clone(), name: name.to_string() }
                    })?;
                    out.push_str(value);
                    i = next;
                }
                None => {
                    out.push('{');
                    i = start + 1;
                }
            }
        }
        out.push_str(&self.text[i..]);
        Ok(out)
    }
}

/// The prompt set used by planning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    pub summary: Template,
    pub strategic_plan: Template,
    pub plan_retry: Template,
    pub tactical_review: Template,
    pub expert_doc: Template,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self {
            summary: Template::new("summary", include_str!("../../templates/summary.txt")),
            strategic_plan: Template::new("strategic_plan", include_str!("../../templates/strategic_plan.txt")),
            plan_retry: Template::new("plan_retry", include_str!("../../templates/plan_retry.txt")),
            tactical_review: Template::new("tactical_review", include_str!("../../templates/tactical_review.txt")),
            expert_doc: Template::new("expert_doc", include_str!("../../templates/expert_doc.txt")),
        }
    }

    /// Built-in set with any `<name>.txt` found in `dir` taking precedence.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::builtin();
        for slot in
            [&mut t.summary, &mut t.strategic_plan, &mut t.plan_retry, &mut t.tactical_review, &mut t.expert_doc]
        {
            let path = dir.join(format!("{}.txt", slot.name));
            if path.exists() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| TemplateError::Io(path.display().to_string(), e.to_string()))?;
                slot.text = text;
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_passes_stray_braces() {
        let t = Template::new("t", "a {x} b {y} {not a var} {}");
        assert_eq!(t.render(&[("x", "1"), ("y", "{x}")]).unwrap(), "a 1 b {x} {not a var} {}");
        assert_eq!(
            t.render(&[("x", "1")]).unwrap_err(),
            TemplateError::Missing { template: "t".into(), name: "y".into() }
        );
    }

    #[test]
    fn builtin_templates_use_the_documented_placeholders() {
        let t = Templates::builtin();
        let plan = t.strategic_plan.placeholders();
        for name in ["summary", "observations", "expert_doc", "suggestions"] {
            assert!(plan.contains(name), "{name}");
        }
        let review = t.tactical_review.placeholders();
        assert!(review.contains("unit_view") && review.contains("assignment"));
        assert!(t.expert_doc.placeholders().contains("expert_doc"));
    }

    #[test]
    fn directory_overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("summary.txt"), "custom {side}").unwrap();
        let t = Templates::from_dir(dir.path()).unwrap();
        assert_eq!(t.summary.text(), "custom {side}");
        assert_eq!(t.tactical_review, Templates::builtin().tactical_review);
    }
}
