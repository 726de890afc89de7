//! Design-procedure prompts: prefix, design description, design context and
//! postfix, followed by the reference-surface program, plus the repair
//! prompts sent after a failed attempt.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("full mode needs a reference surface program")]
    MissingReference,
    #[error("design description is empty")]
    EmptyDescription,
    #[error("unknown prompt mode {0:?}; expected full, minus-rt or minus-r")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    /// Design context plus reference surface program.
    Full,
    /// No design context, no reference surface.
    MinusRt,
    /// No reference surface; the context is replaced by a one-line shape
    /// guidance.
    MinusR,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Full => "full",
            PromptMode::MinusRt => "minus-rt",
            PromptMode::MinusR => "minus-r",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptMode {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(PromptMode::Full),
            "minus-rt" | "minus_rt" | "-rt" => Ok(PromptMode::MinusRt),
            "minus-r" | "minus_r" | "-r" => Ok(PromptMode::MinusR),
            _ => Err(PromptError::UnknownMode(s.to_string())),
        }
    }
}

pub const BRACKET_PREFIX: &str =
    "Use Python CadQuery library to write a CAD program of a {noun} that is described as follows.";
pub const BRACKET_CONTEXT: &str = "The shapes of the {noun} look smooth. The {noun} should conform to the curvature of the reference surface in the CAD program below. After the {noun} is created, the reference surface should be removed.";
pub const SHAPE_GUIDANCE: &str = "The shapes of the {noun} look smooth and organic.";
pub const POSTFIX: &str = "Make sure the generated CAD model is watertight solid. Please export the generated CAD model to output.stl file and output.step file. Please do not visualize it. Here is the document of CadQuery for your reference (https://cadquery.readthedocs.io/en/latest/index.html). Do not output explanation.";
pub const REPAIR_PREAMBLE: &str =
    "The previous program failed. Fix the errors and output the complete corrected program.";

/// Text that stays fixed for one design category. `{noun}` in the
/// templates is replaced by `noun`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryConfig {
    pub noun: String,
    pub prefix: String,
    pub context: String,
    pub shape_guidance: String,
    pub postfix: String,
}

impl Default for CategoryConfig {
    fn default() -> Self {
        Self::bracket()
    }
}

impl CategoryConfig {
    pub fn bracket() -> Self {
        Self::for_noun("bracket")
    }

    /// Bracket wording with a different noun.
    pub fn for_noun(noun: &str) -> Self {
        CategoryConfig {
            noun: noun.to_string(),
            prefix: BRACKET_PREFIX.to_string(),
            context: BRACKET_CONTEXT.to_string(),
            shape_guidance: SHAPE_GUIDANCE.to_string(),
            postfix: POSTFIX.to_string(),
        }
    }

    fn fill(&self, template: &str) -> String {
        template.replace("{noun}", &self.noun)
    }
}

/// Byte budgets for the parts of a repair prompt that come from the failed
/// attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairBudget {
    /// Error text keeps its last `error_bytes` bytes.
    pub error_bytes: usize,
    /// The previous program keeps its first `program_bytes` bytes.
    pub program_bytes: usize,
}

impl Default for RepairBudget {
    fn default() -> Self {
        RepairBudget {
            error_bytes: 4096,
            program_bytes: 32 * 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub mode: PromptMode,
    pub prefix: String,
    pub description: String,
    /// Empty in minus-rt mode.
    pub context: String,
    pub postfix: String,
    pub reference_script: Option<String>,
    /// Repair section appended after a failed attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
    pub rendered: String,
}

impl PromptBundle {
    /// The prompt without any repair section.
    pub fn base_rendered(&self) -> String {
        let mut parts: Vec<&str> = vec![&self.prefix, &self.description];
        if !self.context.is_empty() {
            parts.push(&self.context);
        }
        parts.push(&self.postfix);
        if let Some(script) = &self.reference_script {
            parts.push(script);
        }
        parts.join("\n")
    }
}

pub fn compose(
    mode: PromptMode,
    category: &CategoryConfig,
    description: &str,
    reference_script: Option<&str>,
) -> Result<PromptBundle, PromptError> {
    let description = description.trim();
    if description.is_empty() {
        return Err(PromptError::EmptyDescription);
    }
    let (context, reference_script) = match mode {
        PromptMode::Full => (
            category.fill(&category.context),
            Some(reference_script.ok_or(PromptError::MissingReference)?.to_string()),
        ),
        PromptMode::MinusRt => (String::new(), None),
        PromptMode::MinusR => (category.fill(&category.shape_guidance), None),
    };
    let mut bundle = PromptBundle {
        mode,
        prefix: category.fill(&category.prefix),
        description: description.to_string(),
        context,
        postfix: category.fill(&category.postfix),
        reference_script,
        repair: None,
        rendered: String::new(),
    };
    bundle.rendered = bundle.base_rendered();
    Ok(bundle)
}

/// Last `max` bytes of `s`, moved forward to a char boundary.
pub fn tail_bytes(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

/// First `max` bytes of `s`, moved back to a char boundary.
pub fn head_bytes(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// Builds the prompt for the next attempt: the original prompt, the fixed
/// repair preamble, the failed program and the error text. Any earlier
/// repair section is replaced, not stacked.
pub fn repair_prompt(
    bundle: &PromptBundle,
    prior_program: &str,
    error_text: &str,
    budget: &RepairBudget,
) -> PromptBundle {
    let program = head_bytes(prior_program, budget.program_bytes);
    let errors = tail_bytes(error_text, budget.error_bytes);
    let repair = format!(
        "{REPAIR_PREAMBLE}\nPrevious program:\n```python\n{program}\n```\nErrors:\n{errors}"
    );
    let mut next = bundle.clone();
    next.rendered = format!("{}\n{repair}", bundle.base_rendered());
    next.repair = Some(repair);
    next
}

/// Fixed overhead a repair section adds on top of its two budgets.
pub fn repair_overhead() -> usize {
    format!("\n{REPAIR_PREAMBLE}\nPrevious program:\n```python\n\n```\nErrors:\n").len()
}
