use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::output::{format_record, OutputRecord};
use super::{ChatMessage, Role};
use crate::error::{Error, Result};
use crate::taxonomy::LabelSet;

pub const PARAGRAPH_PLACEHOLDER: &str = "{{paragraph}}";
/// Last line of the system text once a fine-tuned model is used for prediction.
pub const INFER_TRIGGER: &str = "Answer.";
const SECTION_BREAK: &str = "---";

const FINETUNE_TEMPLATE: &str = include_str!("../../data/prompts/finetune.txt");
const FEWSHOT_TEMPLATE: &str = include_str!("../../data/prompts/fewshot.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    FinetuneTrain,
    FinetuneInfer,
    Fewshot,
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finetune_train" => Ok(PromptMode::FinetuneTrain),
            "finetune_infer" | "finetune" => Ok(PromptMode::FinetuneInfer),
            "fewshot" => Ok(PromptMode::Fewshot),
            other => Err(Error::validation(format!("unknown prompt mode `{other}`"))),
        }
    }
}

/// One sentence with its labels, as listed in an assistant message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sentence: String,
    pub labels: LabelSet,
}

impl AnnotatedSentence {
    pub fn new(sentence: impl Into<String>, labels: LabelSet) -> Self {
        AnnotatedSentence {
            sentence: sentence.into(),
            labels,
        }
    }
}

/// A worked example for few-shot prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub paragraph: String,
    pub annotated: Vec<AnnotatedSentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub system_instruction: String,
    /// User message text; `{{paragraph}}` is replaced by the paragraph.
    pub user_template: String,
    pub mode: PromptMode,
    pub shots: Vec<Shot>,
}

impl PromptTemplate {
    /// Parses a template file: system text, a line holding `---`, then the
    /// user message template. Without the separator the user template is
    /// just the paragraph.
    pub fn parse(text: &str, mode: PromptMode) -> Result<Self> {
        let mut system = Vec::new();
        let mut user = Vec::new();
        let mut in_user = false;
        for line in text.lines() {
            if !in_user && line.trim() == SECTION_BREAK {
                in_user = true;
            } else if in_user {
                user.push(line);
            } else {
                system.push(line);
            }
        }
        let system_instruction = system.join("\n").trim().to_string();
        let user_template = if in_user {
            user.join("\n").trim().to_string()
        } else {
            PARAGRAPH_PLACEHOLDER.to_string()
        };
        let mut tpl = PromptTemplate {
            system_instruction,
            user_template,
            mode: PromptMode::FinetuneTrain,
            shots: Vec::new(),
        };
        if mode == PromptMode::FinetuneInfer {
            tpl = tpl.for_inference();
        }
        tpl.mode = mode;
        tpl.check_text()?;
        Ok(tpl)
    }

    pub fn load(path: &Path, mode: PromptMode) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, mode)
    }

    pub fn builtin(mode: PromptMode) -> Self {
        let text = match mode {
            PromptMode::Fewshot => FEWSHOT_TEMPLATE,
            _ => FINETUNE_TEMPLATE,
        };
        Self::parse(text, mode).expect("builtin template is valid")
    }

    pub fn with_shots(mut self, shots: Vec<Shot>) -> Self {
        self.shots = shots;
        self
    }

    /// The prediction-time variant of a training template: the final line of
    /// the system text becomes the imperative trigger.
    pub fn for_inference(&self) -> Self {
        let mut lines: Vec<&str> = self.system_instruction.lines().collect();
        if lines.last().map(|l| l.trim()) != Some(INFER_TRIGGER) {
            lines.pop();
            lines.push(INFER_TRIGGER);
        }
        PromptTemplate {
            system_instruction: lines.join("\n"),
            user_template: self.user_template.clone(),
            mode: PromptMode::FinetuneInfer,
            shots: Vec::new(),
        }
    }

    fn check_text(&self) -> Result<()> {
        if self.system_instruction.is_empty() {
            return Err(Error::validation("prompt template has no system text"));
        }
        if !self.user_template.contains(PARAGRAPH_PLACEHOLDER) {
            return Err(Error::validation(format!(
                "user template lacks the {PARAGRAPH_PLACEHOLDER} placeholder"
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_text()?;
        match self.mode {
            PromptMode::Fewshot if self.shots.is_empty() => {
                Err(Error::validation("few-shot template needs at least one shot"))
            }
            PromptMode::FinetuneInfer
                if self.system_instruction.lines().last().map(str::trim) != Some(INFER_TRIGGER) =>
            {
                Err(Error::validation(format!(
                    "inference system text must end with `{INFER_TRIGGER}`"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn render_user(&self, paragraph: &str) -> String {
        self.user_template.replace(PARAGRAPH_PLACEHOLDER, paragraph)
    }

    /// Messages sent to the backend for one paragraph.
    pub fn messages(&self, paragraph: &str) -> Result<Vec<ChatMessage>> {
        self.validate()?;
        match self.mode {
            PromptMode::Fewshot => build_fewshot_prompt(self, paragraph),
            _ => {
                if paragraph.trim().is_empty() {
                    return Err(Error::validation("empty paragraph"));
                }
                Ok(vec![
                    ChatMessage::new(Role::System, &self.system_instruction),
                    ChatMessage::new(Role::User, self.render_user(paragraph)),
                ])
            }
        }
    }
}

/// Assistant content listing each sentence with its labels.
pub fn render_assistant(annotated: &[AnnotatedSentence]) -> Result<String> {
    let mut lines = Vec::with_capacity(annotated.len());
    for a in annotated {
        let s = a.sentence.as_str();
        if s.trim().is_empty() {
            return Err(Error::validation("annotated sentence is empty"));
        }
        if s.contains('\n') || s.trim() != s {
            return Err(Error::validation(format!(
                "annotated sentence must be one trimmed line: {s:?}"
            )));
        }
        lines.push(format_record(&OutputRecord::from_labels(s, a.labels)));
    }
    Ok(lines.join("\n"))
}

/// A fine-tuning example: system instruction, paragraph, labelled sentences.
pub fn build_finetune_record(
    tpl: &PromptTemplate,
    paragraph: &str,
    annotated: &[AnnotatedSentence],
) -> Result<Vec<ChatMessage>> {
    if paragraph.trim().is_empty() {
        return Err(Error::validation("empty paragraph"));
    }
    if annotated.is_empty() {
        return Err(Error::validation("fine-tuning record needs at least one sentence"));
    }
    Ok(vec![
        ChatMessage::new(Role::System, &tpl.system_instruction),
        ChatMessage::new(Role::User, tpl.render_user(paragraph)),
        ChatMessage::new(Role::Assistant, render_assistant(annotated)?),
    ])
}

/// System instruction, one user/assistant pair per shot, then the paragraph.
pub fn build_fewshot_prompt(tpl: &PromptTemplate, paragraph: &str) -> Result<Vec<ChatMessage>> {
    if tpl.mode != PromptMode::Fewshot {
        return Err(Error::validation("template is not in few-shot mode"));
    }
    if tpl.shots.is_empty() {
        return Err(Error::validation("few-shot template needs at least one shot"));
    }
    if paragraph.trim().is_empty() {
        return Err(Error::validation("empty paragraph"));
    }
    let mut out = Vec::with_capacity(2 + 2 * tpl.shots.len());
    out.push(ChatMessage::new(Role::System, &tpl.system_instruction));
    for shot in &tpl.shots {
        out.push(ChatMessage::new(Role::User, tpl.render_user(&shot.paragraph)));
        out.push(ChatMessage::new(Role::Assistant, render_assistant(&shot.annotated)?));
    }
    out.push(ChatMessage::new(Role::User, tpl.render_user(paragraph)));
    Ok(out)
}
