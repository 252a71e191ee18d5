//! Line-oriented output grammar shared by fine-tuning export and parsing:
//!
//! ```text
//! <sentence text> -> [Label, Label, ...]
//! <sentence text> -> []
//! ```
//!
//! Labels are concept display names in registry order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::LabelSet;

const ARROW: &str = " -> [";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub sentence: String,
    pub labels: Vec<String>,
}

impl OutputRecord {
    pub fn from_labels(sentence: &str, labels: LabelSet) -> Self {
        OutputRecord {
            sentence: sentence.to_string(),
            labels: labels.iter().map(|c| c.display_name().to_string()).collect(),
        }
    }
}

pub fn format_record(record: &OutputRecord) -> String {
    format!("{}{}{}]", record.sentence, ARROW, record.labels.join(", "))
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Parses model output. Blank lines and code-fence lines are skipped; any
/// other line not in the grammar is an error carrying its line number.
pub fn parse_model_output(raw: &str) -> Result<Vec<OutputRecord>> {
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || is_fence(trimmed) {
            continue;
        }
        let fail = || Error::ModelOutput {
            line: idx + 1,
            raw_line: line.to_string(),
            raw: raw.to_string(),
        };
        let body = trimmed.strip_suffix(']').ok_or_else(fail)?;
        let (sentence, labels) = body.rsplit_once(ARROW).ok_or_else(fail)?;
        let sentence = sentence.trim();
        if sentence.is_empty() {
            return Err(fail());
        }
        let labels = if labels.trim().is_empty() {
            Vec::new()
        } else {
            let parts: Vec<String> = labels.split(',').map(|l| l.trim().to_string()).collect();
            if parts.iter().any(|p| p.is_empty() || p.contains('[') || p.contains(']')) {
                return Err(fail());
            }
            parts
        };
        out.push(OutputRecord {
            sentence: sentence.to_string(),
            labels,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_records() {
        let r = parse_model_output("Keep at 4 °C. -> [Measurement, Temperature]").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].sentence, "Keep at 4 °C.");
        assert_eq!(r[0].labels, vec!["Measurement", "Temperature"]);
        let r = parse_model_output("Some sentence. -> []").unwrap();
        assert!(r[0].labels.is_empty());
    }

    #[test]
    fn fences_and_blank_lines() {
        let raw = "```text\nA. -> [Mass]\n\nB -> x. -> []\n```\n";
        let r = parse_model_output(raw).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].sentence, "B -> x.");
    }

    #[test]
    fn bad_line_reports_position() {
        let raw = "A. -> [Mass]\nnot a record\n";
        match parse_model_output(raw) {
            Err(Error::ModelOutput { line, raw_line, raw: all }) => {
                assert_eq!(line, 2);
                assert_eq!(raw_line, "not a record");
                assert_eq!(all, raw);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_model_output("A. -> [Mass,]").is_err());
        assert!(parse_model_output(" -> [Mass]").is_err());
        assert!(parse_model_output("A. -> [Mass").is_err());
    }
}
