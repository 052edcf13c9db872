//! Synthetic demonstrations for senses the corpus does not cover.
//!
//! Each gap sense is rendered into a prompt from a template file, sent to a
//! chat-completion endpoint (or written out for offline execution), and the
//! reply is parsed into a sentence pair that must contain both segments.

mod client;

pub use client::{
    call_llm, ChatMessage, ChatRequest, ChatTransport, EndpointConfig, HttpTransport, LlmOutcome, TransportError,
    API_KEY_ENV,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{read_jsonl, write_jsonl};
use crate::error::{Error, Result};
use crate::lexicon::SensePair;
use crate::text::{contains_contiguous, fill_placeholders, language_name, LangPair, PairTools};

const DEFAULT_TEMPLATE: &str = include_str!("../../resources/augment_prompt.txt");
pub const NO_DEFINITION: &str = "(no definition available)";
const PLACEHOLDERS: [&str; 5] = [
    "source_lang",
    "target_lang",
    "source_segment",
    "target_segment",
    "definition",
];

/// Prompt text with `{source_lang}`, `{target_lang}`, `{source_segment}`,
/// `{target_segment}` and `{definition}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let missing: Vec<&str> = PLACEHOLDERS
            .iter()
            .copied()
            .filter(|p| !text.contains(&format!("{{{p}}}")))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "prompt template is missing placeholder(s): {}",
                missing.iter().map(|p| format!("{{{p}}}")).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(Self { text })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, values: &[(&str, &str)]) -> String {
        fill_placeholders(&self.text, values)
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            text: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentPrompt {
    pub sense: SensePair,
    pub rendered_text: String,
}

pub fn render_prompts(gaps: &[SensePair], template: &PromptTemplate, langs: &LangPair) -> Vec<AugmentPrompt> {
    let (src_name, tgt_name) = (language_name(&langs.source), language_name(&langs.target));
    gaps.iter()
        .map(|sense| {
            let definition = sense.definition.as_deref().unwrap_or(NO_DEFINITION);
            let rendered_text = template.render(&[
                ("source_lang", &src_name),
                ("target_lang", &tgt_name),
                ("source_segment", &sense.source_text),
                ("target_segment", &sense.target_text),
                ("definition", definition),
            ]);
            AugmentPrompt {
                sense: sense.clone(),
                rendered_text,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedPair {
    pub sense_id: String,
    #[serde(rename = "source")]
    pub source_text: String,
    #[serde(rename = "target")]
    pub target_text: String,
    #[serde(skip)]
    pub raw_response: String,
    pub valid: bool,
    pub reason: Option<String>,
}

/// Pulls the values of the first `Source:` and `Target:` lines out of a
/// reply. Labels are matched case-insensitively and may carry markdown
/// emphasis or list markers.
pub fn extract_labeled_pair(response: &str) -> (Option<String>, Option<String>) {
    let mut source = None;
    let mut target = None;
    for line in response.lines() {
        let l = line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '-' | '#' | '>' | '_'));
        let lower = l.to_lowercase();
        for (label, slot) in [("source:", &mut source), ("target:", &mut target)] {
            if slot.is_none() && lower.starts_with(label) {
                let value = l[label.len()..]
                    .trim()
                    .trim_start_matches(['*', '_'])
                    .trim()
                    .to_string();
                if !value.is_empty() {
                    *slot = Some(value);
                }
            }
        }
    }
    (source, target)
}

pub fn parse_and_validate(outcomes: &[LlmOutcome], prompts: &[AugmentPrompt], tools: &PairTools) -> Vec<GeneratedPair> {
    prompts
        .iter()
        .zip(outcomes)
        .map(|(prompt, outcome)| validate_one(prompt, outcome, tools))
        .collect()
}

fn validate_one(prompt: &AugmentPrompt, outcome: &LlmOutcome, tools: &PairTools) -> GeneratedPair {
    let sense = &prompt.sense;
    let mut out = GeneratedPair {
        sense_id: sense.sense_id.clone(),
        source_text: String::new(),
        target_text: String::new(),
        raw_response: String::new(),
        valid: false,
        reason: None,
    };
    let response = match outcome {
        LlmOutcome::Response(r) => r,
        LlmOutcome::Failed(why) => {
            out.reason = Some(format!("request failed: {why}"));
            return out;
        }
    };
    out.raw_response = response.clone();
    let (src, tgt) = extract_labeled_pair(response);
    let (Some(src), Some(tgt)) = (src, tgt) else {
        out.reason = Some("unparseable response: missing Source/Target line".into());
        return out;
    };
    out.source_text = src;
    out.target_text = tgt;
    if !contains_contiguous(&tools.source.lemmas(&out.source_text), &sense.source_segment) {
        out.reason = Some("source segment absent".into());
    } else if !contains_contiguous(&tools.target.lemmas(&out.target_text), &sense.target_segment) {
        out.reason = Some("target segment absent".into());
    } else {
        out.valid = true;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub index: usize,
    pub sense_id: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub sense_id: String,
    pub response: String,
}

pub fn write_prompts(prompts: &[AugmentPrompt], path: &Path) -> Result<()> {
    write_jsonl(
        path,
        prompts.iter().enumerate().map(|(index, p)| PromptRecord {
            index,
            sense_id: p.sense.sense_id.clone(),
            prompt: p.rendered_text.clone(),
        }),
    )
}

/// Writes successful outcomes in the offline response format.
pub fn write_responses(outcomes: &[LlmOutcome], prompts: &[AugmentPrompt], path: &Path) -> Result<()> {
    write_jsonl(
        path,
        prompts
            .iter()
            .zip(outcomes)
            .enumerate()
            .filter_map(|(index, (p, o))| match o {
                LlmOutcome::Response(r) => Some(ResponseRecord {
                    index: Some(index),
                    sense_id: p.sense.sense_id.clone(),
                    response: r.clone(),
                }),
                LlmOutcome::Failed(_) => None,
            }),
    )
}

/// Reads a responses file and lines it up with `prompts`. Records carrying
/// an `index` are placed there; the rest fill the first unanswered prompt
/// with the same sense id.
pub fn ingest_responses(path: &Path, prompts: &[AugmentPrompt]) -> Result<Vec<LlmOutcome>> {
    let records: Vec<ResponseRecord> = read_jsonl(path)?;
    let mut out: Vec<Option<String>> = vec![None; prompts.len()];
    for rec in records {
        let slot = match rec.index {
            Some(i) if i < prompts.len() && prompts[i].sense.sense_id == rec.sense_id => Some(i),
            _ => prompts
                .iter()
                .enumerate()
                .position(|(i, p)| p.sense.sense_id == rec.sense_id && out[i].is_none()),
        };
        match slot {
            Some(i) => out[i] = Some(rec.response),
            None => log::warn!(
                "{}: response for unknown sense `{}` ignored",
                path.display(),
                rec.sense_id
            ),
        }
    }
    Ok(out
        .into_iter()
        .map(|r| r.map_or_else(|| LlmOutcome::Failed("no response in responses file".into()), LlmOutcome::Response))
        .collect())
}

pub fn write_augmented(pairs: &[GeneratedPair], path: &Path) -> Result<()> {
    write_jsonl(path, pairs)
}

pub fn read_augmented(path: &Path) -> Result<Vec<GeneratedPair>> {
    read_jsonl(path)
}
