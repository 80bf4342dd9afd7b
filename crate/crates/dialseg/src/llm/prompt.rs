//! Prompt rendering from the versioned template assets.
//!
//! The templates live under `assets/` so their wording is diffable rather than
//! buried in string literals. Rendering is deterministic: the same dialogue,
//! mode, and codebook produce byte-identical prompts.

use dialseg_core::fingerprint::fingerprint;
use dialseg_core::types::{Codebook, Dialogue};

use super::LlmError;

const SEGMENT_GENERIC: &str = include_str!("../../assets/prompt_segment_generic.txt");
const SEGMENT_DA_AWARE: &str = include_str!("../../assets/prompt_segment_da_aware.txt");
const ANNOTATE: &str = include_str!("../../assets/prompt_annotate.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    /// Topic-shift segmentation from dialogue text alone.
    Generic,
    /// Segmentation guided by the codebook's move definitions.
    DaAware,
    /// Per-utterance move annotation.
    Annotate,
}

impl PromptMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptMode::Generic => "generic",
            PromptMode::DaAware => "da_aware",
            PromptMode::Annotate => "annotate",
        }
    }
}

/// A rendered prompt: the system instruction, the user turn listing, and
/// digests for the audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub mode: PromptMode,
    pub system: String,
    pub user: String,
    pub dialogue_digest: String,
}

impl PromptSpec {
    /// The full rendered text, used for prompt digests.
    pub fn rendered_text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }

    pub fn digest(&self) -> String {
        fingerprint(&self.rendered_text())
    }
}

fn move_definitions(codebook: &Codebook) -> String {
    codebook
        .moves()
        .iter()
        .map(|m| format!("- {}: {}", m.name, m.definition))
        .collect::<Vec<_>>()
        .join("\n")
}

fn move_examples(codebook: &Codebook) -> String {
    codebook
        .moves()
        .iter()
        .map(|m| {
            if m.examples.is_empty() {
                format!("- {}: (no examples)", m.name)
            } else {
                format!("- {}: {}", m.name, m.examples.join(" | "))
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// The numbered 0-indexed turn listing. Text only by default; speakers can be
/// added for ablations.
fn turn_listing(dialogue: &Dialogue, include_speakers: bool) -> String {
    let mut out = String::from("Dialogue turns (0-indexed):\n");
    for u in dialogue.utterances() {
        if include_speakers {
            out.push_str(&format!("{} [{}]: {}\n", u.index, u.speaker, u.text));
        } else {
            out.push_str(&format!("{}: {}\n", u.index, u.text));
        }
    }
    out
}

/// Render a segmentation prompt. Generic mode forbids a codebook; DA-aware
/// mode requires one and inserts its move definitions.
pub fn build_segmentation_prompt(
    dialogue: &Dialogue,
    mode: PromptMode,
    codebook: Option<&Codebook>,
    include_speakers: bool,
) -> Result<PromptSpec, LlmError> {
    let system = match (mode, codebook) {
        (PromptMode::Generic, None) => SEGMENT_GENERIC.to_string(),
        (PromptMode::Generic, Some(_)) => return Err(LlmError::CodebookNotAllowed),
        (PromptMode::DaAware, Some(cb)) => {
            SEGMENT_DA_AWARE.replace("{{move_definitions}}", &move_definitions(cb))
        }
        (PromptMode::DaAware, None) => return Err(LlmError::CodebookRequired { mode: "da_aware" }),
        (PromptMode::Annotate, _) => {
            return Err(LlmError::WrongPromptMode {
                expected: "generic or da_aware",
                found: "annotate",
            })
        }
    };
    let user = turn_listing(dialogue, include_speakers);
    Ok(PromptSpec {
        mode,
        dialogue_digest: fingerprint(&user),
        system,
        user,
    })
}

/// Render the per-utterance annotation prompt from a codebook.
pub fn build_annotation_prompt(
    dialogue: &Dialogue,
    codebook: &Codebook,
    include_speakers: bool,
) -> Result<PromptSpec, LlmError> {
    let names = codebook
        .move_names()
        .map(|n| format!("- {n}"))
        .collect::<Vec<_>>()
        .join("\n");
    let system = ANNOTATE
        .replace("{{move_names}}", &names)
        .replace("{{move_definitions}}", &move_definitions(codebook))
        .replace("{{move_examples}}", &move_examples(codebook));
    // Annotation responses resolve by utterance id, so the listing carries ids.
    let mut user = String::from("Dialogue utterances (id: text):\n");
    for u in dialogue.utterances() {
        if include_speakers {
            user.push_str(&format!("{} [{}]: {}\n", u.id, u.speaker, u.text));
        } else {
            user.push_str(&format!("{}: {}\n", u.id, u.text));
        }
    }
    Ok(PromptSpec {
        mode: PromptMode::Annotate,
        dialogue_digest: fingerprint(&user),
        system,
        user,
    })
}
