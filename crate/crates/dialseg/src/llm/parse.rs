//! Strict parsing of model completions into boundary sets and label records.
//!
//! Completions routinely wrap their JSON in code fences or prose despite the
//! prompt saying not to, so the default path extracts the first balanced JSON
//! object from the text. A strict mode accepts only a bare object, for
//! fidelity runs. Every failure carries the raw response for audit.

use serde_json::Value;

use dialseg_core::boundary::{normalize_boundaries, BoundarySet};
use dialseg_core::types::{Codebook, Dialogue, RaterLabels};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResponseParseError {
    #[error("no JSON object found in response")]
    NoJsonObject { raw: String },
    #[error("response is not a single bare JSON object (strict mode)")]
    StrictEnvelope { raw: String },
    #[error("response JSON has no `{field}` field")]
    MissingField { field: &'static str, raw: String },
    #[error("`{field}` must be an array")]
    NotAnArray { field: &'static str, raw: String },
    #[error("boundary entry `{entry}` is not an integer")]
    NonIntegerBoundary { entry: String, raw: String },
    #[error("boundary value {offending} is out of range for {t} utterances")]
    BoundaryOutOfRange {
        offending: i64,
        t: usize,
        raw: String,
    },
    #[error("record {index} is missing a string `id`")]
    RecordMissingId { index: usize, raw: String },
    #[error("record {index} has a non-string, non-null `move`")]
    RecordBadMove { index: usize, raw: String },
    #[error("records reference unknown utterance ids: {ids:?}")]
    UnknownIds { ids: Vec<String>, raw: String },
    #[error("records use moves outside the codebook: {moves:?}")]
    UnknownMoves { moves: Vec<String>, raw: String },
}

impl ResponseParseError {
    /// The offending completion, kept verbatim for the audit trail.
    pub fn raw(&self) -> &str {
        match self {
            Self::NoJsonObject { raw }
            | Self::StrictEnvelope { raw }
            | Self::MissingField { raw, .. }
            | Self::NotAnArray { raw, .. }
            | Self::NonIntegerBoundary { raw, .. }
            | Self::BoundaryOutOfRange { raw, .. }
            | Self::RecordMissingId { raw, .. }
            | Self::RecordBadMove { raw, .. }
            | Self::UnknownIds { raw, .. }
            | Self::UnknownMoves { raw, .. } => raw,
        }
    }
}

/// Slice of the first parseable JSON object in `text`, tolerating fences and
/// surrounding prose. String contents and escapes are honored so braces
/// inside strings cannot unbalance the scan; candidates that balance but do
/// not parse are skipped, which shrugs off stray braces in the prose.
pub fn extract_first_json(text: &str) -> Option<&str> {
    for (start, _) in text.char_indices().filter(|(_, c)| *c == '{') {
        if let Some(len) = balanced_object_len(&text[start..]) {
            let candidate = &text[start..start + len];
            if serde_json::from_str::<Value>(candidate)
                .map(|v| v.is_object())
                .unwrap_or(false)
            {
                return Some(candidate);
            }
        }
    }
    None
}

/// Byte length of the balanced `{...}` starting at byte 0, if it closes.
fn balanced_object_len(text: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + ch.len_utf8());
                }
            }
            _ => {}
        }
    }
    None
}

fn object_from(text: &str, strict: bool) -> Result<Value, ResponseParseError> {
    if strict {
        return serde_json::from_str::<Value>(text.trim())
            .ok()
            .filter(Value::is_object)
            .ok_or_else(|| ResponseParseError::StrictEnvelope {
                raw: text.to_string(),
            });
    }
    let candidate = extract_first_json(text).ok_or_else(|| ResponseParseError::NoJsonObject {
        raw: text.to_string(),
    })?;
    serde_json::from_str(candidate).map_err(|_| ResponseParseError::NoJsonObject {
        raw: text.to_string(),
    })
}

/// Parse a segmentation completion into an internal boundary set.
///
/// Reads `boundary_indices`, requires integer entries, then strips the
/// final-turn sentinel and validates the remainder against `t`.
pub fn parse_boundary_response(
    text: &str,
    t: usize,
    strict: bool,
) -> Result<BoundarySet, ResponseParseError> {
    let object = object_from(text, strict)?;
    let field = object
        .get("boundary_indices")
        .ok_or_else(|| ResponseParseError::MissingField {
            field: "boundary_indices",
            raw: text.to_string(),
        })?;
    let entries = field.as_array().ok_or_else(|| ResponseParseError::NotAnArray {
        field: "boundary_indices",
        raw: text.to_string(),
    })?;
    let mut values = Vec::with_capacity(entries.len());
    for entry in entries {
        let v = entry
            .as_i64()
            .ok_or_else(|| ResponseParseError::NonIntegerBoundary {
                entry: entry.to_string(),
                raw: text.to_string(),
            })?;
        values.push(v);
    }
    normalize_boundaries(&values, t, true).map_err(|e| ResponseParseError::BoundaryOutOfRange {
        offending: e.offending,
        t,
        raw: text.to_string(),
    })
}

/// Parse an annotation completion: a `records` array of `{id, move}` objects
/// where a null move means unlabeled.
pub fn parse_annotation_response(
    text: &str,
    dialogue: &Dialogue,
    codebook: &Codebook,
    rater_id: &str,
    strict: bool,
) -> Result<RaterLabels, ResponseParseError> {
    let object = object_from(text, strict)?;
    let records = object
        .get("records")
        .ok_or_else(|| ResponseParseError::MissingField {
            field: "records",
            raw: text.to_string(),
        })?
        .as_array()
        .ok_or_else(|| ResponseParseError::NotAnArray {
            field: "records",
            raw: text.to_string(),
        })?;

    let mut labels = RaterLabels::new(rater_id.to_string());
    let mut unknown_ids = Vec::new();
    let mut unknown_moves = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let id = record
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| ResponseParseError::RecordMissingId {
                index,
                raw: text.to_string(),
            })?;
        let move_name = match record.get("move") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(ResponseParseError::RecordBadMove {
                    index,
                    raw: text.to_string(),
                })
            }
        };
        let Some(move_name) = move_name else { continue };
        let Some(utterance_index) = dialogue.index_of(id) else {
            unknown_ids.push(id.to_string());
            continue;
        };
        if codebook.category_of(&move_name).is_none() {
            unknown_moves.push(move_name);
            continue;
        }
        labels.insert(utterance_index, move_name);
    }
    if !unknown_ids.is_empty() {
        return Err(ResponseParseError::UnknownIds {
            ids: unknown_ids,
            raw: text.to_string(),
        });
    }
    if !unknown_moves.is_empty() {
        return Err(ResponseParseError::UnknownMoves {
            moves: unknown_moves,
            raw: text.to_string(),
        });
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dialseg_core::types::{Move, Utterance};

    #[test]
    fn bare_object_parses_and_strips_sentinel() {
        let b = parse_boundary_response(r#"{"boundary_indices":[3,7,12]}"#, 13, false).unwrap();
        assert_eq!(b.indices(), &[3, 7]);
    }

    #[test]
    fn fenced_object_parses() {
        let text = "```json\n{\"boundary_indices\":[4]}\n```";
        let b = parse_boundary_response(text, 5, false).unwrap();
        assert!(b.is_empty()); // 4 is the final-turn sentinel for T=5
    }

    #[test]
    fn prose_wrapped_object_parses() {
        let text = "Sure, here you go: {\"boundary_indices\": [2, 9]} Hope that helps!";
        let b = parse_boundary_response(text, 10, false).unwrap();
        assert_eq!(b.indices(), &[2]);
    }

    #[test]
    fn bare_array_without_object_fails() {
        let err = parse_boundary_response("Sure! [3, 9]", 10, false).unwrap_err();
        assert!(matches!(err, ResponseParseError::NoJsonObject { .. }));
        assert_eq!(err.raw(), "Sure! [3, 9]");
    }

    #[test]
    fn wrong_field_and_bad_entries_fail() {
        assert!(matches!(
            parse_boundary_response(r#"{"boundaries":[1]}"#, 5, false),
            Err(ResponseParseError::MissingField { .. })
        ));
        assert!(matches!(
            parse_boundary_response(r#"{"boundary_indices":[1.5]}"#, 5, false),
            Err(ResponseParseError::NonIntegerBoundary { .. })
        ));
        assert!(matches!(
            parse_boundary_response(r#"{"boundary_indices":"1"}"#, 5, false),
            Err(ResponseParseError::NotAnArray { .. })
        ));
        assert!(matches!(
            parse_boundary_response(r#"{"boundary_indices":[9]}"#, 5, false),
            Err(ResponseParseError::BoundaryOutOfRange { offending: 9, .. })
        ));
    }

    #[test]
    fn strict_mode_rejects_fences_and_prose() {
        let strict = |text| parse_boundary_response(text, 13, true);
        assert!(strict(r#"{"boundary_indices":[3,12]}"#).is_ok());
        assert!(matches!(
            strict("```json\n{\"boundary_indices\":[3,12]}\n```"),
            Err(ResponseParseError::StrictEnvelope { .. })
        ));
        assert!(matches!(
            strict("ok: {\"boundary_indices\":[3,12]}"),
            Err(ResponseParseError::StrictEnvelope { .. })
        ));
    }

    #[test]
    fn extractor_ignores_braces_inside_strings() {
        let text = r#"note "{" then {"boundary_indices":[1], "note":"has } brace"} end"#;
        let got = extract_first_json(text).unwrap();
        assert!(got.starts_with("{\"boundary_indices\""));
        assert!(got.ends_with("brace\"}"));
    }

    fn dialogue() -> Dialogue {
        Dialogue::new(
            "s".to_string(),
            (0..3)
                .map(|i| Utterance {
                    id: format!("u{i}"),
                    index: i,
                    speaker: "T".into(),
                    text: String::new(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn codebook() -> Codebook {
        Codebook::new(
            "cb".to_string(),
            vec![Move {
                name: "Restating".into(),
                definition: String::new(),
                examples: vec![],
            }],
            true,
        )
        .unwrap()
    }

    #[test]
    fn records_with_null_moves_stay_unlabeled() {
        let text = r#"{"records":[{"id":"u0","move":"Restating"},{"id":"u1","move":null}]}"#;
        let labels =
            parse_annotation_response(text, &dialogue(), &codebook(), "ai", false).unwrap();
        assert_eq!(labels.get(0), Some("Restating"));
        assert_eq!(labels.get(1), None);
        assert_eq!(labels.len(), 1);
    }

    #[test]
    fn unknown_records_are_listed() {
        let text = r#"{"records":[{"id":"zz","move":"Restating"}]}"#;
        let err = parse_annotation_response(text, &dialogue(), &codebook(), "ai", false)
            .unwrap_err();
        assert!(matches!(err, ResponseParseError::UnknownIds { .. }));

        let text = r#"{"records":[{"id":"u0","move":"NotAMove"}]}"#;
        let err = parse_annotation_response(text, &dialogue(), &codebook(), "ai", false)
            .unwrap_err();
        assert!(matches!(err, ResponseParseError::UnknownMoves { .. }));
    }

    #[test]
    fn empty_records_list_is_legal() {
        let labels = parse_annotation_response(
            r#"{"records":[]}"#,
            &dialogue(),
            &codebook(),
            "ai",
            false,
        )
        .unwrap();
        assert!(labels.is_empty());
    }
}
