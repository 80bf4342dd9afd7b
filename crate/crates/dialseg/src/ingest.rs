//! Corpus loading and validation: manifests, transcripts, label files,
//! codebooks, and embedding containers resolved into core types.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use dialseg_core::embedding::EmbeddingSequence;
use dialseg_core::types::{Codebook, Dialogue, RaterLabels};

use crate::formats::{self, FormatError, LabelRow, Manifest};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        source: FormatError,
    },
    #[error("line {line}: unknown move `{move_name}`{suggestion}; valid moves: {valid}")]
    UnknownMove {
        move_name: String,
        line: usize,
        suggestion: String,
        valid: String,
    },
    #[error("line {line}: unknown utterance id `{utterance_id}` in session `{session_id}`")]
    UnknownUtterance {
        utterance_id: String,
        session_id: String,
        line: usize,
    },
    #[error("label file for rater `{rater_id}` references unknown session `{session_id}`")]
    UnknownSession {
        rater_id: String,
        session_id: String,
    },
    #[error("duplicate session id `{0}` in manifest")]
    DuplicateSession(String),
    #[error("duplicate rater id `{0}` in manifest")]
    DuplicateRater(String),
    #[error("session `{session_id}`: embedding file declares session `{found}`")]
    EmbeddingSessionMismatch { session_id: String, found: String },
    #[error("manifest session `{session_id}`: transcript declares session `{found}`")]
    TranscriptSessionMismatch { session_id: String, found: String },
    #[error("session `{session_id}`: {found} embedding vectors for {expected} utterances")]
    EmbeddingCountMismatch {
        session_id: String,
        expected: usize,
        found: usize,
    },
    #[error("corpus failed validation with {0} issue(s)")]
    ValidationFailed(usize),
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn format_err(path: &Path) -> impl FnOnce(FormatError) -> IngestError + '_ {
    move |source| IngestError::Format {
        path: path.to_path_buf(),
        source,
    }
}

/// Edit distance for the "did you mean" hint on unknown moves.
fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest_move(name: &str, codebook: &Codebook) -> Option<String> {
    codebook
        .move_names()
        .map(|m| (levenshtein(name, m), m))
        .min_by_key(|(d, _)| *d)
        .filter(|(d, _)| *d <= 3)
        .map(|(_, m)| m.to_string())
}

fn unknown_move_error(row: &LabelRow, codebook: &Codebook) -> IngestError {
    let suggestion = nearest_move(&row.move_name, codebook)
        .map(|m| format!(" (did you mean `{m}`?)"))
        .unwrap_or_default();
    IngestError::UnknownMove {
        move_name: row.move_name.clone(),
        line: row.line,
        suggestion,
        valid: codebook.move_names().collect::<Vec<_>>().join(", "),
    }
}

/// Resolve one session's label rows to utterance indices.
///
/// Rows must belong to the dialogue's session; moves must exist in the
/// codebook (with a nearest-move hint otherwise) and utterance ids must
/// resolve. An empty row set is legal: sparse labels are the norm.
pub fn resolve_labels(
    rater_id: &str,
    rows: &[LabelRow],
    dialogue: &Dialogue,
    codebook: &Codebook,
) -> Result<RaterLabels, IngestError> {
    let mut labels = RaterLabels::new(rater_id.to_string());
    for row in rows {
        if codebook.category_of(&row.move_name).is_none() {
            return Err(unknown_move_error(row, codebook));
        }
        let index = dialogue.index_of(&row.utterance_id).ok_or_else(|| {
            IngestError::UnknownUtterance {
                utterance_id: row.utterance_id.clone(),
                session_id: dialogue.session_id().to_string(),
                line: row.line,
            }
        })?;
        labels.insert(index, row.move_name.clone());
    }
    Ok(labels)
}

/// Parse a single-session label file against its dialogue and codebook.
pub fn parse_labels(
    text: &str,
    dialogue: &Dialogue,
    codebook: &Codebook,
) -> Result<RaterLabels, IngestError> {
    let file = formats::parse_label_file(text).map_err(|source| IngestError::Format {
        path: PathBuf::from("<labels>"),
        source,
    })?;
    resolve_labels(&file.rater_id, &file.rows, dialogue, codebook)
}

/// Read an embedding container and check it against the session.
pub fn load_embeddings(
    bytes: &[u8],
    session_id: &str,
    t: usize,
) -> Result<EmbeddingSequence, IngestError> {
    let emb = formats::read_embeddings(bytes).map_err(|source| IngestError::Format {
        path: PathBuf::from("<embeddings>"),
        source,
    })?;
    if emb.session_id() != session_id {
        return Err(IngestError::EmbeddingSessionMismatch {
            session_id: session_id.to_string(),
            found: emb.session_id().to_string(),
        });
    }
    if emb.len() != t {
        return Err(IngestError::EmbeddingCountMismatch {
            session_id: session_id.to_string(),
            expected: t,
            found: emb.len(),
        });
    }
    Ok(emb)
}

/// One fully loaded session.
pub struct LoadedSession {
    pub dialogue: Dialogue,
    pub embeddings: Option<EmbeddingSequence>,
    /// Rater id -> labels, in manifest label-file order.
    pub labels: BTreeMap<String, RaterLabels>,
}

/// A corpus loaded through its manifest.
pub struct Corpus {
    pub base_dir: PathBuf,
    pub manifest: Manifest,
    pub codebook: Codebook,
    pub sessions: Vec<LoadedSession>,
    /// Rater ids in manifest order.
    pub rater_ids: Vec<String>,
}

impl Corpus {
    pub fn session(&self, session_id: &str) -> Option<&LoadedSession> {
        self.sessions
            .iter()
            .find(|s| s.dialogue.session_id() == session_id)
    }
}

/// Load everything the manifest references, failing on the first hard error.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus, IngestError> {
    let base_dir = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let manifest = formats::parse_manifest(&read_text(manifest_path)?)
        .map_err(format_err(manifest_path))?;

    let codebook_path = manifest.resolve(&base_dir, &manifest.codebook_path);
    let codebook =
        formats::parse_codebook(&read_text(&codebook_path)?).map_err(format_err(&codebook_path))?;

    let mut seen_sessions = BTreeMap::new();
    let mut sessions = Vec::with_capacity(manifest.sessions.len());
    for entry in &manifest.sessions {
        if seen_sessions
            .insert(entry.session_id.clone(), ())
            .is_some()
        {
            return Err(IngestError::DuplicateSession(entry.session_id.clone()));
        }
        let transcript_path = manifest.resolve(&base_dir, &entry.transcript_path);
        let dialogue = formats::parse_transcript(&read_text(&transcript_path)?)
            .map_err(format_err(&transcript_path))?;
        if dialogue.session_id() != entry.session_id {
            return Err(IngestError::TranscriptSessionMismatch {
                session_id: entry.session_id.clone(),
                found: dialogue.session_id().to_string(),
            });
        }
        let embeddings = match &entry.embedding_path {
            Some(rel) => {
                let path = manifest.resolve(&base_dir, rel);
                Some(load_embeddings(
                    &read_file(&path)?,
                    &entry.session_id,
                    dialogue.len(),
                )?)
            }
            None => None,
        };
        sessions.push(LoadedSession {
            dialogue,
            embeddings,
            labels: BTreeMap::new(),
        });
    }

    let mut rater_ids = Vec::new();
    for label_file in &manifest.label_files {
        if rater_ids.contains(&label_file.rater_id) {
            return Err(IngestError::DuplicateRater(label_file.rater_id.clone()));
        }
        rater_ids.push(label_file.rater_id.clone());
        let path = manifest.resolve(&base_dir, &label_file.path);
        let parsed = formats::parse_label_file(&read_text(&path)?).map_err(format_err(&path))?;

        let mut by_session: BTreeMap<&str, Vec<&LabelRow>> = BTreeMap::new();
        for row in &parsed.rows {
            by_session.entry(&row.session_id).or_default().push(row);
        }
        for (session_id, rows) in by_session {
            let session = sessions
                .iter_mut()
                .find(|s| s.dialogue.session_id() == session_id)
                .ok_or_else(|| IngestError::UnknownSession {
                    rater_id: label_file.rater_id.clone(),
                    session_id: session_id.to_string(),
                })?;
            let rows: Vec<LabelRow> = rows.into_iter().cloned().collect();
            let labels = resolve_labels(
                &parsed.rater_id,
                &rows,
                &session.dialogue,
                &codebook,
            )?;
            session.labels.insert(parsed.rater_id.clone(), labels);
        }
        // Sessions the rater never labeled still get an (empty) entry.
        for session in sessions.iter_mut() {
            session
                .labels
                .entry(label_file.rater_id.clone())
                .or_insert_with(|| RaterLabels::new(label_file.rater_id.clone()));
        }
    }

    Ok(Corpus {
        base_dir,
        manifest,
        codebook,
        sessions,
        rater_ids,
    })
}

/// Per-session row of the validation report.
#[derive(Debug, Serialize)]
pub struct SessionValidation {
    pub session_id: String,
    pub t: usize,
    /// Labeled-utterance count per rater.
    pub label_counts: BTreeMap<String, usize>,
    pub has_embeddings: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ValidationIssue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub format_version: String,
    pub rows: Vec<SessionValidation>,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Walk the whole manifest, aggregating every violation instead of stopping at
/// the first. Issues are tagged with the offending session where one exists.
pub fn validate_corpus(manifest_path: &Path) -> ValidationReport {
    let mut report = ValidationReport {
        format_version: formats::FORMAT_VERSION.to_string(),
        rows: Vec::new(),
        issues: Vec::new(),
    };
    let base_dir = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();

    let manifest = match read_text(manifest_path)
        .and_then(|text| formats::parse_manifest(&text).map_err(format_err(manifest_path)))
    {
        Ok(m) => m,
        Err(e) => {
            report.issues.push(ValidationIssue {
                session_id: None,
                message: e.to_string(),
            });
            return report;
        }
    };

    let codebook_path = manifest.resolve(&base_dir, &manifest.codebook_path);
    let codebook = match read_text(&codebook_path)
        .and_then(|text| formats::parse_codebook(&text).map_err(format_err(&codebook_path)))
    {
        Ok(c) => Some(c),
        Err(e) => {
            report.issues.push(ValidationIssue {
                session_id: None,
                message: e.to_string(),
            });
            None
        }
    };

    let mut dialogues: BTreeMap<String, Dialogue> = BTreeMap::new();
    let mut seen = BTreeMap::new();
    for entry in &manifest.sessions {
        if seen.insert(entry.session_id.clone(), ()).is_some() {
            report.issues.push(ValidationIssue {
                session_id: Some(entry.session_id.clone()),
                message: format!("duplicate session id `{}`", entry.session_id),
            });
            continue;
        }
        let transcript_path = manifest.resolve(&base_dir, &entry.transcript_path);
        let dialogue = match read_text(&transcript_path).and_then(|text| {
            formats::parse_transcript(&text).map_err(format_err(&transcript_path))
        }) {
            Ok(d) => d,
            Err(e) => {
                report.issues.push(ValidationIssue {
                    session_id: Some(entry.session_id.clone()),
                    message: e.to_string(),
                });
                continue;
            }
        };
        if dialogue.session_id() != entry.session_id {
            report.issues.push(ValidationIssue {
                session_id: Some(entry.session_id.clone()),
                message: format!(
                    "transcript declares session `{}`",
                    dialogue.session_id()
                ),
            });
        }

        let mut row = SessionValidation {
            session_id: entry.session_id.clone(),
            t: dialogue.len(),
            label_counts: BTreeMap::new(),
            has_embeddings: false,
            embedding_dim: None,
        };
        if let Some(rel) = &entry.embedding_path {
            let path = manifest.resolve(&base_dir, rel);
            match read_file(&path)
                .and_then(|bytes| load_embeddings(&bytes, &entry.session_id, dialogue.len()))
            {
                Ok(emb) => {
                    row.has_embeddings = true;
                    row.embedding_dim = Some(emb.dim());
                }
                Err(e) => report.issues.push(ValidationIssue {
                    session_id: Some(entry.session_id.clone()),
                    message: e.to_string(),
                }),
            }
        }
        dialogues.insert(entry.session_id.clone(), dialogue);
        report.rows.push(row);
    }

    for label_file in &manifest.label_files {
        let path = manifest.resolve(&base_dir, &label_file.path);
        let parsed = match read_text(&path)
            .and_then(|text| formats::parse_label_file(&text).map_err(format_err(&path)))
        {
            Ok(p) => p,
            Err(e) => {
                report.issues.push(ValidationIssue {
                    session_id: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let mut by_session: BTreeMap<String, Vec<LabelRow>> = BTreeMap::new();
        for row in parsed.rows {
            by_session.entry(row.session_id.clone()).or_default().push(row);
        }
        for (session_id, rows) in by_session {
            let Some(dialogue) = dialogues.get(&session_id) else {
                report.issues.push(ValidationIssue {
                    session_id: Some(session_id.clone()),
                    message: format!(
                        "label file for rater `{}` references unknown session `{session_id}`",
                        label_file.rater_id
                    ),
                });
                continue;
            };
            let Some(codebook) = &codebook else { continue };
            match resolve_labels(&parsed.rater_id, &rows, dialogue, codebook) {
                Ok(labels) => {
                    if let Some(row) = report
                        .rows
                        .iter_mut()
                        .find(|r| r.session_id == session_id)
                    {
                        row.label_counts
                            .insert(label_file.rater_id.clone(), labels.len());
                    }
                }
                Err(e) => report.issues.push(ValidationIssue {
                    session_id: Some(session_id.clone()),
                    message: e.to_string(),
                }),
            }
        }
    }

    // Raters with no rows for a session still show a zero count.
    for row in &mut report.rows {
        for label_file in &manifest.label_files {
            row.label_counts.entry(label_file.rater_id.clone()).or_insert(0);
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use dialseg_core::types::{Move, Utterance};

    fn codebook() -> Codebook {
        Codebook::new(
            "cb".to_string(),
            vec![
                Move {
                    name: "Restating".into(),
                    definition: String::new(),
                    examples: vec![],
                },
                Move {
                    name: "Revoicing".into(),
                    definition: String::new(),
                    examples: vec![],
                },
                Move {
                    name: "Scaffolding".into(),
                    definition: String::new(),
                    examples: vec![],
                },
            ],
            true,
        )
        .unwrap()
    }

    fn dialogue() -> Dialogue {
        Dialogue::new(
            "s1".to_string(),
            (0..3)
                .map(|i| Utterance {
                    id: format!("u{i}"),
                    index: i,
                    speaker: "T".into(),
                    text: format!("turn {i}"),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn labels_resolve_by_utterance_id() {
        let text = crate::formats::write_labels(
            "human",
            vec![
                ("s1".to_string(), "u0".to_string(), "Restating".to_string()),
                ("s1".to_string(), "u2".to_string(), "Revoicing".to_string()),
            ],
        );
        let labels = parse_labels(&text, &dialogue(), &codebook()).unwrap();
        assert_eq!(labels.get(0), Some("Restating"));
        assert_eq!(labels.get(1), None);
        assert_eq!(labels.get(2), Some("Revoicing"));
    }

    #[test]
    fn unknown_move_suggests_nearest() {
        let text = crate::formats::write_labels(
            "human",
            vec![("s1".to_string(), "u0".to_string(), "Scaffoldingg".to_string())],
        );
        let err = parse_labels(&text, &dialogue(), &codebook()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Scaffoldingg"), "{msg}");
        assert!(msg.contains("did you mean `Scaffolding`"), "{msg}");
        assert!(msg.contains("Restating"), "{msg}");
    }

    #[test]
    fn unknown_utterance_id_is_an_error() {
        let text = crate::formats::write_labels(
            "human",
            vec![("s1".to_string(), "zz".to_string(), "Restating".to_string())],
        );
        let err = parse_labels(&text, &dialogue(), &codebook()).unwrap_err();
        assert!(matches!(err, IngestError::UnknownUtterance { .. }));
    }

    #[test]
    fn empty_label_file_is_legal() {
        let text = crate::formats::write_labels("human", vec![]);
        let labels = parse_labels(&text, &dialogue(), &codebook()).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn embeddings_must_match_session_and_count() {
        let emb = EmbeddingSequence::new(
            "s1".to_string(),
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let bytes = crate::formats::write_embeddings_binary(&emb);
        assert!(load_embeddings(&bytes, "s1", 3).is_ok());
        assert!(matches!(
            load_embeddings(&bytes, "s1", 5),
            Err(IngestError::EmbeddingCountMismatch { expected: 5, found: 3, .. })
        ));
        assert!(matches!(
            load_embeddings(&bytes, "other", 3),
            Err(IngestError::EmbeddingSessionMismatch { .. })
        ));
    }

    #[test]
    fn validation_flags_labels_for_unknown_sessions() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path();
        std::fs::write(
            base.join("codebook.json"),
            crate::formats::write_codebook(&codebook()),
        )
        .unwrap();
        std::fs::write(
            base.join("s1.jsonl"),
            crate::formats::write_transcript(&dialogue()),
        )
        .unwrap();
        std::fs::write(
            base.join("human.jsonl"),
            crate::formats::write_labels(
                "human",
                vec![("ghost".to_string(), "u0".to_string(), "Restating".to_string())],
            ),
        )
        .unwrap();
        let manifest = crate::formats::Manifest {
            format_version: crate::formats::FORMAT_VERSION.to_string(),
            sessions: vec![crate::formats::ManifestSession {
                session_id: "s1".to_string(),
                transcript_path: "s1.jsonl".to_string(),
                embedding_path: None,
            }],
            label_files: vec![crate::formats::ManifestLabelFile {
                rater_id: "human".to_string(),
                path: "human.jsonl".to_string(),
            }],
            codebook_path: "codebook.json".to_string(),
        };
        std::fs::write(
            base.join("manifest.json"),
            crate::formats::write_manifest(&manifest),
        )
        .unwrap();

        let report = validate_corpus(&base.join("manifest.json"));
        assert!(!report.ok());
        assert!(report
            .issues
            .iter()
            .any(|i| i.session_id.as_deref() == Some("ghost")
                && i.message.contains("unknown session")));
    }

    #[test]
    fn loaded_vectors_are_unit_norm() {
        // Hand-written JSON fixture with deliberately unnormalized rows.
        let text = r#"{"format_version":"1","kind":"embeddings","session_id":"s1","d":2,"t":2,"vectors":[[3.0,4.0],[0.5,0.0]]}"#;
        let emb = load_embeddings(text.as_bytes(), "s1", 2).unwrap();
        for v in emb.vectors() {
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_vector_names_the_utterance() {
        let emb = EmbeddingSequence::new(
            "s1".to_string(),
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let mut bytes = crate::formats::write_embeddings_binary(&emb);
        // Corrupt the second vector's first float with a NaN bit pattern.
        let payload_start = bytes.len() - 4 * 4;
        bytes[payload_start + 8..payload_start + 12]
            .copy_from_slice(&f32::NAN.to_le_bytes());
        let err = load_embeddings(&bytes, "s1", 2).unwrap_err();
        assert!(err.to_string().contains("vector 1"), "{err}");
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("abc", "abd"), 1);
        assert_eq!(levenshtein("", "xy"), 2);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }
}
