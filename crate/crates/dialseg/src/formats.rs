//! On-disk formats: transcripts, labels, codebooks, embedding containers,
//! manifests, and segmentation files.
//!
//! Every format carries a `format_version` field. JSON-lines formats put it in
//! a header record on the first line. Writers are deterministic, so a
//! write -> read -> write cycle is byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use dialseg_core::boundary::{BoundaryError, BoundarySet, Segmentation};
use dialseg_core::embedding::{EmbeddingError, EmbeddingSequence};
use dialseg_core::fusion::{BankEntry, MemoryBank, MoveEmbeddingTable, TableMode};
use dialseg_core::types::{Codebook, CodebookError, Dialogue, DialogueError, Move, Utterance};

pub const FORMAT_VERSION: &str = "1";
/// Magic prefix of the binary embedding container.
pub const EMBEDDING_MAGIC: &[u8; 4] = b"DSEB";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: invalid JSON: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("invalid JSON document: {0}")]
    JsonDocument(#[from] serde_json::Error),
    #[error("missing header record on the first line")]
    MissingHeader,
    #[error("unsupported format_version `{found}` (supported: {FORMAT_VERSION})")]
    UnsupportedVersion { found: String },
    #[error("expected a `{expected}` file, found kind `{found}`")]
    WrongKind {
        expected: &'static str,
        found: String,
    },
    #[error("transcript has no utterances")]
    EmptyTranscript,
    #[error("duplicate utterance id `{id}` on lines {first_line} and {second_line}")]
    DuplicateUtteranceId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("binary container is missing the DSEB magic prefix")]
    BadMagic,
    #[error("binary container is truncated: {0}")]
    Truncated(&'static str),
    #[error("container declares {declared} vectors of dim {dim} but carries {found} floats")]
    PayloadSizeMismatch {
        declared: usize,
        dim: usize,
        found: usize,
    },
    #[error("unknown table mode `{0}`")]
    UnknownTableMode(String),
}

fn check_version(found: &str) -> Result<(), FormatError> {
    if found != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: found.to_string(),
        });
    }
    Ok(())
}

fn check_kind(expected: &'static str, found: &str) -> Result<(), FormatError> {
    if found != expected {
        return Err(FormatError::WrongKind {
            expected,
            found: found.to_string(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Transcripts: JSON-lines, header record then one {id, speaker, text} per line.
// Utterance indices come from file order, never from the file itself.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    format_version: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    session_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rater_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TranscriptRecord {
    id: String,
    speaker: String,
    text: String,
}

pub fn write_transcript(dialogue: &Dialogue) -> String {
    let mut out = String::new();
    let header = JsonlHeader {
        format_version: FORMAT_VERSION.to_string(),
        kind: "transcript".to_string(),
        session_id: Some(dialogue.session_id().to_string()),
        rater_id: None,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for u in dialogue.utterances() {
        let record = TranscriptRecord {
            id: u.id.clone(),
            speaker: u.speaker.clone(),
            text: u.text.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_transcript(text: &str) -> Result<Dialogue, FormatError> {
    let mut lines = numbered_lines(text);
    let (line, header) = lines.next().ok_or(FormatError::MissingHeader)?;
    let header: JsonlHeader =
        serde_json::from_str(header).map_err(|source| FormatError::Json { line, source })?;
    check_version(&header.format_version)?;
    check_kind("transcript", &header.kind)?;
    let session_id = header.session_id.ok_or(FormatError::MissingHeader)?;

    let mut utterances = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (line, raw) in lines {
        let record: TranscriptRecord =
            serde_json::from_str(raw).map_err(|source| FormatError::Json { line, source })?;
        if let Some(&first_line) = seen.get(&record.id) {
            return Err(FormatError::DuplicateUtteranceId {
                id: record.id,
                first_line,
                second_line: line,
            });
        }
        seen.insert(record.id.clone(), line);
        utterances.push(Utterance {
            id: record.id,
            index: utterances.len(),
            speaker: record.speaker,
            text: record.text,
        });
    }
    if utterances.is_empty() {
        return Err(FormatError::EmptyTranscript);
    }
    Ok(Dialogue::new(session_id, utterances)?)
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

// ---------------------------------------------------------------------------
// Labels: JSON-lines, header record then {session_id, utterance_id, move}.
// One file per rater, covering any number of sessions.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    session_id: String,
    utterance_id: String,
    #[serde(rename = "move")]
    move_name: String,
}

/// A raw labels file: rater id plus rows in file order with their line numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFile {
    pub rater_id: String,
    pub rows: Vec<LabelRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub session_id: String,
    pub utterance_id: String,
    pub move_name: String,
    pub line: usize,
}

pub fn write_labels(
    rater_id: &str,
    rows: impl IntoIterator<Item = (String, String, String)>,
) -> String {
    let header = JsonlHeader {
        format_version: FORMAT_VERSION.to_string(),
        kind: "labels".to_string(),
        session_id: None,
        rater_id: Some(rater_id.to_string()),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (session_id, utterance_id, move_name) in rows {
        let record = LabelRecord {
            session_id,
            utterance_id,
            move_name,
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_label_file(text: &str) -> Result<LabelFile, FormatError> {
    let mut lines = numbered_lines(text);
    let (line, header) = lines.next().ok_or(FormatError::MissingHeader)?;
    let header: JsonlHeader =
        serde_json::from_str(header).map_err(|source| FormatError::Json { line, source })?;
    check_version(&header.format_version)?;
    check_kind("labels", &header.kind)?;
    let rater_id = header.rater_id.ok_or(FormatError::MissingHeader)?;

    let mut rows = Vec::new();
    for (line, raw) in lines {
        let record: LabelRecord =
            serde_json::from_str(raw).map_err(|source| FormatError::Json { line, source })?;
        rows.push(LabelRow {
            session_id: record.session_id,
            utterance_id: record.utterance_id,
            move_name: record.move_name,
            line,
        });
    }
    Ok(LabelFile { rater_id, rows })
}

// ---------------------------------------------------------------------------
// Codebook: one JSON document.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CodebookDoc {
    format_version: String,
    name: String,
    none_category_enabled: bool,
    moves: Vec<MoveDoc>,
}

#[derive(Serialize, Deserialize)]
struct MoveDoc {
    name: String,
    definition: String,
    #[serde(default)]
    examples: Vec<String>,
}

pub fn write_codebook(codebook: &Codebook) -> String {
    let doc = CodebookDoc {
        format_version: FORMAT_VERSION.to_string(),
        name: codebook.name().to_string(),
        none_category_enabled: codebook.none_enabled(),
        moves: codebook
            .moves()
            .iter()
            .map(|m| MoveDoc {
                name: m.name.clone(),
                definition: m.definition.clone(),
                examples: m.examples.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("codebook serializes");
    out.push('\n');
    out
}

pub fn parse_codebook(text: &str) -> Result<Codebook, FormatError> {
    let doc: CodebookDoc = serde_json::from_str(text)?;
    check_version(&doc.format_version)?;
    let moves = doc
        .moves
        .into_iter()
        .map(|m| Move {
            name: m.name,
            definition: m.definition,
            examples: m.examples,
        })
        .collect();
    Ok(Codebook::new(doc.name, moves, doc.none_category_enabled)?)
}

// ---------------------------------------------------------------------------
// Embeddings: self-describing container. Binary form is the DSEB magic, a
// little-endian u32 header length, a JSON header, then row-major f32 data.
// The JSON form (for hand-written fixtures) inlines the vectors.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EmbeddingHeader {
    format_version: String,
    kind: String,
    session_id: String,
    d: usize,
    t: usize,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingJsonDoc {
    format_version: String,
    kind: String,
    session_id: String,
    d: usize,
    t: usize,
    vectors: Vec<Vec<f32>>,
}

fn header_json<T: Serialize>(header: &T) -> Vec<u8> {
    serde_json::to_vec(header).expect("header serializes")
}

fn binary_container(header_bytes: &[u8], floats: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + header_bytes.len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(header_bytes);
    for f in floats {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

fn split_binary_container(bytes: &[u8]) -> Result<(&[u8], Vec<f32>), FormatError> {
    if bytes.len() < 8 || &bytes[..4] != EMBEDDING_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let header_end = 8 + header_len;
    if bytes.len() < header_end {
        return Err(FormatError::Truncated("header"));
    }
    let payload = &bytes[header_end..];
    if !payload.len().is_multiple_of(4) {
        return Err(FormatError::Truncated("payload"));
    }
    let floats = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((&bytes[8..header_end], floats))
}

fn vectors_from_floats(
    floats: Vec<f32>,
    d: usize,
    t: usize,
) -> Result<Vec<Vec<f64>>, FormatError> {
    if floats.len() != d * t {
        return Err(FormatError::PayloadSizeMismatch {
            declared: t,
            dim: d,
            found: floats.len(),
        });
    }
    Ok(floats
        .chunks_exact(d)
        .map(|row| row.iter().map(|&x| f64::from(x)).collect())
        .collect())
}

pub fn write_embeddings_binary(emb: &EmbeddingSequence) -> Vec<u8> {
    let header = EmbeddingHeader {
        format_version: FORMAT_VERSION.to_string(),
        kind: "embeddings".to_string(),
        session_id: emb.session_id().to_string(),
        d: emb.dim(),
        t: emb.len(),
    };
    binary_container(
        &header_json(&header),
        emb.vectors().iter().flatten().map(|&x| x as f32),
    )
}

pub fn write_embeddings_json(emb: &EmbeddingSequence) -> String {
    let doc = EmbeddingJsonDoc {
        format_version: FORMAT_VERSION.to_string(),
        kind: "embeddings".to_string(),
        session_id: emb.session_id().to_string(),
        d: emb.dim(),
        t: emb.len(),
        vectors: emb
            .vectors()
            .iter()
            .map(|v| v.iter().map(|&x| x as f32).collect())
            .collect(),
    };
    let mut out = serde_json::to_string(&doc).expect("embeddings serialize");
    out.push('\n');
    out
}

/// Read either container form, sniffing the binary magic.
pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingSequence, FormatError> {
    if bytes.starts_with(EMBEDDING_MAGIC) {
        let (header_bytes, floats) = split_binary_container(bytes)?;
        let header: EmbeddingHeader = serde_json::from_slice(header_bytes)?;
        check_version(&header.format_version)?;
        check_kind("embeddings", &header.kind)?;
        let vectors = vectors_from_floats(floats, header.d, header.t)?;
        Ok(EmbeddingSequence::new(header.session_id, header.d, vectors)?)
    } else {
        let doc: EmbeddingJsonDoc = serde_json::from_slice(bytes)?;
        check_version(&doc.format_version)?;
        check_kind("embeddings", &doc.kind)?;
        let flat: Vec<f32> = doc.vectors.into_iter().flatten().collect();
        let vectors = vectors_from_floats(flat, doc.d, doc.t)?;
        Ok(EmbeddingSequence::new(doc.session_id, doc.d, vectors)?)
    }
}

// ---------------------------------------------------------------------------
// Memory bank and move table reuse the binary container with their own kinds.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BankHeader {
    format_version: String,
    kind: String,
    d: usize,
    n: usize,
    moves: Vec<String>,
    sessions: Vec<String>,
    indices: Vec<usize>,
}

pub fn write_memory_bank(bank: &MemoryBank) -> Vec<u8> {
    let header = BankHeader {
        format_version: FORMAT_VERSION.to_string(),
        kind: "memory_bank".to_string(),
        d: bank.dim(),
        n: bank.len(),
        moves: bank.entries().iter().map(|e| e.move_name.clone()).collect(),
        sessions: bank
            .entries()
            .iter()
            .map(|e| e.session_id.clone())
            .collect(),
        indices: bank
            .entries()
            .iter()
            .map(|e| e.utterance_index)
            .collect(),
    };
    binary_container(
        &header_json(&header),
        bank.entries()
            .iter()
            .flat_map(|e| e.embedding.iter().map(|&x| x as f32)),
    )
}

pub fn read_memory_bank(bytes: &[u8]) -> Result<MemoryBank, FormatError> {
    let (header_bytes, floats) = split_binary_container(bytes)?;
    let header: BankHeader = serde_json::from_slice(header_bytes)?;
    check_version(&header.format_version)?;
    check_kind("memory_bank", &header.kind)?;
    let vectors = vectors_from_floats(floats, header.d, header.n)?;
    let entries = vectors
        .into_iter()
        .zip(header.moves)
        .zip(header.sessions.into_iter().zip(header.indices))
        .map(|((embedding, move_name), (session_id, utterance_index))| BankEntry {
            embedding,
            move_name,
            session_id,
            utterance_index,
        })
        .collect();
    MemoryBank::from_entries(header.d, entries)
        .map_err(|_| FormatError::Truncated("empty memory bank"))
}

#[derive(Serialize, Deserialize)]
struct TableHeader {
    format_version: String,
    kind: String,
    d: usize,
    move_names: Vec<String>,
    mode: String,
    seed: u64,
}

pub fn write_move_table(table: &MoveEmbeddingTable) -> Vec<u8> {
    let header = TableHeader {
        format_version: FORMAT_VERSION.to_string(),
        kind: "move_table".to_string(),
        d: table.dim(),
        move_names: table.move_names().to_vec(),
        mode: match table.mode {
            TableMode::Centroid => "centroid".to_string(),
            TableMode::Random => "random".to_string(),
        },
        seed: table.seed,
    };
    binary_container(
        &header_json(&header),
        table.rows().iter().flatten().map(|&x| x as f32),
    )
}

pub fn read_move_table(bytes: &[u8]) -> Result<MoveEmbeddingTable, FormatError> {
    let (header_bytes, floats) = split_binary_container(bytes)?;
    let header: TableHeader = serde_json::from_slice(header_bytes)?;
    check_version(&header.format_version)?;
    check_kind("move_table", &header.kind)?;
    let rows = vectors_from_floats(floats, header.d, header.move_names.len())?;
    let mode = match header.mode.as_str() {
        "centroid" => TableMode::Centroid,
        "random" => TableMode::Random,
        other => return Err(FormatError::UnknownTableMode(other.to_string())),
    };
    Ok(MoveEmbeddingTable::from_parts(
        header.d,
        header.move_names,
        rows,
        mode,
        header.seed,
    ))
}

// ---------------------------------------------------------------------------
// Manifest: one JSON document; paths are relative to the manifest location.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub sessions: Vec<ManifestSession>,
    pub label_files: Vec<ManifestLabelFile>,
    pub codebook_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSession {
    pub session_id: String,
    pub transcript_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestLabelFile {
    pub rater_id: String,
    pub path: String,
}

impl Manifest {
    pub fn resolve(&self, base: &Path, rel: &str) -> PathBuf {
        base.join(rel)
    }
}

pub fn write_manifest(manifest: &Manifest) -> String {
    let mut out = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    out.push('\n');
    out
}

pub fn parse_manifest(text: &str) -> Result<Manifest, FormatError> {
    let manifest: Manifest = serde_json::from_str(text)?;
    check_version(&manifest.format_version)?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Segmentation files: one JSON document per session. Boundary indices are
// internal (0-indexed, sentinel-free) so consumers never re-strip.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationDoc {
    pub format_version: String,
    pub session_id: String,
    pub method: String,
    pub params_fingerprint: String,
    pub boundary_indices: Vec<usize>,
}

impl SegmentationDoc {
    pub fn from_segmentation(seg: &Segmentation) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            session_id: seg.session_id.clone(),
            method: seg.method.clone(),
            params_fingerprint: seg.params_fingerprint.clone(),
            boundary_indices: seg.boundaries.indices().to_vec(),
        }
    }

    /// Validate against the dialogue length and convert to the core type.
    pub fn into_segmentation(self, t: usize) -> Result<Segmentation, FormatError> {
        let boundaries = BoundarySet::new(self.boundary_indices, t)?;
        Ok(Segmentation {
            session_id: self.session_id,
            boundaries,
            method: self.method,
            params_fingerprint: self.params_fingerprint,
        })
    }
}

pub fn write_segmentation(seg: &Segmentation) -> String {
    let mut out = serde_json::to_string_pretty(&SegmentationDoc::from_segmentation(seg))
        .expect("segmentation serializes");
    out.push('\n');
    out
}

pub fn parse_segmentation(text: &str) -> Result<SegmentationDoc, FormatError> {
    let doc: SegmentationDoc = serde_json::from_str(text)?;
    check_version(&doc.format_version)?;
    Ok(doc)
}
