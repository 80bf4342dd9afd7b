//! Transcript, codebook, and rater-label domain types.
//!
//! All types are immutable values after construction; constructors validate the
//! structural invariants once so downstream code can rely on them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// One transcript turn: an opaque id, its 0-based position, a speaker tag, and text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub index: usize,
    pub speaker: String,
    pub text: String,
}

/// An ordered, non-empty sequence of utterances for one session.
///
/// Utterance indices are exactly `0..len()` in order; this is checked once at
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    session_id: String,
    utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DialogueError {
    #[error("dialogue `{0}` has no utterances")]
    Empty(String),
    #[error("utterance at position {position} has index {found}, expected {expected}")]
    NonContiguousIndex {
        position: usize,
        found: usize,
        expected: usize,
    },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
}

impl Dialogue {
    /// Build a dialogue, checking that indices are contiguous from 0 and ids unique.
    pub fn new(session_id: String, utterances: Vec<Utterance>) -> Result<Self, DialogueError> {
        if utterances.is_empty() {
            return Err(DialogueError::Empty(session_id));
        }
        let mut seen = BTreeMap::new();
        for (position, utt) in utterances.iter().enumerate() {
            if utt.index != position {
                return Err(DialogueError::NonContiguousIndex {
                    position,
                    found: utt.index,
                    expected: position,
                });
            }
            if seen.insert(utt.id.clone(), position).is_some() {
                return Err(DialogueError::DuplicateId(utt.id.clone()));
            }
        }
        Ok(Self {
            session_id,
            utterances,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Number of utterances.
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty() // never true: T >= 1 by construction
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    /// Resolve an utterance id to its index.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.utterances.iter().position(|u| u.id == id)
    }
}

/// One annotation move: a name, its definition, and illustrative examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub name: String,
    pub definition: String,
    pub examples: Vec<String>,
}

/// An annotation scheme: ordered moves plus an optional reserved category that
/// absorbs unlabeled utterances.
///
/// The category space has size `moves + 1` when the reserved category is
/// enabled, with the reserved category always last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    name: String,
    moves: Vec<Move>,
    none_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodebookError {
    #[error("codebook `{0}` has no moves")]
    Empty(String),
    #[error("codebook `{codebook}` has a move with an empty name")]
    EmptyMoveName { codebook: String },
    #[error("codebook `{codebook}` declares move `{name}` more than once")]
    DuplicateMove { codebook: String, name: String },
}

impl Codebook {
    pub fn new(name: String, moves: Vec<Move>, none_enabled: bool) -> Result<Self, CodebookError> {
        if moves.is_empty() {
            return Err(CodebookError::Empty(name));
        }
        for (i, mv) in moves.iter().enumerate() {
            if mv.name.is_empty() {
                return Err(CodebookError::EmptyMoveName { codebook: name });
            }
            if moves[..i].iter().any(|m| m.name == mv.name) {
                return Err(CodebookError::DuplicateMove {
                    codebook: name,
                    name: mv.name.clone(),
                });
            }
        }
        Ok(Self {
            name,
            moves,
            none_enabled,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn none_enabled(&self) -> bool {
        self.none_enabled
    }

    /// Same codebook with the reserved unlabeled category toggled.
    pub fn with_none_enabled(&self, none_enabled: bool) -> Self {
        Self {
            name: self.name.clone(),
            moves: self.moves.clone(),
            none_enabled,
        }
    }

    /// Total number of label categories, including the reserved one when enabled.
    pub fn category_count(&self) -> usize {
        self.moves.len() + usize::from(self.none_enabled)
    }

    /// Category index for a move name, if it exists.
    pub fn category_of(&self, move_name: &str) -> Option<usize> {
        self.moves.iter().position(|m| m.name == move_name)
    }

    /// Index of the reserved unlabeled category, when enabled.
    pub fn none_index(&self) -> Option<usize> {
        self.none_enabled.then_some(self.moves.len())
    }

    pub fn move_names(&self) -> impl Iterator<Item = &str> {
        self.moves.iter().map(|m| m.name.as_str())
    }
}

/// Per-utterance move labels assigned by one rater over one session.
///
/// Absent entries mean the rater left the utterance unlabeled, which is the
/// norm for sparse schemes. Labels are stored by move name so the same values
/// survive codebook reordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterLabels {
    rater_id: String,
    labels: BTreeMap<usize, String>,
}

impl RaterLabels {
    pub fn new(rater_id: String) -> Self {
        Self {
            rater_id,
            labels: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        rater_id: String,
        entries: impl IntoIterator<Item = (usize, String)>,
    ) -> Self {
        Self {
            rater_id,
            labels: entries.into_iter().collect(),
        }
    }

    pub fn rater_id(&self) -> &str {
        &self.rater_id
    }

    pub fn insert(&mut self, index: usize, move_name: String) {
        self.labels.insert(index, move_name);
    }

    /// Move name at an utterance index, or `None` when unlabeled.
    pub fn get(&self, index: usize) -> Option<&str> {
        self.labels.get(&index).map(String::as_str)
    }

    /// Number of labeled utterances.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.labels.iter().map(|(i, m)| (*i, m.as_str()))
    }
}
