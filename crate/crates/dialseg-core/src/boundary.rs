//! Boundary sets and the segment algebra they induce.
//!
//! A boundary at index `i` cuts the dialogue after the utterance at 0-based
//! position `i`, so valid internal boundaries live in `0..=T-2` and a set of
//! `|B|` boundaries induces `|B| + 1` contiguous segments covering `0..T`.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

/// A strictly increasing set of internal boundary indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundarySet {
    indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundaryError {
    #[error("dialogue length must be at least 1")]
    EmptyDialogue,
    #[error("boundary index {index} is out of range for {t} utterances (valid: 0..={max})")]
    OutOfRange { index: usize, t: usize, max: usize },
    #[error("boundary index {index} is not strictly increasing")]
    Unsorted { index: usize },
}

/// Raw boundary payload rejected during normalization; keeps the input for logging.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("boundary value {offending} is out of range for {t} utterances (raw payload: {raw:?})")]
pub struct NormalizeError {
    pub raw: Vec<i64>,
    pub offending: i64,
    pub t: usize,
}

impl BoundarySet {
    /// An empty set: the whole dialogue is one segment.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validate indices against a dialogue of `t` utterances.
    ///
    /// Indices must be strictly increasing and each in `0..=t-2`.
    pub fn new(indices: Vec<usize>, t: usize) -> Result<Self, BoundaryError> {
        if t == 0 {
            return Err(BoundaryError::EmptyDialogue);
        }
        for (pos, &idx) in indices.iter().enumerate() {
            if idx >= t - 1 {
                return Err(BoundaryError::OutOfRange {
                    index: idx,
                    t,
                    max: t.saturating_sub(2),
                });
            }
            if pos > 0 && indices[pos - 1] >= idx {
                return Err(BoundaryError::Unsorted { index: idx });
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of segments this set induces: `|B| + 1`.
    pub fn segment_count(&self) -> usize {
        self.indices.len() + 1
    }

    /// Split `0..t` into the contiguous segments induced by this set.
    ///
    /// Segments are returned in order as half-open ranges; their lengths sum
    /// to `t`.
    pub fn induce_segments(&self, t: usize) -> Result<Vec<Range<usize>>, BoundaryError> {
        // Re-validate so stale sets cannot silently produce bad spans.
        Self::new(self.indices.clone(), t)?;
        let mut segments = Vec::with_capacity(self.indices.len() + 1);
        let mut start = 0;
        for &b in &self.indices {
            segments.push(start..b + 1);
            start = b + 1;
        }
        segments.push(start..t);
        Ok(segments)
    }

    /// Recover the boundary set from a full segment cover (inverse of
    /// [`induce_segments`](Self::induce_segments)).
    pub fn from_segments(segments: &[Range<usize>]) -> Self {
        let indices = segments
            .iter()
            .take(segments.len().saturating_sub(1))
            .map(|r| r.end - 1)
            .collect();
        Self { indices }
    }
}

/// Normalize a raw boundary list into a valid [`BoundarySet`].
///
/// Sorts and deduplicates. When `final_sentinel` is set, a value of `t - 1`
/// is treated as an end-of-dialogue marker and stripped rather than rejected.
/// Any remaining value outside `0..=t-2` fails with the raw payload attached.
pub fn normalize_boundaries(
    raw: &[i64],
    t: usize,
    final_sentinel: bool,
) -> Result<BoundarySet, NormalizeError> {
    if t == 0 {
        return Err(NormalizeError {
            raw: raw.to_vec(),
            offending: 0,
            t,
        });
    }
    let mut values: Vec<i64> = raw.to_vec();
    values.sort_unstable();
    values.dedup();
    if final_sentinel {
        values.retain(|&v| v != t as i64 - 1);
    }
    let mut indices = Vec::with_capacity(values.len());
    for v in values {
        if v < 0 || v >= t as i64 - 1 {
            return Err(NormalizeError {
                raw: raw.to_vec(),
                offending: v,
                t,
            });
        }
        indices.push(v as usize);
    }
    Ok(BoundarySet { indices })
}

/// A boundary set attributed to a session and the method that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub session_id: String,
    pub boundaries: BoundarySet,
    /// Human-readable descriptor of the producing method.
    pub method: String,
    /// Stable hash of the producing configuration.
    pub params_fingerprint: String,
}

impl Segmentation {
    pub fn segment_count(&self) -> usize {
        self.boundaries.segment_count()
    }
}
