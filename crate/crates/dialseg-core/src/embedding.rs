//! Unit-norm utterance embedding sequences and small vector helpers.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Tolerance inside which a vector counts as already unit-norm and is kept
/// verbatim. Keeping near-unit vectors untouched makes 32-bit round trips
/// through the on-disk container stable.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// A session's utterance embeddings: `len()` vectors of dimension `dim()`,
/// each unit Euclidean norm within [`UNIT_NORM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    session_id: String,
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("vector {index} contains a non-finite value")]
    NonFinite { index: usize },
    #[error("vector {index} is the zero vector and cannot be normalized")]
    ZeroVector { index: usize },
}

impl EmbeddingSequence {
    /// Build a sequence, rescaling any vector whose norm is off unit by more
    /// than [`UNIT_NORM_TOL`]. Zero and non-finite vectors are rejected.
    pub fn new(
        session_id: String,
        dim: usize,
        mut vectors: Vec<Vec<f64>>,
    ) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::DimensionTooSmall(dim));
        }
        for (index, v) in vectors.iter_mut().enumerate() {
            if v.len() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    index,
                    found: v.len(),
                    expected: dim,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite { index });
            }
            let n = norm(v);
            if n == 0.0 {
                return Err(EmbeddingError::ZeroVector { index });
            }
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                for x in v.iter_mut() {
                    *x /= n;
                }
            }
        }
        Ok(Self {
            session_id,
            dim,
            vectors,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vectors (one per utterance).
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Scale to unit norm; `None` for the zero vector.
pub(crate) fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| x / n).collect())
}
