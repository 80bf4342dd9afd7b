//! Unsupervised boundary decoding from coherence drops in adjacent-utterance
//! similarity.
//!
//! The decoder scores each candidate cut by how far the local similarity dips
//! below its neighboring peaks (a two-sided depth score), keeps candidates
//! whose depth clears a mean-plus-scaled-deviation threshold, and greedily
//! selects them deepest-first under a minimum-spacing constraint and a cap on
//! the boundary count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::boundary::{BoundarySet, Segmentation};
use crate::embedding::{dot, EmbeddingSequence};
use crate::fingerprint;
use crate::types::Dialogue;

/// Boundary-selection hyperparameters.
///
/// `avg_seg_len`, when set, wins over `pick_num` and caps the boundary count
/// at `ceil(T / avg_seg_len) - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeParams {
    /// Context half-width when comparing a dip against nearby peaks.
    pub window_size: usize,
    /// Threshold scale: candidates must exceed `mean + alpha * sd` of all depths.
    pub alpha: f64,
    /// Hard cap on boundaries returned per dialogue.
    pub pick_num: Option<usize>,
    /// Target average segment length; derives the cap when set.
    pub avg_seg_len: Option<usize>,
    /// Minimum index separation between any two selected boundaries.
    pub min_gap: usize,
    /// Optional moving-average half-width applied to the similarity profile
    /// before depth scoring. Off by default.
    pub smoothing: Option<usize>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            window_size: 2,
            alpha: 0.5,
            pick_num: Some(4),
            avg_seg_len: None,
            min_gap: 3,
            smoothing: None,
        }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<(), CoherenceError> {
        if self.window_size < 1 {
            return Err(CoherenceError::InvalidParams("window_size must be >= 1"));
        }
        if self.pick_num == Some(0) {
            return Err(CoherenceError::InvalidParams("pick_num must be >= 1"));
        }
        if matches!(self.avg_seg_len, Some(v) if v < 2) {
            return Err(CoherenceError::InvalidParams("avg_seg_len must be >= 2"));
        }
        if self.min_gap < 1 {
            return Err(CoherenceError::InvalidParams("min_gap must be >= 1"));
        }
        if !self.alpha.is_finite() {
            return Err(CoherenceError::InvalidParams("alpha must be finite"));
        }
        Ok(())
    }

    /// Canonical parameter string, hashed into segmentation fingerprints.
    pub fn canonical(&self) -> String {
        format!(
            "coherence;window={};alpha={:?};pick={:?};avg={:?};gap={};smooth={:?}",
            self.window_size, self.alpha, self.pick_num, self.avg_seg_len, self.min_gap,
            self.smoothing,
        )
    }

    /// Effective cap on the number of boundaries for a dialogue of length `t`.
    fn cap(&self, t: usize) -> usize {
        match (self.avg_seg_len, self.pick_num) {
            (Some(len), _) => (t.div_ceil(len)).saturating_sub(1),
            (None, Some(n)) => n,
            (None, None) => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoherenceError {
    #[error("dialogue has {0} utterances; at least 2 are needed for any candidate boundary")]
    TooShort(usize),
    #[error("embedding count {emb} does not match dialogue length {t}")]
    LengthMismatch { emb: usize, t: usize },
    #[error("depth profile has {depths} entries, expected {expected}")]
    DepthLengthMismatch { depths: usize, expected: usize },
    #[error("invalid decode params: {0}")]
    InvalidParams(&'static str),
}

/// Cosine similarity of each adjacent embedding pair: `T - 1` values in `[-1, 1]`.
///
/// Vectors are unit norm, so cosine reduces to the dot product.
pub fn adjacent_similarity(emb: &EmbeddingSequence) -> Result<Vec<f64>, CoherenceError> {
    let t = emb.len();
    if t < 2 {
        return Err(CoherenceError::TooShort(t));
    }
    Ok((0..t - 1)
        .map(|i| dot(emb.vector(i), emb.vector(i + 1)))
        .collect())
}

/// Centered moving average with half-width `half`, clamped at the ends.
fn smooth(sims: &[f64], half: usize) -> Vec<f64> {
    (0..sims.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(sims.len() - 1);
            sims[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Two-sided depth of each similarity dip.
///
/// `d_i = (maxL_i - s_i) + (maxR_i - s_i)` where `maxL_i` / `maxR_i` are the
/// maxima within `window` positions left / right of `i`. Windows are clamped
/// at the ends and include `i` itself, so depths are never negative.
pub fn depth_scores(sims: &[f64], window: usize) -> Vec<f64> {
    let n = sims.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(n - 1);
            let max_l = sims[lo..=i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let max_r = sims[i..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (max_l - sims[i]) + (max_r - sims[i])
        })
        .collect()
}

/// Threshold, then greedily keep the deepest candidates under the spacing and
/// count constraints.
///
/// Candidates must strictly exceed `mean + alpha * sd` (population deviation),
/// so a flat profile selects nothing. Ties in depth resolve to the lower
/// index, which makes selection total and reproducible.
pub fn select_boundaries(
    depths: &[f64],
    params: &DecodeParams,
    t: usize,
) -> Result<BoundarySet, CoherenceError> {
    params.validate()?;
    if t < 2 || depths.len() != t - 1 {
        return Err(CoherenceError::DepthLengthMismatch {
            depths: depths.len(),
            expected: t.saturating_sub(1),
        });
    }
    let n = depths.len() as f64;
    let mean = depths.iter().sum::<f64>() / n;
    let var = depths.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let threshold = mean + params.alpha * libm::sqrt(var);

    let mut candidates: Vec<usize> = (0..depths.len())
        .filter(|&i| depths[i] > threshold)
        .collect();
    // Deepest first; equal depths visit the lower index first.
    candidates.sort_by(|&a, &b| depths[b].total_cmp(&depths[a]).then(a.cmp(&b)));

    let cap = params.cap(t);
    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        if kept.len() >= cap {
            break;
        }
        if kept
            .iter()
            .all(|&k| i.abs_diff(k) >= params.min_gap)
        {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(BoundarySet::new(kept, t).expect("selected indices are in range"))
}

/// Full decode: similarity profile, depth scores, thresholded greedy selection.
pub fn segment_coherence(
    dialogue: &Dialogue,
    emb: &EmbeddingSequence,
    params: &DecodeParams,
) -> Result<Segmentation, CoherenceError> {
    if emb.len() != dialogue.len() {
        return Err(CoherenceError::LengthMismatch {
            emb: emb.len(),
            t: dialogue.len(),
        });
    }
    let boundaries = decode(emb, params)?;
    Ok(Segmentation {
        session_id: dialogue.session_id().into(),
        boundaries,
        method: "coherence".into(),
        params_fingerprint: fingerprint::fingerprint(&params.canonical()),
    })
}

/// Decode boundaries straight from an embedding sequence.
pub fn decode(emb: &EmbeddingSequence, params: &DecodeParams) -> Result<BoundarySet, CoherenceError> {
    let mut sims = adjacent_similarity(emb)?;
    if let Some(half) = params.smoothing {
        sims = smooth(&sims, half);
    }
    let depths = depth_scores(&sims, params.window_size);
    select_boundaries(&depths, params, emb.len())
}
