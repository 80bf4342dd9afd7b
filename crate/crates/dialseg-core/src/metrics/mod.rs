//! Gold-label-free segmentation metrics over rater label distributions.
//!
//! Each segment is summarized by its empirical distribution over the codebook's
//! categories; segmentations are then scored by within-segment consistency
//! (normalized entropy, purity), between-segment distinctiveness (adjacent
//! Jensen-Shannon divergence, boundary change rate), and two-rater
//! distributional agreement. All logarithms are base 2 so every metric lives in
//! `[0, 1]`.
//!
//! Unlabeled utterances either map to the codebook's reserved category (when
//! enabled) or drop out of the counts; a segment that loses all its utterances
//! that way has an undefined distribution, and the weighted aggregates skip it
//! while renormalizing the remaining weight mass.

mod evaluate;

pub use evaluate::{
    evaluate_corpus, Aggregate, EvalConfig, GranularityStats, MetricsReport,
    RaterSessionMetrics, SessionEvalInput, SessionMetrics, UnlabeledMode,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::boundary::{BoundaryError, Segmentation};
use crate::types::{Codebook, RaterLabels};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("segment is empty")]
    EmptySegment,
    #[error("segment has no labeled utterances and no reserved category to absorb them")]
    UndefinedDistribution,
    #[error("label `{move_name}` from rater `{rater}` is not in the codebook")]
    UnknownMove { rater: String, move_name: String },
    #[error("entropy needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("distributions have {left} and {right} categories")]
    CategoryMismatch { left: usize, right: usize },
    #[error("segmentation does not fit the dialogue: {0}")]
    InvalidBoundaries(#[from] BoundaryError),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("no sessions to evaluate")]
    NoSessions,
    #[error("no segmentation provided for session `{0}`")]
    MissingSegmentation(String),
}

/// An empirical distribution over the codebook's category space.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDistribution {
    probs: Vec<f64>,
}

impl SegmentDistribution {
    /// Wrap raw probabilities; entries must be non-negative, finite, and sum
    /// to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self, MetricError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::UndefinedDistribution);
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of categories.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// The category index of utterance `index` under one rater, or `None` when the
/// utterance stays outside the category space (unlabeled with the reserved
/// category disabled).
pub fn resolve_category(
    labels: &RaterLabels,
    index: usize,
    codebook: &Codebook,
) -> Result<Option<usize>, MetricError> {
    match labels.get(index) {
        Some(name) => match codebook.category_of(name) {
            Some(c) => Ok(Some(c)),
            None => Err(MetricError::UnknownMove {
                rater: labels.rater_id().into(),
                move_name: name.into(),
            }),
        },
        None => Ok(codebook.none_index()),
    }
}

/// Empirical category distribution of one segment under one rater.
pub fn segment_distribution(
    segment: Range<usize>,
    labels: &RaterLabels,
    codebook: &Codebook,
) -> Result<SegmentDistribution, MetricError> {
    if segment.is_empty() {
        return Err(MetricError::EmptySegment);
    }
    let mut counts = vec![0usize; codebook.category_count()];
    let mut total = 0usize;
    for index in segment {
        if let Some(c) = resolve_category(labels, index, codebook)? {
            counts[c] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::UndefinedDistribution);
    }
    Ok(SegmentDistribution {
        probs: counts
            .into_iter()
            .map(|c| c as f64 / total as f64)
            .collect(),
    })
}

/// Shannon entropy divided by `log2(C)`, in `[0, 1]`, with `0 log 0 = 0`.
pub fn normalized_entropy(dist: &SegmentDistribution) -> Result<f64, MetricError> {
    let c = dist.len();
    if c < 2 {
        return Err(MetricError::TooFewCategories(c));
    }
    let h: f64 = dist
        .probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * libm::log2(*p))
        .sum();
    Ok((h / libm::log2(c as f64)).clamp(0.0, 1.0))
}

/// Share of the dominant category.
pub fn purity(dist: &SegmentDistribution) -> f64 {
    dist.probs.iter().copied().fold(0.0, f64::max)
}

/// Jensen-Shannon divergence in bits, symmetric, in `[0, 1]`.
///
/// Mixture terms are strictly positive wherever either argument is, so the
/// divergence is always finite.
pub fn js_divergence(
    p: &SegmentDistribution,
    q: &SegmentDistribution,
) -> Result<f64, MetricError> {
    if p.len() != q.len() {
        return Err(MetricError::CategoryMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * libm::log2(pi / mi);
        }
        if qi > 0.0 {
            kl_q += qi * libm::log2(qi / mi);
        }
    }
    Ok((0.5 * kl_p + 0.5 * kl_q).clamp(0.0, 1.0))
}

/// A metric value that may be undefined, plus how many segments (or boundary
/// pairs) were skipped on the way to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: Option<f64>,
    pub skipped: usize,
}

impl MetricValue {
    pub fn undefined(skipped: usize) -> Self {
        Self {
            value: None,
            skipped,
        }
    }
}

/// Per-segment weights `|S_k| / T` and adjacent-pair weights
/// `(|S_k| + |S_{k+1}|) / 2T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWeights {
    pub w: Vec<f64>,
    pub w_adj: Vec<f64>,
}

pub fn segment_weights(
    segmentation: &Segmentation,
    t: usize,
) -> Result<SegmentWeights, MetricError> {
    let segments = segmentation.boundaries.induce_segments(t)?;
    let w = segments.iter().map(|s| s.len() as f64 / t as f64).collect();
    let w_adj = segments
        .windows(2)
        .map(|pair| (pair[0].len() + pair[1].len()) as f64 / (2.0 * t as f64))
        .collect();
    Ok(SegmentWeights { w, w_adj })
}

/// Distribution of every segment, with `None` marking undefined ones.
fn segment_distributions(
    segmentation: &Segmentation,
    t: usize,
    labels: &RaterLabels,
    codebook: &Codebook,
) -> Result<Vec<(usize, Option<SegmentDistribution>)>, MetricError> {
    let segments = segmentation.boundaries.induce_segments(t)?;
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let len = seg.len();
        match segment_distribution(seg, labels, codebook) {
            Ok(dist) => out.push((len, Some(dist))),
            Err(MetricError::UndefinedDistribution) => out.push((len, None)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Length-weighted mean of a per-segment statistic over defined segments.
///
/// Accumulates `Σ |S_k|·m_k` and divides once by the retained length mass, so
/// dropping undefined segments renormalizes the weights exactly.
fn weighted_segment_metric(
    segmentation: &Segmentation,
    t: usize,
    labels: &RaterLabels,
    codebook: &Codebook,
    stat: impl Fn(&SegmentDistribution) -> Result<f64, MetricError>,
) -> Result<MetricValue, MetricError> {
    let mut num = 0.0;
    let mut len_mass = 0usize;
    let mut skipped = 0usize;
    for (len, dist) in segment_distributions(segmentation, t, labels, codebook)? {
        match dist {
            Some(d) => {
                num += len as f64 * stat(&d)?;
                len_mass += len;
            }
            None => skipped += 1,
        }
    }
    if len_mass == 0 {
        return Ok(MetricValue::undefined(skipped));
    }
    Ok(MetricValue {
        value: Some(num / len_mass as f64),
        skipped,
    })
}

/// Length-weighted normalized entropy across segments (lower is better).
pub fn weighted_entropy(
    segmentation: &Segmentation,
    t: usize,
    labels: &RaterLabels,
    codebook: &Codebook,
) -> Result<MetricValue, MetricError> {
    weighted_segment_metric(segmentation, t, labels, codebook, normalized_entropy)
}

/// Length-weighted purity across segments (higher is better).
pub fn weighted_purity(
    segmentation: &Segmentation,
    t: usize,
    labels: &RaterLabels,
    codebook: &Codebook,
) -> Result<MetricValue, MetricError> {
    weighted_segment_metric(segmentation, t, labels, codebook, |d| Ok(purity(d)))
}

/// Pair-weighted Jensen-Shannon divergence between adjacent segments
/// (higher is better).
///
/// By default the pair weights `(|S_k| + |S_{k+1}|) / 2T` are used exactly as
/// defined even though they do not sum to 1; `normalize` rescales by the
/// retained pair mass for cross-dialogue comparability. Pairs with an
/// undefined side are skipped and counted. Undefined when there is a single
/// segment or no computable pair.
pub fn adjacent_js(
    segmentation: &Segmentation,
    t: usize,
    labels: &RaterLabels,
    codebook: &Codebook,
    normalize: bool,
) -> Result<MetricValue, MetricError> {
    let dists = segment_distributions(segmentation, t, labels, codebook)?;
    if dists.len() < 2 {
        return Ok(MetricValue::undefined(0));
    }
    let mut num = 0.0;
    let mut pair_mass = 0usize;
    let mut skipped = 0usize;
    for pair in dists.windows(2) {
        let (len_a, ref da) = pair[0];
        let (len_b, ref db) = pair[1];
        match (da, db) {
            (Some(da), Some(db)) => {
                num += (len_a + len_b) as f64 * js_divergence(da, db)?;
                pair_mass += len_a + len_b;
            }
            _ => skipped += 1,
        }
    }
    if pair_mass == 0 {
        return Ok(MetricValue::undefined(skipped));
    }
    let denom = if normalize {
        pair_mass as f64
    } else {
        2.0 * t as f64
    };
    Ok(MetricValue {
        value: Some(num / denom),
        skipped,
    })
}

/// Fraction of boundaries where the utterance-level category changes across
/// the cut (higher is better).
///
/// Boundaries whose flanking utterances cannot both be resolved to a category
/// are skipped and counted. Undefined when there are no boundaries or none is
/// resolvable.
pub fn boundary_change_rate(
    segmentation: &Segmentation,
    t: usize,
    labels: &RaterLabels,
    codebook: &Codebook,
) -> Result<MetricValue, MetricError> {
    segmentation.boundaries.induce_segments(t)?;
    let indices = segmentation.boundaries.indices();
    if indices.is_empty() {
        return Ok(MetricValue::undefined(0));
    }
    let mut changed = 0usize;
    let mut resolvable = 0usize;
    let mut skipped = 0usize;
    for &b in indices {
        let left = resolve_category(labels, b, codebook)?;
        let right = resolve_category(labels, b + 1, codebook)?;
        match (left, right) {
            (Some(l), Some(r)) => {
                resolvable += 1;
                if l != r {
                    changed += 1;
                }
            }
            _ => skipped += 1,
        }
    }
    if resolvable == 0 {
        return Ok(MetricValue::undefined(skipped));
    }
    Ok(MetricValue {
        value: Some(changed as f64 / resolvable as f64),
        skipped,
    })
}

/// Length-weighted Jensen-Shannon divergence between two raters' per-segment
/// distributions (lower is better).
pub fn human_ai_js(
    segmentation: &Segmentation,
    t: usize,
    labels_a: &RaterLabels,
    labels_b: &RaterLabels,
    codebook: &Codebook,
) -> Result<MetricValue, MetricError> {
    let da = segment_distributions(segmentation, t, labels_a, codebook)?;
    let db = segment_distributions(segmentation, t, labels_b, codebook)?;
    let mut num = 0.0;
    let mut len_mass = 0usize;
    let mut skipped = 0usize;
    for ((len, a), (_, b)) in da.into_iter().zip(db) {
        match (a, b) {
            (Some(a), Some(b)) => {
                num += len as f64 * js_divergence(&a, &b)?;
                len_mass += len;
            }
            _ => skipped += 1,
        }
    }
    if len_mass == 0 {
        return Ok(MetricValue::undefined(skipped));
    }
    Ok(MetricValue {
        value: Some(num / len_mass as f64),
        skipped,
    })
}

/// Mean and sample standard deviation of segment counts across sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct Granularity {
    pub mean: f64,
    pub sd: Option<f64>,
}

pub fn granularity_stats(segment_counts: &[usize]) -> Option<Granularity> {
    if segment_counts.is_empty() {
        return None;
    }
    let values: Vec<f64> = segment_counts.iter().map(|&k| k as f64).collect();
    Some(Granularity {
        mean: crate::stats::mean(&values).expect("non-empty"),
        sd: crate::stats::sample_sd(&values),
    })
}
