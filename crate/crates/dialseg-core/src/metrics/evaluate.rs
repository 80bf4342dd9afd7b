//! Corpus-level evaluation: per-session metric rows plus bootstrap-aggregated
//! summaries.

use alloc::string::String;
use alloc::vec::Vec;

use crate::boundary::Segmentation;
use crate::stats::{self, BootstrapCi, BootstrapError};
use crate::types::{Codebook, RaterLabels};

use super::{
    adjacent_js, boundary_change_rate, granularity_stats, human_ai_js, weighted_entropy,
    weighted_purity, MetricError, MetricValue,
};

/// How utterances without a label enter the category space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnlabeledMode {
    /// Unlabeled utterances count toward a reserved extra category (default).
    NoneCategory,
    /// Unlabeled utterances leave the counts; fully unlabeled segments drop.
    Exclude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub unlabeled: UnlabeledMode,
    /// Rescale adjacent-pair weights to sum to 1 instead of using them as defined.
    pub normalize_adjacent: bool,
    pub bootstrap_iterations: usize,
    pub confidence_level: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            unlabeled: UnlabeledMode::NoneCategory,
            normalize_adjacent: false,
            bootstrap_iterations: 10_000,
            confidence_level: 0.95,
            seed: 0,
        }
    }
}

/// One session's evaluation inputs: its length, the segmentation under test,
/// and the label sets of every rater.
pub struct SessionEvalInput<'a> {
    pub session_id: &'a str,
    pub t: usize,
    pub segmentation: &'a Segmentation,
    pub raters: Vec<&'a RaterLabels>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaterSessionMetrics {
    pub rater_id: String,
    pub entropy: MetricValue,
    pub purity: MetricValue,
    pub adjacent_js: MetricValue,
    pub bcr: MetricValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetrics {
    pub session_id: String,
    pub t: usize,
    pub k: usize,
    pub raters: Vec<RaterSessionMetrics>,
    /// Between the first two raters; undefined unless exactly two are present.
    pub human_ai_js: MetricValue,
}

/// Mean over sessions with a defined value, plus a bootstrap interval when at
/// least two sessions contribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub ci: Option<BootstrapCi>,
    /// Sessions contributing a defined value.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranularityStats {
    pub mean: f64,
    pub sd: Option<f64>,
}

/// Corpus report: session rows plus aggregates. Consistency and
/// distinctiveness aggregates average each session's per-rater values before
/// bootstrapping; per-rater detail stays in the session rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub sessions: Vec<SessionMetrics>,
    pub rater_ids: Vec<String>,
    pub granularity: GranularityStats,
    pub entropy: Aggregate,
    pub purity: Aggregate,
    pub adjacent_js: Aggregate,
    pub bcr: Aggregate,
    pub human_ai_js: Aggregate,
    /// Total segments dropped for undefined distributions (entropy/purity pass).
    pub dropped_segments: usize,
    pub unlabeled_mode: UnlabeledMode,
    pub normalize_adjacent: bool,
    pub confidence_level: f64,
    pub bootstrap_iterations: usize,
    pub seed: u64,
}

fn aggregate(
    values: &[Option<f64>],
    config: &EvalConfig,
    seed_tag: u64,
) -> Result<Aggregate, MetricError> {
    let defined: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if defined.is_empty() {
        return Ok(Aggregate {
            mean: None,
            ci: None,
            n: 0,
        });
    }
    let mean = stats::mean(&defined);
    let ci = match stats::bootstrap_ci(
        &defined,
        config.confidence_level,
        config.bootstrap_iterations,
        crate::seeding::subseed(config.seed, seed_tag),
    ) {
        Ok(ci) => Some(ci),
        Err(BootstrapError::TooFewValues(_)) => None,
        Err(e) => return Err(MetricError::InvalidConfig(alloc::format!("{e}"))),
    };
    Ok(Aggregate {
        mean,
        ci,
        n: defined.len(),
    })
}

/// Mean of the defined per-rater values for one session.
fn rater_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    stats::mean(&defined)
}

/// Evaluate every session and aggregate into a corpus report.
///
/// All segmentations are validated against their dialogue lengths before any
/// metric is computed.
pub fn evaluate_corpus(
    sessions: &[SessionEvalInput<'_>],
    codebook: &Codebook,
    config: &EvalConfig,
) -> Result<MetricsReport, MetricError> {
    if sessions.is_empty() {
        return Err(MetricError::NoSessions);
    }
    if config.bootstrap_iterations < 1000 {
        return Err(MetricError::InvalidConfig(alloc::format!(
            "bootstrap iterations must be >= 1000, got {}",
            config.bootstrap_iterations
        )));
    }
    if !(config.confidence_level > 0.0 && config.confidence_level < 1.0) {
        return Err(MetricError::InvalidConfig(alloc::format!(
            "confidence level must be in (0, 1), got {}",
            config.confidence_level
        )));
    }

    let effective =
        codebook.with_none_enabled(matches!(config.unlabeled, UnlabeledMode::NoneCategory));

    // Validate everything up front so a bad session cannot abort mid-report.
    for s in sessions {
        if s.segmentation.session_id != s.session_id {
            return Err(MetricError::MissingSegmentation(s.session_id.into()));
        }
        s.segmentation.boundaries.induce_segments(s.t)?;
    }

    let rater_ids: Vec<String> = sessions
        .first()
        .map(|s| s.raters.iter().map(|r| r.rater_id().into()).collect())
        .unwrap_or_default();

    let mut rows = Vec::with_capacity(sessions.len());
    let mut dropped_segments = 0usize;
    for s in sessions {
        let mut raters = Vec::with_capacity(s.raters.len());
        for labels in &s.raters {
            let entropy = weighted_entropy(s.segmentation, s.t, labels, &effective)?;
            let purity = weighted_purity(s.segmentation, s.t, labels, &effective)?;
            let adj = adjacent_js(
                s.segmentation,
                s.t,
                labels,
                &effective,
                config.normalize_adjacent,
            )?;
            let bcr = boundary_change_rate(s.segmentation, s.t, labels, &effective)?;
            dropped_segments += entropy.skipped;
            raters.push(RaterSessionMetrics {
                rater_id: labels.rater_id().into(),
                entropy,
                purity,
                adjacent_js: adj,
                bcr,
            });
        }
        let ha = if s.raters.len() == 2 {
            human_ai_js(s.segmentation, s.t, s.raters[0], s.raters[1], &effective)?
        } else {
            MetricValue::undefined(0)
        };
        rows.push(SessionMetrics {
            session_id: s.session_id.into(),
            t: s.t,
            k: s.segmentation.segment_count(),
            raters,
            human_ai_js: ha,
        });
    }

    let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    let granularity = granularity_stats(&ks).expect("at least one session");

    let session_means = |pick: fn(&RaterSessionMetrics) -> MetricValue| -> Vec<Option<f64>> {
        rows.iter()
            .map(|row| rater_mean(row.raters.iter().map(|r| pick(r).value)))
            .collect()
    };

    let entropy = aggregate(&session_means(|r| r.entropy), config, 1)?;
    let purity = aggregate(&session_means(|r| r.purity), config, 2)?;
    let adjacent = aggregate(&session_means(|r| r.adjacent_js), config, 3)?;
    let bcr = aggregate(&session_means(|r| r.bcr), config, 4)?;
    let ha_values: Vec<Option<f64>> = rows.iter().map(|r| r.human_ai_js.value).collect();
    let human_ai = aggregate(&ha_values, config, 5)?;

    Ok(MetricsReport {
        sessions: rows,
        rater_ids,
        granularity: GranularityStats {
            mean: granularity.mean,
            sd: granularity.sd,
        },
        entropy,
        purity,
        adjacent_js: adjacent,
        bcr,
        human_ai_js: human_ai,
        dropped_segments,
        unlabeled_mode: config.unlabeled,
        normalize_adjacent: config.normalize_adjacent,
        confidence_level: config.confidence_level,
        bootstrap_iterations: config.bootstrap_iterations,
        seed: config.seed,
    })
}
