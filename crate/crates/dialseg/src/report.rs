//! Metric report rendering: Markdown summary table, long-format CSV, and a
//! JSON document with full per-session detail.
//!
//! The Markdown table groups columns into Granularity, Consistency,
//! Distinctiveness, and Rater Agreement. Means print with 3 decimals and
//! interval bounds with 2; granularity prints as mean (SD) with 2 decimals.

use serde::Serialize;

use dialseg_core::metrics::{Aggregate, MetricValue, MetricsReport, UnlabeledMode};

/// One labeled report, typically one segmentation method.
pub struct ReportBundle<'a> {
    pub label: String,
    pub report: &'a MetricsReport,
}

fn fmt_aggregate(agg: &Aggregate) -> String {
    match (agg.mean, agg.ci) {
        (Some(mean), Some(ci)) => format!("{mean:.3} [{:.2}, {:.2}]", ci.lo, ci.hi),
        (Some(mean), None) => format!("{mean:.3}"),
        (None, _) => "n/a".to_string(),
    }
}

fn fmt_granularity(report: &MetricsReport) -> String {
    match report.granularity.sd {
        Some(sd) => format!("{:.2} ({sd:.2})", report.granularity.mean),
        None => format!("{:.2} (n/a)", report.granularity.mean),
    }
}

pub fn render_markdown(bundles: &[ReportBundle<'_>]) -> String {
    let mut out = String::from("# Segmentation evaluation\n\n");
    if let Some(first) = bundles.first() {
        let mode = match first.report.unlabeled_mode {
            UnlabeledMode::NoneCategory => "unlabeled utterances count as a reserved category",
            UnlabeledMode::Exclude => "unlabeled utterances are excluded",
        };
        out.push_str(&format!(
            "Values are mean [95% CI] over sessions; {mode}; consistency and distinctiveness \
             columns average the per-rater values per session.\n\n"
        ));
    }
    out.push_str(
        "| Method | Granularity<br>K Mean (SD) | Consistency<br>Entropy \u{2193} | Consistency<br>Purity \u{2191} | Distinctiveness<br>Adjacent JS \u{2191} | Distinctiveness<br>BCR \u{2191} | Rater Agreement<br>Human-AI JS \u{2193} |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|\n");
    for bundle in bundles {
        let r = bundle.report;
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            bundle.label,
            fmt_granularity(r),
            fmt_aggregate(&r.entropy),
            fmt_aggregate(&r.purity),
            fmt_aggregate(&r.adjacent_js),
            fmt_aggregate(&r.bcr),
            fmt_aggregate(&r.human_ai_js),
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Long-format CSV: corpus aggregates first, then per-session per-rater rows.
pub fn render_csv(bundles: &[ReportBundle<'_>]) -> String {
    let mut out =
        String::from("method,scope,session_id,rater,metric,value,ci_lo,ci_hi,skipped\n");
    for bundle in bundles {
        let label = csv_field(&bundle.label);
        let r = bundle.report;
        let mut corpus_row = |metric: &str, agg: &Aggregate| {
            out.push_str(&format!(
                "{label},corpus,,,{metric},{},{},{},\n",
                csv_value(agg.mean),
                csv_value(agg.ci.map(|c| c.lo)),
                csv_value(agg.ci.map(|c| c.hi)),
            ));
        };
        corpus_row("entropy", &r.entropy);
        corpus_row("purity", &r.purity);
        corpus_row("adjacent_js", &r.adjacent_js);
        corpus_row("bcr", &r.bcr);
        corpus_row("human_ai_js", &r.human_ai_js);
        out.push_str(&format!(
            "{label},corpus,,,k_mean,{},,,\n",
            r.granularity.mean
        ));
        out.push_str(&format!(
            "{label},corpus,,,k_sd,{},,,\n",
            csv_value(r.granularity.sd)
        ));

        for session in &r.sessions {
            let sid = csv_field(&session.session_id);
            out.push_str(&format!("{label},session,{sid},,k,{},,,\n", session.k));
            out.push_str(&format!("{label},session,{sid},,t,{},,,\n", session.t));
            let mut session_row = |rater: &str, metric: &str, v: &MetricValue| {
                out.push_str(&format!(
                    "{label},session,{sid},{rater},{metric},{},,,{}\n",
                    csv_value(v.value),
                    v.skipped,
                ));
            };
            for rater in &session.raters {
                session_row(&rater.rater_id, "entropy", &rater.entropy);
                session_row(&rater.rater_id, "purity", &rater.purity);
                session_row(&rater.rater_id, "adjacent_js", &rater.adjacent_js);
                session_row(&rater.rater_id, "bcr", &rater.bcr);
            }
            session_row("", "human_ai_js", &session.human_ai_js);
        }
    }
    out
}

#[derive(Serialize)]
struct JsonAggregate {
    mean: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    sessions_defined: usize,
}

impl JsonAggregate {
    fn from(agg: &Aggregate) -> Self {
        Self {
            mean: agg.mean,
            ci_lo: agg.ci.map(|c| c.lo),
            ci_hi: agg.ci.map(|c| c.hi),
            sessions_defined: agg.n,
        }
    }
}

#[derive(Serialize)]
struct JsonMetricValue {
    value: Option<f64>,
    skipped: usize,
}

impl JsonMetricValue {
    fn from(v: &MetricValue) -> Self {
        Self {
            value: v.value,
            skipped: v.skipped,
        }
    }
}

#[derive(Serialize)]
struct JsonRaterMetrics {
    rater_id: String,
    entropy: JsonMetricValue,
    purity: JsonMetricValue,
    adjacent_js: JsonMetricValue,
    bcr: JsonMetricValue,
}

#[derive(Serialize)]
struct JsonSession {
    session_id: String,
    t: usize,
    k: usize,
    raters: Vec<JsonRaterMetrics>,
    human_ai_js: JsonMetricValue,
}

#[derive(Serialize)]
struct JsonReport {
    method: String,
    rater_ids: Vec<String>,
    unlabeled_mode: String,
    normalize_adjacent: bool,
    confidence_level: f64,
    bootstrap_iterations: usize,
    seed: u64,
    dropped_segments: usize,
    k_mean: f64,
    k_sd: Option<f64>,
    entropy: JsonAggregate,
    purity: JsonAggregate,
    adjacent_js: JsonAggregate,
    bcr: JsonAggregate,
    human_ai_js: JsonAggregate,
    sessions: Vec<JsonSession>,
}

#[derive(Serialize)]
struct JsonDocument {
    format_version: String,
    reports: Vec<JsonReport>,
}

pub fn render_json(bundles: &[ReportBundle<'_>]) -> String {
    let reports = bundles
        .iter()
        .map(|b| {
            let r = b.report;
            JsonReport {
                method: b.label.clone(),
                rater_ids: r.rater_ids.clone(),
                unlabeled_mode: match r.unlabeled_mode {
                    UnlabeledMode::NoneCategory => "none-category".to_string(),
                    UnlabeledMode::Exclude => "exclude".to_string(),
                },
                normalize_adjacent: r.normalize_adjacent,
                confidence_level: r.confidence_level,
                bootstrap_iterations: r.bootstrap_iterations,
                seed: r.seed,
                dropped_segments: r.dropped_segments,
                k_mean: r.granularity.mean,
                k_sd: r.granularity.sd,
                entropy: JsonAggregate::from(&r.entropy),
                purity: JsonAggregate::from(&r.purity),
                adjacent_js: JsonAggregate::from(&r.adjacent_js),
                bcr: JsonAggregate::from(&r.bcr),
                human_ai_js: JsonAggregate::from(&r.human_ai_js),
                sessions: r
                    .sessions
                    .iter()
                    .map(|s| JsonSession {
                        session_id: s.session_id.clone(),
                        t: s.t,
                        k: s.k,
                        raters: s
                            .raters
                            .iter()
                            .map(|rm| JsonRaterMetrics {
                                rater_id: rm.rater_id.clone(),
                                entropy: JsonMetricValue::from(&rm.entropy),
                                purity: JsonMetricValue::from(&rm.purity),
                                adjacent_js: JsonMetricValue::from(&rm.adjacent_js),
                                bcr: JsonMetricValue::from(&rm.bcr),
                            })
                            .collect(),
                        human_ai_js: JsonMetricValue::from(&s.human_ai_js),
                    })
                    .collect(),
            }
        })
        .collect();
    let doc = JsonDocument {
        format_version: crate::formats::FORMAT_VERSION.to_string(),
        reports,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    out
}
