//! Command implementations behind the CLI: validate, segment, evaluate,
//! synth, annotate, and the canned-response mock server.
//!
//! Exit codes: 0 success, 1 validation/config error, 2 partial failure
//! without `--allow-partial`. Every run directory receives a resolved-config
//! snapshot, input digests, the outputs, and a machine-readable summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use dialseg_core::boundary::Segmentation;
use dialseg_core::coherence::{self, CoherenceError, DecodeParams};
use dialseg_core::fingerprint::fingerprint;
use dialseg_core::fusion::{self, FusionError, FusionParams};
use dialseg_core::metrics::{self, EvalConfig, MetricError, SessionEvalInput, UnlabeledMode};
use dialseg_core::synth::{self, SynthError, SynthSpec};
use dialseg_core::types::RaterLabels;

use crate::config::ConfigError;
use crate::formats::{self, FormatError, Manifest, ManifestLabelFile, ManifestSession};
use crate::ingest::{self, Corpus, IngestError};
use crate::llm::mock::{MockLlmServer, MockRulesFile};
use crate::llm::{LlmClient, LlmClientConfig, LlmError, PromptMode};
use crate::report::{self, ReportBundle};
use crate::rundir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{}: {source}", path.display())]
    FormatAt {
        path: PathBuf,
        source: FormatError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Usage(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// The four segmentation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Coherence,
    CoherenceFused,
    LlmGeneric,
    LlmDa,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Coherence => "coherence",
            Method::CoherenceFused => "coherence-fused",
            Method::LlmGeneric => "llm-generic",
            Method::LlmDa => "llm-da",
        }
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| usage(format!("could not build thread pool: {e}")))
}

/// Paths of everything the manifest references, for input digesting.
fn manifest_input_paths(manifest_path: &Path, corpus: &Corpus) -> Vec<PathBuf> {
    let mut paths = vec![manifest_path.to_path_buf()];
    let base = &corpus.base_dir;
    paths.push(corpus.manifest.resolve(base, &corpus.manifest.codebook_path));
    for s in &corpus.manifest.sessions {
        paths.push(corpus.manifest.resolve(base, &s.transcript_path));
        if let Some(e) = &s.embedding_path {
            paths.push(corpus.manifest.resolve(base, e));
        }
    }
    for l in &corpus.manifest.label_files {
        paths.push(corpus.manifest.resolve(base, &l.path));
    }
    paths
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

pub fn cmd_validate(manifest_path: &Path, out_dir: Option<&Path>) -> Result<i32, CliError> {
    let report = ingest::validate_corpus(manifest_path);
    for row in &report.rows {
        let labels: Vec<String> = row
            .label_counts
            .iter()
            .map(|(rater, n)| format!("{rater}={n}"))
            .collect();
        println!(
            "{}\tT={}\tlabels[{}]\tembeddings={}",
            row.session_id,
            row.t,
            labels.join(","),
            match row.embedding_dim {
                Some(d) => format!("d{d}"),
                None => "none".to_string(),
            }
        );
    }
    for issue in &report.issues {
        match &issue.session_id {
            Some(sid) => eprintln!("error [{sid}]: {}", issue.message),
            None => eprintln!("error: {}", issue.message),
        }
    }
    if let Some(out_dir) = out_dir {
        rundir::write_json(&out_dir.join("validation.json"), &report)?;
        rundir::write_run_metadata(
            out_dir,
            &json!({
                "format_version": formats::FORMAT_VERSION,
                "command": "validate",
                "manifest": manifest_path.display().to_string(),
            }),
            &[manifest_path.to_path_buf()],
        )?;
        rundir::write_json(
            &out_dir.join("run_summary.json"),
            &json!({
                "format_version": formats::FORMAT_VERSION,
                "command": "validate",
                "sessions": report.rows.len(),
                "issues": report.issues.len(),
            }),
        )?;
    }
    println!(
        "{} session(s), {} issue(s)",
        report.rows.len(),
        report.issues.len()
    );
    Ok(if report.ok() { EXIT_OK } else { EXIT_ERROR })
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

pub struct SegmentOptions {
    pub manifest_path: PathBuf,
    pub method: Method,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    pub allow_partial: bool,
    pub decode: DecodeParams,
    pub fusion: FusionParams,
    /// Rater whose labels populate the fusion memory bank.
    pub memory_rater: String,
    pub llm: LlmClientConfig,
}

pub fn cmd_segment(opts: &SegmentOptions) -> Result<i32, CliError> {
    opts.decode.validate()?;
    let corpus = ingest::load_corpus(&opts.manifest_path)?;

    // Prerequisites fail before any work starts.
    match opts.method {
        Method::Coherence | Method::CoherenceFused => {
            let missing: Vec<&str> = corpus
                .sessions
                .iter()
                .filter(|s| s.embeddings.is_none())
                .map(|s| s.dialogue.session_id())
                .collect();
            if !missing.is_empty() {
                return Err(usage(format!(
                    "method {} needs embeddings for every session; missing: {}",
                    opts.method.as_str(),
                    missing.join(", ")
                )));
            }
            if opts.method == Method::CoherenceFused
                && !corpus.rater_ids.contains(&opts.memory_rater)
            {
                return Err(usage(format!(
                    "memory rater `{}` is not in the manifest (raters: {})",
                    opts.memory_rater,
                    corpus.rater_ids.join(", ")
                )));
            }
        }
        Method::LlmGeneric | Method::LlmDa => {}
    }

    let client = LlmClient::new(opts.llm.clone());
    let pool_jobs = match opts.method {
        Method::LlmGeneric | Method::LlmDa => Some(
            opts.jobs
                .unwrap_or(opts.llm.concurrency)
                .min(opts.llm.concurrency)
                .max(1),
        ),
        _ => opts.jobs,
    };
    let pool = thread_pool(pool_jobs)?;

    // Fusion state is built once over the whole corpus and written next to
    // the outputs so later runs can inspect or reuse it.
    let fused_context = if opts.method == Method::CoherenceFused {
        let bank = fusion::build_memory(
            corpus.sessions.iter().filter_map(|s| {
                let emb = s.embeddings.as_ref()?;
                let labels = s.labels.get(&opts.memory_rater)?;
                Some((emb, labels))
            }),
            &corpus.codebook,
        )?;
        let table =
            fusion::build_move_table(&corpus.codebook, &bank, opts.fusion.table_mode, opts.fusion.seed);
        rundir::write_atomic(
            &opts.out_dir.join("memory_bank.dseb"),
            &formats::write_memory_bank(&bank),
        )?;
        rundir::write_atomic(
            &opts.out_dir.join("move_table.dseb"),
            &formats::write_move_table(&table),
        )?;
        Some((bank, table))
    } else {
        None
    };

    let results: Vec<Result<Segmentation, (String, String)>> = pool.install(|| {
        use rayon::prelude::*;
        corpus
            .sessions
            .par_iter()
            .map(|session| {
                let sid = session.dialogue.session_id().to_string();
                let run = || -> Result<Segmentation, CliError> {
                    match opts.method {
                        Method::Coherence => {
                            let emb = session.embeddings.as_ref().expect("checked above");
                            Ok(coherence::segment_coherence(
                                &session.dialogue,
                                emb,
                                &opts.decode,
                            )?)
                        }
                        Method::CoherenceFused => {
                            let emb = session.embeddings.as_ref().expect("checked above");
                            let (bank, table) = fused_context.as_ref().expect("built above");
                            let fused =
                                fusion::fused_embeddings(emb, bank, table, &opts.fusion)?;
                            if fused.clamped_k {
                                eprintln!(
                                    "warning: session {sid}: k_ret {} exceeds the usable memory, clamped",
                                    opts.fusion.k_ret
                                );
                            }
                            if fused.degenerate > 0 {
                                eprintln!(
                                    "warning: session {sid}: {} fused vector(s) collapsed to zero and kept their input",
                                    fused.degenerate
                                );
                            }
                            // A zero fusion weight is exactly the unfused
                            // baseline, descriptor included, so the output
                            // files match a plain coherence run byte for byte.
                            if opts.fusion.alpha_fuse == 0.0 {
                                return Ok(coherence::segment_coherence(
                                    &session.dialogue,
                                    &fused.embeddings,
                                    &opts.decode,
                                )?);
                            }
                            let boundaries = coherence::decode(&fused.embeddings, &opts.decode)?;
                            Ok(Segmentation {
                                session_id: sid.clone(),
                                boundaries,
                                method: "coherence-fused".to_string(),
                                params_fingerprint: fingerprint(&format!(
                                    "{};{}",
                                    opts.decode.canonical(),
                                    opts.fusion.canonical()
                                )),
                            })
                        }
                        Method::LlmGeneric => {
                            Ok(client.segment(&session.dialogue, PromptMode::Generic, None)?)
                        }
                        Method::LlmDa => Ok(client.segment(
                            &session.dialogue,
                            PromptMode::DaAware,
                            Some(&corpus.codebook),
                        )?),
                    }
                };
                run().map_err(|e| (sid, e.to_string()))
            })
            .collect()
    });

    let mut session_summaries = Vec::new();
    let mut failed = 0usize;
    for result in &results {
        match result {
            Ok(seg) => {
                let path = opts
                    .out_dir
                    .join("segmentations")
                    .join(format!("{}.json", seg.session_id));
                rundir::write_atomic(&path, formats::write_segmentation(seg).as_bytes())?;
                session_summaries.push(json!({
                    "session_id": seg.session_id,
                    "ok": true,
                    "k": seg.segment_count(),
                    "method": seg.method,
                }));
            }
            Err((sid, message)) => {
                failed += 1;
                eprintln!("session {sid} failed: {message}");
                session_summaries.push(json!({
                    "session_id": sid,
                    "ok": false,
                    "error": message,
                }));
            }
        }
    }

    let audit = client.audit_records();
    if !audit.is_empty() {
        let mut lines = String::new();
        for record in &audit {
            lines.push_str(&serde_json::to_string(record).expect("audit serializes"));
            lines.push('\n');
        }
        rundir::write_atomic(&opts.out_dir.join("llm_audit.jsonl"), lines.as_bytes())?;
    }

    let resolved = json!({
        "format_version": formats::FORMAT_VERSION,
        "command": "segment",
        "method": opts.method.as_str(),
        "manifest": opts.manifest_path.display().to_string(),
        "allow_partial": opts.allow_partial,
        "decode": opts.decode.canonical(),
        "fusion": opts.fusion.canonical(),
        "memory_rater": opts.memory_rater,
        "llm": opts.llm.canonical(opts.method.as_str()),
    });
    rundir::write_run_metadata(
        &opts.out_dir,
        &resolved,
        &manifest_input_paths(&opts.manifest_path, &corpus),
    )?;
    rundir::write_json(
        &opts.out_dir.join("run_summary.json"),
        &json!({
            "format_version": formats::FORMAT_VERSION,
            "command": "segment",
            "method": opts.method.as_str(),
            "sessions": session_summaries,
            "failed": failed,
            "llm_requests": audit.len(),
        }),
    )?;

    println!(
        "segmented {}/{} session(s) with {}",
        results.len() - failed,
        results.len(),
        opts.method.as_str()
    );
    Ok(if failed == 0 || opts.allow_partial {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub struct EvaluateOptions {
    pub manifest_path: PathBuf,
    pub segmentation_dirs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Raters to evaluate; defaults to every rater in the manifest.
    pub raters: Option<Vec<String>>,
    pub eval: EvalConfig,
    pub allow_partial: bool,
}

/// The directory actually holding per-session segmentation JSONs: either the
/// given path or its `segmentations/` child when a run dir is passed.
fn segmentation_dir(path: &Path) -> PathBuf {
    let child = path.join("segmentations");
    if child.is_dir() {
        child
    } else {
        path.to_path_buf()
    }
}

fn read_segmentations(dir: &Path) -> Result<BTreeMap<String, formats::SegmentationDoc>, CliError> {
    let mut docs = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    entries.sort();
    for path in entries {
        let text = std::fs::read_to_string(&path)?;
        let doc = formats::parse_segmentation(&text).map_err(|source| CliError::FormatAt {
            path: path.clone(),
            source,
        })?;
        docs.insert(doc.session_id.clone(), doc);
    }
    Ok(docs)
}

pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<i32, CliError> {
    if opts.segmentation_dirs.is_empty() {
        return Err(usage("at least one --segmentations directory is required"));
    }
    let corpus = ingest::load_corpus(&opts.manifest_path)?;

    let rater_ids: Vec<String> = match &opts.raters {
        Some(requested) => {
            for r in requested {
                if !corpus.rater_ids.contains(r) {
                    return Err(usage(format!(
                        "rater `{r}` is not in the manifest (raters: {})",
                        corpus.rater_ids.join(", ")
                    )));
                }
            }
            requested.clone()
        }
        None => corpus.rater_ids.clone(),
    };
    if rater_ids.is_empty() {
        return Err(usage("the manifest declares no label files to evaluate against"));
    }

    struct MethodEval {
        label: String,
        segmentations: Vec<(usize, Segmentation)>, // corpus session index
    }

    let mut evals = Vec::new();
    let mut seen_labels: BTreeMap<String, usize> = BTreeMap::new();
    for dir in &opts.segmentation_dirs {
        let base = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        // Same basename twice (e.g. two run dirs named "out") still gets
        // distinct rows.
        let count = seen_labels.entry(base.clone()).or_insert(0);
        *count += 1;
        let label = if *count == 1 {
            base
        } else {
            format!("{base}#{count}")
        };
        let docs = read_segmentations(&segmentation_dir(dir))?;
        let mut segmentations = Vec::new();
        let mut missing = Vec::new();
        for (index, session) in corpus.sessions.iter().enumerate() {
            let sid = session.dialogue.session_id();
            match docs.get(sid) {
                Some(doc) => {
                    let seg = doc
                        .clone()
                        .into_segmentation(session.dialogue.len())
                        .map_err(|source| CliError::FormatAt {
                            path: dir.join(format!("{sid}.json")),
                            source,
                        })?;
                    segmentations.push((index, seg));
                }
                None => missing.push(sid.to_string()),
            }
        }
        if !missing.is_empty() && !opts.allow_partial {
            return Err(usage(format!(
                "`{label}` covers {}/{} sessions (missing: {}); pass --allow-partial to evaluate the covered subset",
                segmentations.len(),
                corpus.sessions.len(),
                missing.join(", ")
            )));
        }
        if segmentations.is_empty() {
            return Err(usage(format!("`{label}` contains no usable segmentations")));
        }
        evals.push(MethodEval {
            label,
            segmentations,
        });
    }

    let mut reports = Vec::new();
    for eval in &evals {
        let inputs: Vec<SessionEvalInput<'_>> = eval
            .segmentations
            .iter()
            .map(|(index, seg)| {
                let session = &corpus.sessions[*index];
                SessionEvalInput {
                    session_id: session.dialogue.session_id(),
                    t: session.dialogue.len(),
                    segmentation: seg,
                    raters: rater_ids
                        .iter()
                        .map(|r| session.labels.get(r).expect("rater checked against manifest"))
                        .collect(),
                }
            })
            .collect();
        let report = metrics::evaluate_corpus(&inputs, &corpus.codebook, &opts.eval)?;
        reports.push((eval.label.clone(), report));
    }

    let bundles: Vec<ReportBundle<'_>> = reports
        .iter()
        .map(|(label, report)| ReportBundle {
            label: label.clone(),
            report,
        })
        .collect();
    let markdown = report::render_markdown(&bundles);
    rundir::write_atomic(&opts.out_dir.join("report.md"), markdown.as_bytes())?;
    rundir::write_atomic(
        &opts.out_dir.join("report.csv"),
        report::render_csv(&bundles).as_bytes(),
    )?;
    rundir::write_atomic(
        &opts.out_dir.join("report.json"),
        report::render_json(&bundles).as_bytes(),
    )?;

    let mut input_paths = manifest_input_paths(&opts.manifest_path, &corpus);
    input_paths.extend(opts.segmentation_dirs.iter().cloned());
    let resolved = json!({
        "format_version": formats::FORMAT_VERSION,
        "command": "evaluate",
        "manifest": opts.manifest_path.display().to_string(),
        "raters": rater_ids,
        "unlabeled": match opts.eval.unlabeled {
            UnlabeledMode::NoneCategory => "none-category",
            UnlabeledMode::Exclude => "exclude",
        },
        "normalize_adjacent": opts.eval.normalize_adjacent,
        "bootstrap_iterations": opts.eval.bootstrap_iterations,
        "confidence_level": opts.eval.confidence_level,
        "seed": opts.eval.seed,
    });
    // Directories cannot be digested; record file inputs only.
    let file_inputs: Vec<PathBuf> = input_paths.into_iter().filter(|p| p.is_file()).collect();
    rundir::write_run_metadata(&opts.out_dir, &resolved, &file_inputs)?;
    rundir::write_json(
        &opts.out_dir.join("run_summary.json"),
        &json!({
            "format_version": formats::FORMAT_VERSION,
            "command": "evaluate",
            "methods": reports.iter().map(|(label, r)| json!({
                "method": label,
                "sessions": r.sessions.len(),
                "dropped_segments": r.dropped_segments,
            })).collect::<Vec<_>>(),
        }),
    )?;

    print!("{markdown}");
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<i32, CliError> {
    let corpus = synth::generate(spec)?;

    rundir::write_atomic(
        &out_dir.join("codebook.json"),
        formats::write_codebook(&corpus.codebook).as_bytes(),
    )?;

    let mut manifest_sessions = Vec::new();
    let mut human_rows = Vec::new();
    let mut ai_rows = Vec::new();
    for session in &corpus.sessions {
        let sid = session.dialogue.session_id().to_string();
        let transcript_rel = format!("transcripts/{sid}.jsonl");
        let embedding_rel = format!("embeddings/{sid}.bin");
        rundir::write_atomic(
            &out_dir.join(&transcript_rel),
            formats::write_transcript(&session.dialogue).as_bytes(),
        )?;
        rundir::write_atomic(
            &out_dir.join(&embedding_rel),
            &formats::write_embeddings_binary(&session.embeddings),
        )?;
        rundir::write_atomic(
            &out_dir.join("truth").join(format!("{sid}.json")),
            formats::write_segmentation(&session.truth).as_bytes(),
        )?;
        let collect = |labels: &RaterLabels, rows: &mut Vec<(String, String, String)>| {
            for (index, move_name) in labels.iter() {
                rows.push((
                    sid.clone(),
                    session.dialogue.utterances()[index].id.clone(),
                    move_name.to_string(),
                ));
            }
        };
        collect(&session.labels_human, &mut human_rows);
        collect(&session.labels_ai, &mut ai_rows);
        manifest_sessions.push(ManifestSession {
            session_id: sid,
            transcript_path: transcript_rel,
            embedding_path: Some(embedding_rel),
        });
    }

    rundir::write_atomic(
        &out_dir.join("labels/human.jsonl"),
        formats::write_labels("human", human_rows).as_bytes(),
    )?;
    rundir::write_atomic(
        &out_dir.join("labels/ai.jsonl"),
        formats::write_labels("ai", ai_rows).as_bytes(),
    )?;

    let manifest = Manifest {
        format_version: formats::FORMAT_VERSION.to_string(),
        sessions: manifest_sessions,
        label_files: vec![
            ManifestLabelFile {
                rater_id: "human".to_string(),
                path: "labels/human.jsonl".to_string(),
            },
            ManifestLabelFile {
                rater_id: "ai".to_string(),
                path: "labels/ai.jsonl".to_string(),
            },
        ],
        codebook_path: "codebook.json".to_string(),
    };
    rundir::write_atomic(
        &out_dir.join("manifest.json"),
        formats::write_manifest(&manifest).as_bytes(),
    )?;

    rundir::write_json(
        &out_dir.join("resolved_config.json"),
        &json!({
            "format_version": formats::FORMAT_VERSION,
            "command": "synth",
            "spec": spec.canonical(),
        }),
    )?;
    rundir::write_json(
        &out_dir.join("run_summary.json"),
        &json!({
            "format_version": formats::FORMAT_VERSION,
            "command": "synth",
            "sessions": corpus.sessions.len(),
            "moves": corpus.codebook.moves().len(),
            "total_utterances": corpus.sessions.iter().map(|s| s.dialogue.len()).sum::<usize>(),
        }),
    )?;

    println!(
        "wrote {} synthetic session(s) to {}",
        corpus.sessions.len(),
        out_dir.display()
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

pub struct AnnotateOptions {
    pub manifest_path: PathBuf,
    pub out_dir: PathBuf,
    pub rater_id: String,
    pub jobs: Option<usize>,
    pub allow_partial: bool,
    pub llm: LlmClientConfig,
}

pub fn cmd_annotate(opts: &AnnotateOptions) -> Result<i32, CliError> {
    let corpus = ingest::load_corpus(&opts.manifest_path)?;
    let client = LlmClient::new(opts.llm.clone());
    let pool = thread_pool(Some(
        opts.jobs
            .unwrap_or(opts.llm.concurrency)
            .min(opts.llm.concurrency)
            .max(1),
    ))?;

    let results: Vec<Result<RaterLabels, (String, String)>> = pool.install(|| {
        use rayon::prelude::*;
        corpus
            .sessions
            .par_iter()
            .map(|session| {
                client
                    .annotate(&session.dialogue, &corpus.codebook, &opts.rater_id)
                    .map_err(|e| {
                        (
                            session.dialogue.session_id().to_string(),
                            e.to_string(),
                        )
                    })
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failed = 0usize;
    let mut session_summaries = Vec::new();
    for (session, result) in corpus.sessions.iter().zip(&results) {
        let sid = session.dialogue.session_id();
        match result {
            Ok(labels) => {
                for (index, move_name) in labels.iter() {
                    rows.push((
                        sid.to_string(),
                        session.dialogue.utterances()[index].id.clone(),
                        move_name.to_string(),
                    ));
                }
                session_summaries.push(json!({
                    "session_id": sid,
                    "ok": true,
                    "labeled": labels.len(),
                }));
            }
            Err((_, message)) => {
                failed += 1;
                eprintln!("session {sid} failed: {message}");
                session_summaries.push(json!({
                    "session_id": sid,
                    "ok": false,
                    "error": message,
                }));
            }
        }
    }

    rundir::write_atomic(
        &opts.out_dir.join(format!("labels/{}.jsonl", opts.rater_id)),
        formats::write_labels(&opts.rater_id, rows).as_bytes(),
    )?;

    let audit = client.audit_records();
    let mut lines = String::new();
    for record in &audit {
        lines.push_str(&serde_json::to_string(record).expect("audit serializes"));
        lines.push('\n');
    }
    rundir::write_atomic(&opts.out_dir.join("llm_audit.jsonl"), lines.as_bytes())?;

    rundir::write_run_metadata(
        &opts.out_dir,
        &json!({
            "format_version": formats::FORMAT_VERSION,
            "command": "annotate",
            "manifest": opts.manifest_path.display().to_string(),
            "rater_id": opts.rater_id,
            "llm": opts.llm.canonical("annotate"),
        }),
        &manifest_input_paths(&opts.manifest_path, &corpus),
    )?;
    rundir::write_json(
        &opts.out_dir.join("run_summary.json"),
        &json!({
            "format_version": formats::FORMAT_VERSION,
            "command": "annotate",
            "rater_id": opts.rater_id,
            "sessions": session_summaries,
            "failed": failed,
            "llm_requests": audit.len(),
        }),
    )?;

    println!(
        "annotated {}/{} session(s) as rater `{}`",
        results.len() - failed,
        results.len(),
        opts.rater_id
    );
    Ok(if failed == 0 || opts.allow_partial {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

// ---------------------------------------------------------------------------
// mock-llm
// ---------------------------------------------------------------------------

pub fn cmd_mock_llm(rules_path: &Path, addr: &str) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(rules_path)?;
    let file: MockRulesFile =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", rules_path.display())))?;
    if file.format_version != formats::FORMAT_VERSION {
        return Err(usage(format!(
            "unsupported mock rules format_version `{}`",
            file.format_version
        )));
    }
    let server = MockLlmServer::bind(addr, file.rules)?;
    println!("mock LLM serving at {}", server.endpoint());
    server.join();
    Ok(EXIT_OK)
}
