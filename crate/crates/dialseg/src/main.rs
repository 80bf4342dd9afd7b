use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use dialseg::commands::{self, AnnotateOptions, EvaluateOptions, Method, SegmentOptions};
use dialseg::config::{self, FileConfig};
use dialseg_core::metrics::UnlabeledMode;

#[derive(Parser)]
#[command(
    name = "dialseg",
    version,
    about = "Segment multi-turn dialogues and evaluate segmentations with rater label-distribution metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus manifest and everything it references.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        /// Also write validation.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce one segmentation file per session.
    Segment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        decode: DecodeArgs,
        #[command(flatten)]
        fusion: FusionArgs,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Score segmentation directories against the corpus labels.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of per-session segmentation JSONs (repeatable).
        #[arg(long = "segmentations", required = true)]
        segmentations: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated rater ids (default: all raters in the manifest).
        #[arg(long, value_delimiter = ',')]
        raters: Option<Vec<String>>,
        /// How unlabeled utterances enter the category space.
        #[arg(long, value_parser = ["none-category", "exclude"])]
        unlabeled_mode: Option<String>,
        /// Rescale adjacent-pair weights to sum to 1.
        #[arg(long)]
        normalize_adjacent: bool,
        #[arg(long)]
        bootstrap_iterations: Option<usize>,
        #[arg(long)]
        confidence_level: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a seeded synthetic corpus with known boundaries.
    Synth {
        /// TOML config file; generation parameters come from its [synth] section.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Label every utterance with a chat-completion model.
    Annotate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rater id recorded in the produced label file.
        #[arg(long, default_value = "ai")]
        rater: String,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Serve canned chat completions for offline testing.
    MockLlm {
        /// JSON rules file: {"format_version":"1","rules":[{"match_substring":"...","responses":["..."]}]}.
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value = "127.0.0.1:3928")]
        addr: String,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for session-level parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Keep going when individual sessions fail.
    #[arg(long)]
    allow_partial: bool,
    /// Root seed for anything stochastic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    pick_num: Option<usize>,
    #[arg(long)]
    avg_seg_len: Option<usize>,
    #[arg(long)]
    min_gap: Option<usize>,
    /// Moving-average half-width over the similarity profile (off by default).
    #[arg(long)]
    smoothing: Option<usize>,
}

#[derive(Args)]
struct FusionArgs {
    #[arg(long)]
    k_ret: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha_fuse: Option<f64>,
    /// Keep a query utterance's own memory entry in its retrieval set.
    #[arg(long)]
    no_exclude_self: bool,
    #[arg(long, value_parser = ["centroid", "random"])]
    table_mode: Option<String>,
    /// Rater whose labels build the memory bank (default: human).
    #[arg(long)]
    memory_rater: Option<String>,
}

#[derive(Args)]
struct LlmArgs {
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Accept only bare-object completions (no fences or prose).
    #[arg(long)]
    strict_parse: bool,
    /// Show speaker tags in the prompt turn listing.
    #[arg(long)]
    include_speakers: bool,
}

fn apply_decode_args(file: &FileConfig, args: &DecodeArgs) -> dialseg_core::coherence::DecodeParams {
    let mut params = file.decode_params();
    if let Some(v) = args.window_size {
        params.window_size = v;
    }
    if let Some(v) = args.alpha {
        params.alpha = v;
    }
    if let Some(v) = args.pick_num {
        params.pick_num = Some(v);
    }
    if let Some(v) = args.avg_seg_len {
        params.avg_seg_len = Some(v);
    }
    if let Some(v) = args.min_gap {
        params.min_gap = v;
    }
    if let Some(v) = args.smoothing {
        params.smoothing = Some(v);
    }
    params
}

fn apply_fusion_args(
    file: &FileConfig,
    args: &FusionArgs,
    seed: Option<u64>,
) -> Result<dialseg_core::fusion::FusionParams, config::ConfigError> {
    let mut params = file.fusion_params()?;
    if let Some(v) = args.k_ret {
        params.k_ret = v;
    }
    if let Some(v) = args.tau {
        params.tau = v;
    }
    if let Some(v) = args.alpha_fuse {
        params.alpha_fuse = v;
    }
    if args.no_exclude_self {
        params.exclude_self = false;
    }
    if let Some(mode) = &args.table_mode {
        params.table_mode = match mode.as_str() {
            "random" => dialseg_core::fusion::TableMode::Random,
            _ => dialseg_core::fusion::TableMode::Centroid,
        };
    }
    if let Some(seed) = seed {
        params.seed = seed;
    }
    Ok(params)
}

fn apply_llm_args(file: &FileConfig, args: &LlmArgs) -> dialseg::llm::LlmClientConfig {
    let mut cfg = file.llm_config();
    if let Some(v) = &args.endpoint {
        cfg.endpoint = v.clone();
    }
    if let Some(v) = &args.model {
        cfg.model = v.clone();
    }
    if let Some(v) = args.max_retries {
        cfg.max_retries = v;
    }
    if let Some(v) = args.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = args.max_tokens {
        cfg.max_tokens = v;
    }
    if let Some(v) = args.timeout_secs {
        cfg.timeout = Duration::from_secs(v);
    }
    if args.strict_parse {
        cfg.strict_parse = true;
    }
    if args.include_speakers {
        cfg.include_speakers = true;
    }
    cfg
}

fn run() -> Result<i32, Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Validate { manifest, out } => {
            Ok(commands::cmd_validate(&manifest, out.as_deref())?)
        }
        Command::Segment {
            manifest,
            method,
            out,
            common,
            decode,
            fusion,
            llm,
        } => {
            let file = config::load_file_config(common.config.as_deref())?;
            let opts = SegmentOptions {
                manifest_path: manifest,
                method,
                out_dir: out,
                jobs: common.jobs.or(file.jobs),
                allow_partial: common.allow_partial,
                decode: apply_decode_args(&file, &decode),
                fusion: apply_fusion_args(&file, &fusion, common.seed)?,
                memory_rater: fusion
                    .memory_rater
                    .clone()
                    .or_else(|| file.fusion.memory_rater.clone())
                    .unwrap_or_else(|| "human".to_string()),
                llm: apply_llm_args(&file, &llm),
            };
            Ok(commands::cmd_segment(&opts)?)
        }
        Command::Evaluate {
            manifest,
            segmentations,
            out,
            raters,
            unlabeled_mode,
            normalize_adjacent,
            bootstrap_iterations,
            confidence_level,
            common,
        } => {
            let file = config::load_file_config(common.config.as_deref())?;
            let mut eval = file.eval_config()?;
            if let Some(mode) = unlabeled_mode.as_deref() {
                eval.unlabeled = if mode == "exclude" {
                    UnlabeledMode::Exclude
                } else {
                    UnlabeledMode::NoneCategory
                };
            }
            if normalize_adjacent {
                eval.normalize_adjacent = true;
            }
            if let Some(v) = bootstrap_iterations {
                eval.bootstrap_iterations = v;
            }
            if let Some(v) = confidence_level {
                eval.confidence_level = v;
            }
            if let Some(v) = common.seed {
                eval.seed = v;
            }
            let opts = EvaluateOptions {
                manifest_path: manifest,
                segmentation_dirs: segmentations,
                out_dir: out,
                raters,
                eval,
                allow_partial: common.allow_partial,
            };
            Ok(commands::cmd_evaluate(&opts)?)
        }
        Command::Synth {
            spec,
            out,
            sessions,
            seed,
        } => {
            let file = config::load_file_config(spec.as_deref())?;
            let mut synth_spec = file.synth_spec();
            if let Some(v) = sessions {
                synth_spec.sessions = v;
            }
            if let Some(v) = seed {
                synth_spec.seed = v;
            }
            Ok(commands::cmd_synth(&synth_spec, &out)?)
        }
        Command::Annotate {
            manifest,
            out,
            rater,
            common,
            llm,
        } => {
            let file = config::load_file_config(common.config.as_deref())?;
            let opts = AnnotateOptions {
                manifest_path: manifest,
                out_dir: out,
                rater_id: rater,
                jobs: common.jobs.or(file.jobs),
                allow_partial: common.allow_partial,
                llm: apply_llm_args(&file, &llm),
            };
            Ok(commands::cmd_annotate(&opts)?)
        }
        Command::MockLlm { rules, addr } => Ok(commands::cmd_mock_llm(&rules, &addr)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::EXIT_ERROR as u8)
        }
    }
}
