//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p dialseg --test acceptance -- --nocapture` to see
//! the per-criterion lines.

mod oracle;

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dialseg::commands::{self, EvaluateOptions, Method, SegmentOptions};
use dialseg::formats;
use dialseg::llm::mock::{MockLlmServer, MockRule};
use dialseg::llm::{parse_boundary_response, LlmClientConfig};

use dialseg_core::boundary::{BoundarySet, Segmentation};
use dialseg_core::coherence::{decode, depth_scores, select_boundaries, DecodeParams};
use dialseg_core::embedding::EmbeddingSequence;
use dialseg_core::fusion::{
    attention_weights, build_move_table, fused_embeddings, BankEntry, FusionParams, MemoryBank,
    TableMode,
};
use dialseg_core::metrics::{
    self, adjacent_js, boundary_change_rate, human_ai_js, normalized_entropy, purity,
    segment_distribution, weighted_entropy, weighted_purity, EvalConfig, SegmentDistribution,
    SessionEvalInput,
};
use dialseg_core::seeding::{rng_for, subseed};
use dialseg_core::stats::bootstrap_ci;
use dialseg_core::synth::{generate, SynthSpec};
use dialseg_core::types::{Codebook, Move, RaterLabels};

fn codebook(moves: usize, none_enabled: bool) -> Codebook {
    Codebook::new(
        "acceptance".to_string(),
        (0..moves)
            .map(|i| Move {
                name: format!("m{i}"),
                definition: String::new(),
                examples: vec![],
            })
            .collect(),
        none_enabled,
    )
    .unwrap()
}

fn labels_from_raw(rater: &str, raw: &[Option<usize>]) -> RaterLabels {
    RaterLabels::from_entries(
        rater.to_string(),
        raw.iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|c| (i, format!("m{c}")))),
    )
}

fn segmentation(indices: Vec<usize>, t: usize) -> Segmentation {
    Segmentation {
        session_id: "acc".to_string(),
        boundaries: BoundarySet::new(indices, t).unwrap(),
        method: "acceptance".to_string(),
        params_fingerprint: "0".to_string(),
    }
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

/// Criterion 1: on 1,000 random small dialogues, every metric matches the
/// brute-force reference within 1e-9, in under 10 seconds.
#[test]
fn acceptance_01_metric_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x01);
    for case in 0..1000u32 {
        let t = rng.random_range(1..=8usize);
        let moves = rng.random_range(2..=3usize);
        let none_enabled = case % 2 == 0;
        let c = oracle::category_count(moves, none_enabled);

        let max_b = (t - 1).min(3);
        let n_b = rng.random_range(0..=max_b);
        let mut boundary_pool: Vec<usize> = (0..t.saturating_sub(1)).collect();
        let mut boundaries = Vec::new();
        for _ in 0..n_b {
            let pick = rng.random_range(0..boundary_pool.len());
            boundaries.push(boundary_pool.swap_remove(pick));
        }
        boundaries.sort_unstable();

        let draw = |rng: &mut ChaCha8Rng| -> Vec<Option<usize>> {
            (0..t)
                .map(|_| {
                    if rng.random_bool(0.25) {
                        None
                    } else {
                        Some(rng.random_range(0..moves))
                    }
                })
                .collect()
        };
        let raw_h = draw(&mut rng);
        let raw_a = draw(&mut rng);

        let cb = codebook(moves, none_enabled);
        let lh = labels_from_raw("human", &raw_h);
        let la = labels_from_raw("ai", &raw_a);
        let seg = segmentation(boundaries.clone(), t);

        let cats_h = oracle::resolve(&raw_h, moves, none_enabled);
        let cats_a = oracle::resolve(&raw_a, moves, none_enabled);
        let segs_h = oracle::split(&cats_h, &boundaries);
        let segs_a = oracle::split(&cats_a, &boundaries);

        // Per-segment distributions.
        for (range, cats) in seg
            .boundaries
            .induce_segments(t)
            .unwrap()
            .into_iter()
            .zip(&segs_h)
        {
            let expected = oracle::distribution(cats, c);
            match segment_distribution(range, &lh, &cb) {
                Ok(dist) => {
                    let expected = expected.expect("oracle agrees distribution is defined");
                    for (x, y) in dist.probs().iter().zip(&expected) {
                        assert!((x - y).abs() <= 1e-9, "case {case}: distribution mismatch");
                    }
                }
                Err(metrics::MetricError::UndefinedDistribution) => {
                    assert!(expected.is_none(), "case {case}: undefined disagreement");
                }
                Err(e) => panic!("case {case}: {e}"),
            }
        }

        let got = weighted_entropy(&seg, t, &lh, &cb).unwrap();
        assert!(
            close(got.value, oracle::weighted_entropy(&segs_h, c), 1e-9),
            "case {case}: weighted entropy {:?} vs {:?}",
            got.value,
            oracle::weighted_entropy(&segs_h, c)
        );

        let got = weighted_purity(&seg, t, &lh, &cb).unwrap();
        assert!(
            close(got.value, oracle::weighted_purity(&segs_h, c), 1e-9),
            "case {case}: weighted purity"
        );

        for normalize in [false, true] {
            let got = adjacent_js(&seg, t, &lh, &cb, normalize).unwrap();
            assert!(
                close(got.value, oracle::adjacent_js(&segs_h, c, t, normalize), 1e-9),
                "case {case}: adjacent js (normalize={normalize})"
            );
        }

        let got = boundary_change_rate(&seg, t, &lh, &cb).unwrap();
        assert!(
            close(got.value, oracle::bcr(&cats_h, &boundaries), 1e-9),
            "case {case}: bcr"
        );

        let got = human_ai_js(&seg, t, &lh, &la, &cb).unwrap();
        assert!(
            close(got.value, oracle::rater_js(&segs_h, &segs_a, c), 1e-9),
            "case {case}: rater js"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "oracle sweep took {elapsed:?}"
    );
    println!("PASS criterion 1: 1000-dialogue metric oracle equivalence within 1e-9 ({elapsed:?})");
}

/// Criterion 2: analytic identities hold exactly (or within 1e-12 where
/// stated).
#[test]
fn acceptance_02_analytic_identities() {
    for c in [2usize, 4, 8] {
        let uniform = SegmentDistribution::new(vec![1.0 / c as f64; c]).unwrap();
        assert_eq!(
            normalized_entropy(&uniform).unwrap(),
            1.0,
            "uniform entropy at C={c}"
        );
    }
    for c in [2usize, 3, 4, 5, 8] {
        let mut probs = vec![0.0; c];
        probs[0] = 1.0;
        let point = SegmentDistribution::new(probs).unwrap();
        assert_eq!(normalized_entropy(&point).unwrap(), 0.0, "point mass at C={c}");

        let uniform = SegmentDistribution::new(vec![1.0 / c as f64; c]).unwrap();
        assert_eq!(purity(&uniform), 1.0 / c as f64, "uniform purity at C={c}");
        // Off-binary-grid category counts still satisfy the identity to 1e-12.
        assert!((normalized_entropy(&uniform).unwrap() - 1.0).abs() <= 1e-12);
    }

    let p = SegmentDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
    assert!(metrics::js_divergence(&p, &p).unwrap().abs() <= 1e-12);
    let a = SegmentDistribution::new(vec![1.0, 0.0]).unwrap();
    let b = SegmentDistribution::new(vec![0.0, 1.0]).unwrap();
    assert!((metrics::js_divergence(&a, &b).unwrap() - 1.0).abs() <= 1e-12);

    println!("PASS criterion 2: analytic identities (uniform/point entropy, JS identity/disjoint, uniform purity)");
}

/// Criterion 3: a clean synthetic corpus evaluated on its true segmentations
/// hits the metric identities exactly at corpus level.
#[test]
fn acceptance_03_oracle_corpus_identities() {
    let spec = SynthSpec {
        sessions: 50,
        rater_noise: 0.0,
        unlabeled_rate: 0.0,
        seed: 3,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    let inputs: Vec<SessionEvalInput<'_>> = corpus
        .sessions
        .iter()
        .map(|s| SessionEvalInput {
            session_id: s.dialogue.session_id(),
            t: s.dialogue.len(),
            segmentation: &s.truth,
            raters: vec![&s.labels_human, &s.labels_ai],
        })
        .collect();
    let config = EvalConfig {
        bootstrap_iterations: 1000,
        ..EvalConfig::default()
    };
    let report = metrics::evaluate_corpus(&inputs, &corpus.codebook, &config).unwrap();

    assert_eq!(report.sessions.len(), 50);
    assert_eq!(report.entropy.mean, Some(0.0), "weighted entropy");
    assert_eq!(report.purity.mean, Some(1.0), "weighted purity");
    assert_eq!(report.human_ai_js.mean, Some(0.0), "rater divergence");
    assert_eq!(report.bcr.mean, Some(1.0), "boundary change rate");
    let ci = report.purity.ci.unwrap();
    assert_eq!((ci.lo, ci.hi), (1.0, 1.0));

    println!("PASS criterion 3: 50-session oracle corpus gives entropy 0, purity 1, rater JS 0, BCR 1 exactly");
}

/// Criterion 4: the decoder recovers planted boundaries at separation 0.7
/// with the default hyperparameters, micro-F1 >= 0.95, in under 5 seconds.
#[test]
fn acceptance_04_coherence_recovery() {
    let start = Instant::now();
    let spec = SynthSpec {
        sessions: 100,
        separation: 0.7,
        t_range: (16, 32),
        k_range: (2, 4),
        min_seg_len: 4,
        rater_noise: 0.0,
        unlabeled_rate: 0.0,
        seed: 4,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    let params = DecodeParams::default(); // window 2, alpha 0.5, pick_num 4, min_gap 3

    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for s in &corpus.sessions {
        let predicted = decode(&s.embeddings, &params).unwrap();
        let truth: std::collections::BTreeSet<usize> =
            s.truth.boundaries.indices().iter().copied().collect();
        let predicted: std::collections::BTreeSet<usize> =
            predicted.indices().iter().copied().collect();
        tp += predicted.intersection(&truth).count();
        fp += predicted.difference(&truth).count();
        fn_ += truth.difference(&predicted).count();
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    let elapsed = start.elapsed();
    assert!(
        f1 >= 0.95,
        "boundary F1 {f1:.4} (precision {precision:.4}, recall {recall:.4})"
    );
    assert!(elapsed < Duration::from_secs(5), "recovery took {elapsed:?}");
    println!(
        "PASS criterion 4: boundary recovery F1 {f1:.4} over 100 sessions ({elapsed:?})"
    );
}

/// Criterion 5: decoder properties over 10^4 random depth profiles.
#[test]
fn acceptance_05_decoder_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05);
    for case in 0..10_000u32 {
        let n = rng.random_range(1..=49usize);
        let t = n + 1;
        let depths: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let min_gap = rng.random_range(1..=5usize);
        let pick_num = rng.random_range(1..=5usize);
        let alpha = rng.random_range(0.0..1.5);
        let params = DecodeParams {
            min_gap,
            pick_num: Some(pick_num),
            alpha,
            ..DecodeParams::default()
        };
        let selected = select_boundaries(&depths, &params, t).unwrap();

        assert!(selected.len() <= pick_num, "case {case}: cap violated");
        for pair in selected.indices().windows(2) {
            assert!(pair[1] - pair[0] >= min_gap, "case {case}: gap violated");
        }

        let stricter = DecodeParams {
            alpha: alpha + rng.random_range(0.0..1.0),
            ..params.clone()
        };
        let fewer = select_boundaries(&depths, &stricter, t).unwrap();
        assert!(
            fewer.len() <= selected.len(),
            "case {case}: raising alpha added boundaries"
        );
    }

    // Constant profiles (including constant similarity profiles) never split.
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    for _ in 0..100 {
        let n = rng.random_range(1..=30usize);
        let value = rng.random_range(-1.0..1.0);
        let depths = depth_scores(&vec![value; n], 2);
        let selected = select_boundaries(&depths, &DecodeParams::default(), n + 1).unwrap();
        assert!(selected.is_empty(), "constant profile produced boundaries");
    }

    println!("PASS criterion 5: spacing, cap, alpha-monotonicity, and flat-profile properties on 10^4 profiles");
}

/// Criterion 6: fusion recovers the baseline at alpha 0, matches the
/// brute-force reference on small problems within 1e-12, and its attention
/// weights always normalize.
#[test]
fn acceptance_06_fusion_correctness() {
    // Baseline recovery across a synthetic corpus, bit for bit.
    let spec = SynthSpec {
        sessions: 20,
        unlabeled_rate: 0.3,
        seed: 6,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    let bank = dialseg_core::fusion::build_memory(
        corpus
            .sessions
            .iter()
            .map(|s| (&s.embeddings, &s.labels_human)),
        &corpus.codebook,
    )
    .unwrap();
    let table = build_move_table(&corpus.codebook, &bank, TableMode::Centroid, 0);
    let zero_alpha = FusionParams {
        alpha_fuse: 0.0,
        ..FusionParams::default()
    };
    let decode_params = DecodeParams::default();
    for s in &corpus.sessions {
        let fused = fused_embeddings(&s.embeddings, &bank, &table, &zero_alpha).unwrap();
        assert_eq!(fused.embeddings, s.embeddings, "alpha 0 changed embeddings");
        assert_eq!(
            decode(&fused.embeddings, &decode_params).unwrap(),
            decode(&s.embeddings, &decode_params).unwrap(),
            "alpha 0 changed boundaries"
        );
    }

    // Brute-force equivalence on small problems.
    let mut rng = ChaCha8Rng::seed_from_u64(0x06);
    for case in 0..300u32 {
        let d = rng.random_range(2..=4usize);
        let n = rng.random_range(1..=6usize);
        let k_ret = rng.random_range(1..=3usize);
        let moves = rng.random_range(1..=3usize);
        let tau = rng.random_range(0.05..2.0);
        let alpha = [0.0, 0.5, 1.5][rng.random_range(0..3)];

        let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            loop {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-3 {
                    return v.iter().map(|x| x / norm).collect();
                }
            }
        };

        let entries: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|_| (unit(&mut rng), rng.random_range(0..moves)))
            .collect();
        let bank = MemoryBank::from_entries(
            d,
            entries
                .iter()
                .enumerate()
                .map(|(i, (v, m))| BankEntry {
                    embedding: v.clone(),
                    move_name: format!("m{m}"),
                    session_id: "bank".to_string(),
                    utterance_index: i,
                })
                .collect(),
        )
        .unwrap();
        let cb = codebook(moves, true);
        let table = build_move_table(&cb, &bank, TableMode::Random, case as u64);
        let table_rows: Vec<Vec<f64>> = table.rows().to_vec();

        let queries: Vec<Vec<f64>> = (0..3).map(|_| unit(&mut rng)).collect();
        let emb = EmbeddingSequence::new("query".to_string(), d, queries.clone()).unwrap();
        let params = FusionParams {
            k_ret,
            tau,
            alpha_fuse: alpha,
            exclude_self: false,
            table_mode: TableMode::Random,
            seed: case as u64,
        };
        let fused = fused_embeddings(&emb, &bank, &table, &params).unwrap();
        for (i, _) in queries.iter().enumerate() {
            let expected = oracle::fuse_reference(
                emb.vector(i),
                &entries,
                &table_rows,
                k_ret,
                tau,
                alpha,
            );
            for (x, y) in fused.embeddings.vector(i).iter().zip(&expected) {
                assert!(
                    (x - y).abs() <= 1e-12,
                    "case {case}: fused vector off by {}",
                    (x - y).abs()
                );
            }
        }
    }

    // Attention weights normalize on 10^4 random inputs.
    let mut rng = ChaCha8Rng::seed_from_u64(0x66);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=12usize);
        let sims: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tau = rng.random_range(0.01..10.0);
        let w = attention_weights(&sims, tau).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(w.iter().all(|x| *x >= 0.0));
    }

    println!("PASS criterion 6: alpha-0 baseline recovery, small-problem reference equivalence within 1e-12, attention normalization");
}

/// Criterion 7: the boundary-response parser is total over arbitrary input
/// and parses the three documented response shapes.
#[test]
fn acceptance_07_parser_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x07);
    let interesting = br#"{}[](),:"0123456789boundary_indices null.-+eE \n"#;
    for case in 0..100_000u32 {
        let t = rng.random_range(1..=40usize);
        let len = rng.random_range(0..=160usize);
        let text: String = match case % 3 {
            // Arbitrary bytes, lossily decoded.
            0 => {
                let bytes: Vec<u8> = (0..len).map(|_| rng.random_range(0..=255u8)).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            // Structure-heavy ASCII soup.
            1 => (0..len)
                .map(|_| interesting[rng.random_range(0..interesting.len())] as char)
                .collect(),
            // Mutated near-valid payloads, including extreme integers.
            _ => {
                let extreme = [i64::MIN, -1, 0, i64::MAX];
                let entry = |rng: &mut ChaCha8Rng| -> i64 {
                    if rng.random_bool(0.2) {
                        extreme[rng.random_range(0..extreme.len())]
                    } else {
                        rng.random_range(-5..50)
                    }
                };
                let mut s = format!(
                    "{{\"boundary_indices\":[{},{}]}}",
                    entry(&mut rng),
                    entry(&mut rng)
                );
                if rng.random_bool(0.5) {
                    let cut = rng.random_range(0..=s.len());
                    s.truncate(cut);
                }
                s
            }
        };
        let strict = case % 5 == 0;
        if let Ok(boundaries) = parse_boundary_response(&text, t, strict) {
            // Whatever comes back must satisfy the boundary invariants.
            boundaries.induce_segments(t).expect("valid boundary set");
        }
    }

    let valid = parse_boundary_response(r#"{"boundary_indices":[3,7,12]}"#, 13, false).unwrap();
    assert_eq!(valid.indices(), &[3, 7]);
    let fenced =
        parse_boundary_response("```json\n{\"boundary_indices\":[4]}\n```", 5, false).unwrap();
    assert!(fenced.is_empty());
    let prose = parse_boundary_response(
        "Here are the segments: {\"boundary_indices\": [2, 9]} as requested.",
        10,
        false,
    )
    .unwrap();
    assert_eq!(prose.indices(), &[2]);

    println!("PASS criterion 7: 10^5-input parser fuzz with zero panics and the three documented response shapes");
}

fn is_mean_ci(cell: &str) -> bool {
    regex::Regex::new(r"^\d+\.\d{3} \[\d+\.\d{2}, \d+\.\d{2}\]$")
        .unwrap()
        .is_match(cell.trim())
}

/// Criterion 8: segment -> evaluate against the bundled mock server, with one
/// session exercising the retry path, ends in a correctly rounded report.
#[test]
fn acceptance_08_mock_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    let spec = SynthSpec {
        sessions: 10,
        seed: 808,
        ..SynthSpec::default()
    };
    assert_eq!(commands::cmd_synth(&spec, &corpus_dir).unwrap(), 0);

    // synth-003 fails twice before answering; everyone else answers at once.
    let server = MockLlmServer::start(vec![
        MockRule {
            match_substring: "in synth-003".to_string(),
            responses: vec![
                "I cannot comply.".to_string(),
                "{\"oops\": true}".to_string(),
                r#"{"boundary_indices":[4,9]}"#.to_string(),
            ],
        },
        MockRule {
            match_substring: String::new(),
            responses: vec![r#"{"boundary_indices":[2,6,11]}"#.to_string()],
        },
    ])
    .unwrap();

    let seg_dir = dir.path().join("llm-generic");
    let manifest = corpus_dir.join("manifest.json");
    let opts = SegmentOptions {
        manifest_path: manifest.clone(),
        method: Method::LlmGeneric,
        out_dir: seg_dir.clone(),
        jobs: Some(2),
        allow_partial: false,
        decode: DecodeParams::default(),
        fusion: FusionParams::default(),
        memory_rater: "human".to_string(),
        llm: LlmClientConfig {
            endpoint: server.endpoint().to_string(),
            max_retries: 3,
            ..LlmClientConfig::default()
        },
    };
    assert_eq!(commands::cmd_segment(&opts).unwrap(), 0, "segment exit code");

    // The retried session succeeded on its third attempt with its own payload.
    let retried = std::fs::read_to_string(
        seg_dir.join("segmentations").join("synth-003.json"),
    )
    .unwrap();
    let doc = formats::parse_segmentation(&retried).unwrap();
    assert_eq!(doc.boundary_indices, vec![4, 9]);
    assert!(doc.method.contains("attempts=3"), "{}", doc.method);

    let audit = std::fs::read_to_string(seg_dir.join("llm_audit.jsonl")).unwrap();
    let retried_lines: Vec<&str> = audit
        .lines()
        .filter(|l| l.contains("synth-003"))
        .collect();
    assert_eq!(retried_lines.len(), 3, "retry attempts in the audit log");
    assert!(retried_lines[2].contains("\"outcome\":\"ok\""));

    let eval_dir = dir.path().join("eval");
    let eval_opts = EvaluateOptions {
        manifest_path: manifest,
        segmentation_dirs: vec![seg_dir],
        out_dir: eval_dir.clone(),
        raters: None,
        eval: EvalConfig {
            bootstrap_iterations: 1000,
            ..EvalConfig::default()
        },
        allow_partial: false,
    };
    assert_eq!(commands::cmd_evaluate(&eval_opts).unwrap(), 0, "evaluate exit code");

    let report = std::fs::read_to_string(eval_dir.join("report.md")).unwrap();
    for group in ["Granularity", "Consistency", "Distinctiveness", "Rater Agreement"] {
        assert!(report.contains(group), "missing column group {group}");
    }
    let data_row = report
        .lines()
        .find(|l| l.starts_with("| llm-generic |"))
        .expect("data row present");
    let cells: Vec<&str> = data_row.split('|').map(str::trim).collect();
    // cells: ["", method, granularity, entropy, purity, adj, bcr, ha, ""]
    let granularity = cells[2];
    assert!(
        regex::Regex::new(r"^\d+\.\d{2} \(\d+\.\d{2}\)$")
            .unwrap()
            .is_match(granularity),
        "granularity cell `{granularity}`"
    );
    for cell in &cells[3..8] {
        assert!(is_mean_ci(cell), "metric cell `{cell}` not mean [lo, hi]");
    }
    assert!(eval_dir.join("report.csv").is_file());
    assert!(eval_dir.join("report.json").is_file());

    println!("PASS criterion 8: mock-backed segment+evaluate pipeline with retries and rounded report");
}

/// Criterion 9: bootstrap intervals are seed-deterministic and cover the true
/// mean in at least 93 of 100 seeded replications.
#[test]
fn acceptance_09_bootstrap_determinism_and_coverage() {
    let values: Vec<f64> = (0..60).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
    let a = bootstrap_ci(&values, 0.95, 2000, 42).unwrap();
    let b = bootstrap_ci(&values, 0.95, 2000, 42).unwrap();
    assert_eq!(a, b, "same seed, same interval");

    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.5, 0.1).unwrap();
    let mut covered = 0;
    for replication in 0..100u64 {
        let mut rng = rng_for(0x09, replication);
        let sample: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
        let ci = bootstrap_ci(&sample, 0.95, 1000, subseed(0x99, replication)).unwrap();
        if ci.lo <= 0.5 && 0.5 <= ci.hi {
            covered += 1;
        }
    }
    assert!(covered >= 93, "coverage {covered}/100");

    println!("PASS criterion 9: deterministic intervals; coverage {covered}/100 replications");
}

/// Criterion 10: every container format survives write -> read -> write with a
/// byte-identical second write.
#[test]
fn acceptance_10_ingestion_round_trips() {
    let spec = SynthSpec {
        sessions: 4,
        unlabeled_rate: 0.2,
        rater_noise: 0.3,
        seed: 10,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();

    for session in &corpus.sessions {
        let t1 = formats::write_transcript(&session.dialogue);
        let parsed = formats::parse_transcript(&t1).unwrap();
        assert_eq!(formats::write_transcript(&parsed), t1, "transcript");

        let b1 = formats::write_embeddings_binary(&session.embeddings);
        let parsed = formats::read_embeddings(&b1).unwrap();
        assert_eq!(formats::write_embeddings_binary(&parsed), b1, "embeddings (binary)");

        let j1 = formats::write_embeddings_json(&session.embeddings);
        let parsed = formats::read_embeddings(j1.as_bytes()).unwrap();
        assert_eq!(formats::write_embeddings_json(&parsed), j1, "embeddings (json)");

        let s1 = formats::write_segmentation(&session.truth);
        let parsed = formats::parse_segmentation(&s1)
            .unwrap()
            .into_segmentation(session.dialogue.len())
            .unwrap();
        assert_eq!(formats::write_segmentation(&parsed), s1, "segmentation");
    }

    let rows: Vec<(String, String, String)> = corpus
        .sessions
        .iter()
        .flat_map(|s| {
            let sid = s.dialogue.session_id().to_string();
            s.labels_human
                .iter()
                .map(|(i, m)| {
                    (
                        sid.clone(),
                        s.dialogue.utterances()[i].id.clone(),
                        m.to_string(),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let l1 = formats::write_labels("human", rows);
    let parsed = formats::parse_label_file(&l1).unwrap();
    let l2 = formats::write_labels(
        &parsed.rater_id,
        parsed
            .rows
            .iter()
            .map(|r| (r.session_id.clone(), r.utterance_id.clone(), r.move_name.clone())),
    );
    assert_eq!(l2, l1, "labels");

    let c1 = formats::write_codebook(&corpus.codebook);
    let parsed = formats::parse_codebook(&c1).unwrap();
    assert_eq!(formats::write_codebook(&parsed), c1, "codebook");

    println!("PASS criterion 10: byte-identical round trips for transcripts, labels, codebooks, embeddings, segmentations");
}
