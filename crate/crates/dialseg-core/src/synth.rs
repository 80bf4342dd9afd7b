//! Seeded synthetic corpora with known segment structure.
//!
//! Generated sessions carry planted boundaries, one dominant move per segment
//! (adjacent segments always differ), two rater label sets with controllable
//! disagreement and label sparsity, and cluster-structured unit embeddings
//! whose adjacent-cluster cosine respects a separation margin. Everything is a
//! pure function of the spec, so the same seed reproduces the same corpus
//! bit for bit.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::boundary::{BoundarySet, Segmentation};
use crate::embedding::{dot, normalized, EmbeddingSequence};
use crate::fingerprint;
use crate::seeding::subseed;
use crate::types::{Codebook, Dialogue, Move, RaterLabels, Utterance};

/// Spread of utterance vectors around their segment centroid, before
/// renormalization.
const JITTER: f64 = 0.1;
const MAX_CENTROID_REJECTIONS: usize = 100;
const MAX_EMBEDDING_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub sessions: usize,
    /// Inclusive range of dialogue lengths.
    pub t_range: (usize, usize),
    /// Inclusive range of planted segment counts.
    pub k_range: (usize, usize),
    /// Number of distinct moves in the codebook.
    pub moves: usize,
    /// Embedding dimension.
    pub dim: usize,
    /// Adjacent-centroid cosine margin: adjacent centroids satisfy
    /// `cos <= 1 - separation`.
    pub separation: f64,
    /// Per-utterance probability that the second rater flips a label.
    pub rater_noise: f64,
    /// Per-utterance probability that an utterance stays unlabeled.
    pub unlabeled_rate: f64,
    /// Minimum planted segment length.
    pub min_seg_len: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sessions: 10,
            t_range: (16, 32),
            k_range: (2, 4),
            moves: 4,
            dim: 16,
            separation: 0.7,
            rater_noise: 0.0,
            unlabeled_rate: 0.0,
            min_seg_len: 4,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn canonical(&self) -> String {
        format!(
            "synth;sessions={};t={:?};k={:?};moves={};dim={};sep={:?};noise={:?};unlabeled={:?};minlen={};seed={}",
            self.sessions, self.t_range, self.k_range, self.moves, self.dim, self.separation,
            self.rater_noise, self.unlabeled_rate, self.min_seg_len, self.seed,
        )
    }

    fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::Infeasible(msg));
        if self.sessions == 0 {
            return fail("sessions must be >= 1".into());
        }
        if self.t_range.0 == 0 || self.t_range.0 > self.t_range.1 {
            return fail(format!("invalid T range {:?}", self.t_range));
        }
        if self.k_range.0 == 0 || self.k_range.0 > self.k_range.1 {
            return fail(format!("invalid K range {:?}", self.k_range));
        }
        if self.k_range.1 > self.t_range.0 {
            return fail(format!(
                "K range {:?} exceeds the smallest dialogue length {}",
                self.k_range, self.t_range.0
            ));
        }
        if self.min_seg_len == 0 {
            return fail("min_seg_len must be >= 1".into());
        }
        if self.k_range.1 * self.min_seg_len > self.t_range.0 {
            return fail(format!(
                "{} segments of at least {} utterances cannot fit in {} utterances",
                self.k_range.1, self.min_seg_len, self.t_range.0
            ));
        }
        if self.moves == 0 {
            return fail("a codebook needs at least one move".into());
        }
        if self.moves == 1 && self.k_range.1 >= 2 {
            return fail(
                "adjacent segments must carry distinct moves, impossible with a single move"
                    .into(),
            );
        }
        if self.moves == 1 && self.rater_noise > 0.0 {
            return fail("label flips need at least two moves".into());
        }
        if self.dim < 2 {
            return fail("embedding dimension must be >= 2".into());
        }
        for (name, p) in [
            ("separation", self.separation),
            ("rater_noise", self.rater_noise),
            ("unlabeled_rate", self.unlabeled_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error("session {session}: could not draw centroids at separation {separation} after {MAX_CENTROID_REJECTIONS} rejections")]
    CentroidSeparation { session: usize, separation: f64 },
    #[error("session {session}: cluster margin check kept failing after {MAX_EMBEDDING_ATTEMPTS} attempts")]
    ClusterCheckFailed { session: usize },
}

/// One generated session with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub dialogue: Dialogue,
    pub truth: Segmentation,
    pub labels_human: RaterLabels,
    pub labels_ai: RaterLabels,
    pub embeddings: EmbeddingSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub codebook: Codebook,
    pub sessions: Vec<SynthSession>,
}

fn synth_codebook(moves: usize) -> Codebook {
    let moves = (0..moves)
        .map(|i| Move {
            name: format!("move_{i:02}"),
            definition: format!("Synthetic construct {i} planted per segment."),
            examples: vec![format!("Example utterance carrying move_{i:02}.")],
        })
        .collect();
    Codebook::new("synthetic".to_string(), moves, true).expect("non-empty move list")
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

/// Draw K centroids whose adjacent cosines stay at or below `1 - separation`.
fn draw_centroids(
    rng: &mut ChaCha8Rng,
    k: usize,
    dim: usize,
    separation: f64,
    session: usize,
) -> Result<Vec<Vec<f64>>, SynthError> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        if centroids.is_empty() {
            centroids.push(random_unit(rng, dim));
            continue;
        }
        let prev = centroids.last().expect("non-empty");
        let mut accepted = None;
        for _ in 0..MAX_CENTROID_REJECTIONS {
            let candidate = random_unit(rng, dim);
            if dot(&candidate, prev) <= 1.0 - separation {
                accepted = Some(candidate);
                break;
            }
        }
        centroids.push(accepted.ok_or(SynthError::CentroidSeparation {
            session,
            separation,
        })?);
    }
    Ok(centroids)
}

/// Smallest within-segment pairwise cosine versus largest cosine across each
/// planted boundary.
fn cluster_margin_holds(vectors: &[Vec<f64>], lengths: &[usize]) -> bool {
    let mut starts = Vec::with_capacity(lengths.len());
    let mut acc = 0;
    for &len in lengths {
        starts.push(acc);
        acc += len;
    }
    let mut min_within = f64::INFINITY;
    for (seg, &len) in lengths.iter().enumerate() {
        let s = starts[seg];
        for i in s..s + len {
            for j in i + 1..s + len {
                min_within = min_within.min(dot(&vectors[i], &vectors[j]));
            }
        }
    }
    let mut max_cross = f64::NEG_INFINITY;
    for seg in 0..lengths.len().saturating_sub(1) {
        let (s_a, len_a) = (starts[seg], lengths[seg]);
        let (s_b, len_b) = (starts[seg + 1], lengths[seg + 1]);
        for i in s_a..s_a + len_a {
            for j in s_b..s_b + len_b {
                max_cross = max_cross.max(dot(&vectors[i], &vectors[j]));
            }
        }
    }
    // Vacuously true when every segment is a singleton or there is one segment.
    if !min_within.is_finite() || !max_cross.is_finite() {
        return true;
    }
    min_within > max_cross
}

fn generate_session(
    spec: &SynthSpec,
    codebook: &Codebook,
    session: usize,
) -> Result<SynthSession, SynthError> {
    let session_seed = subseed(spec.seed, session as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(session_seed, 0));
    let session_id = format!("synth-{session:03}");

    let t = rng.random_range(spec.t_range.0..=spec.t_range.1);
    let k_hi = spec.k_range.1.min(t / spec.min_seg_len);
    let k = rng.random_range(spec.k_range.0..=k_hi.max(spec.k_range.0));

    // Segment lengths: the floor everywhere, extras scattered uniformly.
    let mut lengths = vec![spec.min_seg_len; k];
    for _ in 0..t - k * spec.min_seg_len {
        let pick = rng.random_range(0..k);
        lengths[pick] += 1;
    }

    let mut boundary_indices = Vec::with_capacity(k - 1);
    let mut acc = 0;
    for &len in &lengths[..k - 1] {
        acc += len;
        boundary_indices.push(acc - 1);
    }
    let boundaries = BoundarySet::new(boundary_indices, t).expect("lengths partition 0..t");

    // Dominant move per segment; adjacent segments always differ.
    let mut segment_moves = Vec::with_capacity(k);
    for seg in 0..k {
        let mv = if seg == 0 {
            rng.random_range(0..spec.moves)
        } else {
            let prev = segment_moves[seg - 1];
            let r = rng.random_range(0..spec.moves - 1);
            if r >= prev {
                r + 1
            } else {
                r
            }
        };
        segment_moves.push(mv);
    }
    let segment_of: Vec<usize> = lengths
        .iter()
        .enumerate()
        .flat_map(|(seg, &len)| core::iter::repeat_n(seg, len))
        .collect();

    let mut labels_human = RaterLabels::new("human".to_string());
    for (i, &seg) in segment_of.iter().enumerate() {
        if !rng.random_bool(spec.unlabeled_rate) {
            labels_human.insert(i, codebook.moves()[segment_moves[seg]].name.clone());
        }
    }

    let mut labels_ai = RaterLabels::new("ai".to_string());
    for (i, name) in labels_human.iter() {
        let assigned = if rng.random_bool(spec.rater_noise) {
            let current = codebook.category_of(name).expect("generated from codebook");
            let r = rng.random_range(0..spec.moves - 1);
            let flipped = if r >= current { r + 1 } else { r };
            codebook.moves()[flipped].name.clone()
        } else {
            name.to_string()
        };
        labels_ai.insert(i, assigned);
    }

    // Embeddings: re-draw the whole set with a fresh sub-seed until the
    // cluster margin holds (only enforced at separation >= 0.5).
    let mut embeddings = None;
    for attempt in 0..MAX_EMBEDDING_ATTEMPTS {
        let mut emb_rng =
            ChaCha8Rng::seed_from_u64(subseed(session_seed, 1 + attempt as u64));
        let centroids = draw_centroids(&mut emb_rng, k, spec.dim, spec.separation, session)?;
        let vectors: Vec<Vec<f64>> = segment_of
            .iter()
            .map(|&seg| {
                let jittered: Vec<f64> = centroids[seg]
                    .iter()
                    .map(|c| c + JITTER * emb_rng.sample::<f64, _>(StandardNormal))
                    .collect();
                normalized(&jittered).unwrap_or_else(|| centroids[seg].clone())
            })
            .collect();
        if spec.separation < 0.5 || cluster_margin_holds(&vectors, &lengths) {
            embeddings = Some(
                EmbeddingSequence::new(session_id.clone(), spec.dim, vectors)
                    .expect("normalized finite vectors"),
            );
            break;
        }
    }
    let embeddings = embeddings.ok_or(SynthError::ClusterCheckFailed { session })?;

    let utterances = (0..t)
        .map(|i| Utterance {
            id: format!("u{i}"),
            index: i,
            speaker: if i % 2 == 0 { "T" } else { "S" }.to_string(),
            text: format!(
                "utterance {i} of segment {seg} in {session_id}",
                seg = segment_of[i]
            ),
        })
        .collect();
    let dialogue = Dialogue::new(session_id.clone(), utterances).expect("t >= 1");

    let truth = Segmentation {
        session_id,
        boundaries,
        method: "synthetic-truth".to_string(),
        params_fingerprint: fingerprint::fingerprint(&spec.canonical()),
    };

    Ok(SynthSession {
        dialogue,
        truth,
        labels_human,
        labels_ai,
        embeddings,
    })
}

/// Generate a full corpus from a spec. Deterministic per seed; sessions use
/// independent sub-seeds so they can be regenerated in any order.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let codebook = synth_codebook(spec.moves);
    let sessions = (0..spec.sessions)
        .map(|s| generate_session(spec, &codebook, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SynthCorpus { codebook, sessions })
}
