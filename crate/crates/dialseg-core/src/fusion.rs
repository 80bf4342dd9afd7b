//! Retrieval-based fusion of move-label signals into utterance embeddings.
//!
//! A memory bank stores labeled utterance embeddings. For each query
//! utterance, the top-K most similar bank entries are retrieved, their
//! similarities softmaxed into attention weights, the weights applied to a
//! per-move embedding table to form an aggregated move vector, and that vector
//! blended into the utterance embedding before renormalization. The fused
//! sequence then feeds the coherence decoder unchanged.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::embedding::{dot, normalized, EmbeddingSequence};
use crate::seeding;
use crate::types::{Codebook, RaterLabels};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("fusion requires a non-empty memory")]
    EmptyMemory,
    #[error("memory entry for `{session_id}`[{index}] has no embedding")]
    MissingEmbedding { session_id: String, index: usize },
    #[error("move `{0}` is not in the codebook")]
    UnknownMove(String),
    #[error("move `{0}` has no row in the embedding table")]
    MoveNotInTable(String),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("aggregated move vector contains a non-finite value")]
    NonFiniteMoveVector,
    #[error("no similarities to weight")]
    EmptySimilarities,
    #[error("neighbors and weights differ in length: {neighbors} vs {weights}")]
    NeighborWeightMismatch { neighbors: usize, weights: usize },
    #[error("bank dimension {bank} does not match embedding dimension {emb}")]
    DimensionMismatch { bank: usize, emb: usize },
}

/// One labeled embedding with its provenance, used for self-exclusion when the
/// query corpus is the same corpus the memory was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub embedding: Vec<f64>,
    pub move_name: String,
    pub session_id: String,
    pub utterance_index: usize,
}

/// An ordered store of labeled utterance embeddings.
///
/// Retrieval is an exact linear scan; banks stay small (at most a few thousand
/// entries), so no index structure is warranted.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    dim: usize,
    entries: Vec<BankEntry>,
}

impl MemoryBank {
    pub fn from_entries(dim: usize, entries: Vec<BankEntry>) -> Result<Self, FusionError> {
        if entries.is_empty() {
            return Err(FusionError::EmptyMemory);
        }
        if let Some(entry) = entries.iter().find(|e| e.embedding.len() != dim) {
            return Err(FusionError::DimensionMismatch {
                bank: dim,
                emb: entry.embedding.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }
}

/// Collect every labeled utterance of the given sessions into a memory bank.
///
/// Sessions are consumed in the order given and utterances in index order, so
/// the bank layout is deterministic. Unlabeled utterances are skipped; a
/// corpus with no labels at all is an error.
pub fn build_memory<'a>(
    sessions: impl IntoIterator<Item = (&'a EmbeddingSequence, &'a RaterLabels)>,
    codebook: &Codebook,
) -> Result<MemoryBank, FusionError> {
    let mut entries = Vec::new();
    let mut dim = 0;
    for (emb, labels) in sessions {
        dim = emb.dim();
        for (index, move_name) in labels.iter() {
            if codebook.category_of(move_name).is_none() {
                return Err(FusionError::UnknownMove(move_name.into()));
            }
            if index >= emb.len() {
                return Err(FusionError::MissingEmbedding {
                    session_id: emb.session_id().into(),
                    index,
                });
            }
            entries.push(BankEntry {
                embedding: emb.vector(index).to_vec(),
                move_name: move_name.into(),
                session_id: emb.session_id().into(),
                utterance_index: index,
            });
        }
    }
    MemoryBank::from_entries(dim, entries)
}

/// How the per-move embedding rows are constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// Each row is the normalized mean of the bank embeddings carrying that
    /// move (default; data-grounded and parameter-free). Moves absent from
    /// the bank fall back to their seeded random row.
    Centroid,
    /// Each row is a seeded standard-normal draw, unit-normalized.
    Random,
}

/// One unit row per codebook move, in codebook order.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveEmbeddingTable {
    dim: usize,
    move_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    pub mode: TableMode,
    pub seed: u64,
}

impl MoveEmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn move_names(&self) -> &[String] {
        &self.move_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, move_name: &str) -> Option<&[f64]> {
        self.move_names
            .iter()
            .position(|m| m == move_name)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn from_parts(
        dim: usize,
        move_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        mode: TableMode,
        seed: u64,
    ) -> Self {
        Self {
            dim,
            move_names,
            rows,
            mode,
            seed,
        }
    }
}

fn random_unit_row(dim: usize, seed: u64, tag: u64) -> Vec<f64> {
    let mut rng = seeding::rng_for(seed, tag);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

/// Build the move-embedding table for a codebook over a bank.
pub fn build_move_table(
    codebook: &Codebook,
    bank: &MemoryBank,
    mode: TableMode,
    seed: u64,
) -> MoveEmbeddingTable {
    let dim = bank.dim();
    let mut move_names = Vec::new();
    let mut rows = Vec::new();
    for (tag, mv) in codebook.moves().iter().enumerate() {
        let row = match mode {
            TableMode::Random => random_unit_row(dim, seed, tag as u64),
            TableMode::Centroid => {
                let mut sum = alloc::vec![0.0; dim];
                let mut count = 0usize;
                for entry in bank.entries() {
                    if entry.move_name == mv.name {
                        for (s, x) in sum.iter_mut().zip(&entry.embedding) {
                            *s += x;
                        }
                        count += 1;
                    }
                }
                if count == 0 {
                    random_unit_row(dim, seed, tag as u64)
                } else {
                    normalized(&sum).unwrap_or_else(|| random_unit_row(dim, seed, tag as u64))
                }
            }
        };
        move_names.push(mv.name.clone());
        rows.push(row);
    }
    MoveEmbeddingTable {
        dim,
        move_names,
        rows,
        mode,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// Neighbors retrieved per query (clamped to the bank size).
    pub k_ret: usize,
    /// Softmax temperature over retrieval similarities.
    pub tau: f64,
    /// Blend weight of the aggregated move vector.
    pub alpha_fuse: f64,
    pub seed: u64,
    /// Skip a query utterance's own bank entry during retrieval.
    pub exclude_self: bool,
    pub table_mode: TableMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            k_ret: 5,
            tau: 0.1,
            alpha_fuse: 0.5,
            seed: 0,
            exclude_self: true,
            table_mode: TableMode::Centroid,
        }
    }
}

impl FusionParams {
    pub fn canonical(&self) -> String {
        format!(
            "fusion;k={};tau={:?};alpha={:?};seed={};exclude_self={};table={:?}",
            self.k_ret, self.tau, self.alpha_fuse, self.seed, self.exclude_self, self.table_mode,
        )
    }
}

/// One retrieved neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub entry_index: usize,
    pub move_name: String,
    pub similarity: f64,
}

/// Top-`k` bank entries by cosine similarity, ties resolved by bank order.
///
/// `exclude` removes the entry with that provenance (the query's own entry).
pub fn retrieve_topk(
    query: &[f64],
    bank: &MemoryBank,
    k: usize,
    exclude: Option<(&str, usize)>,
) -> Result<Vec<Neighbor>, FusionError> {
    if bank.is_empty() {
        return Err(FusionError::EmptyMemory);
    }
    if bank.dim() != query.len() {
        return Err(FusionError::DimensionMismatch {
            bank: bank.dim(),
            emb: query.len(),
        });
    }
    let mut scored: Vec<(usize, f64)> = bank
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            exclude != Some((e.session_id.as_str(), e.utterance_index))
        })
        .map(|(i, e)| (i, dot(query, &e.embedding)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k.min(scored.len()));
    Ok(scored
        .into_iter()
        .map(|(entry_index, similarity)| Neighbor {
            entry_index,
            move_name: bank.entries()[entry_index].move_name.clone(),
            similarity,
        })
        .collect())
}

/// Temperature softmax over similarities, computed with max subtraction.
pub fn attention_weights(similarities: &[f64], tau: f64) -> Result<Vec<f64>, FusionError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(FusionError::NonPositiveTemperature(tau));
    }
    if similarities.is_empty() {
        return Err(FusionError::EmptySimilarities);
    }
    let max = similarities
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = similarities
        .iter()
        .map(|s| libm::exp((s - max) / tau))
        .collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Attention-weighted sum of the neighbors' move rows.
pub fn aggregate_move_vector(
    neighbors: &[Neighbor],
    weights: &[f64],
    table: &MoveEmbeddingTable,
) -> Result<Vec<f64>, FusionError> {
    if neighbors.len() != weights.len() {
        return Err(FusionError::NeighborWeightMismatch {
            neighbors: neighbors.len(),
            weights: weights.len(),
        });
    }
    let mut out = alloc::vec![0.0; table.dim()];
    for (n, w) in neighbors.iter().zip(weights) {
        let row = table
            .row(&n.move_name)
            .ok_or_else(|| FusionError::MoveNotInTable(n.move_name.clone()))?;
        for (o, x) in out.iter_mut().zip(row) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Result of blending one utterance vector with its move vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub vector: Vec<f64>,
    /// The blend collapsed to zero and the original vector was kept.
    pub degenerate: bool,
}

/// Normalize `h + alpha * r`. With `alpha = 0` the input is returned
/// bit-for-bit; a zero-sum blend falls back to the input and flags itself.
pub fn fuse(h: &[f64], r: &[f64], alpha: f64) -> Result<Fused, FusionError> {
    if r.iter().any(|x| !x.is_finite()) {
        return Err(FusionError::NonFiniteMoveVector);
    }
    if alpha == 0.0 {
        return Ok(Fused {
            vector: h.to_vec(),
            degenerate: false,
        });
    }
    let blended: Vec<f64> = h.iter().zip(r).map(|(a, b)| a + alpha * b).collect();
    match normalized(&blended) {
        Some(vector) => Ok(Fused {
            vector,
            degenerate: false,
        }),
        None => Ok(Fused {
            vector: h.to_vec(),
            degenerate: true,
        }),
    }
}

/// Per-corpus fusion output.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbeddings {
    pub embeddings: EmbeddingSequence,
    /// Utterances whose blend collapsed to zero.
    pub degenerate: usize,
    /// `k_ret` exceeded the usable bank size and was clamped.
    pub clamped_k: bool,
}

/// Fuse every utterance of a sequence: retrieve, weight, aggregate, blend.
///
/// With `alpha_fuse = 0` the input sequence is returned unchanged so the
/// downstream decode is identical to the unfused baseline.
pub fn fused_embeddings(
    emb: &EmbeddingSequence,
    bank: &MemoryBank,
    table: &MoveEmbeddingTable,
    params: &FusionParams,
) -> Result<FusedEmbeddings, FusionError> {
    if bank.is_empty() {
        return Err(FusionError::EmptyMemory);
    }
    if params.alpha_fuse == 0.0 {
        return Ok(FusedEmbeddings {
            embeddings: emb.clone(),
            degenerate: 0,
            clamped_k: params.k_ret > bank.len(),
        });
    }
    let mut vectors = Vec::with_capacity(emb.len());
    let mut degenerate = 0usize;
    let mut clamped_k = false;
    for index in 0..emb.len() {
        let query = emb.vector(index);
        let exclude = params
            .exclude_self
            .then_some((emb.session_id(), index));
        let neighbors = retrieve_topk(query, bank, params.k_ret, exclude)?;
        if neighbors.len() < params.k_ret {
            clamped_k = true;
        }
        let sims: Vec<f64> = neighbors.iter().map(|n| n.similarity).collect();
        let weights = attention_weights(&sims, params.tau)?;
        let move_vector = aggregate_move_vector(&neighbors, &weights, table)?;
        let fused = fuse(query, &move_vector, params.alpha_fuse)?;
        if fused.degenerate {
            degenerate += 1;
        }
        vectors.push(fused.vector);
    }
    let embeddings = EmbeddingSequence::new(emb.session_id().into(), emb.dim(), vectors)
        .expect("fused vectors are unit norm and finite");
    Ok(FusedEmbeddings {
        embeddings,
        degenerate,
        clamped_k,
    })
}
