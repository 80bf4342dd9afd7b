//! Brute-force reference implementations of the label-distribution metrics,
//! written directly from their definitions with plain loops and `std` float
//! math. This module stays independent of the library's metric code: the
//! acceptance suite checks the two against each other.

/// Resolved category per utterance: move index, the reserved category, or
/// outside the space entirely.
pub fn resolve(labels: &[Option<usize>], moves: usize, none_enabled: bool) -> Vec<Option<usize>> {
    labels
        .iter()
        .map(|l| match l {
            Some(m) => Some(*m),
            None if none_enabled => Some(moves),
            None => None,
        })
        .collect()
}

pub fn category_count(moves: usize, none_enabled: bool) -> usize {
    moves + usize::from(none_enabled)
}

/// Empirical distribution of one segment; `None` when nothing resolves.
pub fn distribution(categories: &[Option<usize>], c: usize) -> Option<Vec<f64>> {
    let mut counts = vec![0usize; c];
    let mut total = 0usize;
    for cat in categories.iter().flatten() {
        counts[*cat] += 1;
        total += 1;
    }
    if total == 0 {
        return None;
    }
    Some(counts.iter().map(|&n| n as f64 / total as f64).collect())
}

pub fn normalized_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &pi in p {
        if pi > 0.0 {
            h -= pi * pi.log2();
        }
    }
    h / (p.len() as f64).log2()
}

pub fn purity(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            sum += pi * (pi / qi).log2();
        }
    }
    sum
}

pub fn js(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

/// Per-segment categories for a boundary-index segmentation of `categories`.
pub fn split<'a>(categories: &'a [Option<usize>], boundaries: &[usize]) -> Vec<&'a [Option<usize>]> {
    let mut segments = Vec::new();
    let mut start = 0;
    for &b in boundaries {
        segments.push(&categories[start..=b]);
        start = b + 1;
    }
    segments.push(&categories[start..]);
    segments
}

/// Length-weighted mean of a per-distribution statistic, weights renormalized
/// over the segments whose distribution is defined.
fn weighted(
    segments: &[&[Option<usize>]],
    c: usize,
    stat: impl Fn(&[f64]) -> f64,
) -> Option<f64> {
    let mut value = 0.0;
    let mut kept = 0usize;
    for seg in segments {
        if let Some(p) = distribution(seg, c) {
            value += seg.len() as f64 * stat(&p);
            kept += seg.len();
        }
    }
    if kept == 0 {
        None
    } else {
        Some(value / kept as f64)
    }
}

pub fn weighted_entropy(segments: &[&[Option<usize>]], c: usize) -> Option<f64> {
    weighted(segments, c, normalized_entropy)
}

pub fn weighted_purity(segments: &[&[Option<usize>]], c: usize) -> Option<f64> {
    weighted(segments, c, purity)
}

/// Pair-weighted divergence between adjacent segments; pair weights are
/// `(|S_k| + |S_{k+1}|) / 2T` as defined, or renormalized over computable
/// pairs when `normalize` is set.
pub fn adjacent_js(
    segments: &[&[Option<usize>]],
    c: usize,
    t: usize,
    normalize: bool,
) -> Option<f64> {
    if segments.len() < 2 {
        return None;
    }
    let mut value = 0.0;
    let mut pair_mass = 0usize;
    for k in 0..segments.len() - 1 {
        let (a, b) = (segments[k], segments[k + 1]);
        if let (Some(pa), Some(pb)) = (distribution(a, c), distribution(b, c)) {
            let w = (a.len() + b.len()) as f64;
            value += w * js(&pa, &pb);
            pair_mass += a.len() + b.len();
        }
    }
    if pair_mass == 0 {
        return None;
    }
    Some(if normalize {
        value / pair_mass as f64
    } else {
        value / (2.0 * t as f64)
    })
}

/// Fraction of boundaries whose flanking categories both resolve and differ.
pub fn bcr(categories: &[Option<usize>], boundaries: &[usize]) -> Option<f64> {
    if boundaries.is_empty() {
        return None;
    }
    let mut changed = 0usize;
    let mut resolvable = 0usize;
    for &b in boundaries {
        if let (Some(l), Some(r)) = (categories[b], categories[b + 1]) {
            resolvable += 1;
            if l != r {
                changed += 1;
            }
        }
    }
    if resolvable == 0 {
        return None;
    }
    Some(changed as f64 / resolvable as f64)
}

/// Length-weighted divergence between two raters' per-segment distributions.
pub fn rater_js(
    segments_a: &[&[Option<usize>]],
    segments_b: &[&[Option<usize>]],
    c: usize,
) -> Option<f64> {
    let mut value = 0.0;
    let mut kept = 0usize;
    for (a, b) in segments_a.iter().zip(segments_b) {
        if let (Some(pa), Some(pb)) = (distribution(a, c), distribution(b, c)) {
            value += a.len() as f64 * js(&pa, &pb);
            kept += a.len();
        }
    }
    if kept == 0 {
        None
    } else {
        Some(value / kept as f64)
    }
}

/// Reference fusion of one query against a bank, straight from the retrieval,
/// softmax, aggregation, and blending definitions (naive softmax, no max
/// subtraction, so the numeric route differs from the library's).
pub fn fuse_reference(
    query: &[f64],
    bank: &[(Vec<f64>, usize)],
    table: &[Vec<f64>],
    k_ret: usize,
    tau: f64,
    alpha: f64,
) -> Vec<f64> {
    let mut scored: Vec<(usize, f64)> = bank
        .iter()
        .enumerate()
        .map(|(i, (v, _))| {
            let dot = query.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            (i, dot)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k_ret.min(scored.len()));

    let exps: Vec<f64> = scored.iter().map(|(_, s)| (s / tau).exp()).collect();
    let z: f64 = exps.iter().sum();

    let dim = query.len();
    let mut r = vec![0.0; dim];
    for ((entry, _), e) in scored.iter().zip(&exps) {
        let row = &table[bank[*entry].1];
        for (acc, x) in r.iter_mut().zip(row) {
            *acc += (e / z) * x;
        }
    }

    let blended: Vec<f64> = query.iter().zip(&r).map(|(h, ri)| h + alpha * ri).collect();
    let norm = blended.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        query.to_vec()
    } else {
        blended.iter().map(|x| x / norm).collect()
    }
}
