//! Cross-modal ranking by normalized correlation and its evaluation
//! metrics: mean average precision and the cumulative match curve.
//!
//! Queries from one modality are scored against a gallery from the other by
//! the cosine of their subspace representations. A gallery item is relevant
//! to a query when their label rows share at least one category. Ties in
//! score break by ascending gallery index, so every ranking — and therefore
//! every metric — is deterministic.

use nalgebra::DMatrix;

use crate::data::LabelMatrix;
use crate::error::{Error, Result};

/// One query's gallery ordering, best match first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    query_index: usize,
    ordered_indices: Vec<usize>,
    scores: Vec<f64>,
}

impl RankedList {
    /// Validates that `ordered_indices` permutes the gallery, that scores
    /// never increase, and that equal scores keep ascending index order.
    pub fn new(query_index: usize, ordered_indices: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if ordered_indices.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                context: "score entries",
                expected: ordered_indices.len(),
                found: scores.len(),
            });
        }
        let n = ordered_indices.len();
        let mut seen = vec![false; n];
        for &idx in &ordered_indices {
            if idx >= n || seen[idx] {
                return Err(Error::InvalidArgument(format!(
                    "ordered indices are not a permutation of 0..{n}"
                )));
            }
            seen[idx] = true;
        }
        for w in 0..n.saturating_sub(1) {
            if !(scores[w + 1] <= scores[w]) {
                return Err(Error::InvalidArgument(format!(
                    "scores increase at position {}",
                    w + 1
                )));
            }
            if scores[w + 1] == scores[w] && ordered_indices[w + 1] < ordered_indices[w] {
                return Err(Error::InvalidArgument(format!(
                    "tied scores out of index order at position {}",
                    w + 1
                )));
            }
        }
        Ok(Self {
            query_index,
            ordered_indices,
            scores,
        })
    }

    pub fn query_index(&self) -> usize {
        self.query_index
    }

    pub fn ordered_indices(&self) -> &[usize] {
        &self.ordered_indices
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.ordered_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_indices.is_empty()
    }
}

/// Cosine of two vectors, the ranking score. Symmetric, scale-invariant,
/// and clamped to [-1, 1] against roundoff.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "vector length",
            expected: a.len(),
            found: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormProjection);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn rows_of(m: &DMatrix<f64>, side: &'static str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::with_capacity(m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value in {side} row {i}"
            )));
        }
        if row.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroNormRow { side, row: i });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Ranks the whole gallery for every query row by descending normalized
/// correlation, ties by ascending gallery index.
pub fn rank_all(queries: &DMatrix<f64>, gallery: &DMatrix<f64>) -> Result<Vec<RankedList>> {
    if queries.ncols() != gallery.ncols() {
        return Err(Error::DimensionMismatch {
            context: "gallery columns",
            expected: queries.ncols(),
            found: gallery.ncols(),
        });
    }
    let query_rows = rows_of(queries, "query")?;
    let gallery_rows = rows_of(gallery, "gallery")?;

    let mut out = Vec::with_capacity(query_rows.len());
    for (qi, q) in query_rows.iter().enumerate() {
        let mut scored: Vec<(usize, f64)> = gallery_rows
            .iter()
            .enumerate()
            .map(|(gi, g)| Ok((gi, normalized_correlation(q, g)?)))
            .collect::<Result<_>>()?;
        // Finite scores by construction, so the comparator is total.
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let (ordered_indices, scores) = scored.into_iter().unzip();
        out.push(RankedList::new(qi, ordered_indices, scores)?);
    }
    Ok(out)
}

/// Relevance of every (query, gallery item) pair: true when the two label
/// rows share at least one category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceJudgment {
    relevant: Vec<Vec<bool>>,
}

impl RelevanceJudgment {
    pub fn from_labels(queries: &LabelMatrix, gallery: &LabelMatrix) -> Result<Self> {
        if queries.classes() != gallery.classes() {
            return Err(Error::DimensionMismatch {
                context: "label categories",
                expected: queries.classes(),
                found: gallery.classes(),
            });
        }
        let relevant = (0..queries.len())
            .map(|q| {
                (0..gallery.len())
                    .map(|g| {
                        (0..queries.classes()).any(|c| {
                            queries.values()[(q, c)] == 1.0 && gallery.values()[(g, c)] == 1.0
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(Self { relevant })
    }

    pub fn n_queries(&self) -> usize {
        self.relevant.len()
    }

    pub fn n_gallery(&self) -> usize {
        self.relevant.first().map_or(0, Vec::len)
    }

    pub fn is_relevant(&self, query: usize, item: usize) -> bool {
        self.relevant[query][item]
    }
}

/// Average precision of one ranking truncated to its first `m` entries:
/// the mean of precision-at-j over the relevant positions j, normalized by
/// the number of relevant items among those m. No relevant item means 0.
pub fn average_precision(ranked: &RankedList, rel: &RelevanceJudgment, m: usize) -> Result<f64> {
    if m > ranked.len() {
        return Err(Error::InvalidArgument(format!(
            "cutoff {m} exceeds ranking length {}",
            ranked.len()
        )));
    }
    if ranked.query_index() >= rel.n_queries() || ranked.len() > rel.n_gallery() {
        return Err(Error::DimensionMismatch {
            context: "relevance entries",
            expected: ranked.len(),
            found: rel.n_gallery(),
        });
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (pos, &idx) in ranked.ordered_indices()[..m].iter().enumerate() {
        if rel.is_relevant(ranked.query_index(), idx) {
            hits += 1;
            precision_sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    Ok(precision_sum / hits as f64)
}

/// Mean of per-query average precision over full-gallery rankings.
pub fn mean_average_precision(
    rankings: &[RankedList],
    labels_q: &LabelMatrix,
    labels_g: &LabelMatrix,
    m: usize,
) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::InvalidArgument("empty query set".into()));
    }
    let rel = RelevanceJudgment::from_labels(labels_q, labels_g)?;
    let mut sum = 0.0;
    for ranking in rankings {
        sum += average_precision(ranking, &rel, m)?;
    }
    Ok(sum / rankings.len() as f64)
}

/// Cumulative match curve: entry l-1 is the fraction of queries whose top-l
/// results contain at least one relevant item, for l = 1..=max_l.
pub fn cmc_curve(
    rankings: &[RankedList],
    labels_q: &LabelMatrix,
    labels_g: &LabelMatrix,
    max_l: usize,
) -> Result<Vec<f64>> {
    if rankings.is_empty() {
        return Err(Error::InvalidArgument("empty query set".into()));
    }
    let rel = RelevanceJudgment::from_labels(labels_q, labels_g)?;
    let mut first_hit_counts = vec![0usize; max_l];
    for ranking in rankings {
        if max_l > ranking.len() {
            return Err(Error::InvalidArgument(format!(
                "cutoff {max_l} exceeds ranking length {}",
                ranking.len()
            )));
        }
        if ranking.query_index() >= rel.n_queries() {
            return Err(Error::DimensionMismatch {
                context: "query labels",
                expected: rel.n_queries(),
                found: ranking.query_index() + 1,
            });
        }
        let first_hit = ranking.ordered_indices()[..max_l]
            .iter()
            .position(|&idx| rel.is_relevant(ranking.query_index(), idx));
        if let Some(pos) = first_hit {
            first_hit_counts[pos] += 1;
        }
    }
    let n_q = rankings.len() as f64;
    let mut curve = Vec::with_capacity(max_l);
    let mut covered = 0usize;
    for count in first_hit_counts {
        covered += count;
        curve.push(covered as f64 / n_q);
    }
    Ok(curve)
}

/// Named metric values plus a match curve, printable as aligned text or CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    map_entries: Vec<(&'static str, f64)>,
    cmc: Vec<f64>,
}

impl EvalReport {
    pub fn new(map_entries: Vec<(&'static str, f64)>, cmc: Vec<f64>) -> Self {
        Self { map_entries, cmc }
    }

    /// `NAME <value>` lines, then `CMC <l> <value>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.map_entries {
            out.push_str(&format!("{name} {value:.6}\n"));
        }
        for (l, value) in self.cmc.iter().enumerate() {
            out.push_str(&format!("CMC {} {value:.6}\n", l + 1));
        }
        out
    }

    /// `metric,value` rows with the curve flattened to `CMC_<l>` metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, value) in &self.map_entries {
            out.push_str(&format!("{name},{value:.6}\n"));
        }
        for (l, value) in self.cmc.iter().enumerate() {
            out.push_str(&format!("CMC_{},{value:.6}\n", l + 1));
        }
        out
    }
}
