//! Label-similarity graph and its Laplacian quadratic form.
//!
//! The graph weights pairs of samples by the cosine of their label rows, so
//! samples sharing many categories attract each other strongly. The Laplacian
//! quadratic form tr(Z' L Z) equals the similarity-weighted sum of squared
//! pairwise distances (halved), which is what the training objective
//! penalizes to keep semantically close samples close after projection.

use nalgebra::DMatrix;

use crate::data::LabelMatrix;
use crate::error::{Error, Result};

/// Similarity matrix S and graph Laplacian L = diag(S 1) - S over n samples.
#[derive(Debug, Clone)]
pub struct SemanticGraph {
    similarity: DMatrix<f64>,
    laplacian: DMatrix<f64>,
}

impl SemanticGraph {
    pub fn len(&self) -> usize {
        self.similarity.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.similarity.nrows() == 0
    }

    pub fn similarity(&self) -> &DMatrix<f64> {
        &self.similarity
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }
}

/// Pairwise cosine similarity of label rows.
///
/// The diagonal is exactly 1 and every entry lies in [0, 1] for binary
/// labels. A label row of all zeros has no direction and is rejected.
pub fn cosine_similarity(labels: &LabelMatrix) -> Result<DMatrix<f64>> {
    let y = labels.values();
    let n = y.nrows();
    let norms: Vec<f64> = (0..n).map(|i| y.row(i).norm()).collect();
    for (i, &norm) in norms.iter().enumerate() {
        if norm == 0.0 {
            return Err(Error::ZeroLabelRow(i));
        }
    }
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let value = (y.row(i).dot(&y.row(j)) / (norms[i] * norms[j])).clamp(0.0, 1.0);
            s[(i, j)] = value;
            s[(j, i)] = value;
        }
    }
    Ok(s)
}

/// Builds the similarity matrix and its Laplacian.
pub fn build_graph(labels: &LabelMatrix) -> Result<SemanticGraph> {
    let similarity = cosine_similarity(labels)?;
    let n = similarity.nrows();
    let mut laplacian = -&similarity;
    for i in 0..n {
        laplacian[(i, i)] += similarity.row(i).sum();
    }
    Ok(SemanticGraph {
        similarity,
        laplacian,
    })
}

/// Evaluates tr(Z' L Z) for an n x k embedding Z.
pub fn laplacian_quadratic(z: &DMatrix<f64>, graph: &SemanticGraph) -> Result<f64> {
    if z.nrows() != graph.len() {
        return Err(Error::DimensionMismatch {
            context: "embedding rows",
            expected: graph.len(),
            found: z.nrows(),
        });
    }
    let lz = graph.laplacian() * z;
    Ok(z.iter().zip(lz.iter()).map(|(a, b)| a * b).sum())
}
