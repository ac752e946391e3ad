//! Kernel dependence measurement between projected modalities and labels.
//!
//! Dependence between two sample sets is scored through their linear Gram
//! matrices: center one Gram with the idempotent operator H = I - (1/n)11'
//! on both sides, then take the trace of its product with the other. The
//! empirical statistic divides by (n-1)^2; the training objective uses the
//! raw trace sum over the three pairs (modality 1, modality 2, labels).
//!
//! H is never materialized. Applying it amounts to subtracting row, column,
//! or grand means, which keeps every operation O(n^2).

use nalgebra::DMatrix;

use crate::data::LabelMatrix;
use crate::error::{Error, Result};

/// Symmetric n x n Gram matrix of pairwise inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a precomputed Gram matrix; it must be square and symmetric.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "gram matrix columns",
                expected: values.nrows(),
                found: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "gram matrix contains a non-finite entry".into(),
            ));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..values.nrows() {
            for j in (i + 1)..values.ncols() {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Gram matrix of the linear kernel, K = W W'.
///
/// The upper triangle is computed once and mirrored, so the result is
/// symmetric to the last bit.
pub fn linear_gram(w: &DMatrix<f64>) -> Result<GramMatrix> {
    if w.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "gram matrix needs at least one sample".into(),
        ));
    }
    let n = w.nrows();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot = w.row(i).dot(&w.row(j));
            values[(i, j)] = dot;
            values[(j, i)] = dot;
        }
    }
    Ok(GramMatrix { values })
}

/// Mean-removal operator H = I - (1/n)11' for n samples, applied without
/// ever forming H.
#[derive(Debug, Clone, Copy)]
pub struct CenteringOperator {
    n: usize,
}

impl CenteringOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// Left application H * M: removes the mean of every column.
    pub fn apply(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "centering operand rows",
                expected: self.n,
                found: m.nrows(),
            });
        }
        let inv = 1.0 / self.n as f64;
        let mut out = m.clone();
        for j in 0..out.ncols() {
            let mean = out.column(j).sum() * inv;
            out.column_mut(j).add_scalar_mut(-mean);
        }
        Ok(out)
    }

    /// Two-sided application H * K * H via row, column, and grand means.
    pub fn conjugate(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if k.nrows() != self.n || k.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                context: "centering operand rows",
                expected: self.n,
                found: k.nrows().max(k.ncols()),
            });
        }
        let inv = 1.0 / self.n as f64;
        let row_means: Vec<f64> = (0..self.n).map(|i| k.row(i).sum() * inv).collect();
        let col_means: Vec<f64> = (0..self.n).map(|j| k.column(j).sum() * inv).collect();
        let grand = row_means.iter().sum::<f64>() * inv;
        let mut out = k.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] += grand - row_means[i] - col_means[j];
            }
        }
        Ok(out)
    }
}

/// Centers a Gram matrix on both sides: H K H.
pub fn center(k: &GramMatrix) -> GramMatrix {
    let values = CenteringOperator::new(k.len())
        .conjugate(k.values())
        .expect("gram matrix is square by construction");
    GramMatrix { values }
}

/// Empirical dependence statistic (n-1)^-2 tr(K1 H K2 H).
///
/// Only the second Gram is centered; the trace regroups as tr(K1 (H K2 H)),
/// which is an elementwise sum against the transposed centered matrix.
pub fn empirical_hsic(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    if k1.len() != k2.len() {
        return Err(Error::DimensionMismatch {
            context: "gram matrix pair",
            expected: k1.len(),
            found: k2.len(),
        });
    }
    let n = k1.len();
    if n < 2 {
        return Err(Error::HsicTooFewSamples);
    }
    let centered2 = center(k2);
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace += k1.values()[(i, j)] * centered2.values()[(j, i)];
        }
    }
    let scale = (n - 1) as f64;
    Ok(trace / (scale * scale))
}

/// Sum of the three pairwise dependence traces between both projected
/// modalities and the labels, without the (n-1)^-2 factor.
///
/// Each trace tr(H Wa Wa' H Wb Wb') collapses to ||(H Wa)'(H Wb)||_F^2, so
/// the n x n Grams are never formed here.
pub fn dependence_objective(
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    y: &LabelMatrix,
) -> Result<f64> {
    let n = w1.nrows();
    if w2.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "modality 2 projected rows",
            expected: n,
            found: w2.nrows(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "label rows",
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::HsicTooFewSamples);
    }
    let h = CenteringOperator::new(n);
    let u1 = h.apply(w1)?;
    let u2 = h.apply(w2)?;
    let uy = h.apply(y.values())?;
    let cross = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a.transpose() * b).norm_squared();
    Ok(cross(&u1, &u2) + cross(&u1, &uy) + cross(&u2, &uy))
}
