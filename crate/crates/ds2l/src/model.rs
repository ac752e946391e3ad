//! Training objective, alternating optimizer, and the trained model.
//!
//! One orthonormal projection per modality is learned by minimizing
//!
//! ```text
//!   -beta * dependence(X1 P1, X2 P2, Y)
//!   + alpha1 * (tr(P1' X1' L X1 P1) + lambda1 * |P1|_2,1)
//!   + alpha2 * (tr(P2' X2' L X2 P2) + lambda2 * |P2|_2,1)
//!   + theta * |Y Y' - X1 P1 (X2 P2)'|_F^2
//! ```
//!
//! over P1, P2 with orthonormal columns. The row-sparsity norms are handled
//! by majorize-minimize: with row weights D(P) frozen, each |P|_2,1 turns
//! into the quadratic 2 tr(P' D P), and the problem in one projection (with
//! the other fixed) collapses to
//!
//! ```text
//!   minimize  theta * |Y Y' - X P B'|_F^2 - tr(P' Q P)
//! ```
//!
//! for a constant matrix Q and fixed B. [`SubProblem`] carries that reduced
//! form with everything sample-sized factored out, so inner iterations cost
//! O(d^2 k) regardless of n. [`train`] alternates the two sub-problems,
//! refreshing the row weights each round, and records the exact objective
//! (true row norms, not the frozen surrogate) after every outer iteration;
//! that is the quantity the majorize-minimize argument proves non-increasing.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{zero_center, Dataset, FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use crate::hsic::{self, CenteringOperator};
use crate::semantics::{self, SemanticGraph};
use crate::stiefel::{cg_minimize, CgOptions, StiefelPoint};

/// Gradient-norm stop for the inner conjugate-gradient runs.
const INNER_GRAD_TOL: f64 = 1e-6;

/// Term weights and solver budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Weight of the graph-plus-sparsity block for modality 1.
    pub alpha1: f64,
    /// Weight of the graph-plus-sparsity block for modality 2.
    pub alpha2: f64,
    /// Row-sparsity strength inside the modality 1 block.
    pub lambda1: f64,
    /// Row-sparsity strength inside the modality 2 block.
    pub lambda2: f64,
    /// Weight of the label-reconstruction term.
    pub theta: f64,
    /// Weight of the dependence term.
    pub beta: f64,
    /// Shared subspace dimension.
    pub k: usize,
    pub max_outer_iter: usize,
    pub inner_cg_iter: usize,
    /// Relative objective change that ends the outer loop.
    pub outer_tol: f64,
    /// Row norms are clamped from below by this when building row weights.
    pub row_norm_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            lambda1: 0.01,
            lambda2: 0.01,
            theta: 1.0,
            beta: 1.0,
            k: 10,
            max_outer_iter: 100,
            inner_cg_iter: 20,
            outer_tol: 1e-6,
            row_norm_floor: 1e-8,
        }
    }
}

impl Hyperparams {
    /// Checks ranges and compatibility with the modality dimensions.
    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        for (name, value) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("theta", self.theta),
            ("beta", self.beta),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidHyperparameter(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidHyperparameter("k must be at least 1".into()));
        }
        if self.k > d1.min(d2) {
            return Err(Error::InvalidHyperparameter(format!(
                "k = {} exceeds min(d1, d2) = {}",
                self.k,
                d1.min(d2)
            )));
        }
        if !self.outer_tol.is_finite() || self.outer_tol < 0.0 {
            return Err(Error::InvalidHyperparameter(
                "outer_tol must be finite and non-negative".into(),
            ));
        }
        if !self.row_norm_floor.is_finite() || self.row_norm_floor <= 0.0 {
            return Err(Error::InvalidHyperparameter(
                "row_norm_floor must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which modality a sub-problem or projection refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    One,
    Two,
}

/// Diagonal weights for the row-sparsity surrogate; entry i equals
/// 1 / (2 max(||p_i||, floor)) for row i of the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RowWeightMatrix {
    diag: Vec<f64>,
}

impl RowWeightMatrix {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// tr(P' D P) = sum_i D_ii ||p_i||^2. Doubling this recovers |P|_2,1
    /// whenever D was built from P itself and no row sits below the floor.
    pub fn weighted_quadratic(&self, p: &DMatrix<f64>) -> f64 {
        (0..p.nrows())
            .map(|i| self.diag[i] * p.row(i).norm_squared())
            .sum()
    }
}

/// Builds the surrogate row weights for a projection matrix.
pub fn row_weights(p: &DMatrix<f64>, floor: f64) -> Result<RowWeightMatrix> {
    if !floor.is_finite() || floor <= 0.0 {
        return Err(Error::InvalidHyperparameter(
            "row_norm_floor must be finite and positive".into(),
        ));
    }
    let diag = (0..p.nrows())
        .map(|i| 1.0 / (2.0 * p.row(i).norm().max(floor)))
        .collect();
    Ok(RowWeightMatrix { diag })
}

/// Sum of row norms, |P|_2,1.
pub fn l21_norm(p: &DMatrix<f64>) -> f64 {
    (0..p.nrows()).map(|i| p.row(i).norm()).sum()
}

struct ObjectiveParts {
    dependence: f64,
    laplacian1: f64,
    laplacian2: f64,
    fit: f64,
}

fn objective_parts(
    x1: &FeatureMatrix,
    x2: &FeatureMatrix,
    y: &LabelMatrix,
    graph: &SemanticGraph,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
) -> Result<ObjectiveParts> {
    if p1.nrows() != x1.dim() {
        return Err(Error::DimensionMismatch {
            context: "projection 1 rows",
            expected: x1.dim(),
            found: p1.nrows(),
        });
    }
    if p2.nrows() != x2.dim() {
        return Err(Error::DimensionMismatch {
            context: "projection 2 rows",
            expected: x2.dim(),
            found: p2.nrows(),
        });
    }
    let w1 = x1.values() * p1;
    let w2 = x2.values() * p2;
    let dependence = hsic::dependence_objective(&w1, &w2, y)?;
    let laplacian1 = semantics::laplacian_quadratic(&w1, graph)?;
    let laplacian2 = semantics::laplacian_quadratic(&w2, graph)?;
    let fit = (y.values() * y.values().transpose() - &w1 * w2.transpose()).norm_squared();
    Ok(ObjectiveParts {
        dependence,
        laplacian1,
        laplacian2,
        fit,
    })
}

/// Full training objective with the row-sparsity surrogate tr(P' D P) under
/// the supplied frozen weights.
pub fn objective(
    x1: &FeatureMatrix,
    x2: &FeatureMatrix,
    y: &LabelMatrix,
    graph: &SemanticGraph,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    d1w: &RowWeightMatrix,
    d2w: &RowWeightMatrix,
    h: &Hyperparams,
) -> Result<f64> {
    if d1w.len() != p1.nrows() || d2w.len() != p2.nrows() {
        return Err(Error::DimensionMismatch {
            context: "row weight entries",
            expected: p1.nrows(),
            found: d1w.len(),
        });
    }
    let parts = objective_parts(x1, x2, y, graph, p1, p2)?;
    Ok(-h.beta * parts.dependence
        + h.alpha1 * (parts.laplacian1 + h.lambda1 * d1w.weighted_quadratic(p1))
        + h.alpha2 * (parts.laplacian2 + h.lambda2 * d2w.weighted_quadratic(p2))
        + h.theta * parts.fit)
}

/// Training objective with the row-sparsity penalty evaluated exactly
/// (true |P|_2,1 row norms instead of a frozen surrogate).
///
/// This is the quantity recorded in the training trace: the
/// majorize-minimize argument guarantees it never increases across outer
/// iterations, which does not hold for the surrogate under stale weights.
pub fn exact_objective(
    x1: &FeatureMatrix,
    x2: &FeatureMatrix,
    y: &LabelMatrix,
    graph: &SemanticGraph,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    h: &Hyperparams,
) -> Result<f64> {
    let parts = objective_parts(x1, x2, y, graph, p1, p2)?;
    Ok(-h.beta * parts.dependence
        + h.alpha1 * (parts.laplacian1 + h.lambda1 * l21_norm(p1))
        + h.alpha2 * (parts.laplacian2 + h.lambda2 * l21_norm(p2))
        + h.theta * parts.fit)
}

/// Constant matrix of the reduced one-modality problem:
///
/// ```text
/// Q = beta (X'H Xo Po Po' Xo' H X + X'H Y Y' H X) - alpha X'L X - alpha lambda D
/// ```
///
/// where X is the active modality, Xo/Po the fixed one, and H the mean
/// remover. The result is symmetrized before returning, so the quadratic's
/// gradient is exactly 2 Q P.
pub fn q_matrix(
    modality: Modality,
    x1: &FeatureMatrix,
    x2: &FeatureMatrix,
    y: &LabelMatrix,
    graph: &SemanticGraph,
    p_other: &DMatrix<f64>,
    dw: &RowWeightMatrix,
    h: &Hyperparams,
) -> Result<DMatrix<f64>> {
    let (x, xo, alpha, lambda) = match modality {
        Modality::One => (x1, x2, h.alpha1, h.lambda1),
        Modality::Two => (x2, x1, h.alpha2, h.lambda2),
    };
    let n = x.len();
    if xo.len() != n || y.len() != n || graph.len() != n {
        return Err(Error::DimensionMismatch {
            context: "sample count",
            expected: n,
            found: xo.len().min(y.len()).min(graph.len()),
        });
    }
    if p_other.nrows() != xo.dim() {
        return Err(Error::DimensionMismatch {
            context: "fixed projection rows",
            expected: xo.dim(),
            found: p_other.nrows(),
        });
    }
    if dw.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            context: "row weight entries",
            expected: x.dim(),
            found: dw.len(),
        });
    }

    let hop = CenteringOperator::new(n);
    let xh = hop.apply(x.values())?;
    let xoh = hop.apply(xo.values())?;
    let b = &xoh * p_other;
    let v = xh.transpose() * &b;
    let u = xh.transpose() * y.values();
    let lap = x.values().transpose() * (graph.laplacian() * x.values());

    let mut q = (&v * v.transpose() + &u * u.transpose()) * h.beta - lap * alpha;
    for i in 0..x.dim() {
        q[(i, i)] -= alpha * lambda * dw.diag()[i];
    }
    Ok((&q + q.transpose()) * 0.5)
}

/// Reduced cost for one modality with the other held fixed:
///
/// ```text
/// L(P) = theta |Y Y' - X P B'|_F^2 - tr(P' Q P)
/// ```
///
/// Everything n-sized is contracted away at construction, leaving cost and
/// gradient evaluations O(d^2 k).
pub struct SubProblem {
    q: DMatrix<f64>,
    /// X'X of the active modality.
    xtx: DMatrix<f64>,
    /// Y'X of the active modality.
    ytx: DMatrix<f64>,
    /// B'Y with B the fixed projected modality.
    bty: DMatrix<f64>,
    /// B'B.
    btb: DMatrix<f64>,
    /// (X'Y)(Y'B), the constant factor of the gradient's cross term.
    w_cross: DMatrix<f64>,
    /// |Y Y'|_F^2.
    cyy: f64,
    theta: f64,
    k: usize,
}

impl SubProblem {
    /// Sub-problem in P1 with P2 frozen.
    pub fn for_modality1(
        x1: &FeatureMatrix,
        x2: &FeatureMatrix,
        y: &LabelMatrix,
        graph: &SemanticGraph,
        p2: &DMatrix<f64>,
        d1w: &RowWeightMatrix,
        h: &Hyperparams,
    ) -> Result<Self> {
        let q = q_matrix(Modality::One, x1, x2, y, graph, p2, d1w, h)?;
        Ok(Self::assemble(q, x1, x2.values() * p2, y, h))
    }

    /// Sub-problem in P2 with P1 frozen.
    pub fn for_modality2(
        x1: &FeatureMatrix,
        x2: &FeatureMatrix,
        y: &LabelMatrix,
        graph: &SemanticGraph,
        p1: &DMatrix<f64>,
        d2w: &RowWeightMatrix,
        h: &Hyperparams,
    ) -> Result<Self> {
        let q = q_matrix(Modality::Two, x1, x2, y, graph, p1, d2w, h)?;
        Ok(Self::assemble(q, x2, x1.values() * p1, y, h))
    }

    fn assemble(
        q: DMatrix<f64>,
        x: &FeatureMatrix,
        b: DMatrix<f64>,
        y: &LabelMatrix,
        h: &Hyperparams,
    ) -> Self {
        // |Y Y'|_F^2 = tr((Y'Y)^2) = |Y'Y|_F^2; the c x c route avoids the
        // n x n Gram.
        let yty = y.values().transpose() * y.values();
        let cyy = yty.norm_squared();
        let ytx = y.values().transpose() * x.values();
        let bty = b.transpose() * y.values();
        let btb = b.transpose() * &b;
        let w_cross = ytx.transpose() * bty.transpose();
        Self {
            q,
            xtx: x.values().transpose() * x.values(),
            ytx,
            bty,
            btb,
            w_cross,
            cyy,
            theta: h.theta,
            k: b.ncols(),
        }
    }

    pub fn dim(&self) -> usize {
        self.xtx.nrows()
    }

    fn check_shape(&self, p: &DMatrix<f64>) -> Result<()> {
        if p.nrows() != self.dim() || p.ncols() != self.k {
            return Err(Error::DimensionMismatch {
                context: "projection rows",
                expected: self.dim(),
                found: p.nrows(),
            });
        }
        Ok(())
    }

    /// Evaluates the reduced cost at an arbitrary (not necessarily feasible)
    /// projection matrix.
    pub fn cost(&self, p: &DMatrix<f64>) -> Result<f64> {
        self.check_shape(p)?;
        let yxp = &self.ytx * p;
        let cross = (yxp * &self.bty).trace();
        let pxxp = p.transpose() * &self.xtx * p;
        let fit = self.cyy - 2.0 * cross + (pxxp * &self.btb).trace();
        let quad = (p.transpose() * &self.q * p).trace();
        Ok(self.theta * fit - quad)
    }

    /// Ambient gradient of [`SubProblem::cost`]:
    /// -2 theta X'(Y Y' - X P B') B - 2 Q P.
    pub fn euclid_grad(&self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(p)?;
        let fit_part = (&self.w_cross - &self.xtx * p * &self.btb) * (2.0 * self.theta);
        Ok(-(fit_part + &self.q * p * 2.0))
    }
}

/// Snapshot handed to a training observer after each outer iteration.
pub struct OuterIterate<'a> {
    pub iteration: usize,
    pub objective: f64,
    pub p1: &'a StiefelPoint,
    pub p2: &'a StiefelPoint,
}

/// Result of [`train`]: the two projections, the centering means they
/// expect, the hyperparameters, and the recorded objective trace.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    p1: StiefelPoint,
    p2: StiefelPoint,
    column_means1: Vec<f64>,
    column_means2: Vec<f64>,
    hyper: Hyperparams,
    objective_trace: Vec<f64>,
}

impl TrainedModel {
    pub fn p1(&self) -> &StiefelPoint {
        &self.p1
    }

    pub fn p2(&self) -> &StiefelPoint {
        &self.p2
    }

    pub fn column_means(&self, modality: Modality) -> &[f64] {
        match modality {
            Modality::One => &self.column_means1,
            Modality::Two => &self.column_means2,
        }
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    /// Exact objective recorded after every outer iteration, starting with
    /// the value at initialization.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Projects features into the shared subspace, removing the stored
    /// training means first. Accepts raw (uncentered) features.
    pub fn project(&self, features: &FeatureMatrix, modality: Modality) -> Result<DMatrix<f64>> {
        let (p, means) = match modality {
            Modality::One => (&self.p1, &self.column_means1),
            Modality::Two => (&self.p2, &self.column_means2),
        };
        if features.dim() != means.len() {
            return Err(Error::DimensionMismatch {
                context: "feature dimension",
                expected: means.len(),
                found: features.dim(),
            });
        }
        let mut x = features.values().clone();
        for j in 0..x.ncols() {
            x.column_mut(j).add_scalar_mut(-means[j]);
        }
        Ok(x * p.values())
    }
}

/// Trains with alternating minimization; see the module docs for the loop.
pub fn train(ds: &Dataset, h: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    train_with_observer(ds, h, seed, |_| {})
}

/// [`train`] with a callback invoked after initialization and after every
/// outer iteration, for callers that audit the optimization path.
pub fn train_with_observer<F>(
    ds: &Dataset,
    h: &Hyperparams,
    seed: u64,
    mut observer: F,
) -> Result<TrainedModel>
where
    F: FnMut(&OuterIterate),
{
    let d1 = ds.modality1.dim();
    let d2 = ds.modality2.dim();
    h.validate(d1, d2)?;
    if ds.len() < 2 {
        return Err(Error::HsicTooFewSamples);
    }

    let column_means1 = ds.modality1.column_means();
    let column_means2 = ds.modality2.column_means();
    let x1 = zero_center(&ds.modality1);
    let x2 = zero_center(&ds.modality2);
    let y = &ds.labels;
    let graph = semantics::build_graph(y)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p1 = StiefelPoint::random(d1, h.k, &mut rng)?;
    let mut p2 = StiefelPoint::random(d2, h.k, &mut rng)?;

    let cg = CgOptions {
        max_iter: h.inner_cg_iter,
        grad_tol: INNER_GRAD_TOL,
        ..CgOptions::default()
    };

    let f0 = exact_objective(&x1, &x2, y, &graph, p1.values(), p2.values(), h)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite {
            what: "objective",
            iteration: 0,
        });
    }
    let mut trace = vec![f0];
    observer(&OuterIterate {
        iteration: 0,
        objective: f0,
        p1: &p1,
        p2: &p2,
    });

    for iteration in 1..=h.max_outer_iter {
        let d1w = row_weights(p1.values(), h.row_norm_floor)?;
        let d2w = row_weights(p2.values(), h.row_norm_floor)?;

        let sub1 = SubProblem::for_modality1(&x1, &x2, y, &graph, p2.values(), &d1w, h)?;
        (p1, _) = cg_minimize(
            |p| sub1.cost(p).expect("shape fixed by construction"),
            |p| sub1.euclid_grad(p).expect("shape fixed by construction"),
            p1,
            &cg,
        )?;

        let sub2 = SubProblem::for_modality2(&x1, &x2, y, &graph, p1.values(), &d2w, h)?;
        (p2, _) = cg_minimize(
            |p| sub2.cost(p).expect("shape fixed by construction"),
            |p| sub2.euclid_grad(p).expect("shape fixed by construction"),
            p2,
            &cg,
        )?;

        let f = exact_objective(&x1, &x2, y, &graph, p1.values(), p2.values(), h)?;
        if !f.is_finite() {
            return Err(Error::NonFinite {
                what: "objective",
                iteration,
            });
        }
        let prev = *trace.last().unwrap();
        trace.push(f);
        observer(&OuterIterate {
            iteration,
            objective: f,
            p1: &p1,
            p2: &p2,
        });
        if (prev - f).abs() / prev.abs().max(1.0) < h.outer_tol {
            break;
        }
    }

    Ok(TrainedModel {
        p1,
        p2,
        column_means1,
        column_means2,
        hyper: *h,
        objective_trace: trace,
    })
}

// ====== Model file format ======
//
// Line 1:  DS2L-MODEL 1
// Line 2:  d1 d2 k
// Then d1 rows of P1, d2 rows of P2, one line per mean vector, and one line
// of term weights: alpha1 alpha2 lambda1 lambda2 theta beta. All reals are
// written with 17 significant digits, which round-trips f64 exactly.

const MODEL_MAGIC: &str = "DS2L-MODEL";
const MODEL_VERSION: u32 = 1;

fn format_row(values: impl Iterator<Item = f64>) -> String {
    values
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Returns the next line with its 1-based number, advancing the cursor.
fn take_line<'a>(
    lines: &[&'a str],
    cursor: &mut usize,
    expected: &str,
) -> Result<(usize, &'a str)> {
    let idx = *cursor;
    let line = lines.get(idx).ok_or_else(|| Error::ModelFormat {
        line: lines.len() + 1,
        reason: format!("missing {expected}"),
    })?;
    *cursor += 1;
    Ok((idx + 1, line))
}

fn take_floats(
    lines: &[&str],
    cursor: &mut usize,
    expected: usize,
    what: &str,
) -> Result<Vec<f64>> {
    let (line_no, line) = take_line(lines, cursor, what)?;
    let row: Vec<f64> = line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::ModelFormat {
            line: line_no,
            reason: format!("unparseable {what}"),
        })?;
    if row.len() != expected {
        return Err(Error::ModelFormat {
            line: line_no,
            reason: format!("{what} needs {expected} values, found {}", row.len()),
        });
    }
    Ok(row)
}

fn take_matrix(
    lines: &[&str],
    cursor: &mut usize,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        data.extend(take_floats(lines, cursor, cols, what)?);
    }
    Ok(DMatrix::from_row_iterator(rows, cols, data))
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{MODEL_MAGIC} {MODEL_VERSION}\n"));
        out.push_str(&format!(
            "{} {} {}\n",
            self.p1.rows(),
            self.p2.rows(),
            self.p1.cols()
        ));
        for matrix in [self.p1.values(), self.p2.values()] {
            for i in 0..matrix.nrows() {
                out.push_str(&format_row(matrix.row(i).iter().copied()));
                out.push('\n');
            }
        }
        out.push_str(&format_row(self.column_means1.iter().copied()));
        out.push('\n');
        out.push_str(&format_row(self.column_means2.iter().copied()));
        out.push('\n');
        out.push_str(&format_row(
            [
                self.hyper.alpha1,
                self.hyper.alpha2,
                self.hyper.lambda1,
                self.hyper.lambda2,
                self.hyper.theta,
                self.hyper.beta,
            ]
            .into_iter(),
        ));
        out.push('\n');
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a model file written by [`TrainedModel::save`]. Solver budgets
    /// are not serialized and come back as defaults; the objective trace is
    /// empty (it lives in the training run's trace file).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let lines: Vec<&str> = text.lines().collect();
        let mut cursor = 0usize;

        let (line_no, header) = take_line(&lines, &mut cursor, "header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(Error::ModelFormat {
                line: line_no,
                reason: "unrecognized header".into(),
            });
        }
        match parts.next().map(str::parse::<u32>) {
            Some(Ok(MODEL_VERSION)) => {}
            _ => {
                return Err(Error::ModelFormat {
                    line: line_no,
                    reason: "unsupported version".into(),
                })
            }
        }

        let (line_no, dims) = take_line(&lines, &mut cursor, "dimensions")?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::ModelFormat {
                line: line_no,
                reason: "dimensions must be three integers".into(),
            })?;
        let [d1, d2, k] = dims[..] else {
            return Err(Error::ModelFormat {
                line: line_no,
                reason: "dimensions must be three integers".into(),
            });
        };
        if k == 0 || k > d1.min(d2) {
            return Err(Error::ModelFormat {
                line: line_no,
                reason: format!("invalid shape {d1} {d2} {k}"),
            });
        }

        let p1 = StiefelPoint::new(take_matrix(&lines, &mut cursor, d1, k, "projection row")?)?;
        let p2 = StiefelPoint::new(take_matrix(&lines, &mut cursor, d2, k, "projection row")?)?;
        let column_means1 = take_floats(&lines, &mut cursor, d1, "mean vector")?;
        let column_means2 = take_floats(&lines, &mut cursor, d2, "mean vector")?;
        let weights = take_floats(&lines, &mut cursor, 6, "weight line")?;

        let hyper = Hyperparams {
            alpha1: weights[0],
            alpha2: weights[1],
            lambda1: weights[2],
            lambda2: weights[3],
            theta: weights[4],
            beta: weights[5],
            k,
            ..Hyperparams::default()
        };
        hyper.validate(d1, d2).map_err(|e| Error::ModelFormat {
            line: 0,
            reason: e.to_string(),
        })?;

        Ok(Self {
            p1,
            p2,
            column_means1,
            column_means2,
            hyper,
            objective_trace: Vec::new(),
        })
    }
}
