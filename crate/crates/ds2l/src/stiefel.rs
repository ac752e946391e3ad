//! Conjugate-gradient minimization over the Stiefel manifold.
//!
//! Points are d x k matrices with orthonormal columns. The solver walks along
//! geodesics: a tangent direction H at P decomposes as H = P A + Q R with
//! A = P'H skew-symmetric and Q R the thin QR factorization of the normal
//! component (I - P P') H. The curve
//!
//! ```text
//! P(t) = P M(t) + Q N(t),   [M(t); N(t)] = exp(t [A, -R'; R, 0]) [I; 0]
//! ```
//!
//! stays on the manifold for every t because the block matrix is
//! skew-symmetric, so its exponential is orthogonal. Only the 2k x 2k
//! exponential is ever computed.
//!
//! Search directions follow nonlinear conjugate gradients with the
//! Polak-Ribiere coefficient clamped at zero, gradients and directions
//! carried between iterates by projection onto the new tangent space, a
//! periodic steepest-descent restart, and an Armijo backtracking line
//! search along the geodesic with safeguarded quadratic interpolation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Feasibility bound enforced on every constructed point: ||P'P - I||_F.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Tangency bound, scaled by the vector's norm: ||P'Z + Z'P||_F.
pub const TANGENCY_TOL: f64 = 1e-8;

/// A d x k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    values: DMatrix<f64>,
}

impl StiefelPoint {
    /// Validates orthonormality of the columns.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() < values.ncols() {
            return Err(Error::InvalidArgument(format!(
                "a Stiefel point needs d >= k >= 1, got {} x {}",
                values.nrows(),
                values.ncols()
            )));
        }
        let defect = orthonormality_defect(&values);
        if !defect.is_finite() || defect >= FEASIBILITY_TOL {
            return Err(Error::NotOrthonormal { defect });
        }
        Ok(Self { values })
    }

    /// Orthonormalizes a seeded Gaussian matrix by thin QR. The sign of each
    /// column is fixed so that the triangular factor has a non-negative
    /// diagonal, making the draw canonical.
    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || d < k {
            return Err(Error::InvalidArgument(format!(
                "a Stiefel point needs d >= k >= 1, got {d} x {k}"
            )));
        }
        let gaussian = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = gaussian.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..k {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::new(q)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// ||P'P - I||_F of the stored matrix.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.values)
    }
}

fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let k = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(k, k)).norm()
}

fn tangency_defect(base: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let s = base.transpose() * z;
    (&s + s.transpose()).norm()
}

/// A direction in the tangent space of a Stiefel point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    values: DMatrix<f64>,
}

impl TangentVector {
    /// Wraps a matrix after checking tangency at `base`.
    pub fn at(base: &StiefelPoint, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != base.values.shape() {
            return Err(Error::DimensionMismatch {
                context: "tangent vector rows",
                expected: base.rows(),
                found: values.nrows(),
            });
        }
        let defect = tangency_defect(&base.values, &values);
        if !defect.is_finite() || defect > TANGENCY_TOL * values.norm().max(1.0) {
            return Err(Error::NotTangent { defect });
        }
        Ok(Self { values })
    }

    /// Orthogonal projection of an ambient matrix onto the tangent space at
    /// `base`: Z - base sym(base' Z).
    pub fn project(base: &StiefelPoint, ambient: &DMatrix<f64>) -> Result<Self> {
        if ambient.shape() != base.values.shape() {
            return Err(Error::DimensionMismatch {
                context: "tangent vector rows",
                expected: base.rows(),
                found: ambient.nrows(),
            });
        }
        let s = base.values().transpose() * ambient;
        let sym = (&s + s.transpose()) * 0.5;
        Ok(Self {
            values: ambient - base.values() * sym,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Tangent-space gradient G - P G' P obtained from the ambient gradient G.
pub fn riemannian_gradient(p: &StiefelPoint, euclid_grad: &DMatrix<f64>) -> Result<TangentVector> {
    if euclid_grad.shape() != p.values.shape() {
        return Err(Error::DimensionMismatch {
            context: "gradient rows",
            expected: p.rows(),
            found: euclid_grad.nrows(),
        });
    }
    let values = euclid_grad - p.values() * (euclid_grad.transpose() * p.values());
    Ok(TangentVector { values })
}

/// Carries a tangent vector from one point to another by projecting it onto
/// the destination tangent space.
///
/// The projection is orthogonal, so the transported vector never grows. It
/// is the identity when `to` equals `from`.
pub fn parallel_transport(
    h: &TangentVector,
    from: &StiefelPoint,
    to: &StiefelPoint,
) -> Result<TangentVector> {
    if to.values.shape() != from.values.shape() {
        return Err(Error::DimensionMismatch {
            context: "destination rows",
            expected: from.rows(),
            found: to.rows(),
        });
    }
    if h.values.shape() != from.values.shape() {
        return Err(Error::DimensionMismatch {
            context: "tangent vector rows",
            expected: from.rows(),
            found: h.values.nrows(),
        });
    }
    let defect = tangency_defect(&from.values, &h.values);
    if !defect.is_finite() || defect > TANGENCY_TOL * h.norm().max(1.0) {
        return Err(Error::NotTangent { defect });
    }
    TangentVector::project(to, &h.values)
}

/// Walks distance `t` along the geodesic leaving `p` with velocity `h`.
pub fn geodesic_step(p: &StiefelPoint, h: &TangentVector, t: f64) -> Result<StiefelPoint> {
    if h.values.shape() != p.values.shape() {
        return Err(Error::DimensionMismatch {
            context: "tangent vector rows",
            expected: p.rows(),
            found: h.values.nrows(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("step length must be finite".into()));
    }
    if t == 0.0 {
        return Ok(p.clone());
    }
    let k = p.cols();
    let pm = p.values();
    let a_raw = pm.transpose() * &h.values;
    let normal = &h.values - pm * &a_raw;
    // Discard the (tiny) symmetric part so the block below is exactly skew
    // and its exponential exactly orthogonal.
    let a = (&a_raw - a_raw.transpose()) * 0.5;

    let qr = normal.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            let mut row = r.row_mut(j);
            row.neg_mut();
        }
    }

    let mut block = DMatrix::zeros(2 * k, 2 * k);
    block.view_mut((0, 0), (k, k)).copy_from(&a);
    block.view_mut((0, k), (k, k)).copy_from(&(-r.transpose()));
    block.view_mut((k, 0), (k, k)).copy_from(&r);
    let e = (block * t).exp();
    let m = e.view((0, 0), (k, k)).into_owned();
    let n = e.view((k, 0), (k, k)).into_owned();

    // The exponential and the Q factor are orthogonal only to roundoff, and
    // that drift compounds over the thousands of steps a training run takes.
    // Snapping the endpoint through thin QR pins the defect at machine
    // precision; the correction is the same order as the drift it removes.
    let endpoint = pm * m + q * n;
    let eqr = endpoint.qr();
    let mut eq = eqr.q();
    let er = eqr.r();
    for j in 0..k {
        if er[(j, j)] < 0.0 {
            eq.column_mut(j).neg_mut();
        }
    }
    StiefelPoint::new(eq)
}

/// Armijo backtracking parameters for the geodesic line search.
#[derive(Debug, Clone, Copy)]
pub struct ArmijoParams {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Largest step fraction kept per backtrack; interpolation may cut
    /// deeper, floored at a tenth of the rejected step.
    pub shrink: f64,
    /// First step length tried.
    pub initial_step: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

/// Settings for [`cg_minimize`].
#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub max_iter: usize,
    /// Stop once the tangent gradient norm falls below this.
    pub grad_tol: f64,
    /// Force a steepest-descent direction every this many iterations.
    pub restart_every: usize,
    pub armijo: ArmijoParams,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            grad_tol: 1e-6,
            restart_every: 10,
            armijo: ArmijoParams::default(),
        }
    }
}

const MIN_STEP: f64 = 1e-20;

/// Minimizes a smooth cost over the Stiefel manifold, starting from `start`.
///
/// `cost` and `euclid_grad` evaluate the ambient function and its ambient
/// gradient; cg_minimize handles the geometry. Returns the final point and
/// the cost trace (starting value plus one entry per accepted step). The
/// trace never increases: a step is only taken when the line search finds
/// sufficient decrease, and the search gives up otherwise.
pub fn cg_minimize<C, G>(
    cost: C,
    euclid_grad: G,
    start: StiefelPoint,
    opts: &CgOptions,
) -> Result<(StiefelPoint, Vec<f64>)>
where
    C: Fn(&DMatrix<f64>) -> f64,
    G: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let mut p = start;
    let mut f = cost(p.values());
    if !f.is_finite() {
        return Err(Error::NonFinite {
            what: "cost",
            iteration: 0,
        });
    }
    let mut trace = vec![f];

    let mut g_amb = euclid_grad(p.values());
    if g_amb.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            iteration: 0,
        });
    }
    let mut grad = riemannian_gradient(&p, &g_amb)?;
    let mut grad_norm_sq = grad.values().norm_squared();
    if grad_norm_sq.sqrt() <= opts.grad_tol {
        return Ok((p, trace));
    }
    let mut dir = TangentVector {
        values: -grad.values(),
    };

    for iter in 1..=opts.max_iter {
        // True directional derivative along the geodesic: <ambient grad, H>.
        let mut slope = frob_inner(&g_amb, dir.values());
        if slope >= 0.0 {
            dir = TangentVector {
                values: -grad.values(),
            };
            slope = frob_inner(&g_amb, dir.values());
            if slope >= 0.0 {
                break;
            }
        }

        let mut step = opts.armijo.initial_step;
        let mut accepted = None;
        while step > MIN_STEP {
            let candidate = geodesic_step(&p, &dir, step)?;
            let f_cand = cost(candidate.values());
            if !f_cand.is_finite() {
                return Err(Error::NonFinite {
                    what: "cost",
                    iteration: iter,
                });
            }
            if f_cand <= f + opts.armijo.c1 * step * slope {
                accepted = Some((candidate, f_cand));
                break;
            }
            // Next trial: minimizer of the quadratic through f(0), f'(0) and
            // the rejected f(step), safeguarded into [0.1, shrink] x step.
            // Interpolation keeps trial lengths off a fixed geometric grid,
            // which a curvature mode could otherwise sit on and oscillate
            // undamped at the 2/h stability boundary.
            let denom = 2.0 * (f_cand - f - slope * step);
            let quad = if denom > 0.0 {
                -slope * step * step / denom
            } else {
                f64::NEG_INFINITY
            };
            step = quad.clamp(0.1 * step, opts.armijo.shrink * step);
        }
        let Some((p_new, f_new)) = accepted else {
            break;
        };

        let g_amb_new = euclid_grad(p_new.values());
        if g_amb_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                iteration: iter,
            });
        }
        let grad_new = riemannian_gradient(&p_new, &g_amb_new)?;
        let grad_new_norm_sq = grad_new.values().norm_squared();
        trace.push(f_new);

        if grad_new_norm_sq.sqrt() <= opts.grad_tol {
            return Ok((p_new, trace));
        }

        // Carry the old gradient and direction over by projecting straight
        // onto the new tangent space. This is what the transport does, minus
        // its tangency precondition check: both vectors are tangent at `p`
        // by construction, but the check's tolerance cannot see that when
        // the ambient gradient dwarfs its tangent part.
        let beta = if opts.restart_every > 0 && iter % opts.restart_every == 0 {
            0.0
        } else {
            let carried = TangentVector::project(&p_new, grad.values())?;
            let num = frob_inner(
                grad_new.values(),
                &(grad_new.values() - carried.values()),
            );
            (num / grad_norm_sq).max(0.0)
        };
        let carried_dir = TangentVector::project(&p_new, dir.values())?;
        dir = TangentVector {
            values: -grad_new.values() + carried_dir.values() * beta,
        };

        p = p_new;
        f = f_new;
        g_amb = g_amb_new;
        grad = grad_new;
        grad_norm_sq = grad_new_norm_sq;
    }

    Ok((p, trace))
}
