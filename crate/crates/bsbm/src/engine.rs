//! Matrix-free linear operators and symmetric eigensolvers.
//!
//! Every estimator works with the Gram matrix of a (possibly) centered
//! biadjacency matrix, optionally with a diagonal correction: the hollowed
//! operator `H(M) = M - diag(M)` zeroes the diagonal, the debiased operator
//! subtracts `E(W W^T)`. None of these matrices is ever materialized; a
//! product costs two sparse passes plus rank-one corrections,
//! `O(nnz + n1 + n2)`.

use crate::model::Biadjacency;
use crate::rng::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("operator norm estimate below 1e-14: degenerate input")]
    ZeroOperator,
    #[error("vector length {got} does not match operator dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// A symmetric linear operator given by its action on vectors.
pub trait SymOp: Sync {
    fn dim(&self) -> usize;

    /// `out = Op v`.
    fn apply(&self, v: &[f64], out: &mut [f64]);

    /// `out = (Op + shift I) v`. Implementations fuse the shift where doing
    /// so is exact, so that operators differing by a multiple of the identity
    /// produce bit-identical shifted products.
    fn apply_shifted(&self, shift: f64, v: &[f64], out: &mut [f64]) {
        self.apply(v, out);
        if shift != 0.0 {
            for (o, &x) in out.iter_mut().zip(v) {
                *o += shift * x;
            }
        }
    }
}

/// The implicit matrix `A - offset * 1 1^T`.
///
/// `offset = p_hat` gives the estimated centering, `offset = p` the true
/// centering, `offset = 0` the raw matrix.
#[derive(Clone, Debug)]
pub struct CenteredMatrix<'a> {
    base: &'a Biadjacency,
    offset: f64,
}

impl<'a> CenteredMatrix<'a> {
    pub fn new(base: &'a Biadjacency, offset: f64) -> Self {
        Self { base, offset }
    }

    pub fn base(&self) -> &Biadjacency {
        self.base
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn n1(&self) -> usize {
        self.base.n1()
    }

    pub fn n2(&self) -> usize {
        self.base.n2()
    }

    /// `out = (A - c 1 1^T) v`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        self.base.matvec(v, out);
        let correction = self.offset * v.iter().sum::<f64>();
        if correction != 0.0 {
            for o in out.iter_mut() {
                *o -= correction;
            }
        }
    }

    /// `out = (A - c 1 1^T)^T u`.
    pub fn matvec_t(&self, u: &[f64], out: &mut [f64]) {
        self.base.matvec_t(u, out);
        let correction = self.offset * u.iter().sum::<f64>();
        if correction != 0.0 {
            for o in out.iter_mut() {
                *o -= correction;
            }
        }
    }

    /// Squared Euclidean norms of the rows, `d_i = deg_i (1 - 2c) + n2 c^2`.
    pub fn row_sqnorms(&self) -> Vec<f64> {
        let c = self.offset;
        let base = self.base.n2() as f64 * c * c;
        (0..self.base.n1())
            .map(|i| self.base.degree(i) as f64 * (1.0 - 2.0 * c) + base)
            .collect()
    }
}

/// Shared implementation of `M M^T - diag(d)` products.
struct GramCore<'a> {
    m: CenteredMatrix<'a>,
    diag_sub: Vec<f64>,
    psd_shift: f64,
}

impl<'a> GramCore<'a> {
    fn new(m: CenteredMatrix<'a>, diag_sub: Vec<f64>) -> Self {
        let psd_shift = diag_sub.iter().copied().fold(0.0f64, f64::max);
        Self {
            m,
            diag_sub,
            psd_shift,
        }
    }

    fn apply_with_shift(&self, shift: f64, v: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; self.m.n2()];
        self.m.matvec_t(v, &mut mid);
        self.m.matvec(&mid, out);
        // Fused so that (shift - d_i) vanishes exactly when they are equal.
        for ((o, &x), &d) in out.iter_mut().zip(v).zip(&self.diag_sub) {
            *o += (shift - d) * x;
        }
    }
}

/// `H(M M^T) = M M^T - diag(M M^T)` for a centered matrix `M`.
///
/// The represented operator has an exactly zero diagonal, and adding
/// `shift() * I` makes it positive semidefinite, since `M M^T` is PSD and the
/// shift dominates every deleted diagonal entry.
pub struct HollowedGramOp<'a>(GramCore<'a>);

impl<'a> HollowedGramOp<'a> {
    pub fn new(m: CenteredMatrix<'a>) -> Self {
        let d = m.row_sqnorms();
        Self(GramCore::new(m, d))
    }

    /// `d_i`, the deleted diagonal.
    pub fn row_sqnorms(&self) -> &[f64] {
        &self.0.diag_sub
    }

    /// `s = max_i d_i`, a PSD-restoring shift.
    pub fn shift(&self) -> f64 {
        self.0.psd_shift
    }
}

impl SymOp for HollowedGramOp<'_> {
    fn dim(&self) -> usize {
        self.0.m.n1()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.0.apply_with_shift(0.0, v, out);
    }

    fn apply_shifted(&self, shift: f64, v: &[f64], out: &mut [f64]) {
        self.0.apply_with_shift(shift, v, out);
    }
}

/// `M M^T - diag(d)` for an explicit diagonal correction `d >= 0`; `d = 0`
/// gives the plain Gram operator.
pub struct GramOp<'a>(GramCore<'a>);

impl<'a> GramOp<'a> {
    /// Plain `M M^T` (already PSD, `shift() = 0`).
    pub fn plain(m: CenteredMatrix<'a>) -> Self {
        let n1 = m.n1();
        Self(GramCore::new(m, vec![0.0; n1]))
    }

    /// `M M^T - diag(d)`, the debiased Gram operator.
    pub fn debiased(m: CenteredMatrix<'a>, diag: Vec<f64>) -> Self {
        assert_eq!(diag.len(), m.n1());
        Self(GramCore::new(m, diag))
    }

    pub fn shift(&self) -> f64 {
        self.0.psd_shift
    }
}

impl SymOp for GramOp<'_> {
    fn dim(&self) -> usize {
        self.0.m.n1()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.0.apply_with_shift(0.0, v, out);
    }

    fn apply_shifted(&self, shift: f64, v: &[f64], out: &mut [f64]) {
        self.0.apply_with_shift(shift, v, out);
    }
}

/// Dense symmetric operator in row-major storage; used by the concentration
/// bench and as a test hook for analytically known operators.
#[derive(Clone, Debug)]
pub struct DenseSymOp {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymOp {
    /// Takes row-major entries of a symmetric `n x n` matrix.
    pub fn new(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n);
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `max_i sum_j |M_ij|`; `M + shift I` is PSD for any shift at or above
    /// this value (Gershgorin).
    pub fn gershgorin_shift(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|x| x.abs())
                    .sum()
            })
            .fold(0.0f64, f64::max)
    }

    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| -x).collect(),
        }
    }
}

impl SymOp for DenseSymOp {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// Result of one eigensolve.
#[derive(Clone, Debug)]
pub struct EigenSolveReport {
    /// Eigenvalue of the requested operator (any internal shift subtracted
    /// back).
    pub eigenvalue: f64,
    /// Unit-norm eigenvector estimate.
    pub eigenvector: Vec<f64>,
    /// Power iteration steps consumed.
    pub iterations: usize,
    /// `||Op v - lambda v||_2` at return.
    pub residual: f64,
    /// Whether the residual dropped below the tolerance within `max_iter`.
    pub converged: bool,
    /// Set by [`second_eigvec`] when the top gap `|l1 - l2| <= tol * |l1|`,
    /// in which case the returned vector is rotation-ambiguous.
    pub degenerate_gap: bool,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 5000;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit-norm Gaussian start vector drawn from the stream.
pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm2(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Power iteration on `op + shift I`, which the caller guarantees to be
/// positive semidefinite. Returns the top algebraic eigenpair of `op`.
pub fn top_eigvec_from(
    op: &dyn SymOp,
    shift: f64,
    tol: f64,
    max_iter: usize,
    start: Vec<f64>,
) -> Result<EigenSolveReport, EngineError> {
    let n = op.dim();
    if start.len() != n {
        return Err(EngineError::DimensionMismatch {
            got: start.len(),
            expected: n,
        });
    }
    let mut v = start;
    let norm = norm2(&v);
    if norm < 1e-14 {
        return Err(EngineError::ZeroOperator);
    }
    v.iter_mut().for_each(|x| *x /= norm);

    let mut w = vec![0.0; n];
    let mut rayleigh = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=max_iter {
        iterations = k;
        op.apply_shifted(shift, &v, &mut w);
        let w_norm = norm2(&w);
        if w_norm < 1e-14 {
            return Err(EngineError::ZeroOperator);
        }
        rayleigh = dot(&v, &w);
        residual = v
            .iter()
            .zip(&w)
            .map(|(&x, &y)| {
                let r = y - rayleigh * x;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        if residual <= tol * rayleigh.abs().max(1.0) {
            converged = true;
            break;
        }
        for (x, &y) in v.iter_mut().zip(&w) {
            *x = y / w_norm;
        }
    }
    if rayleigh.abs() < 1e-14 && shift == 0.0 {
        return Err(EngineError::ZeroOperator);
    }
    Ok(EigenSolveReport {
        eigenvalue: rayleigh - shift,
        eigenvector: v,
        iterations,
        residual,
        converged,
        degenerate_gap: false,
    })
}

/// As [`top_eigvec_from`] with a seeded random start.
pub fn top_eigvec(
    op: &dyn SymOp,
    shift: f64,
    tol: f64,
    max_iter: usize,
    stream: RngStream,
) -> Result<EigenSolveReport, EngineError> {
    let start = random_unit_vector(op.dim(), &mut stream.rng());
    top_eigvec_from(op, shift, tol, max_iter, start)
}

/// Computes the top pair, deflates it, and runs power iteration on the
/// orthogonal complement; returns the second-largest algebraic eigenpair.
pub fn second_eigvec_from(
    op: &dyn SymOp,
    shift: f64,
    tol: f64,
    max_iter: usize,
    start_top: Vec<f64>,
    start_second: Vec<f64>,
) -> Result<EigenSolveReport, EngineError> {
    let n = op.dim();
    let top = top_eigvec_from(op, shift, tol, max_iter, start_top)?;
    if start_second.len() != n {
        return Err(EngineError::DimensionMismatch {
            got: start_second.len(),
            expected: n,
        });
    }
    let v1 = &top.eigenvector;

    let mut v = start_second;
    let proj = dot(v1, &v);
    for (x, &y) in v.iter_mut().zip(v1) {
        *x -= proj * y;
    }
    let norm = norm2(&v);
    if norm < 1e-14 {
        return Err(EngineError::ZeroOperator);
    }
    v.iter_mut().for_each(|x| *x /= norm);

    let mut w = vec![0.0; n];
    let mut rayleigh = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=max_iter {
        iterations = k;
        op.apply_shifted(shift, &v, &mut w);
        // Deflation: keep the iterate orthogonal to the top eigenvector.
        let proj = dot(v1, &w);
        for (y, &x1) in w.iter_mut().zip(v1) {
            *y -= proj * x1;
        }
        let w_norm = norm2(&w);
        if w_norm < 1e-14 {
            // The shifted operator annihilates the complement of v1: the
            // current iterate is an exact eigenvector with eigenvalue -shift.
            rayleigh = 0.0;
            residual = w_norm;
            converged = true;
            break;
        }
        rayleigh = dot(&v, &w);
        residual = v
            .iter()
            .zip(&w)
            .map(|(&x, &y)| {
                let r = y - rayleigh * x;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        if residual <= tol * rayleigh.abs().max(1.0) {
            converged = true;
            break;
        }
        for (x, &y) in v.iter_mut().zip(&w) {
            *x = y / w_norm;
        }
    }
    let lambda1 = top.eigenvalue;
    let lambda2 = rayleigh - shift;
    let degenerate_gap = (lambda1 - lambda2).abs() <= tol * lambda1.abs();
    Ok(EigenSolveReport {
        eigenvalue: lambda2,
        eigenvector: v,
        iterations,
        residual,
        converged,
        degenerate_gap,
    })
}

/// As [`second_eigvec_from`] with both starts drawn from the stream.
pub fn second_eigvec(
    op: &dyn SymOp,
    shift: f64,
    tol: f64,
    max_iter: usize,
    stream: RngStream,
) -> Result<EigenSolveReport, EngineError> {
    let mut rng = stream.rng();
    let start_top = random_unit_vector(op.dim(), &mut rng);
    let start_second = random_unit_vector(op.dim(), &mut rng);
    second_eigvec_from(op, shift, tol, max_iter, start_top, start_second)
}
