//! Label-recovery procedures.
//!
//! The headline method is the hollowed Lloyd's algorithm: start from the
//! signs of the top eigenvector of the hollowed Gram matrix of the centered
//! biadjacency, then refine with sign iterations. The baselines are the SVD
//! estimator (signs of the second eigenvector of `A A^T`), the debiased
//! spectral estimator (second eigenvector of `A A^T - E(W W^T)`), the
//! diagonal-deletion estimator (second eigenvector of `H(A A^T)`), and the
//! supervised oracle, which predicts each label from all the others with the
//! true centering.

use crate::engine::{
    random_unit_vector, second_eigvec_from, top_eigvec_from, CenteredMatrix, EngineError, GramOp,
    HollowedGramOp, SymOp, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::metrics::{recovery_class, MetricsError, RecoveryClass};
use crate::model::{expected_gram_diag, Biadjacency, BsbmParams, LabelVector, ModelError};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `sign(0) = +1` everywhere in this crate.
pub const SIGN_AT_ZERO: i8 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("degenerate input: the operator carries no signal (e.g. an empty graph)")]
    DegenerateInput,
    #[error("initializer length {got} does not match n1 = {expected}")]
    InitLength { got: usize, expected: usize },
    #[error("lloyd_max_iters = {got} is below the required floor {floor} for n1 = {n1}")]
    IterationFloor { got: usize, floor: usize, n1: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl From<EngineError> for EstimatorError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::ZeroOperator => EstimatorError::DegenerateInput,
            EngineError::DimensionMismatch { got, expected } => {
                EstimatorError::InitLength { got, expected }
            }
        }
    }
}

/// The recovery procedures exposed by the experiment runner and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Spectral,
    HollowedLloyd,
    Svd,
    DebiasedSpectral,
    DiagonalDeletion,
    Oracle,
}

impl Method {
    pub fn short_name(&self) -> &'static str {
        match self {
            Method::Spectral => "SP",
            Method::HollowedLloyd => "HL",
            Method::Svd => "SVD",
            Method::DebiasedSpectral => "DS",
            Method::DiagonalDeletion => "DD",
            Method::Oracle => "O",
        }
    }

    /// Supervised procedures consume ground truth (the explicit truth
    /// channel) and serve only as upper benchmarks.
    pub fn is_supervised(&self) -> bool {
        matches!(self, Method::DebiasedSpectral | Method::Oracle)
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_uppercase().as_str() {
            "SP" | "SPECTRAL" => Some(Method::Spectral),
            "HL" | "HOLLOWED-LLOYD" | "HOLLOWEDLLOYD" => Some(Method::HollowedLloyd),
            "SVD" => Some(Method::Svd),
            "DS" | "DEBIASED-SPECTRAL" | "DEBIASEDSPECTRAL" => Some(Method::DebiasedSpectral),
            "DD" | "DIAGONAL-DELETION" | "DIAGONALDELETION" => Some(Method::DiagonalDeletion),
            "O" | "ORACLE" => Some(Method::Oracle),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.short_name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Method::parse(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown method name `{raw}`")))
    }
}

/// Solver settings shared by all estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Cap on Lloyd iterations; `None` selects the default cap
    /// `max(3, ceil(ln n1 / (2 ln 2) - 3/2) + 1, ceil(log2 n1))`.
    pub lloyd_max_iters: Option<usize>,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lloyd_max_iters: None,
            eig_tol: DEFAULT_TOL,
            eig_max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Smallest iteration count for which the sign recursion is guaranteed to
/// reach a fixed point from a weakly correct initializer.
pub fn lloyd_iteration_floor(n1: usize) -> usize {
    let bound = (n1 as f64).ln() / (2.0 * 2.0f64.ln()) - 1.5;
    let floor = bound.ceil();
    if floor < 0.0 {
        1
    } else {
        floor as usize + 1
    }
}

impl EstimatorConfig {
    /// Resolved Lloyd iteration cap for a given instance size.
    pub fn lloyd_cap(&self, n1: usize) -> Result<usize, EstimatorError> {
        let floor = lloyd_iteration_floor(n1);
        match self.lloyd_max_iters {
            Some(cap) if cap < floor => Err(EstimatorError::IterationFloor {
                got: cap,
                floor,
                n1,
            }),
            Some(cap) => Ok(cap),
            None => Ok(floor.max(3).max((n1 as f64).log2().ceil() as usize)),
        }
    }
}

/// Estimated labels plus bookkeeping. The loss slot stays empty until a
/// caller with ground truth fills it via [`RecoveryOutcome::evaluate_against`].
#[derive(Clone, Debug)]
pub struct RecoveryOutcome {
    pub eta_hat: LabelVector,
    /// Changed-coordinate count per Lloyd iteration; empty for non-iterative
    /// methods.
    pub lloyd_trace: Vec<usize>,
    /// The eigensolver found the top gap numerically degenerate; the labels
    /// are still returned but may be rotation-ambiguous.
    pub degenerate_gap: bool,
    pub evaluation: Option<RecoveryClass>,
}

impl RecoveryOutcome {
    fn labels_only(eta_hat: LabelVector) -> Self {
        Self {
            eta_hat,
            lloyd_trace: Vec::new(),
            degenerate_gap: false,
            evaluation: None,
        }
    }

    pub fn evaluate_against(
        &mut self,
        truth: &LabelVector,
    ) -> Result<RecoveryClass, EstimatorError> {
        let class = recovery_class(truth, &self.eta_hat)?;
        self.evaluation = Some(class);
        Ok(class)
    }
}

/// Ground truth handed to the supervised procedures.
#[derive(Clone, Copy, Debug)]
pub struct TruthChannel<'a> {
    pub params: &'a BsbmParams,
    pub eta1: &'a LabelVector,
    pub eta2: &'a LabelVector,
}

fn sign_labels(v: &[f64]) -> LabelVector {
    LabelVector::from_signs(
        v.iter()
            .map(|&x| if x < 0.0 { -1 } else { SIGN_AT_ZERO })
            .collect(),
    )
    .expect("signs are +-1 by construction")
}

/// `p_hat = nnz(A) / (n1 n2)`, the mean of all entries.
pub fn estimate_p(a: &Biadjacency) -> f64 {
    a.nnz() as f64 / (a.n1() as f64 * a.n2() as f64)
}

/// Signs of the top eigenvector of any symmetric operator; the common core of
/// the spectral estimator and the test hooks that replace the operator with a
/// pure-signal surrogate.
pub fn spectral_from_op(
    op: &dyn SymOp,
    shift: f64,
    cfg: &EstimatorConfig,
    start: Vec<f64>,
) -> Result<RecoveryOutcome, EstimatorError> {
    let report = top_eigvec_from(op, shift, cfg.eig_tol, cfg.eig_max_iter, start)?;
    Ok(RecoveryOutcome::labels_only(sign_labels(
        &report.eigenvector,
    )))
}

/// Spectral procedure on the hollowed matrix: signs of the top eigenvector of
/// `H(A_hat A_hat^T)` with `A_hat = A - p_hat 1 1^T`.
pub fn spectral_estimator(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    stream: RngStream,
) -> Result<RecoveryOutcome, EstimatorError> {
    let start = random_unit_vector(a.n1(), &mut stream.rng());
    spectral_estimator_with_start(a, cfg, start)
}

pub fn spectral_estimator_with_start(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    start: Vec<f64>,
) -> Result<RecoveryOutcome, EstimatorError> {
    let op = HollowedGramOp::new(CenteredMatrix::new(a, estimate_p(a)));
    let shift = op.shift();
    spectral_from_op(&op, shift, cfg, start)
}

/// One run of the sign recursion `eta^{k+1} = sign(Op eta^k)` up to `cap`
/// iterations; returns the final labels and the per-iteration change counts.
pub fn lloyd_from_op(op: &dyn SymOp, init: &LabelVector, cap: usize) -> (LabelVector, Vec<usize>) {
    let mut current = init.clone();
    let mut trace = Vec::new();
    let mut image = vec![0.0; current.len()];
    for _ in 0..cap {
        op.apply(&current.to_f64(), &mut image);
        let next = sign_labels(&image);
        let changed = current
            .signs()
            .iter()
            .zip(next.signs())
            .filter(|(a, b)| a != b)
            .count();
        trace.push(changed);
        current = next;
        if changed == 0 {
            break;
        }
    }
    (current, trace)
}

/// Hollowed Lloyd's iterations from an explicit initializer.
pub fn lloyd_iterate(
    a: &Biadjacency,
    init: &LabelVector,
    cfg: &EstimatorConfig,
) -> Result<RecoveryOutcome, EstimatorError> {
    if init.len() != a.n1() {
        return Err(EstimatorError::InitLength {
            got: init.len(),
            expected: a.n1(),
        });
    }
    if a.nnz() == 0 {
        return Err(EstimatorError::DegenerateInput);
    }
    let cap = cfg.lloyd_cap(a.n1())?;
    let op = HollowedGramOp::new(CenteredMatrix::new(a, estimate_p(a)));
    let (eta_hat, trace) = lloyd_from_op(&op, init, cap);
    Ok(RecoveryOutcome {
        eta_hat,
        lloyd_trace: trace,
        degenerate_gap: false,
        evaluation: None,
    })
}

/// The headline estimator: spectral initialization followed by hollowed
/// Lloyd's iterations, sharing one operator.
pub fn hollowed_lloyd(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    stream: RngStream,
) -> Result<RecoveryOutcome, EstimatorError> {
    let cap = cfg.lloyd_cap(a.n1())?;
    let op = HollowedGramOp::new(CenteredMatrix::new(a, estimate_p(a)));
    let shift = op.shift();
    let start = random_unit_vector(a.n1(), &mut stream.rng());
    let init = spectral_from_op(&op, shift, cfg, start)?;
    let (eta_hat, trace) = lloyd_from_op(&op, &init.eta_hat, cap);
    Ok(RecoveryOutcome {
        eta_hat,
        lloyd_trace: trace,
        degenerate_gap: init.degenerate_gap,
        evaluation: None,
    })
}

fn second_vector_labels(
    op: &dyn SymOp,
    shift: f64,
    cfg: &EstimatorConfig,
    start_top: Vec<f64>,
    start_second: Vec<f64>,
) -> Result<RecoveryOutcome, EstimatorError> {
    let report = second_eigvec_from(
        op,
        shift,
        cfg.eig_tol,
        cfg.eig_max_iter,
        start_top,
        start_second,
    )?;
    let mut outcome = RecoveryOutcome::labels_only(sign_labels(&report.eigenvector));
    outcome.degenerate_gap = report.degenerate_gap;
    Ok(outcome)
}

fn two_starts(n: usize, stream: RngStream) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream.rng();
    (
        random_unit_vector(n, &mut rng),
        random_unit_vector(n, &mut rng),
    )
}

/// SVD baseline: signs of the second eigenvector of the raw Gram matrix
/// `A A^T`.
pub fn svd_estimator(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    stream: RngStream,
) -> Result<RecoveryOutcome, EstimatorError> {
    let (s1, s2) = two_starts(a.n1(), stream);
    svd_estimator_with_starts(a, cfg, s1, s2)
}

pub fn svd_estimator_with_starts(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    start_top: Vec<f64>,
    start_second: Vec<f64>,
) -> Result<RecoveryOutcome, EstimatorError> {
    let op = GramOp::plain(CenteredMatrix::new(a, 0.0));
    let shift = op.shift();
    second_vector_labels(&op, shift, cfg, start_top, start_second)
}

/// Debiased spectral baseline: second eigenvector of `A A^T - E(W W^T)`,
/// with the exact expected diagonal from the truth channel.
pub fn debiased_spectral(
    a: &Biadjacency,
    truth: TruthChannel<'_>,
    cfg: &EstimatorConfig,
    stream: RngStream,
) -> Result<RecoveryOutcome, EstimatorError> {
    let (s1, s2) = two_starts(a.n1(), stream);
    debiased_spectral_with_starts(a, truth, cfg, s1, s2)
}

pub fn debiased_spectral_with_starts(
    a: &Biadjacency,
    truth: TruthChannel<'_>,
    cfg: &EstimatorConfig,
    start_top: Vec<f64>,
    start_second: Vec<f64>,
) -> Result<RecoveryOutcome, EstimatorError> {
    let diag = expected_gram_diag(truth.params, truth.eta1, truth.eta2)?;
    let op = GramOp::debiased(CenteredMatrix::new(a, 0.0), diag);
    let shift = op.shift();
    second_vector_labels(&op, shift, cfg, start_top, start_second)
}

/// Diagonal-deletion baseline: second eigenvector of the hollowed,
/// uncentered Gram matrix `H(A A^T)`.
pub fn diagonal_deletion_svd(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    stream: RngStream,
) -> Result<RecoveryOutcome, EstimatorError> {
    let (s1, s2) = two_starts(a.n1(), stream);
    diagonal_deletion_svd_with_starts(a, cfg, s1, s2)
}

pub fn diagonal_deletion_svd_with_starts(
    a: &Biadjacency,
    cfg: &EstimatorConfig,
    start_top: Vec<f64>,
    start_second: Vec<f64>,
) -> Result<RecoveryOutcome, EstimatorError> {
    let op = HollowedGramOp::new(CenteredMatrix::new(a, 0.0));
    let shift = op.shift();
    second_vector_labels(&op, shift, cfg, start_top, start_second)
}

/// Supervised oracle: one sign iteration from the true labels with the true
/// centering, `sign(H(A_tilde A_tilde^T) eta1)`. Coordinate `i` is the
/// majority vote of all other vertices.
pub fn oracle_estimator(
    a: &Biadjacency,
    p_true: f64,
    eta1: &LabelVector,
) -> Result<RecoveryOutcome, EstimatorError> {
    if eta1.len() != a.n1() {
        return Err(EstimatorError::InitLength {
            got: eta1.len(),
            expected: a.n1(),
        });
    }
    let op = HollowedGramOp::new(CenteredMatrix::new(a, p_true));
    let mut image = vec![0.0; a.n1()];
    op.apply(&eta1.to_f64(), &mut image);
    Ok(RecoveryOutcome::labels_only(sign_labels(&image)))
}
