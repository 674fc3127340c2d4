//! Monte Carlo checks of the concentration and impossibility claims behind
//! the hollowed spectral method.
//!
//! Each check samples noise matrices `W = A - E(A)` at fixed labels, measures
//! spectral norms of the hollowed Gram `H(W W^T)` or the debiased Gram
//! `W W^T - E(W W^T)`, and compares the empirical statistics against closed
//! form bounds. Monte Carlo verdicts always carry an explicit Hoeffding
//! confidence slack rather than bare point comparisons.

use crate::engine::{top_eigvec, DenseSymOp, SymOp};
use crate::estimators::oracle_estimator;
use crate::model::{
    expected_gram_diag, sample_biadjacency_with_labels, Biadjacency, BsbmParams, LabelVector,
    ModelError,
};
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("dense norm computations are capped at n = 2000 (got {0})")]
    SizeCap(usize),
    #[error("need at least {min} samples (got {got})")]
    TooFewSamples { got: usize, min: usize },
    #[error("binomial tail requires n p < t < n (n = {n}, p = {p}, t = {t})")]
    TailRange { n: usize, p: f64, t: f64 },
    #[error("binomial lower bound {bound} exceeds the exact tail {exact}")]
    BoundViolated { bound: f64, exact: f64 },
    #[error("p = {p} violates the bound precondition p >= {min} (c = {c})")]
    EdgeRateFloor { p: f64, min: f64, c: f64 },
    #[error("oracle impossibility sweep requires even n1 for perfect balance (got {0})")]
    OddSize(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("degenerate eigensolve during a norm computation")]
    NormFailure,
}

/// Inputs of the specialized matrix Bernstein tail bound for
/// `||sum_j H(W_j W_j^T)||`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BernsteinParams {
    pub n1: usize,
    pub n2: usize,
    pub p: f64,
    pub t: f64,
}

impl BernsteinParams {
    /// `n1 * exp(-t^2 / (8 n1 n2 p^2 + 6 (1 + 2 n1 p) t))`.
    pub fn bound(&self) -> f64 {
        if self.t <= 0.0 {
            return self.n1 as f64;
        }
        let n1 = self.n1 as f64;
        let n2 = self.n2 as f64;
        let denom = 8.0 * n1 * n2 * self.p * self.p + 6.0 * (1.0 + 2.0 * n1 * self.p) * self.t;
        n1 * (-self.t * self.t / denom).exp()
    }
}

/// One point of an empirical tail versus its bound.
#[derive(Clone, Copy, Debug)]
pub struct TailEstimate {
    pub t: f64,
    pub empirical_prob: f64,
    pub bound: f64,
    pub slack: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Two-sided 99% Hoeffding slack for an empirical probability over `samples`
/// draws: `sqrt(ln(2 / 0.01) / (2 samples))`.
pub fn hoeffding_slack(samples: usize) -> f64 {
    ((2.0 / 0.01f64).ln() / (2.0 * samples as f64)).sqrt()
}

const DENSE_CAP: usize = 2000;

/// Largest singular value of a dense symmetric matrix, computed with the
/// engine's power iteration on the Gershgorin-shifted operator (both signs).
pub fn spectral_norm_dense(m: &DenseSymOp) -> Result<f64, BenchError> {
    if m.dim() > DENSE_CAP {
        return Err(BenchError::SizeCap(m.dim()));
    }
    let shift = m.gershgorin_shift();
    if shift == 0.0 {
        return Ok(0.0);
    }
    // A fixed internal stream keeps the norm a pure function of its input.
    let stream = RngStream::new(0x6e6f_726d, (0, 0));
    let lambda_max = top_eigvec(m, shift, 1e-9, 50_000, stream)
        .map_err(|_| BenchError::NormFailure)?
        .eigenvalue;
    let neg = m.negated();
    let lambda_min_neg = top_eigvec(&neg, shift, 1e-9, 50_000, stream.fork(1))
        .map_err(|_| BenchError::NormFailure)?
        .eigenvalue;
    Ok(lambda_max.max(lambda_min_neg).max(0.0))
}

/// Fixed-label noise sampler: draws `A` conditionally on the labels and
/// assembles the dense `W W^T` without materializing `W`, via
/// `W W^T = A A^T - A Q^T - Q A^T + Q Q^T` with `Q = E(A)`.
struct NoiseGramSampler<'a> {
    params: &'a BsbmParams,
    eta1: &'a LabelVector,
    eta2: &'a LabelVector,
    m_plus: f64,
    m_minus: f64,
}

impl<'a> NoiseGramSampler<'a> {
    fn new(params: &'a BsbmParams, eta1: &'a LabelVector, eta2: &'a LabelVector) -> Self {
        let m_plus = eta2.plus_count() as f64;
        let m_minus = (eta2.len() - eta2.plus_count()) as f64;
        Self {
            params,
            eta1,
            eta2,
            m_plus,
            m_minus,
        }
    }

    /// Rate of row `i` against a column of class `class`.
    fn rate(&self, i: usize, class: i8) -> f64 {
        if self.eta1.get(i) == class {
            self.params.same_rate()
        } else {
            self.params.cross_rate()
        }
    }

    fn sample(&self, stream: RngStream) -> Result<DenseSymOp, BenchError> {
        let a =
            sample_biadjacency_with_labels(self.params, self.eta1, self.eta2, &mut stream.rng())?;
        Ok(self.noise_gram(&a))
    }

    fn noise_gram(&self, a: &Biadjacency) -> DenseSymOp {
        let n1 = a.n1();
        let n2 = a.n2();
        // Per-row counts of nonzeros in plus-labeled columns.
        let plus_counts: Vec<f64> = (0..n1)
            .map(|i| {
                a.row(i)
                    .iter()
                    .filter(|&&j| self.eta2.get(j as usize) == 1)
                    .count() as f64
            })
            .collect();
        let mut data = vec![0.0; n1 * n1];
        // Co-occurrence counts A A^T through a stamp array.
        let mut stamp = vec![u32::MAX; n2];
        for i in 0..n1 {
            for &j in a.row(i) {
                stamp[j as usize] = i as u32;
            }
            for k in i..n1 {
                let co = a
                    .row(k)
                    .iter()
                    .filter(|&&j| stamp[j as usize] == i as u32)
                    .count() as f64;
                data[i * n1 + k] = co;
            }
        }
        for i in 0..n1 {
            let deg_i = a.degree(i) as f64;
            let cp_i = plus_counts[i];
            let cm_i = deg_i - cp_i;
            let (qi_p, qi_m) = (self.rate(i, 1), self.rate(i, -1));
            for k in i..n1 {
                let deg_k = a.degree(k) as f64;
                let cp_k = plus_counts[k];
                let cm_k = deg_k - cp_k;
                let (qk_p, qk_m) = (self.rate(k, 1), self.rate(k, -1));
                let aq = cp_i * qk_p + cm_i * qk_m;
                let qa = cp_k * qi_p + cm_k * qi_m;
                let qq = self.m_plus * qi_p * qk_p + self.m_minus * qi_m * qk_m;
                let w = data[i * n1 + k] - aq - qa + qq;
                data[i * n1 + k] = w;
                data[k * n1 + i] = w;
            }
        }
        DenseSymOp::new(n1, data)
    }
}

fn hollowed(m: &DenseSymOp) -> DenseSymOp {
    let n = m.dim();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(if i == j { 0.0 } else { m.entry(i, j) });
        }
    }
    DenseSymOp::new(n, data)
}

fn diag_subtracted(m: &DenseSymOp, diag: &[f64]) -> DenseSymOp {
    let n = m.dim();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let e = m.entry(i, j);
            data.push(if i == j { e - diag[i] } else { e });
        }
    }
    DenseSymOp::new(n, data)
}

/// Draws the fixed labels used by a batch of noise samples.
fn fixed_labels(params: &BsbmParams, stream: RngStream) -> (LabelVector, LabelVector) {
    let (_, eta1, eta2) = crate::model::sample_bsbm(params, stream);
    (eta1, eta2)
}

/// Empirical tail of `||H(W W^T)||` against the specialized Bernstein bound,
/// one estimate per grid value of `t`. PASS means the empirical tail stays
/// below bound + slack.
pub fn bernstein_tail_check(
    params: &BsbmParams,
    t_grid: &[f64],
    samples: usize,
    stream: RngStream,
) -> Result<Vec<TailEstimate>, BenchError> {
    if samples < 1000 {
        return Err(BenchError::TooFewSamples {
            got: samples,
            min: 1000,
        });
    }
    let norms = hollowed_noise_norms(params, samples, stream)?;
    let slack = hoeffding_slack(samples);
    Ok(t_grid
        .iter()
        .map(|&t| {
            let empirical = norms.iter().filter(|&&x| x >= t).count() as f64 / samples as f64;
            let bound = BernsteinParams {
                n1: params.n1(),
                n2: params.n2(),
                p: params.p(),
                t,
            }
            .bound();
            TailEstimate {
                t,
                empirical_prob: empirical,
                bound,
                slack,
                samples,
                pass: empirical <= bound + slack,
            }
        })
        .collect())
}

fn hollowed_noise_norms(
    params: &BsbmParams,
    samples: usize,
    stream: RngStream,
) -> Result<Vec<f64>, BenchError> {
    let (eta1, eta2) = fixed_labels(params, stream.fork(0));
    let sampler = NoiseGramSampler::new(params, &eta1, &eta2);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let gram = sampler.sample(stream.fork(1 + i as u64))?;
            spectral_norm_dense(&hollowed(&gram))
        })
        .collect()
}

/// A default `t` grid for [`bernstein_tail_check`]: `points` equally spaced
/// values from 0 to the `t` at which the bound decays to `tail_floor`.
pub fn default_t_grid(params: &BsbmParams, points: usize, tail_floor: f64) -> Vec<f64> {
    let n1 = params.n1() as f64;
    let n2 = params.n2() as f64;
    let p = params.p();
    let l = (n1 / tail_floor).ln();
    let r = 3.0 * (1.0 + 2.0 * n1 * p);
    let t_max = r * l + (r * r * l * l + 8.0 * n1 * n2 * p * p * l).sqrt();
    (0..points)
        .map(|k| t_max * k as f64 / (points - 1) as f64)
        .collect()
}

/// Second-moment report for the hollowed noise Gram matrix.
#[derive(Clone, Copy, Debug)]
pub struct SecondMomentReport {
    /// Monte Carlo estimate of `E ||H(W W^T)||^2`.
    pub empirical: f64,
    /// `(1 + n1 ln n1 / n2) n1 n2 p^2 ln n1`, the bound modulo its constant.
    pub reference: f64,
    /// `empirical / reference`: the implied constant. No pass threshold is
    /// fixed; stability across a size sweep is what the tests check.
    pub ratio: f64,
}

/// Estimates `E ||H(W W^T)||^2` and the reference scale it should track.
/// `c_min` is the constant in the precondition
/// `p >= c_min * max(sqrt(ln n1 / (n1 n2)), ln n1 / n2)`.
pub fn hollow_second_moment(
    params: &BsbmParams,
    c_min: f64,
    samples: usize,
    stream: RngStream,
) -> Result<SecondMomentReport, BenchError> {
    let n1 = params.n1() as f64;
    let n2 = params.n2() as f64;
    let ln_n1 = n1.ln();
    let floor = c_min * ((ln_n1 / (n1 * n2)).sqrt()).max(ln_n1 / n2);
    if params.p() < floor {
        return Err(BenchError::EdgeRateFloor {
            p: params.p(),
            min: floor,
            c: c_min,
        });
    }
    let norms = hollowed_noise_norms(params, samples, stream)?;
    let empirical = norms.iter().map(|x| x * x).sum::<f64>() / samples as f64;
    let reference = (1.0 + n1 * ln_n1 / n2) * n1 * n2 * params.p() * params.p() * ln_n1;
    Ok(SecondMomentReport {
        empirical,
        reference,
        ratio: empirical / reference,
    })
}

/// Comparison of hollowing against debiasing, plus the per-row variance that
/// drives the lower bound for the debiased matrix.
#[derive(Clone, Copy, Debug)]
pub struct HollowVsDebias {
    /// Monte Carlo `E ||H(W W^T)||^2` and its standard error.
    pub hollow_sq_mean: f64,
    pub hollow_sq_se: f64,
    /// Monte Carlo `E ||W W^T - E(W W^T)||^2` and its standard error.
    pub debias_sq_mean: f64,
    pub debias_sq_se: f64,
    /// Exact `Var(||X_1||^2)` of the first row, from the Bernoulli variances.
    pub row_var_exact: f64,
    /// The closed-form floor `(9/20) n2 p` valid for `2p <= 1/70`.
    pub row_var_lower: f64,
}

/// `Var(w^2) = q (1 - q) (1 - 2q)^2` for a centered Bernoulli(`q`) variable.
fn centered_bernoulli_sq_var(q: f64) -> f64 {
    q * (1.0 - q) * (1.0 - 2.0 * q) * (1.0 - 2.0 * q)
}

pub fn hollow_vs_debias(
    params: &BsbmParams,
    samples: usize,
    stream: RngStream,
) -> Result<HollowVsDebias, BenchError> {
    let (eta1, eta2) = fixed_labels(params, stream.fork(0));
    let diag = expected_gram_diag(params, &eta1, &eta2)?;
    let sampler = NoiseGramSampler::new(params, &eta1, &eta2);
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let gram = sampler.sample(stream.fork(1 + i as u64))?;
            let h = spectral_norm_dense(&hollowed(&gram))?;
            let d = spectral_norm_dense(&diag_subtracted(&gram, &diag))?;
            Ok::<_, BenchError>((h * h, d * d))
        })
        .collect::<Result<_, _>>()?;
    let n = samples as f64;
    let hollow_sq_mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let debias_sq_mean = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let hollow_sq_se = (pairs
        .iter()
        .map(|p| (p.0 - hollow_sq_mean).powi(2))
        .sum::<f64>()
        / (n * (n - 1.0)))
        .sqrt();
    let debias_sq_se = (pairs
        .iter()
        .map(|p| (p.1 - debias_sq_mean).powi(2))
        .sum::<f64>()
        / (n * (n - 1.0)))
        .sqrt();

    // Row 0 of W has n2 independent centered Bernoulli entries whose rates
    // depend on the label classes.
    let m_plus = eta2.plus_count() as f64;
    let m_minus = (eta2.len() - eta2.plus_count()) as f64;
    let (m_same, m_cross) = if eta1.get(0) == 1 {
        (m_plus, m_minus)
    } else {
        (m_minus, m_plus)
    };
    let row_var_exact = m_same * centered_bernoulli_sq_var(params.same_rate())
        + m_cross * centered_bernoulli_sq_var(params.cross_rate());
    Ok(HollowVsDebias {
        hollow_sq_mean,
        hollow_sq_se,
        debias_sq_mean,
        debias_sq_se,
        row_var_exact,
        row_var_lower: 0.45 * params.n2() as f64 * params.p(),
    })
}

/// Exact binomial upper tail `P(Bin(n, p) >= t)` next to the closed-form
/// lower bound `e^{-1/6} / sqrt(2 pi (t+1)) * exp(-(t+1) ln((t+1)/(n p)))`.
/// Returns `(exact_tail, lower_bound)` and fails loudly if the bound ever
/// exceeds the exact tail.
pub fn binomial_tail_lower(n: usize, p: f64, t: f64) -> Result<(f64, f64), BenchError> {
    let nf = n as f64;
    if !(nf * p < t && t < nf) {
        return Err(BenchError::TailRange { n, p, t });
    }
    let k0 = t.ceil() as usize;
    // P(X = k) by the multiplicative recurrence from k = 0.
    let mut term = (1.0 - p).powi(n as i32);
    let mut exact = 0.0;
    for k in 0..=n {
        if k >= k0 {
            exact += term;
        }
        if k < n {
            term *= (nf - k as f64) / (k as f64 + 1.0) * p / (1.0 - p);
        }
    }
    let bound = (-1.0 / 6.0f64).exp() / (2.0 * std::f64::consts::PI * (t + 1.0)).sqrt()
        * (-(t + 1.0) * ((t + 1.0) / (nf * p)).ln()).exp();
    if bound > exact {
        return Err(BenchError::BoundViolated { bound, exact });
    }
    Ok((exact, bound))
}

/// `c_delta = (50 ln(300 / (delta (2 - delta))))^{-1}`, the constant of the
/// oracle impossibility scale.
pub fn c_delta(delta: f64) -> f64 {
    1.0 / (50.0 * (300.0 / (delta * (2.0 - delta))).ln())
}

/// One point of the oracle impossibility sweep.
#[derive(Clone, Copy, Debug)]
pub struct OracleImpossibilityPoint {
    pub n1: usize,
    pub n2: usize,
    pub p: f64,
    /// Monte Carlo estimate of the expected misclassification count
    /// `sum_i P(eta~_i != eta_i)` (raw mismatches, no global flip).
    pub expected_misclassified: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Expected oracle misclassification counts at `p = p_scale * sqrt(c_delta *
/// ln n1 / (n1 n2))` with `n2 = n1 ln n1` (rounded to even) and perfectly
/// balanced communities. `p_scale = 1` sits on the impossibility scale;
/// larger factors probe the recovery side.
pub fn oracle_impossibility_sweep(
    n1_list: &[usize],
    delta: f64,
    samples: usize,
    stream: RngStream,
    p_scale: f64,
) -> Result<Vec<OracleImpossibilityPoint>, BenchError> {
    let c = c_delta(delta);
    n1_list
        .iter()
        .enumerate()
        .map(|(idx, &n1)| {
            if n1 % 2 != 0 {
                return Err(BenchError::OddSize(n1));
            }
            let ln_n1 = (n1 as f64).ln();
            // Perfect balance on both sides requires an even n2.
            let n2 = 2 * ((n1 as f64 * ln_n1 / 2.0).round() as usize).max(1);
            let p = p_scale * (c * ln_n1 / (n1 as f64 * n2 as f64)).sqrt();
            let params = BsbmParams::new(n1 / 2, n1 / 2, n2 / 2, n2 / 2, delta, p)?;
            let point_stream = stream.fork(idx as u64);
            let counts: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|s| {
                    let (a, eta1, _) =
                        crate::model::sample_bsbm(&params, point_stream.fork(1 + s as u64));
                    let out = oracle_estimator(&a, p, &eta1).expect("oracle on a valid instance");
                    Ok::<_, BenchError>(eta1.mismatches(&out.eta_hat)? as f64)
                })
                .collect::<Result<_, _>>()?;
            let mean = counts.iter().sum::<f64>() / samples as f64;
            let se = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>()
                / (samples as f64 * (samples as f64 - 1.0)))
                .sqrt();
            Ok(OracleImpossibilityPoint {
                n1,
                n2,
                p,
                expected_misclassified: mean,
                std_error: se,
                samples,
            })
        })
        .collect()
}

/// One row of the bench CSV output.
#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub check_name: String,
    pub config_json: String,
    /// The abscissa of the check: a tail threshold `t` or a size `n1`.
    pub x: f64,
    pub empirical: f64,
    pub bound_or_reference: f64,
    pub slack: f64,
    pub verdict: String,
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_bench_csv<W: Write>(records: &[BenchRecord], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "check_name,config_json,t_or_n1,empirical,bound_or_reference,slack,verdict"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            csv_quote(&r.check_name),
            csv_quote(&r.config_json),
            r.x,
            r.empirical,
            r.bound_or_reference,
            r.slack,
            r.verdict
        )?;
    }
    Ok(())
}
