//! The bipartite stochastic block model: parameters, labels, biadjacency
//! matrices and instance sampling.
//!
//! Two vertex sets `V1` (size `n1`) and `V2` (size `n2 >= n1`) carry hidden
//! labels in `{-1, +1}`. An edge between `i` in `V1` and `j` in `V2` appears
//! with probability `delta * p` when the labels agree and `(2 - delta) * p`
//! when they differ, independently over pairs.

use crate::rng::RngStream;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("community sizes must satisfy n1 >= 2 and n2 >= 2 (got n1 = {n1}, n2 = {n2})")]
    TooFewVertices { n1: usize, n2: usize },
    #[error("sizes must satisfy n1 <= n2 (got n1 = {n1}, n2 = {n2})")]
    SideOrder { n1: usize, n2: usize },
    #[error("delta must lie in the open interval (0, 2) (got {0})")]
    DeltaRange(f64),
    #[error("p must lie in the open interval (0, 1/2) (got {0})")]
    EdgeRate(f64),
    #[error("edge probability {name} = {value} must lie in (0, 1)")]
    RateBound { name: &'static str, value: f64 },
    #[error("imbalance gamma{side} must lie in [0, 1) (got {value})")]
    ImbalanceRange { side: u8, value: f64 },
    #[error("derived imbalance |n{side}+ - n{side}-|/n{side} = 1: one community is empty")]
    EmptyCommunity { side: u8 },
    #[error("experiment scale {name} must be positive (got {value})")]
    ScaleRange { name: &'static str, value: f64 },
    #[error("label entries must be -1 or +1 (found {0} at position {1})")]
    BadLabel(i8, usize),
    #[error("label vector has {got} positive entries, expected {expected}")]
    PlusCount { got: usize, expected: usize },
    #[error("label vector length {got} does not match expected {expected}")]
    LabelLength { got: usize, expected: usize },
    #[error("column index {col} out of range for n2 = {n2} (row {row})")]
    ColumnRange { row: usize, col: u32, n2: usize },
    #[error("row {row} is not strictly increasing at position {pos}")]
    RowOrder { row: usize, pos: usize },
    #[error("row count {got} does not match n1 = {expected}")]
    RowCount { got: usize, expected: usize },
}

/// Full parameterization of one model instance.
///
/// Community sizes are fixed counts (the paperless variant with independent
/// Rademacher labels is deliberately not implemented); only the positions of
/// the labels are random.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsbmParams {
    n1_plus: usize,
    n1_minus: usize,
    n2_plus: usize,
    n2_minus: usize,
    delta: f64,
    p: f64,
}

impl BsbmParams {
    pub fn new(
        n1_plus: usize,
        n1_minus: usize,
        n2_plus: usize,
        n2_minus: usize,
        delta: f64,
        p: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            n1_plus,
            n1_minus,
            n2_plus,
            n2_minus,
            delta,
            p,
        };
        params.validate()?;
        Ok(params)
    }

    /// Bypasses all range validation. Intended for degenerate test
    /// configurations such as `p = 0`, where the sampler must produce an
    /// empty graph.
    pub fn new_unchecked(
        n1_plus: usize,
        n1_minus: usize,
        n2_plus: usize,
        n2_minus: usize,
        delta: f64,
        p: f64,
    ) -> Self {
        Self {
            n1_plus,
            n1_minus,
            n2_plus,
            n2_minus,
            delta,
            p,
        }
    }

    /// Builds parameters from explicit set sizes and imbalance targets. The
    /// plus-community gets `ceil((1 + gamma) * n / 2)` vertices.
    pub fn with_imbalance(
        n1: usize,
        n2: usize,
        gamma1: f64,
        gamma2: f64,
        delta: f64,
        p: f64,
    ) -> Result<Self, ModelError> {
        for (side, gamma) in [(1u8, gamma1), (2u8, gamma2)] {
            if !(0.0..1.0).contains(&gamma) {
                return Err(ModelError::ImbalanceRange { side, value: gamma });
            }
        }
        let n1_plus = plus_size(n1, gamma1);
        let n2_plus = plus_size(n2, gamma2);
        Self::new(n1_plus, n1 - n1_plus, n2_plus, n2 - n2_plus, delta, p)
    }

    /// Derives parameters from the experiment scales `a` and `b`, using
    /// `p = sqrt(a) / n1` and `n2 = round(n1 * ln(n1) / b)`.
    pub fn from_experiment(
        n1: usize,
        gamma1: f64,
        gamma2: f64,
        delta: f64,
        a: f64,
        b: f64,
    ) -> Result<Self, ModelError> {
        if !(a > 0.0) {
            return Err(ModelError::ScaleRange {
                name: "a",
                value: a,
            });
        }
        if !(b > 0.0) {
            return Err(ModelError::ScaleRange {
                name: "b",
                value: b,
            });
        }
        if n1 < 2 {
            return Err(ModelError::TooFewVertices { n1, n2: n1 });
        }
        let p = a.sqrt() / n1 as f64;
        let n2 = (n1 as f64 * (n1 as f64).ln() / b).round() as usize;
        Self::with_imbalance(n1, n2, gamma1, gamma2, delta, p)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let (n1, n2) = (self.n1(), self.n2());
        if n1 < 2 || n2 < 2 {
            return Err(ModelError::TooFewVertices { n1, n2 });
        }
        if n1 > n2 {
            return Err(ModelError::SideOrder { n1, n2 });
        }
        if !(self.delta > 0.0 && self.delta < 2.0) {
            return Err(ModelError::DeltaRange(self.delta));
        }
        if !(self.p > 0.0 && self.p < 0.5) {
            return Err(ModelError::EdgeRate(self.p));
        }
        let same = self.same_rate();
        if !(same > 0.0 && same < 1.0) {
            return Err(ModelError::RateBound {
                name: "delta * p",
                value: same,
            });
        }
        let cross = self.cross_rate();
        if !(cross > 0.0 && cross < 1.0) {
            return Err(ModelError::RateBound {
                name: "(2 - delta) * p",
                value: cross,
            });
        }
        if self.n1_plus == 0 || self.n1_minus == 0 {
            return Err(ModelError::EmptyCommunity { side: 1 });
        }
        if self.n2_plus == 0 || self.n2_minus == 0 {
            return Err(ModelError::EmptyCommunity { side: 2 });
        }
        Ok(())
    }

    pub fn n1(&self) -> usize {
        self.n1_plus + self.n1_minus
    }

    pub fn n2(&self) -> usize {
        self.n2_plus + self.n2_minus
    }

    pub fn n1_plus(&self) -> usize {
        self.n1_plus
    }

    pub fn n1_minus(&self) -> usize {
        self.n1_minus
    }

    pub fn n2_plus(&self) -> usize {
        self.n2_plus
    }

    pub fn n2_minus(&self) -> usize {
        self.n2_minus
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Edge probability between equally labeled vertices.
    pub fn same_rate(&self) -> f64 {
        self.delta * self.p
    }

    /// Edge probability between oppositely labeled vertices.
    pub fn cross_rate(&self) -> f64 {
        (2.0 - self.delta) * self.p
    }

    pub fn gamma1(&self) -> f64 {
        imbalance(self.n1_plus, self.n1_minus)
    }

    pub fn gamma2(&self) -> f64 {
        imbalance(self.n2_plus, self.n2_minus)
    }
}

fn plus_size(n: usize, gamma: f64) -> usize {
    ((1.0 + gamma) * n as f64 / 2.0).ceil() as usize
}

fn imbalance(plus: usize, minus: usize) -> f64 {
    (plus as f64 - minus as f64).abs() / (plus + minus) as f64
}

/// A `{-1, +1}` assignment for one vertex set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn from_signs(signs: Vec<i8>) -> Result<Self, ModelError> {
        for (i, &s) in signs.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(ModelError::BadLabel(s, i));
            }
        }
        Ok(Self(signs))
    }

    /// Validates the declared plus-community size on top of sign validity.
    pub fn with_plus_count(signs: Vec<i8>, plus: usize) -> Result<Self, ModelError> {
        let v = Self::from_signs(signs)?;
        if v.plus_count() != plus {
            return Err(ModelError::PlusCount {
                got: v.plus_count(),
                expected: plus,
            });
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn plus_count(&self) -> usize {
        self.0.iter().filter(|&&s| s == 1).count()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| f64::from(s)).collect()
    }

    /// Number of positions where the two vectors disagree.
    pub fn mismatches(&self, other: &Self) -> Result<usize, ModelError> {
        if self.len() != other.len() {
            return Err(ModelError::LabelLength {
                got: other.len(),
                expected: self.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }
}

/// Sparse 0/1 biadjacency matrix in row-major compressed form. All stored
/// entries are ones; per-row column lists are strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Biadjacency {
    n1: usize,
    n2: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
}

impl Biadjacency {
    /// Builds from per-row column lists. Rows are sorted here; duplicate
    /// entries are rejected.
    pub fn from_rows(n1: usize, n2: usize, rows: Vec<Vec<u32>>) -> Result<Self, ModelError> {
        if rows.len() != n1 {
            return Err(ModelError::RowCount {
                got: rows.len(),
                expected: n1,
            });
        }
        let mut offsets = Vec::with_capacity(n1 + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            for (pos, &c) in row.iter().enumerate() {
                if c as usize >= n2 {
                    return Err(ModelError::ColumnRange { row: i, col: c, n2 });
                }
                if pos > 0 && row[pos - 1] >= c {
                    return Err(ModelError::RowOrder { row: i, pos });
                }
            }
            cols.extend_from_slice(&row);
            offsets.push(cols.len());
        }
        Ok(Self {
            n1,
            n2,
            offsets,
            cols,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n1).map(|i| self.row(i))
    }

    /// Per-column nonzero counts.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n2];
        for &c in &self.cols {
            counts[c as usize] += 1;
        }
        counts
    }

    /// `out = A v` with `v` of length `n2`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n2);
        assert_eq!(out.len(), self.n1);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().map(|&c| v[c as usize]).sum();
        }
    }

    /// `out = A^T u` with `u` of length `n1`.
    pub fn matvec_t(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.n1);
        assert_eq!(out.len(), self.n2);
        out.fill(0.0);
        for i in 0..self.n1 {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            for &c in self.row(i) {
                out[c as usize] += ui;
            }
        }
    }
}

/// Uniformly shuffled label vector with exactly `plus` entries equal to `+1`.
fn sample_labels<R: Rng>(n: usize, plus: usize, rng: &mut R) -> LabelVector {
    let mut signs = vec![1i8; n];
    for s in signs.iter_mut().skip(plus) {
        *s = -1;
    }
    signs.shuffle(rng);
    LabelVector(signs)
}

/// Picks a Bernoulli(`q`) subset of `cols` by geometric skipping, preserving
/// order.
fn bernoulli_subset<R: Rng>(cols: &[u32], q: f64, rng: &mut R) -> Vec<u32> {
    if q <= 0.0 || cols.is_empty() {
        return Vec::new();
    }
    if q >= 1.0 {
        return cols.to_vec();
    }
    let skip = Geometric::new(q).expect("valid Bernoulli rate");
    let mut picked = Vec::new();
    let mut idx = skip.sample(rng) as usize;
    while idx < cols.len() {
        picked.push(cols[idx]);
        idx = match idx.checked_add(1 + skip.sample(rng) as usize) {
            Some(next) => next,
            None => break,
        };
    }
    picked
}

fn merge_sorted(a: Vec<u32>, b: Vec<u32>) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        if a[ia] < b[ib] {
            out.push(a[ia]);
            ia += 1;
        } else {
            out.push(b[ib]);
            ib += 1;
        }
    }
    out.extend_from_slice(&a[ia..]);
    out.extend_from_slice(&b[ib..]);
    out
}

/// Samples the biadjacency matrix conditionally on fixed label vectors.
pub fn sample_biadjacency_with_labels(
    params: &BsbmParams,
    eta1: &LabelVector,
    eta2: &LabelVector,
    rng: &mut impl Rng,
) -> Result<Biadjacency, ModelError> {
    check_labels(params, eta1, eta2)?;
    let mut plus_cols = Vec::with_capacity(eta2.plus_count());
    let mut minus_cols = Vec::with_capacity(eta2.len() - eta2.plus_count());
    for (j, &s) in eta2.signs().iter().enumerate() {
        if s == 1 {
            plus_cols.push(j as u32);
        } else {
            minus_cols.push(j as u32);
        }
    }
    let same = params.same_rate();
    let cross = params.cross_rate();
    let mut rows = Vec::with_capacity(params.n1());
    for i in 0..params.n1() {
        let (same_cols, cross_cols) = if eta1.get(i) == 1 {
            (&plus_cols, &minus_cols)
        } else {
            (&minus_cols, &plus_cols)
        };
        let picked_same = bernoulli_subset(same_cols, same, rng);
        let picked_cross = bernoulli_subset(cross_cols, cross, rng);
        rows.push(merge_sorted(picked_same, picked_cross));
    }
    Biadjacency::from_rows(params.n1(), params.n2(), rows)
}

/// Samples one full instance: labels for both sides, then the matrix.
pub fn sample_bsbm(
    params: &BsbmParams,
    stream: RngStream,
) -> (Biadjacency, LabelVector, LabelVector) {
    let mut rng = stream.rng();
    let eta1 = sample_labels(params.n1(), params.n1_plus, &mut rng);
    let eta2 = sample_labels(params.n2(), params.n2_plus, &mut rng);
    let a = sample_biadjacency_with_labels(params, &eta1, &eta2, &mut rng)
        .expect("sampled labels are consistent with params");
    (a, eta1, eta2)
}

fn check_labels(
    params: &BsbmParams,
    eta1: &LabelVector,
    eta2: &LabelVector,
) -> Result<(), ModelError> {
    if eta1.len() != params.n1() {
        return Err(ModelError::LabelLength {
            got: eta1.len(),
            expected: params.n1(),
        });
    }
    if eta2.len() != params.n2() {
        return Err(ModelError::LabelLength {
            got: eta2.len(),
            expected: params.n2(),
        });
    }
    if eta1.plus_count() != params.n1_plus {
        return Err(ModelError::PlusCount {
            got: eta1.plus_count(),
            expected: params.n1_plus,
        });
    }
    if eta2.plus_count() != params.n2_plus {
        return Err(ModelError::PlusCount {
            got: eta2.plus_count(),
            expected: params.n2_plus,
        });
    }
    Ok(())
}

/// Diagonal of `E(W W^T)`: entry `i` equals `sum_j q_ij (1 - q_ij)` where
/// `q_ij` is the edge probability of the pair `(i, j)`. This is the exact
/// debiasing matrix used by the debiased spectral baseline.
pub fn expected_gram_diag(
    params: &BsbmParams,
    eta1: &LabelVector,
    eta2: &LabelVector,
) -> Result<Vec<f64>, ModelError> {
    check_labels(params, eta1, eta2)?;
    let same = params.same_rate();
    let cross = params.cross_rate();
    let var_same = same * (1.0 - same);
    let var_cross = cross * (1.0 - cross);
    let m_plus = eta2.plus_count() as f64;
    let m_minus = (eta2.len() - eta2.plus_count()) as f64;
    Ok(eta1
        .signs()
        .iter()
        .map(|&s| {
            let (m_same, m_cross) = if s == 1 {
                (m_plus, m_minus)
            } else {
                (m_minus, m_plus)
            };
            m_same * var_same + m_cross * var_cross
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_parameterization_matches_hand_computation() {
        // n2 = round(300 ln 300 / 5) = 342, n2_plus = ceil(1.5 * 342 / 2) = 257.
        let p = BsbmParams::from_experiment(300, 0.0, 0.5, 0.5, 1.0, 5.0).unwrap();
        assert!((p.p() - 1.0 / 300.0).abs() < 1e-15);
        assert_eq!(p.n2(), 342);
        assert_eq!(p.n2_plus(), 257);
        assert_eq!(p.n1_plus(), 150);
        assert_eq!(p.n1_minus(), 150);
    }

    #[test]
    fn boundary_edge_rate_is_rejected() {
        // p = sqrt(4)/4 = 0.5 sits exactly on the open boundary.
        let err = BsbmParams::from_experiment(4, 0.0, 0.0, 1.0, 4.0, 4.0_f64.ln()).unwrap_err();
        assert_eq!(err, ModelError::EdgeRate(0.5));
    }

    #[test]
    fn imbalance_out_of_range_is_rejected() {
        let err = BsbmParams::from_experiment(10, 1.0, 0.0, 0.5, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, ModelError::ImbalanceRange { side: 1, .. }));
    }

    #[test]
    fn side_order_is_enforced() {
        // b = 9 gives n2 = round(100 ln 100 / 9) = 51 < n1.
        let err = BsbmParams::from_experiment(100, 0.0, 0.0, 0.5, 1.0, 9.0).unwrap_err();
        assert!(matches!(err, ModelError::SideOrder { .. }));
    }

    #[test]
    fn zero_rate_hook_yields_zero_matrix() {
        let params = BsbmParams::new_unchecked(3, 3, 5, 5, 0.5, 0.0);
        let (a, eta1, eta2) = sample_bsbm(&params, RngStream::new(1, (0, 0)));
        assert_eq!(a.nnz(), 0);
        assert_eq!(eta1.len(), 6);
        assert_eq!(eta2.len(), 10);
    }

    #[test]
    fn sampled_labels_have_declared_plus_counts() {
        let params = BsbmParams::new(3, 7, 12, 8, 0.5, 0.1).unwrap();
        for seed in 0..20 {
            let (a, eta1, eta2) = sample_bsbm(&params, RngStream::new(seed, (0, 0)));
            assert_eq!(eta1.plus_count(), 3);
            assert_eq!(eta2.plus_count(), 12);
            for i in 0..a.n1() {
                let row = a.row(i);
                for w in row.windows(2) {
                    assert!(w[0] < w[1]);
                }
                if let Some(&last) = row.last() {
                    assert!((last as usize) < a.n2());
                }
            }
        }
    }

    #[test]
    fn empirical_same_label_rate_matches_bernoulli_mean() {
        // delta * p = 0.05; pool enough same-label pairs for a 3-sigma band.
        let params = BsbmParams::new(25, 25, 100, 100, 0.5, 0.1).unwrap();
        let mut same_pairs = 0usize;
        let mut same_edges = 0usize;
        let mut seed = 0;
        while same_pairs < 100_000 {
            let (a, eta1, eta2) = sample_bsbm(&params, RngStream::new(99, (seed, 0)));
            for i in 0..a.n1() {
                let li = eta1.get(i);
                same_pairs += eta2.signs().iter().filter(|&&s| s == li).count();
                same_edges += a
                    .row(i)
                    .iter()
                    .filter(|&&j| eta2.get(j as usize) == li)
                    .count();
            }
            seed += 1;
        }
        let rate = same_edges as f64 / same_pairs as f64;
        let band = 3.0 * (0.05 * 0.95 / same_pairs as f64).sqrt();
        assert!(
            (rate - 0.05).abs() <= band,
            "rate {rate} outside 0.05 +- {band}"
        );
    }

    #[test]
    fn empirical_cross_label_rate_matches_bernoulli_mean() {
        let params = BsbmParams::new(25, 25, 100, 100, 0.5, 0.1).unwrap();
        let mut pairs = 0usize;
        let mut edges = 0usize;
        for seed in 0..20 {
            let (a, eta1, eta2) = sample_bsbm(&params, RngStream::new(7, (seed, 0)));
            for i in 0..a.n1() {
                let li = eta1.get(i);
                pairs += eta2.signs().iter().filter(|&&s| s != li).count();
                edges += a
                    .row(i)
                    .iter()
                    .filter(|&&j| eta2.get(j as usize) != li)
                    .count();
            }
        }
        let rate = edges as f64 / pairs as f64;
        let expect = 1.5 * 0.1;
        let band = 3.0 * (expect * (1.0 - expect) / pairs as f64).sqrt();
        assert!(
            (rate - expect).abs() <= band,
            "rate {rate} outside {expect} +- {band}"
        );
    }

    #[test]
    fn mean_matrix_has_rank_two_structure() {
        // E(A) = p 11^T + (delta - 1) p eta1 eta2^T, averaged over samples at
        // fixed labels.
        let params = BsbmParams::new(4, 4, 10, 10, 0.6, 0.2).unwrap();
        let mut rng = RngStream::new(5, (0, 0)).rng();
        let eta1 = sample_labels(8, 4, &mut rng);
        let eta2 = sample_labels(20, 10, &mut rng);
        let reps = 40_000usize;
        let mut mean = vec![0.0f64; 8 * 20];
        for _ in 0..reps {
            let a = sample_biadjacency_with_labels(&params, &eta1, &eta2, &mut rng).unwrap();
            for i in 0..8 {
                for &c in a.row(i) {
                    mean[i * 20 + c as usize] += 1.0;
                }
            }
        }
        let p = params.p();
        for i in 0..8 {
            for j in 0..20 {
                let got = mean[i * 20 + j] / reps as f64;
                let expect = p
                    + (params.delta() - 1.0) * p * f64::from(eta1.get(i)) * f64::from(eta2.get(j));
                let band = 3.0 * (expect * (1.0 - expect) / reps as f64).sqrt();
                assert!(
                    (got - expect).abs() <= band,
                    "entry ({i},{j}): {got} vs {expect} +- {band}"
                );
            }
        }
    }

    #[test]
    fn expected_gram_diag_balanced_and_delta_one() {
        let params = BsbmParams::new(3, 3, 8, 8, 0.5, 0.1).unwrap();
        let (_, eta1, eta2) = sample_bsbm(&params, RngStream::new(3, (0, 0)));
        let diag = expected_gram_diag(&params, &eta1, &eta2).unwrap();
        let expect = 8.0 * (0.05 * 0.95 + 0.15 * 0.85);
        for d in &diag {
            assert!((d - expect).abs() < 1e-12);
        }

        let params = BsbmParams::new(3, 3, 9, 7, 1.0, 0.1).unwrap();
        let (_, eta1, eta2) = sample_bsbm(&params, RngStream::new(4, (0, 0)));
        let diag = expected_gram_diag(&params, &eta1, &eta2).unwrap();
        for d in &diag {
            assert!((d - 16.0 * 0.1 * 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_gram_diag_matches_direct_summation() {
        let params = BsbmParams::new(2, 1, 3, 1, 0.5, 0.2).unwrap();
        let mut rng = RngStream::new(11, (0, 0)).rng();
        let eta1 = sample_labels(3, 2, &mut rng);
        let eta2 = sample_labels(4, 3, &mut rng);
        let diag = expected_gram_diag(&params, &eta1, &eta2).unwrap();
        for i in 0..3 {
            let mut direct = 0.0;
            for j in 0..4 {
                let q = if eta1.get(i) == eta2.get(j) {
                    params.same_rate()
                } else {
                    params.cross_rate()
                };
                direct += q * (1.0 - q);
            }
            assert!((diag[i] - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn from_rows_rejects_bad_input() {
        assert!(matches!(
            Biadjacency::from_rows(2, 3, vec![vec![0, 3], vec![]]),
            Err(ModelError::ColumnRange { .. })
        ));
        assert!(matches!(
            Biadjacency::from_rows(2, 3, vec![vec![1, 1], vec![]]),
            Err(ModelError::RowOrder { .. })
        ));
        assert!(matches!(
            Biadjacency::from_rows(2, 3, vec![vec![0]]),
            Err(ModelError::RowCount { .. })
        ));
    }

    #[test]
    fn matvec_agrees_with_dense() {
        let a = Biadjacency::from_rows(3, 4, vec![vec![0, 2], vec![1, 2, 3], vec![]]).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0];
        let mut out = [0.0; 3];
        a.matvec(&v, &mut out);
        assert_eq!(out, [4.0, 9.0, 0.0]);
        let u = [1.0, -1.0, 5.0];
        let mut out_t = [0.0; 4];
        a.matvec_t(&u, &mut out_t);
        assert_eq!(out_t, [1.0, -1.0, 0.0, -1.0]);
    }
}
