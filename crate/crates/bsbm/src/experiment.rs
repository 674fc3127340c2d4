//! Grid experiments over the `(a, b)` parameterization.
//!
//! With `p = sqrt(a) / n1` and `n2 = round(n1 ln n1 / b)`, each grid point
//! samples instances, runs every selected method on the same instance (a
//! paired comparison), and aggregates exact-recovery frequencies and loss
//! statistics. Results are identical regardless of the worker thread count:
//! per-task RNG streams are keyed by `(master_seed, grid index, replication)`
//! and the reduction runs in a fixed order.

use crate::estimators::{
    debiased_spectral, diagonal_deletion_svd, hollowed_lloyd, oracle_estimator, spectral_estimator,
    svd_estimator, EstimatorConfig, EstimatorError, Method, TruthChannel,
};
use crate::model::{sample_bsbm, BsbmParams, ModelError};
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("grid field {field} is invalid: {reason}")]
    BadGrid { field: &'static str, reason: String },
    #[error("grid point (b = {b}, a = {a}) derives invalid model parameters: {source}")]
    BadPoint { b: f64, a: f64, source: ModelError },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("no phase transition found: success stayed flat over {decades} decades of a")]
    NoTransitionFound { decades: f64 },
    #[error("config parse error: {0}")]
    Config(String),
}

/// Configuration of one grid experiment. Field names double as the config
/// file keys.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub n1: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
    pub b_values: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
    pub a_points: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// When false, wall_ms is written as zero so that reruns are
    /// byte-identical; real timing is inherently not.
    #[serde(default = "default_timing")]
    pub timing: bool,
}

fn default_threads() -> usize {
    1
}

fn default_timing() -> bool {
    true
}

impl ExperimentGrid {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let grid: ExperimentGrid =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.a_points < 2 {
            return Err(ExperimentError::BadGrid {
                field: "a_points",
                reason: format!("need at least 2 (got {})", self.a_points),
            });
        }
        if self.a_min.is_nan() || self.a_max.is_nan() || self.a_min >= self.a_max {
            return Err(ExperimentError::BadGrid {
                field: "a_min",
                reason: format!(
                    "a_min = {} must be below a_max = {}",
                    self.a_min, self.a_max
                ),
            });
        }
        if self.a_min <= 0.0 {
            return Err(ExperimentError::BadGrid {
                field: "a_min",
                reason: "must be positive".into(),
            });
        }
        if self.replications == 0 {
            return Err(ExperimentError::BadGrid {
                field: "replications",
                reason: "need at least 1".into(),
            });
        }
        if self.b_values.is_empty() {
            return Err(ExperimentError::BadGrid {
                field: "b_values",
                reason: "need at least one value".into(),
            });
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::BadGrid {
                field: "methods",
                reason: "need at least one method".into(),
            });
        }
        // Every derived parameter set must be valid before any sampling.
        for &b in &self.b_values {
            for a in self.a_grid() {
                self.point_params(b, a)
                    .map_err(|source| ExperimentError::BadPoint { b, a, source })?;
            }
        }
        Ok(())
    }

    pub fn a_grid(&self) -> Vec<f64> {
        let k = self.a_points;
        (0..k)
            .map(|i| self.a_min + (self.a_max - self.a_min) * i as f64 / (k - 1) as f64)
            .collect()
    }

    pub fn point_params(&self, b: f64, a: f64) -> Result<BsbmParams, ModelError> {
        BsbmParams::from_experiment(self.n1, self.gamma1, self.gamma2, self.delta, a, b)
    }

    /// Methods in canonical output order, deduplicated.
    fn ordered_methods(&self) -> Vec<Method> {
        let mut ms = self.methods.clone();
        ms.sort();
        ms.dedup();
        ms
    }
}

/// Aggregated statistics for one `(b, a, method)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub b: f64,
    pub a: f64,
    pub p: f64,
    pub n2: usize,
    pub method: Method,
    pub replications: usize,
    pub exact_rate: f64,
    pub mean_fraction: f64,
    pub mean_lloyd_iters: f64,
    pub wall_ms: f64,
    /// Replications rejected as degenerate (empty graph); excluded from the
    /// averages, never fatal.
    pub degenerate: usize,
}

#[derive(Clone, Copy, Default)]
struct MethodRecord {
    exact: bool,
    fraction: f64,
    lloyd_iters: usize,
    wall_ms: f64,
    degenerate: bool,
}

fn run_method(
    method: Method,
    a: &crate::model::Biadjacency,
    truth: TruthChannel<'_>,
    cfg: &EstimatorConfig,
    stream: RngStream,
    timing: bool,
) -> Result<MethodRecord, EstimatorError> {
    let started = Instant::now();
    let outcome = match method {
        Method::Spectral => spectral_estimator(a, cfg, stream),
        Method::HollowedLloyd => hollowed_lloyd(a, cfg, stream),
        Method::Svd => svd_estimator(a, cfg, stream),
        Method::DebiasedSpectral => debiased_spectral(a, truth, cfg, stream),
        Method::DiagonalDeletion => diagonal_deletion_svd(a, cfg, stream),
        Method::Oracle => oracle_estimator(a, truth.params.p(), truth.eta1),
    };
    let wall_ms = if timing {
        started.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    match outcome {
        Ok(mut out) => {
            let class = out.evaluate_against(truth.eta1)?;
            Ok(MethodRecord {
                exact: class.exact,
                fraction: class.fraction,
                lloyd_iters: out.lloyd_trace.len(),
                wall_ms,
                degenerate: false,
            })
        }
        Err(EstimatorError::DegenerateInput) => Ok(MethodRecord {
            degenerate: true,
            wall_ms,
            ..MethodRecord::default()
        }),
        Err(e) => Err(e),
    }
}

/// Runs the full grid. Rows come out ordered by `b` (as listed), then `a`
/// ascending, then method in canonical order.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<ResultRow>, ExperimentError> {
    grid.validate()?;
    let methods = grid.ordered_methods();
    let a_grid = grid.a_grid();
    let cfg = EstimatorConfig::default();

    struct Point {
        b: f64,
        a: f64,
        params: BsbmParams,
    }
    let mut points = Vec::new();
    for &b in &grid.b_values {
        for &a in &a_grid {
            let params = grid
                .point_params(b, a)
                .map_err(|source| ExperimentError::BadPoint { b, a, source })?;
            points.push(Point { b, a, params });
        }
    }

    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|pi| (0..grid.replications).map(move |r| (pi, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.threads.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;

    // One ordered record per (task, method); the reduction below is
    // sequential, so the scheduling order cannot leak into the results.
    let records: Vec<Vec<MethodRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(pi, rep)| {
                let point = &points[pi];
                let base = RngStream::new(grid.master_seed, (pi as u64, rep as u64));
                let (a, eta1, eta2) = sample_bsbm(&point.params, base.fork(0));
                let truth = TruthChannel {
                    params: &point.params,
                    eta1: &eta1,
                    eta2: &eta2,
                };
                methods
                    .iter()
                    .enumerate()
                    .map(|(mi, &m)| {
                        run_method(m, &a, truth, &cfg, base.fork(1 + mi as u64), grid.timing)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut rows = Vec::with_capacity(points.len() * methods.len());
    for (pi, point) in points.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            let mut exact = 0usize;
            let mut fraction_sum = 0.0;
            let mut iters_sum = 0usize;
            let mut wall_sum = 0.0;
            let mut degenerate = 0usize;
            for rep in 0..grid.replications {
                let rec = &records[pi * grid.replications + rep][mi];
                wall_sum += rec.wall_ms;
                if rec.degenerate {
                    degenerate += 1;
                    continue;
                }
                exact += usize::from(rec.exact);
                fraction_sum += rec.fraction;
                iters_sum += rec.lloyd_iters;
            }
            let effective = grid.replications - degenerate;
            let denom = effective.max(1) as f64;
            rows.push(ResultRow {
                b: point.b,
                a: point.a,
                p: point.params.p(),
                n2: point.params.n2(),
                method,
                replications: grid.replications,
                exact_rate: exact as f64 / denom,
                mean_fraction: fraction_sum / denom,
                mean_lloyd_iters: iters_sum as f64 / denom,
                wall_ms: wall_sum,
                degenerate,
            });
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "b,a,p,n2,method,replications,exact_rate,mean_fraction,mean_lloyd_iters,wall_ms";

pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.b,
            r.a,
            r.p,
            r.n2,
            r.method,
            r.replications,
            r.exact_rate,
            r.mean_fraction,
            r.mean_lloyd_iters,
            r.wall_ms
        )?;
    }
    Ok(())
}

/// Success-rate probe for the bracket search.
fn probe_success(
    params: &BsbmParams,
    method: Method,
    replications: usize,
    stream: RngStream,
) -> Result<f64, ExperimentError> {
    let cfg = EstimatorConfig::default();
    let successes: Vec<bool> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let base = stream.fork(rep as u64);
            let (a, eta1, eta2) = sample_bsbm(params, base.fork(0));
            let truth = TruthChannel {
                params,
                eta1: &eta1,
                eta2: &eta2,
            };
            let rec = run_method(method, &a, truth, &cfg, base.fork(1), false)?;
            Ok::<_, EstimatorError>(!rec.degenerate && rec.exact)
        })
        .collect::<Result<_, _>>()?;
    Ok(successes.iter().filter(|&&s| s).count() as f64 / replications as f64)
}

const BRACKET_DECADES: f64 = 6.0;
const BRACKET_FACTOR: f64 = std::f64::consts::SQRT_2;

/// Geometric search along `a` for the band where `method`'s exact-recovery
/// rate crosses 0.05 and 0.95. The ladder climbs by factors of sqrt(2),
/// starting two decades below the theoretical transition scale `b v b^2` and
/// spanning six decades; probes whose derived parameters are invalid (p out
/// of range) end the ladder early.
pub fn pilot_bracket_for(
    method: Method,
    n1: usize,
    gammas: (f64, f64),
    delta: f64,
    b: f64,
    replications: usize,
    master_seed: u64,
) -> Result<(f64, f64), ExperimentError> {
    let a_start = 0.01 * b.max(b * b);
    let steps = (BRACKET_DECADES * 10f64.ln() / BRACKET_FACTOR.ln()).ceil() as usize;
    let mut lower: Option<f64> = None;
    let mut upper: Option<f64> = None;
    let mut last_low: Option<f64> = None;
    for k in 0..=steps {
        let a = a_start * BRACKET_FACTOR.powi(k as i32);
        let params = match BsbmParams::from_experiment(n1, gammas.0, gammas.1, delta, a, b) {
            Ok(p) => p,
            // The valid range of a is exhausted (p hit 1/2); stop probing.
            Err(_) => break,
        };
        let stream = RngStream::new(master_seed, (k as u64, 0));
        let rate = probe_success(&params, method, replications, stream)?;
        if rate <= 0.05 {
            last_low = Some(a);
        }
        if rate >= 0.95 {
            lower = last_low;
            upper = Some(a);
            break;
        }
    }
    match (lower, upper) {
        // 20% margin on both sides of the crossing band.
        (Some(lo), Some(hi)) => Ok((lo * 0.8, hi * 1.2)),
        _ => Err(ExperimentError::NoTransitionFound {
            decades: BRACKET_DECADES,
        }),
    }
}

/// The documented default bracket: the hollowed Lloyd's transition.
pub fn pilot_bracket(
    n1: usize,
    gammas: (f64, f64),
    delta: f64,
    b: f64,
    replications: usize,
    master_seed: u64,
) -> Result<(f64, f64), ExperimentError> {
    pilot_bracket_for(
        Method::HollowedLloyd,
        n1,
        gammas,
        delta,
        b,
        replications,
        master_seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> ExperimentGrid {
        ExperimentGrid {
            n1: 40,
            gamma1: 0.0,
            gamma2: 0.5,
            delta: 0.5,
            b_values: vec![0.5],
            a_min: 2.0,
            a_max: 30.0,
            a_points: 2,
            replications: 3,
            methods: vec![Method::HollowedLloyd, Method::Oracle],
            master_seed: 11,
            threads: 1,
            timing: false,
        }
    }

    #[test]
    fn single_point_run_is_reproducible() {
        let grid = tiny_grid();
        let rows1 = run_grid(&grid).unwrap();
        let rows2 = run_grid(&grid).unwrap();
        assert_eq!(rows1, rows2);
        assert_eq!(rows1.len(), 2 * 2);
        for r in &rows1 {
            assert!(r.exact_rate >= 0.0 && r.exact_rate <= 1.0);
            assert!(r.mean_fraction <= 0.5);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let grid = tiny_grid();
        let rows1 = run_grid(&grid).unwrap();
        let mut grid4 = grid.clone();
        grid4.threads = 4;
        let rows4 = run_grid(&grid4).unwrap();
        assert_eq!(rows1, rows4);
        let mut csv1 = Vec::new();
        write_csv(&rows1, &mut csv1).unwrap();
        let mut csv4 = Vec::new();
        write_csv(&rows4, &mut csv4).unwrap();
        assert_eq!(csv1, csv4);
    }

    #[test]
    fn rows_come_out_in_canonical_order() {
        let mut grid = tiny_grid();
        grid.methods = vec![Method::Oracle, Method::HollowedLloyd, Method::Oracle];
        let rows = run_grid(&grid).unwrap();
        let methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
        assert_eq!(
            methods,
            vec![
                Method::HollowedLloyd,
                Method::Oracle,
                Method::HollowedLloyd,
                Method::Oracle
            ]
        );
        assert!(rows[0].a < rows[2].a);
    }

    #[test]
    fn config_round_trip_and_validation() {
        let text = r#"
            n1 = 40
            gamma1 = 0.0
            gamma2 = 0.5
            delta = 0.5
            b_values = [0.5, 2.0]
            a_min = 1.0
            a_max = 20.0
            a_points = 3
            replications = 2
            methods = ["HL", "O", "svd"]
            master_seed = 7
        "#;
        let grid = ExperimentGrid::from_toml(text).unwrap();
        assert_eq!(grid.threads, 1);
        assert!(grid.timing);
        assert_eq!(grid.methods[2], Method::Svd);

        let bad = text.replace("\"svd\"", "\"nope\"");
        let err = ExperimentGrid::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("unknown method name"));

        let unknown_key = format!("{text}\nbogus = 1\n");
        assert!(ExperimentGrid::from_toml(&unknown_key).is_err());
    }

    #[test]
    fn invalid_grid_points_are_reported_up_front() {
        let mut grid = tiny_grid();
        // a = n1^2 gives p = 1, far out of range.
        grid.a_max = (grid.n1 * grid.n1) as f64;
        assert!(matches!(
            run_grid(&grid),
            Err(ExperimentError::BadPoint { .. })
        ));
    }

    #[test]
    fn degenerate_replications_are_counted_not_fatal() {
        // p so small that most sampled graphs are empty; the SVD operator on
        // an empty graph is degenerate.
        let grid = ExperimentGrid {
            n1: 4,
            gamma1: 0.0,
            gamma2: 0.0,
            delta: 0.5,
            b_values: vec![(4.0f64 * 4.0f64.ln()) / 4.0],
            a_min: 1e-8,
            a_max: 2e-8,
            a_points: 2,
            replications: 30,
            methods: vec![Method::Svd],
            master_seed: 5,
            threads: 1,
            timing: false,
        };
        let rows = run_grid(&grid).unwrap();
        assert!(rows.iter().any(|r| r.degenerate > 0));
        for r in &rows {
            assert!(r.exact_rate.is_finite());
            assert!(r.degenerate <= r.replications);
        }
    }

    #[test]
    fn flat_regimes_report_no_transition() {
        // delta = 1 carries no label signal at any a: success stays flat zero.
        let err = pilot_bracket(20, (0.0, 0.0), 1.0, 1.0, 4, 3).unwrap_err();
        assert!(matches!(err, ExperimentError::NoTransitionFound { .. }));
    }
}
