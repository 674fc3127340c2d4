//! Community recovery in the bipartite stochastic block model.
//!
//! Two hidden communities on each side of a bipartite graph; edges within a
//! community appear with probability `delta * p`, across communities with
//! probability `(2 - delta) * p`. This crate provides:
//!
//! - instance generation ([`model`]) with reproducible streams ([`rng`]);
//! - matrix-free operators and power-iteration eigensolvers ([`engine`]);
//! - the hollowed spectral estimator, hollowed Lloyd's algorithm, SVD /
//!   debiased / diagonal-deletion baselines and the supervised oracle
//!   ([`estimators`]);
//! - the loss and recovery classification ([`metrics`]);
//! - Monte Carlo checks of the concentration bounds behind the method
//!   ([`bench`]);
//! - a grid experiment runner reproducing the phase-transition study
//!   ([`experiment`]);
//! - Matrix Market and label-file serialization ([`io`]) and an SVG chart
//!   emitter ([`plot`]).

pub mod bench;
pub mod engine;
pub mod estimators;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod rng;

pub use engine::{CenteredMatrix, EigenSolveReport, GramOp, HollowedGramOp, SymOp};
pub use estimators::{EstimatorConfig, Method, RecoveryOutcome, TruthChannel};
pub use metrics::{RecoveryBand, RecoveryClass};
pub use model::{Biadjacency, BsbmParams, LabelVector};
pub use rng::RngStream;
