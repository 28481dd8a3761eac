//! Recovering planted clique covers with the Lovász theta function.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: graphs, clique partitions, the planted model and its
//!   probability bounds, plus the JSON graph format.
//! - [`symmat`]: dense symmetric linear algebra.
//! - [`certificate`]: the canonical primal/dual matrices and the
//!   deterministic uniqueness pipeline built on them.
//! - [`sdp`]: a first-order conic solver and the theta formulation on top.
//! - [`baselines`]: three competing SDP relaxations.
//! - [`oracle`]: exact clique cover and stability numbers at desk scale.
//! - [`experiment`]: reproducible sweeps writing CSV/JSON records.

pub mod error;
pub mod baselines;
pub mod certificate;
pub mod experiment;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod sdp;
pub mod symmat;

pub use baselines::{BaselineResult, Method};
pub use certificate::{
    deterministic_recovery, extremality_test, verify_certificate, CertificateReport, Verdict,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutput, TrialRecord};
pub use graph::{generate_planted, CliquePartition, Graph, GraphDocument, PlantedInstance};
pub use oracle::{clique_cover_number, sandwich_check, stability_number, Budget, CoverSolution};
pub use sdp::{classify_recovery, solve_theta, ConicOptions, Recovery, ThetaSolution};
pub use symmat::{Spectrum, SymMatrix};
