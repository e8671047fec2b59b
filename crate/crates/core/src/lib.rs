//! Reconstruction of the distributed normal earth pressure on a circular
//! tunnel lining from observed convergence deformations, optionally plus one
//! internal hoop-force reading.
//!
//! The unknown pressure is parameterized by knot values joined by periodic
//! linear interpolation ([`field`]), pushed through an embedded beam-spring
//! finite-element model of the ring ([`fem`]) to predict the observables
//! ([`response`]), and inverted in a Bayesian framework ([`bayes`]) sampled
//! with a Differential Evolution Markov Chain ([`demc`]). Fit quality and
//! posterior spread are scored in [`metrics`]; [`pipeline`] orchestrates
//! whole experiments from declarative scenario files.

pub mod bayes;
pub mod demc;
pub mod fem;
pub mod field;
pub mod metrics;
pub mod pipeline;
pub mod response;

pub use bayes::{log_likelihood, log_posterior, log_prior, ForwardModel, Likelihood, UniformPrior};
pub use demc::{ChainEnsemble, PosteriorSummary, SamplerConfig};
pub use fem::{build_mesh, solve, LiningModel, Mesh, RingSolver, SolveResult};
pub use field::PressureField;
pub use metrics::MetricReport;
pub use response::{select_baselines, BaselineSet, ObservationSet};
