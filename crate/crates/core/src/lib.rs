//! Hierarchical Bayes small area estimation of nonlinear parameters, such as
//! FGT poverty indicators, under the heteroscedastic nested error regression
//! model. Posterior draws come from exact chain-rule sampling over a discrete
//! grid for the intraclass correlation; no Markov chain is involved.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod predictor;
pub mod rng;
pub mod sampler;
pub mod shift;
pub mod simulation;
pub mod summaries;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{build_rho_grid, GridPoint, RhoGrid};
pub use model::{validate_problem, AreaId, CensusFrame, CensusRow, SampleRecord, SurveySample, ValidatedProblem};
pub use predictor::{fast_hb_draws, hb_draws, IndicatorDraws, IndicatorSpec, SubsampleDesign};
pub use rng::{Purpose, SeededStream};
pub use sampler::{draw_parameters, ParameterDraw};
pub use summaries::{summarize, PosteriorSummary};
pub use transform::TransformSpec;
