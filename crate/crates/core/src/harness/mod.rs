//! File formats, the fit/predict pipeline and the Monte Carlo runner
//! behind the command-line tool.

pub mod experiment;
pub mod io;
pub mod model;
pub mod pipeline;

pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec};
pub use model::ModelFile;
pub use pipeline::{fit_curves, FitOptions, FittedModel, Method, Predictions, Predictor};
