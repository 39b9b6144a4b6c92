//! Regression-tree ensembles for tabular well data, with exact and
//! tree-structured Shapley attribution, k-fold stacking, individual
//! conditional expectation grids and bounded derivative-free search.
//!
//! The modules follow the analysis loop end to end:
//!
//! * [`data`]: schema, CSV ingest, cleaning, intensity features, synthetic wells
//! * [`trees`]: regression trees, random forest, first- and second-order boosting
//! * [`explain`]: Shapley values, tree-SHAP, interactions, rankings, clustering
//! * [`stack`]: out-of-fold stacking with a linear meta-model
//! * [`ice`]: ICE curves, surfaces and volumes
//! * [`optimize`]: PSO, differential evolution and Bayesian optimization

pub mod data;
pub mod error;
pub mod explain;
pub mod folds;
pub mod ice;
pub mod optimize;
pub mod predictor;
pub mod stack;
pub mod stats;
pub mod trees;

pub use error::{Error, Result};
pub use predictor::Predictor;
