//! Game-theoretic attribution for tree ensembles.
//!
//! Features are players; the payoff of a coalition `S` is the
//! path-dependent conditional expectation of the model output given
//! `x_S` ([`tree_expectation`]). [`shapley_exact`] enumerates all
//! coalitions of an arbitrary game; [`tree_shap`] computes the same
//! values for tree ensembles in time polynomial in the tree size.

mod attribution;
mod baseline;
mod cluster;
mod expectation;
pub mod export;
mod shapley;
mod treeshap;

pub use attribution::{
    explain_well, rank_factors, AttributionMatrix, Contribution, FactorImportance,
    InteractionTensor, Waterfall,
};
pub use baseline::{baseline_correlations, BaselineCorrelation, BaselineReport, GRA_RHO};
pub use cluster::supervised_cluster;
pub use expectation::{expected_value, tree_expectation, TreeGame};
pub use shapley::{
    shapley_exact, shapley_interaction_exact, CoalitionalGame, FnGame, TableGame,
    MAX_EXACT_PLAYERS,
};
pub use treeshap::{shap_interactions, tree_shap};
