//! Brute-force reference paths and numerical independence checks.

mod naive;
mod rank;

pub use naive::{naive_equivariant_forward, naive_invariant_forward, SliceTerms};
pub use rank::{
    feature_count, feature_design_matrix, independence_report, rank_check, singular_values, Degeneracy, Feature,
    FeatureFamily, IndependenceReport, RankCheck, RANK_THRESHOLD,
};
