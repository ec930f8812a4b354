//! Dependence diagnostics: extremal coefficients, extremal and Pearson
//! correlations, Q-Q vectors, and the train/test/generated report.

mod extremal;
mod pearson;
mod qq;
mod report;

pub use extremal::{
    cross_channel_theta_map, extremal_coefficient, extremal_correlation, pairwise_theta_map,
    ExtremalCoefficient, ThetaMatrix,
};
pub use pearson::{pearson_matrix, PearsonMatrix};
pub use qq::qq_vectors;
pub use report::{
    compare_sets, pairwise_theta_rmse, rmse, ChannelReport, ChannelSummary, DependenceReport,
    ReportSummary, SetTriple,
};
