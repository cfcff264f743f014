//! Applications of reach sets: input sets, certificates, reliability, loss
//! values, output extents and feature ranking.

pub mod input;
pub mod ranking;
pub mod reliability;
pub mod verify;

pub use input::{build_input_set, pca_box_radii, principal_axes, InputShape, InputSpec};
pub use ranking::{rank_features, FeatureRank};
pub use reliability::{
    default_thresholds, reliability_rates, score_dataset, ReliabilityCurve, ReliabilityPoint,
    ScoredSample,
};
pub use verify::{
    class_specific_matrix, classification_robust_loss, min_score, output_extensions,
    regression_robust_loss, robustness_scores, verify, verify_against, Certificate, ClassFlags,
    ClassMatrix, ClassScore, Modes, VerificationReport, VerifyConfig,
};
