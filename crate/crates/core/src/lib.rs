//! Robustness queries and distance-restricted explanations for
//! classifiers.
//!
//! The crate decides local and global robustness of classifiers over
//! discrete, quantized and continuous feature spaces, finds adversarial
//! examples, and computes abductive / contrastive explanations restricted
//! to an l_p ball. Discrete queries go through a pseudo-Boolean encoding
//! and an embedded CDCL solver; piecewise-linear models over real
//! intervals are handled exactly with rational polyhedral reasoning.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix the
//! common choices.

pub mod brute;
pub mod distance;
pub mod encode;
pub mod error;
pub mod explain;
pub mod model;
pub mod oracle;
pub mod polyhedral;
pub mod robustness;
pub mod scalar;

pub use distance::{distance, minimum_meaningful_epsilon, within_ball, DistanceSpec, Norm};
pub use error::{Error, Result};
pub use explain::{
    check_mhs_duality, cxp_from_aex, enumerate_explanations, find_axp, find_cxp, is_weak_axp, plain_explanation,
    Explanation, ExplanationKind, ExplanationListing,
};
pub use model::{Body, ClassLabel, Classifier, Domain, ExplanationProblem, FeatureSpace, Instance};
pub use num_rational::BigRational;
pub use oracle::{Backend, Budget, ExternalSolver, Settings};
pub use robustness::{
    certify_demo, find_aex, find_global_counterexample, find_global_counterexample_delta,
    find_global_counterexample_with, find_transition_point, is_locally_robust, is_nontrivial, local_flip_threshold,
    sample_local_robustness, AexResult, ConstraintSet, GlobalMethod, GlobalResult, RobustnessVerdict, SampleVerdict,
    SamplingConfig,
};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = BigRational;
pub type Classifier64 = Classifier<f64>;
pub type ExactClassifier = Classifier<BigRational>;
