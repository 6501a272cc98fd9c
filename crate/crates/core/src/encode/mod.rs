//! Translation of classifiers, balls and robustness queries into mixed
//! clausal / pseudo-Boolean formulas.
//!
//! Discrete features are represented per copy (`x`, and `y` for dual-copy
//! queries): binary features as one variable, categorical ones one-hot,
//! integer and quantized ones as the little-endian bits of their level
//! index. Numeric thresholds are rational and scaled to integers exactly,
//! so boundary points are decided the same way exact evaluation decides
//! them.

pub mod classifier;
pub mod emit;
pub mod formula;
pub mod inputs;
pub mod pb;
pub mod query;

pub use classifier::encode_classifier;
pub use emit::{cnf_text, emit, opb_text, parse_dimacs, Cnf, TextFormat};
pub use formula::{int_expr, CopyTag, FeatureVars, Formula, LinExpr, Lit, PBConstraint, Relation, VarMap, VarRole};
pub use inputs::{decode, ensure_inputs};
pub use pb::pb_to_cnf;
pub use query::{
    encode_distance, encode_fixed_features, encode_intervals, global_query, linf_steps, local_query, Center,
    FeatureInterval,
};
