//! Feature spaces, classifier representations, instances and model I/O.

pub mod bnn;
pub mod classifier;
pub mod dataset;
pub mod fixtures;
pub mod generate;
pub mod io;
pub mod space;

pub use bnn::{Bnn, BnnBlock, BnnOutput};
pub use classifier::{
    linear_score, Atom, Body, Branch, ClassLabel, Classifier, CmpOp, ExplanationProblem, Guard, Instance, Lookup,
    Operand,
};
pub use space::{Domain, FeatureSpace};
