//! Exact conservative inference with discrete p-values.
//!
//! Mid-p-values of discrete tests are dominated by the uniform distribution
//! in the convex order. This crate computes p-, mid-p- and randomized
//! p-values from finite null distributions, certifies sub-uniformity through
//! integrated distribution functions, and combines independent mid-p-values
//! with tail bounds that only require sub-uniformity.

pub mod combiners;
pub mod convex_order;
pub mod discrete_null;
pub mod error;
pub mod optimize;
pub mod sim;
pub mod special_fn;

pub use combiners::{combine, CombinedResult, Method, OptimizedBound};
pub use convex_order::{certify_subuniform, idf_of, PiecewiseLinearIDF, SubUniformCertificate};
pub use discrete_null::{
    generalized_midp, make_null, BarnardMoments, DiscreteNull, MidPDistribution, PValueTriple,
    UnitDistribution,
};
pub use error::{Error, Result};
