//! Minimum-volume sublevel sets of homogeneous polynomials.
//!
//! Given a compact set `K ⊂ ℝⁿ` (a point cloud or a basic semialgebraic set)
//! and an even degree `d`, find the homogeneous `g` of degree `d` whose
//! sublevel set `{g ≤ 1}` contains `K` with the smallest volume. With `d = 2`
//! this is the minimum-volume enclosing ellipsoid.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod center;
pub mod error;
pub mod gaussint;
pub mod kkt;
pub mod linalg;
pub mod oracle;
pub mod polycore;
pub mod semialg;
pub mod solver;

pub use error::{Error, Result};
