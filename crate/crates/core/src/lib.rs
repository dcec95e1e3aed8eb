#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circulant;
pub mod error;
pub mod linalg;
pub mod ops;
pub mod scaling;
pub mod model;
pub mod ct;
pub mod krylov;
pub mod lbfgs;
pub mod solvers;
pub mod experiment;
