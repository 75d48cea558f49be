#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dsl;
pub mod error;
pub mod immersion;
pub mod jets;
pub mod linalg;
pub mod surface;
pub mod polar;
pub mod invariants;
pub mod flow;
pub mod exec;
pub mod json;
pub mod mesh;
pub mod suites;
