//! Binary quantum channel discrimination.
//!
//! Three approaches are provided on top of an exact density-matrix
//! simulator: variational parallel and sequential discrimination strategies
//! ([`vardisc`]), a variational binary classifier ([`vclass`]) and a
//! trace-product kernel classifier ([`ksvm`]). The [`diamond`] module supplies
//! the theoretical success-probability baselines, and [`analysis`] holds the
//! trace-of-product correlation tools.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ansatz;
pub mod channels;
pub mod diamond;
pub mod error;
pub mod ksvm;
pub mod optim;
pub mod qcore;
pub mod seeds;
pub mod vardisc;
pub mod vclass;

pub use error::{Error, Result};
