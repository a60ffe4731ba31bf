//! Dense CP tensor decomposition and method-of-moments learning.

pub mod als;
pub mod dten;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod matrix_methods;
pub mod models;
pub mod overcomplete;
pub mod power;
pub mod report;
pub mod rng;
pub mod simdiag;
pub mod stream;
pub mod tensor;
pub mod whiten;

pub use error::{Error, Result};
pub use power::{decompose_orthogonal, EigenPair, PowerConfig};
pub use report::DecompositionReport;
pub use tensor::{DenseTensor, KruskalForm, Matrix};
