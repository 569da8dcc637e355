//! Exact construction, execution and operation counting of bilinear matrix
//! multiplication algorithms. The guide in `book/` walks through each module.

pub mod error;
pub mod field_arith;

pub use error::{Error, Result};
pub mod tensor_core;
pub mod bilinear;
pub mod kron_eval;
pub mod mm_engine;
pub mod cw_laser;
pub mod group_mm;
pub mod cost_models;
pub mod sparse_decomp;
pub mod io;

/// Book chapters, compiled so their code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/kronecker.md")]
    mod kronecker {}
    #[doc = include_str!("../../../book/src/engines.md")]
    mod engines {}
    #[doc = include_str!("../../../book/src/cw.md")]
    mod cw {}
    #[doc = include_str!("../../../book/src/group.md")]
    mod group {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/sparse.md")]
    mod sparse {}
    #[doc = include_str!("../../../book/src/gaps.md")]
    mod gaps {}
}
