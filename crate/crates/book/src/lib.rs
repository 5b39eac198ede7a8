//! Runs the listings in `book/src` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geodesy.md")]
pub mod geodesy {}
#[doc = include_str!("../../../book/src/matching.md")]
pub mod matching {}
#[doc = include_str!("../../../book/src/surface.md")]
pub mod surface {}
#[doc = include_str!("../../../book/src/coverage.md")]
pub mod coverage {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/harvesting.md")]
pub mod harvesting {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
