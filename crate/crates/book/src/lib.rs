//! The guide's chapters, compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/expressions.md")]
pub mod expressions {}
#[doc = include_str!("../../../book/src/derivatives.md")]
pub mod derivatives {}
#[doc = include_str!("../../../book/src/torsion.md")]
pub mod torsion {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}
