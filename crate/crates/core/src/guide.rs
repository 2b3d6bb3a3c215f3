//! The book chapters, rendered as documentation. Their code blocks run as
//! doctests, so the book and the library cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod chapter1 {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod chapter2 {}

#[doc = include_str!("../../../book/src/heisenberg.md")]
pub mod chapter3 {}

#[doc = include_str!("../../../book/src/kodaira.md")]
pub mod chapter4 {}

#[doc = include_str!("../../../book/src/stationary-phase.md")]
pub mod chapter5 {}

#[doc = include_str!("../../../book/src/peak-sections.md")]
pub mod chapter6 {}

#[doc = include_str!("../../../book/src/genus.md")]
pub mod chapter7 {}

#[doc = include_str!("../../../book/src/symbol-calculus.md")]
pub mod chapter8 {}
