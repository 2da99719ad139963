//! The guide in `book/` is plain mdbook, which cannot run snippets that use
//! other crates. Each chapter is included here as a module doc instead, so
//! `cargo test` runs every code block as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/statevector.md")]
pub mod statevector {}
#[doc = include_str!("../../../book/src/reservoirs.md")]
pub mod reservoirs {}
#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}
#[doc = include_str!("../../../book/src/classifier.md")]
pub mod classifier {}
#[doc = include_str!("../../../book/src/entanglement.md")]
pub mod entanglement {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
