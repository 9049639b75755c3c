//! mdbook cannot run the book's code listings as tests, so this crate smushes
//! every chapter into rustdoc and lets `cargo test --doc` do the work. One
//! module per chapter keeps failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/bases.md")]
pub mod bases {}

#[doc = include_str!("../../../book/src/collision.md")]
pub mod collision {}

#[doc = include_str!("../../../book/src/fourier.md")]
pub mod fourier {}

#[doc = include_str!("../../../book/src/branches.md")]
pub mod branches {}

#[doc = include_str!("../../../book/src/semigroup.md")]
pub mod semigroup {}

#[doc = include_str!("../../../book/src/weighted.md")]
pub mod weighted {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
