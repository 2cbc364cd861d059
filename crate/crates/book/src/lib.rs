//! The guide in `book/` is plain mdbook, which cannot build snippets against
//! workspace crates. Each chapter is included here as a module doc so that
//! `cargo test --doc` compiles and runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/dumbbells.md")]
pub mod dumbbells {}
#[doc = include_str!("../../../book/src/rods.md")]
pub mod rods {}
#[doc = include_str!("../../../book/src/collision.md")]
pub mod collision {}
#[doc = include_str!("../../../book/src/solvers.md")]
pub mod solvers {}
#[doc = include_str!("../../../book/src/limits.md")]
pub mod limits {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
