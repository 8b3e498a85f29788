//! The guide's chapters, compiled so their examples run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/grids-and-paths.md")]
pub mod grids_and_paths {}

#[doc = include_str!("../../../book/src/conflicts.md")]
pub mod conflicts {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/resolver.md")]
pub mod resolver {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/files-and-cli.md")]
pub mod files_and_cli {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
