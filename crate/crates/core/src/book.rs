//! Code blocks of the guide, compiled and run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

#[doc = include_str!("../../../book/src/library.md")]
mod library {}

#[doc = include_str!("../../../book/src/screening.md")]
mod screening {}

#[doc = include_str!("../../../book/src/outputs.md")]
mod outputs {}

#[doc = include_str!("../../../book/src/testing.md")]
mod testing {}

#[doc = include_str!("../../../README.md")]
mod readme {}
