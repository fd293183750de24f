//! Instance files, generators, parallel experiments and verification suites
//! on top of `swalloc-core`.

pub mod corpus;
pub mod experiment;
pub mod format;
pub mod generate;
pub mod parallel;
pub mod suites;
