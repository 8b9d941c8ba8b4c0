//! Scan files, synthetic loop-closure benchmarks and the `graffmatch`
//! command-line tool, built on `graffmatch-core`.

pub mod bench;
pub mod cli;
pub mod io;
pub mod pipeline;
pub mod sim;
