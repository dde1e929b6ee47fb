//! Corpus ingest, experiments, file formats and the `oneclass` command line
//! around `oneclass-core`.

pub mod config;
pub mod curves;
pub mod experiments;
pub mod ingest;
pub mod io;
pub mod meta;
