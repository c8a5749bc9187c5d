//! Configuration, experiment orchestration and artifact writing behind the
//! `spinning-cavity` binary.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod presets;
pub mod report;
