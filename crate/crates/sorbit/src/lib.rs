//! File formats, experiment drivers and the `sorbit` command line on top of
//! `sorbit-core`.

pub mod cli;
pub mod experiment;
pub mod g2o;
pub mod io;
