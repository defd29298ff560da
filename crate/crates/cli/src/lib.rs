//! Library surface of the `tse` command-line tool, exposed so integration
//! tests and the acceptance suite can drive the same code paths.

pub mod bench;
pub mod commands;
pub mod instance;
pub mod keystore;
