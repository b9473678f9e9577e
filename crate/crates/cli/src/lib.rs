//! Command-line front end: expression parsing, the JSON workspace and the
//! command implementations behind the `bdshift` binary.

pub mod commands;
pub mod error;
pub mod eval;
pub mod parse;
pub mod workspace;
