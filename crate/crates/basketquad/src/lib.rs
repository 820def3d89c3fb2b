//! Companion to `basketquad-core`: reference oracles, benchmark tables,
//! JSON problem files, the factor display and the command-line front end.

pub mod bench;
pub mod display;
pub mod oracle;
pub mod problem_file;
