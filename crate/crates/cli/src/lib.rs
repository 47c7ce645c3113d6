//! Command line and HTTP front ends over `iterator-core`.

pub mod commands;
pub mod service;
