//! Command-line front end and HTTP service for `curio-core`.

pub mod remote;
pub mod resources;
pub mod server;
