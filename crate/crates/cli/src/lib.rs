//! Command-line tools and the session service for kinesnap.

pub mod bench;
pub mod protocol;
pub mod server;
