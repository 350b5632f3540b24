//! Command implementations and the HTTP front end of the play service.

pub mod commands;
pub mod server;
