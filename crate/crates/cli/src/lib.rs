//! Command line and HTTP front end for ifcnav.

pub mod backends;
pub mod server;

pub use backends::BackendArgs;
pub use server::{router, ServiceState};
