pub mod cli;
pub mod engine;
pub mod error;
pub mod event;
pub mod graph;
pub mod oracle;
pub mod setfunc;

pub use error::{Error, Result, TreeKind};
