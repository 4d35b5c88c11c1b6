pub mod error;
pub mod baseline;
pub mod bilevel;
pub mod dataset;
pub mod dcopf;
pub mod dtree;
pub mod lp;
pub mod network;
pub mod pipeline;
pub mod reduced;

pub use error::{Error, Result};
