//! Shared by the integration test targets; each target uses a subset.
#![allow(dead_code)]

pub mod gen;
pub mod invariants;
pub mod oracle;
