pub mod coding;
pub mod demon;
pub mod engine;
pub mod harness;
pub mod info;
pub mod stats;
