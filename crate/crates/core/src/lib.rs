pub mod engine;
pub mod error;
pub mod harness;
pub mod imr;
pub mod model;
pub mod partition;
pub mod workload;
