pub mod geo;
pub mod cli;
pub mod coord;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod lstm;
pub mod ltc;
pub mod model;
pub mod pipeline;
pub mod sim;
pub mod tensor;
pub mod train;
