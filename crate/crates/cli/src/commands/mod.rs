pub mod baselines;
pub mod bench;
pub mod eval;
pub mod ingest;
pub mod sample;
pub mod synth;
pub mod train;
