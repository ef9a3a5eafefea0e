//! Benchmarks for `jacnet-core`; see `benches/`.

pub use jacnet_core;
