//! Subcommand implementations. Each command follows the same shape:
//! load and impute the panel, compute per-city artifacts in parallel,
//! then write every file from one sequential writer phase in city-id
//! order so reruns are byte-identical.

pub mod correlate;
pub mod decompose;
pub mod detect;
pub mod normalize;
pub mod predict;
