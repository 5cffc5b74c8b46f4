//! Two-stage training of the spatial and temporal banks against the physics
//! loss, checkpointing, and full-series inference.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod infer;
pub mod sampler;
pub mod schedule;
pub mod trainer;

pub use checkpoint::{load_checkpoint, read_sidecar, save_checkpoint, DataInfo, EpochRecord, Sidecar, TrainState};
pub use config::{Stage, TrainConfig};
pub use error::{Result, TrainError};
pub use infer::{merge_timeline, predict_series, spatial_pairs};
pub use sampler::sequential_batches;
pub use schedule::ReduceOnPlateau;
pub use trainer::{train_spatial, train_temporal, TrainOptions, TrainOutcome, LOG_FILE};
