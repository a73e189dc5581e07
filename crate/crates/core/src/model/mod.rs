//! The click model: graph-attention encoders for queries and documents,
//! neighbor interaction, examination, and the combination layer.

mod batch;
mod combine;
mod config;
mod gat;
mod network;
mod train;

pub use batch::{build_batch, Batch, BatchOptions, GatRows, GraphContext};
pub use combine::Combination;
pub use config::{Ablation, Aggregation, CombinationKind, GatConfig, ModelConfig, ModelDims, RankScore};
pub use gat::{AttentionHead, GatLayer, NeighborInteraction};
pub use network::{Embeddings, Forward, GraphCm, Layers};
pub use train::{evaluate_sessions, predict, train, EpochLog, GraphInputs, TrainConfig, TrainOutcome};
