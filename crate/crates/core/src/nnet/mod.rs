//! Dense-tensor reverse-mode autodiff and the UAP-Net model built on it.

mod checkpoint;
mod graph;
mod model;
mod optim;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Stage, CHECKPOINT_VERSION};
pub use graph::{softmax, ConvGeom, Gradients, Graph, Var, CE_CLAMP};
pub use model::{
    seq_for_slot, sequence_embedding, AgentToken, AgentType, ArchConfig, FusionConfig, Fused, ModelConfig, UapNet,
    SEQ_COOP, SEQ_LIDAR,
};
pub use optim::{AdamW, AdamWConfig};
pub use params::{Group, Param, ParamId, ParameterStore, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NnetError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("backward called twice on one tape")]
    BackwardTwice,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
