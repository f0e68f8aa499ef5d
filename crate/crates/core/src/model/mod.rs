//! Layer stacks built from dilated (DL), row-wise strided (SL) and fully
//! connected (FL) layers.

mod checkpoint;
mod config;
mod network;
mod params;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{
    preset, shape_check, Activation, InputShape, LayerKind, LayerShape, LayerSpec, NetworkConfig, Preset,
};
pub(crate) use network::network_l2;
pub use network::{backward, forward, loss_and_gradients, ForwardCache, Model};
pub use params::{init_params, LayerParams, ModelParams};
