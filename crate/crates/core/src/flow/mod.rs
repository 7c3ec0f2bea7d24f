//! Potential-flow refinement of a base density, trained by maximum likelihood.

mod checkpoint;
mod grad;
mod net;
mod ode;
mod train;

pub use checkpoint::{base_path, load_base, read_checkpoint, write_checkpoint, CheckpointDocument, GAUSSIAN_BASE};
pub use grad::{nll_and_grad, NllGrad};
pub use net::{PotentialNet, ACTIVATIONS};
pub use ode::{
    flow_forward, flow_inverse, integrate, integrate_with_divergence, log_density, log_density_rows, push_rows,
    FlowConfig, FlowModel, FlowSamples, Potential,
};
pub use train::{train, AdamW, LossRecord, TrainConfig};
