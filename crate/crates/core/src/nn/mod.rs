//! Dense network stack: MLP, Gaussian policy head, Adam, the input-sensitivity
//! penalty and checkpoint serialization.

pub mod adam;
pub mod checkpoint;
pub mod lipschitz;
pub mod mlp;
pub mod policy;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Architecture, Checkpoint, CheckpointMeta};
pub use lipschitz::{lipschitz_penalty, lipschitz_penalty_with_probes, LipschitzEstimate};
pub use mlp::{ForwardCache, Mlp};
pub use policy::{gaussian_entropy, gaussian_log_prob, gaussian_log_prob_grad, GaussianPolicy};

