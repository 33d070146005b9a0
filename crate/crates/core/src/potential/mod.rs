//! Surrogate interatomic potential: energies, forces, parameter gradients,
//! mixed parameter–coordinate Jacobians, pooled activations and training.

mod model;
mod params;
mod structure;
mod train;
pub mod xyz;

pub use model::{
    activation_feature, directional_param_gradient, energy, energy_and_forces, forces,
    grad_params_energy, mixed_jacobian, mixed_jacobian_exact, MixedJacobian,
    DEFAULT_JACOBIAN_STEP,
};
pub use params::{DescriptorConfig, ModelDims, ModelParams, ParamSubset};
pub use structure::{rotation_from_uniform, LabeledStructure, Structure, Vec3};
pub use train::{
    batch_gradient, dataset_loss, huber, huber_grad, train, Schedule, ScheduleRule, TrainConfig,
    TrainReport,
};
