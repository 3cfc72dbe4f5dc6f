//! Batch sampling, optimization and the training protocols.

mod diagnostic;
mod fit;
mod moons;
mod optim;
mod plateau;
mod sampler;

pub use diagnostic::{grad_ratio_diagnostic, GradRatioReport};
pub use fit::{
    class_halves, feature_width, fit, pooled_features, two_stage_fit, EpochRecord, FitReport, Model, Schedule,
    TrainSpec, TwoStageReport, DEFAULT_DECAY_FACTOR, DEFAULT_PATIENCE,
};
pub use moons::{
    lattice_probabilities, temperature_cross_entropy, toy_accuracy, train_toy_classifier, Lattice, ToyFit,
    ToyTrainConfig,
};
pub use optim::{sgd_step, OptimConfig, ParamGroup, TwoGroupSgd};
pub use plateau::{plateau_step, PlateauState};
pub use sampler::{class_balanced_batches, BatchSampler, SamplerConfig};
