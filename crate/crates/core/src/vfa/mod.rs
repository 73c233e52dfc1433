mod features;
mod replay;
mod train;

pub use features::{
    compute_features, feature_model, feature_seed, scenario_windows, value_estimate, FeatureEngine, FeaturePlanVars,
    FeatureVector, SampledPickups,
};
pub use replay::{
    er_target, er_targets, ridge_fit, satisfies_structure, structure_pairs, AcceptBranch, Experience, ReplayMemory,
    MIN_FEATURE_SPREAD,
};
pub use train::{train, TrainedWeights, TrainerState, TrainingError, TrainingLog, TrainingParams, Variant};
