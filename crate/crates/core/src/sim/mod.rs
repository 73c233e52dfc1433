mod engine;
mod episode;
mod evaluate;

pub use engine::{Engine, ExogenousSource, Order, Parcel, SimError};
pub use episode::{run_episode, weighted_reward, EpisodeResult, EpochRecord, OccupancySnapshot, RequestRecord};
pub use evaluate::{
    acceptance_rates, evaluate, improvement, mean, paired_t_test, t_interval, EvalError, EvalProtocol, EvaluationReport,
    InstanceResult, OccupancyRow, PairedTest, PolicySpec, PolicySummary, RateCell, RateRow, Slicer, WeightKey, WeightStore,
};
