//! Road networks, trajectories, travel-cost labels and synthetic cities.

mod demand;
mod labels;
mod network;
mod synth;
mod trajectory;

pub use demand::{Demand, DemandSet};
pub use labels::{compute_cost_labels, sigma_filtered_mean, CostLabel, CostLabels};
pub use network::{direction_bucket, RoadNetwork, Segment, DIRECTION_BUCKETS};
pub use synth::{
    planted_speed, slice_factor, synth_city, synth_city_with, PlantedCost, SynthConfig,
    SyntheticCity,
};
pub use trajectory::{
    format_trajectories, load_trajectories, parse_trajectories, preprocess_trajectories,
    save_trajectories, Trajectory, MIN_TRAJECTORY_LEN, TIME_SLICES,
};
