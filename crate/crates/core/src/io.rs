//! File formats: CSV datasets/trajectories/odometry logs, INI run
//! configuration, and JSON model snapshots.

pub mod config;
pub mod csv;
pub mod model_store;

pub use config::{load_config, parse_config, CalibrationSettings, Config, EvaluationSettings};
pub use csv::{
    read_dataset, read_odometry, read_trajectory, write_dataset, write_odometry, write_trajectory,
};
pub use model_store::{load_model, model_from_json, model_to_json, save_model};
