//! Constant-velocity bounding-box tracking.
//!
//! The crate is organized bottom-up:
//!
//! - [`state`]: box type, state-vector layouts and the Gaussian state container
//! - [`model`]: transition, process-noise, measurement and measurement-noise matrices
//! - [`filter`]: Kalman predict/update, gating distance and track initiation
//! - [`association`]: IoU costs and optimal assignment
//! - [`tracker`]: SORT-style multi-object track lifecycle
//! - [`sim`]: generative simulator and Monte-Carlo oracles for the model matrices
//! - [`mot`]: MOTChallenge CSV reading and writing

pub mod association;
pub mod error;
pub mod filter;
pub mod model;
pub mod mot;
pub mod sim;
pub mod state;
pub mod tracker;

pub use association::{iou, solve_assignment, Assignment, CostMatrix};
pub use error::{Error, Result};
pub use filter::{gating_distance, initiate, predict, update, Innovation, VelocityPrior};
pub use model::{
    build_measurement_matrix, build_measurement_noise, build_process_noise,
    build_transition_matrix, ModelMatrices,
};
pub use mot::{read_mot_detections, read_mot_results, write_mot_results, Detection};
pub use state::{
    from_state, to_measurement, AxisSigmas, BoundingBox, GaussianState, NoiseParams,
    Parameterization,
};
pub use tracker::{TrackHistory, TrackOutput, TrackStatus, Tracker, TrackerConfig};

pub use nalgebra::{DMatrix, DVector};
