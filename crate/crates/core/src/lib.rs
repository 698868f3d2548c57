//! Hierarchical model-predictive car following.
//!
//! Three layers drive an ego vehicle behind a lead vehicle:
//!
//! * [`prediction`] turns ETA estimates at spatial waypoints into a
//!   predicted lead trajectory,
//! * [`planner`] plans accelerations over a long horizon inside headway
//!   envelopes built by [`envelope`],
//! * [`tracker`] follows the plan at a faster rate while enforcing a
//!   RADAR-based safety envelope.
//!
//! Both control layers are linearly constrained QPs solved by [`qp`].
//! [`sim`] closes the loop against a replayed lead trace, [`baselines`]
//! provides IDM and oracle references, and [`metrics`] scores runs.
//!
//! The math layers are generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix `f64`, which the simulation and tooling use throughout.

pub mod baselines;
pub mod config;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod planner;
pub mod prediction;
pub mod qp;
pub mod scalar;
pub mod sim;
pub mod sweep;
pub mod synth;
pub mod tracker;

pub use error::{Error, Layer, Result};
pub use scalar::Scalar;

pub type QpProblem64 = qp::QpProblem<f64>;
pub type QpSolution64 = qp::QpSolution<f64>;
pub type QpSettings64 = qp::QpSettings<f64>;
pub type VehicleState64 = dynamics::VehicleState<f64>;
pub type LeadTrace64 = prediction::LeadTrace<f64>;
pub type PredictedTrajectory64 = prediction::PredictedTrajectory<f64>;
pub type HeadwayParams64 = envelope::HeadwayParams<f64>;
pub type EnvelopePair64 = envelope::EnvelopePair<f64>;
pub type PlannerParams64 = planner::PlannerParams<f64>;
pub type PlanResult64 = planner::PlanResult<f64>;
pub type Planner64 = planner::Planner<f64>;
pub type TrackerParams64 = tracker::TrackerParams<f64>;
pub type TrackResult64 = tracker::TrackResult<f64>;
pub type Tracker64 = tracker::Tracker<f64>;
pub type IdmParams64 = baselines::IdmParams<f64>;
