//! Cross-city trajectory generation from road-network topology.
//!
//! The pipeline extracts Space Syntax features per road segment, encodes
//! them with a spatially aware graph attention network, learns travel costs
//! with disentangled semantic/domain latents trained adversarially, learns
//! route preferences from observed trajectories, and generates trajectories
//! for origin/destination demands in a city without trajectory data.

pub mod autodiff;
pub mod city;
pub mod cost_model;
pub mod error;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod preference;
pub mod road_network;
pub mod routing;
pub mod sagat;
pub mod seed;
pub mod space_syntax;

pub use error::{Error, ErrorCategory, Result};
