//! Long-range frontier heading selection on top of a horizon-limited local
//! planner.
//!
//! Per-camera affordance heatmaps are projected onto angular bins around the
//! robot, filtered over time, weighted toward the goal and the previous
//! choice, and the winning heading becomes a goal just outside the local
//! costmap. A ground-truth oracle stands in for the learned heatmap model so
//! the whole loop runs in simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN too.

pub mod affordance;
pub mod batch;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod goal_head;
pub mod io;
pub mod label;
pub mod local_nav;
pub mod seeds;
pub mod sim;
pub mod svg;
pub mod world;

pub use error::{LrnError, Result};
