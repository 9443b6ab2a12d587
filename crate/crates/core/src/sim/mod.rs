//! Simulation: world generation, the ground-truth affordance oracle,
//! scenarios, interventions and the episode loop.

pub mod episode;
pub mod intervention;
pub mod oracle;
pub mod scenario;
pub mod worldgen;

pub use episode::{run_episode, EpisodeResult, OracleParams, Outcome, Policy, Provider, SimConfig};
pub use intervention::{apply_intervention, detect_intervention, oracle_shortest_path, InterventionParams};
pub use oracle::{degrade_bins, oracle_bins};
pub use scenario::{Scenario, ScenarioFile};
pub use worldgen::{generate_world, WorldConfig, WorldKind, WorldSpec};
