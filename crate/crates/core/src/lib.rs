//! Headless simulator of a slope-foraging task for small robot groups, and
//! the neuroevolution pipeline around it.
//!
//! Robots move objects from a source area, across a slope, to a nest. Free
//! objects on the slope slide down into a cache. A *generalist* does the
//! whole trip; a *dropper* only carries objects onto the slope, and a
//! *collector* carries them from the cache to the nest. Controllers are
//! 21-8-2 feedforward networks whose weights are evolved per role, then
//! compared in two-robot post-evaluations.
//!
//! ```
//! use slopeforage::{evaluate_individual, Genome, Role, SimConfig};
//!
//! let sim = SimConfig::default();
//! let fitness = evaluate_individual(&Genome::zeros(), Role::Dropper, 42, &sim).unwrap();
//! assert_eq!(fitness.0, 0);
//! ```

pub mod cli;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod evolution;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod scripted;
pub mod sensors;
pub mod world;

pub use config::{RunConfig, SimConfig};
pub use controller::{forward, random_genome, Controller, Genome, NeuralController, GENOME_LEN};
pub use dynamics::{run_episode, step_world, ControlCommand, EpisodeResult, StepConfig, TraceMode};
pub use error::{Error, Result};
pub use evaluation::{
    evaluate_individual, fitness_dropper, fitness_generalist_or_collector, post_evaluate, FitnessValue, Pairing,
    PostEvalConfig, PostEvalReport,
};
pub use evolution::{evolve, mutate, tournament_select, EvoConfig, Evolution, GenerationLog};
pub use geometry::Vec2;
pub use sensors::{sense_frame, NoiseSpec, SensorFrame};
pub use world::{spawn_scenario, AreaKind, ArenaSpec, RobotSpec, Role, Scenario, ScenarioKind, WorldState};
