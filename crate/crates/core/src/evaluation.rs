//! Role fitness, single-robot training evaluation and the two-robot
//! post-evaluation harness.
//!
//! Fitness only counts objects at the end of the episode: objects whose
//! center lies in the nest for generalists and collectors, in the cache for
//! droppers.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::controller::{Controller, Genome, NeuralController};
use crate::dynamics::{run_episode, TraceMode};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, tag};
use crate::world::{AreaKind, Role, Scenario, ScenarioKind, WorldState};

/// Number of objects in the scoring area at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessValue(pub u32);

impl fmt::Display for FitnessValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Objects in the nest; the fitness of generalists and collectors.
pub fn fitness_generalist_or_collector(world: &WorldState) -> FitnessValue {
    FitnessValue(world.objects_in_area(AreaKind::Nest) as u32)
}

/// Objects in the cache; the fitness of droppers.
pub fn fitness_dropper(world: &WorldState) -> FitnessValue {
    FitnessValue(world.objects_in_area(AreaKind::Cache) as u32)
}

pub fn fitness_for(role: Role, world: &WorldState) -> FitnessValue {
    match role {
        Role::Generalist | Role::Collector => fitness_generalist_or_collector(world),
        Role::Dropper => fitness_dropper(world),
    }
}

/// Runs `role`'s single-robot training scenario with any controller.
pub fn evaluate_controller(
    controller: &mut dyn Controller,
    role: Role,
    scenario_seed: u64,
    noise_seed: u64,
    sim: &SimConfig,
) -> Result<FitnessValue> {
    let scenario = Scenario::new(ScenarioKind::training(role), scenario_seed, &sim.task);
    let world = scenario.spawn(&sim.arena, &sim.robot)?;
    let mut noise = rng::stream(noise_seed, &[tag::NOISE]);
    let result = run_episode(
        world,
        scenario.horizon,
        &mut [controller],
        sim,
        &mut noise,
        TraceMode::Off,
    );
    Ok(fitness_for(role, &result.world))
}

pub fn evaluate_with_seeds(
    genome: &Genome,
    role: Role,
    scenario_seed: u64,
    noise_seed: u64,
    sim: &SimConfig,
) -> Result<FitnessValue> {
    evaluate_controller(&mut NeuralController::new(genome), role, scenario_seed, noise_seed, sim)
}

/// Evaluates a genome once in its role's training scenario. The noise
/// stream is derived from the scenario seed, so equal inputs give equal
/// fitness.
pub fn evaluate_individual(genome: &Genome, role: Role, scenario_seed: u64, sim: &SimConfig) -> Result<FitnessValue> {
    evaluate_with_seeds(genome, role, scenario_seed, scenario_seed, sim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Two robots sharing one generalist genome.
    Gg,
    /// One dropper and one collector.
    Dc,
}

impl Pairing {
    pub fn genome_count(self) -> usize {
        match self {
            Pairing::Gg => 1,
            Pairing::Dc => 2,
        }
    }

    /// Roles of the supplied genomes, in order.
    pub fn genome_roles(self) -> &'static [Role] {
        match self {
            Pairing::Gg => &[Role::Generalist],
            Pairing::Dc => &[Role::Dropper, Role::Collector],
        }
    }

    fn scenario(self) -> ScenarioKind {
        match self {
            Pairing::Gg => ScenarioKind::PostevalGg,
            Pairing::Dc => ScenarioKind::PostevalDc,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pairing::Gg => "GG",
            Pairing::Dc => "DC",
        }
    }
}

impl std::str::FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gg" => Ok(Pairing::Gg),
            "dc" => Ok(Pairing::Dc),
            other => Err(format!("unknown pairing `{other}`")),
        }
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostEvalConfig {
    pub pairing: Pairing,
    pub trials: usize,
    /// Seconds per trial.
    pub horizon: f64,
    pub objects: usize,
}

impl PostEvalConfig {
    pub fn new(pairing: Pairing) -> Self {
        PostEvalConfig {
            pairing,
            trials: 10,
            horizon: 300.0,
            objects: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEvalReport {
    pub pairing: Pairing,
    pub trials: Vec<TrialResult>,
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single trial.
    pub stddev: f64,
}

pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    derive_seed(master_seed, &[tag::TRIAL, trial as u64])
}

fn summarize(pairing: Pairing, trials: Vec<TrialResult>) -> PostEvalReport {
    let n = trials.len() as f64;
    let mean = trials.iter().map(|t| t.score as f64).sum::<f64>() / n;
    let stddev = if trials.len() > 1 {
        (trials.iter().map(|t| (t.score as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    PostEvalReport {
        pairing,
        trials,
        mean,
        stddev,
    }
}

/// Post-evaluation with arbitrary controllers. `make` builds the controller
/// pair for one trial: robot 0 starts in the nest (generalist or collector),
/// robot 1 in the source (generalist or dropper).
pub fn post_evaluate_with<'a, F>(
    cfg: &PostEvalConfig,
    master_seed: u64,
    sim: &SimConfig,
    make: F,
) -> Result<PostEvalReport>
where
    F: Fn() -> [Box<dyn Controller + 'a>; 2] + Sync,
{
    if cfg.trials == 0 {
        return Err(Error::config("posteval.trials", "must be at least 1"));
    }
    let mut task = sim.task;
    task.objects = cfg.objects;
    task.posteval_horizon = cfg.horizon;

    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(master_seed, trial);
            let scenario = Scenario::new(cfg.pairing.scenario(), seed, &task);
            let world = scenario.spawn(&sim.arena, &sim.robot)?;
            let [mut a, mut b] = make();
            let mut noise = rng::stream(seed, &[tag::NOISE]);
            let result = run_episode(
                world,
                scenario.horizon,
                &mut [a.as_mut(), b.as_mut()],
                sim,
                &mut noise,
                TraceMode::Off,
            );
            Ok(TrialResult {
                trial,
                seed,
                score: result.world.objects_in_area(AreaKind::Nest) as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg.pairing, trials))
}

/// Post-evaluates evolved genomes: GG takes one generalist genome used by
/// both robots; DC takes a dropper genome then a collector genome.
pub fn post_evaluate(
    cfg: &PostEvalConfig,
    genomes: &[&Genome],
    master_seed: u64,
    sim: &SimConfig,
) -> Result<PostEvalReport> {
    if genomes.len() != cfg.pairing.genome_count() {
        return Err(Error::GenomeCount {
            pairing: cfg.pairing.label(),
            expected: cfg.pairing.genome_count(),
            got: genomes.len(),
        });
    }
    match cfg.pairing {
        Pairing::Gg => post_evaluate_with(cfg, master_seed, sim, || {
            [
                Box::new(NeuralController::new(genomes[0])),
                Box::new(NeuralController::new(genomes[0])),
            ]
        }),
        Pairing::Dc => post_evaluate_with(cfg, master_seed, sim, || {
            [
                Box::new(NeuralController::new(genomes[1])),
                Box::new(NeuralController::new(genomes[0])),
            ]
        }),
    }
}
