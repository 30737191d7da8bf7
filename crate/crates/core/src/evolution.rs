//! Generational evolutionary algorithm over direct weight encodings:
//! tournament selection, elitism, per-gene Gaussian mutation, no crossover.
//!
//! Each generation shares one scenario seed per repetition across all
//! individuals. Per-individual sensor-noise streams are keyed by
//! (master seed, generation, individual, repetition), so results do not
//! depend on how evaluations are scheduled across threads.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::controller::{random_genome, Genome};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_with_seeds;
use crate::rng::{self, derive_seed, tag};
use crate::world::Role;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvoConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub elitism_count: usize,
    /// Episodes per individual per generation.
    pub repetitions: usize,
    pub mutation_prob: f64,
    pub mutation_sigma: f64,
    pub master_seed: u64,
    pub role: Role,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population_size: 100,
            generations: 100,
            tournament_size: 2,
            elitism_count: 1,
            repetitions: 1,
            mutation_prob: 0.02,
            mutation_sigma: 0.2,
            master_seed: 0,
            role: Role::Generalist,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::config("evolution.population_size", "must be at least 1"));
        }
        if self.elitism_count >= self.population_size {
            return Err(Error::config(
                "evolution.elitism_count",
                "must be smaller than the population size",
            ));
        }
        if self.tournament_size == 0 {
            return Err(Error::config("evolution.tournament_size", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("evolution.repetitions", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::config("evolution.mutation_prob", "must lie in [0, 1]"));
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return Err(Error::config("evolution.mutation_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// Total episode evaluations of one run, the budget E.
    pub fn evaluation_budget(&self) -> u64 {
        (self.population_size * self.generations * self.repetitions) as u64
    }

    pub fn scenario_seed(&self, generation: usize, repetition: usize) -> u64 {
        derive_seed(self.master_seed, &[tag::SCENARIO, generation as u64, repetition as u64])
    }

    pub fn noise_seed(&self, generation: usize, individual: usize, repetition: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[tag::NOISE, generation as u64, individual as u64, repetition as u64],
        )
    }
}

/// Share of a total budget available to each of `controllers` controllers
/// evolved separately, E/n.
pub fn split_budget(total: u64, controllers: u64) -> u64 {
    total / controllers
}

/// Which episode an evaluation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalTask {
    pub generation: usize,
    pub individual: usize,
    pub repetition: usize,
    pub scenario_seed: u64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_index: usize,
    pub best_genome: Genome,
    /// Scenario seed of the first repetition.
    pub scenario_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    /// The last evaluated population.
    pub population: Vec<Genome>,
    /// Fitness of `population`; empty when no generation ran.
    pub fitness: Vec<f64>,
    pub logs: Vec<GenerationLog>,
    /// Episodes actually evaluated.
    pub evaluations: u64,
}

impl Evolution {
    pub fn best(&self) -> Option<&GenerationLog> {
        self.logs.last()
    }
}

/// Index of the tournament winner among `size` draws with replacement.
/// Ties are settled by a fair coin.
pub fn tournament_select(fitness: &[f64], size: usize, rng: &mut impl Rng) -> usize {
    assert!(!fitness.is_empty(), "tournament on an empty population");
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] > fitness[best] || (fitness[c] == fitness[best] && rng.random::<bool>()) {
            best = c;
        }
    }
    best
}

/// Adds N(0, sigma) to each gene independently with probability `prob`.
pub fn mutate(genome: &Genome, prob: f64, sigma: f64, rng: &mut impl Rng) -> Genome {
    let normal = Normal::new(0.0, sigma).expect("sigma validated as non-negative");
    let mut child = genome.clone();
    for w in child.weights_mut() {
        if rng.random::<f64>() < prob {
            *w += normal.sample(rng);
        }
    }
    child
}

/// Indices of the `count` fittest individuals, ties by lower index.
pub fn elite_indices(fitness: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

/// Runs the generational loop with a caller-supplied evaluator. `observe`
/// sees each generation's log as soon as it is complete.
pub fn evolve_with<F, O>(cfg: &EvoConfig, evaluate: F, mut observe: O) -> Result<Evolution>
where
    F: Fn(&Genome, &EvalTask) -> Result<f64> + Sync,
    O: FnMut(&GenerationLog) -> Result<()>,
{
    cfg.validate()?;
    let mut init = rng::stream(cfg.master_seed, &[tag::INIT]);
    let mut population: Vec<Genome> = (0..cfg.population_size).map(|_| random_genome(&mut init)).collect();
    let mut fitness = Vec::new();
    let mut logs = Vec::with_capacity(cfg.generations);
    let counter = AtomicU64::new(0);

    for generation in 0..cfg.generations {
        if generation > 0 {
            population = breed(cfg, generation - 1, &population, &fitness);
        }
        fitness = population
            .par_iter()
            .enumerate()
            .map(|(individual, genome)| {
                let mut total = 0.0;
                for repetition in 0..cfg.repetitions {
                    let task = EvalTask {
                        generation,
                        individual,
                        repetition,
                        scenario_seed: cfg.scenario_seed(generation, repetition),
                        noise_seed: cfg.noise_seed(generation, individual, repetition),
                    };
                    total += evaluate(genome, &task)?;
                    counter.fetch_add(1, Ordering::Relaxed);
                }
                Ok(total / cfg.repetitions as f64)
            })
            .collect::<Result<Vec<f64>>>()?;

        let best_index = elite_indices(&fitness, 1)[0];
        let log = GenerationLog {
            generation,
            best: fitness[best_index],
            mean: fitness.iter().sum::<f64>() / fitness.len() as f64,
            best_index,
            best_genome: population[best_index].clone(),
            scenario_seed: cfg.scenario_seed(generation, 0),
        };
        debug_assert!(log.best >= log.mean);
        observe(&log)?;
        logs.push(log);
    }

    Ok(Evolution {
        population,
        fitness,
        logs,
        evaluations: counter.into_inner(),
    })
}

/// Next population: elites copied unchanged, the rest mutated tournament
/// winners. Uses one breeding stream per generation.
fn breed(cfg: &EvoConfig, generation: usize, population: &[Genome], fitness: &[f64]) -> Vec<Genome> {
    let mut rng = rng::stream(cfg.master_seed, &[tag::BREED, generation as u64]);
    let mut next: Vec<Genome> = elite_indices(fitness, cfg.elitism_count)
        .into_iter()
        .map(|i| population[i].clone())
        .collect();
    while next.len() < cfg.population_size {
        let parent = tournament_select(fitness, cfg.tournament_size, &mut rng);
        next.push(mutate(
            &population[parent],
            cfg.mutation_prob,
            cfg.mutation_sigma,
            &mut rng,
        ));
    }
    next
}

/// Evolves a controller for `cfg.role` in its training scenario.
pub fn evolve(cfg: &EvoConfig, sim: &SimConfig) -> Result<Evolution> {
    evolve_observed(cfg, sim, |_| Ok(()))
}

pub fn evolve_observed<O>(cfg: &EvoConfig, sim: &SimConfig, observe: O) -> Result<Evolution>
where
    O: FnMut(&GenerationLog) -> Result<()>,
{
    sim.validate()?;
    let role = cfg.role;
    evolve_with(
        cfg,
        |g, task| evaluate_with_seeds(g, role, task.scenario_seed, task.noise_seed, sim).map(|f| f.0 as f64),
        observe,
    )
}
