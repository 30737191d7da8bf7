//! `slopeforage evolve | posteval | replay`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::controller::NeuralController;
use crate::dynamics::{run_episode, TraceMode};
use crate::error::{Error, Result};
use crate::evaluation::{fitness_for, post_evaluate, Pairing, PostEvalConfig};
use crate::evolution::evolve_observed;
use crate::io::{self, GenerationsWriter, GenomeFile, Manifest};
use crate::rng::{self, tag};
use crate::sensors::NoiseSpec;
use crate::world::{AreaKind, Role, Scenario, ScenarioKind};

#[derive(Debug, Parser)]
#[command(
    name = "slopeforage",
    version,
    about = "Slope-foraging simulator and controller evolution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a controller for one role.
    Evolve(EvolveArgs),
    /// Evaluate evolved controllers in pairs of two robots.
    Posteval(PostevalArgs),
    /// Re-run one episode and write its trajectory.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration, or a manifest from an earlier run. Missing
    /// fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluation threads. Results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Disable all sensor noise.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub role: Option<Role>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct PostevalArgs {
    /// Genome files: one generalist for gg; a dropper and a collector for dc.
    #[arg(required = true)]
    pub genomes: Vec<PathBuf>,
    #[arg(long)]
    pub pairing: Pairing,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `manifest.json` from an evolve run, or a genome file.
    pub input: PathBuf,
    /// Scenario seed; defaults to the run's last scenario or the genome's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Include sensor frames in the trace.
    #[arg(long)]
    pub frames: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evolve(a) => cmd_evolve(&a),
        Command::Posteval(a) => cmd_posteval(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

/// Reads a run config, or the config echoed in an evolve manifest.
fn read_config(path: &Path) -> Result<RunConfig> {
    match Manifest::load(path) {
        Ok(m) => Ok(m.config),
        Err(_) => RunConfig::from_path(path),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if common.noiseless {
        cfg.noise = NoiseSpec::noiseless();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::config("--workers", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config("--workers", e.to_string()))?;
    pool.install(f)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_evolve(args: &EvolveArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(role) = args.role {
        cfg.evolution.role = role;
    }
    if let Some(seed) = args.seed {
        cfg.evolution.master_seed = seed;
    }
    if let Some(n) = args.population {
        cfg.evolution.population_size = n;
    }
    if let Some(n) = args.generations {
        cfg.evolution.generations = n;
    }
    cfg.validate()?;

    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    let evo_cfg = cfg.evolution;
    let sim = cfg.sim();
    let mut files = vec!["generations.csv".to_string()];
    let mut csv = GenerationsWriter::create(&out.join("generations.csv"))?;
    let generations = evo_cfg.generations;

    let evo = with_workers(args.common.workers, || {
        evolve_observed(&evo_cfg, &sim, |log| {
            csv.append(log)?;
            let done = log.generation + 1;
            if done % cfg.snapshot_every == 0 || done == generations {
                let name = format!("best_gen_{done}.genome");
                GenomeFile::new(log.best_genome.clone(), evo_cfg.role, evo_cfg.master_seed, done)
                    .save(&out.join(&name))?;
                files.push(name);
            }
            Ok(())
        })
    })?;

    let best = evo.best();
    if let Some(log) = best {
        GenomeFile::new(
            log.best_genome.clone(),
            evo_cfg.role,
            evo_cfg.master_seed,
            evo.logs.len(),
        )
        .save(&out.join("best.genome"))?;
        files.push("best.genome".into());
    }
    files.push("manifest.json".into());
    let manifest = Manifest {
        version: io::VERSION.to_string(),
        role: evo_cfg.role,
        master_seed: evo_cfg.master_seed,
        config: cfg.clone(),
        evaluations: evo.evaluations,
        evaluation_budget: evo_cfg.evaluation_budget(),
        generations_completed: evo.logs.len(),
        final_scenario_seed: best.map(|l| l.scenario_seed),
        final_noise_seed: best.map(|l| evo_cfg.noise_seed(l.generation, l.best_index, 0)),
        best_genome: best.map(|_| "best.genome".to_string()),
        files,
    };
    manifest.save(&out.join("manifest.json"))?;

    println!(
        "evolved {} seed={} generations={} evaluations={} best={}",
        evo_cfg.role,
        evo_cfg.master_seed,
        evo.logs.len(),
        evo.evaluations,
        best.map_or("-".to_string(), |l| l.best.to_string()),
    );
    Ok(())
}

/// Orders genome files to match the pairing's expected roles.
fn arrange_for_pairing(pairing: Pairing, mut files: Vec<GenomeFile>) -> Result<Vec<GenomeFile>> {
    let roles = pairing.genome_roles();
    if files.len() != roles.len() {
        return Err(Error::GenomeCount {
            pairing: pairing.label(),
            expected: roles.len(),
            got: files.len(),
        });
    }
    let mut ordered = Vec::with_capacity(roles.len());
    for &role in roles {
        match files.iter().position(|f| f.role == role) {
            Some(i) => ordered.push(files.remove(i)),
            None => {
                return Err(Error::RoleMismatch {
                    expected: role,
                    found: files[0].role,
                })
            }
        }
    }
    Ok(ordered)
}

pub fn cmd_posteval(args: &PostevalArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(t) = args.trials {
        cfg.posteval.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.posteval.seed = s;
    }
    cfg.validate()?;

    let files = args
        .genomes
        .iter()
        .map(|p| GenomeFile::load(p))
        .collect::<Result<Vec<_>>>()?;
    let files = arrange_for_pairing(args.pairing, files)?;
    let label = format!(
        "{}:{}",
        args.pairing,
        match args.pairing {
            Pairing::Gg => format!("{0}+{0}", files[0].tag()),
            Pairing::Dc => format!("{}+{}", files[0].tag(), files[1].tag()),
        }
    );

    let pe = PostEvalConfig {
        pairing: args.pairing,
        trials: cfg.posteval.trials,
        horizon: cfg.task.posteval_horizon,
        objects: cfg.task.objects,
    };
    let sim = cfg.sim();
    let genomes: Vec<_> = files.iter().map(|f| &f.weights).collect();
    let report = with_workers(args.common.workers, || {
        post_evaluate(&pe, &genomes, cfg.posteval.seed, &sim)
    })?;

    let out = &cfg.output_dir;
    create_dir(out)?;
    io::write_posteval(&out.join("posteval.csv"), &label, &report)?;
    let summary = format!(
        "{label} trials={} mean={:.3} stddev={:.3}",
        report.trials.len(),
        report.mean,
        report.stddev
    );
    fs::write(out.join("summary.txt"), format!("{summary}\n")).map_err(|e| Error::io(out.join("summary.txt"), e))?;
    println!("{summary}");
    Ok(())
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let as_manifest = Manifest::load(&args.input).ok();
    let (mut cfg, genome_path, default_seed, default_noise) = match &as_manifest {
        Some(m) => {
            let path = m.best_genome_path(&args.input).ok_or_else(|| Error::Parse {
                path: args.input.clone(),
                message: "manifest names no best genome".into(),
            })?;
            (m.config.clone(), path, m.final_scenario_seed, m.final_noise_seed)
        }
        None => (RunConfig::default(), args.input.clone(), None, None),
    };
    if let Some(p) = &args.common.config {
        cfg = read_config(p)?;
    }
    if args.common.noiseless {
        cfg.noise = NoiseSpec::noiseless();
    }
    cfg.validate()?;

    let genome = GenomeFile::load(&genome_path)?;
    let role = as_manifest.as_ref().map_or(genome.role, |m| m.role);
    if genome.role != role {
        return Err(Error::RoleMismatch {
            expected: role,
            found: genome.role,
        });
    }
    let scenario_seed = args.seed.or(default_seed).unwrap_or(genome.provenance.seed);
    // The evolve run's exact noise stream only applies to its own scenario.
    let noise_seed = match args.seed {
        None => default_noise.unwrap_or(scenario_seed),
        Some(_) => scenario_seed,
    };

    let sim = cfg.sim();
    let scenario = Scenario::new(ScenarioKind::training(role), scenario_seed, &sim.task);
    let world = scenario.spawn(&sim.arena, &sim.robot)?;
    let mut noise = rng::stream(noise_seed, &[tag::NOISE]);
    let mode = if args.frames {
        TraceMode::PosesAndFrames
    } else {
        TraceMode::Poses
    };
    let mut ctrl = NeuralController::new(&genome.weights);
    let result = run_episode(world, scenario.horizon, &mut [&mut ctrl], &sim, &mut noise, mode);
    let trace = result.trace.as_deref().unwrap_or(&[]);

    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("replay"));
    create_dir(&out)?;
    io::write_trace(&out.join("trace.ndjson"), trace)?;
    write_score_curve(&out.join("score_curve.csv"), role, &sim.arena, trace)?;

    println!(
        "replayed {role} seed={scenario_seed} steps={} fitness={}",
        result.steps,
        fitness_for(role, &result.world)
    );
    Ok(())
}

fn write_score_curve(
    path: &Path,
    role: Role,
    arena: &crate::world::ArenaSpec,
    trace: &[crate::dynamics::TraceRecord],
) -> Result<()> {
    let scoring = match role {
        Role::Dropper => AreaKind::Cache,
        Role::Generalist | Role::Collector => AreaKind::Nest,
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "time", "nest", "cache", "slope", "source", "fitness"])?;
    for rec in trace {
        let mut counts = [0usize; 4];
        for o in &rec.objects {
            counts[arena.area_of_y(o.y).index()] += 1;
        }
        w.write_record([
            rec.step.to_string(),
            rec.time.to_string(),
            counts[0].to_string(),
            counts[1].to_string(),
            counts[2].to_string(),
            counts[3].to_string(),
            counts[scoring.index()].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
