//! On-disk formats.
//!
//! | file               | format | columns / fields                                   |
//! |--------------------|--------|----------------------------------------------------|
//! | `generations.csv`  | CSV    | `generation,best,mean,scenario_seed`               |
//! | `posteval.csv`     | CSV    | `pairing,trial,seed,score`                         |
//! | `*.genome`         | JSON   | `topology`, `weights`, `role`, `provenance`        |
//! | `manifest.json`    | JSON   | config echo, seeds, version, evaluation count      |
//! | `trace.ndjson`     | NDJSON | one [`TraceRecord`] per step                       |
//! | `score_curve.csv`  | CSV    | `step,time,nest,cache,slope,source,fitness`        |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::controller::{Genome, TOPOLOGY};
use crate::dynamics::TraceRecord;
use crate::error::{Error, Result};
use crate::evaluation::{PostEvalReport, TrialResult};
use crate::evolution::GenerationLog;
use crate::world::Role;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    /// Number of completed generations when the genome was saved.
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeFile {
    pub topology: [usize; 3],
    pub weights: Genome,
    pub role: Role,
    pub provenance: Provenance,
}

impl GenomeFile {
    pub fn new(weights: Genome, role: Role, seed: u64, generation: usize) -> Self {
        GenomeFile {
            topology: TOPOLOGY,
            weights,
            role,
            provenance: Provenance { seed, generation },
        }
    }

    /// Short label such as `D7`: role letter and evolution seed.
    pub fn tag(&self) -> String {
        format!("{}{}", self.role.letter(), self.provenance.seed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GenomeFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        if file.topology != TOPOLOGY {
            return Err(Error::Parse {
                path: path.into(),
                message: format!("topology {:?} is not {:?}", file.topology, TOPOLOGY),
            });
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("genome file is serializable");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Append-only `generations.csv`, flushed after every row.
pub struct GenerationsWriter {
    inner: csv::Writer<File>,
}

impl GenerationsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(["generation", "best", "mean", "scenario_seed"])?;
        inner.flush().map_err(|e| Error::io(path, e))?;
        Ok(GenerationsWriter { inner })
    }

    pub fn append(&mut self, log: &GenerationLog) -> Result<()> {
        self.inner.write_record([
            log.generation.to_string(),
            log.best.to_string(),
            log.mean.to_string(),
            log.scenario_seed.to_string(),
        ])?;
        self.inner.flush().map_err(|e| Error::io("generations.csv", e))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub scenario_seed: u64,
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEvalRow {
    pub pairing: String,
    pub trial: usize,
    pub seed: u64,
    pub score: u32,
}

pub fn write_posteval(path: &Path, label: &str, report: &PostEvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for TrialResult { trial, seed, score } in &report.trials {
        w.serialize(PostEvalRow {
            pairing: label.to_string(),
            trial: *trial,
            seed: *seed,
            score: *score,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_posteval(path: &Path) -> Result<Vec<PostEvalRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Everything needed to reproduce an evolution run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub role: Role,
    pub master_seed: u64,
    pub config: RunConfig,
    pub evaluations: u64,
    pub evaluation_budget: u64,
    pub generations_completed: usize,
    /// Scenario seed of the last generation, used by replay.
    pub final_scenario_seed: Option<u64>,
    /// Noise seed the final best individual was evaluated with.
    pub final_noise_seed: Option<u64>,
    /// File name of the final best genome, relative to the manifest.
    pub best_genome: Option<String>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest is serializable");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn best_genome_path(&self, manifest_path: &Path) -> Option<PathBuf> {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        self.best_genome.as_ref().map(|f| dir.join(f))
    }
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r).expect("trace record is serializable");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|line| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.into(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::random_genome;
    use crate::rng::stream;

    #[test]
    fn genome_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.genome");
        let f = GenomeFile::new(random_genome(&mut stream(1, &[])), Role::Dropper, 7, 100);
        f.save(&path).unwrap();
        let back = GenomeFile::load(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.tag(), "D7");
    }

    #[test]
    fn corrupt_genome_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.genome");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(GenomeFile::load(&path), Err(Error::Parse { .. })));

        let short = r#"{"topology":[21,8,2],"weights":[0.0],"role":"dropper","provenance":{"seed":1,"generation":1}}"#;
        std::fs::write(&path, short).unwrap();
        let err = GenomeFile::load(&path).unwrap_err().to_string();
        assert!(err.contains("194"), "{err}");

        let mut f = GenomeFile::new(Genome::zeros(), Role::Dropper, 1, 1);
        f.topology = [21, 9, 2];
        f.save(&path).unwrap();
        assert!(GenomeFile::load(&path).unwrap_err().to_string().contains("topology"));
    }

    #[test]
    fn generations_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("generations.csv");
        let mut w = GenerationsWriter::create(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "generation,best,mean,scenario_seed\n");
        w.append(&GenerationLog {
            generation: 0,
            best: 3.0,
            mean: 0.25,
            best_index: 4,
            best_genome: Genome::zeros(),
            scenario_seed: 99,
        })
        .unwrap();
        let rows = read_generations(&path).unwrap();
        assert_eq!(
            rows,
            vec![GenerationRow {
                generation: 0,
                best: 3.0,
                mean: 0.25,
                scenario_seed: 99
            }]
        );
        assert!(std::fs::read_to_string(&path).unwrap().ends_with("0,3,0.25,99\n"));
    }
}
