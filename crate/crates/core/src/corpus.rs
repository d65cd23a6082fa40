//! The shipped ceremony corpus: one directory per entry holding
//! `ceremony.cer`, `scenario-*.json`, `goals.json`, an optional
//! `annotations.json` and regenerable `golden/*.json` outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dsl::{parse_named, ParseError};
use crate::engine::{
    check_goal, run, CapabilitySet, EngineError, GoalSet, MutationVector, RunReport,
};
use crate::explorer::{explore, ExplorationConfig, ExploreError};
use crate::features::Annotations;
use crate::model::Ceremony;
use crate::scenario::Scenario;

/// Name of the scenario every entry must satisfy under compliant behavior.
pub const HONEST: &str = "honest";

/// Mutation bound used for the shipped violation goldens.
pub const GOLDEN_BOUND: usize = 1;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown corpus entry {id:?}; available: {}", available.join(", "))]
    UnknownId { id: String, available: Vec<String> },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("corpus entry {0} has no honest scenario")]
    NoHonestScenario(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    serde_json::from_str(&read(path)?).map_err(|e| CorpusError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub id: String,
    pub dir: PathBuf,
    pub source: String,
    pub ceremony: Ceremony,
    /// Sorted by name, honest first.
    pub scenarios: Vec<Scenario>,
    pub goals: GoalSet,
    pub annotations: Option<Annotations>,
}

impl CorpusEntry {
    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn honest(&self) -> &Scenario {
        &self.scenarios[0]
    }

    pub fn scenario_names(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.name.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EntrySummary {
    pub id: String,
    pub ceremony: String,
    pub roles: usize,
    pub steps: usize,
    pub scenarios: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub dir: PathBuf,
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus {
            dir: Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus"),
        }
    }
}

impl Corpus {
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Corpus { dir: dir.into() }
    }

    /// Entry ids, alphabetical.
    pub fn ids(&self) -> Result<Vec<String>, CorpusError> {
        let entries = fs::read_dir(&self.dir).map_err(|source| CorpusError::Io {
            path: self.dir.clone(),
            source,
        })?;
        let mut ids = Vec::new();
        for e in entries {
            let e = e.map_err(|source| CorpusError::Io {
                path: self.dir.clone(),
                source,
            })?;
            if e.path().join("ceremony.cer").is_file() {
                ids.push(e.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn list(&self) -> Result<Vec<EntrySummary>, CorpusError> {
        self.ids()?
            .into_iter()
            .map(|id| {
                let e = self.load(&id)?;
                Ok(EntrySummary {
                    ceremony: e.ceremony.name.clone(),
                    roles: e.ceremony.roles.len(),
                    steps: e.ceremony.step_count(),
                    scenarios: e.scenario_names().into_iter().map(String::from).collect(),
                    id,
                })
            })
            .collect()
    }

    pub fn load(&self, id: &str) -> Result<CorpusEntry, CorpusError> {
        let ids = self.ids()?;
        if !ids.iter().any(|i| i == id) {
            return Err(CorpusError::UnknownId {
                id: id.to_string(),
                available: ids,
            });
        }
        let dir = self.dir.join(id);
        let cer = dir.join("ceremony.cer");
        let source = read(&cer)?;
        let ceremony = parse_named(&source, &cer.display().to_string())?;

        let mut scenario_files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|source| CorpusError::Io {
                path: dir.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("scenario-") && n.ends_with(".json"))
            })
            .collect();
        scenario_files.sort();
        let mut scenarios = scenario_files
            .iter()
            .map(|p| read_json::<Scenario>(p))
            .collect::<Result<Vec<_>, _>>()?;
        scenarios.sort_by(|a, b| (a.name != HONEST, &a.name).cmp(&(b.name != HONEST, &b.name)));
        if scenarios.first().map(|s| s.name.as_str()) != Some(HONEST) {
            return Err(CorpusError::NoHonestScenario(id.to_string()));
        }

        let goals = read_json(&dir.join("goals.json"))?;
        let ann_path = dir.join("annotations.json");
        let annotations = if ann_path.is_file() {
            Some(read_json(&ann_path)?)
        } else {
            None
        };
        Ok(CorpusEntry {
            id: id.to_string(),
            dir,
            source,
            ceremony,
            scenarios,
            goals,
            annotations,
        })
    }

    pub fn load_all(&self) -> Result<Vec<CorpusEntry>, CorpusError> {
        self.ids()?.iter().map(|id| self.load(id)).collect()
    }

    pub fn table1_path(&self) -> PathBuf {
        self.dir.join("golden").join("table1.json")
    }
}

/// Exploration configuration for an entry's goldens: every mutation kind,
/// the entry's capability pool.
pub fn golden_config(entry: &CorpusEntry) -> ExplorationConfig {
    ExplorationConfig::new(GOLDEN_BOUND).pool(&entry.goals.capability_pool)
}

/// Regenerated golden files of an entry, as (path, contents).
pub fn render_goldens(entry: &CorpusEntry) -> Result<Vec<(PathBuf, String)>, CorpusError> {
    let golden = entry.dir.join("golden");
    let mut out = Vec::new();
    for s in &entry.scenarios {
        let trace = run(
            &entry.ceremony,
            s,
            &MutationVector::new(),
            &CapabilitySet::new(),
        )?;
        let verdicts = entry
            .goals
            .goals
            .iter()
            .map(|g| check_goal(&trace, s, g))
            .collect::<Result<Vec<_>, _>>()?;
        out.push((
            golden.join(format!("trace-{}.json", s.name)),
            RunReport::new(&trace, &verdicts).to_json(),
        ));
        let vs = explore(
            &entry.ceremony,
            s,
            &entry.goals.goals,
            &golden_config(entry),
        )?;
        out.push((
            golden.join(format!("violations-{}.json", s.name)),
            vs.to_json(),
        ));
    }
    Ok(out)
}
