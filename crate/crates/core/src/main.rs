use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ceremonies::corpus::{render_goldens, Corpus, CorpusEntry};
use ceremonies::dsl::{parse_named, render_msc};
use ceremonies::engine::{
    check_goal, run, Capability, CapabilitySet, Goal, GoalSet, GoalStatus, Mutation, MutationKind,
    MutationVector, RunReport, Trace, Verdict,
};
use ceremonies::explorer::{explore, oracle_explore, ExplorationConfig, ExploreError};
use ceremonies::features::{score_ceremony, score_matrix, FeatureMatrix};
use ceremonies::model::Ceremony;
use ceremonies::scenario::Scenario;
use ceremonies::term::RoleId;

#[derive(Parser)]
#[command(
    name = "ceremony",
    version,
    about = "Model, run, explore and score security ceremonies"
)]
struct Cli {
    /// Corpus directory.
    #[arg(long, global = true, value_name = "DIR")]
    corpus_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a ceremony file.
    Validate { path: PathBuf },
    /// Execute a ceremony once and evaluate its goals.
    Run(RunArgs),
    /// Search for minimal goal violations.
    Explore(ExploreArgs),
    /// Score the dictatorial, beautiful and invisible features.
    Score(ScoreArgs),
    /// Corpus housekeeping.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Regenerate golden outputs of corpus entries.
    Export {
        /// Compare instead of writing; exit 1 on any difference.
        #[arg(long)]
        check: bool,
        /// Entries to export (default: all).
        ids: Vec<String>,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// List corpus entries alphabetically.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Msc,
}

#[derive(Args)]
struct Target {
    /// Corpus entry id, or path to a `.cer` file.
    ceremony: String,
    /// Scenario name within the entry, or path to a scenario JSON file.
    #[arg(long, default_value = "honest")]
    scenario: String,
    /// Goals JSON file (default: the entry's goals).
    #[arg(long)]
    goals: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    target: Target,
    /// Human deviation, `kind:role@target[->aux]`; repeatable.
    #[arg(long = "mutation", value_name = "MUTATION")]
    mutations: Vec<Mutation>,
    /// Attacker capability, `kind:target`; repeatable.
    #[arg(long = "capability", value_name = "CAPABILITY")]
    capabilities: Vec<Capability>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 1)]
    max_mutations: usize,
    /// Comma-separated mutation kinds (default: all).
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<MutationKind>>,
    /// Comma-separated capabilities (default: the entry's pool).
    #[arg(long, value_delimiter = ',')]
    capability_pool: Option<Vec<Capability>>,
    /// Ignore the entry's capability pool.
    #[arg(long, conflicts_with = "capability_pool")]
    no_capabilities: bool,
    /// Comma-separated roles to mutate (default: every human role).
    #[arg(long, value_delimiter = ',')]
    roles: Option<Vec<String>>,
    /// Cross-check against the brute-force oracle; exit 3 on disagreement.
    #[arg(long)]
    oracle_check: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct ScoreArgs {
    /// Corpus entry to score.
    #[arg(conflicts_with = "corpus", required_unless_present = "corpus")]
    id: Option<String>,
    /// Score every annotated corpus entry.
    #[arg(long)]
    corpus: bool,
    /// Compare with `table1` or a matrix JSON file; exit 1 on mismatch.
    #[arg(long)]
    golden: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

/// Failure with its exit code.
struct Fail(u8, String);

fn input(e: impl std::fmt::Display) -> Fail {
    Fail(3, e.to_string())
}

struct Loaded {
    ceremony: Ceremony,
    scenario: Scenario,
    goals: GoalSet,
}

fn is_path(s: &str) -> bool {
    s.ends_with(".cer") || s.ends_with(".json") || s.contains('/')
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load(corpus: &Corpus, t: &Target) -> Result<Loaded, Fail> {
    let entry: Option<CorpusEntry> = if is_path(&t.ceremony) {
        None
    } else {
        Some(corpus.load(&t.ceremony).map_err(input)?)
    };
    let ceremony = match &entry {
        Some(e) => e.ceremony.clone(),
        None => {
            let p = Path::new(&t.ceremony);
            parse_named(&read(p)?, &p.display().to_string()).map_err(input)?
        }
    };
    let scenario = if is_path(&t.scenario) {
        read_json(Path::new(&t.scenario))?
    } else {
        let e = entry
            .as_ref()
            .ok_or_else(|| input("--scenario must be a file for a ceremony file"))?;
        e.scenario(&t.scenario).cloned().ok_or_else(|| {
            input(format!(
                "no scenario {} in {}; available: {}",
                t.scenario,
                e.id,
                e.scenario_names().join(", ")
            ))
        })?
    };
    let goals = match (&t.goals, &entry) {
        (Some(p), _) => read_json(p)?,
        (None, Some(e)) => e.goals.clone(),
        (None, None) => GoalSet::default(),
    };
    Ok(Loaded {
        ceremony,
        scenario,
        goals,
    })
}

fn verdicts(trace: &Trace, s: &Scenario, goals: &[Goal]) -> Result<Vec<Verdict>, Fail> {
    goals
        .iter()
        .map(|g| check_goal(trace, s, g).map_err(input))
        .collect()
}

fn trace_text(trace: &Trace, verdicts: &[Verdict]) -> String {
    let mut out = format!(
        "ceremony {} / scenario {}\n",
        trace.ceremony, trace.scenario
    );
    for m in &trace.mutations {
        out.push_str(&format!("mutation {m}\n"));
    }
    for c in &trace.capabilities {
        let inert = if trace.inert_capabilities.contains(c) {
            " (inert)"
        } else {
            ""
        };
        out.push_str(&format!("capability {c}{inert}\n"));
    }
    for e in &trace.events {
        let payload: Vec<String> = e.payload.iter().map(|t| t.to_string()).collect();
        let mut line = format!("#{:<3} {:<14} {}", e.i, e.kind.keyword(), e.actor);
        if let Some(ch) = &e.channel {
            line.push_str(&format!(" [{ch}]"));
        }
        line.push(':');
        if let Some(k) = e.activity {
            line.push_str(&format!(" {}", k.keyword()));
        }
        line.push_str(&format!(" {}", payload.join(", ")));
        if let Some(o) = e.outcome {
            line.push_str(&format!(" => {}", o.keyword()));
        }
        if let Some(m) = &e.mutation {
            line.push_str(&format!("  <{m}>"));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str(&format!("steps completed: {}\n", trace.steps_completed()));
    for v in verdicts {
        let status = match v.status {
            GoalStatus::Satisfied => "satisfied",
            GoalStatus::Violated => "VIOLATED",
            GoalStatus::NotApplicable => "not applicable",
        };
        out.push_str(&format!("goal {}: {status}: {}\n", v.goal, v.witness));
    }
    out
}

fn cmd_run(corpus: &Corpus, a: RunArgs) -> Result<u8, Fail> {
    let l = load(corpus, &a.target)?;
    if a.format == Format::Msc {
        print!("{}", render_msc(&l.ceremony));
        return Ok(0);
    }
    let mutations: MutationVector = a.mutations.into_iter().collect();
    let caps: CapabilitySet = a.capabilities.into_iter().collect();
    let trace = run(&l.ceremony, &l.scenario, &mutations, &caps).map_err(input)?;
    let vs = verdicts(&trace, &l.scenario, &l.goals.goals)?;
    match a.format {
        Format::Json => print!("{}", RunReport::new(&trace, &vs).to_json()),
        _ => print!("{}", trace_text(&trace, &vs)),
    }
    Ok(u8::from(
        vs.iter().any(|v| v.status == GoalStatus::Violated),
    ))
}

fn cmd_explore(corpus: &Corpus, a: ExploreArgs) -> Result<u8, Fail> {
    let l = load(corpus, &a.target)?;
    let pool = match (a.no_capabilities, a.capability_pool) {
        (true, _) => Vec::new(),
        (false, Some(p)) => p,
        (false, None) => l.goals.capability_pool.clone(),
    };
    let mut cfg = ExplorationConfig::new(a.max_mutations)
        .kinds(&a.kinds.unwrap_or_else(|| MutationKind::ALL.to_vec()))
        .pool(&pool);
    if let Some(roles) = a.roles {
        cfg = cfg.roles(&roles.into_iter().map(RoleId::new).collect::<Vec<_>>());
    }
    let explored = |r: Result<_, ExploreError>| {
        r.map_err(|e| match e {
            ExploreError::StateSpaceTooLarge(_) => Fail(2, e.to_string()),
            ExploreError::Engine(_) => input(e),
        })
    };
    let found = explored(explore(&l.ceremony, &l.scenario, &l.goals.goals, &cfg))?;
    match a.format {
        Format::Json => print!("{}", found.to_json()),
        _ => print!("{}", found.to_text()),
    }
    if a.oracle_check {
        let expected = explored(oracle_explore(
            &l.ceremony,
            &l.scenario,
            &l.goals.goals,
            &cfg,
        ))?;
        if expected != found {
            return Err(Fail(
                3,
                format!(
                    "oracle mismatch: explore found {} violation(s), oracle {}",
                    found.violations.len(),
                    expected.violations.len()
                ),
            ));
        }
        eprintln!("oracle agrees ({} runs)", expected.stats.runs_executed);
    }
    Ok(u8::from(!found.violations.is_empty()))
}

fn cmd_score(corpus: &Corpus, a: ScoreArgs) -> Result<u8, Fail> {
    let matrix = if a.corpus {
        let entries = corpus.load_all().map_err(input)?;
        let annotated: Vec<_> = entries
            .iter()
            .filter_map(|e| e.annotations.as_ref().map(|ann| (&e.ceremony, ann)))
            .collect();
        score_matrix(&annotated).map_err(input)?
    } else {
        let id = a.id.as_deref().unwrap_or_default();
        let e = corpus.load(id).map_err(input)?;
        let ann = e
            .annotations
            .as_ref()
            .ok_or_else(|| input(format!("{id} has no annotations")))?;
        FeatureMatrix {
            rows: score_ceremony(&e.ceremony, ann).map_err(input)?,
        }
    };
    match a.format {
        Format::Json => print!("{}", matrix.to_json()),
        _ => print!("{}", matrix.to_text()),
    }
    let Some(golden) = a.golden else { return Ok(0) };
    let path = if golden == "table1" {
        corpus.table1_path()
    } else {
        PathBuf::from(golden)
    };
    let mut expected: FeatureMatrix = read_json(&path)?;
    if !a.corpus {
        let names: BTreeSet<&str> = matrix.rows.iter().map(|r| r.ceremony.as_str()).collect();
        expected
            .rows
            .retain(|r| names.contains(r.ceremony.as_str()));
    }
    let diff = matrix.diff(&expected);
    if diff.is_empty() {
        eprintln!("golden match: {} cells", expected.cell_count());
        return Ok(0);
    }
    for d in &diff {
        println!("mismatch: {d}");
    }
    Ok(1)
}

fn cmd_validate(path: &Path) -> Result<u8, Fail> {
    let text = read(path)?;
    let c = parse_named(&text, &path.display().to_string()).map_err(input)?;
    println!(
        "{}: ok ({} roles, {} steps)",
        c.name,
        c.roles.len(),
        c.step_count()
    );
    Ok(0)
}

fn cmd_export(corpus: &Corpus, check: bool, ids: Vec<String>) -> Result<u8, Fail> {
    let ids = if ids.is_empty() {
        corpus.ids().map_err(input)?
    } else {
        ids
    };
    let mut stale = 0;
    for id in ids {
        let entry = corpus.load(&id).map_err(input)?;
        for (path, text) in render_goldens(&entry).map_err(input)? {
            if check {
                if fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
                    println!("stale: {}", path.display());
                    stale += 1;
                }
            } else {
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir)
                        .map_err(|e| input(format!("{}: {e}", dir.display())))?;
                }
                fs::write(&path, text).map_err(|e| input(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(u8::from(stale > 0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let corpus = cli.corpus_dir.map(Corpus::at).unwrap_or_default();
    let result = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Run(a) => cmd_run(&corpus, a),
        Command::Explore(a) => cmd_explore(&corpus, a),
        Command::Score(a) => cmd_score(&corpus, a),
        Command::Corpus {
            command: CorpusCommand::List { format },
        } => match corpus.list() {
            Ok(list) if format == Format::Json => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&list).expect("summary serializes")
                );
                Ok(0)
            }
            Ok(list) => {
                for e in list {
                    println!(
                        "{:<28} {} ({} roles, {} steps; scenarios: {})",
                        e.id,
                        e.ceremony,
                        e.roles,
                        e.steps,
                        e.scenarios.join(", ")
                    );
                }
                Ok(0)
            }
            Err(e) => Err(input(e)),
        },
        Command::Export { check, ids } => cmd_export(&corpus, check, ids),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
