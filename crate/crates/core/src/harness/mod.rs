//! Scenario loading, batch execution and output files.

mod scenario;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::coordination::{run_one_to_many, ContractChoice, CoordinationError, OneToManyReport};
use crate::domain::AgentId;
use crate::protocol::{
    run_session, Action, AgentConfig, ProtocolError, SessionOptions, SessionReport, SessionResult,
    SessionTrace,
};

pub use scenario::{
    load_scenario, parse_scenario, AgentSpec, Mode, Role, Scenario, ScenarioError, SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("session {index}: {source}")]
    Session {
        index: usize,
        #[source]
        source: ProtocolError,
    },
    #[error("session {index}: {source}")]
    Coordination {
        index: usize,
        #[source]
        source: CoordinationError,
    },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("scenario has no predictor configured, nothing to compare")]
    NoPredictor,
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Seed of session `index` in a batch.
pub fn session_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SessionRun {
    Bilateral(SessionReport),
    OneToMany(OneToManyReport),
}

/// How a session ended, reduced to what the statistics need.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ending {
    Agreement,
    EarlyTermination,
    Breakdown,
}

impl Ending {
    fn of(result: &SessionResult) -> Self {
        match result {
            SessionResult::Agreement { .. } => Ending::Agreement,
            SessionResult::EarlyTermination { .. } => Ending::EarlyTermination,
            SessionResult::Withdrawal { .. } | SessionResult::DeadlineExpiry { .. } => {
                Ending::Breakdown
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionRecord {
    pub index: usize,
    pub seed: u64,
    pub ending: Ending,
    /// Round of the outcome (the coordinator's decision round in one-to-many mode).
    pub rounds: u32,
    pub utilities: BTreeMap<AgentId, f64>,
    #[serde(skip)]
    pub run: SessionRun,
}

impl SessionRecord {
    fn new(index: usize, seed: u64, run: SessionRun) -> Self {
        let (ending, rounds, utilities) = match &run {
            SessionRun::Bilateral(r) => (
                Ending::of(&r.outcome.result),
                r.outcome.result.round(),
                r.outcome.utilities.clone(),
            ),
            SessionRun::OneToMany(r) => {
                let mut utilities: BTreeMap<AgentId, f64> = BTreeMap::new();
                for t in &r.threads {
                    for id in t.report.outcome.utilities.keys() {
                        utilities.entry(id.clone()).or_insert(0.0);
                    }
                }
                let ending = match &r.choice {
                    ContractChoice::Contract { thread, .. } => {
                        for (id, u) in &r.threads[*thread].report.outcome.utilities {
                            utilities.insert(id.clone(), *u);
                        }
                        Ending::Agreement
                    }
                    ContractChoice::NoContract { .. } => {
                        let all_early = r.threads.iter().all(|t| {
                            matches!(
                                t.report.outcome.result,
                                SessionResult::EarlyTermination { .. }
                            )
                        });
                        if all_early {
                            Ending::EarlyTermination
                        } else {
                            Ending::Breakdown
                        }
                    }
                };
                (ending, r.choice.decided_at(), utilities)
            }
        };
        Self {
            index,
            seed,
            ending,
            rounds,
            utilities,
            run,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    pub sessions: usize,
    pub agreements: usize,
    pub agreement_rate: f64,
    pub early_terminations: usize,
    pub breakdowns: usize,
    pub mean_rounds: f64,
    pub mean_utility: BTreeMap<AgentId, f64>,
}

impl SummaryStats {
    pub fn from_records(records: &[SessionRecord]) -> Self {
        let n = records.len();
        let count = |e: Ending| records.iter().filter(|r| r.ending == e).count();
        let agreements = count(Ending::Agreement);
        let mut utility_sums: BTreeMap<AgentId, f64> = BTreeMap::new();
        for r in records {
            for (id, u) in &r.utilities {
                *utility_sums.entry(id.clone()).or_insert(0.0) += u;
            }
        }
        let denom = n.max(1) as f64;
        Self {
            sessions: n,
            agreements,
            agreement_rate: agreements as f64 / denom,
            early_terminations: count(Ending::EarlyTermination),
            breakdowns: count(Ending::Breakdown),
            mean_rounds: records.iter().map(|r| r.rounds as f64).sum::<f64>() / denom,
            mean_utility: utility_sums
                .into_iter()
                .map(|(k, s)| (k, s / denom))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchResult {
    pub scenario: String,
    pub base_seed: u64,
    pub stats: SummaryStats,
    pub sessions: Vec<SessionRecord>,
}

/// Draws each agent's deadline for one session.
fn jittered(scenario: &Scenario, seed: u64) -> Vec<AgentConfig> {
    let mut configs: Vec<AgentConfig> = scenario.agents.iter().map(|a| a.config.clone()).collect();
    let j = scenario.deadline_jitter as i64;
    if j > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in &mut configs {
            let d = c.profile.deadline() as i64 + rng.gen_range(-j..=j);
            c.profile = c.profile.clone().with_deadline(d.max(1) as u32);
        }
    }
    configs
}

/// Runs one session of `scenario` with the given seed.
pub fn run_scenario_session(scenario: &Scenario, seed: u64) -> Result<SessionRun, HarnessError> {
    run_indexed(scenario, 0, seed)
}

fn run_indexed(scenario: &Scenario, index: usize, seed: u64) -> Result<SessionRun, HarnessError> {
    let configs = jittered(scenario, seed);
    match &scenario.mode {
        Mode::Bilateral { a, b } => {
            let opener = usize::from(configs[*a].id() != &scenario.opener);
            let options = SessionOptions {
                opener,
                max_rounds: scenario.max_rounds,
                seed,
            };
            run_session(&configs[*a], &configs[*b], &options)
                .map(SessionRun::Bilateral)
                .map_err(|source| HarnessError::Session { index, source })
        }
        Mode::OneToMany {
            buyer,
            suppliers,
            strategy,
        } => {
            let opener = usize::from(configs[*buyer].id() != &scenario.opener);
            let options = SessionOptions {
                opener,
                max_rounds: scenario.max_rounds,
                seed,
            };
            let suppliers: Vec<AgentConfig> =
                suppliers.iter().map(|&i| configs[i].clone()).collect();
            run_one_to_many(&configs[*buyer], &suppliers, *strategy, &options)
                .map(SessionRun::OneToMany)
                .map_err(|source| HarnessError::Coordination { index, source })
        }
    }
}

/// Runs `n` sessions; session `i` uses seed `scenario.seed + i`.
pub fn run_batch(scenario: &Scenario, n: usize) -> Result<BatchResult, HarnessError> {
    run_batch_from(scenario, n, scenario.seed)
}

pub fn run_batch_from(
    scenario: &Scenario,
    n: usize,
    base_seed: u64,
) -> Result<BatchResult, HarnessError> {
    if n == 0 {
        return Err(HarnessError::EmptyBatch);
    }
    let one = |i: usize| {
        let seed = session_seed(base_seed, i);
        run_indexed(scenario, i, seed).map(|run| SessionRecord::new(i, seed, run))
    };
    #[cfg(feature = "parallel")]
    let sessions = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let sessions = (0..n).map(one).collect::<Result<Vec<_>, _>>()?;
    Ok(BatchResult {
        scenario: scenario.name.clone(),
        base_seed,
        stats: SummaryStats::from_records(&sessions),
        sessions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionComparison {
    pub off: SummaryStats,
    pub on: SummaryStats,
    /// `on − off`.
    pub delta_agreement_rate: f64,
    pub delta_mean_rounds: f64,
    pub delta_mean_utility: BTreeMap<AgentId, f64>,
}

/// Runs the same seeds with predictors disabled and as configured.
pub fn compare_prediction(
    scenario: &Scenario,
    n: usize,
) -> Result<PredictionComparison, HarnessError> {
    if !scenario.has_predictor() {
        return Err(HarnessError::NoPredictor);
    }
    let off = run_batch(&scenario.with_prediction(false), n)?.stats;
    let on = run_batch(scenario, n)?.stats;
    let delta_mean_utility = on
        .mean_utility
        .iter()
        .map(|(id, u)| {
            (
                id.clone(),
                u - off.mean_utility.get(id).copied().unwrap_or(0.0),
            )
        })
        .collect();
    Ok(PredictionComparison {
        delta_agreement_rate: on.agreement_rate - off.agreement_rate,
        delta_mean_rounds: on.mean_rounds - off.mean_rounds,
        delta_mean_utility,
        off,
        on,
    })
}

pub const TRACE_DIR: &str = "traces";
pub const STATS_FILE: &str = "stats.json";
pub const SESSIONS_FILE: &str = "sessions.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_owned(),
        source,
    }
}

fn action_label(action: Action) -> String {
    action.to_string()
}

/// Writes one trace as CSV. Columns: `session, round, proposer, <one per
/// issue>, utility_self, utility_opponent_observed, action`.
pub fn write_trace_csv(
    path: &Path,
    scenario: &Scenario,
    session: usize,
    trace: &SessionTrace,
) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec![
        "session".to_owned(),
        "round".to_owned(),
        "proposer".to_owned(),
    ];
    header.extend(scenario.issues.iter().map(|i| i.name.clone()));
    header.extend(["utility_self", "utility_opponent_observed", "action"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for row in trace.rows() {
        let mut rec = vec![
            session.to_string(),
            row.round.to_string(),
            row.actor.to_string(),
        ];
        for issue in &scenario.issues {
            rec.push(
                row.offer
                    .as_ref()
                    .and_then(|o| o.choice(&issue.name))
                    .unwrap_or_default()
                    .to_owned(),
            );
        }
        rec.push(fmt(row.utility_self));
        rec.push(fmt(row.utility_opponent));
        rec.push(action_label(row.action));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Trace files written for one session, relative to the output directory.
pub fn trace_paths(record: &SessionRecord) -> Vec<PathBuf> {
    let dir = Path::new(TRACE_DIR);
    match &record.run {
        SessionRun::Bilateral(_) => vec![dir.join(format!("session-{:04}.csv", record.index))],
        SessionRun::OneToMany(r) => r
            .threads
            .iter()
            .map(|t| {
                dir.join(format!(
                    "session-{:04}-thread-{:02}.csv",
                    record.index, t.thread
                ))
            })
            .collect(),
    }
}

/// Writes `stats.json`, `sessions.json` and, with `traces`, one CSV per
/// session (per thread in one-to-many mode).
pub fn write_batch(
    out: &Path,
    scenario: &Scenario,
    batch: &BatchResult,
    traces: bool,
) -> Result<(), HarnessError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(&out.join(STATS_FILE), &batch.stats)?;
    write_json(&out.join(SESSIONS_FILE), &SessionsFile::from(batch))?;
    if traces {
        let dir = out.join(TRACE_DIR);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for record in &batch.sessions {
            let paths = trace_paths(record);
            match &record.run {
                SessionRun::Bilateral(r) => {
                    write_trace_csv(&out.join(&paths[0]), scenario, record.index, &r.trace)?
                }
                SessionRun::OneToMany(r) => {
                    for (t, p) in r.threads.iter().zip(&paths) {
                        write_trace_csv(&out.join(p), scenario, record.index, &t.report.trace)?;
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SessionsFile<'a> {
    scenario: &'a str,
    base_seed: u64,
    sessions: Vec<SessionLine<'a>>,
}

#[derive(Serialize)]
struct SessionLine<'a> {
    #[serde(flatten)]
    record: &'a SessionRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a SessionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<&'a ContractChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<Vec<&'a SessionResult>>,
}

impl<'a> From<&'a BatchResult> for SessionsFile<'a> {
    fn from(b: &'a BatchResult) -> Self {
        let sessions = b
            .sessions
            .iter()
            .map(|record| match &record.run {
                SessionRun::Bilateral(r) => SessionLine {
                    record,
                    result: Some(&r.outcome.result),
                    decision: None,
                    threads: None,
                },
                SessionRun::OneToMany(r) => SessionLine {
                    record,
                    result: None,
                    decision: Some(&r.choice),
                    threads: Some(r.threads.iter().map(|t| &t.report.outcome.result).collect()),
                },
            })
            .collect();
        Self {
            scenario: &b.scenario,
            base_seed: b.base_seed,
            sessions,
        }
    }
}

/// Scenario files shipped with the crate.
pub mod bundled {
    pub const AIRCRAFT: &str = include_str!("../../scenarios/aircraft.scenario");
    pub const SUPPLIERS: &str = include_str!("../../scenarios/suppliers.scenario");
    pub const DISJOINT: &str = include_str!("../../scenarios/disjoint.scenario");

    /// `(file name, contents)` of every bundled scenario.
    pub const ALL: [(&str, &str); 3] = [
        ("aircraft.scenario", AIRCRAFT),
        ("suppliers.scenario", SUPPLIERS),
        ("disjoint.scenario", DISJOINT),
    ];
}
