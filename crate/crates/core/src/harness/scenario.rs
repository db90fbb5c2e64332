//! Scenario files (TOML, schema version 1).
//!
//! ```toml
//! schema = 1
//! name = "aircraft"
//! seed = 7
//! max_rounds = 60
//! opener = "A"
//!
//! [[issues]]
//! name = "price"
//! options = ["$1M", "$1.1M", "$1.2M"]
//!
//! [[agents]]
//! id = "A"
//! role = "seller"
//! deadline = 20
//! tactic = { family = "time-dependent", k = 0.0, beta = 1.0 }
//! weights = { price = 100 }
//! ratings = { price = [0, 50, 100] }
//!
//! [mode]
//! kind = "bilateral"
//! ```
//!
//! Ratings are listed in the same order as the issue's options.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordination::Strategy;
use crate::domain::{AgentId, Issue, IssueOption, PreferenceProfile, ProfileSpec};
use crate::prediction::PredictorConfig;
use crate::protocol::{AgentConfig, TerminationPolicy};
use crate::registry::IssueMenu;
use crate::tactics::TacticSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: invalid scenario:\n  - {}", .violations.join("\n  - "))]
    Invalid {
        origin: String,
        violations: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Buyer,
    Seller,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: Option<u32>,
    name: Option<String>,
    seed: Option<u64>,
    #[serde(default = "default_max_rounds")]
    max_rounds: u32,
    opener: Option<String>,
    #[serde(default)]
    deadline_jitter: u32,
    #[serde(default)]
    issues: Vec<RawIssue>,
    #[serde(default)]
    agents: Vec<RawAgent>,
    mode: Option<RawMode>,
}

fn default_max_rounds() -> u32 {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIssue {
    name: String,
    options: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    role: Option<Role>,
    deadline: u32,
    reservation: Option<f64>,
    tactic: TacticSpec,
    #[serde(default)]
    termination: TerminationPolicy,
    predictor: Option<PredictorConfig>,
    #[serde(default)]
    weights: BTreeMap<String, f64>,
    #[serde(default)]
    ratings: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawMode {
    Bilateral,
    OneToMany {
        buyer: String,
        suppliers: Vec<String>,
        strategy: StrategyName,
        theta: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StrategyName {
    Desperate,
    Patient,
    Adapted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub role: Option<Role>,
    pub config: AgentConfig,
}

impl AgentSpec {
    pub fn id(&self) -> &AgentId {
        self.config.id()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    /// Indices into [`Scenario::agents`].
    Bilateral { a: usize, b: usize },
    OneToMany {
        buyer: usize,
        suppliers: Vec<usize>,
        strategy: Strategy,
    },
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub max_rounds: u32,
    /// Agent that makes the first offer in every session.
    pub opener: AgentId,
    /// Each session draws every agent's deadline from `deadline ± jitter`.
    pub deadline_jitter: u32,
    pub issues: Vec<IssueMenu>,
    pub agents: Vec<AgentSpec>,
    pub mode: Mode,
}

impl Scenario {
    pub fn agent(&self, id: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.id().as_str() == id)
    }

    pub fn agent_mut(&mut self, id: &str) -> Option<&mut AgentSpec> {
        self.agents.iter_mut().find(|a| a.id().as_str() == id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &PreferenceProfile> {
        self.agents.iter().map(|a| &a.config.profile)
    }

    pub fn has_predictor(&self) -> bool {
        self.agents.iter().any(|a| a.config.predictor.is_some())
    }

    /// Copy with every predictor switched on or off.
    pub fn with_prediction(&self, enabled: bool) -> Scenario {
        let mut s = self.clone();
        for a in &mut s.agents {
            if let Some(p) = a.config.predictor.as_mut() {
                p.enabled = enabled && p.enabled;
            }
        }
        s
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses and validates scenario text; `origin` labels diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        let (line, column) = line_column(text, offset);
        ScenarioError::Parse {
            origin: origin.to_owned(),
            line,
            column,
            message: e.message().trim().to_owned(),
        }
    })?;
    validate(raw).map_err(|violations| ScenarioError::Invalid {
        origin: origin.to_owned(),
        violations,
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn validate(raw: RawScenario) -> Result<Scenario, Vec<String>> {
    let mut errs = Vec::new();

    match raw.schema {
        None => errs.push("missing field `schema`".to_owned()),
        Some(SCHEMA_VERSION) => {}
        Some(v) => errs.push(format!(
            "unsupported schema version {v} (expected {SCHEMA_VERSION})"
        )),
    }
    if raw.seed.is_none() {
        errs.push("missing field `seed`; every scenario must fix its seed".to_owned());
    }
    if raw.max_rounds == 0 {
        errs.push("max_rounds must be at least 1".to_owned());
    }

    if raw.issues.is_empty() {
        errs.push("no [[issues]] declared".to_owned());
    }
    let mut issue_names = BTreeSet::new();
    for (i, issue) in raw.issues.iter().enumerate() {
        if issue.name.trim().is_empty() {
            errs.push(format!("issues[{i}]: empty name"));
        }
        if !issue_names.insert(issue.name.as_str()) {
            errs.push(format!(
                "issues[{i}]: issue '{}' declared twice",
                issue.name
            ));
        }
        if issue.options.len() < 2 {
            errs.push(format!(
                "issues[{i}] '{}': needs at least two options",
                issue.name
            ));
        }
        let mut labels = BTreeSet::new();
        for o in &issue.options {
            if !labels.insert(o.as_str()) {
                errs.push(format!(
                    "issues[{i}] '{}': option '{o}' listed twice",
                    issue.name
                ));
            }
        }
    }

    let mut agents = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, a) in raw.agents.iter().enumerate() {
        let at = format!("agents[{i}] '{}'", a.id);
        if a.id.trim().is_empty() {
            errs.push(format!("agents[{i}]: empty id"));
        }
        if !ids.insert(a.id.as_str()) {
            errs.push(format!("{at}: duplicate agent id"));
        }
        if let Err(e) = a.tactic.validate() {
            errs.push(format!("{at}: tactic: {e}"));
        }
        if a.termination.window.is_some_and(|w| w < 2) {
            errs.push(format!("{at}: termination window must be at least 2"));
        }
        if let Some(p) = &a.predictor {
            if p.network.hidden == 0 {
                errs.push(format!("{at}: predictor needs at least one hidden unit"));
            }
            if !(p.network.learning_rate > 0.0) {
                errs.push(format!("{at}: predictor learning rate must be positive"));
            }
        }
        if a.deadline.saturating_add(raw.deadline_jitter) == 0 {
            errs.push(format!("{at}: deadline must be positive"));
        }

        let mut issues = Vec::new();
        for menu in &raw.issues {
            match a.ratings.get(&menu.name) {
                None => errs.push(format!("{at}: no ratings for issue '{}'", menu.name)),
                Some(r) if r.len() != menu.options.len() => errs.push(format!(
                    "{at}: issue '{}' has {} options but {} ratings",
                    menu.name,
                    menu.options.len(),
                    r.len()
                )),
                Some(r) => issues.push(Issue::new(
                    menu.name.clone(),
                    menu.options
                        .iter()
                        .zip(r)
                        .map(|(l, &x)| IssueOption::new(l.clone(), x))
                        .collect(),
                )),
            }
        }
        for name in a.ratings.keys() {
            if !issue_names.contains(name.as_str()) {
                errs.push(format!("{at}: ratings given for unknown issue '{name}'"));
            }
        }
        if issues.len() != raw.issues.len() {
            continue;
        }
        let spec = ProfileSpec {
            agent: AgentId::new(a.id.clone()),
            issues,
            weights: a.weights.clone(),
            deadline: a.deadline.max(1),
            reservation: a.reservation,
        };
        if let Err(vs) = crate::domain::validate_profile(&spec) {
            errs.extend(vs.into_iter().map(|v| format!("{at}: {v}")));
            continue;
        }
        match spec.build() {
            Ok(profile) => agents.push(AgentSpec {
                role: a.role,
                config: AgentConfig {
                    profile,
                    tactic: a.tactic.clone(),
                    termination: a.termination.clone(),
                    predictor: a.predictor.clone(),
                },
            }),
            Err(e) => errs.push(format!("{at}: {e}")),
        }
    }

    let index_of = |id: &str| raw.agents.iter().position(|a| a.id == id);
    let mode = match &raw.mode {
        None => {
            errs.push("missing [mode] table".to_owned());
            None
        }
        Some(RawMode::Bilateral) => {
            if raw.agents.len() != 2 {
                errs.push(format!(
                    "bilateral mode needs exactly two agents, found {}",
                    raw.agents.len()
                ));
                None
            } else {
                Some(Mode::Bilateral { a: 0, b: 1 })
            }
        }
        Some(RawMode::OneToMany {
            buyer,
            suppliers,
            strategy,
            theta,
        }) => {
            let strategy = match (strategy, theta) {
                (StrategyName::Adapted, Some(t)) if (0.0..=100.0).contains(t) => {
                    Some(Strategy::Adapted { theta: *t })
                }
                (StrategyName::Adapted, Some(t)) => {
                    errs.push(format!("mode.theta {t} outside [0, 100]"));
                    None
                }
                (StrategyName::Adapted, None) => {
                    errs.push("mode.theta is required for the adapted strategy".to_owned());
                    None
                }
                (_, Some(_)) => {
                    errs.push("mode.theta only applies to the adapted strategy".to_owned());
                    None
                }
                (StrategyName::Desperate, None) => Some(Strategy::Desperate),
                (StrategyName::Patient, None) => Some(Strategy::Patient),
            };
            let buyer_idx = index_of(buyer);
            if buyer_idx.is_none() {
                errs.push(format!("mode.buyer '{buyer}' is not a declared agent"));
            }
            if suppliers.is_empty() {
                errs.push("mode.suppliers is empty".to_owned());
            }
            let mut supplier_idx = Vec::new();
            let mut seen = BTreeSet::new();
            for s in suppliers {
                if !seen.insert(s.as_str()) {
                    errs.push(format!("mode.suppliers lists '{s}' twice"));
                }
                if s == buyer {
                    errs.push(format!("'{s}' cannot be both buyer and supplier"));
                }
                match index_of(s) {
                    Some(i) => supplier_idx.push(i),
                    None => errs.push(format!("mode.suppliers: '{s}' is not a declared agent")),
                }
            }
            match (buyer_idx, strategy) {
                (Some(buyer), Some(strategy)) => Some(Mode::OneToMany {
                    buyer,
                    suppliers: supplier_idx,
                    strategy,
                }),
                _ => None,
            }
        }
    };

    let opener = match &raw.opener {
        Some(o) if index_of(o).is_none() => {
            errs.push(format!("opener '{o}' is not a declared agent"));
            None
        }
        Some(o) => {
            if let Some(Mode::OneToMany {
                buyer, suppliers, ..
            }) = &mode
            {
                let idx = index_of(o);
                if idx != Some(*buyer) && !suppliers.iter().any(|&s| Some(s) == idx) {
                    errs.push(format!("opener '{o}' takes no part in the negotiation"));
                }
            }
            Some(AgentId::new(o.clone()))
        }
        None => raw.agents.first().map(|a| AgentId::new(a.id.clone())),
    };

    if errs.is_empty() {
        if let Some(first) = agents.first() {
            for other in &agents[1..] {
                if !first.config.profile.same_alphabet(&other.config.profile) {
                    errs.push(format!(
                        "agents '{}' and '{}' use different issue alphabets",
                        first.id(),
                        other.id()
                    ));
                }
            }
        }
    }

    match (errs.is_empty(), mode, opener, raw.seed) {
        (true, Some(mode), Some(opener), Some(seed)) => Ok(Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".to_owned()),
            seed,
            max_rounds: raw.max_rounds,
            opener,
            deadline_jitter: raw.deadline_jitter,
            issues: raw
                .issues
                .into_iter()
                .map(|i| IssueMenu::new(i.name, i.options))
                .collect(),
            agents,
            mode,
        }),
        _ => {
            if errs.is_empty() {
                errs.push("scenario declares no agents".to_owned());
            }
            Err(errs)
        }
    }
}
