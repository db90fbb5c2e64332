//! One-to-many negotiation: a coordinating buyer runs one sub-buyer session
//! per supplier and decides which result becomes the contract.
//!
//! The coordinator sees thread results in `(completion round, thread id)`
//! order, so every strategy is deterministic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, OfferVector};
use crate::protocol::{
    run_session, Action, AgentConfig, ProtocolError, SessionOptions, SessionOutcome, SessionReport,
    SessionResult, TerminationReason, TraceRow,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinationError {
    #[error("one-to-many negotiation needs at least one supplier")]
    NoSuppliers,
    #[error("adapted threshold {0} outside [0, 100]")]
    Threshold(f64),
    #[error("thread {thread} ({supplier}): {source}")]
    Session {
        thread: usize,
        supplier: AgentId,
        source: ProtocolError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Strategy {
    /// Take the first success.
    Desperate,
    /// Wait for every thread and take the best success.
    Patient,
    /// Take the first success worth at least `theta`, otherwise act patient.
    Adapted { theta: f64 },
}

impl Strategy {
    pub fn validate(&self) -> Result<(), CoordinationError> {
        match *self {
            Strategy::Adapted { theta } if !(0.0..=100.0).contains(&theta) => {
                Err(CoordinationError::Threshold(theta))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Desperate => f.write_str("desperate"),
            Strategy::Patient => f.write_str("patient"),
            Strategy::Adapted { theta } => write!(f, "adapted(θ={theta})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubBuyerResult {
    pub thread: usize,
    pub supplier: AgentId,
    pub outcome: SessionResult,
    pub completion_round: u32,
    /// Utility to the buyer; present only for agreements.
    pub utility: Option<f64>,
}

impl SubBuyerResult {
    pub fn agreed(
        thread: usize,
        supplier: impl Into<AgentId>,
        round: u32,
        utility: f64,
        offer: OfferVector,
    ) -> Self {
        Self {
            thread,
            supplier: supplier.into(),
            outcome: SessionResult::Agreement { offer, round },
            completion_round: round,
            utility: Some(utility),
        }
    }

    pub fn failed(thread: usize, supplier: impl Into<AgentId>, outcome: SessionResult) -> Self {
        debug_assert!(!outcome.is_agreement());
        Self {
            thread,
            supplier: supplier.into(),
            completion_round: outcome.round(),
            outcome,
            utility: None,
        }
    }

    fn from_report(
        thread: usize,
        supplier: AgentId,
        buyer: &AgentId,
        report: &SessionReport,
    ) -> Self {
        let outcome = report.outcome.result.clone();
        let utility = outcome
            .is_agreement()
            .then(|| report.outcome.utility_of(buyer));
        Self {
            thread,
            supplier,
            completion_round: outcome.round(),
            outcome,
            utility,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "kebab-case")]
pub enum ContractChoice {
    Contract {
        thread: usize,
        supplier: AgentId,
        utility: f64,
        /// Round at which the chosen session reached agreement.
        round: u32,
        /// Round at which the coordinator committed.
        decided_at: u32,
    },
    NoContract {
        decided_at: u32,
    },
}

impl ContractChoice {
    pub fn utility(&self) -> Option<f64> {
        match self {
            ContractChoice::Contract { utility, .. } => Some(*utility),
            ContractChoice::NoContract { .. } => None,
        }
    }

    pub fn thread(&self) -> Option<usize> {
        match self {
            ContractChoice::Contract { thread, .. } => Some(*thread),
            ContractChoice::NoContract { .. } => None,
        }
    }

    pub fn decided_at(&self) -> u32 {
        match self {
            ContractChoice::Contract { decided_at, .. }
            | ContractChoice::NoContract { decided_at } => *decided_at,
        }
    }
}

fn last_round(results: &[SubBuyerResult]) -> u32 {
    results
        .iter()
        .map(|r| r.completion_round)
        .max()
        .unwrap_or(0)
}

fn contract(r: &SubBuyerResult, decided_at: u32) -> ContractChoice {
    ContractChoice::Contract {
        thread: r.thread,
        supplier: r.supplier.clone(),
        utility: r.utility.unwrap_or(0.0),
        round: r.completion_round,
        decided_at,
    }
}

/// Highest utility wins; equal utilities fall back to `tie`.
fn best_by<'a>(
    candidates: impl Iterator<Item = &'a SubBuyerResult>,
    tie: impl Fn(&SubBuyerResult, &SubBuyerResult) -> Ordering,
) -> Option<&'a SubBuyerResult> {
    candidates.min_by(|a, b| {
        let (ua, ub) = (
            a.utility.unwrap_or(f64::NEG_INFINITY),
            b.utility.unwrap_or(f64::NEG_INFINITY),
        );
        ub.total_cmp(&ua).then_with(|| tie(a, b))
    })
}

/// Earliest round holding a success that passes `qualifies`; best of that round.
fn first_qualifying(
    results: &[SubBuyerResult],
    qualifies: impl Fn(f64) -> bool,
) -> Option<&SubBuyerResult> {
    let round = results
        .iter()
        .filter(|r| r.utility.is_some_and(&qualifies))
        .map(|r| r.completion_round)
        .min()?;
    best_by(
        results
            .iter()
            .filter(|r| r.completion_round == round && r.utility.is_some_and(&qualifies)),
        |a, b| a.thread.cmp(&b.thread),
    )
}

pub fn coordinate_desperate(results: &[SubBuyerResult]) -> ContractChoice {
    match first_qualifying(results, |_| true) {
        Some(r) => contract(r, r.completion_round),
        None => ContractChoice::NoContract {
            decided_at: last_round(results),
        },
    }
}

pub fn coordinate_patient(results: &[SubBuyerResult]) -> ContractChoice {
    let decided_at = last_round(results);
    let best = best_by(results.iter().filter(|r| r.utility.is_some()), |a, b| {
        a.completion_round
            .cmp(&b.completion_round)
            .then(a.thread.cmp(&b.thread))
    });
    match best {
        Some(r) => contract(r, decided_at),
        None => ContractChoice::NoContract { decided_at },
    }
}

pub fn coordinate_adapted(results: &[SubBuyerResult], theta: f64) -> ContractChoice {
    match first_qualifying(results, |u| u >= theta) {
        Some(r) => contract(r, r.completion_round),
        None => coordinate_patient(results),
    }
}

pub fn coordinate(strategy: Strategy, results: &[SubBuyerResult]) -> ContractChoice {
    match strategy {
        Strategy::Desperate => coordinate_desperate(results),
        Strategy::Patient => coordinate_patient(results),
        Strategy::Adapted { theta } => coordinate_adapted(results, theta),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThreadReport {
    pub thread: usize,
    pub supplier: AgentId,
    pub report: SessionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneToManyReport {
    pub strategy: Strategy,
    pub results: Vec<SubBuyerResult>,
    pub choice: ContractChoice,
    /// Threads after cancellation, indexed by thread id.
    pub threads: Vec<ThreadReport>,
}

/// Seed of sub-buyer thread `thread` within a one-to-many session.
pub fn thread_seed(seed: u64, thread: usize) -> u64 {
    seed.wrapping_mul(31).wrapping_add(thread as u64)
}

/// Runs one sub-buyer session per supplier, then applies `strategy`.
///
/// Threads still running when the coordinator commits are cut at the
/// decision round and marked coordinator-cancelled.
pub fn run_one_to_many(
    buyer: &AgentConfig,
    suppliers: &[AgentConfig],
    strategy: Strategy,
    options: &SessionOptions,
) -> Result<OneToManyReport, CoordinationError> {
    if suppliers.is_empty() {
        return Err(CoordinationError::NoSuppliers);
    }
    strategy.validate()?;

    let mut threads = Vec::with_capacity(suppliers.len());
    for (thread, supplier) in suppliers.iter().enumerate() {
        let opts = SessionOptions {
            seed: thread_seed(options.seed, thread),
            ..*options
        };
        let report =
            run_session(buyer, supplier, &opts).map_err(|source| CoordinationError::Session {
                thread,
                supplier: supplier.id().clone(),
                source,
            })?;
        threads.push(ThreadReport {
            thread,
            supplier: supplier.id().clone(),
            report,
        });
    }

    let mut results: Vec<SubBuyerResult> = threads
        .iter()
        .map(|t| SubBuyerResult::from_report(t.thread, t.supplier.clone(), buyer.id(), &t.report))
        .collect();
    results.sort_by_key(|r| (r.completion_round, r.thread));
    let choice = coordinate(strategy, &results);

    let decided_at = choice.decided_at();
    for t in &mut threads {
        if Some(t.thread) == choice.thread() || t.report.outcome.result.round() <= decided_at {
            continue;
        }
        cancel(t, buyer.id(), decided_at);
    }

    Ok(OneToManyReport {
        strategy,
        results,
        choice,
        threads,
    })
}

fn cancel(t: &mut ThreadReport, buyer: &AgentId, round: u32) {
    let reason = TerminationReason::CoordinatorCancelled;
    let trace = &mut t.report.trace;
    trace.truncate(round);
    // the truncated trace ends at round - 1, so this push cannot fail
    let _ = trace.push(TraceRow::terminal(
        round,
        buyer.clone(),
        Action::Terminate(reason),
    ));
    let utilities = t
        .report
        .outcome
        .utilities
        .keys()
        .map(|k| (k.clone(), 0.0))
        .collect();
    t.report.outcome = SessionOutcome {
        result: SessionResult::EarlyTermination {
            party: buyer.clone(),
            reason,
            round,
        },
        utilities,
    };
}
