//! Bilateral alternating-offers protocol.
//!
//! At round `n` the acting agent answers the offer it received at `n − 1`:
//!
//! ```text
//! withdraw             if n > deadline
//! accept(incoming)     if V(incoming) > V(planned counter)
//! offer(planned)       otherwise
//! ```
//!
//! [`run_session`] drives two agents through this loop and records every
//! round in an append-only [`SessionTrace`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{total_profit, AgentId, DomainError, OfferVector, PreferenceProfile};
use crate::prediction::{Advice, PredictorConfig, PredictorState};
use crate::tactics::{plan_offer, OfferSpace, TacticContext, TacticError, TacticSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("session setup: {0}")]
    Setup(String),
    #[error("protocol violation by {offender}: {reason}")]
    Violation { offender: AgentId, reason: String },
    #[error("session already ended")]
    Ended,
    #[error("trace rows must be contiguous: expected round {expected}, got {got}")]
    NonContiguous { expected: u32, got: u32 },
    #[error(transparent)]
    Tactic(#[from] TacticError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    /// The opponent offered a zero-rated option.
    Threshold,
    /// The opponent's offers kept getting worse.
    Diverging,
    /// The predictor expects no acceptable offer before the deadline.
    Unprofitable,
    CoordinatorCancelled,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::Threshold => "threshold",
            TerminationReason::Diverging => "diverging",
            TerminationReason::Unprofitable => "unprofitable",
            TerminationReason::CoordinatorCancelled => "coordinator-cancelled",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Offer,
    Accept,
    Withdraw,
    DeadlineExpiry,
    Terminate(TerminationReason),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Offer => f.write_str("offer"),
            Action::Accept => f.write_str("accept"),
            Action::Withdraw => f.write_str("withdraw"),
            Action::DeadlineExpiry => f.write_str("deadline-expiry"),
            Action::Terminate(r) => write!(f, "terminate:{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: u32,
    pub actor: AgentId,
    pub action: Action,
    pub offer: Option<OfferVector>,
    /// Utility of `offer` to the actor.
    pub utility_self: Option<f64>,
    /// Utility of `offer` to the other party, under its own profile.
    pub utility_opponent: Option<f64>,
    /// Target utility the actor's tactic aimed for.
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceRow {
    pub fn offer(
        round: u32,
        actor: AgentId,
        offer: OfferVector,
        utility_self: f64,
        utility_opponent: f64,
        target: Option<f64>,
    ) -> Self {
        Self {
            round,
            actor,
            action: Action::Offer,
            offer: Some(offer),
            utility_self: Some(utility_self),
            utility_opponent: Some(utility_opponent),
            target,
            note: None,
        }
    }

    pub fn terminal(round: u32, actor: AgentId, action: Action) -> Self {
        Self {
            round,
            actor,
            action,
            offer: None,
            utility_self: None,
            utility_opponent: None,
            target: None,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Append-only record of a session, one row per round starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionTrace {
    parties: [AgentId; 2],
    rows: Vec<TraceRow>,
}

impl SessionTrace {
    pub fn new(parties: [AgentId; 2]) -> Self {
        Self {
            parties,
            rows: Vec::new(),
        }
    }

    pub fn parties(&self) -> &[AgentId; 2] {
        &self.parties
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn push(&mut self, row: TraceRow) -> Result<(), ProtocolError> {
        let expected = self.rows.len() as u32;
        if row.round != expected {
            return Err(ProtocolError::NonContiguous {
                expected,
                got: row.round,
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Drops every row from `round` on, for coordinator cancellation.
    pub(crate) fn truncate(&mut self, round: u32) {
        self.rows.truncate(round as usize);
    }

    /// Offers made by anyone other than `agent`, oldest first.
    pub fn offers_against<'a>(
        &'a self,
        agent: &'a AgentId,
    ) -> impl Iterator<Item = &'a OfferVector> + 'a {
        self.rows
            .iter()
            .filter(move |r| &r.actor != agent && r.action == Action::Offer)
            .filter_map(|r| r.offer.as_ref())
    }

    fn last_target_of(&self, agent: &AgentId) -> Option<f64> {
        self.rows
            .iter()
            .rev()
            .find(|r| &r.actor == agent && r.action == Action::Offer)
            .and_then(|r| r.target)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    AwaitingOffer,
    AwaitingResponse,
    Ended,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegotiationState {
    pub round: u32,
    pub phase: Phase,
    pub history: SessionTrace,
    pub active: AgentId,
}

impl NegotiationState {
    pub fn new(parties: [AgentId; 2]) -> Self {
        Self {
            round: 0,
            phase: Phase::AwaitingOffer,
            active: parties[0].clone(),
            history: SessionTrace::new(parties),
        }
    }

    /// A state at round `round` waiting for `active` to respond.
    pub fn responding(active: AgentId, opponent: AgentId, round: u32) -> Self {
        Self {
            round,
            phase: Phase::AwaitingResponse,
            history: SessionTrace::new([opponent, active.clone()]),
            active,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "response", content = "offer", rename_all = "kebab-case")]
pub enum Response {
    Withdraw,
    Accept(OfferVector),
    Offer(OfferVector),
}

/// The response rule, with guards checked in order.
pub fn respond(
    profile: &PreferenceProfile,
    state: &NegotiationState,
    incoming: &OfferVector,
    planned_counter: &OfferVector,
) -> Result<Response, ProtocolError> {
    if state.phase == Phase::Ended {
        return Err(ProtocolError::Ended);
    }
    if state.round > profile.deadline() {
        return Ok(Response::Withdraw);
    }
    let incoming_value = total_profit(profile, incoming).map_err(|e| ProtocolError::Violation {
        offender: incoming.proposer.clone(),
        reason: e.to_string(),
    })?;
    let planned_value =
        total_profit(profile, planned_counter).map_err(|e| ProtocolError::Violation {
            offender: profile.agent().clone(),
            reason: e.to_string(),
        })?;
    if incoming_value > planned_value {
        Ok(Response::Accept(incoming.clone()))
    } else {
        Ok(Response::Offer(planned_counter.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Continue,
    Terminate(TerminationReason),
}

/// Whether the latest offer received by `profile`'s agent picks a zero-rated option.
pub fn threshold_crossed(trace: &SessionTrace, profile: &PreferenceProfile) -> bool {
    trace
        .offers_against(profile.agent())
        .last()
        .is_some_and(|o| profile.crosses_threshold(o))
}

/// Whether the last `window` received offers have strictly decreasing utility.
pub fn diverging(trace: &SessionTrace, profile: &PreferenceProfile, window: usize) -> bool {
    if window < 2 {
        return false;
    }
    let utilities: Vec<f64> = trace
        .offers_against(profile.agent())
        .filter_map(|o| total_profit(profile, o).ok())
        .collect();
    utilities.len() >= window
        && utilities[utilities.len() - window..]
            .windows(2)
            .all(|w| w[1] < w[0])
}

pub fn check_termination(
    trace: &SessionTrace,
    profile: &PreferenceProfile,
    window: usize,
) -> Termination {
    if threshold_crossed(trace, profile) {
        Termination::Terminate(TerminationReason::Threshold)
    } else if diverging(trace, profile, window) {
        Termination::Terminate(TerminationReason::Diverging)
    } else {
        Termination::Continue
    }
}

fn default_window() -> Option<usize> {
    Some(3)
}

/// Which early-exit checks an agent applies before counter-offering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationPolicy {
    /// End the session when the opponent offers a zero-rated option.
    pub threshold: bool,
    /// Length of the strictly-decreasing run that ends the session.
    #[serde(default = "default_window")]
    pub window: Option<usize>,
}

impl Default for TerminationPolicy {
    fn default() -> Self {
        Self {
            threshold: false,
            window: default_window(),
        }
    }
}

/// One negotiating party: private profile plus decision machinery.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub profile: PreferenceProfile,
    pub tactic: TacticSpec,
    pub termination: TerminationPolicy,
    pub predictor: Option<PredictorConfig>,
}

impl AgentConfig {
    pub fn new(profile: PreferenceProfile, tactic: TacticSpec) -> Self {
        Self {
            profile,
            tactic,
            termination: TerminationPolicy::default(),
            predictor: None,
        }
    }

    pub fn id(&self) -> &AgentId {
        self.profile.agent()
    }

    fn predictor_enabled(&self) -> Option<&PredictorConfig> {
        self.predictor.as_ref().filter(|p| p.enabled)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionOptions {
    /// Index (0 or 1) of the agent that makes the first offer.
    pub opener: usize,
    pub max_rounds: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum SessionResult {
    Agreement {
        offer: OfferVector,
        round: u32,
    },
    Withdrawal {
        party: AgentId,
        round: u32,
    },
    DeadlineExpiry {
        round: u32,
    },
    EarlyTermination {
        party: AgentId,
        reason: TerminationReason,
        round: u32,
    },
}

impl SessionResult {
    pub fn round(&self) -> u32 {
        match self {
            SessionResult::Agreement { round, .. }
            | SessionResult::Withdrawal { round, .. }
            | SessionResult::DeadlineExpiry { round }
            | SessionResult::EarlyTermination { round, .. } => *round,
        }
    }

    pub fn is_agreement(&self) -> bool {
        matches!(self, SessionResult::Agreement { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionOutcome {
    pub result: SessionResult,
    /// Final utility per party; zero without agreement.
    pub utilities: BTreeMap<AgentId, f64>,
}

impl SessionOutcome {
    pub fn utility_of(&self, agent: &AgentId) -> f64 {
        self.utilities.get(agent).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionReport {
    pub outcome: SessionOutcome,
    pub trace: SessionTrace,
}

/// Per-agent seed for anything random inside a session.
pub fn agent_seed(session_seed: u64, index: usize) -> u64 {
    session_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64 + 1)
}

struct Party<'a> {
    config: &'a AgentConfig,
    space: OfferSpace,
    predictor: Option<PredictorState>,
}

/// Runs one bilateral session to completion.
pub fn run_session(
    a: &AgentConfig,
    b: &AgentConfig,
    options: &SessionOptions,
) -> Result<SessionReport, ProtocolError> {
    if options.opener > 1 {
        return Err(ProtocolError::Setup(format!(
            "opener index {} is not 0 or 1",
            options.opener
        )));
    }
    if a.id() == b.id() {
        return Err(ProtocolError::Setup(format!(
            "both parties are '{}'",
            a.id()
        )));
    }
    if !a.profile.same_alphabet(&b.profile) {
        return Err(ProtocolError::Setup(format!(
            "'{}' and '{}' negotiate over different issues or options",
            a.id(),
            b.id()
        )));
    }
    a.tactic.validate()?;
    b.tactic.validate()?;

    let configs = if options.opener == 0 { [a, b] } else { [b, a] };
    let mut parties = Vec::with_capacity(2);
    for (i, cfg) in configs.iter().enumerate() {
        parties.push(Party {
            config: cfg,
            space: OfferSpace::new(&cfg.profile)?,
            predictor: cfg
                .predictor_enabled()
                .map(|p| PredictorState::new(p.clone(), &cfg.profile, agent_seed(options.seed, i))),
        });
    }

    let ids = [configs[0].id().clone(), configs[1].id().clone()];
    let mut state = NegotiationState::new(ids.clone());
    let mut last_offer: Option<OfferVector> = None;

    let result = loop {
        let n = state.round;
        let me = (n % 2) as usize;
        let (actor, other) = if me == 0 {
            let (x, y) = parties.split_at_mut(1);
            (&mut x[0], &y[0])
        } else {
            let (x, y) = parties.split_at_mut(1);
            (&mut y[0], &x[0])
        };
        let actor_id = ids[me].clone();
        state.active = actor_id.clone();

        if n >= options.max_rounds {
            state
                .history
                .push(TraceRow::terminal(n, actor_id, Action::DeadlineExpiry))?;
            break SessionResult::DeadlineExpiry { round: n };
        }

        let opponent_utilities: Vec<f64> = state
            .history
            .offers_against(&actor_id)
            .map(|o| total_profit(&actor.config.profile, o))
            .collect::<Result<_, _>>()?;
        let ctx = TacticContext {
            round: n,
            deadline: actor.config.profile.deadline(),
            opponent_utilities: &opponent_utilities,
            own_last_target: state.history.last_target_of(&actor_id),
            resource: None,
        };
        let planned = plan_offer(&actor.config.tactic, &actor.space, &ctx)?;
        let fallback_note = planned
            .fallback
            .then_some("behavior fallback: insufficient history");

        let Some(incoming) = last_offer.as_ref() else {
            // opening move
            let opp_u = total_profit(&other.config.profile, &planned.offer)?;
            let mut row = TraceRow::offer(
                n,
                actor_id,
                planned.offer.clone(),
                planned.utility,
                opp_u,
                Some(planned.target),
            );
            if let Some(note) = fallback_note {
                row = row.with_note(note);
            }
            state.history.push(row)?;
            state.phase = Phase::AwaitingResponse;
            last_offer = Some(planned.offer);
            state.round += 1;
            continue;
        };

        let response = match respond(&actor.config.profile, &state, incoming, &planned.offer) {
            Ok(r) => r,
            Err(ProtocolError::Violation { offender, reason }) => {
                let row = TraceRow::terminal(n, actor_id, Action::Withdraw)
                    .with_note(format!("violation: {reason}"));
                state.history.push(row)?;
                break SessionResult::Withdrawal {
                    party: offender,
                    round: n,
                };
            }
            Err(e) => return Err(e),
        };

        let crosses = actor.config.profile.crosses_threshold(incoming);
        if crosses && actor.config.termination.threshold && response != Response::Withdraw {
            let reason = TerminationReason::Threshold;
            state.history.push(TraceRow::terminal(
                n,
                actor_id.clone(),
                Action::Terminate(reason),
            ))?;
            break SessionResult::EarlyTermination {
                party: actor_id,
                reason,
                round: n,
            };
        }

        match response {
            Response::Withdraw => {
                state
                    .history
                    .push(TraceRow::terminal(n, actor_id.clone(), Action::Withdraw))?;
                break SessionResult::Withdrawal {
                    party: actor_id,
                    round: n,
                };
            }
            Response::Accept(offer) if !crosses => {
                let own = total_profit(&actor.config.profile, &offer)?;
                let theirs = total_profit(&other.config.profile, &offer)?;
                state.history.push(TraceRow {
                    action: Action::Accept,
                    ..TraceRow::offer(n, actor_id, offer.clone(), own, theirs, None)
                })?;
                break SessionResult::Agreement { offer, round: n };
            }
            Response::Accept(_) | Response::Offer(_) => {}
        }

        // about to counter-offer
        if let Some(window) = actor.config.termination.window {
            if diverging(&state.history, &actor.config.profile, window) {
                let reason = TerminationReason::Diverging;
                state.history.push(TraceRow::terminal(
                    n,
                    actor_id.clone(),
                    Action::Terminate(reason),
                ))?;
                break SessionResult::EarlyTermination {
                    party: actor_id,
                    reason,
                    round: n,
                };
            }
        }
        let mut advice_note = None;
        if let Some(predictor) = actor.predictor.as_mut() {
            match predictor.advise(&state.history, &actor.config.profile) {
                Advice::TerminateUnprofitable => {
                    let reason = TerminationReason::Unprofitable;
                    state.history.push(TraceRow::terminal(
                        n,
                        actor_id.clone(),
                        Action::Terminate(reason),
                    ))?;
                    break SessionResult::EarlyTermination {
                        party: actor_id,
                        reason,
                        round: n,
                    };
                }
                Advice::AcceptanceForecast { round } => {
                    advice_note = Some(format!("forecast round {round:.3}"))
                }
                Advice::None | Advice::Continue => {}
            }
        }
        if other.config.profile.deadline() < n + 1 {
            // the counterpart cannot answer any more
            state
                .history
                .push(TraceRow::terminal(n, actor_id, Action::DeadlineExpiry))?;
            break SessionResult::DeadlineExpiry { round: n };
        }

        let opp_u = total_profit(&other.config.profile, &planned.offer)?;
        let mut row = TraceRow::offer(
            n,
            actor_id,
            planned.offer.clone(),
            planned.utility,
            opp_u,
            Some(planned.target),
        );
        if let Some(note) = fallback_note.map(str::to_owned).or(advice_note) {
            row = row.with_note(note);
        }
        state.history.push(row)?;
        last_offer = Some(planned.offer);
        state.round += 1;
    };
    state.phase = Phase::Ended;

    let mut utilities = BTreeMap::new();
    for cfg in [a, b] {
        let u = match &result {
            SessionResult::Agreement { offer, .. } => total_profit(&cfg.profile, offer)?,
            _ => 0.0,
        };
        utilities.insert(cfg.id().clone(), u);
    }
    Ok(SessionReport {
        outcome: SessionOutcome { result, utilities },
        trace: state.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Issue;

    fn profile(id: &str, ratings: &[(&str, f64)], deadline: u32) -> PreferenceProfile {
        PreferenceProfile::new(
            id,
            vec![Issue::rated("price", ratings)],
            [("price".to_string(), 100.0)].into_iter().collect(),
            deadline,
        )
        .unwrap()
    }

    fn five_prices(id: &str, ascending: bool, deadline: u32) -> PreferenceProfile {
        let r = |i: usize| {
            if ascending {
                i as f64 * 25.0
            } else {
                100.0 - i as f64 * 25.0
            }
        };
        profile(
            id,
            &[
                ("p0", r(0)),
                ("p1", r(1)),
                ("p2", r(2)),
                ("p3", r(3)),
                ("p4", r(4)),
            ],
            deadline,
        )
    }

    fn offer(by: &str, label: &str) -> OfferVector {
        OfferVector::new(by, 1, [("price", label)])
    }

    #[test]
    fn respond_guards() {
        let p = profile(
            "seller",
            &[
                ("low", 0.0),
                ("mid", 60.0),
                ("good", 70.0),
                ("best", 80.0),
                ("top", 100.0),
            ],
            10,
        );
        let late = NegotiationState::responding("seller".into(), "buyer".into(), 11);
        assert_eq!(
            respond(&p, &late, &offer("buyer", "best"), &offer("seller", "good")).unwrap(),
            Response::Withdraw
        );
        let on_time = NegotiationState::responding("seller".into(), "buyer".into(), 10);
        let incoming = offer("buyer", "best");
        assert_eq!(
            respond(&p, &on_time, &incoming, &offer("seller", "good")).unwrap(),
            Response::Accept(incoming.clone())
        );
        assert_eq!(
            respond(
                &p,
                &on_time,
                &offer("buyer", "mid"),
                &offer("seller", "good")
            )
            .unwrap(),
            Response::Offer(offer("seller", "good"))
        );
        // ties counter-offer
        assert_eq!(
            respond(
                &p,
                &on_time,
                &offer("buyer", "good"),
                &offer("seller", "good")
            )
            .unwrap(),
            Response::Offer(offer("seller", "good"))
        );
    }

    #[test]
    fn respond_reports_violations() {
        let p = five_prices("seller", true, 10);
        let s = NegotiationState::responding("seller".into(), "buyer".into(), 1);
        let err = respond(&p, &s, &offer("buyer", "p9"), &offer("seller", "p4")).unwrap_err();
        assert!(
            matches!(err, ProtocolError::Violation { offender, .. } if offender.as_str() == "buyer")
        );
        let mut ended = s.clone();
        ended.phase = Phase::Ended;
        assert_eq!(
            respond(&p, &ended, &offer("buyer", "p1"), &offer("seller", "p4")),
            Err(ProtocolError::Ended)
        );
    }

    fn trace_of(utilities_to_me: &[&str]) -> SessionTrace {
        let mut t = SessionTrace::new(["me".into(), "you".into()]);
        for (i, label) in utilities_to_me.iter().enumerate() {
            let r = 2 * i as u32;
            t.push(TraceRow::offer(
                r,
                "you".into(),
                offer("you", label),
                0.0,
                0.0,
                None,
            ))
            .unwrap();
            t.push(TraceRow::offer(
                r + 1,
                "me".into(),
                offer("me", "p4"),
                0.0,
                0.0,
                None,
            ))
            .unwrap();
        }
        t
    }

    #[test]
    fn termination_checks() {
        let me = profile(
            "me",
            &[
                ("p0", 0.0),
                ("p1", 40.0),
                ("p2", 45.0),
                ("p3", 47.0),
                ("p4", 50.0),
            ],
            10,
        );
        assert_eq!(
            check_termination(&trace_of(&["p4", "p2", "p1"]), &me, 3),
            Termination::Terminate(TerminationReason::Diverging)
        );
        assert_eq!(
            check_termination(&trace_of(&["p4", "p2", "p3"]), &me, 3),
            Termination::Continue
        );
        assert_eq!(
            check_termination(&trace_of(&["p4", "p0"]), &me, 3),
            Termination::Terminate(TerminationReason::Threshold)
        );
        assert_eq!(
            check_termination(&trace_of(&[]), &me, 3),
            Termination::Continue
        );
    }

    #[test]
    fn trace_rejects_gaps() {
        let mut t = SessionTrace::new(["a".into(), "b".into()]);
        let err = t
            .push(TraceRow::terminal(1, "a".into(), Action::Withdraw))
            .unwrap_err();
        assert_eq!(
            err,
            ProtocolError::NonContiguous {
                expected: 0,
                got: 1
            }
        );
    }

    #[test]
    fn zero_rounds_expire_immediately() {
        let a = AgentConfig::new(five_prices("buyer", false, 10), TacticSpec::linear());
        let b = AgentConfig::new(five_prices("seller", true, 10), TacticSpec::linear());
        let r = run_session(
            &a,
            &b,
            &SessionOptions {
                opener: 0,
                max_rounds: 0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(r.outcome.result, SessionResult::DeadlineExpiry { round: 0 });
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn linear_conceders_agree_in_the_middle() {
        let a = AgentConfig::new(five_prices("buyer", false, 10), TacticSpec::linear());
        let b = AgentConfig::new(five_prices("seller", true, 10), TacticSpec::linear());
        let r = run_session(
            &a,
            &b,
            &SessionOptions {
                opener: 0,
                max_rounds: 50,
                seed: 1,
            },
        )
        .unwrap();
        let SessionResult::Agreement { offer, round } = &r.outcome.result else {
            panic!("no agreement: {:?}", r.outcome.result);
        };
        assert!(*round <= 10);
        assert_eq!(offer.choice("price"), Some("p2"));
        assert_eq!(r.trace.len() as u32, round + 1);
    }

    #[test]
    fn mismatched_alphabets_fail_setup() {
        let a = AgentConfig::new(five_prices("buyer", false, 10), TacticSpec::linear());
        let b = AgentConfig::new(
            profile("seller", &[("x", 0.0), ("y", 1.0)], 10),
            TacticSpec::linear(),
        );
        let err = run_session(
            &a,
            &b,
            &SessionOptions {
                opener: 0,
                max_rounds: 5,
                seed: 1,
            },
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::Setup(_)));
    }

    #[test]
    fn earlier_deadline_withdraws_within_one_round() {
        // seller never concedes below p4 region; buyer gives up after its deadline
        let buyer = AgentConfig::new(
            five_prices("buyer", false, 6),
            TacticSpec::TimeDependent { k: 0.0, beta: 0.2 },
        );
        let seller = AgentConfig::new(
            five_prices("seller", true, 30),
            TacticSpec::TimeDependent { k: 0.0, beta: 0.2 },
        );
        for opener in 0..2 {
            let r = run_session(
                &buyer,
                &seller,
                &SessionOptions {
                    opener,
                    max_rounds: 50,
                    seed: 1,
                },
            )
            .unwrap();
            assert!(!r.outcome.result.is_agreement());
            assert!(r.outcome.result.round() <= 7, "{:?}", r.outcome.result);
        }
    }
}
