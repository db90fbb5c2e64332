//! Offer generators: time-dependent, resource-dependent and behavior-dependent
//! tactics, plus weighted mixtures of them.
//!
//! Every tactic produces a *target utility* in the agent's own utility space.
//! The target is then mapped onto the discrete offer space by picking the
//! offer with the smallest utility at or above the target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    acceptance_zone, AgentId, DomainError, OfferVector, PreferenceProfile, ScoredOffer,
};

const EPS: f64 = 1e-9;
const MAX_UTILITY: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TacticError {
    #[error("invalid tactic parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn one() -> f64 {
    1.0
}

fn one_round() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TacticSpec {
    /// Concession driven by elapsed time. `beta < 1` is boulware, `beta > 1` conceder.
    TimeDependent {
        #[serde(default)]
        k: f64,
        #[serde(default = "one")]
        beta: f64,
    },
    /// Concession driven by how much of a resource is left.
    ResourceDependent {
        #[serde(default)]
        k: f64,
    },
    /// Relative tit-for-tat with imitation lag `delta`.
    BehaviorDependent {
        #[serde(default = "one_round")]
        delta: u32,
    },
    Mixed {
        parts: Vec<WeightedTactic>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTactic {
    pub weight: f64,
    pub tactic: TacticSpec,
}

impl TacticSpec {
    pub fn linear() -> Self {
        TacticSpec::TimeDependent { k: 0.0, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<(), TacticError> {
        match self {
            TacticSpec::TimeDependent { k, beta } => {
                check_k(*k)?;
                if !(*beta > 0.0) || !beta.is_finite() {
                    return Err(TacticError::Parameter(format!(
                        "beta must be > 0, got {beta}"
                    )));
                }
                Ok(())
            }
            TacticSpec::ResourceDependent { k } => check_k(*k),
            TacticSpec::BehaviorDependent { delta } => {
                if *delta == 0 {
                    return Err(TacticError::Parameter("delta must be at least 1".into()));
                }
                Ok(())
            }
            TacticSpec::Mixed { parts } => {
                if parts.is_empty() {
                    return Err(TacticError::Parameter("mixture has no parts".into()));
                }
                if parts
                    .iter()
                    .any(|p| p.weight < 0.0 || !p.weight.is_finite())
                {
                    return Err(TacticError::Parameter(
                        "mixture weights must be non-negative".into(),
                    ));
                }
                let sum: f64 = parts.iter().map(|p| p.weight).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(TacticError::Parameter(format!(
                        "mixture weights sum to {sum}, expected 1"
                    )));
                }
                parts.iter().try_for_each(|p| p.tactic.validate())
            }
        }
    }
}

fn check_k(k: f64) -> Result<(), TacticError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(TacticError::Parameter(format!(
            "k must lie in [0, 1], got {k}"
        )));
    }
    Ok(())
}

/// `α(t) = k + (1 − k)·(min(t, t_max)/t_max)^(1/β)`, clamped to `[0, 1]`.
pub fn time_alpha(t: f64, t_max: f64, k: f64, beta: f64) -> Result<f64, TacticError> {
    if !(beta > 0.0) {
        return Err(TacticError::Parameter(format!(
            "beta must be > 0, got {beta}"
        )));
    }
    if !(t_max > 0.0) || t < 0.0 {
        return Err(TacticError::Parameter(format!(
            "need 0 ≤ t and t_max > 0, got t={t}, t_max={t_max}"
        )));
    }
    check_k(k)?;
    let frac = t.min(t_max) / t_max;
    Ok((k + (1.0 - k) * frac.powf(1.0 / beta)).clamp(0.0, 1.0))
}

/// `α(r) = k + (1 − k)·e^(−r)`, clamped to `[0, 1]`.
pub fn resource_alpha(remaining: f64, k: f64) -> Result<f64, TacticError> {
    if remaining < 0.0 || remaining.is_nan() {
        return Err(TacticError::Parameter(format!(
            "remaining resource must be ≥ 0, got {remaining}"
        )));
    }
    check_k(k)?;
    Ok((k + (1.0 - k) * (-remaining).exp()).clamp(0.0, 1.0))
}

/// Maps a concession degree onto a target utility between the agent's best
/// score and its reservation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcessionCurve {
    pub max_utility: f64,
    pub reservation: f64,
}

impl ConcessionCurve {
    pub fn new(reservation: f64) -> Self {
        Self {
            max_utility: MAX_UTILITY,
            reservation,
        }
    }

    pub fn target(&self, alpha: f64) -> f64 {
        let alpha = alpha.clamp(0.0, 1.0);
        self.max_utility - alpha * (self.max_utility - self.reservation)
    }
}

/// The offers an agent is prepared to send, with its reservation.
#[derive(Clone, Debug)]
pub struct OfferSpace {
    agent: AgentId,
    reservation: f64,
    zone: Vec<ScoredOffer>,
}

impl OfferSpace {
    pub fn new(profile: &PreferenceProfile) -> Result<Self, DomainError> {
        Ok(Self {
            agent: profile.agent().clone(),
            reservation: profile.reservation_utility(),
            zone: acceptance_zone(profile)?,
        })
    }

    pub fn reservation(&self) -> f64 {
        self.reservation
    }

    pub fn curve(&self) -> ConcessionCurve {
        ConcessionCurve::new(self.reservation)
    }

    pub fn offers(&self) -> &[ScoredOffer] {
        &self.zone
    }

    /// Smallest-utility offer at or above `target`; ties resolved by labels.
    /// Falls back to the best offer below `target` when nothing reaches it.
    pub fn offer_for_target(&self, target: f64) -> &ScoredOffer {
        let reaching = self.zone.iter().rposition(|s| s.utility >= target - EPS);
        let idx = match reaching {
            Some(mut i) => {
                while i > 0 && (self.zone[i - 1].utility - self.zone[i].utility).abs() <= EPS {
                    i -= 1;
                }
                i
            }
            None => 0,
        };
        &self.zone[idx]
    }
}

/// Everything a tactic may look at when planning the next offer.
#[derive(Clone, Debug, Default)]
pub struct TacticContext<'a> {
    pub round: u32,
    pub deadline: u32,
    /// Utility (to this agent) of each opponent offer so far, oldest first.
    pub opponent_utilities: &'a [f64],
    /// Target behind this agent's previous offer, if it made one.
    pub own_last_target: Option<f64>,
    /// Overrides the default resource (rounds left before the deadline).
    pub resource: Option<f64>,
}

impl TacticContext<'_> {
    fn remaining_resource(&self) -> f64 {
        self.resource
            .unwrap_or_else(|| self.deadline.saturating_sub(self.round) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Planned {
    pub target: f64,
    /// Set when a behavior-dependent part lacked history and repeated itself.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TacticOutput {
    pub offer: OfferVector,
    pub utility: f64,
    pub target: f64,
    pub fallback: bool,
}

/// Target utility for relative tit-for-tat.
///
/// The opponent's concession is measured between its offers `δ+1` and `δ`
/// places from the end, in this agent's utility space. The agent concedes by
/// the same proportion: `target' = target · u_older / u_newer`.
pub fn behavior_target(
    opponent_utilities: &[f64],
    own_last_target: Option<f64>,
    delta: u32,
    reservation: f64,
) -> Planned {
    let delta = delta.max(1) as usize;
    let m = opponent_utilities.len();
    let floor = reservation.min(MAX_UTILITY);
    let Some(previous) = own_last_target else {
        return Planned {
            target: MAX_UTILITY,
            fallback: true,
        };
    };
    if m < 2 * delta {
        return Planned {
            target: previous.clamp(floor, MAX_UTILITY),
            fallback: true,
        };
    }
    let older = opponent_utilities[m - delta - 1];
    let newer = opponent_utilities[m - delta];
    let ratio = if newer > 0.0 {
        older / newer
    } else if older > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let target = (previous * ratio).clamp(floor, MAX_UTILITY);
    Planned {
        target,
        fallback: false,
    }
}

/// Weighted mean of sub-tactic targets.
pub fn mixed_target(weighted: &[(f64, f64)]) -> Result<f64, TacticError> {
    let sum: f64 = weighted.iter().map(|(w, _)| *w).sum();
    if weighted.iter().any(|(w, _)| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(TacticError::Parameter(format!(
            "mixture weights sum to {sum}, expected 1"
        )));
    }
    Ok(weighted.iter().map(|(w, t)| w * t).sum())
}

/// Target utility a tactic aims for in the given context.
pub fn plan_target(
    spec: &TacticSpec,
    reservation: f64,
    ctx: &TacticContext<'_>,
) -> Result<Planned, TacticError> {
    let curve = ConcessionCurve::new(reservation);
    match spec {
        TacticSpec::TimeDependent { k, beta } => {
            let alpha = time_alpha(ctx.round as f64, ctx.deadline as f64, *k, *beta)?;
            Ok(Planned {
                target: curve.target(alpha),
                fallback: false,
            })
        }
        TacticSpec::ResourceDependent { k } => {
            let alpha = resource_alpha(ctx.remaining_resource(), *k)?;
            Ok(Planned {
                target: curve.target(alpha),
                fallback: false,
            })
        }
        TacticSpec::BehaviorDependent { delta } => {
            spec.validate()?;
            Ok(behavior_target(
                ctx.opponent_utilities,
                ctx.own_last_target,
                *delta,
                reservation,
            ))
        }
        TacticSpec::Mixed { parts } => {
            spec.validate()?;
            let mut weighted = Vec::with_capacity(parts.len());
            let mut fallback = false;
            for part in parts {
                let p = plan_target(&part.tactic, reservation, ctx)?;
                fallback |= part.weight > 0.0 && p.fallback;
                weighted.push((part.weight, p.target));
            }
            Ok(Planned {
                target: mixed_target(&weighted)?,
                fallback,
            })
        }
    }
}

/// Plans the next offer: target utility, then the matching discrete offer.
pub fn plan_offer(
    spec: &TacticSpec,
    space: &OfferSpace,
    ctx: &TacticContext<'_>,
) -> Result<TacticOutput, TacticError> {
    let planned = plan_target(spec, space.reservation, ctx)?;
    let chosen = space.offer_for_target(planned.target);
    Ok(TacticOutput {
        offer: chosen.offer.restamped(&space.agent, ctx.round),
        utility: chosen.utility,
        target: planned.target,
        fallback: planned.fallback,
    })
}

pub fn time_dependent_offer(
    space: &OfferSpace,
    round: u32,
    deadline: u32,
    k: f64,
    beta: f64,
) -> Result<TacticOutput, TacticError> {
    let ctx = TacticContext {
        round,
        deadline,
        ..Default::default()
    };
    plan_offer(&TacticSpec::TimeDependent { k, beta }, space, &ctx)
}

pub fn resource_dependent_offer(
    space: &OfferSpace,
    remaining: f64,
    k: f64,
) -> Result<TacticOutput, TacticError> {
    let ctx = TacticContext {
        resource: Some(remaining),
        ..Default::default()
    };
    plan_offer(&TacticSpec::ResourceDependent { k }, space, &ctx)
}

pub fn behavior_dependent_offer(
    space: &OfferSpace,
    round: u32,
    opponent_utilities: &[f64],
    own_last_target: Option<f64>,
    delta: u32,
) -> Result<TacticOutput, TacticError> {
    let ctx = TacticContext {
        round,
        opponent_utilities,
        own_last_target,
        ..Default::default()
    };
    plan_offer(&TacticSpec::BehaviorDependent { delta }, space, &ctx)
}

pub fn mixed_offer(
    space: &OfferSpace,
    parts: Vec<WeightedTactic>,
    ctx: &TacticContext<'_>,
) -> Result<TacticOutput, TacticError> {
    plan_offer(&TacticSpec::Mixed { parts }, space, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Issue;
    use std::collections::BTreeMap;

    fn profile() -> PreferenceProfile {
        let weights: BTreeMap<String, f64> =
            [("price".to_string(), 60.0), ("warranty".to_string(), 40.0)]
                .into_iter()
                .collect();
        PreferenceProfile::new(
            "buyer",
            vec![
                Issue::rated("price", &[("low", 100.0), ("mid", 50.0), ("high", 0.0)]),
                Issue::rated(
                    "warranty",
                    &[("none", 0.0), ("short", 25.0), ("long", 100.0)],
                ),
            ],
            weights,
            10,
        )
        .unwrap()
    }

    #[test]
    fn time_alpha_boundaries() {
        assert_eq!(time_alpha(0.0, 10.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(time_alpha(10.0, 10.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(time_alpha(0.0, 10.0, 0.3, 2.0).unwrap(), 0.3);
        assert_eq!(time_alpha(15.0, 10.0, 0.3, 0.5).unwrap(), 1.0);
        assert!((time_alpha(5.0, 10.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(time_alpha(1.0, 10.0, 0.0, 0.0).is_err());
        assert!(time_alpha(1.0, 10.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn resource_alpha_boundaries() {
        assert_eq!(resource_alpha(0.0, 0.4).unwrap(), 1.0);
        assert!((resource_alpha(50.0, 0.4).unwrap() - 0.4).abs() < 1e-9);
        let expected = 0.2 + 0.8 * (-1.0f64).exp();
        assert!((resource_alpha(1.0, 0.2).unwrap() - expected).abs() < 1e-15);
        assert!(resource_alpha(-1.0, 0.2).is_err());
    }

    #[test]
    fn time_dependent_extremes_hit_top_and_reservation() {
        let p = profile();
        let space = OfferSpace::new(&p).unwrap();
        let first = time_dependent_offer(&space, 0, 10, 0.0, 1.0).unwrap();
        assert_eq!(first.utility, 100.0);
        assert_eq!(first.offer.choice("price"), Some("low"));
        let last = time_dependent_offer(&space, 10, 10, 0.0, 1.0).unwrap();
        assert!((last.target - space.reservation()).abs() < 1e-12);
        assert!((last.utility - space.reservation()).abs() < 1e-9);
        let mid = time_dependent_offer(&space, 5, 10, 0.0, 1.0).unwrap();
        let midway = (100.0 + space.reservation()) / 2.0;
        assert!((mid.target - midway).abs() < 1e-12);
        assert!(mid.utility >= mid.target);
    }

    #[test]
    fn mapping_picks_smallest_reaching_offer() {
        let p = profile();
        let space = OfferSpace::new(&p).unwrap();
        // zone utilities: 100, 70, 70, 40 (reservation 30+10 = 40)
        let utilities: Vec<f64> = space.offers().iter().map(|s| s.utility).collect();
        assert_eq!(utilities.len(), 4);
        let chosen = space.offer_for_target(65.0);
        assert!((chosen.utility - 70.0).abs() < 1e-9);
        // equal scores: label order decides, so the choice is stable
        assert_eq!(chosen, &space.offers()[1]);
        assert!((space.offer_for_target(101.0).utility - 100.0).abs() < 1e-9);
    }

    #[test]
    fn behavior_ratio_one_repeats_target() {
        let p = behavior_target(&[30.0, 30.0], Some(80.0), 1, 40.0);
        assert_eq!(
            p,
            Planned {
                target: 80.0,
                fallback: false
            }
        );
    }

    #[test]
    fn behavior_reciprocates_ten_percent() {
        // opponent offers rose from 50 to 55 in my utility: a 10% concession
        let p = behavior_target(&[50.0, 55.0], Some(88.0), 1, 40.0);
        assert!((p.target - 80.0).abs() < 1e-12);
    }

    #[test]
    fn behavior_clamps_and_falls_back() {
        let p = behavior_target(&[10.0, 40.0], Some(60.0), 1, 45.0);
        assert_eq!(p.target, 45.0);
        let short = behavior_target(&[10.0, 20.0, 30.0], Some(70.0), 2, 45.0);
        assert_eq!(
            short,
            Planned {
                target: 70.0,
                fallback: true
            }
        );
        let opening = behavior_target(&[], None, 1, 45.0);
        assert_eq!(
            opening,
            Planned {
                target: 100.0,
                fallback: true
            }
        );
    }

    #[test]
    fn behavior_lag_uses_older_pair() {
        // δ = 2 compares the pair one step before the latest pair
        let p = behavior_target(&[10.0, 20.0, 40.0, 41.0], Some(90.0), 2, 10.0);
        assert!((p.target - 45.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_targets_are_weighted_means() {
        assert!((mixed_target(&[(0.5, 80.0), (0.5, 60.0)]).unwrap() - 70.0).abs() < 1e-12);
        assert!((mixed_target(&[(0.3, 100.0), (0.7, 0.0)]).unwrap() - 30.0).abs() < 1e-12);
        assert!(mixed_target(&[(0.3, 100.0), (0.3, 0.0)]).is_err());
    }

    #[test]
    fn degenerate_mixture_equals_pure_tactic() {
        let p = profile();
        let space = OfferSpace::new(&p).unwrap();
        let ctx = TacticContext {
            round: 4,
            deadline: 10,
            ..Default::default()
        };
        let pure = TacticSpec::TimeDependent { k: 0.1, beta: 2.0 };
        let mixed = mixed_offer(
            &space,
            vec![
                WeightedTactic {
                    weight: 1.0,
                    tactic: pure.clone(),
                },
                WeightedTactic {
                    weight: 0.0,
                    tactic: TacticSpec::ResourceDependent { k: 0.0 },
                },
            ],
            &ctx,
        )
        .unwrap();
        assert_eq!(mixed, plan_offer(&pure, &space, &ctx).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TacticSpec::TimeDependent { k: 0.0, beta: -1.0 }
            .validate()
            .is_err());
        assert!(TacticSpec::BehaviorDependent { delta: 0 }
            .validate()
            .is_err());
        let bad = TacticSpec::Mixed {
            parts: vec![WeightedTactic {
                weight: 0.4,
                tactic: TacticSpec::linear(),
            }],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = TacticSpec::Mixed {
            parts: vec![
                WeightedTactic {
                    weight: 0.5,
                    tactic: TacticSpec::linear(),
                },
                WeightedTactic {
                    weight: 0.5,
                    tactic: TacticSpec::BehaviorDependent { delta: 1 },
                },
            ],
        };
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(toml::from_str::<TacticSpec>(&text).unwrap(), spec);
    }
}
