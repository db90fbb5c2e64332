//! Issues, options, preference profiles and the weighted-additive utility.
//!
//! An agent's score for an offer is
//!
//! ```text
//! total_profit = Σ_i weight_i · rating(chosen option of issue i) / max rating of issue i
//! ```
//!
//! with the weights of a profile normalized to sum to 100, so every score lies
//! in `[0, 100]`. Option menus are shared between the parties; ratings and
//! weights are private to each profile.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sum the weights of a profile are normalized to.
pub const WEIGHT_TOTAL: f64 = 100.0;

/// Weight sums this close to [`WEIGHT_TOTAL`] are rescaled instead of rejected.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid offer: {0}")]
    InvalidOffer(String),
    #[error("invalid profile: {}", join_violations(.0))]
    InvalidProfile(Vec<Violation>),
    #[error("value {value} is outside the discretization domain [{lower}, {upper})")]
    OutOfDomain { value: f64, lower: f64, upper: f64 },
    #[error("invalid discretization scheme: {0}")]
    InvalidScheme(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Identifier of a negotiating agent.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    #[default]
    Discrete,
    /// A continuous quantity that was binned before negotiation.
    DiscretizedContinuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssueOption {
    pub label: String,
    pub rating: f64,
}

impl IssueOption {
    pub fn new(label: impl Into<String>, rating: f64) -> Self {
        Self {
            label: label.into(),
            rating,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub name: String,
    pub options: Vec<IssueOption>,
    #[serde(default)]
    pub kind: IssueKind,
}

impl Issue {
    pub fn new(name: impl Into<String>, options: Vec<IssueOption>) -> Self {
        Self {
            name: name.into(),
            options,
            kind: IssueKind::Discrete,
        }
    }

    /// Convenience constructor from `(label, rating)` pairs.
    pub fn rated(name: impl Into<String>, options: &[(&str, f64)]) -> Self {
        Self::new(
            name,
            options
                .iter()
                .map(|(l, r)| IssueOption::new(*l, *r))
                .collect(),
        )
    }

    pub fn max_rating(&self) -> f64 {
        self.options.iter().map(|o| o.rating).fold(0.0, f64::max)
    }

    pub fn rating(&self, label: &str) -> Option<f64> {
        self.options
            .iter()
            .find(|o| o.label == label)
            .map(|o| o.rating)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.options.iter().position(|o| o.label == label)
    }

    /// The least-desired option, which acts as this issue's threshold.
    pub fn threshold_option(&self) -> Option<&IssueOption> {
        self.options.iter().find(|o| o.rating == 0.0)
    }

    fn min_positive_rating(&self) -> f64 {
        self.options
            .iter()
            .map(|o| o.rating)
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.label.as_str())
    }
}

/// One broken invariant found by [`validate_profile`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoIssues,
    DuplicateIssue(String),
    NoOptions(String),
    DuplicateOption { issue: String, label: String },
    NegativeRating { issue: String, label: String },
    NoPositiveRating(String),
    NoZeroRating(String),
    MultipleZeroRatings(String),
    UnknownWeightedIssue(String),
    MissingWeight(String),
    NegativeWeight(String),
    WeightSum(f64),
    NonPositiveDeadline,
    ReservationOutOfRange(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoIssues => write!(f, "profile has no issues"),
            Violation::DuplicateIssue(i) => write!(f, "issue '{i}' declared twice"),
            Violation::NoOptions(i) => write!(f, "issue '{i}' has no options"),
            Violation::DuplicateOption { issue, label } => {
                write!(f, "issue '{issue}' repeats option '{label}'")
            }
            Violation::NegativeRating { issue, label } => {
                write!(
                    f,
                    "option '{label}' of issue '{issue}' has a negative rating"
                )
            }
            Violation::NoPositiveRating(i) => {
                write!(f, "issue '{i}' has no positively rated option")
            }
            Violation::NoZeroRating(i) => {
                write!(f, "issue '{i}' has no zero-rated threshold option")
            }
            Violation::MultipleZeroRatings(i) => {
                write!(f, "issue '{i}' has more than one zero-rated option")
            }
            Violation::UnknownWeightedIssue(i) => write!(f, "weight given for unknown issue '{i}'"),
            Violation::MissingWeight(i) => write!(f, "issue '{i}' has no weight"),
            Violation::NegativeWeight(i) => write!(f, "issue '{i}' has a negative weight"),
            Violation::WeightSum(s) => write!(f, "weights sum {s} ≠ 100"),
            Violation::NonPositiveDeadline => write!(f, "deadline must be positive"),
            Violation::ReservationOutOfRange(r) => {
                write!(f, "reservation utility {r} is outside [0, 100]")
            }
        }
    }
}

/// Unvalidated profile description, as read from a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub agent: AgentId,
    pub issues: Vec<Issue>,
    pub weights: BTreeMap<String, f64>,
    pub deadline: u32,
    /// Minimum acceptable utility. Defaults to the lowest score of any offer
    /// that avoids every zero-rated option.
    #[serde(default)]
    pub reservation: Option<f64>,
}

impl ProfileSpec {
    pub fn build(self) -> Result<PreferenceProfile, DomainError> {
        validate_profile(&self).map_err(DomainError::InvalidProfile)?;
        let sum: f64 = self.weights.values().sum();
        if (sum - WEIGHT_TOTAL).abs() > EPS {
            log::warn!(
                "weights of '{}' sum to {sum}; rescaling to {WEIGHT_TOTAL}",
                self.agent
            );
        }
        let weights = self
            .weights
            .into_iter()
            .map(|(k, w)| (k, w * WEIGHT_TOTAL / sum))
            .collect();
        Ok(PreferenceProfile {
            agent: self.agent,
            issues: self.issues,
            weights,
            original_weight_sum: sum,
            deadline: self.deadline,
            reservation: self.reservation,
        })
    }
}

/// Checks every profile invariant and reports all violations found.
pub fn validate_profile(spec: &ProfileSpec) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if spec.issues.is_empty() {
        out.push(Violation::NoIssues);
    }
    let mut names = BTreeSet::new();
    for issue in &spec.issues {
        if !names.insert(issue.name.as_str()) {
            out.push(Violation::DuplicateIssue(issue.name.clone()));
        }
        if issue.options.is_empty() {
            out.push(Violation::NoOptions(issue.name.clone()));
            continue;
        }
        let mut labels = BTreeSet::new();
        for opt in &issue.options {
            if !labels.insert(opt.label.as_str()) {
                out.push(Violation::DuplicateOption {
                    issue: issue.name.clone(),
                    label: opt.label.clone(),
                });
            }
            if opt.rating < 0.0 || !opt.rating.is_finite() {
                out.push(Violation::NegativeRating {
                    issue: issue.name.clone(),
                    label: opt.label.clone(),
                });
            }
        }
        if issue.max_rating() <= 0.0 {
            out.push(Violation::NoPositiveRating(issue.name.clone()));
        }
        match issue.options.iter().filter(|o| o.rating == 0.0).count() {
            0 => out.push(Violation::NoZeroRating(issue.name.clone())),
            1 => {}
            _ => out.push(Violation::MultipleZeroRatings(issue.name.clone())),
        }
        if !spec.weights.contains_key(&issue.name) {
            out.push(Violation::MissingWeight(issue.name.clone()));
        }
    }
    for (name, w) in &spec.weights {
        if !names.contains(name.as_str()) {
            out.push(Violation::UnknownWeightedIssue(name.clone()));
        }
        if *w < 0.0 || !w.is_finite() {
            out.push(Violation::NegativeWeight(name.clone()));
        }
    }
    let sum: f64 = spec.weights.values().sum();
    if (sum - WEIGHT_TOTAL).abs() > WEIGHT_SUM_TOLERANCE {
        out.push(Violation::WeightSum(sum));
    }
    if spec.deadline == 0 {
        out.push(Violation::NonPositiveDeadline);
    }
    if let Some(r) = spec.reservation {
        if !(0.0..=WEIGHT_TOTAL).contains(&r) {
            out.push(Violation::ReservationOutOfRange(r));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A validated, immutable preference profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreferenceProfile {
    agent: AgentId,
    issues: Vec<Issue>,
    weights: BTreeMap<String, f64>,
    original_weight_sum: f64,
    deadline: u32,
    reservation: Option<f64>,
}

impl PreferenceProfile {
    pub fn new(
        agent: impl Into<AgentId>,
        issues: Vec<Issue>,
        weights: BTreeMap<String, f64>,
        deadline: u32,
    ) -> Result<Self, DomainError> {
        ProfileSpec {
            agent: agent.into(),
            issues,
            weights,
            deadline,
            reservation: None,
        }
        .build()
    }

    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn issues(&self) -> &[Issue] {
        &self.issues
    }

    pub fn issue(&self, name: &str) -> Option<&Issue> {
        self.issues.iter().find(|i| i.name == name)
    }

    /// Normalized weight of an issue (weights sum to 100).
    pub fn weight(&self, issue: &str) -> f64 {
        self.weights.get(issue).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn original_weight_sum(&self) -> f64 {
        self.original_weight_sum
    }

    pub fn deadline(&self) -> u32 {
        self.deadline
    }

    pub fn with_deadline(mut self, deadline: u32) -> Self {
        self.deadline = deadline.max(1);
        self
    }

    /// Lowest utility this agent will accept or offer.
    pub fn reservation_utility(&self) -> f64 {
        self.reservation.unwrap_or_else(|| {
            self.issues
                .iter()
                .map(|i| self.weight(&i.name) * i.min_positive_rating() / i.max_rating())
                .sum::<f64>()
                .min(WEIGHT_TOTAL)
        })
    }

    /// Whether `offer` picks this profile's zero-rated option on any issue.
    pub fn crosses_threshold(&self, offer: &OfferVector) -> bool {
        self.issues.iter().any(|i| {
            offer
                .choice(&i.name)
                .and_then(|l| i.rating(l))
                .is_some_and(|r| r == 0.0)
        })
    }

    /// Whether both profiles use the same issues and option menus.
    pub fn same_alphabet(&self, other: &PreferenceProfile) -> bool {
        let menu = |p: &PreferenceProfile| {
            p.issues
                .iter()
                .map(|i| {
                    (
                        i.name.clone(),
                        i.labels().map(str::to_owned).collect::<BTreeSet<_>>(),
                    )
                })
                .collect::<BTreeMap<_, _>>()
        };
        menu(self) == menu(other)
    }
}

/// One option chosen per issue, stamped with round and proposer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferVector {
    pub choices: BTreeMap<String, String>,
    pub round: u32,
    pub proposer: AgentId,
}

impl OfferVector {
    pub fn new(
        proposer: impl Into<AgentId>,
        round: u32,
        choices: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>,
    ) -> Self {
        Self {
            choices: choices
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
            round,
            proposer: proposer.into(),
        }
    }

    pub fn choice(&self, issue: &str) -> Option<&str> {
        self.choices.get(issue).map(String::as_str)
    }

    /// Same choices, new stamp.
    pub fn restamped(&self, proposer: &AgentId, round: u32) -> Self {
        Self {
            choices: self.choices.clone(),
            round,
            proposer: proposer.clone(),
        }
    }

    fn label_cmp(&self, other: &Self) -> Ordering {
        self.choices.values().cmp(other.choices.values())
    }
}

/// Weighted-additive utility of `offer` under `profile`, in `[0, 100]`.
pub fn total_profit(profile: &PreferenceProfile, offer: &OfferVector) -> Result<f64, DomainError> {
    if offer.choices.len() != profile.issues.len() {
        return Err(DomainError::InvalidOffer(format!(
            "offer has {} choices, profile has {} issues",
            offer.choices.len(),
            profile.issues.len()
        )));
    }
    let mut total = 0.0;
    for issue in &profile.issues {
        let label = offer.choice(&issue.name).ok_or_else(|| {
            DomainError::InvalidOffer(format!("no choice for issue '{}'", issue.name))
        })?;
        let rating = issue.rating(label).ok_or_else(|| {
            DomainError::InvalidOffer(format!(
                "'{label}' is not an option of issue '{}'",
                issue.name
            ))
        })?;
        total += profile.weight(&issue.name) * rating / issue.max_rating();
    }
    Ok(total.clamp(0.0, WEIGHT_TOTAL))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredOffer {
    pub offer: OfferVector,
    pub utility: f64,
}

/// Every combination of options, scored and sorted by descending utility.
///
/// Equal utilities are ordered by the chosen labels (issue-name order).
pub fn enumerate_offers(profile: &PreferenceProfile) -> Result<Vec<ScoredOffer>, DomainError> {
    if profile.issues.is_empty() {
        return Err(DomainError::InvalidProfile(vec![Violation::NoIssues]));
    }
    let mut combos: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for issue in &profile.issues {
        combos = combos
            .into_iter()
            .flat_map(|partial| {
                issue.options.iter().map(move |opt| {
                    let mut next = partial.clone();
                    next.insert(issue.name.clone(), opt.label.clone());
                    next
                })
            })
            .collect();
    }
    let mut scored = combos
        .into_iter()
        .map(|choices| {
            let offer = OfferVector {
                choices,
                round: 0,
                proposer: profile.agent.clone(),
            };
            let utility = total_profit(profile, &offer)?;
            Ok(ScoredOffer { offer, utility })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    scored.sort_by(|a, b| {
        b.utility
            .total_cmp(&a.utility)
            .then_with(|| a.offer.label_cmp(&b.offer))
    });
    Ok(scored)
}

/// Offers the agent is willing to make or accept: no zero-rated option and a
/// utility at or above its reservation. Sorted like [`enumerate_offers`].
pub fn acceptance_zone(profile: &PreferenceProfile) -> Result<Vec<ScoredOffer>, DomainError> {
    let reservation = profile.reservation_utility();
    Ok(enumerate_offers(profile)?
        .into_iter()
        .filter(|s| !profile.crosses_threshold(&s.offer) && s.utility >= reservation - EPS)
        .collect())
}

/// Offers (by choices) that lie in both agents' acceptance zones.
pub fn zone_overlap(
    a: &PreferenceProfile,
    b: &PreferenceProfile,
) -> Result<Vec<BTreeMap<String, String>>, DomainError> {
    let zb: BTreeSet<_> = acceptance_zone(b)?
        .into_iter()
        .map(|s| s.offer.choices)
        .collect();
    Ok(acceptance_zone(a)?
        .into_iter()
        .map(|s| s.offer.choices)
        .filter(|c| zb.contains(c))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub lower: f64,
    /// Exclusive upper bound; `None` means unbounded.
    #[serde(default)]
    pub upper: Option<f64>,
}

impl Bin {
    fn upper(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

/// Half-open `[lower, upper)` bins that tile a contiguous domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Bin>", into = "Vec<Bin>")]
pub struct DiscretizationScheme {
    bins: Vec<Bin>,
}

impl DiscretizationScheme {
    pub fn new(bins: Vec<Bin>) -> Result<Self, DomainError> {
        if bins.is_empty() {
            return Err(DomainError::InvalidScheme("no bins".into()));
        }
        for (i, bin) in bins.iter().enumerate() {
            if !(bin.lower < bin.upper()) {
                return Err(DomainError::InvalidScheme(format!(
                    "bin '{}' is empty",
                    bin.label
                )));
            }
            if bin.upper.is_none() && i + 1 != bins.len() {
                return Err(DomainError::InvalidScheme(format!(
                    "only the last bin may be unbounded, not '{}'",
                    bin.label
                )));
            }
        }
        for pair in bins.windows(2) {
            if pair[0].upper() != pair[1].lower {
                return Err(DomainError::InvalidScheme(format!(
                    "bins '{}' and '{}' are not contiguous",
                    pair[0].label, pair[1].label
                )));
            }
        }
        Ok(Self { bins })
    }

    /// Age groups: youth `[10, 25)`, middle-aged `[25, 50)`, old `[50, ∞)`.
    pub fn age_groups() -> Self {
        Self::new(vec![
            Bin {
                label: "youth".into(),
                lower: 10.0,
                upper: Some(25.0),
            },
            Bin {
                label: "middle-aged".into(),
                lower: 25.0,
                upper: Some(50.0),
            },
            Bin {
                label: "old".into(),
                lower: 50.0,
                upper: None,
            },
        ])
        .expect("static scheme is valid")
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn lower(&self) -> f64 {
        self.bins[0].lower
    }

    pub fn upper(&self) -> f64 {
        self.bins[self.bins.len() - 1].upper()
    }

    pub fn bin_index(&self, value: f64) -> Result<usize, DomainError> {
        self.bins
            .iter()
            .position(|b| b.lower <= value && value < b.upper())
            .ok_or(DomainError::OutOfDomain {
                value,
                lower: self.lower(),
                upper: self.upper(),
            })
    }
}

impl TryFrom<Vec<Bin>> for DiscretizationScheme {
    type Error = DomainError;

    fn try_from(bins: Vec<Bin>) -> Result<Self, Self::Error> {
        Self::new(bins)
    }
}

impl From<DiscretizationScheme> for Vec<Bin> {
    fn from(s: DiscretizationScheme) -> Self {
        s.bins
    }
}

/// Label of the bin containing `value`.
pub fn discretize(value: f64, scheme: &DiscretizationScheme) -> Result<&str, DomainError> {
    scheme
        .bin_index(value)
        .map(|i| scheme.bins[i].label.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn weights(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn company_a() -> PreferenceProfile {
        PreferenceProfile::new(
            "A",
            vec![
                Issue::rated("price", &[("$1M", 0.0), ("$1.1M", 50.0), ("$1.2M", 100.0)]),
                Issue::rated("quantity", &[("3", 0.0), ("5", 100.0)]),
                Issue::rated(
                    "warranty",
                    &[
                        ("none", 100.0),
                        ("6 months", 70.0),
                        ("1 year", 40.0),
                        ("2 years", 0.0),
                    ],
                ),
            ],
            weights(&[("price", 50.0), ("quantity", 20.0), ("warranty", 30.0)]),
            20,
        )
        .unwrap()
    }

    fn offer(p: &str, q: &str, w: &str) -> OfferVector {
        OfferVector::new("B", 1, [("price", p), ("quantity", q), ("warranty", w)])
    }

    #[test]
    fn max_and_zero_offers() {
        let a = company_a();
        assert_eq!(
            total_profit(&a, &offer("$1.2M", "5", "none")).unwrap(),
            100.0
        );
        assert_eq!(
            total_profit(&a, &offer("$1M", "3", "2 years")).unwrap(),
            0.0
        );
    }

    #[test]
    fn weighted_sum_by_hand() {
        // ratios 0.5, 1.0, 0.0 → 50·0.5 + 20·1 + 30·0 = 45
        let a = company_a();
        let u = total_profit(&a, &offer("$1.1M", "5", "2 years")).unwrap();
        assert!((u - 45.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_label_is_invalid_offer() {
        let a = company_a();
        let err = total_profit(&a, &offer("$2M", "5", "none")).unwrap_err();
        assert!(matches!(err, DomainError::InvalidOffer(_)));
        let short = OfferVector::new("B", 0, [("price", "$1M")]);
        assert!(total_profit(&a, &short).is_err());
    }

    #[test]
    fn enumeration_counts_and_order() {
        let a = company_a();
        let all = enumerate_offers(&a).unwrap();
        assert_eq!(all.len(), 24);
        assert_eq!(all[0].utility, 100.0);
        assert!(all.windows(2).all(|w| w[0].utility >= w[1].utility));
        let single = PreferenceProfile::new(
            "s",
            vec![Issue::rated(
                "colour",
                &[("red", 0.0), ("green", 3.0), ("blue", 9.0), ("grey", 1.0)],
            )],
            weights(&[("colour", 100.0)]),
            5,
        )
        .unwrap();
        assert_eq!(enumerate_offers(&single).unwrap().len(), 4);
    }

    #[test]
    fn enumeration_ties_are_lexicographic() {
        let p = PreferenceProfile::new(
            "t",
            vec![
                Issue::rated("x", &[("a", 0.0), ("b", 1.0)]),
                Issue::rated("y", &[("a", 0.0), ("b", 1.0)]),
            ],
            weights(&[("x", 50.0), ("y", 50.0)]),
            5,
        )
        .unwrap();
        let all = enumerate_offers(&p).unwrap();
        // (x=a, y=b) and (x=b, y=a) both score 50
        assert_eq!(all[1].offer.choice("x"), Some("a"));
        assert_eq!(all[2].offer.choice("x"), Some("b"));
    }

    #[test]
    fn discretize_age_groups() {
        let s = DiscretizationScheme::age_groups();
        assert_eq!(discretize(17.0, &s).unwrap(), "youth");
        assert_eq!(discretize(25.0, &s).unwrap(), "middle-aged");
        assert_eq!(discretize(50.0, &s).unwrap(), "old");
        assert_eq!(discretize(10.0, &s).unwrap(), "youth");
        assert!(matches!(
            discretize(9.99, &s),
            Err(DomainError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn scheme_rejects_gaps_and_empty_bins() {
        let gap = DiscretizationScheme::new(vec![
            Bin {
                label: "a".into(),
                lower: 0.0,
                upper: Some(1.0),
            },
            Bin {
                label: "b".into(),
                lower: 2.0,
                upper: Some(3.0),
            },
        ]);
        assert!(gap.is_err());
        let empty = DiscretizationScheme::new(vec![Bin {
            label: "a".into(),
            lower: 1.0,
            upper: Some(1.0),
        }]);
        assert!(empty.is_err());
        assert!(DiscretizationScheme::new(vec![]).is_err());
    }

    #[test]
    fn validate_reports_every_violation() {
        let spec = ProfileSpec {
            agent: "B".into(),
            issues: vec![
                Issue::rated("price", &[("$1M", 100.0), ("$1.1M", 50.0)]),
                Issue::rated("quantity", &[("3", 0.0), ("5", 100.0)]),
            ],
            weights: weights(&[("price", 60.0), ("quantity", 15.0), ("warranty", 20.0)]),
            deadline: 0,
            reservation: None,
        };
        let v = validate_profile(&spec).unwrap_err();
        assert!(v.contains(&Violation::NoZeroRating("price".into())));
        assert!(v.contains(&Violation::UnknownWeightedIssue("warranty".into())));
        assert!(v.contains(&Violation::WeightSum(95.0)));
        assert!(v.contains(&Violation::NonPositiveDeadline));
        assert_eq!(
            Violation::WeightSum(95.0).to_string(),
            "weights sum 95 ≠ 100"
        );
    }

    #[test]
    fn table_weights_of_company_b_validate() {
        let spec = ProfileSpec {
            agent: "B".into(),
            issues: company_a().issues().to_vec(),
            weights: weights(&[("price", 60.0), ("quantity", 15.0), ("warranty", 25.0)]),
            deadline: 10,
            reservation: None,
        };
        assert_eq!(validate_profile(&spec), Ok(()));
    }

    #[test]
    fn near_hundred_weights_are_rescaled() {
        let p = PreferenceProfile::new(
            "A",
            company_a().issues().to_vec(),
            weights(&[("price", 50.0), ("quantity", 20.0), ("warranty", 29.5)]),
            20,
        )
        .unwrap();
        assert_eq!(p.original_weight_sum(), 99.5);
        let total: f64 = p.weights().values().sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn reservation_is_lowest_threshold_free_offer() {
        let a = company_a();
        // price $1.1M (25) + quantity 5 (20) + warranty 1 year (12)
        assert!((a.reservation_utility() - 57.0).abs() < 1e-9);
        let zone = acceptance_zone(&a).unwrap();
        assert_eq!(zone.len(), 2 * 3);
        assert!(zone.iter().all(|s| !a.crosses_threshold(&s.offer)));
        assert!((zone.last().unwrap().utility - 57.0).abs() < 1e-9);
    }
}
