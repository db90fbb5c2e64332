//! Opponent-behavior prediction.
//!
//! The predictor stays silent for a warm-up period while offers accumulate in
//! the session trace. After that it either fits the regression families to
//! the opponent's offers or trains the feed-forward network, and checks
//! whether the opponent is expected to reach our reservation before our
//! deadline.

mod neural;
mod regression;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, DiscretizationScheme, OfferVector, PreferenceProfile};
use crate::protocol::{Action, SessionTrace};

pub use neural::{
    nn_predict, nn_train, Feature, Features, NetworkConfig, NeuralPredictor, TrainingReport,
    N_FEATURES,
};
pub use regression::{
    estimate_crossing, estimate_crossing_from, first_crossing, fit_regression, predict_utility,
    select_model, Crossing, Family, ObservationSeries, PredictedUtility, RegressionFit,
    CROSSING_TOLERANCE, SSE_TIE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictionError {
    #[error("{family} fit needs {needed} points, got {got}")]
    TooFewPoints {
        family: Family,
        needed: usize,
        got: usize,
    },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("outside the family's domain: {0}")]
    Domain(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error("predictor state: {0}")]
    State(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorModel {
    #[default]
    Regression,
    Neural,
}

/// Where one network input comes from. Every source yields a value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum FeatureSource {
    Constant {
        value: f64,
    },
    /// Min-max scaling of a fixed numeric attribute.
    Scaled {
        value: f64,
        min: f64,
        max: f64,
    },
    /// A categorical or binned attribute; bins map to equally spaced values.
    Binned {
        value: f64,
        bins: DiscretizationScheme,
    },
    /// Position of the offered option within an issue's menu.
    Issue {
        issue: String,
    },
    /// Round of the offer relative to the observer's deadline.
    Time,
}

impl FeatureSource {
    fn default_for(feature: Feature, profile: &PreferenceProfile) -> Self {
        let issue = match feature {
            Feature::Time => return FeatureSource::Time,
            Feature::OriginalPrice => "price",
            Feature::Quantity => "quantity",
            Feature::Quality => "quality",
            _ => return FeatureSource::Constant { value: 0.0 },
        };
        if profile.issue(issue).is_some() {
            FeatureSource::Issue {
                issue: issue.into(),
            }
        } else {
            FeatureSource::Constant { value: 0.0 }
        }
    }

    pub fn encode(
        &self,
        offer: &OfferVector,
        round: u32,
        deadline: u32,
        profile: &PreferenceProfile,
    ) -> Result<f64, PredictionError> {
        let v = match self {
            FeatureSource::Constant { value } => *value,
            FeatureSource::Scaled { value, min, max } => {
                if !(max > min) {
                    return Err(PredictionError::Data(format!(
                        "scale [{min}, {max}] is empty"
                    )));
                }
                ((value - min) / (max - min)).clamp(0.0, 1.0)
            }
            FeatureSource::Binned { value, bins } => {
                let idx = bins
                    .bin_index(*value)
                    .map_err(|e| PredictionError::Data(e.to_string()))?;
                let n = bins.bins().len();
                if n > 1 {
                    idx as f64 / (n - 1) as f64
                } else {
                    0.0
                }
            }
            FeatureSource::Issue { issue } => {
                let menu = profile
                    .issue(issue)
                    .ok_or_else(|| PredictionError::Data(format!("unknown issue '{issue}'")))?;
                let label = offer.choice(issue).ok_or_else(|| {
                    PredictionError::Data(format!("offer has no '{issue}' choice"))
                })?;
                let pos = menu
                    .position(label)
                    .ok_or_else(|| PredictionError::Data(format!("unknown option '{label}'")))?;
                let n = menu.options.len();
                if n > 1 {
                    pos as f64 / (n - 1) as f64
                } else {
                    0.0
                }
            }
            FeatureSource::Time => (round as f64 / deadline.max(1) as f64).min(1.0),
        };
        if !(0.0..=1.0).contains(&v) {
            return Err(PredictionError::Data(format!(
                "feature value {v} is not in [0, 1]"
            )));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSettings {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: u32,
    /// Forecasts from a network whose training RMSE (utility / 100) exceeds
    /// this are ignored.
    pub max_rmse: f64,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        let d = NetworkConfig::default();
        Self {
            hidden: d.hidden,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            max_rmse: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub enabled: bool,
    pub model: PredictorModel,
    /// Opponent offers observed before predictions are made.
    pub warmup: u32,
    pub network: NetworkSettings,
    /// Per-feature importance. Features tied to an issue default to that
    /// issue's preference weight divided by the largest weight; others to 1.
    pub importance: BTreeMap<Feature, f64>,
    pub features: BTreeMap<Feature, FeatureSource>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            model: PredictorModel::Regression,
            warmup: 5,
            network: NetworkSettings::default(),
            importance: BTreeMap::new(),
            features: BTreeMap::new(),
        }
    }
}

impl PredictorConfig {
    pub fn sources(&self, profile: &PreferenceProfile) -> [FeatureSource; N_FEATURES] {
        Feature::ALL.map(|f| {
            self.features
                .get(&f)
                .cloned()
                .unwrap_or_else(|| FeatureSource::default_for(f, profile))
        })
    }

    pub fn importance(&self, profile: &PreferenceProfile) -> Features {
        let sources = self.sources(profile);
        let max_weight = profile.weights().values().copied().fold(0.0, f64::max);
        std::array::from_fn(|i| {
            let feature = Feature::ALL[i];
            if let Some(w) = self.importance.get(&feature) {
                return *w;
            }
            match &sources[i] {
                FeatureSource::Issue { issue } if max_weight > 0.0 => {
                    profile.weight(issue) / max_weight
                }
                _ => 1.0,
            }
        })
    }

    pub fn network_config(&self, profile: &PreferenceProfile, seed: u64) -> NetworkConfig {
        NetworkConfig {
            hidden: self.network.hidden,
            learning_rate: self.network.learning_rate,
            epochs: self.network.epochs,
            seed,
            importance: self.importance(profile),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "advice", rename_all = "kebab-case")]
pub enum Advice {
    /// Still warming up.
    None,
    /// Active, but the data could not be fitted yet.
    Continue,
    TerminateUnprofitable,
    /// Round at which the opponent is expected to reach our reservation.
    AcceptanceForecast {
        round: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorMode {
    WarmUp,
    Active,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub round: u32,
    pub utility: f64,
    pub features: Features,
}

/// One agent's predictor within one session.
#[derive(Clone, Debug)]
pub struct PredictorState {
    config: PredictorConfig,
    agent: AgentId,
    deadline: u32,
    reservation: f64,
    seed: u64,
    sources: [FeatureSource; N_FEATURES],
    observations: Vec<Observation>,
    /// Trace rows already consumed.
    cursor: usize,
    fit: Option<RegressionFit>,
    network: Option<NeuralPredictor>,
}

impl PredictorState {
    pub fn new(config: PredictorConfig, profile: &PreferenceProfile, seed: u64) -> Self {
        let sources = config.sources(profile);
        Self {
            agent: profile.agent().clone(),
            deadline: profile.deadline(),
            reservation: profile.reservation_utility(),
            seed,
            sources,
            config,
            observations: Vec::new(),
            cursor: 0,
            fit: None,
            network: None,
        }
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn mode(&self) -> PredictorMode {
        if self.observations.len() < self.config.warmup as usize {
            PredictorMode::WarmUp
        } else {
            PredictorMode::Active
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn fit(&self) -> Option<&RegressionFit> {
        self.fit.as_ref()
    }

    pub fn network(&self) -> Option<&NeuralPredictor> {
        self.network.as_ref()
    }

    /// Records opponent offers appended to `trace` since the last call.
    pub fn observe(
        &mut self,
        trace: &SessionTrace,
        profile: &PreferenceProfile,
    ) -> Result<(), PredictionError> {
        for row in &trace.rows()[self.cursor.min(trace.len())..] {
            if row.actor == self.agent || row.action != Action::Offer {
                continue;
            }
            let Some(offer) = &row.offer else { continue };
            let utility = crate::domain::total_profit(profile, offer)
                .map_err(|e| PredictionError::Data(e.to_string()))?;
            let mut features = [0.0; N_FEATURES];
            for (slot, source) in features.iter_mut().zip(&self.sources) {
                *slot = source.encode(offer, row.round, self.deadline, profile)?;
            }
            self.observations.push(Observation {
                round: row.round,
                utility,
                features,
            });
        }
        self.cursor = trace.len();
        Ok(())
    }

    fn normalized(&self, round: u32) -> f64 {
        (round as f64 / self.deadline.max(1) as f64).min(1.0)
    }

    /// Fits or trains on everything observed so far and recommends an action.
    pub fn advise(&mut self, trace: &SessionTrace, profile: &PreferenceProfile) -> Advice {
        if self.observe(trace, profile).is_err() {
            return Advice::Continue;
        }
        if self.mode() == PredictorMode::WarmUp {
            return Advice::None;
        }
        let Some(last) = self.observations.last() else {
            return Advice::Continue;
        };
        let now = self.normalized(last.round);
        if last.utility >= self.reservation {
            // an acceptable offer is already on the table
            return Advice::AcceptanceForecast {
                round: last.round as f64,
            };
        }
        let crossing = match self.config.model {
            PredictorModel::Regression => self.regression_crossing(now),
            PredictorModel::Neural => self.network_crossing(profile, now),
        };
        match crossing {
            Some(Crossing::At(t)) => Advice::AcceptanceForecast {
                round: t * self.deadline as f64,
            },
            Some(Crossing::NoneBeforeDeadline) => Advice::TerminateUnprofitable,
            None => Advice::Continue,
        }
    }

    fn regression_crossing(&mut self, now: f64) -> Option<Crossing> {
        let points = self
            .observations
            .iter()
            .map(|o| (self.normalized(o.round), o.utility))
            .collect();
        let series = ObservationSeries::with_tau(points, 1.0).ok()?;
        let fit = select_model(&series).ok()?;
        self.fit = Some(fit);
        Some(estimate_crossing_from(&fit, self.reservation, now, 1.0))
    }

    fn network_crossing(&mut self, profile: &PreferenceProfile, now: f64) -> Option<Crossing> {
        let samples: Vec<(Features, f64)> = self
            .observations
            .windows(2)
            .map(|w| (w[0].features, w[1].utility / 100.0))
            .collect();
        if samples.is_empty() {
            return None;
        }
        let config = self.config.network_config(profile, self.seed);
        let mut net = NeuralPredictor::new(&config).ok()?;
        let report = net.train(&samples).ok()?;
        let fitted = report.final_mse.sqrt() <= self.config.network.max_rmse;
        let latest = self.observations.last()?.features;
        let time = Feature::Time.index();
        let curve = |t: f64| {
            let mut x = latest;
            if self.sources[time] == FeatureSource::Time {
                x[time] = t;
            }
            net.predict(&x).map_or(f64::NEG_INFINITY, |u| u * 100.0)
        };
        let crossing = fitted.then(|| first_crossing(curve, self.reservation, now, 1.0));
        self.network = Some(net);
        crossing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Issue, ProfileSpec};
    use crate::protocol::TraceRow;

    fn profile(deadline: u32, reservation: f64) -> PreferenceProfile {
        ProfileSpec {
            agent: "me".into(),
            issues: vec![Issue::rated(
                "price",
                &(0..=10)
                    .map(|i| {
                        (
                            [
                                "p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10",
                            ][i],
                            i as f64 * 10.0,
                        )
                    })
                    .collect::<Vec<_>>(),
            )],
            weights: [("price".to_string(), 100.0)].into_iter().collect(),
            deadline,
            reservation: Some(reservation),
        }
        .build()
        .unwrap()
    }

    /// Trace where the opponent offers `p{k}` (utility 10·k) on odd rounds.
    fn trace_with(levels: &[usize]) -> SessionTrace {
        let mut trace = SessionTrace::new([AgentId::from("me"), AgentId::from("them")]);
        let mut round = 0;
        for &k in levels {
            let own = OfferVector::new("me", round, [("price", "p10")]);
            trace
                .push(TraceRow::offer(round, "me".into(), own, 100.0, 0.0, None))
                .unwrap();
            round += 1;
            let theirs = OfferVector::new("them", round, [("price", format!("p{k}"))]);
            trace
                .push(TraceRow::offer(
                    round,
                    "them".into(),
                    theirs,
                    0.0,
                    k as f64 * 10.0,
                    None,
                ))
                .unwrap();
            round += 1;
        }
        trace
    }

    #[test]
    fn warm_up_gives_no_advice() {
        let p = profile(10, 80.0);
        let mut state = PredictorState::new(PredictorConfig::default(), &p, 1);
        let trace = trace_with(&[1, 2]);
        assert_eq!(state.advise(&trace, &p), Advice::None);
        assert_eq!(state.mode(), PredictorMode::WarmUp);
        assert_eq!(state.observations().len(), 2);
    }

    #[test]
    fn slow_opponent_is_unprofitable() {
        // opponent creeps up 10 per two rounds; reservation 95 is out of reach by round 12
        let p = profile(12, 95.0);
        let mut state = PredictorState::new(
            PredictorConfig {
                warmup: 3,
                ..Default::default()
            },
            &p,
            1,
        );
        let trace = trace_with(&[1, 2, 3]);
        assert_eq!(state.advise(&trace, &p), Advice::TerminateUnprofitable);
        assert_eq!(state.fit().unwrap().family, Family::Linear);
    }

    #[test]
    fn steady_opponent_gets_forecast() {
        // utility = 10·k at round 2k-1, i.e. u = 5·round + 5; reaches 80 at round 15
        let p = profile(20, 80.0);
        let mut state = PredictorState::new(
            PredictorConfig {
                warmup: 3,
                ..Default::default()
            },
            &p,
            1,
        );
        match state.advise(&trace_with(&[1, 2, 3, 4]), &p) {
            Advice::AcceptanceForecast { round } => assert!((round - 15.0).abs() < 1e-6, "{round}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn acceptable_offer_on_the_table_is_never_unprofitable() {
        // falling offers, but the latest one already clears the reservation
        let p = profile(12, 30.0);
        let mut state = PredictorState::new(
            PredictorConfig {
                warmup: 3,
                ..Default::default()
            },
            &p,
            1,
        );
        assert_eq!(
            state.advise(&trace_with(&[9, 6, 4]), &p),
            Advice::AcceptanceForecast { round: 5.0 }
        );
    }

    #[test]
    fn neural_model_gives_advice_after_warm_up() {
        let p = profile(20, 90.0);
        let network = NetworkSettings {
            epochs: 3000,
            learning_rate: 0.5,
            ..Default::default()
        };
        let config = PredictorConfig {
            warmup: 3,
            model: PredictorModel::Neural,
            network,
            ..Default::default()
        };
        let mut state = PredictorState::new(config, &p, 5);
        let advice = state.advise(&trace_with(&[1, 2, 3, 4]), &p);
        assert!(
            matches!(
                advice,
                Advice::AcceptanceForecast { .. } | Advice::TerminateUnprofitable
            ),
            "{advice:?}"
        );
        assert!(state.network().is_some_and(|n| n.epochs_trained() == 3000));
    }

    #[test]
    fn underfit_network_is_not_trusted() {
        let p = profile(20, 90.0);
        let network = NetworkSettings {
            epochs: 1,
            ..Default::default()
        };
        let config = PredictorConfig {
            warmup: 3,
            model: PredictorModel::Neural,
            network,
            ..Default::default()
        };
        let mut state = PredictorState::new(config, &p, 5);
        assert_eq!(
            state.advise(&trace_with(&[1, 5, 9, 4]), &p),
            Advice::Continue
        );
    }

    #[test]
    fn feature_encodings() {
        let p = profile(10, 50.0);
        let offer = OfferVector::new("them", 4, [("price", "p5")]);
        let enc = |s: FeatureSource| s.encode(&offer, 4, 10, &p).unwrap();
        assert_eq!(enc(FeatureSource::Time), 0.4);
        assert_eq!(
            enc(FeatureSource::Issue {
                issue: "price".into()
            }),
            0.5
        );
        assert_eq!(
            enc(FeatureSource::Scaled {
                value: 30.0,
                min: 10.0,
                max: 60.0
            }),
            0.4
        );
        let age = FeatureSource::Binned {
            value: 30.0,
            bins: DiscretizationScheme::age_groups(),
        };
        assert_eq!(enc(age), 0.5);
        assert!(FeatureSource::Constant { value: 2.0 }
            .encode(&offer, 4, 10, &p)
            .is_err());
    }

    #[test]
    fn importance_defaults_follow_preference_weights() {
        let p = profile(10, 50.0);
        let imp = PredictorConfig::default().importance(&p);
        assert_eq!(imp[Feature::OriginalPrice.index()], 1.0);
        assert_eq!(imp[Feature::Age.index()], 1.0);
    }
}
