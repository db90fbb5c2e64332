//! Feed-forward predictor of the opponent's next-offer utility.
//!
//! Seven issue signals in `[0, 1]` are multiplied by a fixed per-issue
//! importance weight before entering the network. One sigmoid hidden layer
//! feeds a single linear output neuron. Training is full-batch gradient
//! descent on the mean squared error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PredictionError;

pub const N_FEATURES: usize = 7;

pub type Features = [f64; N_FEATURES];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feature {
    OriginalPrice,
    Age,
    Culture,
    Time,
    Quantity,
    Quality,
    Feedback,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::OriginalPrice,
        Feature::Age,
        Feature::Culture,
        Feature::Time,
        Feature::Quantity,
        Feature::Quality,
        Feature::Feedback,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: u32,
    pub seed: u64,
    pub importance: Features,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: 3,
            learning_rate: 0.1,
            epochs: 200,
            seed: 0,
            importance: [1.0; N_FEATURES],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeuralPredictor {
    importance: Features,
    hidden_weights: Vec<Features>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
    learning_rate: f64,
    epochs: u32,
    epochs_trained: u64,
    ready: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingReport {
    pub initial_mse: f64,
    pub final_mse: f64,
    /// MSE before each epoch, then after the last one.
    pub history: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_importance(importance: &Features) -> Result<(), PredictionError> {
    if importance.iter().all(|w| w.is_finite()) {
        Ok(())
    } else {
        Err(PredictionError::Data(
            "importance weights must be finite".into(),
        ))
    }
}

impl NeuralPredictor {
    /// Untrained network with weights drawn uniformly from `[-0.5, 0.5]`.
    pub fn new(config: &NetworkConfig) -> Result<Self, PredictionError> {
        if config.hidden == 0 {
            return Err(PredictionError::Data(
                "hidden layer needs at least one neuron".into(),
            ));
        }
        if !(config.learning_rate > 0.0) {
            return Err(PredictionError::Data(
                "learning rate must be positive".into(),
            ));
        }
        check_importance(&config.importance)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut draw = || rng.gen_range(-0.5..=0.5);
        let hidden_weights = (0..config.hidden)
            .map(|_| std::array::from_fn(|_| draw()))
            .collect();
        let hidden_bias = (0..config.hidden).map(|_| draw()).collect();
        let output_weights = (0..config.hidden).map(|_| draw()).collect();
        let output_bias = draw();
        Ok(Self {
            importance: config.importance,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            epochs_trained: 0,
            ready: false,
        })
    }

    /// Network with explicit parameters; usable for prediction immediately.
    pub fn from_parameters(
        importance: Features,
        hidden_weights: Vec<Features>,
        hidden_bias: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
        learning_rate: f64,
    ) -> Result<Self, PredictionError> {
        let h = hidden_weights.len();
        if h == 0 || hidden_bias.len() != h || output_weights.len() != h {
            return Err(PredictionError::Data("inconsistent layer sizes".into()));
        }
        check_importance(&importance)?;
        Ok(Self {
            importance,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            learning_rate,
            epochs: NetworkConfig::default().epochs,
            epochs_trained: 0,
            ready: true,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_weights.len()
    }

    pub fn epochs_trained(&self) -> u64 {
        self.epochs_trained
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    pub fn output_bias(&self) -> f64 {
        self.output_bias
    }

    /// All trainable parameters in a fixed order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.hidden_weights.iter().flatten().copied().collect();
        p.extend(&self.hidden_bias);
        p.extend(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    fn weighted_inputs(&self, x: &Features) -> Features {
        std::array::from_fn(|i| x[i] * self.importance[i])
    }

    fn forward(&self, x: &Features) -> (Vec<f64>, f64) {
        let z = self.weighted_inputs(x);
        let hidden: Vec<f64> = self
            .hidden_weights
            .iter()
            .zip(&self.hidden_bias)
            .map(|(w, b)| sigmoid(w.iter().zip(&z).map(|(w, z)| w * z).sum::<f64>() + b))
            .collect();
        let out = hidden
            .iter()
            .zip(&self.output_weights)
            .map(|(h, w)| h * w)
            .sum::<f64>()
            + self.output_bias;
        (hidden, out)
    }

    pub fn mse(&self, samples: &[(Features, f64)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        samples
            .iter()
            .map(|(x, y)| {
                let e = self.forward(x).1 - y;
                e * e
            })
            .sum::<f64>()
            / samples.len() as f64
    }

    /// Trains for the configured number of epochs.
    pub fn train(
        &mut self,
        samples: &[(Features, f64)],
    ) -> Result<TrainingReport, PredictionError> {
        self.train_epochs(samples, self.epochs)
    }

    pub fn train_epochs(
        &mut self,
        samples: &[(Features, f64)],
        epochs: u32,
    ) -> Result<TrainingReport, PredictionError> {
        validate_samples(samples)?;
        let n = samples.len() as f64;
        let h = self.hidden_size();
        let mut history = Vec::with_capacity(epochs as usize + 1);
        for _ in 0..epochs {
            let mut g_hidden = vec![[0.0; N_FEATURES]; h];
            let mut g_hidden_bias = vec![0.0; h];
            let mut g_out = vec![0.0; h];
            let mut g_out_bias = 0.0;
            let mut sq = 0.0;
            for (x, y) in samples {
                let z = self.weighted_inputs(x);
                let (hidden, out) = self.forward(x);
                let err = out - y;
                sq += err * err;
                // gradient of (1/2n)·Σ err²
                let d_out = err / n;
                g_out_bias += d_out;
                for j in 0..h {
                    g_out[j] += d_out * hidden[j];
                    let d_hidden = d_out * self.output_weights[j] * hidden[j] * (1.0 - hidden[j]);
                    g_hidden_bias[j] += d_hidden;
                    for (g, z) in g_hidden[j].iter_mut().zip(&z) {
                        *g += d_hidden * z;
                    }
                }
            }
            history.push(sq / n);
            let lr = self.learning_rate;
            self.output_bias -= lr * g_out_bias;
            for j in 0..h {
                self.output_weights[j] -= lr * g_out[j];
                self.hidden_bias[j] -= lr * g_hidden_bias[j];
                for (w, g) in self.hidden_weights[j].iter_mut().zip(&g_hidden[j]) {
                    *w -= lr * g;
                }
            }
        }
        let final_mse = self.mse(samples);
        history.push(final_mse);
        self.epochs_trained += u64::from(epochs);
        self.ready = true;
        Ok(TrainingReport {
            initial_mse: history[0],
            final_mse,
            history,
        })
    }

    pub fn predict(&self, x: &Features) -> Result<f64, PredictionError> {
        if !self.ready {
            return Err(PredictionError::State(
                "network has not been trained".into(),
            ));
        }
        validate_features(x)?;
        Ok(self.forward(x).1)
    }
}

fn validate_features(x: &Features) -> Result<(), PredictionError> {
    if let Some(v) = x
        .iter()
        .find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v))
    {
        return Err(PredictionError::Data(format!(
            "feature value {v} is not in [0, 1]"
        )));
    }
    Ok(())
}

fn validate_samples(samples: &[(Features, f64)]) -> Result<(), PredictionError> {
    if samples.is_empty() {
        return Err(PredictionError::Data("no training samples".into()));
    }
    for (x, y) in samples {
        validate_features(x)?;
        if !y.is_finite() {
            return Err(PredictionError::Data(
                "training target is not finite".into(),
            ));
        }
    }
    Ok(())
}

/// Trains `predictor` on `samples`, returning it with the final MSE.
pub fn nn_train(
    mut predictor: NeuralPredictor,
    samples: &[(Features, f64)],
) -> Result<(NeuralPredictor, f64), PredictionError> {
    let report = predictor.train(samples)?;
    Ok((predictor, report.final_mse))
}

pub fn nn_predict(
    predictor: &NeuralPredictor,
    features: &Features,
) -> Result<f64, PredictionError> {
    predictor.predict(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_network(bias: f64) -> NeuralPredictor {
        NeuralPredictor::from_parameters(
            [0.0; N_FEATURES],
            vec![[0.0; N_FEATURES]; 3],
            vec![0.0; 3],
            vec![0.0; 3],
            bias,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn zero_weight_network_outputs_bias() {
        let net = zero_network(0.4);
        assert_eq!(net.predict(&[0.0; N_FEATURES]).unwrap(), 0.4);
        assert_eq!(net.predict(&[1.0; N_FEATURES]).unwrap(), 0.4);
    }

    #[test]
    fn zero_importance_learns_the_mean() {
        let config = NetworkConfig {
            importance: [0.0; N_FEATURES],
            seed: 3,
            epochs: 2000,
            ..Default::default()
        };
        let samples = vec![
            ([0.1; N_FEATURES], 0.2),
            ([0.9; N_FEATURES], 0.6),
            ([0.5; N_FEATURES], 0.4),
        ];
        let mut net = NeuralPredictor::new(&config).unwrap();
        net.train(&samples).unwrap();
        let a = net.predict(&[0.0; N_FEATURES]).unwrap();
        let b = net.predict(&[1.0; N_FEATURES]).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.4).abs() < 1e-3);
    }

    #[test]
    fn untrained_network_refuses_to_predict() {
        let net = NeuralPredictor::new(&NetworkConfig::default()).unwrap();
        assert!(matches!(
            net.predict(&[0.5; N_FEATURES]),
            Err(PredictionError::State(_))
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut net = NeuralPredictor::new(&NetworkConfig::default()).unwrap();
        let mut x = [0.5; N_FEATURES];
        x[2] = f64::NAN;
        assert!(net.train(&[(x, 0.1)]).is_err());
        assert!(net.train(&[]).is_err());
        assert!(NeuralPredictor::new(&NetworkConfig {
            hidden: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn single_sample_interpolates() {
        let config = NetworkConfig {
            epochs: 500,
            seed: 9,
            ..Default::default()
        };
        let (_, mse) = nn_train(
            NeuralPredictor::new(&config).unwrap(),
            &[([0.3; N_FEATURES], 0.7)],
        )
        .unwrap();
        assert!(mse <= 1e-3, "mse {mse}");
    }

    #[test]
    fn same_seed_same_weights() {
        let config = NetworkConfig {
            seed: 11,
            ..Default::default()
        };
        let a = NeuralPredictor::new(&config).unwrap();
        let b = NeuralPredictor::new(&config).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        assert!(a.parameters().iter().all(|p| (-0.5..=0.5).contains(p)));
        let c = NeuralPredictor::new(&NetworkConfig { seed: 12, ..config }).unwrap();
        assert_ne!(a.parameters(), c.parameters());
    }
}
