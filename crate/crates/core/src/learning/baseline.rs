//! Linear hinge-loss classifier over visual features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::network::BinaryLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub epochs: usize,
    /// Initial step; step `k` uses `step / sqrt(k + 1)`.
    pub step: f64,
    pub l2: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            epochs: 500,
            step: 0.5,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    /// `sign(wᵀx + b)`, with a zero score mapped to negative.
    pub fn predict(&self, x: &FeatureVector) -> BinaryLabel {
        BinaryLabel::from_positive(self.score(x) > 0.0)
    }
}

fn regularized_hinge(model: &LinearModel, examples: &[(FeatureVector, BinaryLabel)], l2: f64) -> f64 {
    let loss: f64 = examples
        .iter()
        .map(|(x, y)| (1.0 - f64::from(y.value()) * model.score(x)).max(0.0))
        .sum();
    let norm: f64 = model.weights.iter().map(|w| w * w).sum();
    loss / examples.len() as f64 + 0.5 * l2 * norm
}

/// Full-batch subgradient descent on the L2-regularized mean hinge loss.
/// Returns the iterate with the lowest objective seen.
pub fn train_linear_baseline(examples: &[(FeatureVector, BinaryLabel)], config: &BaselineConfig) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::Empty("baseline training set"));
    }
    let n = examples.len() as f64;
    let mut model = LinearModel { weights: [0.0; FEATURE_DIM], bias: 0.0 };
    let mut best = (regularized_hinge(&model, examples, config.l2), model);
    for k in 0..config.epochs {
        let mut gw = model.weights.map(|w| config.l2 * w);
        let mut gb = 0.0;
        for (x, y) in examples {
            let y = f64::from(y.value());
            if y * model.score(x) < 1.0 {
                for (g, xi) in gw.iter_mut().zip(x.as_slice()) {
                    *g -= y * xi / n;
                }
                gb -= y / n;
            }
        }
        let eta = config.step / ((k + 1) as f64).sqrt();
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= eta * g;
        }
        model.bias -= eta * gb;
        let obj = regularized_hinge(&model, examples, config.l2);
        if obj < best.0 {
            best = (obj, model);
        }
    }
    Ok(best.1)
}
