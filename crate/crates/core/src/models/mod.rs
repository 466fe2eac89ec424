//! Pointwise ranking regressors: ridge, epsilon-insensitive SVR, their RBF
//! kernelised forms, and a random forest, behind one train/predict surface.

mod cv;
mod forest;
mod linear;
mod scaler;
mod svr;

pub use cv::{
    cross_validate, default_grid, kfold_indices, select_hyperparameters, CvContext, CvReport,
};
pub use forest::{Forest, ForestParams, Node, Tree};
pub use linear::{kernel, kernel_matrix, KernelKind};
pub use scaler::Scaler;
pub use svr::{svr_fit, svr_objective, SvrFit};

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Format version of serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedMatrix {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("singular system; use a regularisation strength above zero")]
    SingularSystem,
    #[error("feature signature mismatch: model was fitted on {expected:?}")]
    SignatureMismatch { expected: Vec<String> },
    #[error("model serialization: {0}")]
    Serialization(String),
    #[error("fold evaluation failed: {0}")]
    Metric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Rr,
    Svr,
    Krr,
    Ksvr,
    Rf,
}

impl ModelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::Rr => "rr",
            ModelFamily::Svr => "svr",
            ModelFamily::Krr => "krr",
            ModelFamily::Ksvr => "ksvr",
            ModelFamily::Rf => "rf",
        }
    }
}

impl FromStr for ModelFamily {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rr" => Ok(ModelFamily::Rr),
            "svr" => Ok(ModelFamily::Svr),
            "krr" => Ok(ModelFamily::Krr),
            "ksvr" => Ok(ModelFamily::Ksvr),
            "rf" => Ok(ModelFamily::Rf),
            other => Err(ModelError::BadHyperparameter(format!(
                "unknown model family `{other}`"
            ))),
        }
    }
}

/// Family plus hyperparameters; fields irrelevant to the family are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// Ridge strength for RR/KRR.
    pub lambda: f64,
    /// SVR/KSVR trade-off.
    pub c: f64,
    pub epsilon_insensitive: f64,
    /// RBF width; `None` defaults to 1/p at fit time.
    pub gamma: Option<f64>,
    pub trees: usize,
    /// Candidate features per split; `None` defaults to ceil(p/3).
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub svr_step: f64,
    pub svr_max_epochs: usize,
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Self {
        Self {
            family,
            lambda: 1.0,
            c: 1.0,
            epsilon_insensitive: 0.1,
            gamma: None,
            trees: 500,
            max_features: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
            svr_step: 0.5,
            svr_max_epochs: 10_000,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.lambda < 0.0 {
            return Err(ModelError::BadHyperparameter("lambda must be >= 0".into()));
        }
        if self.c <= 0.0 {
            return Err(ModelError::BadHyperparameter("C must be > 0".into()));
        }
        if self.epsilon_insensitive < 0.0 {
            return Err(ModelError::BadHyperparameter(
                "epsilon_insensitive must be >= 0".into(),
            ));
        }
        if let Some(g) = self.gamma {
            if g <= 0.0 {
                return Err(ModelError::BadHyperparameter("gamma must be > 0".into()));
            }
        }
        if self.trees < 1 {
            return Err(ModelError::BadHyperparameter("trees must be >= 1".into()));
        }
        if self.min_leaf < 1 {
            return Err(ModelError::BadHyperparameter("min_leaf must be >= 1".into()));
        }
        Ok(())
    }

    fn resolved_gamma(&self, p: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / p as f64)
    }

    fn resolved_max_features(&self, p: usize) -> usize {
        self.max_features.unwrap_or(p.div_ceil(3)).clamp(1, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Linear {
        weights: Vec<f64>,
        intercept: f64,
    },
    Kernel {
        kernel: KernelKind,
        gamma: f64,
        alphas: Vec<f64>,
        intercept: f64,
        /// Scaled training inputs acting as support points.
        support: Vec<Vec<f64>>,
    },
    Forest {
        forest: Forest,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub family: ModelFamily,
    pub scaler: Scaler,
    pub feature_names: Vec<String>,
    pub params: FittedParams,
}

fn check_matrix(x: &[Vec<f64>], y: &[f64], p: usize) -> Result<(), ModelError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(ModelError::TooFewRows(x.len().min(y.len())));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(ModelError::RaggedMatrix {
                row: i,
                got: row.len(),
                expected: p,
            });
        }
    }
    Ok(())
}

/// Fit a model: scale, then dispatch on the family.
pub fn train(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    spec: &ModelSpec,
) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    let p = feature_names.len();
    check_matrix(x, y, p)?;
    let scaler = Scaler::fit(x);
    let xs = scaler.transform(x);
    let params = match spec.family {
        ModelFamily::Rr => {
            let (weights, intercept) = linear::ridge_fit(&xs, y, spec.lambda)?;
            FittedParams::Linear { weights, intercept }
        }
        ModelFamily::Svr => {
            let fit = svr::svr_fit(
                &xs,
                y,
                spec.c,
                spec.epsilon_insensitive,
                spec.svr_step,
                spec.svr_max_epochs,
                1e-8,
            );
            FittedParams::Linear {
                weights: fit.weights,
                intercept: fit.intercept,
            }
        }
        ModelFamily::Krr => {
            let gamma = spec.resolved_gamma(p);
            let (alphas, intercept) = linear::krr_fit(&xs, y, spec.lambda, KernelKind::Rbf, gamma)?;
            FittedParams::Kernel {
                kernel: KernelKind::Rbf,
                gamma,
                alphas,
                intercept,
                support: xs,
            }
        }
        ModelFamily::Ksvr => {
            let gamma = spec.resolved_gamma(p);
            let k = kernel_matrix(KernelKind::Rbf, gamma, &xs);
            let fit = svr::svr_fit(
                &k,
                y,
                spec.c,
                spec.epsilon_insensitive,
                spec.svr_step,
                spec.svr_max_epochs,
                1e-8,
            );
            FittedParams::Kernel {
                kernel: KernelKind::Rbf,
                gamma,
                alphas: fit.weights,
                intercept: fit.intercept,
                support: xs,
            }
        }
        ModelFamily::Rf => {
            let forest = forest::fit_forest(
                &xs,
                y,
                &ForestParams {
                    trees: spec.trees,
                    max_features: spec.resolved_max_features(p),
                    min_leaf: spec.min_leaf,
                    bootstrap: spec.bootstrap,
                    seed: spec.seed,
                },
            );
            FittedParams::Forest { forest }
        }
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        family: spec.family,
        scaler,
        feature_names: feature_names.to_vec(),
        params,
    })
}

/// Kernel ridge with an explicit kernel choice; the linear kernel exists so
/// tests can check the dual path against the primal ridge solution.
pub fn train_krr_with_kernel(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    lambda: f64,
    kind: KernelKind,
    gamma: f64,
) -> Result<TrainedModel, ModelError> {
    let p = feature_names.len();
    check_matrix(x, y, p)?;
    let scaler = Scaler::fit(x);
    let xs = scaler.transform(x);
    let (alphas, intercept) = linear::krr_fit(&xs, y, lambda, kind, gamma)?;
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        family: ModelFamily::Krr,
        scaler,
        feature_names: feature_names.to_vec(),
        params: FittedParams::Kernel {
            kernel: kind,
            gamma,
            alphas,
            intercept,
            support: xs,
        },
    })
}

impl TrainedModel {
    /// Predict a single raw (unscaled) feature row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let xs = self.scaler.transform_row(row);
        match &self.params {
            FittedParams::Linear { weights, intercept } => {
                intercept + weights.iter().zip(&xs).map(|(w, v)| w * v).sum::<f64>()
            }
            FittedParams::Kernel {
                kernel,
                gamma,
                alphas,
                intercept,
                support,
            } => linear::krr_predict_row(support, alphas, *intercept, *kernel, *gamma, &xs),
            FittedParams::Forest { forest } => forest.predict_row(&xs),
        }
    }

    /// Predict a matrix whose columns follow `feature_names`; the signature
    /// must match the one the model was fitted with.
    pub fn predict(&self, x: &[Vec<f64>], feature_names: &[String]) -> Result<Vec<f64>, ModelError> {
        if feature_names != self.feature_names.as_slice() {
            return Err(ModelError::SignatureMismatch {
                expected: self.feature_names.clone(),
            });
        }
        Ok(x.iter().map(|row| self.predict_row(row)).collect())
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string_pretty(self).map_err(|e| ModelError::Serialization(e.to_string()))
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let model: TrainedModel =
            serde_json::from_str(json).map_err(|e| ModelError::Serialization(e.to_string()))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Serialization(format!(
                "unsupported model format version {}",
                model.version
            )));
        }
        Ok(model)
    }
}
