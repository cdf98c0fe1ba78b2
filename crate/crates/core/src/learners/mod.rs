//! Learner contract shared by nuisance, risk and second-stage models.

mod forest;
mod linear;

pub use forest::{Forest, Tree, TreeParams};
pub use linear::{fit_logistic, fit_ridge, LinearModel, LogisticModel, LOGISTIC_MAX_ITER, LOGISTIC_TOL};

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Probabilities leave the learner inside `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    RandomForest,
    RidgeLinear,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    /// `None` grows trees until `min_leaf` stops them.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// Fraction of features tried per split. Defaults to 1/3 for regression forests
    /// and `sqrt(d)/d` for probability forests.
    #[serde(default)]
    pub mtry_fraction: Option<f64>,
    #[serde(default = "default_ridge_lambda")]
    pub ridge_lambda: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_trees() -> usize {
    200
}
fn default_min_leaf() -> usize {
    5
}
fn default_ridge_lambda() -> f64 {
    1e-3
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            n_trees: default_n_trees(),
            max_depth: None,
            min_leaf: default_min_leaf(),
            mtry_fraction: None,
            ridge_lambda: default_ridge_lambda(),
            seed: 0,
        }
    }

    pub fn random_forest() -> Self {
        Self::new(LearnerKind::RandomForest)
    }

    pub fn ridge() -> Self {
        Self::new(LearnerKind::RidgeLinear)
    }

    pub fn logistic() -> Self {
        Self::new(LearnerKind::Logistic)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be positive"));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be positive"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid("max_depth must be positive"));
        }
        if let Some(f) = self.mtry_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("mtry_fraction {f} outside (0,1]")));
            }
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "ridge_lambda {} must be >= 0",
                self.ridge_lambda
            )));
        }
        Ok(())
    }

    fn tree_params(&self, d: usize, classification: bool) -> TreeParams {
        let frac = self.mtry_fraction.unwrap_or(if classification {
            (d as f64).sqrt() / d as f64
        } else {
            1.0 / 3.0
        });
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            mtry: ((frac * d as f64) as usize).clamp(1, d.max(1)),
        }
    }

    fn min_rows(&self) -> usize {
        match self.kind {
            LearnerKind::RandomForest => 2 * self.min_leaf,
            LearnerKind::RidgeLinear | LearnerKind::Logistic => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Regression,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum State {
    Forest(Forest),
    Linear(LinearModel),
    Logistic(LogisticModel),
}

/// A fitted learner. Immutable; `predict` rejects inputs with the wrong width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    kind: LearnerKind,
    task: Task,
    d: usize,
    state: State,
}

impl FittedModel {
    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        if x.ncols() != self.d {
            return Err(Error::Shape {
                expected: self.d,
                got: x.ncols(),
            });
        }
        Ok(x.rows_iter().map(|r| self.predict_row_unchecked(r)).collect())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Shape {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self.predict_row_unchecked(x))
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        let raw = match &self.state {
            State::Forest(f) => f.predict_row(x),
            State::Linear(m) => m.predict_row(x),
            State::Logistic(m) => m.predict_row(x),
        };
        match self.task {
            Task::Regression => raw,
            Task::Probability => raw.clamp(PROB_CLIP, 1.0 - PROB_CLIP),
        }
    }
}

fn check_inputs(x: &Matrix, y: &[f64], spec: &LearnerSpec) -> Result<()> {
    spec.validate()?;
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("{} targets for {} rows", y.len(), x.nrows())));
    }
    if y.len() < spec.min_rows() {
        return Err(Error::InsufficientData {
            needed: spec.min_rows(),
            got: y.len(),
        });
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("learner inputs must be finite"));
    }
    Ok(())
}

/// Fits a regression model of `y` on `x`.
pub fn fit_regressor(x: &Matrix, y: &[f64], spec: &LearnerSpec) -> Result<FittedModel> {
    check_inputs(x, y, spec)?;
    let state = match spec.kind {
        LearnerKind::RandomForest => State::Forest(Forest::fit(
            x,
            y,
            spec.n_trees,
            spec.tree_params(x.ncols(), false),
            spec.seed,
        )),
        LearnerKind::RidgeLinear => State::Linear(fit_ridge(x, y, spec.ridge_lambda)?),
        LearnerKind::Logistic => {
            return Err(Error::invalid("logistic learner cannot fit a regression target"));
        }
    };
    Ok(FittedModel {
        kind: spec.kind,
        task: Task::Regression,
        d: x.ncols(),
        state,
    })
}

/// Fits `P(w = 1 | x)`. Predictions are clipped into `[1e-6, 1 - 1e-6]`.
///
/// `ridge_linear` gives a clipped linear probability model.
pub fn fit_propensity(x: &Matrix, w: &[bool], spec: &LearnerSpec) -> Result<FittedModel> {
    let labels: Vec<f64> = w.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    check_inputs(x, &labels, spec)?;
    let treated = w.iter().filter(|&&t| t).count();
    if treated == 0 || treated == w.len() {
        return Err(Error::DegenerateLabels(format!(
            "{treated} of {} rows treated; both classes are required",
            w.len()
        )));
    }
    let state = match spec.kind {
        LearnerKind::RandomForest => State::Forest(Forest::fit(
            x,
            &labels,
            spec.n_trees,
            spec.tree_params(x.ncols(), true),
            spec.seed,
        )),
        LearnerKind::RidgeLinear => State::Linear(fit_ridge(x, &labels, spec.ridge_lambda)?),
        LearnerKind::Logistic => State::Logistic(fit_logistic(x, &labels, spec.ridge_lambda)?),
    };
    Ok(FittedModel {
        kind: spec.kind,
        task: Task::Probability,
        d: x.ncols(),
        state,
    })
}
