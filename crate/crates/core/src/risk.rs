//! Baseline risk: `b(x)` is the predicted control outcome, signed so that larger
//! means worse off, plus its percentile transform `b'` in [0, 1].
//!
//! All sign bookkeeping lives here. Downstream code sees risk as "higher = worse" and
//! benefit as "higher = better", whatever the outcome's units.

use std::io::Write;

use crate::data::{Dataset, OutcomeDirection};
use crate::learners::{fit_regressor, FittedModel, LearnerSpec};
use crate::stats::average_ranks;
use crate::{Error, Result};

/// +1 when a higher outcome is better, -1 otherwise. Benefit = sign * (chi1 - chi0).
pub fn effect_sign(direction: OutcomeDirection) -> f64 {
    match direction {
        OutcomeDirection::HigherIsBetter => 1.0,
        OutcomeDirection::LowerIsBetter => -1.0,
    }
}

/// Risk sign applied to predicted control outcomes.
pub fn risk_sign(direction: OutcomeDirection) -> f64 {
    -effect_sign(direction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskScores {
    pub b: Vec<f64>,
    pub b_prime: Vec<f64>,
    pub effect_sign: f64,
}

impl RiskScores {
    pub fn from_risk(b: Vec<f64>, effect_sign: f64) -> Self {
        let b_prime = percentile_scores(&b);
        Self {
            b,
            b_prime,
            effect_sign,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self::from_risk(rows.iter().map(|&i| self.b[i]).collect(), self.effect_sign)
    }

    /// CSV with columns `row, b, b_prime`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["row", "b", "b_prime"])?;
        for i in 0..self.b.len() {
            wtr.write_record(&[i.to_string(), self.b[i].to_string(), self.b_prime[i].to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// `(rank - 1) / (n - 1)` with average ranks for ties; a single value scores 0.5.
pub fn percentile_scores(b: &[f64]) -> Vec<f64> {
    match b.len() {
        0 => Vec::new(),
        1 => vec![0.5],
        n => average_ranks(b)
            .into_iter()
            .map(|r| (r - 1.0) / (n - 1) as f64)
            .collect(),
    }
}

/// Regresses the outcome on features over control rows only.
pub fn fit_risk_model(train: &Dataset, spec: &LearnerSpec) -> Result<FittedModel> {
    let rows = train.arm_rows(false);
    if rows.is_empty() {
        return Err(Error::Degenerate("risk model needs control rows".into()));
    }
    let ys: Vec<f64> = rows.iter().map(|&r| train.y()[r]).collect();
    fit_regressor(&train.x().select_rows(&rows), &ys, spec)
}

pub fn score_risk(ds: &Dataset, model: &FittedModel) -> Result<RiskScores> {
    let pred = model.predict(ds.x())?;
    Ok(scores_from_predictions(&pred, ds.outcome_direction()))
}

pub fn scores_from_predictions(pred: &[f64], direction: OutcomeDirection) -> RiskScores {
    let sign = risk_sign(direction);
    RiskScores::from_risk(pred.iter().map(|p| sign * p).collect(), effect_sign(direction))
}
