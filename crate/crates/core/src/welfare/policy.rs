use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Stream};
use crate::stats::ceil_count;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Risk,
    TreatmentEffect,
    Random,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Risk => "risk",
            PolicyKind::TreatmentEffect => "treatment_effect",
            PolicyKind::Random => "random",
        }
    }
}

/// A budget-feasible binary allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub a: Vec<bool>,
    pub budget: f64,
}

impl Assignment {
    pub fn selected(&self) -> usize {
        self.a.iter().filter(|&&s| s).count()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Number of units a budget fraction buys among `m`: `ceil(budget * m)`, at least one.
pub fn budget_count(budget: f64, m: usize) -> usize {
    ceil_count(budget, m).clamp(1, m.max(1))
}

fn check_budget(budget: f64) -> Result<()> {
    if budget > 0.0 && budget < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("budget {budget} outside (0,1)")))
    }
}

/// Treats the `ceil(budget * m)` highest scores. Ties are broken by a seeded shuffle.
pub fn assign_top(scores: &[f64], budget: f64, seed: u64) -> Result<Assignment> {
    check_budget(budget)?;
    let m = scores.len();
    if m == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN policy score"));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut seed::stream_rng(seed, Stream::TieBreak));
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut a = vec![false; m];
    for &i in &order[..budget_count(budget, m)] {
        a[i] = true;
    }
    Ok(Assignment { a, budget })
}

/// Top-budget selection over seeded uniform scores.
pub fn random_assignment(m: usize, budget: f64, seed: u64) -> Result<Assignment> {
    let mut rng = seed::stream_rng(seed, Stream::RandomPolicy);
    let scores: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    assign_top(&scores, budget, seed)
}

/// Weighted mean benefit over treated units: `sum a w benefit / sum a w`.
///
/// With unit weights this is the treatment-on-the-treated estimate.
pub fn policy_value(a: &[bool], benefit: &[f64], weights: &[f64]) -> Result<f64> {
    if a.len() != benefit.len() || a.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "assignment {}, benefit {}, weights {}",
            a.len(),
            benefit.len(),
            weights.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        if a[i] {
            num += weights[i] * benefit[i];
            den += weights[i];
        }
    }
    if den == 0.0 {
        return Err(Error::EmptyAssignment);
    }
    Ok(num / den)
}

/// `w_i = m * exp(alpha * b'_i) / sum_j exp(alpha * b'_j)`; sums to `m`.
pub fn welfare_weights(b_prime: &[f64], alpha: f64) -> Vec<f64> {
    let m = b_prime.len() as f64;
    let top = b_prime.iter().map(|&p| alpha * p).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = b_prime.iter().map(|&p| (alpha * p - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| m * r / total).collect()
}

/// Social welfare functional used to score an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Welfare {
    Utilitarian,
    WeightedUtilitarian { alpha: f64 },
    Nash,
}

impl Welfare {
    pub fn label(&self) -> String {
        match self {
            Welfare::Utilitarian => "utilitarian".into(),
            Welfare::WeightedUtilitarian { alpha } => format!("weighted_alpha_{alpha}"),
            Welfare::Nash => "nash".into(),
        }
    }

    pub fn weights(&self, b_prime: &[f64]) -> Vec<f64> {
        match self {
            Welfare::WeightedUtilitarian { alpha } => welfare_weights(b_prime, *alpha),
            Welfare::Utilitarian | Welfare::Nash => vec![1.0; b_prime.len()],
        }
    }
}
