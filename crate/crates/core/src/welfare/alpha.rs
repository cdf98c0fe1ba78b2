//! Smallest welfare-weight exponent at which risk targeting catches up with
//! treatment-effect targeting.

use serde::{Deserialize, Serialize};

use super::policy::{assign_top, policy_value, welfare_weights, Assignment};
use crate::{Error, Result};

/// `2 ln 100`: beyond it the 75th/25th percentile weight ratio exceeds 100.
pub fn alpha_cap() -> f64 {
    2.0 * 100f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: alpha_cap(),
            step: 0.25,
        }
    }
}

impl AlphaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.step > 0.0 && self.hi >= self.lo) {
            return Err(Error::invalid(format!("bad alpha grid {self:?}")));
        }
        if self.hi > alpha_cap() + 1e-12 {
            return Err(Error::invalid(format!(
                "alpha grid upper end {} exceeds the cap 2 ln 100 = {}",
                self.hi,
                alpha_cap()
            )));
        }
        Ok(())
    }

    /// `lo, lo + step, ...` up to `hi` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

/// Everything the search needs, aligned on evaluation rows.
#[derive(Debug, Clone, Copy)]
pub struct AlphaContext<'a> {
    pub benefit: &'a [f64],
    pub b: &'a [f64],
    pub b_prime: &'a [f64],
    pub te_scores: &'a [f64],
}

/// First grid alpha where the weighted value of the risk assignment is at least that
/// of the treatment-effect assignment, or `None` if there is none.
pub fn alpha_threshold(ctx: AlphaContext<'_>, budget: f64, grid: &AlphaGrid, seed: u64) -> Result<Option<f64>> {
    let risk = assign_top(ctx.b, budget, seed)?;
    let te = assign_top(ctx.te_scores, budget, seed)?;
    threshold_for_assignments(&risk, &te, ctx.benefit, ctx.b_prime, grid)
}

pub fn threshold_for_assignments(
    risk: &Assignment,
    te: &Assignment,
    benefit: &[f64],
    b_prime: &[f64],
    grid: &AlphaGrid,
) -> Result<Option<f64>> {
    grid.validate()?;
    for alpha in grid.values() {
        let w = welfare_weights(b_prime, alpha);
        if policy_value(&risk.a, benefit, &w)? >= policy_value(&te.a, benefit, &w)? {
            return Ok(Some(alpha));
        }
    }
    Ok(None)
}
