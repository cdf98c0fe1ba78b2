//! Selection bias by systematic removal.
//!
//! From the treated arm the `ceil(k * n_treated)` rows with the largest benefit are
//! dropped; from the control arm the `ceil(k * n_control)` rows with the smallest benefit.
//! What remains looks like an observational sample where treatment went worse than it
//! does in the trial. Benefit is the effect-signed pseudo-outcome difference, so
//! negative-effect outcomes need no special case.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::{self, Stream};
use crate::stats::ceil_count;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfoundingSpec {
    /// Fraction of each arm removed, in [0, 1).
    pub k: f64,
    /// Only used to break ties in benefit.
    pub seed: u64,
}

impl ConfoundingSpec {
    pub fn new(k: f64, seed: u64) -> Self {
        Self { k, seed }
    }
}

/// `(treated removed, control removed)`.
pub fn removal_counts(k: f64, n_treated: usize, n_control: usize) -> (usize, usize) {
    (ceil_count(k, n_treated), ceil_count(k, n_control))
}

/// Indices (ascending) of rows that survive removal.
pub fn confounded_rows(w: &[bool], benefit: &[f64], spec: ConfoundingSpec) -> Result<Vec<usize>> {
    let k = spec.k;
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InfeasibleK {
            k,
            reason: "k must lie in [0, 1)".into(),
        });
    }
    if w.len() != benefit.len() {
        return Err(Error::Dimension(format!(
            "{} rows but {} benefits",
            w.len(),
            benefit.len()
        )));
    }
    let mut treated: Vec<usize> = (0..w.len()).filter(|&i| w[i]).collect();
    let mut control: Vec<usize> = (0..w.len()).filter(|&i| !w[i]).collect();
    let (drop_t, drop_c) = removal_counts(k, treated.len(), control.len());
    if drop_t >= treated.len() || drop_c >= control.len() {
        return Err(Error::InfeasibleK {
            k,
            reason: format!(
                "removing {drop_t} of {} treated and {drop_c} of {} control rows empties an arm",
                treated.len(),
                control.len()
            ),
        });
    }
    let base = seed::derive(spec.seed, Stream::Confounding);
    treated.shuffle(&mut seed::rng(seed::child(base, 1)));
    control.shuffle(&mut seed::rng(seed::child(base, 0)));
    treated.sort_by(|&a, &b| benefit[b].total_cmp(&benefit[a]));
    control.sort_by(|&a, &b| benefit[a].total_cmp(&benefit[b]));

    let mut removed = vec![false; w.len()];
    for &i in treated[..drop_t].iter().chain(&control[..drop_c]) {
        removed[i] = true;
    }
    Ok((0..w.len()).filter(|&i| !removed[i]).collect())
}

pub fn remove_confounded(ds: &Dataset, benefit: &[f64], spec: ConfoundingSpec) -> Result<Dataset> {
    if benefit.len() != ds.n() {
        return Err(Error::Dimension(format!(
            "{} rows but {} benefits",
            ds.n(),
            benefit.len()
        )));
    }
    let keep = confounded_rows(ds.w(), benefit, spec)?;
    Ok(ds.select(&keep))
}
