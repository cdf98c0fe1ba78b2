//! Cross-fitted nuisance models and doubly-robust pseudo-outcomes.
//!
//! For a unit with features `x`, treatment `w` and outcome `y`,
//!
//! ```text
//! chi(a) = mu(x, a) + 1[w = a] * (y - mu(x, a)) / (a * pi(x) + (1 - a) * (1 - pi(x)))
//! ```
//!
//! `chi(a)` has expectation `Y(a)` whenever either the outcome model `mu` or the
//! propensity `pi` is correct. `mu(., 0)` and `mu(., 1)` are two separate regressions on
//! the control and treated rows.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::learners::{fit_propensity, fit_regressor, FittedModel, LearnerSpec};
use crate::risk::effect_sign;
use crate::seed::{self, Stream};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityMode {
    /// Fitted propensity, clipped into `clip_bounds`.
    EstimatedClipped,
    /// Constant treated share of the training split.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoMode {
    /// Each training row uses the models that did not see it.
    WithinFold,
    /// Held-out rows average the pseudo-outcomes of every fold's models.
    EnsembleMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossFitConfig {
    #[serde(default = "default_outcome")]
    pub outcome: LearnerSpec,
    #[serde(default = "default_propensity")]
    pub propensity: LearnerSpec,
    #[serde(default = "default_folds")]
    pub n_folds: usize,
    #[serde(default = "default_mode")]
    pub propensity_mode: PropensityMode,
    #[serde(default = "default_clip")]
    pub clip_bounds: (f64, f64),
}

fn default_outcome() -> LearnerSpec {
    LearnerSpec::random_forest()
}
fn default_propensity() -> LearnerSpec {
    LearnerSpec::logistic()
}
fn default_folds() -> usize {
    2
}
fn default_mode() -> PropensityMode {
    PropensityMode::EstimatedClipped
}
fn default_clip() -> (f64, f64) {
    (0.02, 0.98)
}

impl Default for CrossFitConfig {
    fn default() -> Self {
        Self {
            outcome: default_outcome(),
            propensity: default_propensity(),
            n_folds: default_folds(),
            propensity_mode: default_mode(),
            clip_bounds: default_clip(),
        }
    }
}

impl CrossFitConfig {
    pub fn with_learners(outcome: LearnerSpec, propensity: LearnerSpec) -> Self {
        Self {
            outcome,
            propensity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::invalid(format!(
                "n_folds = {} but at least 2 are needed",
                self.n_folds
            )));
        }
        let (lo, hi) = self.clip_bounds;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(Error::invalid(format!(
                "clip bounds ({lo}, {hi}) must satisfy 0 < lo < hi < 1"
            )));
        }
        self.outcome.validate()?;
        self.propensity.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Propensity {
    Model(FittedModel),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    /// Training-split rows held out from this fold's models, ascending.
    pub rows: Vec<usize>,
    pub mu0: FittedModel,
    pub mu1: FittedModel,
    pub propensity: Propensity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitNuisances {
    pub folds: Vec<Fold>,
    pub propensity_mode: PropensityMode,
    pub clip_bounds: (f64, f64),
    n_train: usize,
    fingerprint: u64,
}

impl CrossFitNuisances {
    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Fold index of every training row.
    pub fn fold_of_rows(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_train];
        for (f, fold) in self.folds.iter().enumerate() {
            for &r in &fold.rows {
                out[r] = f;
            }
        }
        out
    }
}

fn fingerprint(ds: &Dataset) -> u64 {
    let mut h = DefaultHasher::new();
    ds.n().hash(&mut h);
    ds.w().hash(&mut h);
    for v in ds.y().iter().chain(ds.x().as_slice()) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

const MAX_REFOLDS: u64 = 100;

fn fold_partition(n: usize, k: usize, stream: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(stream));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut rows = perm[start..start + size].to_vec();
        rows.sort_unstable();
        folds.push(rows);
        start += size;
    }
    folds
}

/// Fits one (mu0, mu1, pi) triple per fold, each on the rows outside that fold.
///
/// A partition whose complement lacks an arm is redrawn from a fresh stream, up to 100
/// times. With [`PropensityMode::Uniform`] every fold uses the treated share of the
/// whole training split.
pub fn fit_crossfit(train: &Dataset, cfg: &CrossFitConfig, seed: u64) -> Result<CrossFitNuisances> {
    cfg.validate()?;
    let n = train.n();
    let k = cfg.n_folds;
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let base = seed::derive(seed, Stream::Folds);
    let mut partition = None;
    for attempt in 0..MAX_REFOLDS {
        let p = fold_partition(n, k, seed::child(base, attempt));
        let ok = p.iter().all(|rows| {
            let held = rows.iter().filter(|&&r| train.w()[r]).count();
            let (t, c) = (train.n_treated() - held, train.n_control() - (rows.len() - held));
            t > 0 && c > 0
        });
        if ok {
            partition = Some(p);
            break;
        }
    }
    let partition = partition.ok_or_else(|| {
        Error::Degenerate(format!(
            "no {k}-fold partition leaves both arms in every complement after {MAX_REFOLDS} tries"
        ))
    })?;

    let uniform = train.n_treated() as f64 / n as f64;
    let out_seed = seed::derive(seed, Stream::OutcomeModel);
    let prop_seed = seed::derive(seed, Stream::PropensityModel);
    let folds = partition
        .into_par_iter()
        .enumerate()
        .map(|(f, rows)| -> Result<Fold> {
            let mut held = vec![false; n];
            for &r in &rows {
                held[r] = true;
            }
            let complement: Vec<usize> = (0..n).filter(|&r| !held[r]).collect();
            let ctrl: Vec<usize> = complement.iter().copied().filter(|&r| !train.w()[r]).collect();
            let trt: Vec<usize> = complement.iter().copied().filter(|&r| train.w()[r]).collect();
            let fit_arm = |arm: &[usize], stream: u64| {
                let spec = cfg.outcome.clone().with_seed(cfg.outcome.seed ^ stream);
                let ys: Vec<f64> = arm.iter().map(|&r| train.y()[r]).collect();
                fit_regressor(&train.x().select_rows(arm), &ys, &spec)
            };
            let mu0 = fit_arm(&ctrl, seed::child(out_seed, 2 * f as u64))?;
            let mu1 = fit_arm(&trt, seed::child(out_seed, 2 * f as u64 + 1))?;
            let propensity = match cfg.propensity_mode {
                PropensityMode::Uniform => Propensity::Constant(uniform),
                PropensityMode::EstimatedClipped => {
                    let spec = cfg
                        .propensity
                        .clone()
                        .with_seed(cfg.propensity.seed ^ seed::child(prop_seed, f as u64));
                    let ws: Vec<bool> = complement.iter().map(|&r| train.w()[r]).collect();
                    Propensity::Model(fit_propensity(&train.x().select_rows(&complement), &ws, &spec)?)
                }
            };
            Ok(Fold {
                rows,
                mu0,
                mu1,
                propensity,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CrossFitNuisances {
        folds,
        propensity_mode: cfg.propensity_mode,
        clip_bounds: cfg.clip_bounds,
        n_train: n,
        fingerprint: fingerprint(train),
    })
}

/// Per-row doubly-robust pseudo-outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutcomes {
    pub chi0: Vec<f64>,
    pub chi1: Vec<f64>,
    /// `chi1 - chi0`.
    pub diff: Vec<f64>,
    /// `diff` times the effect sign: higher is always better for the unit.
    pub benefit: Vec<f64>,
}

impl PseudoOutcomes {
    pub fn from_parts(chi0: Vec<f64>, chi1: Vec<f64>, sign: f64) -> Result<Self> {
        if chi0.len() != chi1.len() {
            return Err(Error::Dimension("chi0 and chi1 differ in length".into()));
        }
        let diff: Vec<f64> = chi1.iter().zip(&chi0).map(|(a, b)| a - b).collect();
        if let Some(i) = diff.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite pseudo-outcome at row {i}")));
        }
        let benefit = diff.iter().map(|d| sign * d).collect();
        Ok(Self {
            chi0,
            chi1,
            diff,
            benefit,
        })
    }

    pub fn len(&self) -> usize {
        self.diff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diff.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            chi0: pick(&self.chi0),
            chi1: pick(&self.chi1),
            diff: pick(&self.diff),
            benefit: pick(&self.benefit),
        }
    }

    /// CSV with columns `row, chi0, chi1, diff, benefit`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["row", "chi0", "chi1", "diff", "benefit"])?;
        for i in 0..self.len() {
            wtr.write_record(&[
                i.to_string(),
                self.chi0[i].to_string(),
                self.chi1[i].to_string(),
                self.diff[i].to_string(),
                self.benefit[i].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// `(chi0, chi1)` for one row given nuisance values.
pub fn chi_pair(mu0: f64, mu1: f64, pi: f64, treated: bool, y: f64) -> (f64, f64) {
    if treated {
        (mu0, mu1 + (y - mu1) / pi)
    } else {
        (mu0 + (y - mu0) / (1.0 - pi), mu1)
    }
}

fn fold_propensities(nuis: &CrossFitNuisances, fold: &Fold, x: &Matrix) -> Result<Vec<f64>> {
    match &fold.propensity {
        Propensity::Constant(p) => Ok(vec![*p; x.nrows()]),
        Propensity::Model(m) => {
            let (lo, hi) = nuis.clip_bounds;
            Ok(m.predict(x)?.into_iter().map(|p| p.clamp(lo, hi)).collect())
        }
    }
}

/// `(chi0, chi1)` for every row of `target` using the models of fold `f`.
pub fn fold_chi(target: &Dataset, nuis: &CrossFitNuisances, f: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let fold = nuis
        .folds
        .get(f)
        .ok_or_else(|| Error::invalid(format!("fold {f} out of range")))?;
    let x = target.x();
    let mu0 = fold.mu0.predict(x)?;
    let mu1 = fold.mu1.predict(x)?;
    let pi = fold_propensities(nuis, fold, x)?;
    Ok((0..target.n())
        .map(|i| chi_pair(mu0[i], mu1[i], pi[i], target.w()[i], target.y()[i]))
        .unzip())
}

pub fn pseudo_outcomes(target: &Dataset, nuis: &CrossFitNuisances, mode: PseudoMode) -> Result<PseudoOutcomes> {
    let sign = effect_sign(target.outcome_direction());
    let n = target.n();
    match mode {
        PseudoMode::WithinFold => {
            if n != nuis.n_train || fingerprint(target) != nuis.fingerprint {
                return Err(Error::invalid(
                    "within-fold pseudo-outcomes need the dataset the nuisances were fit on",
                ));
            }
            let mut chi0 = vec![0.0; n];
            let mut chi1 = vec![0.0; n];
            for fold in &nuis.folds {
                let sub = target.select(&fold.rows);
                let x = sub.x();
                let mu0 = fold.mu0.predict(x)?;
                let mu1 = fold.mu1.predict(x)?;
                let pi = fold_propensities(nuis, fold, x)?;
                for (j, &r) in fold.rows.iter().enumerate() {
                    let (c0, c1) = chi_pair(mu0[j], mu1[j], pi[j], sub.w()[j], sub.y()[j]);
                    chi0[r] = c0;
                    chi1[r] = c1;
                }
            }
            PseudoOutcomes::from_parts(chi0, chi1, sign)
        }
        PseudoMode::EnsembleMean => {
            let per_fold = (0..nuis.folds.len())
                .into_par_iter()
                .map(|f| fold_chi(target, nuis, f))
                .collect::<Result<Vec<_>>>()?;
            let k = per_fold.len() as f64;
            let mut chi0 = vec![0.0; n];
            let mut chi1 = vec![0.0; n];
            for (c0, c1) in &per_fold {
                for i in 0..n {
                    chi0[i] += c0[i];
                    chi1[i] += c1[i];
                }
            }
            chi0.iter_mut().chain(chi1.iter_mut()).for_each(|v| *v /= k);
            PseudoOutcomes::from_parts(chi0, chi1, sign)
        }
    }
}

/// Mean pseudo-outcome difference.
pub fn ate_estimate(po: &PseudoOutcomes) -> f64 {
    crate::stats::mean(&po.diff)
}
