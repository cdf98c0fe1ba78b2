//! RCT generator with known potential outcomes.
//!
//! Features are i.i.d. standard normal. The control mean is linear,
//! `mu0(x) = intercept + x·beta0` with `beta0 = (1, 1/2, 0, ...)`, and the effect is
//!
//! ```text
//! tau(x) = te_scale * ( rho * (-x·beta0)/|beta0| + sqrt(1 - rho^2) * x·beta1/|beta1| )
//! ```
//!
//! with `beta1 = (0, 0, 1, 1/2, 0, ...)` orthogonal to `beta0`. Since low `mu0` means high
//! risk for a higher-is-better outcome, `rho > 0` makes the riskiest units benefit most
//! and `rho = 0` makes the effect independent of risk. Treatment is Bernoulli and
//! independent of everything else.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeDirection};
use crate::seed::{self, Stream};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub noise_sd: f64,
    pub treat_fraction: f64,
    /// Alignment between the effect and baseline risk, in [-1, 1].
    pub rho: f64,
    pub te_scale: f64,
    pub seed: u64,
    /// Constant added to both potential outcomes.
    pub intercept: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 6,
            noise_sd: 1.0,
            treat_fraction: 0.5,
            rho: 0.5,
            te_scale: 1.0,
            seed: 0,
            intercept: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.d < 2 {
            return Err(Error::Dimension(format!(
                "d = {} but at least 2 features are required",
                self.d
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid(format!("noise_sd {} must be >= 0", self.noise_sd)));
        }
        if !(self.treat_fraction > 0.0 && self.treat_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "treat_fraction {} outside (0,1)",
                self.treat_fraction
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho {} outside [-1,1]", self.rho)));
        }
        if !(self.te_scale >= 0.0 && self.te_scale.is_finite()) {
            return Err(Error::invalid(format!("te_scale {} must be >= 0", self.te_scale)));
        }
        if !self.intercept.is_finite() {
            return Err(Error::invalid("intercept must be finite"));
        }
        if self.d < 4 && self.rho.abs() != 1.0 {
            return Err(Error::Dimension(format!(
                "d = {} < 4 leaves no room for the risk-orthogonal effect component (rho = {})",
                self.d, self.rho
            )));
        }
        Ok(())
    }
}

/// True conditional means for every generated row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    /// Exactly `mu1 - mu0`.
    pub tau: Vec<f64>,
}

impl GroundTruth {
    pub fn ate(&self) -> f64 {
        crate::stats::mean(&self.tau)
    }
}

const BETA0: [f64; 2] = [1.0, 0.5];
const BETA1: [f64; 2] = [1.0, 0.5]; // on features 2 and 3

fn norm(b: &[f64]) -> f64 {
    b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Control-arm mean and effect for a single feature row.
pub fn conditional_means(spec: &SyntheticSpec, x: &[f64]) -> (f64, f64) {
    let risk_index = BETA0[0] * x[0] + BETA0[1] * x[1];
    let mu0 = spec.intercept + risk_index;
    let aligned = -risk_index / norm(&BETA0);
    let orth_weight = (1.0 - spec.rho * spec.rho).max(0.0).sqrt();
    let orthogonal = if orth_weight > 0.0 {
        (BETA1[0] * x[2] + BETA1[1] * x[3]) / norm(&BETA1)
    } else {
        0.0
    };
    let tau = spec.te_scale * (spec.rho * aligned + orth_weight * orthogonal);
    (mu0, tau)
}

pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);

    let mut feat_rng = seed::stream_rng(spec.seed, Stream::Features);
    let data: Vec<f64> = (0..n * d).map(|_| feat_rng.sample(StandardNormal)).collect();
    let x = Matrix::from_vec(n, d, data)?;

    let mut treat_rng = seed::stream_rng(spec.seed, Stream::Treatment);
    let w: Vec<bool> = (0..n)
        .map(|_| treat_rng.random::<f64>() < spec.treat_fraction)
        .collect();

    let mut noise_rng = seed::stream_rng(spec.seed, Stream::Noise);
    let mut mu0 = Vec::with_capacity(n);
    let mut mu1 = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (i, &treated) in w.iter().enumerate() {
        let (m0, t) = conditional_means(spec, x.row(i));
        let m1 = m0 + t;
        let eps: f64 = noise_rng.sample::<f64, _>(StandardNormal) * spec.noise_sd;
        y.push(if treated { m1 } else { m0 } + eps);
        mu0.push(m0);
        mu1.push(m1);
        tau.push(m1 - m0);
    }
    let ds = Dataset::new("synthetic", x, w, y, OutcomeDirection::HigherIsBetter)?
        .with_known_propensity(Some(spec.treat_fraction))?;
    Ok((ds, GroundTruth { mu0, mu1, tau }))
}
