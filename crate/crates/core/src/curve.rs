//! Second-stage CATE model and the kernel-smoothed effect-vs-risk curve.
//!
//! The curve is a Nadaraya-Watson estimate with Gaussian kernel `K(u) = exp(-u^2/2)` and
//! an adaptive bandwidth per point: with risk sorted ascending,
//! `sigma_i = (b[i + up] - b[i - down]) / 2` where `up = ceil(window/2)`,
//! `down = up - 1` and indices are clamped to the data. Pointwise 95% bands use the
//! kernel-weighted variance `sum K (tau - tau_hat)^2 / (sum K)^2`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::learners::{fit_regressor, FittedModel, LearnerSpec};
use crate::nuisance::PseudoOutcomes;
use crate::stats::spearman;
use crate::{Error, Matrix, Result};

pub const DEFAULT_WINDOW: usize = 200;
const Z_95: f64 = 1.96;

/// Regression of the pseudo-outcome difference on features.
#[derive(Debug, Clone, PartialEq)]
pub struct CateModel {
    pub model: FittedModel,
    pub provenance: String,
}

impl CateModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.predict(x)
    }
}

pub fn fit_cate(
    x: &Matrix,
    po: &PseudoOutcomes,
    spec: &LearnerSpec,
    provenance: impl Into<String>,
) -> Result<CateModel> {
    if x.nrows() != po.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} pseudo-outcomes",
            x.nrows(),
            po.len()
        )));
    }
    Ok(CateModel {
        model: fit_regressor(x, &po.diff, spec)?,
        provenance: provenance.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveEstimate {
    /// Risk values, ascending.
    pub b: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub sigma: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    /// Input row behind each curve point.
    pub order: Vec<usize>,
}

impl CurveEstimate {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// CSV with columns `b, tau_hat, sigma, ci_lo, ci_hi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["b", "tau_hat", "sigma", "ci_lo", "ci_hi"])?;
        for i in 0..self.len() {
            wtr.write_record(&[
                self.b[i].to_string(),
                self.tau_hat[i].to_string(),
                self.sigma[i].to_string(),
                self.ci_lo[i].to_string(),
                self.ci_hi[i].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Kernel estimate and 95% half-width at `at` with bandwidth `sigma`.
///
/// `sigma = 0` averages the rows with `b == at` exactly (the limit of the kernel).
pub fn kernel_point(b: &[f64], tau: &[f64], at: f64, sigma: f64) -> (f64, f64) {
    let weight = |bj: f64| {
        if sigma > 0.0 {
            gaussian_kernel((bj - at) / sigma)
        } else if bj == at {
            1.0
        } else {
            0.0
        }
    };
    let mut sw = 0.0;
    let mut swt = 0.0;
    for (&bj, &tj) in b.iter().zip(tau) {
        let k = weight(bj);
        sw += k;
        swt += k * tj;
    }
    let est = swt / sw;
    let mut sv = 0.0;
    for (&bj, &tj) in b.iter().zip(tau) {
        let k = weight(bj);
        sv += k * (tj - est) * (tj - est);
    }
    (est, Z_95 * (sv / (sw * sw)).sqrt())
}

/// Window offsets `(up, down)`; `(100, 99)` for the default window of 200.
pub fn window_offsets(window: usize) -> (usize, usize) {
    let up = window.div_ceil(2);
    (up, up - 1)
}

/// Smoothed effect-vs-risk curve evaluated at every data point.
///
/// Rows are sorted by risk with ties kept in input order.
pub fn kernel_curve(b: &[f64], tau: &[f64], window: usize) -> Result<CurveEstimate> {
    let n = b.len();
    if tau.len() != n {
        return Err(Error::Dimension(format!("{n} risk values for {} effects", tau.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if window < 2 {
        return Err(Error::invalid(format!("window {window} must be at least 2")));
    }
    if b.iter().chain(tau).any(|v| !v.is_finite()) {
        return Err(Error::invalid("curve inputs must be finite"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
    let bs: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let ts: Vec<f64> = order.iter().map(|&i| tau[i]).collect();
    let (up, down) = window_offsets(window);

    let points: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sigma = 0.5 * (bs[(i + up).min(n - 1)] - bs[i.saturating_sub(down)]);
            let (est, half) = kernel_point(&bs, &ts, bs[i], sigma);
            (sigma, est, half)
        })
        .collect();

    let mut out = CurveEstimate {
        b: bs,
        tau_hat: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        ci_lo: Vec::with_capacity(n),
        ci_hi: Vec::with_capacity(n),
        order,
    };
    for (sigma, est, half) in points {
        out.sigma.push(sigma);
        out.tau_hat.push(est);
        out.ci_lo.push(est - half);
        out.ci_hi.push(est + half);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSummary {
    /// Share of curve points whose lower band is above zero.
    pub significant_fraction: f64,
    /// Spearman correlation between risk and the smoothed effect.
    pub trend: f64,
}

pub fn curve_significance_summary(curve: &CurveEstimate) -> CurveSummary {
    let n = curve.len().max(1) as f64;
    CurveSummary {
        significant_fraction: curve.ci_lo.iter().filter(|&&l| l > 0.0).count() as f64 / n,
        trend: spearman(&curve.b, &curve.tau_hat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_two_point_estimate() {
        let (est, _) = kernel_point(&[0.0, 1.0], &[0.0, 2.0], 0.0, 1.0);
        let e = (-0.5f64).exp();
        assert!((est - 2.0 * e / (1.0 + e)).abs() < 1e-15);
        assert!((est - 0.7550).abs() < 1e-4);
    }

    #[test]
    fn default_offsets() {
        assert_eq!(window_offsets(200), (100, 99));
        assert_eq!(window_offsets(7), (4, 3));
    }

    #[test]
    fn constant_effect_has_zero_width() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = kernel_curve(&b, &[5.0; 50], 20).unwrap();
        for i in 0..50 {
            assert!((c.tau_hat[i] - 5.0).abs() < 1e-12);
            assert!(c.ci_hi[i] - c.ci_lo[i] < 1e-12);
        }
    }

    #[test]
    fn symmetric_inputs_symmetric_estimates() {
        let c = kernel_curve(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 1.0], DEFAULT_WINDOW).unwrap();
        assert!((c.tau_hat[0] - c.tau_hat[2]).abs() < 1e-15);
    }

    #[test]
    fn massive_ties_fall_back_to_group_mean() {
        let b = [1.0, 1.0, 1.0, 1.0, 2.0];
        let tau = [0.0, 2.0, 4.0, 6.0, 100.0];
        let c = kernel_curve(&b, &tau, 2).unwrap();
        // first point: sigma = (b[1] - b[0]) / 2 = 0
        assert_eq!(c.sigma[0], 0.0);
        assert_eq!(c.tau_hat[0], 3.0);
        let half = 1.96 * ((9.0 + 1.0 + 1.0 + 9.0) / 16.0f64).sqrt();
        assert!((c.ci_hi[0] - 3.0 - half).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kernel_curve(&[1.0], &[1.0], 200),
            Err(Error::InsufficientData { .. })
        ));
        assert!(kernel_curve(&[1.0, 2.0], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn summary_cases() {
        let b: Vec<f64> = (0..10).map(f64::from).collect();
        let flat = kernel_curve(&b, &[-1.0; 10], 4).unwrap();
        let s = curve_significance_summary(&flat);
        assert_eq!(s.trend, 0.0);
        assert_eq!(s.significant_fraction, 0.0);
        let rising = kernel_curve(&b, &b, 4).unwrap();
        assert!((curve_significance_summary(&rising).trend - 1.0).abs() < 1e-12);
    }
}
