//! Ridge regression and ridge-penalised logistic regression.

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Least squares with an unpenalised intercept and `lambda * |coef|^2` penalty.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    let (n, d) = (x.nrows(), x.ncols());
    let x_mean: Vec<f64> = (0..d)
        .map(|j| x.rows_iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (row, &yi) in x.rows_iter().zip(y) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let yc = yi - y_mean;
        for j in 0..d {
            rhs[j] += centered[j] * yc;
            for k in 0..=j {
                gram[j * d + k] += centered[j] * centered[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            gram[k * d + j] = gram[j * d + k];
        }
        gram[j * d + j] += lambda;
    }
    let coef = solve_spd(&gram, &rhs, d)?;
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel { intercept, coef })
}

/// Solves `A z = b` for symmetric positive (semi-)definite `A` by Cholesky. A
/// singular `A` (collinear features with no penalty) gets a growing diagonal jitter.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Ok(Vec::new());
    }
    let scale = (0..d).map(|j| a[j * d + j].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..12 {
        if let Some(l) = cholesky(a, d, jitter) {
            return Ok(cholesky_solve(&l, b, d));
        }
        jitter = if jitter == 0.0 { scale * 1e-12 } else { jitter * 10.0 };
    }
    Err(Error::Invariant("linear system is not positive definite".into()))
}

fn cholesky(a: &[f64], d: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 || s.is_infinite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // reject near-singular factors; they come from exact collinearity
    let max_diag = (0..d).map(|i| l[i * d + i]).fold(0.0, f64::max);
    let min_diag = (0..d).map(|i| l[i * d + i]).fold(f64::INFINITY, f64::min);
    if min_diag < max_diag * 1e-7 {
        return None;
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * z[k];
        }
        z[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = z[i];
        for k in i + 1..d {
            s -= l[k * d + i] * z[k];
        }
        z[i] = s / l[i * d + i];
    }
    z
}

pub const LOGISTIC_TOL: f64 = 1e-8;
pub const LOGISTIC_MAX_ITER: usize = 500;

/// Logistic model on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        let mut eta = self.intercept;
        for (j, c) in self.coef.iter().enumerate() {
            eta += c * (x[j] - self.x_mean[j]) / self.x_scale[j];
        }
        eta
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Penalised maximum likelihood by damped Newton (IRLS) steps.
///
/// The penalty `lambda/2 * |coef|^2` applies to coefficients of standardised features,
/// not to the intercept. Non-convergence within the iteration budget is logged and the
/// last iterate is returned.
pub fn fit_logistic(x: &Matrix, labels: &[f64], lambda: f64) -> Result<LogisticModel> {
    let (n, d) = (x.nrows(), x.ncols());
    let x_mean: Vec<f64> = (0..d)
        .map(|j| x.rows_iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let x_scale: Vec<f64> = (0..d)
        .map(|j| {
            let v = x.rows_iter().map(|r| (r[j] - x_mean[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<f64> = x
        .rows_iter()
        .flat_map(|r| (0..d).map(|j| (r[j] - x_mean[j]) / x_scale[j]).collect::<Vec<_>>())
        .collect();
    let row = |i: usize| &z[i * d..(i + 1) * d];
    let p = d + 1;

    let objective = |theta: &[f64]| -> f64 {
        let mut nll = 0.0;
        for i in 0..n {
            let eta = theta[0] + row(i).iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
            // log(1 + e^eta) - y*eta, computed stably
            let softplus = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            nll += softplus - labels[i] * eta;
        }
        nll + 0.5 * lambda * theta[1..].iter().map(|b| b * b).sum::<f64>()
    };

    let mean_y = labels.iter().sum::<f64>() / n as f64;
    let mut theta = vec![0.0; p];
    theta[0] = (mean_y / (1.0 - mean_y)).ln().clamp(-30.0, 30.0);
    let mut obj = objective(&theta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < LOGISTIC_MAX_ITER {
        iterations += 1;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut xa = vec![0.0; p];
        xa[0] = 1.0;
        for i in 0..n {
            xa[1..].copy_from_slice(row(i));
            let eta: f64 = xa.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let wgt = mu * (1.0 - mu);
            for j in 0..p {
                grad[j] += xa[j] * (mu - labels[i]);
                for k in 0..=j {
                    hess[j * p + k] += wgt * xa[j] * xa[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                hess[k * p + j] = hess[j * p + k];
            }
        }
        for j in 1..p {
            grad[j] += lambda * theta[j];
            hess[j * p + j] += lambda;
        }
        hess[0] += 1e-10;
        let step = solve_spd(&hess, &grad, p)?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let c_obj = objective(&cand);
            if c_obj <= obj {
                accepted = Some((cand, c_obj));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, c_obj)) = accepted else {
            converged = true;
            break;
        };
        let max_step = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        let rel = (obj - c_obj).abs() / obj.abs().max(1.0);
        theta = cand;
        obj = c_obj;
        if max_step < LOGISTIC_TOL || rel < LOGISTIC_TOL * 1e-4 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("logistic regression did not converge in {LOGISTIC_MAX_ITER} iterations");
    }
    Ok(LogisticModel {
        intercept: theta[0],
        coef: theta[1..].to_vec(),
        x_mean,
        x_scale,
        converged,
        iterations,
    })
}
