//! Browser bindings for three interactive views: the effect-vs-risk curve, the welfare
//! weight profile, and the confounding sweep. Results cross the boundary as JSON strings.

use serde_json::json;
use targeting::curve::kernel_curve;
use targeting::synthetic::{generate, SyntheticSpec};
use targeting::welfare::{
    sweep, welfare_weights, Arrangement, Pipeline, PipelineConfig, PolicyKind, SweepConfig, TeMode, Welfare,
};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn spec(n: usize, rho: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n,
        rho,
        seed,
        ..SyntheticSpec::default()
    }
}

/// Smoothed effect against baseline risk for a synthetic trial, with linear nuisances.
///
/// Returns `{b, tau_hat, ci_lo, ci_hi, true_tau}`; `true_tau` is aligned with `b`.
#[wasm_bindgen]
pub fn effect_curve(n: usize, rho: f64, window: usize, seed: u64) -> Result<String, JsValue> {
    let (ds, truth) = generate(&spec(n, rho, seed)).map_err(js_err)?;
    let pipeline = Pipeline::new(PipelineConfig::linear(), seed).map_err(js_err)?;
    let ctx = pipeline.evaluate(&ds, Arrangement::TwoWay, &[]).map_err(js_err)?;
    let curve = kernel_curve(&ctx.risk.b, ctx.benefit(), window).map_err(js_err)?;
    let true_tau: Vec<f64> = curve.order.iter().map(|&i| truth.tau[ctx.eval_rows[i]]).collect();
    Ok(json!({
        "b": curve.b,
        "tau_hat": curve.tau_hat,
        "ci_lo": curve.ci_lo,
        "ci_hi": curve.ci_hi,
        "true_tau": true_tau,
    })
    .to_string())
}

/// Normalised weights on a 101-point percentile grid, plus the w75 / w25 ratio.
#[wasm_bindgen]
pub fn weight_profile(alpha: f64) -> String {
    let p: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let w = welfare_weights(&p, alpha);
    json!({ "p": p, "w": w, "ratio_75_25": w[75] / w[25] }).to_string()
}

/// Utilitarian policy values across removal fractions, oracle effect scores.
///
/// Returns `{k, risk, treatment_effect, random}` with `{value, lo, hi}` per k.
#[wasm_bindgen]
pub fn confounding_sweep(n: usize, rho: f64, budget: f64, reps: usize, seed: u64) -> Result<String, JsValue> {
    let (ds, _) = generate(&spec(n, rho, seed)).map_err(js_err)?;
    let mut cfg = PipelineConfig::linear();
    cfg.te_mode = TeMode::OraclePseudo;
    let pipeline = Pipeline::new(cfg, seed).map_err(js_err)?;
    let sweep_cfg = SweepConfig {
        welfare: vec![Welfare::Utilitarian],
        budget,
        bootstrap_reps: reps,
        ..SweepConfig::default()
    };
    let res = sweep(&ds, &pipeline, &sweep_cfg).map_err(js_err)?;
    let series = |p: PolicyKind| {
        res.series("utilitarian", p)
            .iter()
            .map(|c| json!({ "value": c.value, "lo": c.ci_lo, "hi": c.ci_hi }))
            .collect::<Vec<_>>()
    };
    Ok(json!({
        "k": res.k_values,
        "risk": series(PolicyKind::Risk),
        "treatment_effect": series(PolicyKind::TreatmentEffect),
        "random": series(PolicyKind::Random),
    })
    .to_string())
}
