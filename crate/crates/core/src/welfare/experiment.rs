//! The evaluation pipeline and the confounding sweep.
//!
//! Ground truth for evaluation rows is always the ensemble-mean pseudo-outcome from
//! nuisances fit on the unconfounded training rows. Confounding only touches the data
//! used to build the treatment-effect policy. Two arrangements exist:
//!
//! - `Holdout` (predicted mode): train on one split, evaluate on the other. TE scores come
//!   from a second-stage CATE model fit on the (confounded) training split.
//! - `TwoWay` (oracle mode): each split is scored by models fit on the other, and TE
//!   scores are the pseudo-outcome benefits from nuisances fit on the confounded other
//!   split. At `k = 0` the TE scores equal the ground truth exactly.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha::{threshold_for_assignments, AlphaGrid};
use super::policy::{assign_top, policy_value, random_assignment, Assignment, PolicyKind, Welfare};
use crate::confounding::{confounded_rows, ConfoundingSpec};
use crate::curve::fit_cate;
use crate::data::{split_dataset, Dataset};
use crate::learners::LearnerSpec;
use crate::nuisance::{fit_crossfit, pseudo_outcomes, CrossFitConfig, PseudoMode, PseudoOutcomes};
use crate::risk::{effect_sign, fit_risk_model, score_risk, RiskScores};
use crate::seed::{self, Stream};
use crate::stats::{quantile_sorted, sd};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeMode {
    Predicted,
    OraclePseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    Holdout,
    TwoWay,
}

impl TeMode {
    pub fn arrangement(self) -> Arrangement {
        match self {
            TeMode::Predicted => Arrangement::Holdout,
            TeMode::OraclePseudo => Arrangement::TwoWay,
        }
    }
}

/// How outcomes are floored at 1 before taking logs for Nash welfare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NashFloor {
    /// `y + (1 - min y)` when `min y < 1`.
    Shift,
    /// `y / min y` when `0 < min y < 1`.
    Scale,
}

impl NashFloor {
    pub fn apply(self, y: &[f64]) -> Result<Vec<f64>> {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= 1.0 {
            return Ok(y.to_vec());
        }
        match self {
            NashFloor::Shift => Ok(y.iter().map(|v| v + (1.0 - min)).collect()),
            NashFloor::Scale if min > 0.0 => Ok(y.iter().map(|v| v / min).collect()),
            NashFloor::Scale => Err(Error::invalid(format!(
                "multiplicative Nash floor needs positive outcomes, minimum is {min}"
            ))),
        }
    }

    /// Floored outcomes, logged.
    pub fn log_outcomes(self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(y)?.into_iter().map(f64::ln).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub crossfit: CrossFitConfig,
    #[serde(default = "LearnerSpec::random_forest")]
    pub risk: LearnerSpec,
    #[serde(default = "LearnerSpec::random_forest")]
    pub cate: LearnerSpec,
    #[serde(default = "default_te_mode")]
    pub te_mode: TeMode,
    #[serde(default = "default_nash_floor")]
    pub nash_floor: NashFloor,
}

fn default_train_fraction() -> f64 {
    0.5
}
fn default_te_mode() -> TeMode {
    TeMode::Predicted
}
fn default_nash_floor() -> NashFloor {
    NashFloor::Shift
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_fraction: default_train_fraction(),
            crossfit: CrossFitConfig::default(),
            risk: LearnerSpec::random_forest(),
            cate: LearnerSpec::random_forest(),
            te_mode: default_te_mode(),
            nash_floor: default_nash_floor(),
        }
    }
}

impl PipelineConfig {
    /// Ridge outcome, risk and CATE models with logistic propensities.
    pub fn linear() -> Self {
        Self {
            crossfit: CrossFitConfig::with_learners(LearnerSpec::ridge(), LearnerSpec::logistic()),
            risk: LearnerSpec::ridge(),
            cate: LearnerSpec::ridge(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train_fraction {} outside (0,1)",
                self.train_fraction
            )));
        }
        self.crossfit.validate()?;
        self.risk.validate()?;
        self.cate.validate()
    }
}

/// Evaluation-row quantities shared by every policy, welfare and k.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    /// Parent-dataset row behind each evaluation position.
    pub eval_rows: Vec<usize>,
    pub truth: PseudoOutcomes,
    pub risk: RiskScores,
    pub k_values: Vec<f64>,
    /// Benefit-oriented treatment-effect scores, one vector per k.
    pub te_scores: Vec<Vec<f64>>,
}

impl EvalContext {
    pub fn benefit(&self) -> &[f64] {
        &self.truth.benefit
    }

    pub fn len(&self) -> usize {
        self.eval_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eval_rows.is_empty()
    }
}

struct Block {
    train: Dataset,
    eval: Dataset,
    eval_rows: Vec<usize>,
}

/// A configured pipeline bound to a master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub seed: u64,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, seed })
    }

    fn blocks(&self, ds: &Dataset, arrangement: Arrangement) -> Result<Vec<Block>> {
        let split = split_dataset(ds, self.cfg.train_fraction, self.seed)?;
        Ok(match arrangement {
            Arrangement::Holdout => vec![Block {
                train: split.train,
                eval: split.eval,
                eval_rows: split.eval_rows,
            }],
            Arrangement::TwoWay => vec![
                Block {
                    train: split.train.clone(),
                    eval: split.eval.clone(),
                    eval_rows: split.eval_rows.clone(),
                },
                Block {
                    train: split.eval,
                    eval: split.train,
                    eval_rows: split.train_rows,
                },
            ],
        })
    }

    fn nuisance_seed(&self, block: usize) -> u64 {
        seed::child(self.seed, block as u64)
    }

    /// Ground-truth pseudo-outcomes for evaluation rows, without risk or TE scores.
    pub fn ground_truth(&self, ds: &Dataset, arrangement: Arrangement) -> Result<(Vec<usize>, PseudoOutcomes)> {
        let mut rows = Vec::new();
        let mut parts = Vec::new();
        for (j, block) in self.blocks(ds, arrangement)?.into_iter().enumerate() {
            let nuis = fit_crossfit(&block.train, &self.cfg.crossfit, self.nuisance_seed(j))?;
            parts.push(pseudo_outcomes(&block.eval, &nuis, PseudoMode::EnsembleMean)?);
            rows.extend(block.eval_rows);
        }
        Ok((rows, concat_po(&parts, effect_sign(ds.outcome_direction()))?))
    }

    /// Ground truth, risk scores and per-k treatment-effect scores.
    pub fn evaluate(&self, ds: &Dataset, arrangement: Arrangement, k_values: &[f64]) -> Result<EvalContext> {
        let sign = effect_sign(ds.outcome_direction());
        let mut eval_rows = Vec::new();
        let mut truths = Vec::new();
        let mut risk_b = Vec::new();
        let mut te: Vec<Vec<f64>> = vec![Vec::new(); k_values.len()];

        for (j, block) in self.blocks(ds, arrangement)?.into_iter().enumerate() {
            let nseed = self.nuisance_seed(j);
            let nuis = fit_crossfit(&block.train, &self.cfg.crossfit, nseed)?;
            let truth = pseudo_outcomes(&block.eval, &nuis, PseudoMode::EnsembleMean)?;
            let train_po = pseudo_outcomes(&block.train, &nuis, PseudoMode::WithinFold)?;

            let risk_spec = self
                .cfg
                .risk
                .clone()
                .with_seed(self.cfg.risk.seed ^ seed::child(seed::derive(self.seed, Stream::RiskModel), j as u64));
            let risk_model = fit_risk_model(&block.train, &risk_spec)?;
            risk_b.extend(score_risk(&block.eval, &risk_model)?.b);

            let scores = k_values
                .par_iter()
                .map(|&k| self.te_scores_at(&block, &train_po, k, nseed, j))
                .collect::<Result<Vec<_>>>()?;
            for (acc, s) in te.iter_mut().zip(scores) {
                acc.extend(s);
            }
            truths.push(truth);
            eval_rows.extend(block.eval_rows);
        }
        Ok(EvalContext {
            eval_rows,
            truth: concat_po(&truths, sign)?,
            risk: RiskScores::from_risk(risk_b, sign),
            k_values: k_values.to_vec(),
            te_scores: te,
        })
    }

    fn te_scores_at(&self, block: &Block, train_po: &PseudoOutcomes, k: f64, nseed: u64, j: usize) -> Result<Vec<f64>> {
        let keep = confounded_rows(block.train.w(), &train_po.benefit, ConfoundingSpec::new(k, self.seed))?;
        let biased = block.train.select(&keep);
        let nuis = fit_crossfit(&biased, &self.cfg.crossfit, nseed)?;
        match self.cfg.te_mode {
            TeMode::OraclePseudo => Ok(pseudo_outcomes(&block.eval, &nuis, PseudoMode::EnsembleMean)?.benefit),
            TeMode::Predicted => {
                let po = pseudo_outcomes(&biased, &nuis, PseudoMode::WithinFold)?;
                let spec =
                    self.cfg.cate.clone().with_seed(
                        self.cfg.cate.seed ^ seed::child(seed::derive(self.seed, Stream::CateModel), j as u64),
                    );
                let cate = fit_cate(biased.x(), &po, &spec, format!("block {j}, k = {k}"))?;
                let sign = effect_sign(block.eval.outcome_direction());
                Ok(cate.predict(block.eval.x())?.into_iter().map(|t| sign * t).collect())
            }
        }
    }

    /// Outcomes floored at 1 and logged; features, treatment and name unchanged.
    pub fn log_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        ds.with_outcomes(self.cfg.nash_floor.log_outcomes(ds.y())?)
    }

    /// Ground-truth benefit on log outcomes, aligned with [`Pipeline::evaluate`].
    pub fn nash_benefit(&self, ds: &Dataset, arrangement: Arrangement) -> Result<Vec<f64>> {
        Ok(self.ground_truth(&self.log_dataset(ds)?, arrangement)?.1.benefit)
    }

    /// Nash welfare value of `assign` (over evaluation rows): the unweighted policy value
    /// after rerunning the ground-truth pipeline on log outcomes.
    pub fn nash_policy_value(&self, ds: &Dataset, arrangement: Arrangement, assign: &Assignment) -> Result<f64> {
        let benefit = self.nash_benefit(ds, arrangement)?;
        policy_value(&assign.a, &benefit, &vec![1.0; benefit.len()])
    }
}

fn concat_po(parts: &[PseudoOutcomes], sign: f64) -> Result<PseudoOutcomes> {
    let cat = |f: fn(&PseudoOutcomes) -> &Vec<f64>| parts.iter().flat_map(|p| f(p).iter().copied()).collect::<Vec<_>>();
    PseudoOutcomes::from_parts(cat(|p| &p.chi0), cat(|p| &p.chi1), sign)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_k_values")]
    pub k_values: Vec<f64>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_welfare")]
    pub welfare: Vec<Welfare>,
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default = "default_reps")]
    pub bootstrap_reps: usize,
    #[serde(default)]
    pub alpha_grid: AlphaGrid,
}

fn default_k_values() -> Vec<f64> {
    (0..=8).map(|i| i as f64 / 20.0).collect()
}
fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Risk, PolicyKind::TreatmentEffect, PolicyKind::Random]
}
fn default_welfare() -> Vec<Welfare> {
    vec![
        Welfare::Utilitarian,
        Welfare::WeightedUtilitarian { alpha: 2.0 * 2f64.ln() },
        Welfare::Nash,
    ]
}
fn default_budget() -> f64 {
    0.2
}
fn default_reps() -> usize {
    1000
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_values: default_k_values(),
            policies: default_policies(),
            welfare: default_welfare(),
            budget: default_budget(),
            bootstrap_reps: default_reps(),
            alpha_grid: AlphaGrid::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0 && self.budget < 1.0) {
            return Err(Error::invalid(format!("budget {} outside (0,1)", self.budget)));
        }
        if let Some(k) = self.k_values.iter().find(|k| !(0.0..1.0).contains(*k)) {
            return Err(Error::InfeasibleK {
                k: *k,
                reason: "k must lie in [0, 1)".into(),
            });
        }
        for w in &self.welfare {
            if let Welfare::WeightedUtilitarian { alpha } = w {
                if !(*alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!("alpha {alpha} must be >= 0")));
                }
            }
        }
        self.alpha_grid.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub welfare: String,
    pub policy: PolicyKind,
    pub k: f64,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Bootstrap standard error.
    pub se: f64,
    /// Replicates whose resample kept at least one treated unit.
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub budget: f64,
    pub te_mode: TeMode,
    pub seed: u64,
    pub bootstrap_reps: usize,
    pub k_values: Vec<f64>,
    pub cells: Vec<Cell>,
}

impl ExperimentResult {
    pub fn cell(&self, welfare: &str, policy: PolicyKind, k: f64) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.welfare == welfare && c.policy == policy && c.k == k)
    }

    /// Point estimates of one (welfare, policy) series in k order.
    pub fn series(&self, welfare: &str, policy: PolicyKind) -> Vec<&Cell> {
        self.cells
            .iter()
            .filter(|c| c.welfare == welfare && c.policy == policy)
            .collect()
    }

    pub fn welfare_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.welfare) {
                out.push(c.welfare.clone());
            }
        }
        out
    }

    /// Nested welfare -> policy -> [cells by k].
    pub fn to_json(&self) -> serde_json::Value {
        let mut nested: BTreeMap<String, BTreeMap<String, Vec<serde_json::Value>>> = BTreeMap::new();
        for c in &self.cells {
            nested
                .entry(c.welfare.clone())
                .or_default()
                .entry(c.policy.label().to_string())
                .or_default()
                .push(serde_json::json!({
                    "k": c.k,
                    "value": c.value,
                    "ci_lo": c.ci_lo,
                    "ci_hi": c.ci_hi,
                    "se": c.se,
                    "reps": c.reps,
                }));
        }
        serde_json::json!({
            "dataset": self.dataset,
            "budget": self.budget,
            "te_mode": self.te_mode,
            "seed": self.seed,
            "bootstrap_reps": self.bootstrap_reps,
            "results": nested,
        })
    }

    /// Flat CSV: `welfare, policy, k, value, ci_lo, ci_hi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["welfare", "policy", "k", "value", "ci_lo", "ci_hi"])?;
        for c in &self.cells {
            wtr.write_record(&[
                c.welfare.clone(),
                c.policy.label().to_string(),
                c.k.to_string(),
                c.value.to_string(),
                c.ci_lo.to_string(),
                c.ci_hi.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Assignments every cell is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Policies {
    pub risk: Assignment,
    pub random: Assignment,
    pub te: Vec<Assignment>,
}

impl Policies {
    pub fn build(ctx: &EvalContext, budget: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            risk: assign_top(&ctx.risk.b, budget, seed)?,
            random: random_assignment(ctx.len(), budget, seed)?,
            te: ctx
                .te_scores
                .iter()
                .map(|s| assign_top(s, budget, seed))
                .collect::<Result<_>>()?,
        })
    }

    pub fn get(&self, kind: PolicyKind, k_index: usize) -> &Assignment {
        match kind {
            PolicyKind::Risk => &self.risk,
            PolicyKind::Random => &self.random,
            PolicyKind::TreatmentEffect => &self.te[k_index],
        }
    }
}

fn resampled_value(idx: &[usize], a: &[bool], benefit: &[f64], w: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in idx {
        if a[i] {
            num += w[i] * benefit[i];
            den += w[i];
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Runs every (welfare, policy, k) cell with percentile-bootstrap 95% intervals.
///
/// Resampling is over evaluation rows with assignments held fixed. Replicate `r` at
/// k-index `i` draws from sub-stream `(i, r)` of the bootstrap stream.
pub fn sweep(ds: &Dataset, pipeline: &Pipeline, cfg: &SweepConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let arrangement = pipeline.cfg.te_mode.arrangement();
    let ctx = pipeline.evaluate(ds, arrangement, &cfg.k_values)?;
    let nash = if cfg.welfare.contains(&Welfare::Nash) {
        Some(pipeline.nash_benefit(ds, arrangement)?)
    } else {
        None
    };
    let policies = Policies::build(&ctx, cfg.budget, pipeline.seed)?;
    let m = ctx.len();

    let scorings: Vec<(String, &[f64], Vec<f64>)> = cfg
        .welfare
        .iter()
        .map(|w| {
            let benefit: &[f64] = match w {
                Welfare::Nash => nash.as_deref().unwrap_or_default(),
                _ => ctx.benefit(),
            };
            (w.label(), benefit, w.weights(&ctx.risk.b_prime))
        })
        .collect();

    let boot = seed::derive(pipeline.seed, Stream::Bootstrap);
    let mut cells = Vec::new();
    // cells[k][welfare][policy]
    let per_k: Vec<Vec<Vec<Cell>>> = cfg
        .k_values
        .par_iter()
        .enumerate()
        .map(|(ki, &k)| -> Result<Vec<Vec<Cell>>> {
            let kseed = seed::child(boot, ki as u64);
            let draws: Vec<Vec<Option<f64>>> = (0..cfg.bootstrap_reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seed::rng(seed::child(kseed, r as u64));
                    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
                    scorings
                        .iter()
                        .flat_map(|(_, benefit, w)| {
                            cfg.policies
                                .iter()
                                .map(|&p| resampled_value(&idx, &policies.get(p, ki).a, benefit, w))
                                .collect::<Vec<_>>()
                        })
                        .collect()
                })
                .collect();
            let np = cfg.policies.len();
            scorings
                .iter()
                .enumerate()
                .map(|(wi, (label, benefit, w))| {
                    cfg.policies
                        .iter()
                        .enumerate()
                        .map(|(pi, &p)| {
                            let value = policy_value(&policies.get(p, ki).a, benefit, w)?;
                            let mut reps: Vec<f64> = draws.iter().filter_map(|d| d[wi * np + pi]).collect();
                            reps.sort_by(f64::total_cmp);
                            let (lo, hi) = if reps.is_empty() {
                                (value, value)
                            } else {
                                (quantile_sorted(&reps, 0.025), quantile_sorted(&reps, 0.975))
                            };
                            Ok(Cell {
                                welfare: label.clone(),
                                policy: p,
                                k,
                                value,
                                ci_lo: lo.min(value),
                                ci_hi: hi.max(value),
                                se: sd(&reps),
                                reps: reps.len(),
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    for wi in 0..cfg.welfare.len() {
        for pi in 0..cfg.policies.len() {
            for k_cells in &per_k {
                cells.push(k_cells[wi][pi].clone());
            }
        }
    }
    Ok(ExperimentResult {
        dataset: ds.name().to_string(),
        budget: cfg.budget,
        te_mode: pipeline.cfg.te_mode,
        seed: pipeline.seed,
        bootstrap_reps: cfg.bootstrap_reps,
        k_values: cfg.k_values.clone(),
        cells,
    })
}

/// Alpha threshold per k (`None` = no grid alpha makes risk targeting competitive).
pub fn alpha_table(ds: &Dataset, pipeline: &Pipeline, cfg: &SweepConfig) -> Result<Vec<Option<f64>>> {
    cfg.validate()?;
    let ctx = pipeline.evaluate(ds, pipeline.cfg.te_mode.arrangement(), &cfg.k_values)?;
    let policies = Policies::build(&ctx, cfg.budget, pipeline.seed)?;
    policies
        .te
        .iter()
        .map(|te| threshold_for_assignments(&policies.risk, te, ctx.benefit(), &ctx.risk.b_prime, &cfg.alpha_grid))
        .collect()
}
