//! Command entry points. Each computes all results before touching the output directory,
//! so a failed run leaves no partial artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use crate::curve::{curve_significance_summary, kernel_curve, CurveEstimate};
use crate::data::write_csv_to;
use crate::report::config::{DatasetSource, RunConfig, EFFECTIVE_CONFIG};
use crate::report::svg::{LinePlot, Series};
use crate::synthetic::generate;
use crate::welfare::{alpha_table, sweep, Arrangement, ExperimentResult, Pipeline};
use crate::{Error, Result};

/// Runs `f` on a dedicated pool of `threads` workers; `None` uses the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::Config("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Files produced by a command, in memory until flushed.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn add_with(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn flush(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.files
            .into_iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

fn begin(cfg: &RunConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let mut out = Artifacts::default();
    out.add(EFFECTIVE_CONFIG, cfg.to_toml_string()?.into_bytes());
    Ok(out)
}

/// Writes `synthetic.csv` and `ground_truth.csv` (row, mu0, mu1, tau).
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let DatasetSource::Synthetic(spec) = &cfg.dataset else {
        return Err(Error::Config("synth needs a [dataset.synthetic] source".into()));
    };
    let mut out = begin(cfg)?;
    let (ds, truth) = generate(spec)?;
    out.add_with("synthetic.csv", |buf| write_csv_to(&ds, buf).map(drop))?;
    out.add_with("ground_truth.csv", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(["row", "mu0", "mu1", "tau"])?;
        for i in 0..ds.n() {
            wtr.write_record(&[
                i.to_string(),
                truth.mu0[i].to_string(),
                truth.mu1[i].to_string(),
                truth.tau[i].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("ground_truth.csv", e))
    })?;
    out.flush(&cfg.out_dir)
}

/// Curve of smoothed benefit against baseline risk over every row.
pub fn compute_curve(cfg: &RunConfig) -> Result<(CurveEstimate, Pipeline, crate::welfare::EvalContext)> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    if ds.n() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: ds.n() });
    }
    let pipeline = Pipeline::new(cfg.pipeline.clone(), cfg.seed)?;
    let ctx = pipeline.evaluate(&ds, Arrangement::TwoWay, &[])?;
    let curve = kernel_curve(&ctx.risk.b, ctx.benefit(), cfg.curve.window)?;
    Ok((curve, pipeline, ctx))
}

/// Writes `curve.csv`, `curve.svg`, `curve_summary.json`, `pseudo_outcomes.csv` and
/// `risk_scores.csv`. Per-row files are in original row order.
pub fn cmd_curve(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = begin(cfg)?;
    let (curve, _, ctx) = compute_curve(cfg)?;
    let summary = curve_significance_summary(&curve);

    let mut position = vec![0; ctx.eval_rows.len()];
    for (i, &r) in ctx.eval_rows.iter().enumerate() {
        position[r] = i;
    }
    let po = ctx.truth.select(&position);
    let risk = ctx.risk.select(&position);

    out.add_with("curve.csv", |buf| curve.write_csv(buf))?;
    let plot = LinePlot {
        title: "Smoothed treatment effect by baseline risk".into(),
        x_label: "baseline risk b".into(),
        y_label: "treatment effect".into(),
        series: vec![Series {
            name: "tau_hat".into(),
            x: curve.b.clone(),
            y: curve.tau_hat.clone(),
            band: Some((curve.ci_lo.clone(), curve.ci_hi.clone())),
        }],
        zero_line: true,
    };
    out.add("curve.svg", plot.render().into_bytes());
    out.add(
        "curve_summary.json",
        serde_json::to_vec_pretty(&summary).map_err(|e| Error::Invariant(e.to_string()))?,
    );
    out.add_with("pseudo_outcomes.csv", |buf| po.write_csv(buf))?;
    out.add_with("risk_scores.csv", |buf| risk.write_csv(buf))?;
    out.flush(&cfg.out_dir)
}

pub fn compute_sweep(cfg: &RunConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let pipeline = Pipeline::new(cfg.pipeline.clone(), cfg.seed)?;
    sweep(&ds, &pipeline, &cfg.sweep)
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn sweep_plot(res: &ExperimentResult, welfare: &str) -> LinePlot {
    let mut policies: Vec<_> = Vec::new();
    for c in res.cells.iter().filter(|c| c.welfare == welfare) {
        if !policies.contains(&c.policy) {
            policies.push(c.policy);
        }
    }
    let series = policies
        .into_iter()
        .map(|p| {
            let cells = res.series(welfare, p);
            Series {
                name: p.label().into(),
                x: cells.iter().map(|c| 100.0 * c.k).collect(),
                y: cells.iter().map(|c| c.value).collect(),
                band: Some((
                    cells.iter().map(|c| c.ci_lo).collect(),
                    cells.iter().map(|c| c.ci_hi).collect(),
                )),
            }
        })
        .collect();
    LinePlot {
        title: format!("{} welfare, {}", welfare, res.dataset),
        x_label: "data removed, k (%)".into(),
        y_label: "policy value".into(),
        series,
        zero_line: true,
    }
}

/// Writes `sweep.json`, `sweep.csv` and one `sweep_<welfare>.svg` per welfare spec.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = begin(cfg)?;
    let res = compute_sweep(cfg)?;
    out.add(
        "sweep.json",
        serde_json::to_vec_pretty(&res.to_json()).map_err(|e| Error::Invariant(e.to_string()))?,
    );
    out.add_with("sweep.csv", |buf| res.write_csv(buf))?;
    for label in res.welfare_labels() {
        out.add(
            format!("sweep_{}.svg", file_safe(&label)),
            sweep_plot(&res, &label).render().into_bytes(),
        );
    }
    out.flush(&cfg.out_dir)
}

pub fn compute_alpha(cfg: &RunConfig) -> Result<(String, Vec<Option<f64>>)> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let pipeline = Pipeline::new(cfg.pipeline.clone(), cfg.seed)?;
    Ok((ds.name().to_string(), alpha_table(&ds, &pipeline, &cfg.sweep)?))
}

/// `5%`-style column label for a removal fraction.
pub fn percent_label(k: f64) -> String {
    format!("{}%", (k * 100.0 * 1e6).round() / 1e6)
}

/// Writes `alpha.csv`: one row per dataset, one column per k, `na` where no grid alpha qualifies.
pub fn cmd_alpha(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = begin(cfg)?;
    let (name, alphas) = compute_alpha(cfg)?;
    out.add_with("alpha.csv", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        let mut header = vec!["dataset".to_string()];
        header.extend(cfg.sweep.k_values.iter().map(|&k| percent_label(k)));
        wtr.write_record(&header)?;
        let mut row = vec![name];
        row.extend(
            alphas
                .iter()
                .map(|a| a.map_or_else(|| "na".to_string(), |v| v.to_string())),
        );
        wtr.write_record(&row)?;
        wtr.flush().map_err(|e| Error::io("alpha.csv", e))
    })?;
    out.flush(&cfg.out_dir)
}
