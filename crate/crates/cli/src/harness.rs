//! Cell execution: data preparation, method construction, the
//! predict-then-update loop and per-cell output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use sabcp_core::baselines::{AciConfig, DEFAULT_GAMMA, DEFAULT_WINDOW};
use sabcp_core::data::{load_prices, synth_stream};
use sabcp_core::metrics::{aggregate, high_vol_mask, RunReport, StepRecord};
use sabcp_core::{
    garch_init, Aci, BaseModel, ConformalMethod, ExpertEnsemble, Observation, OnlineStream,
    Sabcp, SabcpConfig, ScoreMode, StateSource,
};

use crate::plan::{BenchmarkPlan, DataSource, Dataset, MethodKind, R_MAX_SDS, SYNTHETIC_R_MAX};

/// A dataset ready to be streamed by any method.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub asset: String,
    pub obs: Vec<Observation>,
    /// Steps before this index are burn-in and excluded from metrics.
    pub eval_from: usize,
    pub base: BaseModel,
    pub states: StateSource,
    pub score_mode: ScoreMode,
    pub state_dim: usize,
    /// Prior bound used when the plan does not fix one.
    pub default_r_max: f64,
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn prepare(ds: &Dataset, plan: &BenchmarkPlan) -> Result<Prepared> {
    match &ds.source {
        DataSource::Synthetic(spec) => Ok(Prepared {
            asset: ds.asset.clone(),
            obs: synth_stream(spec)?,
            eval_from: 0,
            base: BaseModel::ZeroMean,
            states: StateSource::Features { dim: 1 },
            score_mode: ScoreMode::Absolute,
            state_dim: 1,
            default_r_max: SYNTHETIC_R_MAX,
        }),
        DataSource::Csv(path) => {
            let (series, _) =
                load_prices(path).with_context(|| format!("loading {}", path.display()))?;
            if series.len() <= plan.warmup {
                bail!(
                    "{}: {} returns do not exceed the {}-step warmup",
                    path.display(),
                    series.len(),
                    plan.warmup
                );
            }
            let warm = &series.returns[..plan.warmup];
            let garch = garch_init(warm, sabcp_core::garch::DEFAULT_ARCH, sabcp_core::garch::DEFAULT_GARCH)?;
            let mut filter = garch;
            let scores: Vec<f64> = warm
                .iter()
                .map(|&r| {
                    let (c, s) = filter.step(r);
                    match plan.score_mode {
                        ScoreMode::Absolute => (r - c).abs(),
                        ScoreMode::Scaled => (r - c).abs() / s,
                    }
                })
                .collect();
            let sd = sample_sd(&scores);
            if !(sd > 0.0 && sd.is_finite()) {
                bail!("{}: warmup scores have no spread", path.display());
            }
            Ok(Prepared {
                asset: ds.asset.clone(),
                obs: series.observations(),
                eval_from: plan.warmup,
                base: BaseModel::Garch(garch),
                states: StateSource::lagged(plan.state_dim),
                score_mode: plan.score_mode,
                state_dim: plan.state_dim,
                default_r_max: R_MAX_SDS * sd,
            })
        }
    }
}

/// Everything that distinguishes one cell from another on a prepared dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub method: MethodKind,
    pub alpha: f64,
    pub k: f64,
    pub beta: f64,
    pub r_max: f64,
    pub history_cap: Option<usize>,
}

impl CellSpec {
    pub fn for_plan(plan: &BenchmarkPlan, p: &Prepared, method: MethodKind, alpha: f64) -> Self {
        Self {
            method,
            alpha,
            k: plan.k_for(&p.asset),
            beta: plan.beta,
            r_max: plan.r_max.unwrap_or(p.default_r_max),
            history_cap: plan.history_cap,
        }
    }
}

pub fn build_method(spec: &CellSpec, p: &Prepared) -> Result<Box<dyn ConformalMethod>> {
    let cfg = SabcpConfig {
        alpha: spec.alpha,
        beta: spec.beta,
        k: spec.k,
        r_max: spec.r_max,
        state_dim: p.state_dim,
        history_cap: spec.history_cap,
        score_mode: p.score_mode,
        ..SabcpConfig::default()
    };
    let aci = AciConfig {
        alpha: spec.alpha,
        window: DEFAULT_WINDOW,
        r_max: spec.r_max,
    };
    Ok(match spec.method {
        MethodKind::Sabcp => Box::new(Sabcp::new(cfg)?),
        MethodKind::Bcp => Box::new(Sabcp::bcp(cfg)?),
        MethodKind::Aci => Box::new(Aci::new(aci, DEFAULT_GAMMA)?),
        MethodKind::Agaci => Box::new(ExpertEnsemble::agaci(aci)?),
        MethodKind::Dtaci => Box::new(ExpertEnsemble::dtaci(aci)?),
    })
}

/// Stream one method over the prepared data and score the evaluation window.
pub fn evaluate(spec: &CellSpec, p: &Prepared) -> Result<(Vec<StepRecord>, RunReport)> {
    let method = build_method(spec, p)?;
    let mut stream = OnlineStream::new(method, p.base.clone(), p.states.clone(), p.score_mode);
    let mut records = Vec::with_capacity(p.obs.len().saturating_sub(p.eval_from));
    for (i, o) in p.obs.iter().enumerate() {
        let f = stream.step(o)?;
        if i >= p.eval_from {
            records.push(StepRecord::new(o.t, o.y, &f, spec.alpha)?);
        }
    }
    let ys: Vec<f64> = records.iter().map(|r| r.y).collect();
    let report = aggregate(&records, &high_vol_mask(&ys))?;
    Ok((records, report))
}

/// One finished cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub id: String,
    pub asset: String,
    pub spec: CellSpec,
    pub records: Vec<StepRecord>,
    pub report: RunReport,
}

pub fn cell_id(asset: &str, method: MethodKind, alpha: f64, k: Option<f64>) -> String {
    match k {
        Some(k) => format!("{asset}_{method}_a{alpha}_k{k}"),
        None => format!("{asset}_{method}_a{alpha}"),
    }
}

pub const STEP_HEADER: [&str; 12] = [
    "t", "y", "center", "lower", "upper", "covered", "width", "winkler", "quantile", "pi_s",
    "d_s", "lambda_t",
];

pub const CELL_HEADER: [&str; 13] = [
    "asset", "model", "alpha", "target", "k", "beta", "r_max", "marginal", "high_vol", "width",
    "winkler", "n_steps", "n_high_vol",
];

pub fn write_steps(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STEP_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.y.to_string(),
            r.center.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            u8::from(r.covered).to_string(),
            r.width.to_string(),
            r.winkler.to_string(),
            r.quantile.to_string(),
            r.pi_s.to_string(),
            r.d_s.to_string(),
            r.lambda_t.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cell_row(c: &CellResult) -> Vec<String> {
    let r = &c.report;
    vec![
        c.asset.clone(),
        c.spec.method.to_string(),
        c.spec.alpha.to_string(),
        (1.0 - c.spec.alpha).to_string(),
        if c.spec.method.uses_k() {
            c.spec.k.to_string()
        } else {
            String::new()
        },
        c.spec.beta.to_string(),
        c.spec.r_max.to_string(),
        r.marginal_coverage.to_string(),
        r.high_vol_coverage.map(|v| v.to_string()).unwrap_or_default(),
        r.avg_width.to_string(),
        r.avg_winkler.to_string(),
        r.n_steps.to_string(),
        r.n_high_vol.to_string(),
    ]
}

/// Writes `<dir>/steps.csv` and `<dir>/summary.csv`.
pub fn write_cell(dir: &Path, c: &CellResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_steps(&dir.join("steps.csv"), &c.records)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(CELL_HEADER)?;
    w.write_record(cell_row(c))?;
    w.flush()?;
    Ok(())
}

/// Outcome of one scheduled cell.
#[derive(Debug)]
pub struct CellStatus {
    pub id: String,
    pub dir: PathBuf,
    pub result: Result<CellResult>,
}

impl CellStatus {
    pub fn ok(&self) -> bool {
        self.result.is_ok()
    }
}

struct Job<'a> {
    id: String,
    prepared: std::result::Result<&'a Prepared, &'a str>,
    asset: String,
    method: MethodKind,
    alpha: f64,
    k: Option<f64>,
}

fn execute(job: &Job<'_>, plan: &BenchmarkPlan, cells_dir: &Path) -> CellStatus {
    let dir = cells_dir.join(&job.id);
    let result = (|| {
        let p = job.prepared.map_err(|e| anyhow!("{e}"))?;
        let mut spec = CellSpec::for_plan(plan, p, job.method, job.alpha);
        if let Some(k) = job.k {
            spec.k = k;
        }
        let (records, report) = evaluate(&spec, p)?;
        let cell = CellResult {
            id: job.id.clone(),
            asset: job.asset.clone(),
            spec,
            records,
            report,
        };
        write_cell(&dir, &cell)?;
        Ok(cell)
    })();
    if let Err(e) = &result {
        // Failed cells leave an error note and no summary.
        let _ = fs::create_dir_all(&dir).and_then(|_| {
            let mut f = fs::File::create(dir.join("error.txt"))?;
            writeln!(f, "{e:#}")
        });
    }
    CellStatus {
        id: job.id.clone(),
        dir,
        result,
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))
}

/// Run every (dataset, method, alpha[, k]) cell of the plan under `cells_dir`.
///
/// Statuses come back in plan order regardless of scheduling.
pub fn run_cells(plan: &BenchmarkPlan, cells_dir: &Path, k_grid: Option<&[f64]>) -> Result<Vec<CellStatus>> {
    fs::create_dir_all(cells_dir)?;
    let prepared: Vec<(String, std::result::Result<Prepared, String>)> = plan
        .datasets
        .iter()
        .map(|d| (d.asset.clone(), prepare(d, plan).map_err(|e| format!("{e:#}"))))
        .collect();
    let mut jobs = Vec::new();
    for (asset, p) in &prepared {
        for &method in &plan.methods {
            for &alpha in &plan.alphas {
                let ks: Vec<Option<f64>> = match k_grid {
                    Some(g) => g.iter().map(|&k| Some(k)).collect(),
                    None => vec![None],
                };
                for k in ks {
                    jobs.push(Job {
                        id: cell_id(asset, method, alpha, k),
                        prepared: p.as_ref().map_err(String::as_str),
                        asset: asset.clone(),
                        method,
                        alpha,
                        k,
                    });
                }
            }
        }
    }
    if plan.jobs == 1 {
        return Ok(jobs.iter().map(|j| execute(j, plan, cells_dir)).collect());
    }
    let pool = pool(plan.jobs)?;
    Ok(pool.install(|| jobs.par_iter().map(|j| execute(j, plan, cells_dir)).collect()))
}
