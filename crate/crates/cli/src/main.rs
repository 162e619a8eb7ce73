use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sabcp_core::data::PriceSimSpec;
use sabcp_cli::app::{self, RunOutcome};
use sabcp_cli::plan::{Settings, SYNTHETIC};
use sabcp_cli::report::report;

#[derive(Parser)]
#[command(name = "sabcp", version, about = "Online conformal prediction benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (dataset, model, alpha) cell of a plan.
    Run(PlanArgs),
    /// Sweep K for SA-BCP over a log-spaced grid.
    SweepK {
        #[command(flatten)]
        plan: PlanArgs,
        /// Comma-separated K values (default 0.01,0.1,1,10,100,1000).
        #[arg(long)]
        k_grid: Option<String>,
    },
    /// Run the synthetic regime-shock experiment, or simulate a price CSV.
    Synth {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        total_steps: Option<String>,
        /// Comma-separated shock start steps.
        #[arg(long)]
        shock_starts: Option<String>,
        #[arg(long)]
        shock_len: Option<String>,
        /// Write simulated daily closes to this CSV instead of running.
        #[arg(long)]
        prices: Option<PathBuf>,
        /// Rows of simulated prices.
        #[arg(long, default_value_t = 2000)]
        days: usize,
    },
    /// Rebuild the summary table from completed cells.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Price CSV paths or `synthetic` (comma-separated or repeated).
    #[arg(long)]
    data: Vec<String>,
    /// Models: sabcp, bcp, aci, agaci, dtaci.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated target miscoverage levels (default 0.1,0.2,0.3).
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// Per-asset K, as ASSET=K (repeatable).
    #[arg(long = "k-asset")]
    k_asset: Vec<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Prior score bound (default: 10 warmup score standard deviations).
    #[arg(long)]
    r_max: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// absolute or scaled.
    #[arg(long)]
    score_mode: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
    #[arg(long)]
    state_dim: Option<String>,
    #[arg(long)]
    history_cap: Option<String>,
    /// Worker threads (0 = all cores, 1 = serial).
    #[arg(long)]
    jobs: Option<String>,
}

impl PlanArgs {
    fn settings(&self, extra: &[(&str, Option<&String>)]) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::parse(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        if !self.data.is_empty() {
            flags.set("data", &self.data.join(","))?;
        }
        let pairs = [
            ("model", &self.model),
            ("alpha", &self.alpha),
            ("k", &self.k),
            ("beta", &self.beta),
            ("r-max", &self.r_max),
            ("seed", &self.seed),
            ("out", &self.out),
            ("score-mode", &self.score_mode),
            ("warmup", &self.warmup),
            ("state-dim", &self.state_dim),
            ("history-cap", &self.history_cap),
            ("jobs", &self.jobs),
        ];
        for (k, v) in pairs.iter().map(|(k, v)| (*k, v.as_ref())).chain(extra.iter().copied()) {
            if let Some(v) = v {
                flags.set(k, v)?;
            }
        }
        for kv in &self.k_asset {
            let (asset, k) = kv
                .split_once('=')
                .with_context(|| format!("--k-asset expects ASSET=K, got `{kv}`"))?;
            flags.set(&format!("k.{asset}"), k)?;
        }
        s.overlay(&flags);
        Ok(s)
    }
}

fn summarize(outcome: &RunOutcome) -> ExitCode {
    for c in &outcome.cells {
        match &c.result {
            Ok(_) => eprintln!("ok     {}", c.id),
            Err(e) => eprintln!("FAILED {}: {e:#}", c.id),
        }
    }
    match &outcome.report {
        Some(r) => eprintln!("{} cells reported", r.rows),
        None => eprintln!("no cells completed"),
    }
    ExitCode::from(outcome.exit_code())
}

fn invalid(e: anyhow::Error) -> ExitCode {
    eprintln!("invalid plan: {e:#}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let plan = match args.settings(&[]).and_then(|s| s.to_plan()) {
                Ok(p) => p,
                Err(e) => return invalid(e),
            };
            match app::run(&plan) {
                Ok(o) => summarize(&o),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::SweepK { plan, k_grid } => {
            let parsed = plan
                .settings(&[("k-grid", k_grid.as_ref())])
                .and_then(|s| Ok((s.to_plan()?, s.k_grid()?)));
            let (plan, grid) = match parsed {
                Ok(p) => p,
                Err(e) => return invalid(e),
            };
            match app::sweep_k(&plan, &grid) {
                Ok(o) => summarize(&o),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Synth {
            plan,
            total_steps,
            shock_starts,
            shock_len,
            prices,
            days,
        } => {
            if let Some(path) = prices {
                let spec = PriceSimSpec {
                    days,
                    seed: plan.seed.as_deref().and_then(|s| s.parse().ok()).unwrap_or(0),
                    ..PriceSimSpec::default()
                };
                return match app::write_simulated_prices(&spec, &path) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => {
                        eprintln!("error: {e:#}");
                        ExitCode::from(1)
                    }
                };
            }
            let synthetic = SYNTHETIC.to_string();
            let settings = plan.settings(&[
                ("data", Some(&synthetic)),
                ("total-steps", total_steps.as_ref()),
                ("shock-starts", shock_starts.as_ref()),
                ("shock-len", shock_len.as_ref()),
            ]);
            let parsed = settings.and_then(|s| Ok((s.to_plan()?, s.synthetic_spec()?)));
            let (plan, spec) = match parsed {
                Ok(p) => p,
                Err(e) => return invalid(e),
            };
            let result = std::fs::create_dir_all(&plan.out)
                .map_err(anyhow::Error::from)
                .and_then(|_| app::write_synthetic_stream(&spec, &plan.out.join("stream.csv")))
                .and_then(|_| app::run(&plan));
            match result {
                Ok(o) => summarize(&o),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Report { out } => match report(&out, app::CELLS, "summary", false) {
            Ok(r) => {
                for d in &r.incomplete {
                    eprintln!("incomplete: {}", d.display());
                }
                eprintln!("{} cells reported", r.rows);
                ExitCode::from(u8::from(!r.incomplete.is_empty()))
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
