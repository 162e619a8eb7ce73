//! Subcommand drivers shared by the binary and the tests.

use std::fs;
use std::path::Path;

use anyhow::Result;
use sabcp_core::data::{simulate_prices, synth_stream, PriceSimSpec, SyntheticSpec};

use crate::harness::{run_cells, CellStatus};
use crate::plan::{BenchmarkPlan, MethodKind};
use crate::report::{report, ReportOutcome};

pub const CELLS: &str = "cells";
pub const SWEEP_CELLS: &str = "sweep";

/// Per-cell statuses and the combined report of one invocation.
#[derive(Debug)]
pub struct RunOutcome {
    pub cells: Vec<CellStatus>,
    pub report: Option<ReportOutcome>,
}

impl RunOutcome {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok()).count()
    }

    /// 0 when every cell completed, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        u8::from(self.failed() > 0 || self.report.is_none())
    }
}

fn finish(plan: &BenchmarkPlan, cells: Vec<CellStatus>, dir: &str, stem: &str, with_k: bool) -> RunOutcome {
    let report = report(&plan.out, dir, stem, with_k).ok();
    RunOutcome { cells, report }
}

/// Every (dataset, method, alpha) cell, then `summary.csv` / `summary.txt`.
pub fn run(plan: &BenchmarkPlan) -> Result<RunOutcome> {
    let cells = run_cells(plan, &plan.out.join(CELLS), None)?;
    Ok(finish(plan, cells, CELLS, "summary", false))
}

/// SA-BCP over a grid of `K`, then `sweep.csv` / `sweep.txt`.
pub fn sweep_k(plan: &BenchmarkPlan, grid: &[f64]) -> Result<RunOutcome> {
    let plan = BenchmarkPlan {
        methods: vec![MethodKind::Sabcp],
        ..plan.clone()
    };
    let cells = run_cells(&plan, &plan.out.join(SWEEP_CELLS), Some(grid))?;
    Ok(finish(&plan, cells, SWEEP_CELLS, "sweep", true))
}

/// The synthetic stream itself, for plotting next to the step logs.
pub fn write_synthetic_stream(spec: &SyntheticSpec, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "y", "shock"])?;
    for o in synth_stream(spec)? {
        let x = o.features.as_ref().and_then(|f| f.first()).copied().unwrap_or(f64::NAN);
        w.write_record([
            o.t.to_string(),
            x.to_string(),
            o.y.to_string(),
            u8::from(spec.is_shock(o.t as usize)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_simulated_prices(spec: &PriceSimSpec, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    simulate_prices(spec)?.write(fs::File::create(path)?)?;
    Ok(())
}
