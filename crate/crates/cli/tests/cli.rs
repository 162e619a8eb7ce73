use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sabcp_cli::app;
use sabcp_cli::harness::cell_id;
use sabcp_cli::plan::{BenchmarkPlan, DataSource, Dataset, MethodKind};
use sabcp_cli::report::read_summary;
use sabcp_core::data::{simulate_prices, PriceSimSpec, SyntheticSpec};
use sabcp_core::ScoreMode;

fn prices(dir: &Path, name: &str, seed: u64, days: usize) -> PathBuf {
    let path = dir.join(format!("{name}.csv"));
    let t = simulate_prices(&PriceSimSpec {
        seed,
        days,
        ..PriceSimSpec::default()
    })
    .unwrap();
    t.write(fs::File::create(&path).unwrap()).unwrap();
    path
}

fn csv_set(path: &Path) -> Dataset {
    Dataset {
        asset: path.file_stem().unwrap().to_string_lossy().into_owned(),
        source: DataSource::Csv(path.to_path_buf()),
    }
}

fn synthetic() -> Dataset {
    Dataset {
        asset: "synthetic".into(),
        source: DataSource::Synthetic(SyntheticSpec::default()),
    }
}

fn plan(datasets: Vec<Dataset>, methods: Vec<MethodKind>, alphas: Vec<f64>, out: PathBuf) -> BenchmarkPlan {
    BenchmarkPlan {
        datasets,
        methods,
        alphas,
        k: 10.0,
        k_overrides: BTreeMap::new(),
        beta: 0.99,
        r_max: None,
        score_mode: ScoreMode::Scaled,
        seed: 0,
        out,
        warmup: 250,
        state_dim: 5,
        history_cap: None,
        jobs: 0,
    }
}

fn sabcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sabcp")).args(args).output().unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn full_grid_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let sets = (1..=3).map(|s| csv_set(&prices(dir.path(), &format!("p{s}"), s, 600))).collect();
    let methods = vec![MethodKind::Sabcp, MethodKind::Bcp, MethodKind::Aci, MethodKind::Agaci];
    let p = plan(sets, methods, vec![0.1, 0.2, 0.3], dir.path().join("out"));
    let o = app::run(&p).unwrap();
    assert_eq!(o.exit_code(), 0);
    assert_eq!(o.cells.len(), 36);
    assert_eq!(data_rows(&p.out.join("summary.csv")), 36);
    assert_eq!(
        fs::read_to_string(p.out.join("summary.csv")).unwrap().lines().next().unwrap(),
        "asset,target,model,marginal,high_vol,width,winkler"
    );
    assert_eq!(fs::read_to_string(p.out.join("summary.txt")).unwrap().lines().count(), 38);
}

#[test]
fn step_log_covers_the_evaluation_window() {
    let dir = tempfile::tempdir().unwrap();
    let path = prices(dir.path(), "asset", 4, 400);
    let p = plan(vec![csv_set(&path)], vec![MethodKind::Dtaci], vec![0.2], dir.path().join("out"));
    app::run(&p).unwrap();
    let cell = p.out.join("cells").join(cell_id("asset", MethodKind::Dtaci, 0.2, None));
    // 400 prices give 399 returns, 250 of them warmup.
    assert_eq!(data_rows(&cell.join("steps.csv")), 149);
    let row = read_summary(&cell.join("summary.csv")).unwrap();
    assert_eq!(row.target, "0.8");
}

#[test]
fn degenerate_k_matches_bcp_winkler() {
    let dir = tempfile::tempdir().unwrap();
    let path = prices(dir.path(), "asset", 9, 800);
    let mut p = plan(vec![csv_set(&path), synthetic()], vec![MethodKind::Sabcp, MethodKind::Bcp], vec![0.1, 0.3], dir.path().join("out"));
    p.k = 1e12;
    let o = app::run(&p).unwrap();
    assert_eq!(o.exit_code(), 0);
    let mut by_cell = BTreeMap::new();
    for c in o.cells {
        let r = c.result.unwrap();
        by_cell.insert((r.asset.clone(), r.spec.alpha.to_bits(), r.spec.method), r.report.avg_winkler);
    }
    for ((asset, a, m), w) in &by_cell {
        if *m == MethodKind::Sabcp {
            let b = by_cell[&(asset.clone(), *a, MethodKind::Bcp)];
            assert!((w - b).abs() <= 1e-6, "{asset}: {w} vs {b}");
        }
    }
}

#[test]
fn single_point_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = prices(dir.path(), "asset", 5, 600);
    let p = plan(vec![csv_set(&path)], vec![MethodKind::Sabcp], vec![0.1], dir.path().join("out"));
    app::run(&p).unwrap();
    let o = app::sweep_k(&p, &[10.0]).unwrap();
    assert_eq!(o.exit_code(), 0);
    let run_cell = p.out.join("cells").join(cell_id("asset", MethodKind::Sabcp, 0.1, None));
    let sweep_cell = p.out.join("sweep").join(cell_id("asset", MethodKind::Sabcp, 0.1, Some(10.0)));
    assert_eq!(fs::read(run_cell.join("steps.csv")).unwrap(), fs::read(sweep_cell.join("steps.csv")).unwrap());
    let (a, b) = (read_summary(&run_cell.join("summary.csv")).unwrap(), read_summary(&sweep_cell.join("summary.csv")).unwrap());
    assert_eq!((a.marginal, a.width, a.winkler), (b.marginal, b.width, b.winkler));
    assert!(fs::read_to_string(p.out.join("sweep.csv")).unwrap().starts_with("asset,target,model,k,"));
}

#[test]
fn default_sweep_reports_every_k() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(vec![synthetic()], vec![MethodKind::Sabcp], vec![0.1], dir.path().join("out"));
    let o = app::sweep_k(&p, &sabcp_cli::plan::DEFAULT_K_GRID).unwrap();
    assert_eq!(o.exit_code(), 0);
    assert_eq!(data_rows(&p.out.join("sweep.csv")), 6);
}

#[test]
fn synthetic_step_log_has_the_gate_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = sabcp(&["synth", "--model", "sabcp", "--alpha", "0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("stream.csv")), 900);
    let steps = out.join("cells").join(cell_id("synthetic", MethodKind::Sabcp, 0.1, None)).join("steps.csv");
    let mut r = csv::Reader::from_path(steps).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "pi_s").unwrap();
    let pi: Vec<f64> = r.records().map(|x| x.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(pi.len(), 900);
    assert!(pi.iter().all(|p| (0.0..1.0).contains(p)));
    assert!(pi[150] > 0.5 && pi[205] < pi[150]);
}

#[test]
fn binary_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = prices(dir.path(), "asset", 2, 500);
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let o = sabcp(&["run", "--data", path.to_str().unwrap(), "--data", "synthetic", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files = BTreeMap::new();
        for e in walk(&out) {
            files.insert(e.strip_prefix(&out).unwrap().to_path_buf(), fs::read(&e).unwrap());
        }
        files
    };
    let a = read("a");
    assert_eq!(a.len(), 2 * 5 * 3 * 2 + 2);
    assert_eq!(a, read("b"));
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn unreadable_input_fails_only_its_cells() {
    let dir = tempfile::tempdir().unwrap();
    let good = prices(dir.path(), "good", 3, 400);
    let out = dir.path().join("out");
    let data = format!("{},{}", good.display(), dir.path().join("missing.csv").display());
    let o = sabcp(&["run", "--data", &data, "--model", "bcp", "--alpha", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(data_rows(&out.join("summary.csv")), 1);
    let failed = out.join("cells").join(cell_id("missing", MethodKind::Bcp, 0.1, None));
    assert!(failed.join("error.txt").is_file());
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAILED missing_bcp_a0.1"));
}

#[test]
fn short_series_is_a_cell_failure() {
    let dir = tempfile::tempdir().unwrap();
    let short = prices(dir.path(), "short", 3, 100);
    let out = dir.path().join("out");
    let o = sabcp(&["run", "--data", short.to_str().unwrap(), "--model", "sabcp", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_plans_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run", "--data", "synthetic", "--alpha", "1.5", "--out", out],
        vec!["run", "--data", "synthetic", "--model", "lstm", "--out", out],
        vec!["run", "--out", out],
        vec!["sweep-k", "--data", "synthetic", "--k-grid", "1,-1", "--out", out],
    ] {
        let o = sabcp(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("plan.conf");
    fs::write(&cfg, format!("# plan\ndata = synthetic\nmodel = bcp\nalpha = 0.2\nout = {}\n", out.display())).unwrap();
    let o = sabcp(&["run", "--config", cfg.to_str().unwrap(), "--alpha", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("cells").join(cell_id("synthetic", MethodKind::Bcp, 0.3, None)).is_dir());
    assert_eq!(data_rows(&out.join("summary.csv")), 1);
}

#[test]
fn report_on_empty_dir_lists_zero_cells() {
    let dir = tempfile::tempdir().unwrap();
    let o = sabcp(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 cells"));
}

#[test]
fn report_lists_partial_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = sabcp(&["synth", "--model", "aci", "--alpha", "0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    fs::create_dir_all(out.join("cells").join("half_done")).unwrap();
    let o = sabcp(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("half_done"));
    assert_eq!(fs::read_to_string(out.join("summary.txt")).unwrap().lines().count(), 3);
}

#[test]
fn simulated_prices_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("sim.csv");
    let o = sabcp(&["synth", "--prices", path.to_str().unwrap(), "--days", "320", "--seed", "4"]);
    assert!(o.status.success());
    assert_eq!(data_rows(&path), 320);
    let out = dir.path().join("out");
    let o = sabcp(&["run", "--data", path.to_str().unwrap(), "--model", "sabcp", "--alpha", "0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
