//! Collects per-cell summaries into a tidy CSV and a fixed-width text table.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::plan::MethodKind;

pub const TIDY_HEADER: [&str; 7] = ["asset", "target", "model", "marginal", "high_vol", "width", "winkler"];

/// One summary row as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub asset: String,
    pub model: String,
    pub alpha: f64,
    pub target: String,
    pub k: String,
    pub marginal: f64,
    pub high_vol: Option<f64>,
    pub width: f64,
    pub winkler: f64,
}

fn model_rank(m: &str) -> usize {
    MethodKind::ALL
        .iter()
        .position(|k| k.name() == m)
        .unwrap_or(MethodKind::ALL.len())
}

impl SummaryRow {
    fn order(&self, other: &Self) -> Ordering {
        let k = |r: &Self| r.k.parse::<f64>().unwrap_or(f64::NEG_INFINITY);
        self.asset
            .cmp(&other.asset)
            .then(self.alpha.total_cmp(&other.alpha))
            .then(model_rank(&self.model).cmp(&model_rank(&other.model)))
            .then(self.model.cmp(&other.model))
            .then(k(self).total_cmp(&k(other)))
    }
}

pub fn read_summary(path: &Path) -> Result<SummaryRow> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let rec = r
        .records()
        .next()
        .context("empty summary")??;
    let field = |name: &str| -> Result<&str> {
        let i = headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("missing column `{name}`"))?;
        Ok(rec.get(i).unwrap_or_default())
    };
    let num = |name: &str| -> Result<f64> {
        field(name)?
            .parse()
            .with_context(|| format!("column `{name}`"))
    };
    let high_vol = match field("high_vol")? {
        "" => None,
        v => Some(v.parse().context("column `high_vol`")?),
    };
    Ok(SummaryRow {
        asset: field("asset")?.to_string(),
        model: field("model")?.to_string(),
        alpha: num("alpha")?,
        target: field("target")?.to_string(),
        k: field("k")?.to_string(),
        marginal: num("marginal")?,
        high_vol,
        width: num("width")?,
        winkler: num("winkler")?,
    })
}

/// Summaries found under `cells_dir`, plus cell directories without one.
pub fn collect(cells_dir: &Path) -> Result<(Vec<SummaryRow>, Vec<PathBuf>)> {
    let mut rows = Vec::new();
    let mut incomplete = Vec::new();
    if !cells_dir.is_dir() {
        return Ok((rows, incomplete));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(cells_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for d in dirs {
        let s = d.join("summary.csv");
        match s.is_file().then(|| read_summary(&s)) {
            Some(Ok(row)) => rows.push(row),
            _ => incomplete.push(d),
        }
    }
    rows.sort_by(SummaryRow::order);
    Ok((rows, incomplete))
}

pub fn tidy_csv(rows: &[SummaryRow], with_k: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = TIDY_HEADER.to_vec();
    if with_k {
        header.insert(3, "k");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.asset.clone(),
            r.target.clone(),
            r.model.clone(),
            r.marginal.to_string(),
            r.high_vol.map(|v| v.to_string()).unwrap_or_default(),
            r.width.to_string(),
            r.winkler.to_string(),
        ];
        if with_k {
            rec.insert(3, r.k.clone());
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

pub fn text_table(rows: &[SummaryRow], with_k: bool) -> String {
    let mut header = vec!["Asset", "Target", "Model"];
    if with_k {
        header.push("K");
    }
    header.extend(["Marginal", "High-Vol", "Avg Width", "Winkler"]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![
                r.asset.clone(),
                pct(r.target.parse().unwrap_or(f64::NAN)),
                r.model.clone(),
            ];
            if with_k {
                line.push(r.k.clone());
            }
            line.extend([
                pct(r.marginal),
                r.high_vol.map_or_else(|| "n/a".to_string(), pct),
                format!("{:.4}", r.width),
                format!("{:.4}", r.winkler),
            ]);
            line
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            body.iter()
                .map(|l| l[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let mut emit = |cells: &[&str]| {
        let line: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    };
    emit(&header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    emit(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for l in &body {
        emit(&l.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Outcome of [`report`].
#[derive(Debug)]
pub struct ReportOutcome {
    pub rows: usize,
    pub incomplete: Vec<PathBuf>,
}

/// Aggregate `<out>/<cells>` into `<out>/<stem>.csv` and `<out>/<stem>.txt`.
pub fn report(out: &Path, cells: &str, stem: &str, with_k: bool) -> Result<ReportOutcome> {
    let (rows, incomplete) = collect(&out.join(cells))?;
    if rows.is_empty() {
        bail!(
            "no completed cells under {} (0 cells, {} incomplete)",
            out.join(cells).display(),
            incomplete.len()
        );
    }
    fs::write(out.join(format!("{stem}.csv")), tidy_csv(&rows, with_k)?)?;
    fs::write(out.join(format!("{stem}.txt")), text_table(&rows, with_k))?;
    Ok(ReportOutcome {
        rows: rows.len(),
        incomplete,
    })
}
