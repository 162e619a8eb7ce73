//! Benchmark plans and the flat `key = value` settings they are built from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use sabcp_core::data::SyntheticSpec;
use sabcp_core::ScoreMode;

pub const DEFAULT_ALPHAS: [f64; 3] = [0.1, 0.2, 0.3];
pub const DEFAULT_K: f64 = 10.0;
pub const DEFAULT_BETA: f64 = 0.99;
pub const DEFAULT_WARMUP: usize = 250;
pub const DEFAULT_STATE_DIM: usize = 5;
pub const DEFAULT_K_GRID: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
/// Prior bound for synthetic streams, which have no warmup to size it from.
pub const SYNTHETIC_R_MAX: f64 = 10.0;
/// The data-driven prior bound is this many warmup score standard deviations.
pub const R_MAX_SDS: f64 = 10.0;
pub const SYNTHETIC: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MethodKind {
    Sabcp,
    Bcp,
    Aci,
    Agaci,
    Dtaci,
}

impl MethodKind {
    pub const ALL: [Self; 5] = [Self::Sabcp, Self::Bcp, Self::Aci, Self::Agaci, Self::Dtaci];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sabcp => "sabcp",
            Self::Bcp => "bcp",
            Self::Aci => "aci",
            Self::Agaci => "agaci",
            Self::Dtaci => "dtaci",
        }
    }

    /// Whether the method reads `K`.
    pub fn uses_k(self) -> bool {
        self == Self::Sabcp
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| anyhow!("unknown model `{s}` (expected one of sabcp, bcp, aci, agaci, dtaci)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub asset: String,
    pub source: DataSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub datasets: Vec<Dataset>,
    pub methods: Vec<MethodKind>,
    pub alphas: Vec<f64>,
    pub k: f64,
    pub k_overrides: BTreeMap<String, f64>,
    pub beta: f64,
    /// `None` selects the data-driven default.
    pub r_max: Option<f64>,
    pub score_mode: ScoreMode,
    pub seed: u64,
    pub out: PathBuf,
    pub warmup: usize,
    pub state_dim: usize,
    pub history_cap: Option<usize>,
    /// Worker threads; 0 uses every core, 1 runs serially.
    pub jobs: usize,
}

impl BenchmarkPlan {
    pub fn k_for(&self, asset: &str) -> f64 {
        self.k_overrides.get(asset).copied().unwrap_or(self.k)
    }
}

/// Flat settings: file entries overlaid by command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, String>,
}

const KEYS: [&str; 18] = [
    "data",
    "model",
    "alpha",
    "k",
    "beta",
    "r-max",
    "seed",
    "out",
    "score-mode",
    "warmup",
    "state-dim",
    "history-cap",
    "jobs",
    "k-grid",
    "total-steps",
    "shock-starts",
    "shock-len",
    "days",
];

fn normalize_key(key: &str) -> String {
    let key = key.trim();
    match key.split_once('.') {
        Some((head, asset)) => format!("{}.{}", head.replace('_', "-").to_lowercase(), asset),
        None => key.replace('_', "-").to_lowercase(),
    }
}

fn known(key: &str) -> bool {
    KEYS.contains(&key) || key.strip_prefix("k.").is_some_and(|a| !a.is_empty())
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`", n + 1))?;
            s.set(k, v.trim()).with_context(|| format!("config line {}", n + 1))?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        if !known(&key) {
            bail!("unknown setting `{key}`");
        }
        self.entries.insert(key, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Entries of `other` replace ours.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("`{key}`: cannot parse `{v}`: {e}")))
            .transpose()
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| x.parse::<T>().map_err(|e| anyhow!("`{key}`: cannot parse `{x}`: {e}")))
                    .collect()
            })
            .transpose()
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let mut spec = SyntheticSpec::with_seed(self.parsed("seed")?.unwrap_or(0));
        if let Some(n) = self.parsed("total-steps")? {
            spec.total_steps = n;
        }
        if let Some(s) = self.list("shock-starts")? {
            spec.shock_starts = s;
        }
        if let Some(n) = self.parsed("shock-len")? {
            spec.shock_len = n;
        }
        spec.validate().map_err(|e| anyhow!("synthetic spec: {e}"))?;
        Ok(spec)
    }

    pub fn k_grid(&self) -> Result<Vec<f64>> {
        let grid = self.list("k-grid")?.unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
        if grid.is_empty() || grid.iter().any(|&k: &f64| !(k > 0.0 && k.is_finite())) {
            bail!("`k-grid` must be a non-empty list of positive values");
        }
        Ok(grid)
    }

    pub fn to_plan(&self) -> Result<BenchmarkPlan> {
        let data: Vec<String> = self
            .list("data")?
            .ok_or_else(|| anyhow!("no datasets: pass --data or set `data` in the config"))?;
        if data.is_empty() {
            bail!("no datasets given");
        }
        let mut datasets = Vec::new();
        for d in data {
            let ds = if d == SYNTHETIC {
                Dataset {
                    asset: SYNTHETIC.to_string(),
                    source: DataSource::Synthetic(self.synthetic_spec()?),
                }
            } else {
                let path = PathBuf::from(&d);
                let asset = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| anyhow!("cannot derive an asset id from `{d}`"))?;
                Dataset {
                    asset,
                    source: DataSource::Csv(path),
                }
            };
            if datasets.iter().any(|x: &Dataset| x.asset == ds.asset) {
                bail!("asset `{}` listed twice", ds.asset);
            }
            datasets.push(ds);
        }

        let mut methods: Vec<MethodKind> = self.list("model")?.unwrap_or_else(|| MethodKind::ALL.to_vec());
        methods.sort();
        methods.dedup();
        if methods.is_empty() {
            bail!("no models given");
        }

        let alphas: Vec<f64> = self.list("alpha")?.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
        if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            bail!("`alpha` values must lie in (0, 1)");
        }

        let positive = |key: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                bail!("`{key}` must be > 0, got {v}")
            }
        };
        let k = positive("k", self.parsed("k")?.unwrap_or(DEFAULT_K))?;
        let mut k_overrides = BTreeMap::new();
        for (key, v) in &self.entries {
            if let Some(asset) = key.strip_prefix("k.") {
                let v: f64 = v.parse().map_err(|e| anyhow!("`{key}`: {e}"))?;
                k_overrides.insert(asset.to_string(), positive(key, v)?);
            }
        }
        let beta: f64 = self.parsed("beta")?.unwrap_or(DEFAULT_BETA);
        if !(beta > 0.0 && beta < 1.0) {
            bail!("`beta` must lie in (0, 1), got {beta}");
        }
        let r_max = self
            .parsed::<f64>("r-max")?
            .map(|r| positive("r-max", r))
            .transpose()?;
        let score_mode = self
            .parsed::<ScoreMode>("score-mode")?
            .unwrap_or_default();
        let warmup = self.parsed("warmup")?.unwrap_or(DEFAULT_WARMUP);
        let state_dim = self.parsed("state-dim")?.unwrap_or(DEFAULT_STATE_DIM);
        if state_dim == 0 {
            bail!("`state-dim` must be positive");
        }
        let history_cap = self.parsed::<usize>("history-cap")?;
        if history_cap == Some(0) {
            bail!("`history-cap` must be positive");
        }

        Ok(BenchmarkPlan {
            datasets,
            methods,
            alphas,
            k,
            k_overrides,
            beta,
            r_max,
            score_mode,
            seed: self.parsed("seed")?.unwrap_or(0),
            out: self.get("out").map_or_else(|| PathBuf::from("out"), PathBuf::from),
            warmup,
            state_dim,
            history_cap,
            jobs: self.parsed("jobs")?.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut s = Settings::parse(
            "# plan\ndata = AMD.csv, GLD.csv\nalpha = 0.1\nk = 3\nk.GLD = 1000 # gold\nscore_mode = absolute\n",
        )
        .unwrap();
        let mut flags = Settings::default();
        flags.set("k", "5").unwrap();
        s.overlay(&flags);
        let p = s.to_plan().unwrap();
        assert_eq!(p.datasets.len(), 2);
        assert_eq!(p.alphas, vec![0.1]);
        assert_eq!(p.k_for("AMD"), 5.0);
        assert_eq!(p.k_for("GLD"), 1000.0);
        assert_eq!(p.score_mode, ScoreMode::Absolute);
        assert_eq!(p.methods, MethodKind::ALL.to_vec());
        assert_eq!(p.beta, 0.99);
        assert_eq!(p.r_max, None);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "data = a.csv\nalpha = 1.0",
            "data = a.csv\nbeta = 1",
            "data = a.csv\nk = 0",
            "data = a.csv\nmodel = foo",
            "data = a.csv, a.csv",
            "alpha = 0.1",
        ] {
            assert!(Settings::parse(bad).unwrap().to_plan().is_err(), "{bad}");
        }
        assert!(Settings::parse("colour = red").is_err());
        assert!(Settings::parse("just words").is_err());
    }

    #[test]
    fn synthetic_dataset() {
        let s = Settings::parse("data = synthetic\nseed = 4\nshock-starts = 100, 300\ntotal-steps = 500").unwrap();
        let p = s.to_plan().unwrap();
        match &p.datasets[0].source {
            DataSource::Synthetic(spec) => {
                assert_eq!(spec.seed, 4);
                assert_eq!(spec.shock_starts, vec![100, 300]);
                assert_eq!(spec.total_steps, 500);
            }
            other => panic!("{other:?}"),
        }
        let overlap = Settings::parse("data = synthetic\nshock-starts = 100, 110").unwrap();
        assert!(overlap.to_plan().is_err());
    }

    #[test]
    fn k_grid_default_and_custom() {
        assert_eq!(Settings::default().k_grid().unwrap(), DEFAULT_K_GRID.to_vec());
        let s = Settings::parse("k-grid = 1, 10").unwrap();
        assert_eq!(s.k_grid().unwrap(), vec![1.0, 10.0]);
        assert!(Settings::parse("k-grid = 1, -1").unwrap().k_grid().is_err());
    }
}
