//! Run configuration: TOML (or JSON) in, validated region and ruler tables out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(thiserror::Error, Debug)]
#[error("config error at `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance_profile: Option<Profile>,
    pub backend: BackendSpec,
    #[serde(default)]
    pub regions: BTreeMap<String, RegionSpec>,
    #[serde(default)]
    pub rulers: BTreeMap<String, RulerSpec>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind")]
pub enum BackendSpec {
    #[serde(rename = "gaussian-p+ip")]
    GaussianPip {
        width: usize,
        height: usize,
        #[serde(default = "one")]
        t: f64,
        #[serde(default = "one")]
        delta: f64,
        mu: f64,
    },
    #[serde(rename = "pairstate")]
    PairState { n: usize, alpha: f64, beta: f64 },
    #[serde(rename = "cft")]
    Cft {
        c: f64,
        epsilon: f64,
        /// Endpoint angles; `n_arcs` asks for equal arcs instead.
        angles: Option<Vec<f64>>,
        n_arcs: Option<usize>,
    },
    /// Dense state vector of a small `source` state.
    #[serde(rename = "edoracle")]
    EdOracle { source: OracleSource },
}

/// States small enough for the dense oracle.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind")]
pub enum OracleSource {
    #[serde(rename = "pairstate")]
    PairState { n: usize, alpha: f64, beta: f64 },
    /// Random pure Gaussian state drawn from the run seed.
    #[serde(rename = "gaussian-random")]
    GaussianRandom { modes: usize },
}

fn one() -> f64 {
    1.0
}

/// Union of half-open rectangles `[x0, x1, y0, y1]` and explicit sites.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(default)]
    pub sites: Vec<usize>,
    #[serde(default)]
    pub rects: Vec<[usize; 4]>,
}

/// Region names for each part; omitted primed parts are empty.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RulerSpec {
    pub a: String,
    pub a_prime: Option<String>,
    pub b: String,
    pub c: String,
    pub c_prime: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Ruler { name: String, ruler: String },
    Scan { name: String, ruler: String, grid: String },
    BulkCommutator { name: String, a: String, b: String, c: String },
    A1Residual { name: String, b: String, c: String, d: String },
    Table { name: String, partition: PartitionSpec },
    Exotic { name: String },
}

impl ExperimentSpec {
    pub fn name(&self) -> &str {
        match self {
            ExperimentSpec::Ruler { name, .. }
            | ExperimentSpec::Scan { name, .. }
            | ExperimentSpec::BulkCommutator { name, .. }
            | ExperimentSpec::A1Residual { name, .. }
            | ExperimentSpec::Table { name, .. }
            | ExperimentSpec::Exotic { name } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Ruler { .. } => "ruler",
            ExperimentSpec::Scan { .. } => "scan",
            ExperimentSpec::BulkCommutator { .. } => "bulk-commutator",
            ExperimentSpec::A1Residual { .. } => "a1-residual",
            ExperimentSpec::Table { .. } => "table",
            ExperimentSpec::Exotic { .. } => "exotic",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartitionSpec {
    /// Every site of a circular backend is one interval.
    Circle,
    /// Boundary frame of a lattice, cut at perimeter positions `cuts`.
    Frame { depth: usize, cuts: Vec<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Tolerances reachable on a laptop-sized lattice.
    Desk,
    /// Tolerances of large-lattice production runs.
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Expected `c_tot`; unchecked when absent.
    pub c_expected: Option<f64>,
    pub c_tol: f64,
    /// Largest spread of `c_tot` across a cross-ratio table.
    pub c_spread: f64,
    pub eta_agreement: f64,
    pub sigma_max: f64,
    /// Complement, decomposition and entropy-law residuals.
    pub identity: f64,
    pub embed: f64,
    pub closure: f64,
    pub c_minus_expected: Option<f64>,
    pub c_minus_tol: f64,
    pub a1_max: f64,
    /// Lower bound on `sigma_min / (Delta + I)` certifying a fixed-point violation.
    pub sigma_ratio: f64,
    pub oracle_entropy: f64,
    pub oracle_moment: f64,
}

impl Tolerances {
    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Tolerances {
                c_expected: None,
                c_tol: 0.05,
                c_spread: 0.02,
                eta_agreement: 5e-3,
                sigma_max: 0.05,
                identity: 1e-3,
                embed: 1e-2,
                closure: 1e-2,
                c_minus_expected: None,
                c_minus_tol: 0.05,
                a1_max: 1e-2,
                sigma_ratio: 1e-2,
                oracle_entropy: 1e-8,
                oracle_moment: 1e-6,
            },
            Profile::Paper => Tolerances {
                c_expected: None,
                c_tol: 1e-3,
                c_spread: 1e-4,
                eta_agreement: 1e-4,
                sigma_max: 5e-3,
                identity: 1e-5,
                embed: 1e-5,
                closure: 1e-6,
                c_minus_expected: None,
                c_minus_tol: 1e-3,
                a1_max: 1e-4,
                sigma_ratio: 1e-2,
                oracle_entropy: 1e-10,
                oracle_moment: 1e-8,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub c_expected: Option<f64>,
    pub c_tol: Option<f64>,
    pub c_spread: Option<f64>,
    pub eta_agreement: Option<f64>,
    pub sigma_max: Option<f64>,
    pub identity: Option<f64>,
    pub embed: Option<f64>,
    pub closure: Option<f64>,
    pub c_minus_expected: Option<f64>,
    pub c_minus_tol: Option<f64>,
    pub a1_max: Option<f64>,
    pub sigma_ratio: Option<f64>,
    pub oracle_entropy: Option<f64>,
    pub oracle_moment: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, mut t: Tolerances) -> Tolerances {
        let o = self;
        t.c_expected = o.c_expected.or(t.c_expected);
        t.c_minus_expected = o.c_minus_expected.or(t.c_minus_expected);
        for (dst, src) in [
            (&mut t.c_tol, o.c_tol),
            (&mut t.c_spread, o.c_spread),
            (&mut t.eta_agreement, o.eta_agreement),
            (&mut t.sigma_max, o.sigma_max),
            (&mut t.identity, o.identity),
            (&mut t.embed, o.embed),
            (&mut t.closure, o.closure),
            (&mut t.c_minus_tol, o.c_minus_tol),
            (&mut t.a1_max, o.a1_max),
            (&mut t.sigma_ratio, o.sigma_ratio),
            (&mut t.oracle_entropy, o.oracle_entropy),
            (&mut t.oracle_moment, o.oracle_moment),
        ] {
            if let Some(v) = src {
                *dst = v;
            }
        }
        t
    }
}

/// Parsed configuration with the raw bytes kept for hashing.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub raw: Vec<u8>,
    pub path: PathBuf,
}

/// JSON when the extension is `.json`, TOML otherwise.
pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let raw = std::fs::read(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw).map_err(|e| ConfigError::new("config", e.to_string()))?;
    let config = parse(text, path.extension().is_some_and(|e| e == "json"))?;
    Ok(LoadedConfig {
        config,
        raw,
        path: path.to_path_buf(),
    })
}

pub fn parse(text: &str, json: bool) -> Result<RunConfig, ConfigError> {
    if json {
        serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "config".into());
            ConfigError::new(key, e.message())
        })
    }
}

/// `lo:hi:n` with `0 <= lo < hi <= 1` and `n >= 2`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |m: &str| ConfigError::new("grid", format!("`{spec}`: {m}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad("expected lo:hi:n"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let n: usize = n.trim().parse().map_err(|_| bad("n is not a count"))?;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
        return Err(bad("x must lie in [0, 1]"));
    }
    if lo >= hi || n < 2 {
        return Err(bad("need lo < hi and n >= 2"));
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_bounds() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.2:1.5:4").unwrap_err().key, "grid");
        assert!(parse_grid("-0.1:0.5:4").is_err());
        assert!(parse_grid("0.5:0.5:4").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn overrides_replace_profile_values() {
        let o = ToleranceOverrides {
            c_expected: Some(0.5),
            sigma_max: Some(0.1),
            ..Default::default()
        };
        let t = o.apply(Tolerances::profile(Profile::Desk));
        assert_eq!(t.c_expected, Some(0.5));
        assert_eq!(t.sigma_max, 0.1);
        assert_eq!(t.eta_agreement, 5e-3);
    }

    #[test]
    fn unknown_key_is_reported() {
        let text = "[backend]\nkind = \"pairstate\"\nn = 3\nalpha = 1.0\nbeta = 1.5\n[regions.A]\nsitez = [0]\n";
        let err = parse(text, false).unwrap_err();
        assert!(err.message.contains("sitez"), "{err}");
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
        assert!(n >= 4);
    }
}
