//! `conformal-ruler`: configuration-driven runs of the conformal-ruler checks.
//!
//! Exit codes: 0 when every check passes, 2 when a tolerance is missed, 1 on
//! configuration or runtime errors.

mod config;
mod experiments;
mod report;
mod setup;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conformal_ruler::crossratio::{circle_embed, verify_embedding, EmbedOptions, EtaEntry, EtaTable};
use conformal_ruler::ruler::{kd_combo, modular_commutator, sigma_of_combo};
use conformal_ruler::StateBackend;
use rayon::prelude::*;
use serde_json::json;

use config::{BackendSpec, ConfigError, ExperimentSpec, LoadedConfig, Profile, Tolerances};
use report::{Check, Envelope, Outcome};

#[derive(Parser)]
#[command(name = "conformal-ruler", version, about = "Conformal-ruler experiments on lattice, pair-state and CFT backends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in the configuration.
    Run(Common),
    /// Write sigma(K(x)) over a grid of x for one ruler.
    ScanSigma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ruler: String,
        /// `lo:hi:n` inside [0, 1].
        #[arg(long, default_value = "0:1:101")]
        grid: String,
    },
    /// Embed a cross-ratio table on the circle.
    Embed {
        #[command(flatten)]
        common: Common,
        /// Table CSV written by `run`; computed from the configuration when absent.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Table experiment supplying the partition; the first one by default.
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Compare a dense-oracle backend with its structured counterpart.
    OracleCompare(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (TOML, or JSON by extension).
    config_path: Option<PathBuf>,
    #[arg(long = "config", conflicts_with = "config_path")]
    config_flag: Option<PathBuf>,
    /// Output directory; defaults to the configuration's `out`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for experiments; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum)]
    tolerance_profile: Option<Profile>,
}

enum Failure {
    Config(ConfigError),
    Runtime(String),
    Tolerance(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Everything a subcommand needs before touching the backend.
struct Context {
    loaded: LoadedConfig,
    seed: u64,
    out: PathBuf,
    jobs: usize,
    profile: Profile,
    tol: Tolerances,
}

impl Context {
    fn new(c: &Common) -> Result<Self, Failure> {
        let path = c
            .config_flag
            .clone()
            .or_else(|| c.config_path.clone())
            .ok_or_else(|| ConfigError::new("config", "no configuration file given"))?;
        let loaded = config::load(&path)?;
        let cfg = &loaded.config;
        let profile = c.tolerance_profile.or(cfg.tolerance_profile).unwrap_or(Profile::Desk);
        Ok(Context {
            seed: c.seed.or(cfg.seed).unwrap_or(0),
            out: c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| "out".into()),
            jobs: c.jobs,
            tol: cfg.tolerances.apply(Tolerances::profile(profile)),
            profile,
            loaded,
        })
    }

    fn envelope(&self) -> Envelope {
        let name = self.loaded.path.file_name().map_or_else(
            || self.loaded.path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        Envelope {
            tool: "conformal-ruler",
            version: env!("CARGO_PKG_VERSION"),
            library_version: conformal_ruler::VERSION,
            config: name,
            config_sha256: report::sha256_hex(&self.loaded.raw),
            seed: self.seed,
            tolerance_profile: format!("{:?}", self.profile).to_lowercase(),
            tolerances: serde_json::to_value(self.tol).expect("tolerances serialize"),
        }
    }

    fn setup(&self) -> Result<setup::Setup, Failure> {
        Ok(setup::build(&self.loaded.config, self.seed)?)
    }
}

fn run(common: &Common) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let setup = ctx.setup()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut outcomes: Vec<Outcome> = pool
        .install(|| {
            ctx.loaded
                .config
                .experiments
                .par_iter()
                .map(|e| experiments::run(e, &setup, &ctx.tol))
                .collect::<Result<_, _>>()
        })
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    outcomes.sort_by(|a, b| a.name.cmp(&b.name));
    let env = ctx.envelope();
    for o in &outcomes {
        report::write_outcome(&ctx.out, &env, o).map_err(io)?;
        println!("{} {} ({})", if o.passed() { "PASS" } else { "FAIL" }, o.name, o.kind);
        for c in o.checks.iter().filter(|c| !c.passed) {
            println!("  {}: {} {} {} failed", c.name, c.value, c.relation, c.limit);
        }
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name.as_str()).collect();
    let summary = json!({
        "experiments": outcomes.iter().map(|o| json!({ "name": o.name, "kind": o.kind, "passed": o.passed() })).collect::<Vec<_>>(),
        "passed": failed.is_empty(),
    });
    report::write_json(&ctx.out.join("summary.json"), &report::report_json(&env, summary)).map_err(io)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("tolerance missed in {}", failed.join(", "))))
    }
}

fn scan_sigma(common: &Common, ruler: &str, grid: &str) -> Result<(), Failure> {
    let grid = config::parse_grid(grid)?;
    let ctx = Context::new(common)?;
    let setup = ctx.setup()?;
    let r = setup
        .rulers
        .get(ruler)
        .ok_or_else(|| ConfigError::new("ruler", format!("undefined ruler `{ruler}`")))?;
    if !setup.backend.supports_moments() {
        return Err(ConfigError::new("backend.kind", "scan-sigma needs a backend with moments").into());
    }
    let points = experiments::scan_points(&setup, r, &grid).map_err(Failure::Runtime)?;
    let (x_min, s_min) = points
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid has at least two points");
    std::fs::create_dir_all(&ctx.out).map_err(io)?;
    let mut csv = report::Csv::new(&["x", "sigma"]);
    for (x, sg) in &points {
        csv.rows.push(vec![report::CsvCell::Num(*x), report::CsvCell::Num(*sg)]);
    }
    std::fs::write(ctx.out.join(format!("scan_{ruler}.csv")), csv.render()).map_err(io)?;
    let body = json!({ "ruler": ruler, "points": points.len(), "x_min": x_min, "sigma_min": s_min });
    report::write_json(&ctx.out.join(format!("scan_{ruler}.json")), &report::report_json(&ctx.envelope(), body))
        .map_err(io)?;
    println!("scan {ruler}: minimum sigma {s_min} at x = {x_min}");
    Ok(())
}

/// Reads the `i,j,k,l,eta,c_tot,delta,I,degenerate` table written by `run`.
fn read_table(path: &Path) -> Result<EtaTable, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("table", format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let bad = || ConfigError::new("table", format!("line {}: `{line}`", line_no + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad().into());
        }
        let idx: Vec<usize> = f[..4].iter().map(|v| v.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let num: Vec<f64> = f[4..8].iter().map(|v| v.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let entry = EtaEntry {
            eta: Some(num[0]).filter(|e| e.is_finite()),
            c_tot: num[1],
            delta: num[2],
            i: num[3],
            degenerate: f[8] == "1",
        };
        rows.push(([idx[0], idx[1], idx[2], idx[3]], entry));
    }
    let n = rows.iter().flat_map(|(k, _)| k.iter().copied()).max().map_or(0, |m| m + 1);
    let mut table = EtaTable::new(n);
    for (k, e) in rows {
        table.insert(k, e);
    }
    Ok(table)
}

fn embed(common: &Common, table_path: Option<&Path>, experiment: Option<&str>) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let table = match table_path {
        Some(p) => read_table(p)?,
        None => {
            let spec = ctx
                .loaded
                .config
                .experiments
                .iter()
                .find(|e| matches!(e, ExperimentSpec::Table { .. }) && experiment.is_none_or(|n| e.name() == n))
                .ok_or_else(|| ConfigError::new("experiment", "no matching table experiment"))?
                .clone();
            let setup = ctx.setup()?;
            let o = experiments::run(&spec, &setup, &ctx.tol).map_err(|e| Failure::Runtime(e.to_string()))?;
            let csv = o.csv.iter().find(|(s, _)| s == "table").expect("table experiments emit a table");
            std::fs::create_dir_all(&ctx.out).map_err(io)?;
            let path = ctx.out.join(format!("{}_table.csv", o.name));
            std::fs::write(&path, csv.1.render()).map_err(io)?;
            read_table(&path)?
        }
    };
    let opts = EmbedOptions {
        closure_tol: ctx.tol.closure,
        ..EmbedOptions::default()
    };
    std::fs::create_dir_all(&ctx.out).map_err(io)?;
    let env = ctx.envelope();
    let (body, check) = match circle_embed(&table, &opts) {
        Ok(emb) => {
            let verify = verify_embedding(&table, &emb);
            std::fs::write(ctx.out.join("embedding.csv"), experiments::angles_csv(&emb.angles).render()).map_err(io)?;
            let check = Check::at_most("embedding residual", verify, ctx.tol.embed);
            (json!({ "angles": emb.angles, "verify": verify, "checks": [&check] }), check)
        }
        Err(e) => {
            let check = Check::at_most("embedding residual", f64::INFINITY, ctx.tol.embed);
            (json!({ "error": e.to_string(), "checks": [&check] }), check)
        }
    };
    report::write_json(&ctx.out.join("embedding.json"), &report::report_json(&env, body)).map_err(io)?;
    if check.passed {
        println!("PASS embedding: residual {}", check.value);
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("embedding residual {} above {}", check.value, check.limit)))
    }
}

fn oracle_compare(common: &Common) -> Result<(), Failure> {
    let ctx = Context::new(common)?;
    let BackendSpec::EdOracle { source } = &ctx.loaded.config.backend else {
        return Err(ConfigError::new("backend.kind", "oracle-compare needs an `edoracle` backend").into());
    };
    let setup = ctx.setup()?;
    if setup.rulers.is_empty() {
        return Err(ConfigError::new("rulers", "oracle-compare needs at least one ruler").into());
    }
    let reference = setup::reference_backend(source, ctx.seed)?;
    let (dense, structured): (&dyn StateBackend, &dyn StateBackend) = (setup.backend.as_ref(), reference.as_ref());
    let rt = |e: conformal_ruler::ruler::RulerError| Failure::Runtime(e.to_string());
    let be = |e: conformal_ruler::ruler::BackendError| Failure::Runtime(e.to_string());
    let (mut d_s, mut d_j, mut d_v) = (0.0f64, 0.0f64, 0.0f64);
    for r in setup.rulers.values() {
        let aa = r.a.union(&r.a_prime);
        let cc = r.c.union(&r.c_prime);
        for region in [
            aa.union(&r.b),
            r.b.union(&cc),
            aa.clone(),
            cc.clone(),
            r.a.union(&r.b),
            r.b.union(&r.c),
            r.b.clone(),
            r.a.union(&r.b).union(&r.c),
        ] {
            d_s = d_s.max((dense.entropy(&region).map_err(be)? - structured.entropy(&region).map_err(be)?).abs());
        }
        for (a, c) in [(&r.a, &r.c), (&aa, &cc)] {
            let j1 = modular_commutator(dense, a, &r.b, c).map_err(rt)?;
            let j2 = modular_commutator(structured, a, &r.b, c).map_err(rt)?;
            d_j = d_j.max((j1 - j2).abs());
        }
        for x in [0.0, 0.5, 1.0] {
            let combo = kd_combo(r, x);
            let v1 = sigma_of_combo(dense, &combo).map_err(rt)?.powi(2);
            let v2 = sigma_of_combo(structured, &combo).map_err(rt)?.powi(2);
            d_v = d_v.max((v1 - v2).abs());
        }
    }
    let checks = vec![
        Check::at_most("entropy", d_s, ctx.tol.oracle_entropy),
        Check::at_most("modular commutator", d_j, ctx.tol.oracle_moment),
        Check::at_most("variance", d_v, ctx.tol.oracle_moment),
    ];
    let passed = checks.iter().all(|c| c.passed);
    std::fs::create_dir_all(&ctx.out).map_err(io)?;
    let body = json!({ "rulers": setup.rulers.len(), "passed": passed, "checks": checks });
    report::write_json(&ctx.out.join("oracle_compare.json"), &report::report_json(&ctx.envelope(), body))
        .map_err(io)?;
    for c in &checks {
        println!("{} oracle {}: {:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Tolerance("oracle mismatch".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::ScanSigma { common, ruler, grid } => scan_sigma(common, ruler, grid),
        Command::Embed {
            common,
            table,
            experiment,
        } => embed(common, table.as_deref(), experiment.as_deref()),
        Command::OracleCompare(c) => oracle_compare(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tolerance(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
