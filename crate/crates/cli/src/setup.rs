//! Turns a validated configuration into a state backend and resolved regions.

use std::collections::BTreeMap;

use conformal_ruler::cftmodel::{CftBackend, CftCircle};
use conformal_ruler::edoracle::{statevector_from_gaussian, statevector_from_pairstate, OracleBackend};
use conformal_ruler::gaussian::{pip_ground_state, random_pure_state, GaussianBackend, PipParams};
use conformal_ruler::pairstates::{PairState, PairStateBackend};
use conformal_ruler::{ConformalRuler, Lattice, Region, StateBackend};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{BackendSpec, ConfigError, ExperimentSpec, OracleSource, RunConfig};

pub type Backend = Box<dyn StateBackend + Sync>;

/// Site geometry the regions live on.
pub enum Geometry {
    Lattice(Lattice),
    /// `n` sites (or arcs) around a circle.
    Circle(usize),
    /// `n` fermionic modes without spatial structure.
    Modes(usize),
}

impl Geometry {
    pub fn n_sites(&self) -> usize {
        match self {
            Geometry::Lattice(l) => l.n_sites(),
            Geometry::Circle(n) | Geometry::Modes(n) => *n,
        }
    }
}

pub struct Setup {
    pub backend: Backend,
    pub geometry: Geometry,
    pub regions: BTreeMap<String, Region>,
    pub rulers: BTreeMap<String, ConformalRuler>,
    /// Pair state behind the backend, when there is one.
    pub pair_state: Option<PairSource>,
}

pub struct PairSource {
    pub state: PairState,
    pub alpha: f64,
    pub beta: f64,
}

fn backend_error(key: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::new(format!("backend.{key}"), e.to_string())
}

fn pair_state(n: usize, alpha: f64, beta: f64, key: &str) -> Result<PairState, ConfigError> {
    PairState::from_alpha_beta(n, alpha, beta).map_err(|e| backend_error(key, e))
}

fn pair_source(n: usize, alpha: f64, beta: f64, key: &str) -> Result<PairSource, ConfigError> {
    Ok(PairSource {
        state: pair_state(n, alpha, beta, key)?,
        alpha,
        beta,
    })
}

type Built = (Backend, Geometry, Option<PairSource>);

fn oracle_source(source: &OracleSource, seed: u64) -> Result<Built, ConfigError> {
    match source {
        OracleSource::PairState { n, alpha, beta } => {
            let src = pair_source(*n, *alpha, *beta, "source")?;
            let dense = statevector_from_pairstate(&src.state).map_err(|e| backend_error("source.n", e))?;
            Ok((
                Box::new(OracleBackend { state: dense }),
                Geometry::Circle(2 * n),
                Some(src),
            ))
        }
        OracleSource::GaussianRandom { modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cov = random_pure_state(*modes, &mut rng).map_err(|e| backend_error("source.modes", e))?;
            let dense = statevector_from_gaussian(&cov).map_err(|e| backend_error("source.modes", e))?;
            Ok((Box::new(OracleBackend { state: dense }), Geometry::Modes(*modes), None))
        }
    }
}

/// The structured backend an oracle run is compared against.
pub fn reference_backend(source: &OracleSource, seed: u64) -> Result<Backend, ConfigError> {
    match source {
        OracleSource::PairState { n, alpha, beta } => Ok(Box::new(PairStateBackend {
            state: pair_state(*n, *alpha, *beta, "source")?,
        })),
        OracleSource::GaussianRandom { modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cov = random_pure_state(*modes, &mut rng).map_err(|e| backend_error("source.modes", e))?;
            Ok(Box::new(GaussianBackend::new(cov)))
        }
    }
}

pub fn build_backend(spec: &BackendSpec, seed: u64) -> Result<Built, ConfigError> {
    match spec {
        BackendSpec::GaussianPip {
            width,
            height,
            t,
            delta,
            mu,
        } => {
            let lattice = Lattice::new(*width, *height).map_err(|e| backend_error("width", e))?;
            let params = PipParams {
                t: *t,
                delta: *delta,
                mu: *mu,
                ..PipParams::default()
            };
            let cov = pip_ground_state(&lattice, &params).map_err(|e| backend_error("mu", e))?;
            Ok((Box::new(GaussianBackend::new(cov)), Geometry::Lattice(lattice), None))
        }
        BackendSpec::PairState { n, alpha, beta } => {
            let src = pair_source(*n, *alpha, *beta, "beta")?;
            Ok((
                Box::new(PairStateBackend {
                    state: src.state.clone(),
                }),
                Geometry::Circle(2 * n),
                Some(src),
            ))
        }
        BackendSpec::Cft {
            c,
            epsilon,
            angles,
            n_arcs,
        } => {
            let model = match (angles, n_arcs) {
                (Some(a), None) => CftCircle::new(*c, *epsilon, a.clone()),
                (None, Some(n)) => CftCircle::equal_arcs(*c, *epsilon, *n),
                _ => return Err(backend_error("angles", "give exactly one of `angles` and `n_arcs`")),
            }
            .map_err(|e| backend_error("angles", e))?;
            let n = model.n_arcs();
            Ok((Box::new(CftBackend { model }), Geometry::Circle(n), None))
        }
        BackendSpec::EdOracle { source } => oracle_source(source, seed),
    }
}

fn resolve_region(
    name: &str,
    spec: &crate::config::RegionSpec,
    geometry: &Geometry,
) -> Result<Region, ConfigError> {
    let n = geometry.n_sites();
    if let Some(&s) = spec.sites.iter().find(|&&s| s >= n) {
        return Err(ConfigError::new(
            format!("regions.{name}.sites"),
            format!("site {s} outside 0..{n}"),
        ));
    }
    let mut region = Region::new(spec.sites.clone());
    if !spec.rects.is_empty() {
        let Geometry::Lattice(l) = geometry else {
            return Err(ConfigError::new(
                format!("regions.{name}.rects"),
                "rectangles need a lattice backend",
            ));
        };
        for &[x0, x1, y0, y1] in &spec.rects {
            let r = l
                .rect(x0, x1, y0, y1)
                .map_err(|e| ConfigError::new(format!("regions.{name}.rects"), e.to_string()))?;
            region = region.union(&r);
        }
    }
    Ok(region)
}

fn lookup<'a>(regions: &'a BTreeMap<String, Region>, name: &str, key: String) -> Result<&'a Region, ConfigError> {
    regions
        .get(name)
        .ok_or_else(|| ConfigError::new(key, format!("undefined region `{name}`")))
}

/// Checks every name an experiment refers to and that the backend can serve it.
pub fn validate_experiments(cfg: &RunConfig, setup: &Setup) -> Result<(), ConfigError> {
    let mut seen = std::collections::BTreeSet::new();
    let moments = setup.backend.supports_moments();
    for (i, exp) in cfg.experiments.iter().enumerate() {
        let key = |field: &str| format!("experiments[{i}].{field}");
        if !seen.insert(exp.name()) {
            return Err(ConfigError::new(key("name"), format!("duplicate experiment `{}`", exp.name())));
        }
        let need_ruler = |r: &str| {
            if setup.rulers.contains_key(r) {
                Ok(())
            } else {
                Err(ConfigError::new(key("ruler"), format!("undefined ruler `{r}`")))
            }
        };
        let need_moments = || {
            if moments {
                Ok(())
            } else {
                Err(ConfigError::new(key("kind"), format!("`{}` needs a backend with moments", exp.kind())))
            }
        };
        match exp {
            ExperimentSpec::Ruler { ruler, .. } => need_ruler(ruler)?,
            ExperimentSpec::Scan { ruler, grid, .. } => {
                need_ruler(ruler)?;
                need_moments()?;
                crate::config::parse_grid(grid).map_err(|e| ConfigError::new(key("grid"), e.message))?;
            }
            ExperimentSpec::BulkCommutator { a, b, c, .. } => {
                need_moments()?;
                for (f, r) in [("a", a), ("b", b), ("c", c)] {
                    lookup(&setup.regions, r, key(f))?;
                }
            }
            ExperimentSpec::A1Residual { b, c, d, .. } => {
                for (f, r) in [("b", b), ("c", c), ("d", d)] {
                    lookup(&setup.regions, r, key(f))?;
                }
            }
            ExperimentSpec::Table { partition, .. } => match (partition, &setup.geometry) {
                (crate::config::PartitionSpec::Circle, Geometry::Circle(_))
                | (crate::config::PartitionSpec::Frame { .. }, Geometry::Lattice(_)) => {}
                _ => {
                    return Err(ConfigError::new(
                        key("partition"),
                        "circle partitions need a circular backend, frame partitions a lattice",
                    ))
                }
            },
            ExperimentSpec::Exotic { .. } => {
                if setup.pair_state.is_none() {
                    return Err(ConfigError::new(key("kind"), "`exotic` needs a pair-state backend"));
                }
                need_moments()?;
            }
        }
    }
    Ok(())
}

pub fn build(cfg: &RunConfig, seed: u64) -> Result<Setup, ConfigError> {
    let (backend, geometry, pair_state) = build_backend(&cfg.backend, seed)?;
    let mut regions = BTreeMap::new();
    for (name, spec) in &cfg.regions {
        regions.insert(name.clone(), resolve_region(name, spec, &geometry)?);
    }
    let mut rulers = BTreeMap::new();
    for (name, r) in &cfg.rulers {
        let get = |field: &str, v: &Option<String>| -> Result<Region, ConfigError> {
            match v {
                None => Ok(Region::empty()),
                Some(n) => lookup(&regions, n, format!("rulers.{name}.{field}")).cloned(),
            }
        };
        let ruler = ConformalRuler::new(
            get("a", &Some(r.a.clone()))?,
            get("a_prime", &r.a_prime)?,
            get("b", &Some(r.b.clone()))?,
            get("c", &Some(r.c.clone()))?,
            get("c_prime", &r.c_prime)?,
        );
        rulers.insert(name.clone(), ruler);
    }
    let setup = Setup {
        backend,
        geometry,
        regions,
        rulers,
        pair_state,
    };
    validate_experiments(cfg, &setup)?;
    Ok(setup)
}
