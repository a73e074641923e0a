//! One function per experiment kind; each returns results, checks and CSV side files.

use std::f64::consts::PI;

use conformal_ruler::crossratio::{
    build_table, circle_embed, complement_check, constant_c_check, decomposition_check,
    verify_embedding, EdgePartition, EmbedOptions, EtaTable,
};
use conformal_ruler::lattice::validate_ruler;
use conformal_ruler::pairstates::chord;
use conformal_ruler::ruler::{
    bulk_a1_residual, entropy_combinations, find_eta_k, kd_combo, modular_commutator,
    run_ruler_with_scan, sigma_of_combo, EtaKOptions, RulerOptions, TOL_SSA,
};
use conformal_ruler::{ConformalRuler, Region};
use itertools::Itertools;
use serde_json::json;

use crate::config::{parse_grid, ExperimentSpec, PartitionSpec, Tolerances};
use crate::report::{Check, Csv, CsvCell, Outcome};
use crate::setup::{Geometry, Setup};

/// Failure inside a computation, as opposed to a missed tolerance.
#[derive(thiserror::Error, Debug)]
#[error("experiment `{experiment}`: {message}")]
pub struct RunError {
    pub experiment: String,
    pub message: String,
}

type Res<T> = Result<T, String>;

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn run(spec: &ExperimentSpec, setup: &Setup, tol: &Tolerances) -> Result<Outcome, RunError> {
    let body = match spec {
        ExperimentSpec::Ruler { ruler, .. } => ruler_experiment(setup, ruler, tol),
        ExperimentSpec::Scan { ruler, grid, .. } => {
            parse_grid(grid).map_err(s).and_then(|g| scan_experiment(setup, ruler, &g))
        }
        ExperimentSpec::BulkCommutator { a, b, c, .. } => bulk_commutator(setup, [a, b, c], tol),
        ExperimentSpec::A1Residual { b, c, d, .. } => a1_experiment(setup, [b, c, d], tol),
        ExperimentSpec::Table { partition, .. } => table_experiment(setup, partition, tol),
        ExperimentSpec::Exotic { .. } => exotic_experiment(setup, tol),
    };
    let (results, checks, csv) = body.map_err(|message| RunError {
        experiment: spec.name().to_string(),
        message,
    })?;
    Ok(Outcome {
        name: spec.name().to_string(),
        kind: spec.kind(),
        results,
        checks,
        csv,
    })
}

type Body = (serde_json::Value, Vec<Check>, Vec<(String, Csv)>);

fn sigma_csv(points: impl IntoIterator<Item = (f64, f64)>) -> Csv {
    let mut csv = Csv::new(&["x", "sigma"]);
    for (x, sg) in points {
        csv.rows.push(vec![CsvCell::Num(x), CsvCell::Num(sg)]);
    }
    csv
}

fn ruler_experiment(setup: &Setup, name: &str, tol: &Tolerances) -> Res<Body> {
    let ruler = &setup.rulers[name];
    let validation = match &setup.geometry {
        Geometry::Lattice(l) => Some(validate_ruler(l, ruler).failed()),
        _ => None,
    };
    let (rep, scan) = run_ruler_with_scan(setup.backend.as_ref(), ruler, &RulerOptions::default()).map_err(s)?;
    let mut checks = Vec::new();
    if let Some(c) = tol.c_expected {
        checks.push(Check::at_most("|c_tot - c_expected|", (rep.c_tot - c).abs(), tol.c_tol));
    }
    if let (Some(eta), Some(eta_j)) = (rep.eta, rep.eta_j) {
        checks.push(Check::at_most("|eta - eta_J|", (eta - eta_j).abs(), tol.eta_agreement));
    }
    if let (Some(eta), Some(eta_k), Some(false)) = (rep.eta, rep.eta_k, rep.flat) {
        checks.push(Check::at_most("|eta - eta_K|", (eta - eta_k).abs(), tol.eta_agreement));
    }
    if let Some(sg) = rep.sigma_at_eta {
        checks.push(Check::at_most("sigma(K(eta))", sg, tol.sigma_max));
    }
    let csv = scan
        .as_ref()
        .map(|ek| vec![("sigma".to_string(), sigma_csv(ek.grid.iter().copied()))])
        .unwrap_or_default();
    let results = json!({
        "ruler": name,
        "delta": rep.delta,
        "i": rep.i,
        "c_tot": rep.c_tot,
        "eta": rep.eta,
        "eta_J": rep.eta_j,
        "c_minus": rep.c_minus,
        "eta_K": rep.eta_k,
        "sigma_min": rep.sigma_min,
        "sigma_at_eta": rep.sigma_at_eta,
        "flat": rep.flat,
        "nonchiral": rep.nonchiral,
        "fit_residual": scan.as_ref().map(|ek| ek.fit_residual),
        "failed_validation": validation,
    });
    Ok((results, checks, csv))
}

/// `sigma(K(x))` on an explicit grid.
pub fn scan_points(setup: &Setup, ruler: &ConformalRuler, grid: &[f64]) -> Res<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&x| Ok((x, sigma_of_combo(setup.backend.as_ref(), &kd_combo(ruler, x)).map_err(s)?)))
        .collect()
}

fn scan_experiment(setup: &Setup, name: &str, grid: &[f64]) -> Res<Body> {
    let points = scan_points(setup, &setup.rulers[name], grid)?;
    let (x_min, s_min) = points
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid has at least two points");
    let results = json!({ "ruler": name, "points": points.len(), "x_min": x_min, "sigma_min": s_min });
    Ok((results, Vec::new(), vec![("sigma".into(), sigma_csv(points))]))
}

fn bulk_commutator(setup: &Setup, names: [&String; 3], tol: &Tolerances) -> Res<Body> {
    let [a, b, c] = names.map(|n| &setup.regions[n.as_str()]);
    let j = modular_commutator(setup.backend.as_ref(), a, b, c).map_err(s)?;
    let j_rev = modular_commutator(setup.backend.as_ref(), c, b, a).map_err(s)?;
    let c_minus = 3.0 * j / PI;
    let mut checks = vec![Check::at_most("|J(A,B,C) + J(C,B,A)|", (j + j_rev).abs(), 1e-10)];
    if let Some(e) = tol.c_minus_expected {
        checks.push(Check::at_most("|c_minus - expected|", (c_minus - e).abs(), tol.c_minus_tol));
    }
    Ok((json!({ "J": j, "c_minus": c_minus }), checks, Vec::new()))
}

fn a1_experiment(setup: &Setup, names: [&String; 3], tol: &Tolerances) -> Res<Body> {
    let [b, c, d] = names.map(|n| &setup.regions[n.as_str()]);
    let r = bulk_a1_residual(setup.backend.as_ref(), b, c, d).map_err(s)?;
    let checks = vec![Check::at_most("A1 residual", r.delta, tol.a1_max)];
    Ok((json!({ "delta": r.delta, "sigma": r.sigma }), checks, Vec::new()))
}

fn partition(setup: &Setup, spec: &PartitionSpec) -> Res<EdgePartition> {
    match (spec, &setup.geometry) {
        (PartitionSpec::Circle, Geometry::Circle(n)) => Ok(EdgePartition::circle(*n)),
        (PartitionSpec::Frame { depth, cuts }, Geometry::Lattice(l)) => {
            EdgePartition::lattice_frame(l, *depth, cuts).map_err(s)
        }
        _ => Err("partition does not fit the backend geometry".into()),
    }
}

pub struct TableSummary {
    pub c_spread: f64,
    pub c_mean: f64,
    pub complement: f64,
    pub decomposition: f64,
}

/// Worst complement and decomposition residuals over every 4- and 5-subset of endpoints.
pub fn summarize(table: &EtaTable) -> Res<TableSummary> {
    let n = table.n_endpoints;
    let cs = constant_c_check(table);
    let mut complement = 0.0f64;
    for e in (0..n).combinations(4) {
        let r = complement_check(table, [e[0], e[1], e[2], e[3]]).map_err(s)?;
        complement = complement.max(r.max_eta_dev);
    }
    let mut decomposition = 0.0f64;
    for e in (0..n).combinations(5) {
        let r = decomposition_check(table, [e[0], e[1], e[2], e[3], e[4]]).map_err(s)?;
        decomposition = decomposition.max(r.max_dev);
    }
    Ok(TableSummary {
        c_spread: cs.spread,
        c_mean: 0.5 * (cs.min + cs.max),
        complement,
        decomposition,
    })
}

pub fn table_csv(table: &EtaTable) -> Csv {
    let mut csv = Csv::new(&["i", "j", "k", "l", "eta", "c_tot", "delta", "I", "degenerate"]);
    for k in table.keys() {
        let e = table.get(&k).expect("listed key");
        let mut row: Vec<CsvCell> = k.iter().map(|&v| CsvCell::Int(v)).collect();
        row.push(CsvCell::Num(e.eta.unwrap_or(f64::NAN)));
        row.extend([e.c_tot, e.delta, e.i].map(CsvCell::Num));
        row.push(CsvCell::Int(usize::from(e.degenerate)));
        csv.rows.push(row);
    }
    csv
}

pub fn angles_csv(angles: &[f64]) -> Csv {
    let mut csv = Csv::new(&["endpoint", "theta"]);
    for (i, &t) in angles.iter().enumerate() {
        csv.rows.push(vec![CsvCell::Int(i), CsvCell::Num(t)]);
    }
    csv
}

fn table_checks(sum: &TableSummary, tol: &Tolerances, identity: f64) -> Vec<Check> {
    let mut checks = vec![
        Check::at_most("c_tot spread", sum.c_spread, tol.c_spread),
        Check::at_most("complement residual", sum.complement, identity),
        Check::at_most("decomposition residual", sum.decomposition, identity),
    ];
    if let Some(c) = tol.c_expected {
        checks.push(Check::at_most("|c_tot - c_expected|", (sum.c_mean - c).abs(), tol.c_tol));
    }
    checks
}

fn table_experiment(setup: &Setup, spec: &PartitionSpec, tol: &Tolerances) -> Res<Body> {
    let part = partition(setup, spec)?;
    let table = build_table(setup.backend.as_ref(), &part, &part.all_triples(), TOL_SSA).map_err(s)?;
    let sum = summarize(&table)?;
    let mut checks = table_checks(&sum, tol, tol.identity);
    let opts = EmbedOptions {
        closure_tol: tol.closure,
        ..EmbedOptions::default()
    };
    let mut csv = vec![("table".to_string(), table_csv(&table))];
    let embedding = match circle_embed(&table, &opts) {
        Ok(emb) => {
            let verify = verify_embedding(&table, &emb);
            checks.push(Check::at_most("embedding residual", verify, tol.embed));
            csv.push(("embedding".into(), angles_csv(&emb.angles)));
            json!({ "angles": emb.angles, "verify": verify })
        }
        Err(e) => {
            checks.push(Check::at_most("embedding residual", f64::INFINITY, tol.embed));
            json!({ "error": e.to_string() })
        }
    };
    let results = json!({
        "n_endpoints": table.n_endpoints,
        "entries": table.entries.len(),
        "c_mean": sum.c_mean,
        "c_spread": sum.c_spread,
        "complement": sum.complement,
        "decomposition": sum.decomposition,
        "embedding": embedding,
    });
    Ok((results, checks, csv))
}

fn exotic_experiment(setup: &Setup, tol: &Tolerances) -> Res<Body> {
    let src = setup.pair_state.as_ref().ok_or("no pair state")?;
    let (state, alpha, beta) = (&src.state, src.alpha, src.beta);
    let n_half = state.layout.n_half;
    let n = 2 * n_half;
    let mut law = 0.0f64;
    for len in 1..n {
        for start in 0..n {
            let r = Region::new((0..len).map(|k| (start + k) % n).collect());
            let predicted = alpha * (chord(len, n_half) / chord(1, n_half)).ln() + beta;
            law = law.max((state.region_entropy(&r).map_err(s)? - predicted).abs());
        }
    }
    let part = EdgePartition::circle(n);
    let table = build_table(setup.backend.as_ref(), &part, &part.all_triples(), TOL_SSA).map_err(s)?;
    let sum = summarize(&table)?;
    let mut checks = vec![Check::at_most("entropy law residual", law, tol.identity)];
    checks.extend(table_checks(&sum, tol, tol.identity));
    checks.push(Check::at_most("|c_tot - 6 alpha|", (sum.c_mean - 6.0 * alpha).abs(), tol.c_spread));
    let embeds = circle_embed(&table, &EmbedOptions::default()).is_ok();
    checks.push(Check::at_least("embeds", f64::from(u8::from(embeds)), 1.0));
    let mut worst = 0.0f64;
    let mut ratios = Vec::new();
    for k in part.unit_triples() {
        let ruler = part.ruler(&k).map_err(s)?;
        let ent = entropy_combinations(setup.backend.as_ref(), &ruler, TOL_SSA).map_err(s)?;
        let ek = find_eta_k(setup.backend.as_ref(), &ruler, &EtaKOptions::default()).map_err(s)?;
        let ratio = ek.sigma_min / (ent.delta + ent.i);
        ratios.push(json!({ "triple": k, "sigma_min": ek.sigma_min, "ratio": ratio }));
        worst = worst.max(ratio);
    }
    checks.push(Check::at_least("max sigma_min / (Delta + I)", worst, tol.sigma_ratio));
    let results = json!({
        "n": n_half,
        "alpha": alpha,
        "beta": beta,
        "chi": state.chi,
        "p": state.p,
        "valid": true,
        "c_spread": sum.c_spread,
        "c_mean": sum.c_mean,
        "fixed_point_violated": worst > tol.sigma_ratio,
        "rulers": ratios,
    });
    Ok((results, checks, vec![("table".into(), table_csv(&table))]))
}
