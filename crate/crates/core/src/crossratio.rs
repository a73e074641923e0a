//! Tables of edge cross-ratios, their consistency relations, and the
//! reconstruction of endpoint positions on a circle.
//!
//! A triple of consecutive edge intervals `(a, b, c)` is keyed by its four
//! endpoint ids in counterclockwise order: `a = (k0, k1)`, `b = (k1, k2)`,
//! `c = (k2, k3)`. Reversing the triple gives the same key.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::{ConformalRuler, Lattice, LatticeError, Region};
use crate::ruler::{entropy_combinations, solve_c_eta, RulerError, StateBackend};

pub type TripleKey = [usize; 4];

#[derive(thiserror::Error, Debug)]
pub enum CrossRatioError {
    #[error("table has no entry for {0:?}")]
    Missing(TripleKey),
    #[error("entry {0:?} is degenerate")]
    DegenerateEntry(TripleKey),
    #[error("cross-ratio table is inconsistent at {key:?}: {reason}")]
    InconsistentTable { key: TripleKey, reason: String },
    #[error("cross-ratios must lie strictly inside (0, 1), got {0} and {1}")]
    OutOfRange(f64, f64),
    #[error("endpoints {0:?} are not in cyclic order")]
    BadEndpoints(Vec<usize>),
    #[error(transparent)]
    Ruler(#[from] RulerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaEntry {
    pub eta: Option<f64>,
    pub c_tot: f64,
    pub delta: f64,
    pub i: f64,
    pub degenerate: bool,
}

impl EtaEntry {
    pub fn usable(&self) -> Option<f64> {
        if self.degenerate {
            None
        } else {
            self.eta
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EtaTable {
    pub n_endpoints: usize,
    pub entries: BTreeMap<String, EtaEntry>,
}

fn key_string(k: &TripleKey) -> String {
    format!("{}-{}-{}-{}", k[0], k[1], k[2], k[3])
}

fn parse_key(s: &str) -> Option<TripleKey> {
    let v: Vec<usize> = s.split('-').map(|p| p.parse().ok()).collect::<Option<_>>()?;
    v.try_into().ok()
}

impl EtaTable {
    pub fn new(n_endpoints: usize) -> Self {
        EtaTable {
            n_endpoints,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: TripleKey, entry: EtaEntry) {
        self.entries.insert(key_string(&key), entry);
    }

    pub fn get(&self, key: &TripleKey) -> Option<&EtaEntry> {
        self.entries.get(&key_string(key))
    }

    pub fn eta(&self, key: &TripleKey) -> Result<f64, CrossRatioError> {
        let e = self.get(key).ok_or(CrossRatioError::Missing(*key))?;
        e.usable().ok_or(CrossRatioError::DegenerateEntry(*key))
    }

    pub fn keys(&self) -> Vec<TripleKey> {
        self.entries.keys().filter_map(|s| parse_key(s)).collect()
    }
}

/// Whether `k` lists distinct endpoints in counterclockwise order.
pub fn is_cyclic(k: &[usize], n: usize) -> bool {
    if k.iter().any(|e| *e >= n) {
        return false;
    }
    let steps: Vec<usize> = k
        .windows(2)
        .map(|w| (w[1] + n - w[0]) % n)
        .collect();
    let total: usize = steps.iter().sum();
    steps.iter().all(|s| *s > 0) && total < n
}

/// Elementary arcs of the edge plus an optional interior region shared by every ruler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePartition {
    pub arcs: Vec<Region>,
    pub interior: Region,
}

impl EdgePartition {
    /// Arcs are single abstract sites `0..n` with nothing behind them.
    pub fn circle(n: usize) -> Self {
        EdgePartition {
            arcs: (0..n).map(|i| Region::new(vec![i])).collect(),
            interior: Region::empty(),
        }
    }

    /// Frame of depth `depth` around a lattice, cut at boundary positions `cuts`.
    pub fn lattice_frame(lattice: &Lattice, depth: usize, cuts: &[usize]) -> Result<Self, LatticeError> {
        let (arcs, interior) = lattice.frame_arcs(depth, cuts)?;
        Ok(EdgePartition { arcs, interior })
    }

    pub fn n_endpoints(&self) -> usize {
        self.arcs.len()
    }

    fn span(&self, from: usize, to: usize) -> Region {
        let n = self.arcs.len();
        let len = (to + n - from) % n;
        Region::union_all((0..len).map(|k| &self.arcs[(from + k) % n]))
    }

    /// Ruler `(A, interior, B, C, {})` for the triple keyed by `k`.
    pub fn ruler(&self, k: &TripleKey) -> Result<ConformalRuler, CrossRatioError> {
        if !is_cyclic(k, self.n_endpoints()) {
            return Err(CrossRatioError::BadEndpoints(k.to_vec()));
        }
        Ok(ConformalRuler::new(
            self.span(k[0], k[1]),
            self.interior.clone(),
            self.span(k[1], k[2]),
            self.span(k[2], k[3]),
            Region::empty(),
        ))
    }

    /// Every triple leaving a nonempty fourth interval.
    pub fn all_triples(&self) -> Vec<TripleKey> {
        let n = self.n_endpoints();
        let mut out = Vec::new();
        for k0 in 0..n {
            for la in 1..n {
                for lb in 1..n {
                    for lc in 1..n {
                        if la + lb + lc < n {
                            out.push([k0, (k0 + la) % n, (k0 + la + lb) % n, (k0 + la + lb + lc) % n]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Triples of three single arcs.
    pub fn unit_triples(&self) -> Vec<TripleKey> {
        let n = self.n_endpoints();
        (0..n).map(|k| [k, (k + 1) % n, (k + 2) % n, (k + 3) % n]).collect()
    }
}

pub fn entry_from_ruler(
    backend: &dyn StateBackend,
    ruler: &ConformalRuler,
    tol_ssa: f64,
) -> Result<EtaEntry, CrossRatioError> {
    let ent = entropy_combinations(backend, ruler, tol_ssa)?;
    let sol = solve_c_eta(ent.delta, ent.i)?;
    Ok(EtaEntry {
        eta: sol.eta,
        c_tot: sol.c_tot,
        delta: ent.delta,
        i: ent.i,
        degenerate: sol.degenerate.is_some(),
    })
}

pub fn build_table(
    backend: &dyn StateBackend,
    partition: &EdgePartition,
    keys: &[TripleKey],
    tol_ssa: f64,
) -> Result<EtaTable, CrossRatioError> {
    let mut t = EtaTable::new(partition.n_endpoints());
    for k in keys {
        t.insert(*k, entry_from_ruler(backend, &partition.ruler(k)?, tol_ssa)?);
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplementReport {
    pub eta_abc: f64,
    pub eta_bcd: f64,
    pub eta_cda: f64,
    pub eta_dab: f64,
    pub max_eta_dev: f64,
    pub max_c_dev: f64,
}

/// `eta(a,b,c) = 1 - eta(b,c,d) = eta(a,d,c) = 1 - eta(d,a,b)` for four intervals covering the edge.
pub fn complement_check(table: &EtaTable, e: [usize; 4]) -> Result<ComplementReport, CrossRatioError> {
    let keys = [
        [e[0], e[1], e[2], e[3]],
        [e[1], e[2], e[3], e[0]],
        [e[2], e[3], e[0], e[1]],
        [e[3], e[0], e[1], e[2]],
    ];
    let mut etas = [0.0; 4];
    let mut cs = [0.0; 4];
    for (j, k) in keys.iter().enumerate() {
        etas[j] = table.eta(k)?;
        cs[j] = table.get(k).map(|x| x.c_tot).unwrap_or(f64::NAN);
    }
    let devs = [
        (etas[0] - (1.0 - etas[1])).abs(),
        (etas[0] - etas[2]).abs(),
        (etas[0] - (1.0 - etas[3])).abs(),
    ];
    let cmax = cs.iter().copied().fold(f64::MIN, f64::max);
    let cmin = cs.iter().copied().fold(f64::MAX, f64::min);
    Ok(ComplementReport {
        eta_abc: etas[0],
        eta_bcd: etas[1],
        eta_cda: etas[2],
        eta_dab: etas[3],
        max_eta_dev: devs.into_iter().fold(0.0, f64::max),
        max_c_dev: cmax - cmin,
    })
}

/// Predicted `(eta(ab,c,d), eta(a,b,cd), eta(a,bc,d))` from `eta_1 = eta(a,b,c)`
/// and `eta_2 = eta(b,c,d)`; the third is the product of the first two.
pub fn decomposition_predict(eta1: f64, eta2: f64) -> Result<[f64; 3], CrossRatioError> {
    if !(eta1 > 0.0 && eta1 < 1.0 && eta2 > 0.0 && eta2 < 1.0) {
        return Err(CrossRatioError::OutOfRange(eta1, eta2));
    }
    let ab_c_d = eta2 / (1.0 - eta1);
    let a_b_cd = eta1 / (1.0 - eta2);
    Ok([ab_c_d, a_b_cd, ab_c_d * a_b_cd])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub eta1: f64,
    pub eta2: f64,
    pub direct: [f64; 3],
    pub predicted: [f64; 3],
    pub max_dev: f64,
}

pub fn decomposition_from_values(eta1: f64, eta2: f64, direct: [f64; 3]) -> Result<DecompositionReport, CrossRatioError> {
    let predicted = decomposition_predict(eta1, eta2)?;
    let max_dev = direct
        .iter()
        .zip(&predicted)
        .map(|(d, p)| (d - p).abs())
        .fold(0.0, f64::max);
    Ok(DecompositionReport {
        eta1,
        eta2,
        direct,
        predicted,
        max_dev,
    })
}

/// Four consecutive intervals `a, b, c, d` with endpoints `e[0..5]`.
pub fn decomposition_check(table: &EtaTable, e: [usize; 5]) -> Result<DecompositionReport, CrossRatioError> {
    if !is_cyclic(&e, table.n_endpoints) {
        return Err(CrossRatioError::BadEndpoints(e.to_vec()));
    }
    let eta1 = table.eta(&[e[0], e[1], e[2], e[3]])?;
    let eta2 = table.eta(&[e[1], e[2], e[3], e[4]])?;
    let direct = [
        table.eta(&[e[0], e[2], e[3], e[4]])?,
        table.eta(&[e[0], e[1], e[2], e[4]])?,
        table.eta(&[e[0], e[1], e[3], e[4]])?,
    ];
    decomposition_from_values(eta1, eta2, direct)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CSpread {
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub count: usize,
}

pub fn constant_c_check(table: &EtaTable) -> CSpread {
    let cs: Vec<f64> = table
        .entries
        .values()
        .filter(|e| !e.degenerate)
        .map(|e| e.c_tot)
        .collect();
    let min = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CSpread {
        min,
        max,
        spread: if cs.is_empty() { 0.0 } else { max - min },
        count: cs.len(),
    }
}

/// `eta_{a_i} - (1 - eta_{a_{i-1}})(1 - eta_{a_{i+1}})`, largest over a five-interval partition.
pub fn five_interval_residual(table: &EtaTable, e: [usize; 5]) -> Result<f64, CrossRatioError> {
    let eta_at = |i: usize| table.eta(&[e[(i + 4) % 5], e[i], e[(i + 1) % 5], e[(i + 2) % 5]]);
    let etas: Vec<f64> = (0..5).map(eta_at).collect::<Result<_, _>>()?;
    Ok((0..5)
        .map(|i| (etas[i] - (1.0 - etas[(i + 4) % 5]) * (1.0 - etas[(i + 1) % 5])).abs())
        .fold(0.0, f64::max))
}

fn chord(t1: f64, t2: f64) -> f64 {
    2.0 * (0.5 * (t2 - t1)).sin().abs()
}

/// `l_a l_c / (l_ab l_bc)` for the points keyed by `k`.
pub fn geometric_cross_ratio(angles: &[f64], k: &TripleKey) -> f64 {
    let t = |i: usize| angles[k[i]];
    chord(t(0), t(1)) * chord(t(2), t(3)) / (chord(t(0), t(2)) * chord(t(1), t(3)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleEmbedding {
    pub angles: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub anchors: [f64; 3],
    pub allow_degenerate: bool,
    /// Largest tolerated mismatch on the triples that close the circle.
    pub closure_tol: f64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            anchors: [0.0, TAU / 3.0, 2.0 * TAU / 3.0],
            allow_degenerate: false,
            closure_tol: 1e-6,
        }
    }
}

/// Places endpoints one at a time: three anchors fix the gauge, and each
/// further endpoint solves `eta(i-3, i-2, i-1, i) = eta_g` by bisection.
pub fn circle_embed(table: &EtaTable, opts: &EmbedOptions) -> Result<CircleEmbedding, CrossRatioError> {
    let n = table.n_endpoints;
    let [t0, t1, t2] = opts.anchors;
    if n < 4 || !(t0 < t1 && t1 < t2 && t2 < t0 + TAU) {
        return Err(CrossRatioError::BadEndpoints(vec![n]));
    }
    let mut angles = vec![t0, t1, t2];
    for i in 3..n {
        let key = [i - 3, i - 2, i - 1, i];
        let entry = table.get(&key).ok_or(CrossRatioError::Missing(key))?;
        let target = match (entry.usable(), entry.eta, opts.allow_degenerate) {
            (Some(e), _, _) => e,
            (None, Some(e), true) => e,
            _ => return Err(CrossRatioError::DegenerateEntry(key)),
        };
        let g = |th: f64| {
            let mut a = angles.clone();
            a.push(th);
            geometric_cross_ratio(&a, &key)
        };
        let mut lo = angles[i - 1] + 1e-12;
        let mut hi = t0 + TAU - 1e-12;
        let (glo, ghi) = (g(lo), g(hi));
        // Also rejects NaN endpoints.
        if glo.partial_cmp(&ghi) != Some(std::cmp::Ordering::Less) {
            return Err(CrossRatioError::InconsistentTable {
                key,
                reason: "empty bracket".into(),
            });
        }
        if target < glo || target > ghi {
            if !opts.allow_degenerate {
                return Err(CrossRatioError::InconsistentTable {
                    key,
                    reason: format!("eta = {target} outside reachable range [{glo}, {ghi}]"),
                });
            }
            angles.push(if target < glo { lo } else { hi });
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        angles.push(0.5 * (lo + hi));
    }
    let emb = CircleEmbedding { angles };
    for j in 0..3 {
        let key = [(n - 3 + j) % n, (n - 2 + j) % n, (n - 1 + j) % n, j % n];
        if let Some(eta) = table.get(&key).and_then(|e| e.usable()) {
            let dev = (eta - geometric_cross_ratio(&emb.angles, &key)).abs();
            if dev > opts.closure_tol {
                return Err(CrossRatioError::InconsistentTable {
                    key,
                    reason: format!("closing triple misses by {dev:e}"),
                });
            }
        }
    }
    Ok(emb)
}

/// Largest `|eta - eta_g|` over all usable entries.
pub fn verify_embedding(table: &EtaTable, emb: &CircleEmbedding) -> f64 {
    table
        .keys()
        .iter()
        .filter_map(|k| {
            let eta = table.get(k)?.usable()?;
            Some((eta - geometric_cross_ratio(&emb.angles, k)).abs())
        })
        .fold(0.0, f64::max)
}

/// Angle of `(a z + b) / (conj(b) z + conj(a))` with `z = e^{i theta}`; a circle-preserving Mobius map for `|a| > |b|`.
pub fn mobius_circle(theta: f64, a: Complex64, b: Complex64) -> f64 {
    let z = Complex64::from_polar(1.0, theta);
    ((a * z + b) / (b.conj() * z + a.conj())).arg()
}

/// Angles unwrapped to increase from `angles[0]` within one turn.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    for (i, &t) in angles.iter().enumerate() {
        if i == 0 {
            out.push(t);
            continue;
        }
        let mut u = t;
        while u <= out[i - 1] {
            u += TAU;
        }
        while u - out[i - 1] > TAU {
            u -= TAU;
        }
        out.push(u);
    }
    out
}
