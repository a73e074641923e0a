//! Entropy combinations on a conformal ruler, the `(c_tot, eta)` solver,
//! modular-Hamiltonian combinations and the diagnostics built from them.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::cftmodel::CftError;
use crate::edoracle::OracleError;
use crate::gaussian::GaussianError;
use crate::lattice::{deform_ruler, BulkMove, ConformalRuler, Lattice, LatticeError, Region};
use crate::pairstates::PairStateError;

/// Strong-subadditivity slack: raw combinations in `(-TOL_SSA, 0)` are clamped to zero.
pub const TOL_SSA: f64 = 1e-8;
/// Weights with magnitude at or below this are dropped from a combination.
const WEIGHT_EPS: f64 = 1e-14;
/// `|c_-|` below this is treated as a nonchiral state.
pub const NONCHIRAL_THRESHOLD: f64 = 0.05;

#[derive(thiserror::Error, Debug)]
pub enum BackendError {
    #[error("backend does not provide {0}")]
    Capability(&'static str),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    PairState(#[from] PairStateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Cft(#[from] CftError),
}

#[derive(thiserror::Error, Debug)]
pub enum RulerError {
    #[error("strong subadditivity violated: {which} = {value:e}")]
    SsaViolation { which: &'static str, value: f64 },
    #[error("solver inputs must be finite and nonnegative, got delta = {delta}, i = {i}")]
    NegativeInput { delta: f64, i: f64 },
    #[error("state is not chiral (c_minus = {0:.3e})")]
    NonchiralState(f64),
    #[error("variance {0:e} is negative beyond round-off")]
    NegativeVariance(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Weighted sum of modular Hamiltonians `sum_i w_i K_{X_i}`, merged by region.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModularCombo {
    terms: Vec<(Region, f64)>,
}

impl ModularCombo {
    pub fn new<I: IntoIterator<Item = (Region, f64)>>(terms: I) -> Self {
        let mut merged: BTreeMap<Region, f64> = BTreeMap::new();
        for (r, w) in terms {
            if r.is_empty() {
                continue;
            }
            *merged.entry(r).or_insert(0.0) += w;
        }
        ModularCombo {
            terms: merged
                .into_iter()
                .filter(|(_, w)| w.abs() > WEIGHT_EPS)
                .collect(),
        }
    }

    pub fn single(region: Region) -> Self {
        ModularCombo::new([(region, 1.0)])
    }

    pub fn terms(&self) -> &[(Region, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support(&self) -> Region {
        Region::union_all(self.terms.iter().map(|(r, _)| r))
    }

    pub fn scaled(&self, s: f64) -> Self {
        ModularCombo::new(self.terms.iter().map(|(r, w)| (r.clone(), s * w)))
    }

    pub fn plus(&self, other: &ModularCombo) -> Self {
        ModularCombo::new(self.terms.iter().chain(other.terms.iter()).cloned())
    }
}

/// A quantum state that can report entanglement entropies and, optionally,
/// moments of modular-Hamiltonian combinations.
pub trait StateBackend: Send + Sync {
    fn entropy(&self, region: &Region) -> Result<f64, BackendError>;

    fn supports_moments(&self) -> bool {
        false
    }

    /// `<O>` for the Hermitian combination `O`.
    fn combo_mean(&self, _combo: &ModularCombo) -> Result<f64, BackendError> {
        Err(BackendError::Capability("modular moments"))
    }

    /// `<O1 O2>`; complex because `O1` and `O2` need not commute.
    fn combo_moment(
        &self,
        _a: &ModularCombo,
        _b: &ModularCombo,
    ) -> Result<Complex64, BackendError> {
        Err(BackendError::Capability("modular moments"))
    }

    fn combo_variance(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        let m = self.combo_mean(combo)?;
        Ok(self.combo_moment(combo, combo)?.re - m * m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyCombinations {
    pub delta: f64,
    pub i: f64,
    pub raw_delta: f64,
    pub raw_i: f64,
}

fn clamp_ssa(which: &'static str, v: f64, tol: f64) -> Result<f64, RulerError> {
    if v < -tol {
        Err(RulerError::SsaViolation { which, value: v })
    } else {
        Ok(v.max(0.0))
    }
}

/// `Delta = S_AA'B + S_BCC' - S_AA' - S_CC'` and `I = S_AB + S_BC - S_B - S_ABC`.
pub fn entropy_combinations(
    backend: &dyn StateBackend,
    ruler: &ConformalRuler,
    tol_ssa: f64,
) -> Result<EntropyCombinations, RulerError> {
    let s = |r: &Region| -> Result<f64, RulerError> {
        if r.is_empty() {
            Ok(0.0)
        } else {
            Ok(backend.entropy(r)?)
        }
    };
    let aa = ruler.a.union(&ruler.a_prime);
    let cc = ruler.c.union(&ruler.c_prime);
    let ab = ruler.a.union(&ruler.b);
    let bc = ruler.b.union(&ruler.c);
    let raw_delta = s(&aa.union(&ruler.b))? + s(&cc.union(&ruler.b))? - s(&aa)? - s(&cc)?;
    let raw_i = s(&ab)? + s(&bc)? - s(&ruler.b)? - s(&ab.union(&ruler.c))?;
    Ok(EntropyCombinations {
        delta: clamp_ssa("delta", raw_delta, tol_ssa)?,
        i: clamp_ssa("i", raw_i, tol_ssa)?,
        raw_delta,
        raw_i,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    DeltaZero,
    IZero,
    BothZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CTotEta {
    pub c_tot: f64,
    /// `None` when both inputs vanish and `eta` is undetermined.
    pub eta: Option<f64>,
    pub degenerate: Option<Degeneracy>,
}

/// Solves `exp(-6 Delta / c) + exp(-6 I / c) = 1` for `c_tot`, with `eta = exp(-6 Delta / c)`.
pub fn solve_c_eta(delta: f64, i: f64) -> Result<CTotEta, RulerError> {
    if !(delta.is_finite() && i.is_finite() && delta >= 0.0 && i >= 0.0) {
        return Err(RulerError::NegativeInput { delta, i });
    }
    let degenerate = |eta, d| CTotEta {
        c_tot: 0.0,
        eta,
        degenerate: Some(d),
    };
    match (delta == 0.0, i == 0.0) {
        (true, true) => return Ok(degenerate(None, Degeneracy::BothZero)),
        (true, false) => return Ok(degenerate(Some(1.0), Degeneracy::DeltaZero)),
        (false, true) => return Ok(degenerate(Some(0.0), Degeneracy::IZero)),
        _ => {}
    }
    // x = 6 / c; f(x) = e^{-delta x} + e^{-i x} decreases from 2 to 0.
    let f = |x: f64| (-delta * x).exp() + (-i * x).exp() - 1.0;
    let (small, large) = if delta < i { (delta, i) } else { (i, delta) };
    let mut lo = LN_2 / large;
    let mut hi = LN_2 / small;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..4 {
        let df = -delta * (-delta * x).exp() - i * (-i * x).exp();
        let step = f(x) / df;
        let next = x - step;
        if !(next.is_finite() && next > 0.0) {
            break;
        }
        x = next;
        if step.abs() <= 1e-17 * x {
            break;
        }
    }
    Ok(CTotEta {
        c_tot: 6.0 / x,
        eta: Some((-delta * x).exp()),
        degenerate: None,
    })
}

/// Natural-log binary entropy.
pub fn binary_entropy(p: f64) -> f64 {
    let t = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    t(p) + t(1.0 - p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropertyResiduals {
    /// `(Delta - I) eta + I - (c/6) h(eta)`.
    pub tangent: f64,
    /// `Delta - I - (c/6) h'(eta)`, with `h'(eta) = ln(1 - eta) - ln eta`.
    pub slope: f64,
    /// `3 (Delta + I) / ln 2`, an upper bound on `c_tot`.
    pub c_upper: f64,
    pub bound_ok: bool,
}

pub fn c_eta_properties(delta: f64, i: f64, sol: &CTotEta) -> Option<PropertyResiduals> {
    let eta = sol.eta?;
    if sol.degenerate.is_some() {
        return None;
    }
    let k = sol.c_tot / 6.0;
    let c_upper = 3.0 * (delta + i) / LN_2;
    Some(PropertyResiduals {
        tangent: (delta - i) * eta + i - k * binary_entropy(eta),
        slope: delta - i - k * ((1.0 - eta).ln() - eta.ln()),
        c_upper,
        bound_ok: sol.c_tot <= c_upper * (1.0 + 1e-12),
    })
}

pub fn delta_hat(ruler: &ConformalRuler) -> ModularCombo {
    let aa = ruler.a.union(&ruler.a_prime);
    let cc = ruler.c.union(&ruler.c_prime);
    ModularCombo::new([
        (aa.union(&ruler.b), 1.0),
        (cc.union(&ruler.b), 1.0),
        (aa, -1.0),
        (cc, -1.0),
    ])
}

pub fn i_hat(ruler: &ConformalRuler) -> ModularCombo {
    let ab = ruler.a.union(&ruler.b);
    let bc = ruler.b.union(&ruler.c);
    let abc = ab.union(&ruler.c);
    ModularCombo::new([
        (ab, 1.0),
        (bc, 1.0),
        (ruler.b.clone(), -1.0),
        (abc, -1.0),
    ])
}

/// `x Delta_hat + (1 - x) I_hat`.
pub fn kd_combo(ruler: &ConformalRuler, x: f64) -> ModularCombo {
    delta_hat(ruler)
        .scaled(x)
        .plus(&i_hat(ruler).scaled(1.0 - x))
}

/// Standard deviation of a combination in the backend state.
pub fn sigma_of_combo(backend: &dyn StateBackend, combo: &ModularCombo) -> Result<f64, RulerError> {
    if combo.is_empty() {
        return Ok(0.0);
    }
    let var = backend.combo_variance(combo)?;
    if var < -1e-10 {
        return Err(RulerError::NegativeVariance(var));
    }
    Ok(var.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaKOptions {
    pub grid_n: usize,
    pub refine_width: f64,
    /// Relative spread of the grid below which the curve counts as flat.
    pub flat_tol: f64,
}

impl Default for EtaKOptions {
    fn default() -> Self {
        EtaKOptions {
            grid_n: 101,
            refine_width: 1e-6,
            flat_tol: 1e-9,
        }
    }
}

/// `sigma^2(x) = a x^2 + b x + c` through `x = 0, 1/2, 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticFit {
    pub fn through(s0: f64, s_half: f64, s1: f64) -> Self {
        QuadraticFit {
            a: 2.0 * s0 - 4.0 * s_half + 2.0 * s1,
            b: -3.0 * s0 + 4.0 * s_half - s1,
            c: s0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    /// Minimiser on `[0, 1]` when the parabola is convex.
    pub fn vertex(&self) -> Option<f64> {
        (self.a > 0.0).then(|| (-self.b / (2.0 * self.a)).clamp(0.0, 1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaK {
    pub eta_k: f64,
    pub sigma_min: f64,
    pub flat: bool,
    pub grid: Vec<(f64, f64)>,
    pub fit: QuadraticFit,
    /// Largest `|sigma^2_grid - fit|` over the grid.
    pub fit_residual: f64,
    pub vertex: Option<f64>,
    pub bracket_width: f64,
}

/// Minimises `sigma(K(x))` over `x in [0, 1]`: grid scan, then golden section
/// seeded at the global grid minimum.
pub fn find_eta_k(
    backend: &dyn StateBackend,
    ruler: &ConformalRuler,
    opts: &EtaKOptions,
) -> Result<EtaK, RulerError> {
    if opts.grid_n < 3 || opts.refine_width <= 0.0 {
        return Err(RulerError::InvalidParameter(format!(
            "grid_n = {} must be >= 3 and refine_width > 0",
            opts.grid_n
        )));
    }
    let sigma = |x: f64| sigma_of_combo(backend, &kd_combo(ruler, x));
    let n = opts.grid_n;
    let mut grid = Vec::with_capacity(n);
    for k in 0..n {
        let x = k as f64 / (n - 1) as f64;
        grid.push((x, sigma(x)?));
    }
    let fit = QuadraticFit::through(grid[0].1.powi(2), sigma(0.5)?.powi(2), grid[n - 1].1.powi(2));
    let fit_residual = grid
        .iter()
        .map(|(x, s)| (s * s - fit.eval(*x)).abs())
        .fold(0.0, f64::max);

    let (kmin, &(xmin, smin)) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("grid is nonempty");
    let smax = grid.iter().map(|g| g.1).fold(f64::MIN, f64::max);
    if smax - smin <= opts.flat_tol * (1.0 + smax) {
        return Ok(EtaK {
            eta_k: xmin,
            sigma_min: smin,
            flat: true,
            grid,
            fit,
            fit_residual,
            vertex: fit.vertex(),
            bracket_width: 1.0,
        });
    }

    let mut lo = grid[kmin.saturating_sub(1)].0;
    let mut hi = grid[(kmin + 1).min(n - 1)].0;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = sigma(x1)?;
    let mut f2 = sigma(x2)?;
    while hi - lo > opts.refine_width {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sigma(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sigma(x2)?;
        }
    }
    let mut eta_k = 0.5 * (lo + hi);
    let mut sigma_min = sigma(eta_k)?.min(f1).min(f2);
    if sigma_min < sigma(eta_k)? {
        (eta_k, sigma_min) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    }
    if smin < sigma_min {
        eta_k = xmin;
        sigma_min = smin;
    }
    Ok(EtaK {
        eta_k,
        sigma_min,
        flat: false,
        grid,
        fit,
        fit_residual,
        vertex: fit.vertex(),
        bracket_width: hi - lo,
    })
}

/// `J(A, B, C) = i <[K_AB, K_BC]>`.
pub fn modular_commutator(
    backend: &dyn StateBackend,
    a: &Region,
    b: &Region,
    c: &Region,
) -> Result<f64, RulerError> {
    let kab = ModularCombo::single(a.union(b));
    let kbc = ModularCombo::single(b.union(c));
    Ok(-2.0 * backend.combo_moment(&kab, &kbc)?.im)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaJ {
    pub eta_j: f64,
    pub c_minus: f64,
    pub j_inner: f64,
    pub j_outer: f64,
}

/// `eta_J` and `c_-` from `J(AA', B, CC')` and `J(A, B, C)`.
pub fn eta_j_pair(backend: &dyn StateBackend, ruler: &ConformalRuler) -> Result<EtaJ, RulerError> {
    let j_inner = modular_commutator(backend, &ruler.a, &ruler.b, &ruler.c)?;
    let j_outer = modular_commutator(
        backend,
        &ruler.a.union(&ruler.a_prime),
        &ruler.b,
        &ruler.c.union(&ruler.c_prime),
    )?;
    let c_minus = 3.0 * (j_outer - j_inner) / PI;
    if c_minus.abs() < NONCHIRAL_THRESHOLD {
        return Err(RulerError::NonchiralState(c_minus));
    }
    Ok(EtaJ {
        eta_j: -j_inner / (j_outer - j_inner),
        c_minus,
        j_inner,
        j_outer,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GenericityReport {
    /// Gram determinant of the normalised `{Delta_1 Psi, Delta_2 Psi, Psi}`.
    pub gram_det: f64,
    /// `i <[Delta_1, Delta_2]>`.
    pub commutator: f64,
    /// `(pi c_- / 3)(1 - eta_1 - eta_2)`.
    pub predicted: f64,
}

/// `ruler_abc` probes `(a, b, c)` and `ruler_bcd` probes `(b, c, d)` on the same state.
pub fn genericity_gram(
    backend: &dyn StateBackend,
    ruler_abc: &ConformalRuler,
    ruler_bcd: &ConformalRuler,
    c_minus: f64,
    eta1: f64,
    eta2: f64,
) -> Result<GenericityReport, RulerError> {
    let d1 = delta_hat(ruler_abc);
    let d2 = delta_hat(ruler_bcd);
    let m1 = backend.combo_mean(&d1)?;
    let m2 = backend.combo_mean(&d2)?;
    let g11 = backend.combo_moment(&d1, &d1)?.re;
    let g22 = backend.combo_moment(&d2, &d2)?.re;
    let g12 = backend.combo_moment(&d1, &d2)?;
    // det of the Gram of {1, Delta_1, Delta_2} acting on Psi equals the
    // covariance determinant.
    let c11 = g11 - m1 * m1;
    let c22 = g22 - m2 * m2;
    let c12 = g12 - Complex64::new(m1 * m2, 0.0);
    let det = c11 * c22 - c12.norm_sqr();
    let norm = g11 * g22;
    Ok(GenericityReport {
        gram_det: if norm > 0.0 { det / norm } else { 0.0 },
        commutator: -2.0 * g12.im,
        predicted: PI * c_minus / 3.0 * (1.0 - eta1 - eta2),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct A1Residual {
    /// `S_BC + S_CD - S_B - S_D`.
    pub delta: f64,
    /// `sigma(K_BC + K_CD - K_B - K_D)`, when the backend has moments.
    pub sigma: Option<f64>,
}

pub fn bulk_a1_residual(
    backend: &dyn StateBackend,
    b: &Region,
    c: &Region,
    d: &Region,
) -> Result<A1Residual, RulerError> {
    let bc = b.union(c);
    let cd = c.union(d);
    let delta = backend.entropy(&bc)? + backend.entropy(&cd)? - backend.entropy(b)? - backend.entropy(d)?;
    let sigma = if backend.supports_moments() {
        let combo = ModularCombo::new([(bc, 1.0), (cd, 1.0), (b.clone(), -1.0), (d.clone(), -1.0)]);
        Some(sigma_of_combo(backend, &combo)?)
    } else {
        None
    };
    Ok(A1Residual { delta, sigma })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeformationResidual {
    pub d_delta: f64,
    pub d_i: f64,
}

/// `|Delta' - Delta|` and `|I' - I|` when `mv` deforms the ruler in the bulk.
pub fn deformation_residual(
    backend: &dyn StateBackend,
    lattice: &Lattice,
    ruler: &ConformalRuler,
    mv: &BulkMove,
) -> Result<DeformationResidual, RulerError> {
    let moved = deform_ruler(lattice, ruler, mv)?;
    let before = entropy_combinations(backend, ruler, TOL_SSA)?;
    let after = entropy_combinations(backend, &moved, TOL_SSA)?;
    Ok(DeformationResidual {
        d_delta: (after.raw_delta - before.raw_delta).abs(),
        d_i: (after.raw_i - before.raw_i).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RulerOptions {
    pub tol_ssa: f64,
    pub eta_k: EtaKOptions,
    pub with_eta_j: bool,
}

impl Default for RulerOptions {
    fn default() -> Self {
        RulerOptions {
            tol_ssa: TOL_SSA,
            eta_k: EtaKOptions::default(),
            with_eta_j: true,
        }
    }
}

/// Everything one ruler measures on one state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RulerReport {
    pub delta: f64,
    pub i: f64,
    pub c_tot: f64,
    pub eta: Option<f64>,
    pub eta_j: Option<f64>,
    pub c_minus: Option<f64>,
    pub eta_k: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_at_eta: Option<f64>,
    pub flat: Option<bool>,
    pub nonchiral: bool,
}

pub fn run_ruler(
    backend: &dyn StateBackend,
    ruler: &ConformalRuler,
    opts: &RulerOptions,
) -> Result<RulerReport, RulerError> {
    Ok(run_ruler_with_scan(backend, ruler, opts)?.0)
}

/// [`run_ruler`], also returning the `sigma` scan when the backend has moments.
pub fn run_ruler_with_scan(
    backend: &dyn StateBackend,
    ruler: &ConformalRuler,
    opts: &RulerOptions,
) -> Result<(RulerReport, Option<EtaK>), RulerError> {
    let ent = entropy_combinations(backend, ruler, opts.tol_ssa)?;
    let sol = solve_c_eta(ent.delta, ent.i)?;
    let mut report = RulerReport {
        delta: ent.delta,
        i: ent.i,
        c_tot: sol.c_tot,
        eta: sol.eta,
        eta_j: None,
        c_minus: None,
        eta_k: None,
        sigma_min: None,
        sigma_at_eta: None,
        flat: None,
        nonchiral: false,
    };
    if !backend.supports_moments() {
        return Ok((report, None));
    }
    if opts.with_eta_j {
        match eta_j_pair(backend, ruler) {
            Ok(ej) => {
                report.eta_j = Some(ej.eta_j);
                report.c_minus = Some(ej.c_minus);
            }
            Err(RulerError::NonchiralState(c)) => {
                report.c_minus = Some(c);
                report.nonchiral = true;
            }
            Err(e) => return Err(e),
        }
    }
    let ek = find_eta_k(backend, ruler, &opts.eta_k)?;
    report.eta_k = Some(ek.eta_k);
    report.sigma_min = Some(ek.sigma_min);
    report.flat = Some(ek.flat);
    if let Some(eta) = sol.eta {
        report.sigma_at_eta = Some(sigma_of_combo(backend, &kd_combo(ruler, eta))?);
    }
    Ok((report, Some(ek)))
}
