//! Fermionic Gaussian states in the Majorana representation.
//!
//! Mode `j` carries Majoranas `gamma_{2j} = a_j + a_j^dag` and
//! `gamma_{2j+1} = i (a_j^dag - a_j)`. The covariance matrix is
//! `Gamma_{jk} = (i/2) <[gamma_j, gamma_k]>`, so `<gamma_j gamma_k> = delta_{jk} - i Gamma_{jk}`.
//! Quadratic operators are written `O = (i/4) sum_{jk} A_{jk} gamma_j gamma_k + offset`
//! with `A` real antisymmetric.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{linalg::Schur, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, Region};
use crate::ruler::{binary_entropy, BackendError, ModularCombo, StateBackend};

/// Modes with `nu >= 1 - EPS_KER` are treated as pure: zero weight, zero offset.
pub const EPS_KER: f64 = 1e-12;
/// Bogoliubov energies below this count as zero modes.
pub const ZERO_MODE_TOL: f64 = 1e-10;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum GaussianError {
    #[error("covariance must be square of even size, got {0}x{1}")]
    BadShape(usize, usize),
    #[error("matrix is not real antisymmetric (deviation {0:e})")]
    NotAntisymmetric(f64),
    #[error("covariance eigenvalue {0} lies outside [-1, 1]")]
    NotPhysical(f64),
    #[error("Hamiltonian has a Bogoliubov zero mode (energy {0:e}); ground state is degenerate")]
    DegenerateGroundState(f64),
    #[error("Hamiltonian is not Hermitian (imaginary residue {0:e})")]
    NotHermitian(f64),
    #[error("region contains site {site} but the state has {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("real Schur decomposition did not converge")]
    SchurFailed,
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..=i {
            d = d.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    d
}

/// Real antisymmetric `2n x 2n` covariance of an `n`-mode Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaCovariance {
    gamma: DMatrix<f64>,
}

impl MajoranaCovariance {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self, GaussianError> {
        let (r, c) = gamma.shape();
        if r != c || r % 2 != 0 {
            return Err(GaussianError::BadShape(r, c));
        }
        let d = antisymmetry_defect(&gamma);
        if d > 1e-10 {
            return Err(GaussianError::NotAntisymmetric(d));
        }
        Ok(MajoranaCovariance { gamma })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.nrows() / 2
    }

    /// Covariance of the modes listed in `region` (in its sorted order).
    pub fn restrict(&self, region: &Region) -> Result<MajoranaCovariance, GaussianError> {
        let idx = majorana_indices(region, self.n_modes())?;
        let m = idx.len();
        let g = DMatrix::from_fn(m, m, |i, j| self.gamma[(idx[i], idx[j])]);
        Ok(MajoranaCovariance { gamma: g })
    }

    /// `max |Gamma^2 + 1|`; zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        let sq = &self.gamma * &self.gamma;
        let n = sq.nrows();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { -1.0 } else { 0.0 };
                d = d.max((sq[(i, j)] - target).abs());
            }
        }
        d
    }
}

fn majorana_indices(region: &Region, n_modes: usize) -> Result<Vec<usize>, GaussianError> {
    let mut idx = Vec::with_capacity(2 * region.len());
    for &s in region.sites() {
        if s >= n_modes {
            return Err(GaussianError::SiteOutOfRange {
                site: s,
                n_sites: n_modes,
            });
        }
        idx.push(2 * s);
        idx.push(2 * s + 1);
    }
    Ok(idx)
}

/// Real orthogonal `Q` and block values `b_k` with `Q^T M Q = diag(b_k J)`,
/// `J = [[0, 1], [-1, 0]]`. Block `k` occupies columns `2k, 2k + 1` of `Q`.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub q: DMatrix<f64>,
    pub blocks: Vec<f64>,
}

/// Canonical form of a real antisymmetric matrix via the real Schur decomposition.
pub fn canonical_form(m: &DMatrix<f64>) -> Result<CanonicalForm, GaussianError> {
    check_antisymmetric(m)?;
    let n = m.nrows();
    if m.amax() == 0.0 {
        // nalgebra's Schur iteration does not converge on the zero matrix.
        return Ok(CanonicalForm {
            q: DMatrix::identity(n, n),
            blocks: vec![0.0; n / 2],
        });
    }
    let scale = m.amax().max(1.0);
    let (q, t) = Schur::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(GaussianError::SchurFailed)?
        .unpack();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(n / 2);
    let mut singles: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
            pairs.push((i, i + 1, 0.5 * (t[(i, i + 1)] - t[(i + 1, i)])));
            i += 2;
        } else {
            singles.push(i);
            i += 1;
        }
    }
    // Real eigenvalues of an antisymmetric matrix vanish; pair them up.
    for w in singles.chunks(2) {
        pairs.push((w[0], w[1], 0.0));
    }
    let mut qo = DMatrix::zeros(n, n);
    let mut blocks = Vec::with_capacity(n / 2);
    for (k, (i, j, b)) in pairs.into_iter().enumerate() {
        qo.set_column(2 * k, &q.column(i));
        qo.set_column(2 * k + 1, &q.column(j));
        blocks.push(b);
    }
    Ok(CanonicalForm { q: qo, blocks })
}

/// Quadratic operator `(i/4) gamma^T A gamma + offset` on the modes of `support`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub coefficient: DMatrix<f64>,
    pub offset: f64,
    pub support: Region,
}

impl QuadraticForm {
    pub fn identity(support: Region) -> Self {
        let m = 2 * support.len();
        QuadraticForm {
            coefficient: DMatrix::zeros(m, m),
            offset: 1.0,
            support,
        }
    }

    /// Same operator written on the larger mode set `target`.
    pub fn embed(&self, target: &Region) -> DMatrix<f64> {
        let m = 2 * target.len();
        let mut out = DMatrix::zeros(m, m);
        self.add_into(&mut out, target, 1.0);
        out
    }

    fn add_into(&self, out: &mut DMatrix<f64>, target: &Region, w: f64) {
        let pos: Vec<usize> = self
            .support
            .sites()
            .iter()
            .flat_map(|s| {
                let p = target.position(*s).expect("support inside target");
                [2 * p, 2 * p + 1]
            })
            .collect();
        for (i, &pi) in pos.iter().enumerate() {
            for (j, &pj) in pos.iter().enumerate() {
                out[(pi, pj)] += w * self.coefficient[(i, j)];
            }
        }
    }
}

/// Spectrum of `Gamma^T Gamma`, i.e. each `nu_k^2` twice, clamped to `[0, 1]`.
fn nu_squared(cov: &MajoranaCovariance) -> Vec<f64> {
    let s = cov.gamma.transpose() * &cov.gamma;
    s.symmetric_eigenvalues()
        .iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect()
}

/// Von Neumann entropy `sum_k h((1 + nu_k) / 2)`.
pub fn gaussian_entropy(cov: &MajoranaCovariance) -> f64 {
    if cov.n_modes() == 0 {
        return 0.0;
    }
    nu_squared(cov)
        .into_iter()
        .map(|s| 0.5 * binary_entropy(0.5 * (1.0 + s.sqrt())))
        .sum()
}

/// `K = -ln rho` as a quadratic form, with `K = 0` on near-pure modes.
///
/// For a block `Gamma = g J` the generator is `k = -2 artanh(g) J`; written
/// as `k = Gamma * phi(Gamma^T Gamma)` this needs no pairing of eigenvectors.
pub fn modular_generator(
    cov: &MajoranaCovariance,
    support: Region,
    eps_ker: f64,
) -> Result<QuadraticForm, GaussianError> {
    let m = cov.gamma.nrows();
    if m != 2 * support.len() {
        return Err(GaussianError::BadShape(m, 2 * support.len()));
    }
    if m == 0 {
        return Ok(QuadraticForm {
            coefficient: DMatrix::zeros(0, 0),
            offset: 0.0,
            support,
        });
    }
    let eig = SymmetricEigen::new(cov.gamma.transpose() * &cov.gamma);
    let mut offset = 0.0;
    let phi: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&s| {
            let s = s.clamp(0.0, 1.0);
            let nu = s.sqrt();
            if nu >= 1.0 - eps_ker {
                0.0
            } else {
                // ln(2 cosh(artanh nu)) per mode, split over its two eigenvalues.
                offset += 0.5 * (2.0 / (1.0 - s).sqrt()).ln();
                if nu < 1e-8 {
                    -2.0 * (1.0 + s / 3.0)
                } else {
                    -2.0 * nu.atanh() / nu
                }
            }
        })
        .collect();
    let v = &eig.eigenvectors;
    let mut vp = v.clone();
    for (j, p) in phi.iter().enumerate() {
        vp.column_mut(j).scale_mut(*p);
    }
    let f = vp * v.transpose();
    let k = &cov.gamma * f;
    let k = (&k - k.transpose()) * 0.5;
    Ok(QuadraticForm {
        coefficient: k,
        offset,
        support,
    })
}

/// `<Q_A>` for `Q_A = (i/4) gamma^T A gamma`.
fn quad_mean(a: &DMatrix<f64>, gamma: &DMatrix<f64>) -> f64 {
    0.25 * a.component_mul(gamma).sum()
}

/// `sum_{jk} X_{jk} Y_{kj}`.
fn trace_prod(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.component_mul(&y.transpose()).sum()
}

/// Connected part of `<Q_A Q_B>` by Wick's theorem.
fn quad_connected(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Complex64 {
    let ag = a * gamma;
    let bg = b * gamma;
    let re = -0.125 * (trace_prod(a, b) + trace_prod(&ag, &bg));
    let im = -0.125 * (trace_prod(a, &bg) - trace_prod(b, &ag));
    Complex64::new(re, im)
}

/// `<O1 O2>` in the Gaussian state `cov` (defined on all modes).
pub fn quad_moment(
    cov: &MajoranaCovariance,
    o1: &QuadraticForm,
    o2: &QuadraticForm,
) -> Result<Complex64, GaussianError> {
    let u = o1.support.union(&o2.support);
    let g = cov.restrict(&u)?;
    let a = o1.embed(&u);
    let b = o2.embed(&u);
    let ma = quad_mean(&a, &g.gamma);
    let mb = quad_mean(&b, &g.gamma);
    let conn = quad_connected(&a, &b, &g.gamma);
    Ok(conn + (ma + o1.offset) * (mb + o2.offset))
}

/// `<O>` in the Gaussian state `cov`.
pub fn quad_expectation(cov: &MajoranaCovariance, o: &QuadraticForm) -> Result<f64, GaussianError> {
    let g = cov.restrict(&o.support)?;
    Ok(quad_mean(&o.coefficient, &g.gamma) + o.offset)
}

fn check_antisymmetric(h: &DMatrix<f64>) -> Result<(), GaussianError> {
    let (r, c) = h.shape();
    if r != c || r % 2 != 0 {
        return Err(GaussianError::BadShape(r, c));
    }
    let d = antisymmetry_defect(h);
    if d > 1e-10 {
        return Err(GaussianError::NotAntisymmetric(d));
    }
    Ok(())
}

/// Ground state of `H = (i/4) gamma^T h gamma`: `Gamma = -h |h|^{-1}`, with
/// `|h| = (h^T h)^{1/2}` from a symmetric eigensolve.
pub fn gaussian_ground_state(h: &DMatrix<f64>) -> Result<MajoranaCovariance, GaussianError> {
    check_antisymmetric(h)?;
    let eig = SymmetricEigen::new(h.transpose() * h);
    let gap = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.max(0.0).sqrt()));
    if gap < ZERO_MODE_TOL {
        return Err(GaussianError::DegenerateGroundState(gap));
    }
    let mut vs = eig.eigenvectors.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / l.sqrt());
    }
    let inv_abs = vs * eig.eigenvectors.transpose();
    let g = -(h * inv_abs);
    MajoranaCovariance::new((&g - g.transpose()) * 0.5)
}

/// Smallest Bogoliubov energy of `h`.
pub fn bogoliubov_gap(h: &DMatrix<f64>) -> Result<f64, GaussianError> {
    check_antisymmetric(h)?;
    let eig = SymmetricEigen::new(h.transpose() * h);
    Ok(eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.max(0.0).sqrt())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

/// Quadratic fermion Hamiltonian as a list of `coeff * f1 * f2` terms.
/// Hermitian conjugates must be listed explicitly.
#[derive(Clone, Debug, Default)]
pub struct FermionTerms {
    pub n_modes: usize,
    pub terms: Vec<(Complex64, Ladder, Ladder)>,
}

impl FermionTerms {
    pub fn new(n_modes: usize) -> Self {
        FermionTerms {
            n_modes,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, c: Complex64, f1: Ladder, f2: Ladder) {
        self.terms.push((c, f1, f2));
    }

    /// Adds `c f1 f2 + conj(c) f2^dag f1^dag`.
    pub fn push_with_hc(&mut self, c: Complex64, f1: Ladder, f2: Ladder) {
        self.push(c, f1, f2);
        self.push(c.conj(), dagger(f2), dagger(f1));
    }

    /// Real antisymmetric `h` with `H = (i/4) gamma^T h gamma + const`.
    pub fn majorana_matrix(&self) -> Result<DMatrix<f64>, GaussianError> {
        let m = 2 * self.n_modes;
        let mut acc = DMatrix::<Complex64>::zeros(m, m);
        let half = Complex64::new(0.5, 0.0);
        let ihalf = Complex64::new(0.0, 0.5);
        let expand = |f: Ladder| -> [(usize, Complex64); 2] {
            match f {
                Ladder::Annihilate(j) => [(2 * j, half), (2 * j + 1, ihalf)],
                Ladder::Create(j) => [(2 * j, half), (2 * j + 1, -ihalf)],
            }
        };
        for &(c, f1, f2) in &self.terms {
            for (m1, u) in expand(f1) {
                for (m2, v) in expand(f2) {
                    acc[(m1, m2)] += c * u * v;
                }
            }
        }
        let mut h = DMatrix::zeros(m, m);
        let mut imag: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let z = Complex64::new(0.0, -2.0) * (acc[(i, j)] - acc[(j, i)]);
                imag = imag.max(z.im.abs());
                h[(i, j)] = z.re;
            }
        }
        if imag > 1e-12 {
            return Err(GaussianError::NotHermitian(imag));
        }
        Ok(h)
    }
}

fn dagger(f: Ladder) -> Ladder {
    match f {
        Ladder::Create(j) => Ladder::Annihilate(j),
        Ladder::Annihilate(j) => Ladder::Create(j),
    }
}

/// Lattice `p + ip` superconductor with open boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipParams {
    pub t: f64,
    pub delta: f64,
    pub mu: f64,
    /// Pairing phase on bond `a` is `exp(i a . A)`.
    pub vector_potential: (f64, f64),
}

impl Default for PipParams {
    fn default() -> Self {
        PipParams {
            t: 1.0,
            delta: 1.0,
            mu: 1.3,
            vector_potential: (0.0, std::f64::consts::FRAC_PI_2),
        }
    }
}

/// Fermion terms of `sum_{r,a} [-t a_r^dag a_{r+a} + Delta e^{i a.A} a_r^dag a_{r+a}^dag + h.c.]
/// - (mu - 4t) sum_r a_r^dag a_r`.
pub fn pip_terms(lattice: &Lattice, p: &PipParams) -> FermionTerms {
    let mut ft = FermionTerms::new(lattice.n_sites());
    let phase = |theta: f64| Complex64::from_polar(p.delta, theta);
    for s in 0..lattice.n_sites() {
        let (x, y) = lattice.coords(s);
        ft.push(
            Complex64::new(-(p.mu - 4.0 * p.t), 0.0),
            Ladder::Create(s),
            Ladder::Annihilate(s),
        );
        let mut bonds = Vec::with_capacity(2);
        if x + 1 < lattice.width() {
            bonds.push((lattice.index(x + 1, y), p.vector_potential.0));
        }
        if y + 1 < lattice.height() {
            bonds.push((lattice.index(x, y + 1), p.vector_potential.1));
        }
        for (n, theta) in bonds {
            ft.push_with_hc(
                Complex64::new(-p.t, 0.0),
                Ladder::Create(s),
                Ladder::Annihilate(n),
            );
            ft.push_with_hc(phase(theta), Ladder::Create(s), Ladder::Create(n));
        }
    }
    ft
}

pub fn pip_ground_state(lattice: &Lattice, p: &PipParams) -> Result<MajoranaCovariance, GaussianError> {
    if !(p.t.is_finite() && p.delta.is_finite() && p.mu.is_finite()) {
        return Err(GaussianError::InvalidParameter(format!("{p:?}")));
    }
    gaussian_ground_state(&pip_terms(lattice, p).majorana_matrix()?)
}

/// Ground state of a random quadratic Hamiltonian on `n_modes` modes.
pub fn random_pure_state<R: Rng + ?Sized>(
    n_modes: usize,
    rng: &mut R,
) -> Result<MajoranaCovariance, GaussianError> {
    let m = 2 * n_modes;
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v: f64 = rng.sample(StandardNormal);
            h[(i, j)] = v;
            h[(j, i)] = -v;
        }
    }
    gaussian_ground_state(&h)
}

/// Gaussian state as a [`StateBackend`], with modular generators cached per region.
pub struct GaussianBackend {
    cov: MajoranaCovariance,
    /// Pure states give `S(X) = S(complement)`, so large regions are swapped out.
    pure: bool,
    eps_ker: f64,
    forms: Mutex<HashMap<Region, Arc<QuadraticForm>>>,
    entropies: Mutex<HashMap<Region, f64>>,
}

impl GaussianBackend {
    pub fn new(cov: MajoranaCovariance) -> Self {
        GaussianBackend {
            pure: cov.purity_defect() < 1e-10,
            cov,
            eps_ker: EPS_KER,
            forms: Mutex::new(HashMap::new()),
            entropies: Mutex::new(HashMap::new()),
        }
    }

    pub fn covariance(&self) -> &MajoranaCovariance {
        &self.cov
    }

    pub fn modular_form(&self, region: &Region) -> Result<Arc<QuadraticForm>, GaussianError> {
        if let Some(f) = self.forms.lock().unwrap().get(region) {
            return Ok(f.clone());
        }
        let sub = self.cov.restrict(region)?;
        let f = Arc::new(modular_generator(&sub, region.clone(), self.eps_ker)?);
        self.forms
            .lock()
            .unwrap()
            .insert(region.clone(), f.clone());
        Ok(f)
    }

    /// Sum of weighted modular forms written on `support`.
    fn combo_form(&self, combo: &ModularCombo, support: &Region) -> Result<(DMatrix<f64>, f64), GaussianError> {
        let m = 2 * support.len();
        let mut a = DMatrix::zeros(m, m);
        let mut offset = 0.0;
        for (r, w) in combo.terms() {
            let f = self.modular_form(r)?;
            f.add_into(&mut a, support, *w);
            offset += w * f.offset;
        }
        Ok((a, offset))
    }
}

impl StateBackend for GaussianBackend {
    fn entropy(&self, region: &Region) -> Result<f64, BackendError> {
        if let Some(s) = self.entropies.lock().unwrap().get(region) {
            return Ok(*s);
        }
        let n = self.cov.n_modes();
        let s = if self.pure && 2 * region.len() > n {
            majorana_indices(region, n)?;
            gaussian_entropy(&self.cov.restrict(&region.complement(n))?)
        } else {
            gaussian_entropy(&self.cov.restrict(region)?)
        };
        self.entropies.lock().unwrap().insert(region.clone(), s);
        Ok(s)
    }

    fn supports_moments(&self) -> bool {
        true
    }

    fn combo_mean(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        let u = combo.support();
        let (a, off) = self.combo_form(combo, &u)?;
        let g = self.cov.restrict(&u)?;
        Ok(quad_mean(&a, g.matrix()) + off)
    }

    fn combo_moment(&self, c1: &ModularCombo, c2: &ModularCombo) -> Result<Complex64, BackendError> {
        let u = c1.support().union(&c2.support());
        let (a, oa) = self.combo_form(c1, &u)?;
        let (b, ob) = self.combo_form(c2, &u)?;
        let g = self.cov.restrict(&u)?;
        let ma = quad_mean(&a, g.matrix()) + oa;
        let mb = quad_mean(&b, g.matrix()) + ob;
        Ok(quad_connected(&a, &b, g.matrix()) + ma * mb)
    }

    fn combo_variance(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        let u = combo.support();
        let (a, _) = self.combo_form(combo, &u)?;
        let g = self.cov.restrict(&u)?;
        if !self.pure {
            let ag = &a * g.matrix();
            return Ok(-0.125 * (trace_prod(&a, &a) + trace_prod(&ag, &ag)));
        }
        // For pure Gamma the variance is |[A, Gamma]|^2 / 16, a sum of squares
        // with no cancellation between large modular weights.
        let n = self.cov.n_modes();
        let rows = majorana_indices(&u, n)?;
        let cols = majorana_indices(&u.complement(n), n)?;
        let g_out = DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.cov.gamma[(rows[i], cols[j])]);
        let inner = &a * g.matrix() - g.matrix() * &a;
        let outer = &a * g_out;
        Ok((inner.norm_squared() + 2.0 * outer.norm_squared()) / 16.0)
    }
}
