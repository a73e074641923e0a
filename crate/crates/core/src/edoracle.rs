//! Brute-force state vectors: an independent reference for the Gaussian and
//! pair-state calculus on small systems.
//!
//! Subsystem `q` is bit `q` of the basis index. Fermionic states use the
//! Jordan-Wigner order of the subsystems; reduced states of arbitrary mode
//! subsets are taken after a signed reordering that brings the subset to the
//! front, which is exact for parity eigenstates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::gaussian::{MajoranaCovariance, QuadraticForm};
use crate::lattice::Region;
use crate::pairstates::{pair_amplitudes, PairState};
use crate::ruler::{BackendError, ModularCombo, StateBackend};

/// Largest number of two-level subsystems a dense state may have.
pub const MAX_QUBITS: usize = 20;
/// Largest fermionic mode count accepted by [`statevector_from_gaussian`].
pub const MAX_GAUSSIAN_MODES: usize = 10;
/// Density-matrix eigenvalues below this are treated as zero.
pub const EPS_KER_DENSE: f64 = 1e-12;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum OracleError {
    #[error("dense state would need {qubits} qubits (limit {limit})")]
    TooLarge { qubits: usize, limit: usize },
    #[error("covariance is not pure (|Gamma^2 + 1| = {0:e})")]
    ImpureInput(f64),
    #[error("site {site} is outside a state with {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("could not isolate the ground state (norm {0:e})")]
    Projection(f64),
}

#[derive(Clone, Debug)]
pub struct DenseState {
    pub n_qubits: usize,
    pub amplitudes: DVector<Complex64>,
    pub fermionic: bool,
    /// Subsystems owned by each site.
    pub site_groups: Vec<Vec<usize>>,
}

/// Operator on the listed subsystems; subsystem `support[i]` is bit `i` of the matrix index.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub support: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

impl DenseState {
    pub fn n_sites(&self) -> usize {
        self.site_groups.len()
    }

    pub fn subsystems(&self, region: &Region) -> Result<Vec<usize>, OracleError> {
        let mut out = Vec::new();
        for &s in region.sites() {
            let g = self.site_groups.get(s).ok_or(OracleError::SiteOutOfRange {
                site: s,
                n_sites: self.n_sites(),
            })?;
            out.extend_from_slice(g);
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Bit order that puts `front` first (ascending) and the rest after (ascending).
fn front_order(n: usize, front: &[usize]) -> Vec<usize> {
    let mut order = front.to_vec();
    order.extend((0..n).filter(|q| front.binary_search(q).is_err()));
    order
}

/// Sign of reordering the occupied modes of `s` into `order`.
fn reorder_sign(s: usize, order: &[usize]) -> f64 {
    let occ: Vec<usize> = order.iter().copied().filter(|q| s >> q & 1 == 1).collect();
    let mut inversions = 0usize;
    for i in 0..occ.len() {
        for j in i + 1..occ.len() {
            if occ[i] > occ[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn permuted_index(s: usize, order: &[usize]) -> usize {
    order
        .iter()
        .enumerate()
        .fold(0, |acc, (new, &old)| acc | ((s >> old & 1) << new))
}

/// Amplitudes in the basis where new bit `i` is old subsystem `order[i]`.
fn permute(state: &DenseState, order: &[usize]) -> DVector<Complex64> {
    let mut out = DVector::zeros(state.amplitudes.len());
    for (s, a) in state.amplitudes.iter().enumerate() {
        let sign = if state.fermionic { reorder_sign(s, order) } else { 1.0 };
        out[permuted_index(s, order)] = a * sign;
    }
    out
}

fn unpermute(state: &DenseState, order: &[usize], v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut out = DVector::zeros(v.len());
    for s in 0..v.len() {
        let sign = if state.fermionic { reorder_sign(s, order) } else { 1.0 };
        out[s] = v[permuted_index(s, order)] * sign;
    }
    out
}

/// `|psi>` reshaped with the region's subsystems as row index.
fn region_matrix(state: &DenseState, subs: &[usize]) -> (Vec<usize>, DMatrix<Complex64>) {
    let order = front_order(state.n_qubits, subs);
    let v = permute(state, &order);
    let rows = 1usize << subs.len();
    let cols = v.len() / rows;
    (order, DMatrix::from_fn(rows, cols, |r, c| v[r + c * rows]))
}

pub fn reduced_density(state: &DenseState, region: &Region) -> Result<DenseOperator, OracleError> {
    let subs = state.subsystems(region)?;
    let (_, m) = region_matrix(state, &subs);
    Ok(DenseOperator {
        matrix: &m * m.adjoint(),
        support: subs,
    })
}

/// Eigen-decomposition of a Hermitian matrix, ascending on the support.
/// Identically zero rows are split off first (zero eigenvalue, unit vector):
/// reduced states of pair states are mostly such rows, and both nalgebra and
/// `faer` return NaN when tridiagonalizing them in place.
fn hermitian_spectrum(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| m.row(i).iter().any(|z| *z != Complex64::new(0.0, 0.0)))
        .collect();
    let k = keep.len();
    let f = faer::Mat::<faer::complex_native::c64>::from_fn(k, k, |i, j| {
        let z = 0.5 * (m[(keep[i], keep[j])] + m[(keep[j], keep[i])].conj());
        faer::complex_native::c64::new(z.re, z.im)
    });
    let evd = f.selfadjoint_eigendecomposition(faer::Side::Lower);
    let (s, u) = (evd.s().column_vector(), evd.u());
    let mut vals = DVector::zeros(n);
    let mut vecs = DMatrix::zeros(n, n);
    for j in 0..k {
        vals[j] = s.read(j).re;
        for (i, &row) in keep.iter().enumerate() {
            let z = u.read(i, j);
            vecs[(row, j)] = Complex64::new(z.re, z.im);
        }
    }
    let dropped = (0..n).filter(|i| keep.binary_search(i).is_err());
    for (j, row) in (k..n).zip(dropped) {
        vecs[(row, j)] = Complex64::new(1.0, 0.0);
    }
    (vals, vecs)
}

pub fn dense_entropy(rho: &DenseOperator) -> f64 {
    hermitian_spectrum(&rho.matrix)
        .0
        .iter()
        .filter(|l| **l > 0.0)
        .map(|l| -l * l.ln())
        .sum()
}

/// `-ln rho` on eigenvalues `>= eps_ker`, zero on the rest.
pub fn dense_modular_hamiltonian(rho: &DenseOperator, eps_ker: f64) -> DenseOperator {
    let (vals, u) = hermitian_spectrum(&rho.matrix);
    let mut uw = u.clone();
    for (j, l) in vals.iter().enumerate() {
        let w = if *l >= eps_ker { -l.ln() } else { 0.0 };
        uw.column_mut(j).scale_mut(w);
    }
    DenseOperator {
        matrix: uw * u.adjoint(),
        support: rho.support.clone(),
    }
}

/// `(op (x) 1)|psi>`.
pub fn dense_apply(state: &DenseState, op: &DenseOperator) -> DVector<Complex64> {
    let (order, m) = region_matrix(state, &op.support);
    let out = &op.matrix * m;
    let flat = DVector::from_iterator(out.len(), out.iter().copied());
    unpermute(state, &order, &flat)
}

fn modular_vector(state: &DenseState, region: &Region) -> Result<DVector<Complex64>, OracleError> {
    let rho = reduced_density(state, region)?;
    Ok(dense_apply(state, &dense_modular_hamiltonian(&rho, EPS_KER_DENSE)))
}

/// `(sum_i w_i K_{X_i}) |psi>`.
pub fn dense_combo_vector(state: &DenseState, combo: &ModularCombo) -> Result<DVector<Complex64>, OracleError> {
    let mut v = DVector::zeros(state.amplitudes.len());
    for (r, w) in combo.terms() {
        v += modular_vector(state, r)? * Complex64::new(*w, 0.0);
    }
    Ok(v)
}

/// `i <[K_AB, K_BC]>`.
pub fn dense_modular_commutator(
    state: &DenseState,
    a: &Region,
    b: &Region,
    c: &Region,
) -> Result<f64, OracleError> {
    let u = modular_vector(state, &a.union(b))?;
    let v = modular_vector(state, &b.union(c))?;
    Ok(-2.0 * u.dotc(&v).im)
}

pub fn dense_combo_variance(state: &DenseState, combo: &ModularCombo) -> Result<f64, OracleError> {
    let v = dense_combo_vector(state, combo)?;
    let mean = state.amplitudes.dotc(&v).re;
    Ok(v.norm_squared() - mean * mean)
}

/// `gamma_m |v>` in the Jordan-Wigner basis.
pub fn apply_majorana(v: &DVector<Complex64>, m: usize) -> DVector<Complex64> {
    let j = m / 2;
    let odd = m % 2 == 1;
    let mut out = DVector::zeros(v.len());
    let below = (1usize << j) - 1;
    for (s, a) in v.iter().enumerate() {
        if *a == Complex64::new(0.0, 0.0) {
            continue;
        }
        let string = if (s & below).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        let occupied = s >> j & 1 == 1;
        let factor = if !odd {
            Complex64::new(string, 0.0)
        } else if occupied {
            Complex64::new(0.0, -string)
        } else {
            Complex64::new(0.0, string)
        };
        out[s ^ (1 << j)] += a * factor;
    }
    out
}

/// `(i/4) sum_{jk} h_{jk} gamma_j gamma_k |v>`.
fn apply_quadratic(v: &DVector<Complex64>, h: &DMatrix<f64>) -> DVector<Complex64> {
    let m = h.nrows();
    let mut out = DVector::zeros(v.len());
    for k in 0..m {
        let gk = apply_majorana(v, k);
        for j in 0..k {
            let w = h[(j, k)];
            if w != 0.0 {
                // (i/4)(h_jk g_j g_k + h_kj g_k g_j) = (i/2) h_jk g_j g_k for j != k
                out += apply_majorana(&gk, j) * Complex64::new(0.0, 0.5 * w);
            }
        }
    }
    out
}

/// Dense matrix of a quadratic form on its own support (Jordan-Wigner over `support`).
pub fn dense_quadratic_form(form: &QuadraticForm) -> DenseOperator {
    let n = form.support.len();
    let dim = 1usize << n;
    let mut mat = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut e = DVector::zeros(dim);
        e[s] = Complex64::new(1.0, 0.0);
        let col = apply_quadratic(&e, &form.coefficient) + e * Complex64::new(form.offset, 0.0);
        mat.set_column(s, &col);
    }
    DenseOperator {
        support: (0..n).collect(),
        matrix: mat,
    }
}

/// `Gamma_{jk} = i <gamma_j gamma_k>` of a fermionic dense state.
pub fn dense_covariance(state: &DenseState) -> MajoranaCovariance {
    let m = 2 * state.n_qubits;
    let gv: Vec<DVector<Complex64>> = (0..m).map(|j| apply_majorana(&state.amplitudes, j)).collect();
    let g = DMatrix::from_fn(m, m, |j, k| {
        if j == k {
            0.0
        } else {
            (Complex64::new(0.0, 1.0) * gv[j].dotc(&gv[k])).re
        }
    });
    MajoranaCovariance::new((&g - g.transpose()) * 0.5).expect("antisymmetric by construction")
}

/// State vector of a pure Gaussian state on at most [`MAX_GAUSSIAN_MODES`] modes.
///
/// The parent Hamiltonian `(i/4) gamma^T (-Gamma) gamma + n/2` counts
/// quasiparticles, so the ground state is isolated by the polynomial filter
/// `prod_{m=1..n} (m - N) / m`.
pub fn statevector_from_gaussian(cov: &MajoranaCovariance) -> Result<DenseState, OracleError> {
    let n = cov.n_modes();
    if n > MAX_GAUSSIAN_MODES {
        return Err(OracleError::TooLarge {
            qubits: n,
            limit: MAX_GAUSSIAN_MODES,
        });
    }
    let defect = cov.purity_defect();
    if defect > 1e-8 {
        return Err(OracleError::ImpureInput(defect));
    }
    let h = -cov.matrix();
    let dim = 1usize << n;
    let number = |v: &DVector<Complex64>| apply_quadratic(v, &h) + v * Complex64::new(0.5 * n as f64, 0.0);
    let filter = |mut v: DVector<Complex64>| {
        for m in 1..=n {
            let nv = number(&v);
            v = (v * Complex64::new(m as f64, 0.0) - nv) / Complex64::new(m as f64, 0.0);
        }
        v
    };
    // |<s|G>|^2 sums to one, so some basis state has weight >= 1/dim.
    let threshold = 0.5 / (dim as f64).sqrt();
    let mut best: Option<DVector<Complex64>> = None;
    for s in 0..dim {
        let mut e = DVector::zeros(dim);
        e[s] = Complex64::new(1.0, 0.0);
        let v = filter(e);
        let nv = v.norm();
        if nv >= threshold {
            best = Some(v / Complex64::new(nv, 0.0));
            break;
        }
    }
    let v = best.ok_or(OracleError::Projection(0.0))?;
    let v = filter(v);
    let nv = v.norm();
    if nv < 0.5 {
        return Err(OracleError::Projection(nv));
    }
    Ok(DenseState {
        n_qubits: n,
        amplitudes: v / Complex64::new(nv, 0.0),
        fermionic: true,
        site_groups: (0..n).map(|j| vec![j]).collect(),
    })
}

pub fn statevector_from_pairstate(state: &PairState) -> Result<DenseState, OracleError> {
    let nq = state.layout.n_qubits();
    let amps = pair_amplitudes(state, MAX_QUBITS).ok_or(OracleError::TooLarge {
        qubits: nq,
        limit: MAX_QUBITS,
    })?;
    let per = state.layout.qubits_per_site();
    Ok(DenseState {
        n_qubits: nq,
        amplitudes: amps,
        fermionic: false,
        site_groups: (0..state.n_sites())
            .map(|s| (s * per..(s + 1) * per).collect())
            .collect(),
    })
}

pub struct OracleBackend {
    pub state: DenseState,
}

impl StateBackend for OracleBackend {
    fn entropy(&self, region: &Region) -> Result<f64, BackendError> {
        Ok(dense_entropy(&reduced_density(&self.state, region)?))
    }

    fn supports_moments(&self) -> bool {
        true
    }

    fn combo_mean(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        let v = dense_combo_vector(&self.state, combo)?;
        Ok(self.state.amplitudes.dotc(&v).re)
    }

    fn combo_moment(&self, a: &ModularCombo, b: &ModularCombo) -> Result<Complex64, BackendError> {
        let u = dense_combo_vector(&self.state, a)?;
        let v = dense_combo_vector(&self.state, b)?;
        Ok(u.dotc(&v))
    }

    fn combo_variance(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        Ok(dense_combo_variance(&self.state, combo)?)
    }
}
