//! States built from two-qubit pairs on `2N` sites arranged on a circle.
//!
//! Site `i` holds `2N - 1` qubits, one for each bond to `i +- k` (`k < N`) and
//! one for the diametral bond to `i + N`. A bond of separation `k` is the pair
//! `sqrt(p_k)|00> + sqrt(1 - p_k)|11>` with entanglement `chi_k = h(p_k)`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::lattice::Region;
use crate::ruler::{binary_entropy, BackendError, ModularCombo, StateBackend};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum PairStateError {
    #[error("need N >= 2, got {0}")]
    TooFewSites(usize),
    #[error("chi_{k} = {value} lies outside (0, ln 2]")]
    InvalidWeights { k: usize, value: f64 },
    #[error("chi = {0} lies outside (0, ln 2]")]
    ChiOutOfRange(f64),
    #[error("expected {expected} weights, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("site {site} is outside a ring of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    /// Separation `1..=N` along the shorter arc.
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BondLayout {
    pub n_half: usize,
}

impl BondLayout {
    pub fn new(n_half: usize) -> Result<Self, PairStateError> {
        if n_half < 2 {
            return Err(PairStateError::TooFewSites(n_half));
        }
        Ok(BondLayout { n_half })
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_half
    }

    pub fn qubits_per_site(&self) -> usize {
        2 * self.n_half - 1
    }

    pub fn n_qubits(&self) -> usize {
        self.n_sites() * self.qubits_per_site()
    }

    /// Every bond once; diametral bonds are not double counted.
    pub fn bonds(&self) -> Vec<Bond> {
        let n = self.n_sites();
        let mut out = Vec::new();
        for k in 1..self.n_half {
            out.extend((0..n).map(|i| Bond { i, j: (i + k) % n, k }));
        }
        out.extend((0..self.n_half).map(|i| Bond {
            i,
            j: i + self.n_half,
            k: self.n_half,
        }));
        out
    }

    /// Qubit of `site` that carries its bond to `site + k` (`forward`) or `site - k`.
    pub fn qubit(&self, site: usize, k: usize, forward: bool) -> usize {
        let slot = if k == self.n_half {
            2 * self.n_half - 2
        } else {
            2 * (k - 1) + usize::from(!forward)
        };
        site * self.qubits_per_site() + slot
    }

    /// The two qubits of `bond`, ordered `(at i, at j)`.
    pub fn bond_qubits(&self, b: &Bond) -> (usize, usize) {
        (self.qubit(b.i, b.k, true), self.qubit(b.j, b.k, false))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairState {
    pub layout: BondLayout,
    /// `chi[k - 1]` for `k = 1..=N`.
    pub chi: Vec<f64>,
    /// `p[k - 1] in (0, 1/2]` with `h(p) = chi`.
    pub p: Vec<f64>,
}

impl PairState {
    pub fn from_chi(layout: BondLayout, chi: Vec<f64>) -> Result<Self, PairStateError> {
        if chi.len() != layout.n_half {
            return Err(PairStateError::WrongLength {
                expected: layout.n_half,
                got: chi.len(),
            });
        }
        validate_weights(&chi)?;
        let p = chi.iter().map(|c| chi_to_p(*c)).collect::<Result<_, _>>()?;
        Ok(PairState { layout, chi, p })
    }

    /// Entanglement weights reproducing `alpha ln(l_n / l_1) + beta` on intervals.
    pub fn from_alpha_beta(n_half: usize, alpha: f64, beta: f64) -> Result<Self, PairStateError> {
        PairState::from_chi(BondLayout::new(n_half)?, solve_chi(n_half, alpha, beta)?)
    }

    pub fn n_sites(&self) -> usize {
        self.layout.n_sites()
    }

    /// `sum chi_k` over bonds cut by `region`.
    pub fn region_entropy(&self, region: &Region) -> Result<f64, PairStateError> {
        self.check(region)?;
        Ok(self
            .layout
            .bonds()
            .iter()
            .filter(|b| region.contains(b.i) != region.contains(b.j))
            .map(|b| self.chi[b.k - 1])
            .sum())
    }

    fn check(&self, region: &Region) -> Result<(), PairStateError> {
        match region.sites().last() {
            Some(&s) if s >= self.n_sites() => Err(PairStateError::SiteOutOfRange {
                site: s,
                n_sites: self.n_sites(),
            }),
            _ => Ok(()),
        }
    }

    /// Per-bond values of `sum_i w_i K_{X_i}` on the branches `|00>` and `|11>`.
    fn branch_values(&self, combo: &ModularCombo) -> Result<Vec<(f64, f64, f64)>, PairStateError> {
        let bonds = self.layout.bonds();
        let mut out = Vec::with_capacity(bonds.len());
        for (r, _) in combo.terms() {
            self.check(r)?;
        }
        for b in &bonds {
            let p = self.p[b.k - 1];
            let cut_weight: f64 = combo
                .terms()
                .iter()
                .filter(|(r, _)| r.contains(b.i) != r.contains(b.j))
                .map(|(_, w)| w)
                .sum();
            out.push((p, -cut_weight * p.ln(), -cut_weight * (1.0 - p).ln()));
        }
        Ok(out)
    }
}

/// `S(l_n) = n S(l_1) - 2 sum_{k<n} (n - k) chi_k` for `n <= N` consecutive sites.
pub fn interval_entropy(chi: &[f64], n: usize) -> f64 {
    let nh = chi.len();
    let s1 = 2.0 * chi[..nh - 1].iter().sum::<f64>() + chi[nh - 1];
    n as f64 * s1
        - 2.0
            * (1..n)
                .map(|k| (n - k) as f64 * chi[k - 1])
                .sum::<f64>()
}

pub fn chord(n: usize, n_half: usize) -> f64 {
    2.0 * (n as f64 * PI / (2 * n_half) as f64).sin()
}

/// Closed-form weights for `S(l_n) = alpha ln(l_n / l_1) + beta`, `n = 1..=N`.
pub fn solve_chi(n_half: usize, alpha: f64, beta: f64) -> Result<Vec<f64>, PairStateError> {
    if n_half < 2 {
        return Err(PairStateError::TooFewSites(n_half));
    }
    let s = |k: usize| (k as f64 * PI / (2 * n_half) as f64).sin();
    let mut chi = vec![0.0; n_half];
    for k in 2..=n_half {
        chi[k - 1] = alpha * (s(k) / (s(k - 1) * s(k + 1)).sqrt()).ln();
    }
    let inner: f64 = chi[1..n_half - 1].iter().sum();
    chi[0] = 0.5 * (beta - 2.0 * inner - chi[n_half - 1]);
    validate_weights(&chi)?;
    Ok(chi)
}

pub fn validate_weights(chi: &[f64]) -> Result<(), PairStateError> {
    for (i, &c) in chi.iter().enumerate() {
        if !(c > 0.0 && c <= LN_2 + 1e-15) {
            return Err(PairStateError::InvalidWeights { k: i + 1, value: c });
        }
    }
    Ok(())
}

/// Inverse of `h` on `(0, 1/2]`.
pub fn chi_to_p(chi: f64) -> Result<f64, PairStateError> {
    if !(chi > 0.0 && chi <= LN_2 + 1e-15) {
        return Err(PairStateError::ChiOutOfRange(chi));
    }
    if chi >= LN_2 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binary_entropy(mid) < chi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean and variance of a combination; bonds are independent two-branch variables.
pub fn pair_mean_var(state: &PairState, combo: &ModularCombo) -> Result<(f64, f64), PairStateError> {
    let vals = state.branch_values(combo)?;
    let mut mean = 0.0;
    let mut var = 0.0;
    for (p, v0, v1) in vals {
        mean += p * v0 + (1.0 - p) * v1;
        var += p * (1.0 - p) * (v0 - v1).powi(2);
    }
    Ok((mean, var))
}

/// Dense amplitudes over all qubits, qubit `q` on bit `q` of the index.
pub fn pair_amplitudes(state: &PairState, max_qubits: usize) -> Option<DVector<Complex64>> {
    let nq = state.layout.n_qubits();
    if nq > max_qubits {
        return None;
    }
    let bonds = state.layout.bonds();
    let mut psi = DVector::zeros(1usize << nq);
    for branch in 0u64..(1u64 << bonds.len()) {
        let mut idx = 0usize;
        let mut amp = 1.0;
        for (bi, b) in bonds.iter().enumerate() {
            let p = state.p[b.k - 1];
            if branch >> bi & 1 == 1 {
                let (q1, q2) = state.layout.bond_qubits(b);
                idx |= (1 << q1) | (1 << q2);
                amp *= (1.0 - p).sqrt();
            } else {
                amp *= p.sqrt();
            }
        }
        psi[idx] = Complex64::new(amp, 0.0);
    }
    Some(psi)
}

/// Linear system `S(l_n) = alpha ln(l_n/l_1) + beta` solved densely; a check on [`solve_chi`].
pub fn solve_chi_dense(n_half: usize, alpha: f64, beta: f64) -> Option<Vec<f64>> {
    let m = DMatrix::from_fn(n_half, n_half, |row, col| {
        let n = row + 1;
        let k = col + 1;
        let single = if k == n_half { 1.0 } else { 2.0 };
        let inner = if k < n { 2.0 * (n - k) as f64 } else { 0.0 };
        n as f64 * single - inner
    });
    let rhs = DVector::from_fn(n_half, |row, _| {
        alpha * (chord(row + 1, n_half) / chord(1, n_half)).ln() + beta
    });
    m.lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

pub struct PairStateBackend {
    pub state: PairState,
}

impl StateBackend for PairStateBackend {
    fn entropy(&self, region: &Region) -> Result<f64, BackendError> {
        Ok(self.state.region_entropy(region)?)
    }

    fn supports_moments(&self) -> bool {
        true
    }

    fn combo_mean(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        Ok(pair_mean_var(&self.state, combo)?.0)
    }

    fn combo_moment(&self, a: &ModularCombo, b: &ModularCombo) -> Result<Complex64, BackendError> {
        let va = self.state.branch_values(a)?;
        let vb = self.state.branch_values(b)?;
        let (ma, mb) = (pair_mean_var(&self.state, a)?.0, pair_mean_var(&self.state, b)?.0);
        let cov: f64 = va
            .iter()
            .zip(&vb)
            .map(|(&(p, a0, a1), &(_, b0, b1))| p * (1.0 - p) * (a0 - a1) * (b0 - b1))
            .sum();
        Ok(Complex64::new(ma * mb + cov, 0.0))
    }

    fn combo_variance(&self, combo: &ModularCombo) -> Result<f64, BackendError> {
        Ok(pair_mean_var(&self.state, combo)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_site_weights() {
        let chi = solve_chi(3, 1.0, 1.5).unwrap();
        assert!((chi[2] - (2.0 / 3f64.sqrt()).ln()).abs() < 1e-15);
        assert!((chi[1] - 0.5 * 1.5f64.ln()).abs() < 1e-15);
        assert!((chi[0] - 0.5 * (1.5 - 3f64.sqrt().ln())).abs() < 1e-15);
        let expect = [0.475347, 0.202733, 0.143841];
        for (c, e) in chi.iter().zip(expect) {
            assert!((c - e).abs() < 5e-7, "{c} vs {e}");
        }
        let p = chi_to_p(chi[0]).unwrap();
        assert!((p - 0.1827).abs() < 1e-4);
    }

    #[test]
    fn closed_form_matches_dense_solve() {
        for n in 2..=8 {
            let a = solve_chi(n, 1.0, 1.5).unwrap();
            let b = solve_chi_dense(n, 1.0, 1.5).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn large_n_limit() {
        let chi = solve_chi(64, 1.0, 1.5).unwrap();
        for k in 2..10 {
            let lim = 0.5 * ((k * k) as f64 / (k * k - 1) as f64).ln();
            assert!((chi[k - 1] - lim).abs() < 1e-3);
        }
    }

    #[test]
    fn layout_counts() {
        let l = BondLayout::new(3).unwrap();
        assert_eq!(l.n_qubits(), 30);
        let bonds = l.bonds();
        assert_eq!(bonds.len(), 6 * 2 + 3);
        let mut used = vec![0; l.n_qubits()];
        for b in &bonds {
            let (q1, q2) = l.bond_qubits(b);
            used[q1] += 1;
            used[q2] += 1;
        }
        assert!(used.iter().all(|u| *u == 1));
    }

    #[test]
    fn interval_formula_matches_cut_count() {
        let st = PairState::from_alpha_beta(4, 1.0, 1.5).unwrap();
        for n in 1..=4 {
            let r = Region::new((2..2 + n).collect());
            let cut = st.region_entropy(&r).unwrap();
            assert!((cut - interval_entropy(&st.chi, n)).abs() < 1e-13);
        }
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(matches!(
            solve_chi(3, 1.0, 0.1),
            Err(PairStateError::InvalidWeights { k: 1, .. })
        ));
        assert!(matches!(chi_to_p(0.8), Err(PairStateError::ChiOutOfRange(_))));
    }

    #[test]
    fn flat_state_has_zero_variance() {
        let layout = BondLayout::new(3).unwrap();
        let st = PairState::from_chi(layout, vec![LN_2; 3]).unwrap();
        let combo = ModularCombo::new([
            (Region::new(vec![0, 1]), 1.0),
            (Region::new(vec![1, 2]), 0.3),
            (Region::new(vec![1]), -1.0),
        ]);
        let (_, v) = pair_mean_var(&st, &combo).unwrap();
        assert_eq!(v, 0.0);
    }
}
