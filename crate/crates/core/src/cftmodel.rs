//! Reference 1+1D CFT ground state on a circle: `S = (c/6) ln(chord / epsilon)`.
//!
//! Regions are sets of arcs; arc `i` runs from endpoint `i` to endpoint `i + 1`
//! (cyclically).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::lattice::Region;
use crate::ruler::{BackendError, StateBackend};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum CftError {
    #[error("arcs {0} do not form one contiguous interval")]
    NotAnInterval(String),
    #[error("arc {arc} does not exist on a circle with {n_arcs} arcs")]
    ArcOutOfRange { arc: usize, n_arcs: usize },
    #[error("endpoint angles must increase strictly within one turn")]
    BadAngles,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CftCircle {
    pub c: f64,
    pub epsilon: f64,
    pub angles: Vec<f64>,
}

impl CftCircle {
    pub fn new(c: f64, epsilon: f64, angles: Vec<f64>) -> Result<Self, CftError> {
        if !(c > 0.0 && epsilon > 0.0) {
            return Err(CftError::InvalidParameter(format!("c = {c}, epsilon = {epsilon}")));
        }
        let ok = angles.len() >= 2
            && angles.windows(2).all(|w| w[1] > w[0])
            && angles[angles.len() - 1] - angles[0] < TAU;
        if !ok {
            return Err(CftError::BadAngles);
        }
        Ok(CftCircle { c, epsilon, angles })
    }

    pub fn equal_arcs(c: f64, epsilon: f64, n: usize) -> Result<Self, CftError> {
        CftCircle::new(c, epsilon, (0..n).map(|k| TAU * k as f64 / n as f64).collect())
    }

    pub fn n_arcs(&self) -> usize {
        self.angles.len()
    }

    pub fn chord(&self, from: usize, to: usize) -> f64 {
        2.0 * (0.5 * (self.angles[to] - self.angles[from])).sin().abs()
    }

    /// Endpoints `(start, end)` if `arcs` is one proper cyclic run.
    pub fn interval_endpoints(&self, arcs: &Region) -> Result<Option<(usize, usize)>, CftError> {
        let n = self.n_arcs();
        if let Some(&a) = arcs.sites().last() {
            if a >= n {
                return Err(CftError::ArcOutOfRange { arc: a, n_arcs: n });
            }
        }
        if arcs.is_empty() || arcs.len() == n {
            return Ok(None);
        }
        let starts: Vec<usize> = arcs
            .sites()
            .iter()
            .copied()
            .filter(|&a| !arcs.contains((a + n - 1) % n))
            .collect();
        if starts.len() != 1 {
            return Err(CftError::NotAnInterval(arcs.to_string()));
        }
        Ok(Some((starts[0], (starts[0] + arcs.len()) % n)))
    }
}

/// Entropy of a union of consecutive arcs; zero for the empty set and the full circle.
pub fn cft_entropy(model: &CftCircle, arcs: &Region) -> Result<f64, CftError> {
    Ok(match model.interval_endpoints(arcs)? {
        None => 0.0,
        Some((s, e)) => model.c / 6.0 * (model.chord(s, e) / model.epsilon).ln(),
    })
}

/// Finite-difference estimate of `c = 6 r dS/dr` from `Delta` and `I` of two
/// nested symmetric intervals of size `r` and `r - dr`.
pub fn casini_huerta_estimate<F: Fn(f64) -> f64>(s: F, r: f64, dr: f64) -> Result<f64, CftError> {
    if !(dr > 0.0 && dr < r) {
        return Err(CftError::InvalidParameter(format!("need 0 < dr < r, got r = {r}, dr = {dr}")));
    }
    Ok(6.0 * r * (s(r) - s(r - dr)) / dr)
}

/// Entropy-only backend; moment queries are refused.
pub struct CftBackend {
    pub model: CftCircle,
}

impl StateBackend for CftBackend {
    fn entropy(&self, region: &Region) -> Result<f64, BackendError> {
        Ok(cft_entropy(&self.model, region)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruler::ModularCombo;

    #[test]
    fn chord_entropy_and_purity() {
        let m = CftCircle::equal_arcs(1.0, 0.01, 6).unwrap();
        let s = cft_entropy(&m, &Region::new(vec![1, 2])).unwrap();
        assert!((s - (3f64.sqrt() / 0.01).ln() / 6.0).abs() < 1e-14);
        let comp = cft_entropy(&m, &Region::new(vec![3, 4, 5, 0])).unwrap();
        assert!((s - comp).abs() < 1e-14);
        assert_eq!(cft_entropy(&m, &Region::new((0..6).collect())).unwrap(), 0.0);
        let wrap = cft_entropy(&m, &Region::new(vec![5, 0])).unwrap();
        assert!((wrap - s).abs() < 1e-14);
    }

    #[test]
    fn disconnected_arcs_rejected() {
        let m = CftCircle::equal_arcs(1.0, 0.01, 6).unwrap();
        assert!(matches!(
            cft_entropy(&m, &Region::new(vec![0, 2])),
            Err(CftError::NotAnInterval(_))
        ));
    }

    #[test]
    fn casini_huerta_example() {
        let est = casini_huerta_estimate(|r| r.ln() / 6.0, 1.0, 0.01).unwrap();
        assert!((est - 1.00503).abs() < 1e-5);
    }

    #[test]
    fn moments_refused() {
        let b = CftBackend {
            model: CftCircle::equal_arcs(1.0, 0.01, 4).unwrap(),
        };
        let k = ModularCombo::single(Region::new(vec![0]));
        assert!(matches!(
            b.combo_moment(&k, &k),
            Err(BackendError::Capability(_))
        ));
    }
}
