//! Atomic spectral measures.
//!
//! A [`DiscreteMeasure`] holds the population spectral distribution of a
//! covariance matrix as a finite list of (eigenvalue, probability) atoms.
//! All population inputs to the limit-law computations are of this form;
//! continuous spectral distributions are out of scope.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An atomic probability measure on the positive half-line.
///
/// Invariants enforced at construction: atoms strictly positive and strictly
/// increasing, weights positive and summing to 1 within 1e-12, equal lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

/// Serialized form: `{"atoms":[...],"weights":[...]}`.
#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        DiscreteMeasure::new(r.atoms, r.weights)
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for pair in atoms.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidMeasure(format!(
                    "atoms must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if !atoms.iter().all(|&t| t.is_finite() && t > 0.0) {
            return Err(Error::InvalidMeasure("atoms must be positive".into()));
        }
        if !weights.iter().all(|&w| w.is_finite() && w > 0.0) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Point mass at `t`.
    pub fn point_mass(t: f64) -> Result<Self> {
        Self::new(vec![t], vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one atom by construction
    }

    /// Σ wᵢ f(tᵢ) for a possibly complex-valued integrand.
    ///
    /// Errors if `f` is non-finite at some atom, naming the atom.
    pub fn integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&t, &w) in self.atoms.iter().zip(&self.weights) {
            let v = f(t);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Evaluation {
                    atom: t,
                    detail: format!("f({t}) = {v}"),
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Real-valued counterpart of [`integrate`](Self::integrate), without the
    /// finiteness bookkeeping. Intended for solver inner loops.
    pub(crate) fn sum_over<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    pub(crate) fn sum_over_complex<F>(&self, f: F) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// First moment ∫ t dμ(t).
    pub fn mean(&self) -> f64 {
        self.sum_over(|t| t)
    }

    /// Largest atom.
    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().expect("nonempty")
    }

    /// Realizes the measure as a covariance diagonal of length `dim`.
    ///
    /// Atom `i` receives its largest-remainder share of `weightᵢ·dim` entries
    /// (floor first, leftovers by descending fractional part, ties to the
    /// smaller atom), so repeated runs are bit-reproducible. Entries come out
    /// ascending because atoms are.
    pub fn covariance_diagonal(&self, dim: usize) -> Result<Vec<f64>> {
        let k = self.atoms.len();
        if dim < k {
            return Err(Error::DimTooSmall { dim, atoms: k });
        }
        let exact: Vec<f64> = self.weights.iter().map(|w| w * dim as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|&c| c.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..k).collect();
        // descending fractional part, ties broken toward the smaller atom
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.partial_cmp(&fa)
                .unwrap()
                .then(self.atoms[a].partial_cmp(&self.atoms[b]).unwrap())
        });
        for &i in order.iter().take(dim - assigned) {
            counts[i] += 1;
        }
        let mut out = Vec::with_capacity(dim);
        for (&t, &c) in self.atoms.iter().zip(&counts) {
            out.extend(std::iter::repeat(t).take(c));
        }
        debug_assert_eq!(out.len(), dim);
        Ok(out)
    }
}

impl std::fmt::Display for DiscreteMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .atoms
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| format!("{t}:{w}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}
