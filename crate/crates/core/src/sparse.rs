//! Finitely supported coordinate vectors over an index universe.
//!
//! Both the primal vectors (elements of c0(Γ)) and the dual functionals
//! (elements of ℓ1(Γ)) share the same storage: a list of `(index, value)`
//! pairs sorted by index, with no stored zeros.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Coordinate index, an element of Γ.
pub type Index = u32;

/// A finitely supported real vector. Stored coordinates are never zero, so the
/// stored keys are exactly the support.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<(Index, f64)>", into = "Vec<(Index, f64)>")]
pub struct SparseVector {
    entries: Vec<(Index, f64)>,
}

impl SparseVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a vector from arbitrary pairs. Duplicate indices are summed and
    /// zero values pruned.
    pub fn from_pairs<I: IntoIterator<Item = (Index, f64)>>(pairs: I) -> Self {
        let mut entries: Vec<(Index, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(Index, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        Self { entries: merged }
    }

    /// Dense constructor: `values[k]` becomes coordinate `k`.
    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.iter().enumerate().map(|(k, &v)| (k as Index, v)))
    }

    /// The canonical basis vector `e_i`.
    pub fn basis(i: Index) -> Self {
        Self::from_pairs([(i, 1.0)])
    }

    pub fn entries(&self) -> &[(Index, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (Index, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }

    pub fn support(&self) -> impl Iterator<Item = Index> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: Index) -> f64 {
        match self.entries.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn norm_sup(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l1(&self) -> f64 {
        self.values().map(f64::abs).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        Self::from_pairs(self.iter().map(|(i, v)| (i, v * s)))
    }

    /// Coordinatewise map; zero results are pruned.
    pub fn map_values(&self, mut f: impl FnMut(Index, f64) -> f64) -> Self {
        Self::from_pairs(self.iter().map(|(i, v)| (i, f(i, v))))
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SparseVector) -> Self {
        let mut out = Vec::with_capacity(self.nnz() + other.nnz());
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) => match ia.cmp(&ib) {
                    Ordering::Less => {
                        i += 1;
                        (ia, va)
                    }
                    Ordering::Greater => {
                        j += 1;
                        (ib, s * vb)
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (ia, va + s * vb)
                    }
                },
                (Some(&(ia, va)), None) => {
                    i += 1;
                    (ia, va)
                }
                (None, Some(&(ib, vb))) => {
                    j += 1;
                    (ib, s * vb)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != 0.0 {
                out.push(next);
            }
        }
        Self { entries: out }
    }

    pub fn add(&self, other: &SparseVector) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SparseVector) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Restriction to the coordinates accepted by `keep` (the projection P_S).
    pub fn restrict(&self, mut keep: impl FnMut(Index) -> bool) -> Self {
        Self {
            entries: self.entries.iter().copied().filter(|&(i, _)| keep(i)).collect(),
        }
    }

    /// Restriction onto a sorted index set.
    pub fn project(&self, onto: &[Index]) -> Self {
        self.restrict(|i| onto.binary_search(&i).is_ok())
    }

    /// Component outside a sorted index set, `(I - P_S) x`.
    pub fn project_out(&self, of: &[Index]) -> Self {
        self.restrict(|i| of.binary_search(&i).is_err())
    }

    pub fn is_supported_in(&self, set: &[Index]) -> bool {
        self.support().all(|i| set.binary_search(&i).is_ok())
    }

    /// Coordinatewise absolute value.
    pub fn abs(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|&(i, v)| (i, v.abs())).collect(),
        }
    }

    /// Values over a fixed list of coordinates (zeros where unsupported).
    pub fn to_dense(&self, coords: &[Index]) -> Vec<f64> {
        coords.iter().map(|&i| self.get(i)).collect()
    }

    pub fn from_coords(coords: &[Index], values: &[f64]) -> Self {
        Self::from_pairs(coords.iter().copied().zip(values.iter().copied()))
    }
}

impl From<Vec<(Index, f64)>> for SparseVector {
    fn from(v: Vec<(Index, f64)>) -> Self {
        Self::from_pairs(v)
    }
}

impl From<SparseVector> for Vec<(Index, f64)> {
    fn from(v: SparseVector) -> Self {
        v.entries
    }
}

impl fmt::Debug for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter().map(|(i, v)| (i, v))).finish()
    }
}

/// A finitely supported element of ℓ1(Γ) acting on [`SparseVector`]s.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualFunctional(pub SparseVector);

impl DualFunctional {
    pub fn from_pairs<I: IntoIterator<Item = (Index, f64)>>(pairs: I) -> Self {
        Self(SparseVector::from_pairs(pairs))
    }

    pub fn basis(i: Index) -> Self {
        Self(SparseVector::basis(i))
    }

    pub fn apply(&self, x: &SparseVector) -> f64 {
        self.0.dot(x)
    }

    pub fn coeffs(&self) -> &SparseVector {
        &self.0
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.norm_l1()
    }

    pub fn norm_l2(&self) -> f64 {
        self.0.norm_l2()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }
}

impl fmt::Debug for DualFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DualFunctional({:?})", self.0)
    }
}
