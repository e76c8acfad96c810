//! Grid-certified δ-nets and the star-finite ball families that cover the
//! complement of a closed set in a finite-dimensional coordinate subspace.
//!
//! Annuli are `A_{h,k} = {y : 1/(k+1) < dist(y, C) ≤ 1/k, h ≤ ‖y‖ < h+1}`
//! (`k = 0`: `dist > 1`), with `dist` replaced by the certified lower bound
//! of [`BodySet::dist_lb`]. Balls from annulus `k` have radius
//! `1/(2(k+1))` and centers at certified distance `> 1/(k+1)` from `C`.
//!
//! Coverage is certified on a grid of step `g`: every grid target lies within
//! `δ - g/2` (in the ball norm) of a center of radius `δ`, so every point
//! within `g/2` of a target is covered.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{intersects, Body, BodyLabel};
use crate::error::{Error, Result};
use crate::index::{bounding_box, BodySet, BoxIndex};
use crate::norms::{eval_norm_unchecked, NormSpec};
use crate::sparse::{Index, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annulus {
    pub h: u32,
    pub k: u32,
}

impl Annulus {
    pub fn radius(&self) -> f64 {
        annulus_radius(self.k)
    }

    /// `(lo, hi]` band of `dist(y, C)`.
    pub fn dist_band(&self) -> (f64, f64) {
        if self.k == 0 {
            (1.0, f64::INFINITY)
        } else {
            (1.0 / (self.k as f64 + 1.0), 1.0 / self.k as f64)
        }
    }
}

/// Relative slack of the grid coverage test, below the membership tolerance
/// of the balls.
const COVER_SLACK: f64 = 1e-13;

pub fn annulus_radius(k: u32) -> f64 {
    1.0 / (2.0 * (k as f64 + 1.0))
}

/// Annulus index `k` for a distance `d > 0`; `None` inside `C`.
pub fn annulus_k(d: f64) -> Option<u32> {
    if d <= 0.0 {
        None
    } else if d > 1.0 {
        Some(0)
    } else {
        Some((1.0 / d).floor().min(u32::MAX as f64) as u32)
    }
}

/// Axis-aligned box in the coordinate subspace spanned by `coords`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub coords: Vec<Index>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl GridBox {
    pub fn cube(coords: Vec<Index>, half: f64) -> Self {
        let d = coords.len();
        Self { coords, lo: vec![-half; d], hi: vec![half; d] }
    }

    fn validate(&self) -> Result<()> {
        if self.lo.len() != self.coords.len() || self.hi.len() != self.coords.len() {
            return Err(Error::param("box dimension mismatch"));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return Err(Error::param("box must be bounded with lo <= hi"));
        }
        Ok(())
    }

    /// Grid nodes of spacing `step` in lex order, last axis fastest; both
    /// ends of every axis are included.
    pub fn grid(&self, step: f64) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| {
                let n = ((hi - lo) / step).ceil() as usize;
                (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect()
            })
            .collect();
        lex_product(&axes)
    }
}

fn lex_product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(Vec::len).product();
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; axes.len()];
            for (k, ax) in axes.iter().enumerate().rev() {
                p[k] = ax[flat % ax.len()];
                flat /= ax.len();
            }
            p
        })
        .collect()
}

/// Greedy `delta`-net in the sup norm of the grid points (spacing
/// `delta/2`) of `region` that satisfy `membership`. Net points are
/// more than `delta` apart.
pub fn greedy_net(
    region: &GridBox,
    delta: f64,
    membership: impl Fn(&SparseVector) -> bool,
) -> Result<Vec<SparseVector>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    region.validate()?;
    let mut net: Vec<Vec<f64>> = Vec::new();
    for p in region.grid(delta / 2.0) {
        let x = SparseVector::from_coords(&region.coords, &p);
        if !membership(&x) {
            continue;
        }
        let covered = net
            .iter()
            .any(|c| c.iter().zip(&p).all(|(a, b)| (a - b).abs() <= delta));
        if !covered {
            net.push(p);
        }
    }
    Ok(net.iter().map(|p| SparseVector::from_coords(&region.coords, p)).collect())
}

/// Truncation of the infinite family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub h_max: u32,
    pub k_max: u32,
    /// Certification grid step.
    pub grid: f64,
}

impl NetParams {
    pub fn new(h_max: u32, k_max: u32) -> Self {
        let grid = 0.01f64.min(annulus_radius(k_max) / 4.0);
        Self { h_max, k_max, grid }
    }

    /// Width of the uncovered band around `C`: targets need
    /// `dist > 1/(k_max+1)`, and continuous points reach them within `g/2`.
    pub fn residue(&self) -> f64 {
        1.0 / (self.k_max as f64 + 1.0) + self.grid / 2.0 + 1e-9
    }

    /// Outer bound of the truncated region in the family norm.
    pub fn outer(&self) -> f64 {
        self.h_max as f64 + 1.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.grid > 0.0 && self.grid.is_finite()) {
            return Err(Error::param("grid step must be positive"));
        }
        let dmin = annulus_radius(self.k_max);
        if dmin - self.grid / 2.0 <= self.grid {
            return Err(Error::param(format!(
                "grid step {} too coarse for k_max = {} (smallest radius {dmin})",
                self.grid, self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFamily {
    pub coords: Vec<Index>,
    pub spec: NormSpec,
    pub params: NetParams,
    pub balls: Vec<Body>,
    /// The residue band: targets need `dist_lb > residue - g/2`.
    pub residue: f64,
    pub dist_oracle: String,
    pub targets: usize,
    pub degrees: Vec<usize>,
    pub max_degree: usize,
    /// Balls with a witness point lying in no other ball of the family.
    pub private_centers: usize,
}

impl NetFamily {
    /// Whether `y` (supported in `coords`) lies in the declared covered
    /// region: inside the truncation and either in `C` or beyond the residue.
    pub fn in_declared_region(&self, c: &BodySet, y: &SparseVector) -> bool {
        if eval_norm_unchecked(&self.spec, y) >= self.params.outer() {
            return false;
        }
        let d = c.dist_lb(y, self.residue * 2.0);
        d == 0.0 || d > self.residue
    }
}

/// Convenience wrapper of [`build_lemma_family_with`] with the default grid.
pub fn build_lemma_family(y: &[Index], c: &[Body], spec: &NormSpec, h_max: u32, k_max: u32) -> Result<NetFamily> {
    let set = BodySet::new(c.to_vec(), y.to_vec(), 0.25);
    build_lemma_family_with(y, &set, spec, NetParams::new(h_max, k_max))
}

struct Target {
    point: Vec<f64>,
    h: u32,
}

/// Spatial hash of placed centers.
struct CenterHash {
    cell: f64,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl CenterHash {
    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|&x| (x / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, p: &[f64], id: usize) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(id);
    }

    fn near(&self, p: &[f64]) -> Vec<usize> {
        let base = self.key(p);
        let ranges: Vec<(i64, i64)> = base.iter().map(|&b| (b - 1, b + 1)).collect();
        let mut out = Vec::new();
        for key in crate::index::cells_in(&ranges) {
            if let Some(v) = self.map.get(&key) {
                out.extend_from_slice(v);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Builds the truncated family on `Y = span{e_i : i ∈ y}` covering grid
/// targets of `{‖y‖ < h_max+1, dist(y, C) > 1/(k_max+1)}`.
///
/// Annuli are processed for `k = 0, 1, …` in turn, and targets within an
/// annulus in lex order. An uncovered target gets a new ball whose center
/// is pushed up to `δ - g/2` away from it, picking the candidate farthest
/// from existing balls among those at certified distance `> 1/(k+1)` from
/// `C`.
pub fn build_lemma_family_with(y: &[Index], c: &BodySet, spec: &NormSpec, params: NetParams) -> Result<NetFamily> {
    spec.validate()?;
    params.validate()?;
    if !spec.is_lattice() {
        return Err(Error::param("net families need a lattice norm"));
    }
    if y.is_empty() {
        return Err(Error::param("empty coordinate set"));
    }
    let g = params.grid;
    let ext = spec.sup_over_norm();
    let reach = params.outer() + g;
    let half = reach * ext;
    let n = (half / g).ceil() as i64;
    let axis: Vec<f64> = (-n..=n).map(|i| i as f64 * g).collect();
    let axes = vec![axis; y.len()];

    let cap = 2.0;
    let grid = lex_product(&axes);
    let classified: Vec<Option<(u32, Target)>> = grid
        .into_par_iter()
        .map(|p| {
            let x = SparseVector::from_coords(y, &p);
            let nrm = eval_norm_unchecked(spec, &x);
            if nrm >= reach {
                return None;
            }
            let d = c.dist_lb(&x, cap);
            let k = annulus_k(d)?;
            if k > params.k_max {
                return None;
            }
            let h = (nrm.floor() as u32).min(params.h_max);
            Some((k, Target { point: p, h }))
        })
        .collect();
    let mut by_k: Vec<Vec<Target>> = (0..=params.k_max).map(|_| Vec::new()).collect();
    let mut targets = 0;
    for (k, t) in classified.into_iter().flatten() {
        by_k[k as usize].push(t);
        targets += 1;
    }

    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    let mut labels: Vec<Annulus> = Vec::new();
    let mut hash = CenterHash { cell: 2.0 * annulus_radius(0) * ext, map: HashMap::new() };
    let dim = y.len();
    let dist_spec = |a: &[f64], b: &[f64]| -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
        eval_norm_unchecked(spec, &SparseVector::from_coords(y, &diff))
    };

    for (k, list) in by_k.iter().enumerate() {
        let delta = annulus_radius(k as u32);
        let shift = delta - g / 2.0;
        let band = if k == 0 { 1.0 } else { 1.0 / (k as f64 + 1.0) };
        for t in list {
            let covered = hash
                .near(&t.point)
                .into_iter()
                .any(|j| dist_spec(&t.point, &centers[j]) <= radii[j] * (1.0 + COVER_SLACK) - g / 2.0);
            if covered {
                continue;
            }
            let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2 * dim + 1);
            for sgn in [1.0, -1.0] {
                for ax in (0..dim).rev() {
                    let mut p = t.point.clone();
                    p[ax] += sgn * shift;
                    candidates.push(p);
                }
            }
            candidates.push(t.point.clone());
            let mut best: Option<(f64, Vec<f64>)> = None;
            for p in candidates {
                let x = SparseVector::from_coords(y, &p);
                let admissible = eval_norm_unchecked(spec, &x) < reach && c.dist_lb(&x, cap) > band;
                if !admissible {
                    continue;
                }
                let score = hash
                    .near(&p)
                    .into_iter()
                    .map(|j| dist_spec(&p, &centers[j]) - radii[j])
                    .fold(delta, f64::min);
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, p));
                }
            }
            let (_, p) = best.expect("the target itself is admissible");
            hash.insert(&p, centers.len());
            centers.push(p);
            radii.push(delta);
            labels.push(Annulus { h: t.h, k: k as u32 });
        }
    }

    let balls: Vec<Body> = centers
        .iter()
        .zip(&radii)
        .zip(&labels)
        .map(|((p, &r), a)| {
            Body::new(SparseVector::from_coords(y, p), r, spec.clone()).map(|b| {
                b.with_label(BodyLabel { gamma0: y.to_vec(), annulus: Some((a.h, a.k)), ..Default::default() })
            })
        })
        .collect::<Result<_>>()?;
    let degrees = intersection_degrees(&balls, y)?;
    let private_centers = balls
        .iter()
        .enumerate()
        .filter(|(i, b)| private_witness(&balls, *i, &hash.near(&b.center.to_dense(y)), y).is_some())
        .count();
    Ok(NetFamily {
        coords: y.to_vec(),
        spec: spec.clone(),
        params,
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        degrees,
        balls,
        residue: params.residue(),
        dist_oracle: "min over C of dist_lower (sup norm)".into(),
        targets,
        private_centers,
    })
}

/// A point of `balls[i]` outside every ball in `others`: the center or a
/// point on a coordinate axis through it at gauge 0.3, 0.6 or 0.9.
pub fn private_witness(balls: &[Body], i: usize, others: &[usize], coords: &[Index]) -> Option<SparseVector> {
    let b = &balls[i];
    let mut candidates = vec![b.center.clone()];
    for f in [0.3, 0.6, 0.9] {
        for &ax in coords {
            let w = f * b.radius * b.spec.coordinate_extent(ax);
            for sgn in [1.0, -1.0] {
                candidates.push(b.center.axpy(sgn * w, &SparseVector::basis(ax)));
            }
        }
    }
    candidates
        .into_iter()
        .find(|p| others.iter().all(|&j| j == i || balls[j].gauge(p) > 1.0 + 1e-9))
}

/// Intersection degree of every ball within the family.
pub fn intersection_degrees(balls: &[Body], coords: &[Index]) -> Result<Vec<usize>> {
    let idx = BoxIndex::new(balls.iter().map(|b| bounding_box(b, coords)).collect(), 0.5);
    let mut deg = vec![0; balls.len()];
    for i in 0..balls.len() {
        for j in idx.overlapping(idx.bbox(i)) {
            if j > i && intersects(&balls[i], &balls[j], 1e-9)?.is_intersecting() {
                deg[i] += 1;
                deg[j] += 1;
            }
        }
    }
    Ok(deg)
}


#[cfg(test)]
mod family_tests {
    use super::*;

    fn unit_cube(coords: &[Index]) -> BodySet {
        let b = Body::new(SparseVector::zero(), 1.0, NormSpec::Sup).unwrap();
        BodySet::new(vec![b], coords.to_vec(), 0.25)
    }

    #[test]
    fn one_dimensional_family_around_interval() {
        let c = unit_cube(&[0]);
        let fam = build_lemma_family_with(&[0], &c, &NormSpec::Sup, NetParams::new(2, 4)).unwrap();
        assert!(!fam.balls.is_empty());
        for b in &fam.balls {
            assert!(intersects(b, &c.bodies[0], 1e-9).unwrap().is_disjoint());
            let (_, k) = b.label.as_ref().unwrap().annulus.unwrap();
            assert_eq!(b.radius, annulus_radius(k));
        }
        for i in 0..=600 {
            let x = -3.0 + i as f64 * 0.01;
            if x.abs() < 1.0 + 0.2 + 1e-9 {
                continue;
            }
            let p = SparseVector::from_pairs([(0, x)]);
            assert!(fam.balls.iter().any(|b| b.contains(&p)), "{x}");
        }
        assert_eq!(fam.private_centers, fam.balls.len());
    }

    #[test]
    fn two_dimensional_family_k6() {
        let c = unit_cube(&[0, 1]);
        let t = std::time::Instant::now();
        let fam = build_lemma_family_with(&[0, 1], &c, &NormSpec::Sup, NetParams::new(1, 6)).unwrap();
        eprintln!("2d: {} balls, {} targets, deg {}, private {}, {:?}", fam.balls.len(), fam.targets, fam.max_degree, fam.private_centers, t.elapsed());
        let rho = fam.residue;
        for p in GridBox::cube(vec![0, 1], 2.0).grid(0.01) {
            let x = SparseVector::from_coords(&[0, 1], &p);
            if fam.in_declared_region(&c, &x) && c.dist_lb(&x, 1.0) > rho {
                assert!(fam.balls.iter().any(|b| b.contains(&x)), "{p:?}");
            }
        }
    }
}
