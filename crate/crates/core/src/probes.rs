//! Separation constants, finite property-(I) probes and the c0 family of
//! translated unit balls that defeats (I) at every finite size.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{dist_lower, intersects, Body};
use crate::error::{Error, Result};
use crate::norms::{eval_norm, NormSpec};
use crate::sparse::{Index, SparseVector};

pub type Rational = Ratio<i128>;

/// Unit-sphere tolerance for probe inputs.
pub const SPHERE_TOL: f64 = 1e-10;

/// Minimal pairwise `spec` distance.
pub fn sep(points: &[SparseVector], spec: &NormSpec) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::param(format!("sep needs at least 2 points, got {}", points.len())));
    }
    spec.validate()?;
    let rows: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..points.len())
                .map(|j| eval_norm(spec, &points[i].sub(&points[j])).unwrap_or(f64::NAN))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(rows.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedFamily {
    pub spec: NormSpec,
    pub points: Vec<SparseVector>,
    pub sep: f64,
}

impl SeparatedFamily {
    pub fn new(points: Vec<SparseVector>, spec: NormSpec) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            let n = eval_norm(&spec, p)?;
            if (n - 1.0).abs() > SPHERE_TOL {
                return Err(Error::param(format!("point {i} has norm {n}, not 1")));
            }
        }
        let sep = sep(&points, &spec)?;
        Ok(Self { spec, points, sep })
    }
}

/// Parses `-1.25`, `3e-2`, `7/8` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::param(format!("not a decimal number: {s:?}"));
    let s = s.trim();
    if s.contains('/') {
        return s.parse::<Rational>().map_err(|_| bad());
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let scale = exp - frac.len() as i32;
    if scale.unsigned_abs() > 36 {
        return Err(bad());
    }
    let p = 10i128.pow(scale.unsigned_abs());
    let v = if scale >= 0 { Rational::from_integer(num * p) } else { Rational::new(num, p) };
    Ok(if neg { -v } else { v })
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

type RVec = Vec<(Index, Rational)>;

fn sup_diff(a: &RVec, b: &RVec) -> Rational {
    let mut m = Rational::from_integer(0);
    let get = |v: &RVec, i: Index| v.iter().find(|e| e.0 == i).map_or(Rational::from_integer(0), |e| e.1);
    for &(i, _) in a.iter().chain(b) {
        let d = get(a, i) - get(b, i);
        let d = if d < Rational::from_integer(0) { -d } else { d };
        if d > m {
            m = d;
        }
    }
    m
}

/// `u_1 = 2e_1 - e_2`, `u_n = 2e_1 + e_2 + ... + e_n - e_{n+1}`, indices from 1.
pub fn c0_direction(n: usize) -> Vec<(Index, i128)> {
    let mut u = vec![(1, 2)];
    u.extend((2..=n).map(|i| (i as Index, 1)));
    u.push((n as Index + 1, -1));
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0Member {
    pub n: usize,
    pub center: SparseVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0Report {
    pub n_max: usize,
    pub delta: f64,
    pub delta_exact: String,
    pub members: Vec<C0Member>,
    /// Sup distance between centers; `2(1 + δ)` for every pair.
    pub center_distance_min: f64,
    pub center_distance_max: f64,
    pub center_distance_exact: Vec<String>,
    pub pairwise_disjoint: bool,
    /// Sup distance from each member to the unit ball at the origin.
    pub origin_distance: Vec<f64>,
    pub origin_disjoint: bool,
    pub dist_e1: Vec<f64>,
    pub dist_e1_exact: Vec<String>,
    pub dist_e1_is_two_delta: bool,
    pub verdict: String,
}

/// Sup-norm unit balls centered at `(1 + δ) u_n`, `n ≤ n_max`, with every
/// distance computed in exact rational arithmetic.
pub fn c0_counterexample(n_max: usize, delta: Rational) -> Result<C0Report> {
    if n_max < 2 {
        return Err(Error::param(format!("n_max must be at least 2, got {n_max}")));
    }
    if delta < Rational::from_integer(0) {
        return Err(Error::param(format!("delta must be nonnegative, got {delta}")));
    }
    let one = Rational::from_integer(1);
    let two = Rational::from_integer(2);
    let s = one + delta;
    let centers: Vec<RVec> = (1..=n_max)
        .map(|n| c0_direction(n).into_iter().map(|(i, v)| (i, s * Rational::from_integer(v))).collect())
        .collect();

    let mut pair = Vec::new();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            pair.push(sup_diff(&centers[i], &centers[j]));
        }
    }
    let dmin = *pair.iter().min().expect("n_max >= 2");
    let dmax = *pair.iter().max().expect("n_max >= 2");
    let mut distinct: Vec<Rational> = pair.clone();
    distinct.sort();
    distinct.dedup();

    let zero: RVec = Vec::new();
    let origin: Vec<Rational> = centers.iter().map(|c| (sup_diff(c, &zero) - two).max(Rational::from_integer(0))).collect();
    let e1: RVec = vec![(1, one)];
    let de1: Vec<Rational> = centers.iter().map(|c| (sup_diff(c, &e1) - one).max(Rational::from_integer(0))).collect();
    let two_delta = two * delta;
    let is_two_delta = de1.iter().all(|d| *d == two_delta);
    let pairwise_disjoint = dmin > two;
    let origin_disjoint = origin.iter().all(|d| *d > Rational::from_integer(0));

    let verdict = if pairwise_disjoint && origin_disjoint && is_two_delta {
        format!(
            "witnessed failure at size {n_max}: {n_max} pairwise disjoint unit balls avoiding the unit ball, \
             all within {} of e_1",
            to_f64(&two_delta)
        )
    } else {
        format!("no failure witnessed at size {n_max} with delta = {delta}")
    };
    Ok(C0Report {
        n_max,
        delta: to_f64(&delta),
        delta_exact: delta.to_string(),
        members: centers
            .iter()
            .enumerate()
            .map(|(k, c)| C0Member { n: k + 1, center: SparseVector::from_pairs(c.iter().map(|(i, v)| (*i, to_f64(v)))) })
            .collect(),
        center_distance_min: to_f64(&dmin),
        center_distance_max: to_f64(&dmax),
        center_distance_exact: distinct.iter().map(|d| d.to_string()).collect(),
        pairwise_disjoint,
        origin_distance: origin.iter().map(to_f64).collect(),
        origin_disjoint,
        dist_e1: de1.iter().map(to_f64).collect(),
        dist_e1_exact: de1.iter().map(|d| d.to_string()).collect(),
        dist_e1_is_two_delta: is_two_delta,
        verdict,
    })
}

/// The c0 family as bodies (float centers).
pub fn c0_family(n_max: usize, delta: f64) -> Result<Vec<Body>> {
    (1..=n_max)
        .map(|n| {
            let c = SparseVector::from_pairs(c0_direction(n).into_iter().map(|(i, v)| (i, (1.0 + delta) * v as f64)));
            Body::new(c, 1.0, NormSpec::Sup)
        })
        .collect()
}

/// Whether `sup_B dist(x, B) > eps` is certified by [`dist_lower`]. `false`
/// means not witnessed.
pub fn property_i_probe(x: &SparseVector, family: &[Body], eps: f64) -> Result<bool> {
    if family.is_empty() {
        return Err(Error::contract("property (I) probe needs a nonempty family"));
    }
    let spec = &family[0].spec;
    let nx = eval_norm(spec, x)?;
    if (nx - 1.0).abs() > SPHERE_TOL {
        return Err(Error::param(format!("x has norm {nx}, not 1")));
    }
    for (i, b) in family.iter().enumerate() {
        if b.radius != 1.0 || &b.spec != spec {
            return Err(Error::contract(format!("member {i} is not a unit ball of the common norm")));
        }
        let unit = Body::new(SparseVector::zero(), 1.0, spec.clone())?;
        if !intersects(&unit, b, 1e-9)?.is_disjoint() {
            return Err(Error::contract(format!("member {i} meets the unit ball")));
        }
    }
    let offending: Option<(usize, usize)> = (0..family.len())
        .into_par_iter()
        .map(|i| -> Result<Option<(usize, usize)>> {
            for j in i + 1..family.len() {
                if !intersects(&family[i], &family[j], 1e-9)?.is_disjoint() {
                    return Ok(Some((i, j)));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .next();
    if let Some((i, j)) = offending {
        return Err(Error::contract(format!("members {i} and {j} are not certified disjoint")));
    }
    Ok(family.iter().any(|b| dist_lower(b, x).value > eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KottmanReport {
    pub spec: NormSpec,
    pub dim: usize,
    pub size: usize,
    pub points: Vec<SparseVector>,
    /// Lower bound for the separation constant of `size`-point subsets of
    /// the unit sphere of `span(e_0, …, e_{dim-1})`.
    pub sep: f64,
}

/// Greedy farthest-point selection of `size` points among the normalized
/// nonzero vectors of `{-1, 0, 1}^dim`.
pub fn kottman_greedy(spec: &NormSpec, dim: usize, size: usize) -> Result<KottmanReport> {
    if !(1..=8).contains(&dim) {
        return Err(Error::param(format!("dim must lie in 1..=8, got {dim}")));
    }
    spec.validate()?;
    let coords: Vec<Index> = (0..dim as Index).collect();
    let mut cands = Vec::new();
    for key in crate::index::cells_in(&vec![(-1, 1); dim]) {
        if key.iter().all(|&v| v == 0) {
            continue;
        }
        let v = SparseVector::from_coords(&coords, &key.iter().map(|&k| k as f64).collect::<Vec<_>>());
        let n = eval_norm(spec, &v)?;
        cands.push(v.scale(1.0 / n));
    }
    if size < 2 || size > cands.len() {
        return Err(Error::param(format!("size must lie in 2..={}, got {size}", cands.len())));
    }
    let mut chosen = vec![cands.len() - 1];
    let mut nearest: Vec<f64> =
        cands.iter().map(|c| eval_norm(spec, &c.sub(&cands[chosen[0]])).unwrap_or(0.0)).collect();
    while chosen.len() < size {
        let (best, _) = nearest
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        chosen.push(best);
        for (i, c) in cands.iter().enumerate() {
            nearest[i] = nearest[i].min(eval_norm(spec, &c.sub(&cands[best]))?);
        }
    }
    let points: Vec<SparseVector> = chosen.iter().map(|&i| cands[i].clone()).collect();
    let sep = sep(&points, spec)?;
    Ok(KottmanReport { spec: spec.clone(), dim, size, points, sep })
}
