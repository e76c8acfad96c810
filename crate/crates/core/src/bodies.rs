//! Convex bodies `center + radius · Ball(spec)`: membership, certified
//! sup-norm distance bounds and intersection tests with certificates.
//!
//! For lattice norms the nearest point (in the sup norm) of a body to `x` is
//! obtained by shrinking `x - center` coordinatewise towards zero: the
//! smallest shrink `s` that lands inside the body is the distance. That turns
//! distance computations into a monotone one-dimensional bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{eval_dual_norm, eval_norm_unchecked, norming_functional, NormSpec};
use crate::sparse::{DualFunctional, Index, SparseVector};

/// Slack of the membership test.
pub const CONTAINS_TOL: f64 = 1e-12;

/// Provenance of a body inside a staged covering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BodyLabel {
    pub stage: usize,
    pub gamma0: Vec<Index>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Source annulus `(h, k)` of the generating net.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub center: SparseVector,
    pub radius: f64,
    pub spec: NormSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<BodyLabel>,
}

impl Body {
    pub fn new(center: SparseVector, radius: f64, spec: NormSpec) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("radius must be positive, got {radius}")));
        }
        spec.validate()?;
        Ok(Self { center, radius, spec, label: None })
    }

    pub fn with_label(mut self, label: BodyLabel) -> Self {
        self.label = Some(label);
        self
    }

    /// Gauge `‖x - c‖ / r`.
    pub fn gauge(&self, x: &SparseVector) -> f64 {
        eval_norm_unchecked(&self.spec, &x.sub(&self.center)) / self.radius
    }

    pub fn contains(&self, x: &SparseVector) -> bool {
        self.gauge(x) <= 1.0 + CONTAINS_TOL
    }

    /// Exact range `[lo, hi]` of coordinate `i` over the body.
    pub fn coordinate_range(&self, i: Index) -> (f64, f64) {
        let c = self.center.get(i);
        let w = self.radius * self.spec.coordinate_extent(i);
        (c - w, c + w)
    }

    /// Half-width of the body in coordinates outside its center's support,
    /// `max_i r · ext(e_i*)`, used for bounding boxes.
    pub fn max_extent(&self) -> f64 {
        self.radius * self.spec.sup_over_norm()
    }
}

/// Coordinatewise shrink of `u` towards 0 by `s`.
fn shrink(u: &SparseVector, s: f64) -> SparseVector {
    u.map_values(|_, v| v.signum() * (v.abs() - s).max(0.0))
}

/// Bracket `(lo, hi]` of the sup-norm distance from `x` to a lattice-norm
/// body, plus the body point realizing `hi`. `None` for non-lattice specs.
pub fn sup_distance_bracket(b: &Body, x: &SparseVector) -> Option<(f64, f64, SparseVector)> {
    if !b.spec.is_lattice() {
        return None;
    }
    let u = x.sub(&b.center);
    let inside = |s: f64| eval_norm_unchecked(&b.spec, &shrink(&u, s)) <= b.radius;
    if inside(0.0) {
        return Some((0.0, 0.0, x.clone()));
    }
    let (mut lo, mut hi) = (0.0, u.norm_sup());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some((lo, hi, b.center.add(&shrink(&u, hi))))
}

/// Sup-norm distance lower bound with the functional that certifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBound {
    pub value: f64,
    /// `None` only when `value` is 0.
    pub functional: Option<DualFunctional>,
}

impl DistanceBound {
    /// Recomputes `(f(x) - sup_B f) / ‖f‖₁` from the stored functional.
    pub fn recompute(&self, b: &Body, x: &SparseVector) -> f64 {
        match &self.functional {
            None => 0.0,
            Some(f) => functional_gap(b, x, f),
        }
    }
}

fn functional_gap(b: &Body, x: &SparseVector, f: &DualFunctional) -> f64 {
    let l1 = f.norm_l1();
    if l1 == 0.0 {
        return f64::NEG_INFINITY;
    }
    let support = f.apply(&b.center) + b.radius * eval_dual_norm(&b.spec, f).unwrap_or(f64::INFINITY);
    round_down((f.apply(x) - support) / l1)
}

/// Nudges a computed bound towards zero by a few ulps of its inputs' scale.
fn round_down(v: f64) -> f64 {
    if v <= 0.0 {
        return v;
    }
    let slack = 4.0 * f64::EPSILON * v.abs().max(1.0);
    (v - slack).max(0.0)
}

/// `|a - b|` rounded down exactly: the computed difference is corrected by
/// its rounding error so the result never exceeds the true value.
fn abs_diff_down(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let d = hi - lo;
    // Two-sum: err = exact(hi - lo) - d.
    let bv = d - hi;
    let err = (hi - (d - bv)) + (-lo - bv);
    if err < 0.0 {
        next_down(d)
    } else {
        d
    }
}

fn next_down(v: f64) -> f64 {
    if v <= 0.0 {
        return v;
    }
    f64::from_bits(v.to_bits() - 1)
}

/// Certified lower bound on the sup-norm distance from `x` to `b`.
///
/// Outside the body the bound comes from a separating functional: the
/// norming functional of the body at its nearest point to `x` (which attains
/// the distance for smooth bodies), or the coordinate functional for sup-norm
/// balls. Inside the body the bound is 0.
pub fn dist_lower(b: &Body, x: &SparseVector) -> DistanceBound {
    if b.contains(x) {
        return DistanceBound { value: 0.0, functional: None };
    }
    let u = x.sub(&b.center);
    match &b.spec {
        NormSpec::Sup => {
            let (i, _) = u
                .iter()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("outside a ball centered at c means x != c");
            let f = DualFunctional::from_pairs([(i, u.get(i).signum())]);
            // Exact: |x_i - c_i| - r with directed rounding.
            let d = abs_diff_down(x.get(i), b.center.get(i));
            let v = if d > b.radius { abs_diff_down(d, b.radius) } else { 0.0 };
            DistanceBound { value: v, functional: Some(f) }
        }
        NormSpec::MNorm { .. } | NormSpec::Scaled { .. } => {
            let (_, _, z) = sup_distance_bracket(b, x).expect("lattice spec");
            let f = norming_functional(&b.spec, &z.sub(&b.center)).expect("boundary point is nonzero");
            let v = functional_gap(b, x, &f).max(0.0);
            DistanceBound { value: v, functional: Some(f) }
        }
        NormSpec::InfConv { .. } => {
            let mut best = DistanceBound { value: 0.0, functional: None };
            let mut candidates: Vec<DualFunctional> = u
                .iter()
                .map(|(i, v)| DualFunctional::from_pairs([(i, v.signum())]))
                .collect();
            candidates.push(DualFunctional(u.clone()));
            for f in candidates {
                let v = functional_gap(b, x, &f);
                if v > best.value {
                    best = DistanceBound { value: v, functional: Some(f) };
                }
            }
            best
        }
    }
}

/// Proof that two bodies do not meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisjointnessCertificate {
    /// Balls of one norm: center distance exceeds the radius sum. Pairs of
    /// scaled bodies sharing `(M, Γ₀, radius)` with centers in `Y_{Γ₀}` are
    /// decided the same way on their `Y_{Γ₀}` slices.
    CenterDistance { distance: f64, radius_sum: f64, margin: f64 },
    /// `sup_A f + margin · ‖f‖₁ ≤ inf_B f` (or with roles swapped).
    SeparatingFunctional { f: DualFunctional, margin: f64 },
    /// The coordinate ranges at `index` are separated by `margin`.
    CoordinateBound { index: Index, margin: f64 },
}

impl DisjointnessCertificate {
    pub fn margin(&self) -> f64 {
        match self {
            DisjointnessCertificate::CenterDistance { margin, .. }
            | DisjointnessCertificate::SeparatingFunctional { margin, .. }
            | DisjointnessCertificate::CoordinateBound { margin, .. } => *margin,
        }
    }

    /// Recomputes the certificate's margin from its data and the bodies.
    /// Returns `None` when the certificate does not apply to the pair.
    pub fn recompute(&self, a: &Body, b: &Body) -> Option<f64> {
        match self {
            DisjointnessCertificate::CenterDistance { .. } => {
                center_rule(a, b).map(|(d, rs, _, _)| d - rs)
            }
            DisjointnessCertificate::SeparatingFunctional { f, .. } => Some(separation(a, b, f)),
            DisjointnessCertificate::CoordinateBound { index, .. } => Some(coordinate_gap(a, b, *index)),
        }
    }

    /// Lower bound on the sup-norm distance between the bodies implied by
    /// the certificate.
    pub fn sup_distance_lower(&self, a: &Body, b: &Body) -> f64 {
        match self {
            DisjointnessCertificate::CenterDistance { margin, .. } => {
                center_rule(a, b).map_or(0.0, |(_, _, lip, _)| margin / lip)
            }
            DisjointnessCertificate::SeparatingFunctional { margin, .. }
            | DisjointnessCertificate::CoordinateBound { margin, .. } => *margin,
        }
    }
}

/// Exact center-distance rule, when it applies: `(distance, radius_sum, L)`
/// where distances are in a norm `N` with `N ≤ L ‖·‖_∞`.
/// `(distance, radius sum, Lipschitz factor, share of a in the radius sum)`.
fn center_rule(a: &Body, b: &Body) -> Option<(f64, f64, f64, f64)> {
    if a.spec == b.spec && a.spec.is_lattice() {
        let lip = match &a.spec {
            NormSpec::Scaled { q, .. } => (1.0 / q).max(1.0),
            _ => 1.0,
        };
        let d = eval_norm_unchecked(&a.spec, &a.center.sub(&b.center));
        return Some((d, a.radius + b.radius, lip, a.radius));
    }
    // Same family: slices are c + r q B_M ∩ Y_{Γ₀}, and the lattice
    // projection onto Y_{Γ₀} maps each body onto its slice.
    if let (
        NormSpec::Scaled { m: ma, gamma0: ga, q: qa },
        NormSpec::Scaled { m: mb, gamma0: gb, q: qb },
    ) = (&a.spec, &b.spec)
    {
        if ma == mb
            && ga == gb
            && a.radius == b.radius
            && a.center.is_supported_in(ga)
            && b.center.is_supported_in(gb)
        {
            let d = eval_norm_unchecked(&NormSpec::MNorm { m: *ma }, &a.center.sub(&b.center));
            return Some((d, a.radius * qa + b.radius * qb, 1.0, a.radius * qa));
        }
    }
    None
}

/// `(inf_B f - sup_A f) / ‖f‖₁`, maximized over the sign of `f`.
fn separation(a: &Body, b: &Body, f: &DualFunctional) -> f64 {
    let l1 = f.norm_l1();
    if l1 == 0.0 {
        return f64::NEG_INFINITY;
    }
    let da = a.radius * eval_dual_norm(&a.spec, f).unwrap_or(f64::INFINITY);
    let db = b.radius * eval_dual_norm(&b.spec, f).unwrap_or(f64::INFINITY);
    let delta = f.apply(&b.center) - f.apply(&a.center);
    (delta.abs() - da - db) / l1
}

fn coordinate_gap(a: &Body, b: &Body, i: Index) -> f64 {
    let (alo, ahi) = a.coordinate_range(i);
    let (blo, bhi) = b.coordinate_range(i);
    (blo - ahi).max(alo - bhi)
}

fn joint_support(a: &Body, b: &Body) -> Vec<Index> {
    let mut s: Vec<Index> = a.center.support().chain(b.center.support()).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// Result of [`intersects`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Intersection {
    Intersecting { witness: SparseVector },
    Disjoint { certificate: DisjointnessCertificate },
    Unresolved,
}

impl Intersection {
    pub fn is_disjoint(&self) -> bool {
        matches!(self, Intersection::Disjoint { .. })
    }

    pub fn is_intersecting(&self) -> bool {
        matches!(self, Intersection::Intersecting { .. })
    }
}

/// Decides whether two bodies meet.
///
/// Same-norm balls (and same-family scaled bodies) are decided exactly by
/// center distance. Otherwise the search tries coordinate bounds, a witness
/// on the segment between the centers, separating functionals from nearest
/// points, and finally subgradient descent on `max(gauge_a, gauge_b)`. The
/// iteration budget grows as `tol` shrinks; `Unresolved` is returned when
/// neither a witness nor a certificate is found.
pub fn intersects(a: &Body, b: &Body, tol: f64) -> Result<Intersection> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {tol}")));
    }
    if let Some((d, rs, _, own)) = center_rule(a, b) {
        if d <= rs {
            let t = own / rs;
            let w = a.center.add(&b.center.sub(&a.center).scale(t));
            return Ok(Intersection::Intersecting { witness: w });
        }
        return Ok(Intersection::Disjoint {
            certificate: DisjointnessCertificate::CenterDistance { distance: d, radius_sum: rs, margin: d - rs },
        });
    }

    let support = joint_support(a, b);
    if let Some((index, margin)) = support
        .iter()
        .map(|&i| (i, coordinate_gap(a, b, i)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
    {
        if margin > 0.0 {
            return Ok(Intersection::Disjoint {
                certificate: DisjointnessCertificate::CoordinateBound { index, margin },
            });
        }
    }
    if support.is_empty() {
        // Both centered at the origin.
        return Ok(Intersection::Intersecting { witness: SparseVector::zero() });
    }

    if let Some(w) = segment_witness(a, b) {
        return Ok(Intersection::Intersecting { witness: w });
    }

    let budget = iteration_budget(tol);
    if let Some(cert) = separating_search(a, b, budget) {
        return Ok(Intersection::Disjoint { certificate: cert });
    }
    if let Some(w) = subgradient_witness(a, b, &support, budget) {
        return Ok(Intersection::Intersecting { witness: w });
    }
    Ok(Intersection::Unresolved)
}

fn iteration_budget(tol: f64) -> usize {
    let digits = (-tol.log10()).clamp(1.0, 15.0);
    (40.0 * digits) as usize
}

/// Bisection for the crossing of the two gauges along the center segment.
fn segment_witness(a: &Body, b: &Body) -> Option<SparseVector> {
    let dir = b.center.sub(&a.center);
    let at = |t: f64| a.center.add(&dir.scale(t));
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let p = at(mid);
        if a.gauge(&p) < b.gauge(&p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    [lo, hi].into_iter().map(at).find(|p| a.contains(p) && b.contains(p))
}

fn candidate_functionals(a: &Body, b: &Body, rounds: usize) -> Vec<DualFunctional> {
    let mut out = Vec::new();
    if !(a.spec.is_lattice() && b.spec.is_lattice()) {
        return out;
    }
    let grad = |body: &Body, z: &SparseVector| -> Option<DualFunctional> {
        let v = z.sub(&body.center);
        match &body.spec {
            NormSpec::Sup => v
                .iter()
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .map(|(i, x)| DualFunctional::from_pairs([(i, x.signum())])),
            _ => norming_functional(&body.spec, &v).ok(),
        }
    };
    // Alternate sup-norm nearest points between the bodies.
    for (first, second) in [(a, b), (b, a)] {
        let mut p = first.center.clone();
        for _ in 0..rounds {
            let Some((_, _, zs)) = sup_distance_bracket(second, &p) else { break };
            out.extend(grad(second, &zs));
            let Some((_, _, zf)) = sup_distance_bracket(first, &zs) else { break };
            out.extend(grad(first, &zf));
            p = zf;
        }
    }
    out
}

fn separating_search(a: &Body, b: &Body, budget: usize) -> Option<DisjointnessCertificate> {
    let rounds = (budget / 40).max(2);
    let mut best: Option<(f64, DualFunctional)> = None;
    for f in candidate_functionals(a, b, rounds) {
        let m = separation(a, b, &f);
        if best.as_ref().is_none_or(|(bm, _)| m > *bm) {
            best = Some((m, f));
        }
    }
    let (mut margin, mut f) = best?;
    if margin <= 0.0 {
        // Projected supergradient ascent on the separation over the ℓ1 sphere.
        let support = joint_support(a, b);
        let mut step = 0.1;
        for _ in 0..budget {
            let mut improved = false;
            for &i in &support {
                for sgn in [-1.0, 1.0] {
                    let trial = DualFunctional(f.coeffs().axpy(1.0, &SparseVector::from_pairs([(i, sgn * step)])));
                    let l1 = trial.norm_l1();
                    if l1 == 0.0 {
                        continue;
                    }
                    let trial = trial.scale(1.0 / l1);
                    let m = separation(a, b, &trial);
                    if m > margin {
                        margin = m;
                        f = trial;
                        improved = true;
                    }
                }
            }
            if margin > 0.0 {
                break;
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    let margin = round_down(margin);
    (margin > 0.0).then_some(DisjointnessCertificate::SeparatingFunctional { f, margin })
}

fn subgradient_witness(a: &Body, b: &Body, support: &[Index], budget: usize) -> Option<SparseVector> {
    let obj = |p: &SparseVector| a.gauge(p).max(b.gauge(p));
    let mut p = a.center.add(&b.center).scale(0.5);
    let mut val = obj(&p);
    let scale = a.max_extent().max(b.max_extent());
    let mut step = 0.25 * scale;
    for _ in 0..budget * 4 {
        if val <= 1.0 {
            break;
        }
        let mut improved = false;
        for &i in support {
            for sgn in [-1.0, 1.0] {
                let trial = p.axpy(sgn * step, &SparseVector::basis(i));
                let v = obj(&trial);
                if v < val {
                    p = trial;
                    val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-15 * scale {
                break;
            }
        }
    }
    (a.contains(&p) && b.contains(&p)).then_some(p)
}
