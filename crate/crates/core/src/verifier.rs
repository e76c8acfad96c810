//! Post-hoc certification of a covering: intersection graph, coverage of
//! the declared region by seeded sampling, claim margins, singular-point
//! candidates.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{intersects, Body, Intersection};
use crate::covering::{must_be_disjoint, piece_point, Covering, CoveringKind, RegionPiece};
use crate::error::{Error, Result};
use crate::index::{bounding_box, BodySet, BoxIndex};
use crate::nets::GridBox;
use crate::sparse::{Index, SparseVector};

/// Witnesses must re-verify membership within this gauge slack.
pub const WITNESS_TOL: f64 = 1e-10;
/// Claim margins may fall short of `β_n` by at most this much.
pub const CLAIM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub witness: SparseVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionGraph {
    pub nodes: usize,
    pub edges: Vec<Edge>,
    pub unresolved: Vec<(usize, usize)>,
    /// Pairs with overlapping boxes certified disjoint, with the certified
    /// sup-distance lower bound.
    pub disjoint: Vec<(usize, usize, f64)>,
}

impl IntersectionGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes];
        for e in &self.edges {
            d[e.a] += 1;
            d[e.b] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// `degree → number of bodies`.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for d in self.degrees() {
            *h.entry(d).or_insert(0) += 1;
        }
        h
    }
}

/// Intersection graph over all pairs with overlapping sup-norm bounding
/// boxes. `Unresolved` pairs are retried twice with `tol / 100`.
pub fn build_graph(bodies: &[&Body], coords: &[Index], tol: f64) -> Result<IntersectionGraph> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {tol}")));
    }
    let idx = BoxIndex::new(bodies.iter().map(|b| bounding_box(b, coords)).collect(), 0.25);
    let results: Vec<Vec<(usize, Intersection)>> = (0..bodies.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in idx.overlapping(idx.bbox(i)) {
                if j <= i {
                    continue;
                }
                let mut t = tol;
                let mut r = intersects(bodies[i], bodies[j], t)?;
                for _ in 0..2 {
                    if r != Intersection::Unresolved {
                        break;
                    }
                    t /= 100.0;
                    r = intersects(bodies[i], bodies[j], t)?;
                }
                out.push((j, r));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut g = IntersectionGraph { nodes: bodies.len(), edges: vec![], unresolved: vec![], disjoint: vec![] };
    for (i, row) in results.into_iter().enumerate() {
        for (j, r) in row {
            match r {
                Intersection::Intersecting { witness } => g.edges.push(Edge { a: i, b: j, witness }),
                Intersection::Disjoint { certificate } => {
                    g.disjoint.push((i, j, certificate.sup_distance_lower(bodies[i], bodies[j])))
                }
                Intersection::Unresolved => g.unresolved.push((i, j)),
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Miss {
    pub piece: usize,
    pub point: SparseVector,
    /// Smallest gauge over the bodies; `> 1` for a miss.
    pub nearest_gauge: f64,
    pub nearest_body: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceCoverage {
    pub piece: usize,
    pub samples: usize,
    pub attempts: usize,
    pub misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub pieces: Vec<PieceCoverage>,
    pub misses: Vec<Miss>,
}

const CHUNK: usize = 1024;

/// Draws `samples` accepted points from `piece` (rejection sampling from
/// its bounding box) and lists those covered by no body.
pub fn check_coverage(cov: &Covering, piece: &RegionPiece, samples: usize, seed: u64) -> Result<CoverageResult> {
    let pid = cov
        .region
        .pieces
        .iter()
        .position(|p| p == piece)
        .or_else(|| cov.region.pieces.iter().position(|p| piece.is_within(p)))
        .ok_or_else(|| Error::contract("sampling region exceeds the declared covered region"))?;
    let before = cov.union_before(piece.stage);
    let all = cov.union();
    let ext = piece.norm.sup_over_norm();
    let half_y = piece.outer * ext;
    let off: Vec<Index> = cov.universe.iter().copied().filter(|i| !piece.gamma0.contains(i)).collect();

    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<(usize, usize, Vec<Miss>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let want = CHUNK.min(samples - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((pid as u64) << 32) | c as u64);
            let (mut got, mut tries, mut misses) = (0, 0, Vec::new());
            while got < want && tries < 200 * want {
                tries += 1;
                let y = SparseVector::from_pairs(piece.gamma0.iter().map(|&i| (i, rng.gen_range(-half_y..=half_y))));
                let z = if piece.collar > 0.0 {
                    SparseVector::from_pairs(off.iter().map(|&i| (i, rng.gen_range(-piece.collar..=piece.collar))))
                } else {
                    SparseVector::zero()
                };
                let Some(p) = piece_point(piece, &before, &y, &z) else { continue };
                got += 1;
                if all.containing(&p).is_none() {
                    let (g, b) = nearest_gauge(&all, &p);
                    misses.push(Miss { piece: pid, point: p, nearest_gauge: g, nearest_body: b });
                }
            }
            (got, tries, misses)
        })
        .collect();
    let mut res = PieceCoverage { piece: pid, samples: 0, attempts: 0, misses: 0 };
    let mut misses = Vec::new();
    for (got, tries, m) in per_chunk {
        res.samples += got;
        res.attempts += tries;
        res.misses += m.len();
        misses.extend(m);
    }
    Ok(CoverageResult { pieces: vec![res], misses })
}

fn nearest_gauge(set: &BodySet, p: &SparseVector) -> (f64, Option<usize>) {
    set.bodies
        .iter()
        .enumerate()
        .map(|(i, b)| (b.gauge(p), Some(i)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::INFINITY, None))
}

/// Covered grid points of `scan` (spacing `spacing`) with an uncovered grid
/// neighbor: the union of the bodies containing such a point does not
/// contain its grid neighborhood. Neighbors are all `3^d - 1` offsets for
/// `d ≤ 3` and the `2d` axis offsets otherwise.
pub fn find_singular_candidates(set: &BodySet, scan: &GridBox, spacing: f64) -> Result<Vec<SparseVector>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::param(format!("grid spacing must be positive, got {spacing}")));
    }
    let d = scan.coords.len();
    let lens: Vec<usize> =
        scan.lo.iter().zip(&scan.hi).map(|(&lo, &hi)| ((hi - lo) / spacing).round() as usize + 3).collect();
    let total: usize = lens.iter().product();
    let node = |flat: usize| -> Vec<i64> {
        let mut idx = vec![0i64; d];
        let mut f = flat;
        for k in (0..d).rev() {
            idx[k] = (f % lens[k]) as i64;
            f /= lens[k];
        }
        idx
    };
    let point = |idx: &[i64]| -> SparseVector {
        let p: Vec<f64> = idx.iter().zip(&scan.lo).map(|(&i, &lo)| lo + (i - 1) as f64 * spacing).collect();
        SparseVector::from_coords(&scan.coords, &p)
    };
    let covered: Vec<bool> = (0..total).into_par_iter().map(|f| set.containing(&point(&node(f))).is_some()).collect();
    let offsets: Vec<Vec<i64>> = if d <= 3 {
        crate::index::cells_in(&vec![(-1, 1); d]).filter(|o| o.iter().any(|&v| v != 0)).collect()
    } else {
        (0..d)
            .flat_map(|k| {
                [-1, 1].into_iter().map(move |s| {
                    let mut o = vec![0; d];
                    o[k] = s;
                    o
                })
            })
            .collect()
    };
    let flat_of = |idx: &[i64]| -> usize { idx.iter().zip(&lens).fold(0, |acc, (&i, &n)| acc * n + i as usize) };
    let mut out = Vec::new();
    for f in 0..total {
        let idx = node(f);
        let interior = idx.iter().zip(&lens).all(|(&i, &n)| i >= 1 && (i as usize) < n - 1);
        if !interior || !covered[f] {
            continue;
        }
        let flagged = offsets.iter().any(|o| {
            let nb: Vec<i64> = idx.iter().zip(o).map(|(a, b)| a + b).collect();
            !covered[flat_of(&nb)]
        });
        if flagged {
            out.push(point(&idx));
        }
    }
    Ok(out)
}

/// Largest coordinate gap between two bodies over `coords`.
pub fn coordinate_margin(a: &Body, b: &Body, coords: &[Index]) -> f64 {
    coords
        .iter()
        .map(|&i| {
            let (al, ah) = a.coordinate_range(i);
            let (bl, bh) = b.coordinate_range(i);
            (bl - ah).max(al - bh)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub histogram: BTreeMap<usize, usize>,
    /// Edges between bodies that must be disjoint.
    pub forbidden_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub samples: usize,
    pub pieces: Vec<PieceCoverage>,
    pub misses: Vec<Miss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub per_claim_min: BTreeMap<String, f64>,
    pub claim_failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub entries: usize,
    pub failed: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Coverage,
    Disjointness,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub status: Status,
    pub graph: GraphReport,
    pub coverage: CoverageReport,
    pub margins: MarginReport,
    pub ledger: LedgerReport,
    pub unresolved: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Accepted samples per declared piece.
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, tol: 1e-9 }
    }
}

/// Runs every check. The status is the first failing category in the order
/// coverage, disjointness, unresolved.
pub fn verify(cov: &Covering, opts: &VerifyOptions) -> Result<VerificationReport> {
    let bodies = cov.bodies();
    let graph = build_graph(&bodies, &cov.universe, opts.tol)?;

    let mut forbidden = Vec::new();
    for e in &graph.edges {
        let (a, b) = (bodies[e.a], bodies[e.b]);
        if a.gauge(&e.witness) > 1.0 + WITNESS_TOL || b.gauge(&e.witness) > 1.0 + WITNESS_TOL {
            return Err(Error::contract(format!("witness for edge {}-{} does not re-verify", e.a, e.b)));
        }
        if must_be_disjoint(a, b) {
            forbidden.push((e.a, e.b));
        }
    }

    let mut ledger_failed = Vec::new();
    for entry in &cov.ledger {
        let ok = entry.a < bodies.len()
            && entry.b < bodies.len()
            && entry.certificate.recompute(bodies[entry.a], bodies[entry.b]).is_some_and(|m| {
                m > 0.0 && (m - entry.certificate.margin()).abs() <= 1e-10
            });
        if !ok {
            ledger_failed.push((entry.a, entry.b));
        }
    }

    let mut per_claim_min = BTreeMap::new();
    let mut claim_failures = Vec::new();
    let stage = |b: &Body| b.label.as_ref().map_or(0, |l| l.stage);
    let n_max = bodies.iter().map(|b| stage(b)).max().unwrap_or(0);
    let certified: HashMap<(usize, usize), f64> = graph.disjoint.iter().map(|&(i, j, d)| ((i, j), d)).collect();
    let cross_rows: Vec<f64> = (0..bodies.len())
        .into_par_iter()
        .map(|i| {
            let mut m = f64::INFINITY;
            for j in i + 1..bodies.len() {
                if stage(bodies[i]) == stage(bodies[j]) {
                    continue;
                }
                let gap = coordinate_margin(bodies[i], bodies[j], &cov.universe);
                let d = if gap > 0.0 { gap } else { certified.get(&(i, j)).copied().unwrap_or(f64::INFINITY) };
                m = m.min(d);
            }
            m
        })
        .collect();
    let cross_stage_min = cross_rows.into_iter().fold(f64::INFINITY, f64::min);
    if cross_stage_min.is_finite() {
        per_claim_min.insert("cross_stage_distance".into(), cross_stage_min);
    }
    if cov.kind == CoveringKind::C0 {
        if let Some(s) = &cov.schedule {
            for n in 1..=n_max.min(s.n_stages()) {
                let members: Vec<&Body> = bodies.iter().copied().filter(|b| stage(b) == n).collect();
                let rows: Vec<f64> = (0..members.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut m = f64::INFINITY;
                        for j in i + 1..members.len() {
                            if must_be_disjoint(members[i], members[j]) {
                                m = m.min(coordinate_margin(members[i], members[j], &cov.universe));
                            }
                        }
                        m
                    })
                    .collect();
                let min = rows.into_iter().fold(f64::INFINITY, f64::min);
                let beta = s.beta(n);
                if min.is_finite() {
                    per_claim_min.insert(format!("cross_gamma0_stage_{n}"), min);
                    per_claim_min.insert(format!("beta_{n}"), beta);
                    if min < beta - CLAIM_SLACK {
                        claim_failures.push(format!("stage {n}: cross-Γ₀ margin {min} < β_{n} = {beta}"));
                    }
                }
            }
        }
    }

    let mut pieces = Vec::new();
    let mut misses = Vec::new();
    let mut total = 0;
    for (k, piece) in cov.region.pieces.iter().enumerate() {
        let r = check_coverage(cov, piece, opts.samples, opts.seed.wrapping_add(k as u64))?;
        for p in r.pieces {
            total += p.samples;
            pieces.push(p);
        }
        misses.extend(r.misses);
    }

    let status = if !misses.is_empty() {
        Status::Coverage
    } else if !forbidden.is_empty() || !ledger_failed.is_empty() || !claim_failures.is_empty() {
        Status::Disjointness
    } else if !graph.unresolved.is_empty() {
        Status::Unresolved
    } else {
        Status::Ok
    };
    Ok(VerificationReport {
        status,
        graph: GraphReport {
            nodes: graph.nodes,
            edges: graph.edges.len(),
            max_degree: graph.max_degree(),
            histogram: graph.histogram(),
            forbidden_edges: forbidden,
        },
        coverage: CoverageReport { samples: total, pieces, misses },
        margins: MarginReport { per_claim_min, claim_failures },
        ledger: LedgerReport { entries: cov.ledger.len(), failed: ledger_failed },
        unresolved: graph.unresolved,
    })
}
