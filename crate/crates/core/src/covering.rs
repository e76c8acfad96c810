//! Staged coverings on finite truncations.
//!
//! * [`build_c0_covering`]: smooth bodies in `c0(Γ)` for finite `Γ`. Stage 0
//!   is `B_{M₀}`; stage `n` runs a net family on every `Y_{Γ₀}`, `|Γ₀| = n`,
//!   against the earlier stages and lifts each ball `x + q̃ (B_{M_n} ∩ Y_{Γ₀})`
//!   to `x + θ_n B_{M_n,Γ₀,q̃/θ_n}`.
//! * [`build_countable_dim_covering`]: balls of one norm on the growing
//!   coordinate subspaces `Y_n = span{e_0, …, e_{n-1}}`.
//!
//! Every build declares the region it covers as a list of [`RegionPiece`]s.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{intersects, Body, BodyLabel, DisjointnessCertificate, Intersection};
use crate::error::{Error, Result};
use crate::index::{bounding_box, BodySet, BoxIndex};
use crate::nets::{annulus_radius, build_lemma_family_with, NetParams};
use crate::norms::{eval_norm_unchecked, NormSpec};
use crate::sparse::{Index, SparseVector};

/// Schedule entries past the stored lists follow the default formulas.
pub fn default_m(n: usize) -> f64 {
    2f64.powi(2 * n as i32 + 5)
}

pub fn default_alpha(n: usize) -> f64 {
    1.0 - 2f64.powi(-(n as i32 + 2))
}

/// Number of explicit factors in the `θ` product before the tail bound.
const THETA_TERMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchedule {
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `θ_0 = 1, θ_1, …, θ_N`.
    pub theta: Vec<f64>,
    /// `β_1, …, β_N` (index `n - 1`).
    pub beta: Vec<f64>,
    /// Certified lower bound of the infinite product `θ`.
    pub theta_inf: f64,
}

impl ParameterSchedule {
    /// Schedule for stages `0..=n_stages` from explicit `M` and `α` lists.
    pub fn from_lists(m: Vec<f64>, alpha: Vec<f64>, n_stages: usize) -> Result<Self> {
        if m.len() <= n_stages || alpha.len() <= n_stages {
            return Err(Error::param(format!(
                "schedule needs {} entries of M and alpha, got {} and {}",
                n_stages + 1,
                m.len(),
                alpha.len()
            )));
        }
        if let Some((i, v)) = m.iter().enumerate().find(|(_, &v)| !(v > 2.0 && v.is_finite())) {
            return Err(Error::param(format!("M_{i} = {v}: M must exceed 2")));
        }
        if let Some((i, v)) = alpha.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
            return Err(Error::param(format!("alpha_{i} = {v} must lie in (0, 1)")));
        }
        let m: Vec<f64> = m[..=n_stages].to_vec();
        let alpha: Vec<f64> = alpha[..=n_stages].to_vec();
        let flat = |mi: f64| 1.0 - (2.0 / mi).sqrt();
        let ext = |mi: f64| (1.0 + 1.0 / mi).sqrt();

        let mut theta = vec![1.0];
        for n in 1..=n_stages {
            let prev = theta[n - 1];
            theta.push(prev * flat(m[n - 1]) * alpha[n] / ext(m[n]));
        }
        let beta = (1..=n_stages)
            .map(|n| theta[n - 1] * flat(m[n - 1]) * (1.0 - alpha[n]))
            .collect();

        let get_m = |i: usize| m.get(i).copied().unwrap_or_else(|| default_m(i));
        let get_a = |i: usize| alpha.get(i).copied().unwrap_or_else(|| default_alpha(i));
        let terms = THETA_TERMS.max(n_stages + 1);
        let head: f64 = (0..terms).map(|i| flat(get_m(i)) * get_a(i) / ext(get_m(i))).product();
        // Tail i ≥ terms uses the default formulas: each factor is at least
        // 1 - a_i with a_i = √(2/M_i) + (1 - α_i) + 1/(2M_i), and
        // Π(1 - a_i) ≥ 1 - Σ a_i.
        let t = terms as i32;
        let tail_sum = 2f64.powi(-(t + 1)) + 2f64.powi(-(2 * t + 5)) * 4.0 / 3.0;
        let theta_inf = head * (1.0 - tail_sum) * (1.0 - 1e-12);
        Ok(Self { m, alpha, theta, beta, theta_inf })
    }

    /// Number of stages after stage 0.
    pub fn n_stages(&self) -> usize {
        self.theta.len() - 1
    }

    /// Flat-extension width `θ_n (1 - √(2/M_n))`.
    pub fn collar(&self, n: usize) -> f64 {
        self.theta[n] * (1.0 - (2.0 / self.m[n]).sqrt())
    }

    /// `β_n` for `n ≥ 1`.
    pub fn beta(&self, n: usize) -> f64 {
        self.beta[n - 1]
    }
}

/// `M_n = 2^{2n+5}`, `α_n = 1 - 2^{-(n+2)}` for `n = 0..=n_stages`.
pub fn default_schedule(n_stages: usize) -> Result<ParameterSchedule> {
    if n_stages < 1 {
        return Err(Error::param("n_stages must be at least 1"));
    }
    ParameterSchedule::from_lists(
        (0..=n_stages).map(default_m).collect(),
        (0..=n_stages).map(default_alpha).collect(),
        n_stages,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    /// `Y_{Γ₀}` box plus the flat-extension collar of its stage.
    Collar,
    /// `Y_{Γ₀}` box plus the `θ` collar.
    Theta,
    /// A net family's truncated region, no collar.
    Net,
}

/// `{y + z : y ∈ Y_{Γ₀}, ‖y‖ < outer, y ∈ C^{<stage} or dist_lb(y, C^{<stage})
/// > residue; z supported off Γ₀ in the universe, ‖z‖_∞ ≤ collar}`, where
/// `C^{<stage}` is the union of the bodies of earlier stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPiece {
    pub kind: PieceKind,
    pub stage: usize,
    pub gamma0: Vec<Index>,
    pub norm: NormSpec,
    pub outer: f64,
    pub residue: f64,
    pub collar: f64,
}

impl RegionPiece {
    /// Whether `self` describes a subset of `other`.
    pub fn is_within(&self, other: &RegionPiece) -> bool {
        self.stage == other.stage
            && self.gamma0 == other.gamma0
            && self.norm == other.norm
            && self.outer <= other.outer
            && self.residue >= other.residue
            && self.collar <= other.collar
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveredRegion {
    pub universe: Vec<Index>,
    pub pieces: Vec<RegionPiece>,
}

/// Certificate for one pair of bodies (ids index the flattened list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub a: usize,
    pub b: usize,
    pub certificate: DisjointnessCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub gamma0: Vec<Index>,
    pub balls: usize,
    pub targets: usize,
    pub max_degree: usize,
    pub private_centers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringStage {
    pub n: usize,
    pub bodies: Vec<Body>,
    pub families: Vec<FamilySummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringKind {
    C0,
    CountableDim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub kind: CoveringKind,
    pub universe: Vec<Index>,
    pub schedule: Option<ParameterSchedule>,
    pub region: CoveredRegion,
    pub stages: Vec<CoveringStage>,
    pub ledger: Vec<LedgerEntry>,
}

impl Covering {
    /// All bodies in stage order; positions are the body ids.
    pub fn bodies(&self) -> Vec<&Body> {
        self.stages.iter().flat_map(|s| &s.bodies).collect()
    }

    pub fn stage_of(&self, body: &Body) -> usize {
        body.label.as_ref().map_or(0, |l| l.stage)
    }

    /// Union of the bodies of stages `< n`, indexed over the universe.
    pub fn union_before(&self, n: usize) -> BodySet {
        let bodies: Vec<Body> = self.stages.iter().filter(|s| s.n < n).flat_map(|s| s.bodies.clone()).collect();
        BodySet::new(bodies, self.universe.clone(), 0.25)
    }

    /// Union of all bodies, indexed over the universe.
    pub fn union(&self) -> BodySet {
        self.union_before(usize::MAX)
    }
}

/// Default truncation plan per stage (index `n - 1`).
pub fn default_truncation(n_stages: usize) -> Vec<NetParams> {
    let plan = [
        NetParams { h_max: 3, k_max: 20, grid: 0.01 },
        NetParams { h_max: 2, k_max: 6, grid: 0.02 },
        NetParams { h_max: 1, k_max: 2, grid: 0.05 },
    ];
    (0..n_stages)
        .map(|i| plan.get(i).copied().unwrap_or(NetParams { h_max: 0, k_max: 1, grid: 0.05 }))
        .collect()
}

fn subsets(gamma: &[Index], n: usize) -> Vec<Vec<Index>> {
    fn rec(gamma: &[Index], n: usize, start: usize, cur: &mut Vec<Index>, out: &mut Vec<Vec<Index>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..gamma.len() {
            cur.push(gamma[i]);
            rec(gamma, n, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(gamma, n, 0, &mut Vec::new(), &mut out);
    out
}

/// Checks that stage `n` cannot reach the uncovered parts of stage `n - 1`:
/// the residue band must be thinner than the clearance of the smallest
/// stage-`n` ball, and the stage-`n` box plus its largest ball must fit in
/// the stage-`n-1` box.
pub fn check_truncation(schedule: &ParameterSchedule, trunc: &[NetParams]) -> Result<()> {
    for n in 2..=trunc.len() {
        let prev = &trunc[n - 2];
        let cur = &trunc[n - 1];
        let ext = (1.0 + 1.0 / schedule.m[n]).sqrt();
        let clearance = annulus_radius(cur.k_max) * (2.0 - ext);
        if prev.residue() >= clearance {
            return Err(Error::Infeasible(format!(
                "stage {n}: residue {:.6} of stage {} is not below the clearance {clearance:.6} of the smallest \
                 stage-{n} ball; raise k_max of stage {} or lower k_max of stage {n}",
                prev.residue(),
                n - 1,
                n - 1
            )));
        }
        let reach = (cur.outer() + cur.grid + annulus_radius(0)) * ext;
        if reach >= prev.outer() {
            return Err(Error::Infeasible(format!(
                "stage {n}: box reach {reach:.4} exceeds the stage-{} box {}; lower h_max of stage {n}",
                n - 1,
                prev.outer()
            )));
        }
    }
    Ok(())
}

/// Staged covering of a finite truncation of `c0(Γ)`.
pub fn build_c0_covering(
    gamma: &[Index],
    n_stages: usize,
    schedule: &ParameterSchedule,
    truncation: &[NetParams],
) -> Result<Covering> {
    let mut universe = gamma.to_vec();
    universe.sort_unstable();
    universe.dedup();
    if universe.len() != gamma.len() {
        return Err(Error::param("duplicate indices in gamma"));
    }
    if n_stages > universe.len() {
        return Err(Error::Infeasible(format!(
            "n_stages = {n_stages} exceeds |gamma| = {}",
            universe.len()
        )));
    }
    if truncation.len() != n_stages {
        return Err(Error::param(format!(
            "truncation has {} stages, expected {n_stages}",
            truncation.len()
        )));
    }
    if schedule.n_stages() < n_stages {
        return Err(Error::param(format!(
            "schedule covers {} stages, expected {n_stages}",
            schedule.n_stages()
        )));
    }
    check_truncation(schedule, truncation)?;

    let m0 = schedule.m[0];
    let b0 = Body::new(SparseVector::zero(), 1.0, NormSpec::m_norm(m0))?
        .with_label(BodyLabel { stage: 0, theta: Some(1.0), ..Default::default() });
    let mut stages = vec![CoveringStage { n: 0, bodies: vec![b0], families: vec![] }];
    let mut pieces = vec![
        RegionPiece {
            kind: PieceKind::Collar,
            stage: 0,
            gamma0: vec![],
            norm: NormSpec::m_norm(m0),
            outer: 1.0,
            residue: 0.0,
            collar: 1.0,
        },
        RegionPiece {
            kind: PieceKind::Theta,
            stage: 0,
            gamma0: vec![],
            norm: NormSpec::m_norm(m0),
            outer: 1.0,
            residue: 0.0,
            collar: schedule.theta_inf,
        },
    ];

    for n in 1..=n_stages {
        let params = truncation[n - 1];
        let mn = schedule.m[n];
        let theta = schedule.theta[n];
        let spec = NormSpec::m_norm(mn);
        let earlier: Vec<Body> = stages.iter().flat_map(|s| s.bodies.clone()).collect();
        let c = BodySet::new(earlier, universe.clone(), 0.25);
        let families: Vec<(Vec<Index>, crate::nets::NetFamily)> = subsets(&universe, n)
            .into_par_iter()
            .map(|g0| build_lemma_family_with(&g0, &c, &spec, params).map(|f| (g0, f)))
            .collect::<Result<_>>()?;
        let mut bodies = Vec::new();
        let mut summaries = Vec::new();
        for (g0, fam) in families {
            for ball in &fam.balls {
                let q_tilde = ball.radius;
                let q = q_tilde / theta;
                let annulus = ball.label.as_ref().and_then(|l| l.annulus);
                let lifted = Body::new(ball.center.clone(), theta, NormSpec::scaled(mn, g0.iter().copied(), q))?
                    .with_label(BodyLabel {
                        stage: n,
                        gamma0: g0.clone(),
                        q: Some(q),
                        q_tilde: Some(q_tilde),
                        theta: Some(theta),
                        annulus,
                    });
                bodies.push(lifted);
            }
            summaries.push(FamilySummary {
                gamma0: g0.clone(),
                balls: fam.balls.len(),
                targets: fam.targets,
                max_degree: fam.max_degree,
                private_centers: fam.private_centers,
            });
            for (kind, collar) in [(PieceKind::Collar, schedule.collar(n)), (PieceKind::Theta, schedule.theta_inf)] {
                pieces.push(RegionPiece {
                    kind,
                    stage: n,
                    gamma0: g0.clone(),
                    norm: spec.clone(),
                    outer: params.outer(),
                    residue: params.residue(),
                    collar: if g0.len() == universe.len() { 0.0 } else { collar },
                });
            }
        }
        stages.push(CoveringStage { n, bodies, families: summaries });
    }

    let mut cov = Covering {
        kind: CoveringKind::C0,
        universe: universe.clone(),
        schedule: Some(schedule.clone()),
        region: CoveredRegion { universe, pieces },
        stages,
        ledger: vec![],
    };
    cov.ledger = certificate_ledger(&cov)?;
    Ok(cov)
}

/// Staged covering by balls of `ambient` on `Y_1 ⊂ … ⊂ Y_{n_stages}`.
pub fn build_countable_dim_covering(
    n_stages: usize,
    ambient: &NormSpec,
    truncation: &[NetParams],
) -> Result<Covering> {
    if n_stages < 1 {
        return Err(Error::param("n_stages must be at least 1"));
    }
    if !matches!(ambient, NormSpec::Sup | NormSpec::MNorm { .. }) {
        return Err(Error::param("ambient norm must be sup or an M-norm"));
    }
    ambient.validate()?;
    if truncation.len() != n_stages {
        return Err(Error::param(format!(
            "truncation has {} stages, expected {n_stages}",
            truncation.len()
        )));
    }
    let universe: Vec<Index> = (0..n_stages as Index).collect();
    let b0 = Body::new(SparseVector::zero(), 1.0, ambient.clone())?
        .with_label(BodyLabel { stage: 0, ..Default::default() });
    let mut stages = vec![CoveringStage { n: 0, bodies: vec![b0], families: vec![] }];
    let mut pieces = vec![RegionPiece {
        kind: PieceKind::Collar,
        stage: 0,
        gamma0: vec![],
        norm: ambient.clone(),
        outer: 1.0,
        residue: 0.0,
        collar: 1.0,
    }];
    for n in 1..=n_stages {
        let params = truncation[n - 1];
        let yn: Vec<Index> = (0..n as Index).collect();
        let earlier: Vec<Body> = stages.iter().flat_map(|s| s.bodies.clone()).collect();
        let c = BodySet::new(earlier, universe.clone(), 0.25);
        let fam = build_lemma_family_with(&yn, &c, ambient, params)?;
        let bodies: Vec<Body> = fam
            .balls
            .iter()
            .map(|b| {
                let mut b = b.clone();
                if let Some(l) = b.label.as_mut() {
                    l.stage = n;
                }
                b
            })
            .collect();
        pieces.push(RegionPiece {
            kind: PieceKind::Net,
            stage: n,
            gamma0: yn.clone(),
            norm: ambient.clone(),
            outer: params.outer(),
            residue: params.residue(),
            collar: 0.0,
        });
        stages.push(CoveringStage {
            n,
            bodies,
            families: vec![FamilySummary {
                gamma0: yn,
                balls: fam.balls.len(),
                targets: fam.targets,
                max_degree: fam.max_degree,
                private_centers: fam.private_centers,
            }],
        });
    }
    let mut cov = Covering {
        kind: CoveringKind::CountableDim,
        universe: universe.clone(),
        schedule: None,
        region: CoveredRegion { universe, pieces },
        stages,
        ledger: vec![],
    };
    cov.ledger = certificate_ledger(&cov)?;
    Ok(cov)
}

/// Whether a pair must be disjoint: different stages, or the same stage
/// with different `Γ₀`.
pub fn must_be_disjoint(a: &Body, b: &Body) -> bool {
    let (la, lb) = (a.label.as_ref(), b.label.as_ref());
    let stage = |l: Option<&BodyLabel>| l.map_or(0, |l| l.stage);
    let g0 = |l: Option<&BodyLabel>| l.map(|l| l.gamma0.clone()).unwrap_or_default();
    stage(la) != stage(lb) || g0(la) != g0(lb)
}

/// Certificates for every pair that must be disjoint and whose bounding
/// boxes overlap; other such pairs are separated by their boxes.
pub fn certificate_ledger(cov: &Covering) -> Result<Vec<LedgerEntry>> {
    let bodies = cov.bodies();
    let idx = BoxIndex::new(bodies.iter().map(|b| bounding_box(b, &cov.universe)).collect(), 0.25);
    let per_body: Vec<Vec<LedgerEntry>> = (0..bodies.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in idx.overlapping(idx.bbox(i)) {
                if j <= i || !must_be_disjoint(bodies[i], bodies[j]) {
                    continue;
                }
                if let Intersection::Disjoint { certificate } = intersects(bodies[i], bodies[j], 1e-9)? {
                    out.push(LedgerEntry { a: i, b: j, certificate });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_body.into_iter().flatten().collect())
}

/// Point in the declared piece built from a `Y_{Γ₀}` part and a collar part;
/// `None` when the `Y_{Γ₀}` part falls in the residue or outside the box.
pub fn piece_point(piece: &RegionPiece, before: &BodySet, y: &SparseVector, z: &SparseVector) -> Option<SparseVector> {
    if eval_norm_unchecked(&piece.norm, y) >= piece.outer {
        return None;
    }
    if piece.stage > 0 {
        let d = before.dist_lb(y, 2.0 * piece.residue + 1.0);
        if d != 0.0 && d <= piece.residue {
            return None;
        }
    }
    Some(y.add(z))
}
