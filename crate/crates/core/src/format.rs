//! File formats: plain-text vectors, covering JSON (format version "1"),
//! build configurations.
//!
//! Vector text: one `index value` pair per line, `#` starts a comment, and
//! a line holding only `---` separates consecutive vectors in a family file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bodies::{Body, BodyLabel};
use crate::covering::{
    default_alpha, default_m, default_schedule, default_truncation, CoveredRegion, Covering, CoveringKind,
    CoveringStage, FamilySummary, LedgerEntry, ParameterSchedule,
};
use crate::error::{Error, Result};
use crate::nets::NetParams;
use crate::norms::NormSpec;
use crate::sparse::{Index, SparseVector};

pub const FORMAT_VERSION: &str = "1";

fn fmt_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Format { line, msg: msg.into() }
}

/// Parses a family of vectors separated by `---` lines.
pub fn parse_vectors(text: &str) -> Result<Vec<SparseVector>> {
    let mut out = Vec::new();
    let mut cur: Vec<(Index, f64)> = Vec::new();
    let mut started = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body == "---" {
            out.push(SparseVector::from_pairs(std::mem::take(&mut cur)));
            started = false;
            continue;
        }
        started = true;
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(fmt_err(line, format!("expected `index value`, found {} fields", toks.len())));
        }
        let i: Index = toks[0].parse().map_err(|_| fmt_err(line, format!("bad index {:?}", toks[0])))?;
        let v: f64 = toks[1].parse().map_err(|_| fmt_err(line, format!("bad value {:?}", toks[1])))?;
        if !v.is_finite() {
            return Err(fmt_err(line, format!("value {v} is not finite")));
        }
        if cur.iter().any(|e| e.0 == i) {
            return Err(fmt_err(line, format!("duplicate index {i}")));
        }
        cur.push((i, v));
    }
    if started || out.is_empty() {
        out.push(SparseVector::from_pairs(cur));
    }
    Ok(out)
}

/// Parses a single vector; a `---` separator is an error.
pub fn parse_vector(text: &str) -> Result<SparseVector> {
    if let Some(k) = text.lines().position(|l| l.split('#').next().unwrap_or("").trim() == "---") {
        return Err(fmt_err(k + 1, "separator in a single-vector file"));
    }
    Ok(parse_vectors(text)?.remove(0))
}

pub fn write_vector(v: &SparseVector) -> String {
    v.iter().map(|(i, x)| format!("{i} {x}\n")).collect()
}

pub fn read_vector(path: &Path) -> Result<SparseVector> {
    parse_vector(&std::fs::read_to_string(path)?)
}

pub fn read_vectors(path: &Path) -> Result<Vec<SparseVector>> {
    parse_vectors(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRecord {
    pub id: usize,
    pub stage: usize,
    pub gamma0: Vec<Index>,
    pub center: SparseVector,
    pub radius: f64,
    pub spec: NormSpec,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus: Option<(u32, u32)>,
}

fn spec_m(spec: &NormSpec) -> Option<f64> {
    match spec {
        NormSpec::Sup => None,
        NormSpec::MNorm { m } | NormSpec::Scaled { m, .. } | NormSpec::InfConv { m, .. } => Some(*m),
    }
}

impl BodyRecord {
    pub fn from_body(id: usize, b: &Body) -> Self {
        let l = b.label.clone().unwrap_or_default();
        Self {
            id,
            stage: l.stage,
            gamma0: l.gamma0,
            center: b.center.clone(),
            radius: b.radius,
            spec: b.spec.clone(),
            m: spec_m(&b.spec),
            q: l.q,
            q_tilde: l.q_tilde,
            theta_n: l.theta,
            annulus: l.annulus,
        }
    }

    pub fn to_body(&self) -> Result<Body> {
        if self.m.is_some() && self.m != spec_m(&self.spec) {
            return Err(Error::param(format!("body {}: M does not match its norm", self.id)));
        }
        let label = BodyLabel {
            stage: self.stage,
            gamma0: self.gamma0.clone(),
            q: self.q,
            q_tilde: self.q_tilde,
            theta: self.theta_n,
            annulus: self.annulus,
        };
        Ok(Body::new(self.center.clone(), self.radius, self.spec.clone())?.with_label(label))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub n: usize,
    pub families: Vec<FamilySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringHeader {
    pub kind: CoveringKind,
    pub universe: Vec<Index>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ParameterSchedule>,
    pub covered_region: CoveredRegion,
    pub stages: Vec<StageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringFile {
    pub format_version: String,
    pub header: CoveringHeader,
    pub bodies: Vec<BodyRecord>,
    pub certificates: Vec<LedgerEntry>,
}

impl CoveringFile {
    pub fn from_covering(cov: &Covering) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            header: CoveringHeader {
                kind: cov.kind,
                universe: cov.universe.clone(),
                schedule: cov.schedule.clone(),
                covered_region: cov.region.clone(),
                stages: cov.stages.iter().map(|s| StageSummary { n: s.n, families: s.families.clone() }).collect(),
            },
            bodies: cov.bodies().iter().enumerate().map(|(i, b)| BodyRecord::from_body(i, b)).collect(),
            certificates: cov.ledger.clone(),
        }
    }

    pub fn into_covering(self) -> Result<Covering> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::param(format!("unsupported format_version {:?}", self.format_version)));
        }
        let mut stages: Vec<CoveringStage> = self
            .header
            .stages
            .into_iter()
            .map(|s| CoveringStage { n: s.n, bodies: vec![], families: s.families })
            .collect();
        let mut at = 0;
        for (k, r) in self.bodies.iter().enumerate() {
            if r.id != k {
                return Err(Error::param(format!("body ids must be 0, 1, …; found {} at position {k}", r.id)));
            }
            while at < stages.len() && stages[at].n != r.stage {
                at += 1;
            }
            let Some(stage) = stages.get_mut(at) else {
                return Err(Error::param(format!("body {k}: stage {} out of order or undeclared", r.stage)));
            };
            stage.bodies.push(r.to_body()?);
        }
        let n = self.bodies.len();
        if let Some(e) = self.certificates.iter().find(|e| e.a >= n || e.b >= n) {
            return Err(Error::param(format!("certificate refers to missing body {}-{}", e.a, e.b)));
        }
        Ok(Covering {
            kind: self.header.kind,
            universe: self.header.universe,
            schedule: self.header.schedule,
            region: self.header.covered_region,
            stages,
            ledger: self.certificates,
        })
    }
}

fn json_err(e: serde_json::Error) -> Error {
    fmt_err(e.line(), e.to_string())
}

pub fn covering_to_json(cov: &Covering) -> String {
    let mut s = serde_json::to_string_pretty(&CoveringFile::from_covering(cov)).expect("covering serializes");
    s.push('\n');
    s
}

pub fn covering_from_json(text: &str) -> Result<Covering> {
    serde_json::from_str::<CoveringFile>(text).map_err(json_err)?.into_covering()
}

pub fn write_covering(path: &Path, cov: &Covering) -> Result<()> {
    Ok(std::fs::write(path, covering_to_json(cov))?)
}

pub fn read_covering(path: &Path) -> Result<Covering> {
    covering_from_json(&std::fs::read_to_string(path)?)
}

/// Per-stage truncation; `grid` defaults to [`NetParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationEntry {
    pub h_max: u32,
    pub k_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<f64>,
}

impl TruncationEntry {
    pub fn params(&self) -> NetParams {
        let mut p = NetParams::new(self.h_max, self.k_max);
        if let Some(g) = self.grid {
            p.grid = g;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub gamma_size: usize,
    pub n_stages: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Vec<TruncationEntry>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_samples() -> usize {
    100_000
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            gamma_size: 2,
            n_stages: 2,
            m: None,
            alpha: None,
            truncation: None,
            samples: default_samples(),
            seed: 0,
            output: None,
        }
    }
}

impl BuildConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(json_err)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn gamma(&self) -> Vec<Index> {
        (0..self.gamma_size as Index).collect()
    }

    /// Default lists with any overrides applied entry by entry.
    pub fn schedule(&self) -> Result<ParameterSchedule> {
        if self.m.is_none() && self.alpha.is_none() {
            return default_schedule(self.n_stages);
        }
        let fill = |o: &Option<Vec<f64>>, d: fn(usize) -> f64| -> Vec<f64> {
            (0..=self.n_stages).map(|i| o.as_ref().and_then(|v| v.get(i).copied()).unwrap_or_else(|| d(i))).collect()
        };
        ParameterSchedule::from_lists(fill(&self.m, default_m), fill(&self.alpha, default_alpha), self.n_stages)
    }

    pub fn truncation(&self) -> Result<Vec<NetParams>> {
        match &self.truncation {
            None => Ok(default_truncation(self.n_stages)),
            Some(t) if t.len() == self.n_stages => Ok(t.iter().map(TruncationEntry::params).collect()),
            Some(t) => Err(Error::param(format!("truncation lists {} stages, expected {}", t.len(), self.n_stages))),
        }
    }
}
