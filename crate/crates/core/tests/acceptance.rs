//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use covlab::covering::default_schedule;
use covlab::format::{read_covering, BuildConfig};
use covlab::index::BodySet;
use covlab::nets::{build_lemma_family_with, GridBox, NetParams};
use covlab::norms::fenchel::{Axis, SampledFunction};
use covlab::norms::infconv::{self, Operator, OuterNorm};
use covlab::norms::mnorm;
use covlab::probes::{c0_counterexample, Rational};
use covlab::verifier::{check_coverage, find_singular_candidates};
use covlab::{eval_norm, intersects, norming_functional, Body, Index, NormSpec, SparseVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    check(e < limit, || format!("runtime {e:?} exceeds {limit:?}"))?;
    Ok(e)
}

fn random_sparse(rng: &mut ChaCha8Rng, max_support: usize, universe: Index, scale: f64) -> SparseVector {
    let k = rng.gen_range(1..=max_support);
    SparseVector::from_pairs((0..k).map(|_| (rng.gen_range(0..universe), rng.gen_range(-scale..scale))))
}

/// `min_t t² + M Σ (|x_i| - t)₊²` over a uniform t-grid.
fn grid_mnorm(x: &SparseVector, m: f64, step: f64) -> f64 {
    let top = x.norm_sup();
    let n = (top / step).ceil() as usize;
    (0..=n)
        .map(|k| {
            let t = (k as f64 * step).min(top);
            t * t + m * x.values().map(|v| (v.abs() - t).max(0.0).powi(2)).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_grid, mut worst_cert) = (0.0f64, 0.0f64);
    for k in 0..1000 {
        let m = [8.0, 32.0, 128.0][k % 3];
        let x = random_sparse(&mut rng, 8, 64, 3.0);
        let n = eval_norm(&NormSpec::m_norm(m), &x).map_err(|e| e.to_string())?;
        worst_grid = worst_grid.max((n - grid_mnorm(&x, m, 1e-4)).abs());
        let abs: Vec<f64> = x.values().collect();
        let c = mnorm::solve(&abs, m);
        let tt = c.threshold;
        let direct = tt * tt + m * abs.iter().map(|v| (v.abs() - tt).max(0.0).powi(2)).sum::<f64>();
        worst_cert = worst_cert.max((n - direct.sqrt()).abs()).max((n * n - c.value_sq).abs());
    }
    check(worst_grid <= 1e-3, || format!("grid oracle gap {worst_grid:e}"))?;
    check(worst_cert <= 1e-12, || format!("certificate gap {worst_cert:e}"))?;
    let e = within(t, Duration::from_secs(10))?;
    Ok(format!("max |grid - exact| = {worst_grid:.2e}, max certificate gap = {worst_cert:.2e}, {e:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for k in 0..10_000 {
        let m = [8.0, 32.0, 128.0, 3.0, 1000.0][k % 5];
        let x = random_sparse(&mut rng, 10, 40, 10.0);
        let n = eval_norm(&NormSpec::m_norm(m), &x).map_err(|e| e.to_string())?;
        let s = x.norm_sup();
        if n > s + 1e-10 || s > (1.0 + 1.0 / m).sqrt() * n + 1e-10 {
            violations += 1;
        }
    }
    check(violations == 0, || format!("{violations} violations"))?;
    Ok("10000 vectors, 0 violations".into())
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for m in [8.0, 32.0, 128.0] {
        let spec = NormSpec::m_norm(m);
        let cap = 1.0 - (2.0 / m).sqrt();
        for k in 0..1000 {
            let x = random_sparse(&mut rng, 6, 20, 2.0);
            let x = x.scale(1.0 / eval_norm(&spec, &x).map_err(|e| e.to_string())?);
            let y = SparseVector::from_pairs(
                random_sparse(&mut rng, 6, 20, 1.0).iter().map(|(i, v)| (i + 20, v)),
            );
            // Every fourth instance sits exactly on the bound.
            let target = if k % 4 == 0 { cap } else { rng.gen_range(0.0..cap) };
            let y = y.scale(target / y.norm_sup().max(f64::MIN_POSITIVE));
            worst = worst.max((eval_norm(&spec, &x.add(&y)).map_err(|e| e.to_string())? - 1.0).abs());
        }
    }
    check(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("3000 instances, max |‖x+y‖_M - 1| = {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_pair, mut worst_fd) = (0.0f64, 0.0f64);
    for k in 0..200 {
        let d = 1 + k % 6;
        let m = [8.0, 32.0, 128.0][k % 3];
        let spec = if k % 2 == 0 {
            NormSpec::m_norm(m)
        } else {
            NormSpec::scaled(m, (0..d as Index).filter(|i| i % 2 == 0), rng.gen_range(0.5..2.0))
        };
        let coords: Vec<Index> = (0..d as Index).collect();
        let vals: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = SparseVector::from_coords(&coords, &vals);
        if x.norm_sup() < 1e-3 {
            continue;
        }
        let f = norming_functional(&spec, &x).map_err(|e| e.to_string())?;
        let n = |v: &SparseVector| eval_norm(&spec, v).expect("valid norm");
        worst_pair = worst_pair.max((n(&x) - f.apply(&x)).abs());
        let h = 1e-6;
        for &i in &coords {
            let e = SparseVector::basis(i).scale(h);
            let fd = (n(&x.add(&e)) - n(&x.sub(&e))) / (2.0 * h);
            worst_fd = worst_fd.max((fd - f.coeffs().get(i)).abs());
        }
    }
    check(worst_pair <= 1e-7, || format!("pairing gap {worst_pair:e}"))?;
    check(worst_fd <= 1e-4, || format!("finite-difference gap {worst_fd:e}"))?;
    Ok(format!("200 points, pairing gap {worst_pair:.2e}, gradient gap {worst_fd:.2e}"))
}

fn criterion_5() -> Outcome {
    let m = 8.0;
    let step = 0.01;
    let primal = vec![Axis::spanning(-3.0, 3.0, step); 2];
    let spec = NormSpec::m_norm(m);
    let sq = SampledFunction::sample(primal, |p| {
        eval_norm(&spec, &SparseVector::from_coords(&[0, 1], p)).expect("valid").powi(2)
    })
    .map_err(|e| e.to_string())?;
    let dual_closed = |f: &[f64]| {
        let l1: f64 = f.iter().map(|v| v.abs()).sum();
        let l2: f64 = f.iter().map(|v| v * v).sum();
        l1 * l1 + l2 / m
    };
    let duals = Axis::spanning(-2.0, 2.0, 0.5);
    let mut worst_d = 0.0f64;
    for i in 0..duals.len {
        for j in 0..duals.len {
            let f = [duals.node(i), duals.node(j)];
            let got = sq.conjugate_at(&f).map_err(|e| e.to_string())?;
            worst_d = worst_d.max((got - dual_closed(&f) / 4.0).abs());
        }
    }
    check(worst_d <= 2.0 * step, || format!("squared-norm conjugate off by {worst_d}"))?;

    let rows = vec![vec![1.0, 0.5], vec![0.25, 1.0]];
    let t = Operator { rows: &rows };
    let (mt, step_t) = (2.0, 0.02);
    let h = SampledFunction::sample(vec![Axis::spanning(-3.0, 3.0, step_t); 2], |p| {
        infconv::norm(OuterNorm::Sup, t, mt, p).powi(2)
    })
    .map_err(|e| e.to_string())?;
    let formula = |f: &[f64]| {
        let l1: f64 = f.iter().map(|v| v.abs()).sum();
        let tf = [rows[0][0] * f[0] + rows[1][0] * f[1], rows[0][1] * f[0] + rows[1][1] * f[1]];
        l1 * l1 + (tf[0] * tf[0] + tf[1] * tf[1]) / mt
    };
    let mut worst_t = 0.0f64;
    let duals = Axis::spanning(-1.5, 1.5, 0.5);
    for i in 0..duals.len {
        for j in 0..duals.len {
            let f = [duals.node(i), duals.node(j)];
            worst_t = worst_t.max((h.conjugate_at(&f).map_err(|e| e.to_string())? - formula(&f) / 4.0).abs());
        }
    }
    check(worst_t <= 2.0 * step_t, || format!("operator dual formula off by {worst_t}"))?;
    Ok(format!("(‖·‖²)* gap {worst_d:.2e} (step {step}), operator dual gap {worst_t:.2e} (step {step_t})"))
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut runs = 0;
    for delta in [Rational::new(1, 10), Rational::new(1, 100)] {
        let two_delta = (delta * Rational::from_integer(2)).to_string();
        let pair = (Rational::from_integer(2) * (Rational::from_integer(1) + delta)).to_string();
        for n in 2..=20 {
            let r = c0_counterexample(n, delta).map_err(|e| e.to_string())?;
            check(r.pairwise_disjoint && r.origin_disjoint, || format!("n={n} δ={delta}: not disjoint"))?;
            check(r.dist_e1_exact.iter().all(|d| *d == two_delta), || format!("n={n} δ={delta}: dist(e1,B) ≠ 2δ"))?;
            check(r.center_distance_exact == vec![pair.clone()], || format!("n={n}: pair distances {:?}", r.center_distance_exact))?;
            runs += 1;
        }
    }
    let e = within(t, Duration::from_secs(1))?;
    Ok(format!("{runs} families, dist(e1,B) = 2δ exactly, {e:.2?}"))
}

/// Exact sup distance to a sup-norm ball.
fn sup_dist(b: &Body, x: &SparseVector) -> f64 {
    (x.sub(&b.center).norm_sup() - b.radius).max(0.0)
}

fn net_family_case(coords: &[Index], c: Vec<Body>, h_max: u32, k_max: u32) -> Result<String, String> {
    let set = BodySet::new(c.clone(), coords.to_vec(), 0.25);
    let params = NetParams::new(h_max, k_max);
    let fam = build_lemma_family_with(coords, &set, &NormSpec::Sup, params).map_err(|e| e.to_string())?;
    for (i, b) in fam.balls.iter().enumerate() {
        for (j, cb) in c.iter().enumerate() {
            let r = intersects(b, cb, 1e-9).map_err(|e| e.to_string())?;
            check(r.is_disjoint(), || format!("ball {i} not certified disjoint from C[{j}]"))?;
        }
    }
    let dist_c = |x: &SparseVector| c.iter().map(|b| sup_dist(b, x)).fold(f64::INFINITY, f64::min);
    let outer = params.outer();
    let mut checked = 0;
    for p in GridBox::cube(coords.to_vec(), outer).grid(0.01) {
        let x = SparseVector::from_coords(coords, &p);
        if x.norm_sup() >= outer || dist_c(&x) <= fam.residue {
            continue;
        }
        checked += 1;
        check(fam.balls.iter().any(|b| b.contains(&x)), || format!("grid point {p:?} uncovered"))?;
    }
    let mut union = c.clone();
    union.extend(fam.balls.iter().cloned());
    let all = BodySet::new(union, coords.to_vec(), 0.25);
    let scan = GridBox::cube(coords.to_vec(), outer - 0.1);
    let cands = find_singular_candidates(&all, &scan, 0.01).map_err(|e| e.to_string())?;
    let bound = 1.0 / k_max as f64 + 0.01;
    let far = cands.iter().map(dist_c).fold(0.0, f64::max);
    check(far <= bound, || format!("singular candidate at distance {far} > {bound}"))?;
    Ok(format!("d={}: {} balls, {checked} grid points, {} candidates (max dist {far:.3})", coords.len(), fam.balls.len(), cands.len()))
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let ball = |c: &[f64], r: f64| Body::new(SparseVector::from_dense(c), r, NormSpec::Sup).expect("valid body");
    let one = net_family_case(&[0], vec![ball(&[0.0], 1.0)], 2, 6)?;
    let two = net_family_case(&[0, 1], vec![ball(&[0.0, 0.0], 1.0), ball(&[1.5, -1.2], 0.5)], 1, 6)?;
    let e = within(t, Duration::from_secs(60))?;
    Ok(format!("{one}; {two}; {e:.2?}"))
}

const SAMPLES: usize = 100_000;

fn covlab(args: &[&str], threads: Option<&str>) -> Result<std::process::Output, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_covlab"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("COVLAB_THREADS", t);
    }
    cmd.output().map_err(|e| e.to_string())
}

struct Built {
    covering: String,
    report: String,
}

fn build_and_verify(dir: &Path, tag: &str, threads: Option<&str>) -> Result<(Built, Duration), String> {
    let t = Instant::now();
    let cfg = BuildConfig { gamma_size: 3, n_stages: 3, samples: SAMPLES, seed: 1, ..BuildConfig::default() };
    let cfg_path = dir.join(format!("config_{tag}.json"));
    std::fs::write(&cfg_path, cfg.to_json()).map_err(|e| e.to_string())?;
    let cov = dir.join(format!("covering_{tag}.json"));
    let rep = dir.join(format!("report_{tag}.json"));
    let (c, r) = (cov.to_str().unwrap(), rep.to_str().unwrap());
    let o = covlab(&["build", cfg_path.to_str().unwrap(), "--output", c], threads)?;
    check(o.status.code() == Some(0), || format!("build exited {:?}", o.status.code()))?;
    let s = SAMPLES.to_string();
    let o = covlab(&["verify", c, "--samples", &s, "--seed", "1", "--report", r], threads)?;
    check(o.status.code() == Some(0), || format!("verify exited {:?}", o.status.code()))?;
    Ok((Built { covering: c.into(), report: r.into() }, t.elapsed()))
}

fn criterion_8(dir: &Path) -> Outcome {
    let (b, e) = build_and_verify(dir, "a", None)?;
    check(e < Duration::from_secs(600), || format!("runtime {e:?}"))?;
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&b.report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(r["graph"]["forbidden_edges"].as_array().is_some_and(|a| a.is_empty()), || "cross-stage edges".into())?;
    check(r["coverage"]["misses"].as_array().is_some_and(|a| a.is_empty()), || "coverage misses".into())?;
    check(r["unresolved"].as_array().is_some_and(|a| a.is_empty()), || "unresolved pairs".into())?;
    let pieces = r["coverage"]["pieces"].as_array().cloned().unwrap_or_default();
    check(pieces.iter().all(|p| p["samples"].as_u64() == Some(SAMPLES as u64)), || "short sample count".into())?;
    let per = &r["margins"]["per_claim_min"];
    let s = default_schedule(3).map_err(|e| e.to_string())?;
    let mut margins = Vec::new();
    for n in 1..=2 {
        let got = per[format!("cross_gamma0_stage_{n}")].as_f64().ok_or("missing claim margin")?;
        check(got >= s.beta(n) - 1e-9, || format!("stage {n} margin {got} < β = {}", s.beta(n)))?;
        margins.push(format!("stage {n} {got:.4} ≥ β {:.4}", s.beta(n)));
    }
    Ok(format!(
        "exit 0, max degree {}, {} pieces × {SAMPLES} samples, {}, {e:.1?}",
        r["graph"]["max_degree"],
        pieces.len(),
        margins.join(", ")
    ))
}

fn criterion_9(dir: &Path) -> Outcome {
    let cov = read_covering(&dir.join("covering_a.json")).map_err(|e| e.to_string())?;
    let stage1 = cov.stages.iter().position(|s| s.n == 1).ok_or("no stage 1")?;
    let mut ids: Vec<usize> = (0..cov.stages[stage1].bodies.len()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    ids.truncate(20);
    let mut least = usize::MAX;
    for &i in &ids {
        let mut mutated = cov.clone();
        let removed = mutated.stages[stage1].bodies.remove(i);
        let g0 = removed.label.as_ref().map(|l| l.gamma0.clone()).unwrap_or_default();
        let mut misses = 0;
        for piece in cov.region.pieces.iter().filter(|p| p.stage == 1 && p.gamma0 == g0) {
            misses += check_coverage(&mutated, piece, SAMPLES, 1).map_err(|e| e.to_string())?.misses.len();
        }
        check(misses > 0, || format!("deleting stage-1 body {i} left no miss"))?;
        least = least.min(misses);
    }
    Ok(format!("{} deletions, each with ≥ {least} misses", ids.len()))
}

fn criterion_10(dir: &Path) -> Outcome {
    let (b, _) = build_and_verify(dir, "b", Some("3"))?;
    let read = |p: &str| std::fs::read(p).map_err(|e| e.to_string());
    check(read(&b.covering)? == read(dir.join("covering_a.json").to_str().unwrap())?, || "coverings differ".into())?;
    check(read(&b.report)? == read(dir.join("report_a.json").to_str().unwrap())?, || "reports differ".into())?;
    Ok("covering and report byte-identical across runs (second run with COVLAB_THREADS=3)".into())
}

fn run(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    match r {
        Ok(msg) => {
            println!("criterion {n}: PASS ({msg})");
            true
        }
        Err(msg) => {
            println!("criterion {n}: FAIL ({msg})");
            false
        }
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let results = [
        run(1, criterion_1),
        run(2, criterion_2),
        run(3, criterion_3),
        run(4, criterion_4),
        run(5, criterion_5),
        run(6, criterion_6),
        run(7, criterion_7),
        run(8, || criterion_8(d)),
        run(9, || criterion_9(d)),
        run(10, || criterion_10(d)),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
