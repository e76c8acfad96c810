//! General infimal-convolution norms
//! `|||x|||² = inf { ‖u‖² + M|y|² : x = u + Ty }` on finite coordinates.
//!
//! Two instances are shipped: `‖·‖ = ‖·‖_∞` and `‖·‖ = |·|₂`, both with the
//! Euclidean norm on the parameter space. Evaluation minimizes
//! `φ(y) = ‖x - Ty‖² + M|y|²` over `y`; the returned value is `√φ(y)` at a
//! feasible `y`, so it never undershoots the infimum.

use serde::{Deserialize, Serialize};

/// Relative duality gap at which the sup-norm solver stops.
pub const GAP_TOL: f64 = 1e-14;
/// Sweep budget for the sup-norm solver.
const MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterNorm {
    Sup,
    Euclidean,
}

impl OuterNorm {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            OuterNorm::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            OuterNorm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// Dual norm: ℓ1 for sup, ℓ2 for Euclidean.
    pub fn dual(self, v: &[f64]) -> f64 {
        match self {
            OuterNorm::Sup => v.iter().map(|x| x.abs()).sum(),
            OuterNorm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// Dense row-major operator `T : R^cols → R^rows`.
#[derive(Debug, Clone, Copy)]
pub struct Operator<'a> {
    pub rows: &'a [Vec<f64>],
}

impl Operator<'_> {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, y)).collect()
    }

    pub fn adjoint(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        for (r, &fi) in self.rows.iter().zip(f) {
            for (o, &t) in out.iter_mut().zip(r) {
                *o += t * fi;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective `φ(y)`.
pub fn objective(outer: OuterNorm, t: Operator<'_>, m: f64, x: &[f64], y: &[f64]) -> f64 {
    let ty = t.apply(y);
    let resid: Vec<f64> = x.iter().zip(&ty).map(|(a, b)| a - b).collect();
    let u = outer.eval(&resid);
    u * u + m * dot(y, y)
}

/// Result of a minimization: the minimizing parameter and lower/upper bounds
/// on `|||x|||²`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub y: Vec<f64>,
    pub upper_sq: f64,
    pub lower_sq: f64,
}

pub fn solve(outer: OuterNorm, t: Operator<'_>, m: f64, x: &[f64]) -> Solution {
    match outer {
        OuterNorm::Euclidean => solve_euclidean(t, m, x),
        OuterNorm::Sup => solve_sup(t, m, x),
    }
}

pub fn norm(outer: OuterNorm, t: Operator<'_>, m: f64, x: &[f64]) -> f64 {
    solve(outer, t, m, x).upper_sq.sqrt()
}

/// `√(‖f‖_*² + |Tᵀf|₂²/M)`.
pub fn dual(outer: OuterNorm, t: Operator<'_>, m: f64, f: &[f64]) -> f64 {
    let a = outer.dual(f);
    let tf = t.adjoint(f);
    (a * a + dot(&tf, &tf) / m).sqrt()
}

/// Conjugate gradients on the normal equations `(TᵀT + M I) y = Tᵀx`, the
/// stationarity condition of the smooth objective.
fn solve_euclidean(t: Operator<'_>, m: f64, x: &[f64]) -> Solution {
    let n = t.ncols();
    let apply_h = |v: &[f64]| -> Vec<f64> {
        let tv = t.apply(v);
        let mut out = t.adjoint(&tv);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += m * vi;
        }
        out
    };
    let rhs = t.adjoint(x);
    let mut y = vec![0.0; n];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let scale = dot(&rhs, &rhs).max(f64::MIN_POSITIVE);
    for _ in 0..(4 * n + 8) {
        if rr <= 1e-32 * scale {
            break;
        }
        let hp = apply_h(&p);
        let alpha = rr / dot(&p, &hp);
        for i in 0..n {
            y[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    let upper_sq = objective(OuterNorm::Euclidean, t, m, x, &y);
    // Strong convexity (modulus 2M in y): gap ≤ |∇φ|² / (4M).
    let grad = {
        let h = apply_h(&y);
        h.iter().zip(&rhs).map(|(a, b)| 2.0 * (a - b)).collect::<Vec<_>>()
    };
    let lower_sq = (upper_sq - dot(&grad, &grad) / (4.0 * m)).max(0.0);
    Solution { y, upper_sq, lower_sq }
}

/// Coordinate ascent on the dual of the quadratic program
/// `min s² + M|y|² s.t. -s ≤ x_i - (Ty)_i ≤ s`.
fn solve_sup(t: Operator<'_>, m: f64, x: &[f64]) -> Solution {
    let rows = t.nrows();
    let n = t.ncols();
    // Variables z = (s, y); H = diag(2, 2M, …); constraint rows a_j·z ≤ b_j.
    let hinv: Vec<f64> = std::iter::once(0.5).chain(std::iter::repeat_n(0.5 / m, n)).collect();
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(2 * rows);
    let mut b: Vec<f64> = Vec::with_capacity(2 * rows);
    for (i, r) in t.rows.iter().enumerate() {
        a.push(std::iter::once(-1.0).chain(r.iter().map(|v| -v)).collect());
        b.push(-x[i]);
        a.push(std::iter::once(-1.0).chain(r.iter().copied()).collect());
        b.push(x[i]);
    }
    let qdiag: Vec<f64> = a
        .iter()
        .map(|aj| aj.iter().zip(&hinv).map(|(v, h)| v * v * h).sum())
        .collect();
    let mut lambda = vec![0.0; a.len()];
    let mut w = vec![0.0; n + 1];
    let primal_y = |w: &[f64]| -> Vec<f64> { (0..n).map(|k| -hinv[k + 1] * w[k + 1]).collect() };
    let dual_value = |w: &[f64], lambda: &[f64]| -> f64 {
        -0.5 * w.iter().zip(&hinv).map(|(v, h)| v * v * h).sum::<f64>() - dot(&b, lambda)
    };

    let mut best_y = vec![0.0; n];
    let mut best_upper = objective(OuterNorm::Sup, t, m, x, &best_y);
    let mut best_lower = 0.0f64;
    for sweep in 0..MAX_SWEEPS {
        for j in 0..a.len() {
            let grad = -a[j].iter().zip(&w).zip(&hinv).map(|((aj, wj), h)| aj * wj * h).sum::<f64>() - b[j];
            let new = (lambda[j] + grad / qdiag[j]).max(0.0);
            let delta = new - lambda[j];
            if delta != 0.0 {
                lambda[j] = new;
                for (wk, ak) in w.iter_mut().zip(&a[j]) {
                    *wk += delta * ak;
                }
            }
        }
        if sweep % 16 == 15 || sweep + 1 == MAX_SWEEPS {
            let y = primal_y(&w);
            let up = objective(OuterNorm::Sup, t, m, x, &y);
            if up < best_upper {
                best_upper = up;
                best_y = y;
            }
            best_lower = best_lower.max(dual_value(&w, &lambda));
            if best_upper - best_lower <= GAP_TOL * best_upper.max(1e-300) {
                break;
            }
        }
    }
    Solution {
        y: best_y,
        upper_sq: best_upper,
        lower_sq: best_lower.max(0.0),
    }
}
