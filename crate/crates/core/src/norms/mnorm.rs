//! Exact evaluation of the infimal-convolution norm
//! `‖x‖²_M = inf { ‖x₁‖²_∞ + M‖x₂‖²_2 : x₁ + x₂ = x }`.
//!
//! Fixing `t = ‖x₁‖_∞`, the best `x₁` clips `x` coordinatewise to `[-t, t]`, so
//!
//! ```text
//! ‖x‖²_M = min_{t ≥ 0}  t² + M Σ_γ ((|x_γ| - t)₊)²
//! ```
//!
//! a convex piecewise quadratic in `t` with breakpoints at the distinct
//! `|x_γ|`. On the piece where exactly the `k` largest magnitudes exceed `t`
//! the stationary point is `t = M S_k / (1 + M k)` with `S_k` their sum.

use serde::{Deserialize, Serialize};

/// Certificate of an exact M-norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MNormCertificate {
    /// Optimal sup-norm level `t*` of the clipped component.
    pub threshold: f64,
    /// Number of coordinates with `|x_γ| > t*`.
    pub active: usize,
    /// `‖x‖²_M`, recomputed directly from the threshold.
    pub value_sq: f64,
    /// `|t* - M Σ (|x_γ| - t*)₊|`, zero at the exact optimum.
    pub stationarity_residual: f64,
}

/// Solves the one-dimensional problem for the magnitudes `abs` (any order,
/// all finite). Returns the certificate; the norm is `value_sq.sqrt()`.
pub fn solve(abs: &[f64], m: f64) -> MNormCertificate {
    let mut a: Vec<f64> = abs.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    if a.is_empty() {
        return MNormCertificate {
            threshold: 0.0,
            active: 0,
            value_sq: 0.0,
            stationarity_residual: 0.0,
        };
    }
    a.sort_by(|x, y| y.total_cmp(x));

    // Minimize each piece's quadratic over its interval [a_{k+1}, a_k]; the
    // smallest piece minimum is the global minimum.
    let mut best: Option<(f64, f64, usize)> = None;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for k in 1..=a.len() {
        sum += a[k - 1];
        sum_sq += a[k - 1] * a[k - 1];
        let hi = a[k - 1];
        let lo = a.get(k).copied().unwrap_or(0.0);
        let kf = k as f64;
        let t = (m * sum / (1.0 + m * kf)).clamp(lo, hi);
        let val = t * t + m * (sum_sq - 2.0 * t * sum + kf * t * t);
        if best.is_none_or(|(_, b, _)| val < b) {
            best = Some((t, val, k));
        }
    }
    let (t, _, _) = best.expect("nonempty");

    // Recompute objective and residual directly at t, without prefix sums.
    let excess: Vec<f64> = a.iter().map(|&v| (v - t).max(0.0)).collect();
    let active = excess.iter().filter(|&&e| e > 0.0).count();
    let value_sq = t * t + m * excess.iter().map(|e| e * e).sum::<f64>();
    let residual = (t - m * excess.iter().sum::<f64>()).abs();
    MNormCertificate {
        threshold: t,
        active,
        value_sq,
        stationarity_residual: residual,
    }
}

/// Norm value.
pub fn norm(abs: &[f64], m: f64) -> f64 {
    solve(abs, m).value_sq.sqrt()
}

/// Dual norm `√(‖f‖₁² + ‖f‖₂²/M)`.
pub fn dual(coeffs: &[f64], m: f64) -> f64 {
    let l1: f64 = coeffs.iter().map(|v| v.abs()).sum();
    let l2sq: f64 = coeffs.iter().map(|v| v * v).sum();
    (l1 * l1 + l2sq / m).sqrt()
}

/// Maximizer of `f(x)` over the dual unit ball, for nonzero `x`.
///
/// The KKT conditions of `max Σ f_γ x_γ s.t. ‖f‖₁² + ‖f‖₂²/M ≤ 1` force
/// `f_γ = s · sign(x_γ) (|x_γ| - c)₊` where `c = M Σ (|x_γ| - c)₊`, the same
/// fixed point as the primal threshold. The scale `s` normalizes the dual norm.
pub fn dual_ball_maximizer(x: &[f64], m: f64) -> Vec<f64> {
    let cert = solve(x, m);
    let c = cert.threshold;
    let raw: Vec<f64> = x
        .iter()
        .map(|&v| v.signum() * (v.abs() - c).max(0.0))
        .collect();
    let d = dual(&raw, m);
    raw.iter().map(|v| v / d).collect()
}
