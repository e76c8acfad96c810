//! Discrete Legendre–Fenchel transform on box grids.
//!
//! `f*(x*) = sup_x { ⟨x*, x⟩ - f(x) }` is approximated by the maximum over the
//! sampled grid. The sup is only over the sampled box, which is reported with
//! the result; callers pick a box large enough to contain the maximizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a uniform grid: `min, min + step, …` with `len` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(min: f64, step: f64, len: usize) -> Self {
        Self { min, step, len }
    }

    /// Axis covering `[lo, hi]` with the given step.
    pub fn spanning(lo: f64, hi: f64, step: f64) -> Self {
        let len = ((hi - lo) / step).round() as usize + 1;
        Self { min: lo, step, len }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.node(self.len.saturating_sub(1))
    }
}

/// A function sampled on a box grid; values are row-major with the last
/// axis fastest. `+∞` marks points outside the effective domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.len).product();
        if axes.is_empty() || n == 0 {
            return Err(Error::param("empty grid"));
        }
        if values.len() != n {
            return Err(Error::param(format!("expected {n} samples, got {}", values.len())));
        }
        Ok(Self { axes, values })
    }

    pub fn sample(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.len).product();
        if axes.is_empty() || n == 0 {
            return Err(Error::param("empty grid"));
        }
        let mut values = Vec::with_capacity(n);
        let mut p = vec![0.0; axes.len()];
        for flat in 0..n {
            fill_point(&axes, flat, &mut p);
            values.push(f(&p));
        }
        Ok(Self { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// The sampled box `[(lo, hi)]` per axis; no claim is made outside it.
    pub fn domain_box(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.min, a.max())).collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.axes.len()];
        fill_point(&self.axes, flat, &mut p);
        p
    }

    /// `max_x { ⟨x*, x⟩ - f(x) }` over the grid.
    pub fn conjugate_at(&self, xstar: &[f64]) -> Result<f64> {
        if xstar.len() != self.dim() {
            return Err(Error::param("dual point dimension mismatch"));
        }
        let mut p = vec![0.0; self.dim()];
        let mut best = f64::NEG_INFINITY;
        for (flat, &v) in self.values.iter().enumerate() {
            if v == f64::INFINITY {
                continue;
            }
            fill_point(&self.axes, flat, &mut p);
            let s: f64 = xstar.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() - v;
            best = best.max(s);
        }
        Ok(best)
    }

    /// Pointwise discrete transform sampled on `dual_axes`.
    pub fn legendre(&self, dual_axes: Vec<Axis>) -> Result<SampledFunction> {
        if dual_axes.len() != self.dim() {
            return Err(Error::param("dual grid dimension mismatch"));
        }
        let n: usize = dual_axes.iter().map(|a| a.len).product();
        if n == 0 {
            return Err(Error::param("empty grid"));
        }
        let mut values = Vec::with_capacity(n);
        let mut q = vec![0.0; dual_axes.len()];
        for flat in 0..n {
            fill_point(&dual_axes, flat, &mut q);
            values.push(self.conjugate_at(&q)?);
        }
        SampledFunction::new(dual_axes, values)
    }
}

fn fill_point(axes: &[Axis], mut flat: usize, out: &mut [f64]) {
    for (k, ax) in axes.iter().enumerate().rev() {
        out[k] = ax.node(flat % ax.len);
        flat /= ax.len;
    }
}
