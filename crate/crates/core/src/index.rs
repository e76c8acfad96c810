//! Axis-aligned bounding boxes and a uniform-grid hash over them, plus
//! [`BodySet`], a union of bodies answering membership and certified
//! distance queries.

use std::collections::HashMap;

use crate::bodies::{dist_lower, Body};
use crate::sparse::{Index, SparseVector};

/// Bounding box of a body over `coords`; exact per coordinate.
pub fn bounding_box(b: &Body, coords: &[Index]) -> Vec<(f64, f64)> {
    coords.iter().map(|&i| b.coordinate_range(i)).collect()
}

/// Sup distance from a dense point to a box (0 inside).
pub fn box_distance(bx: &[(f64, f64)], p: &[f64]) -> f64 {
    bx.iter()
        .zip(p)
        .fold(0.0, |m, (&(lo, hi), &x)| m.max(lo - x).max(x - hi))
}

pub fn boxes_overlap(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.0 <= y.1 && y.0 <= x.1)
}

/// Items spanning more than this many cells along an axis skip the hash and
/// are returned by every query.
const MAX_SPAN: i64 = 64;

#[derive(Debug, Clone)]
pub struct BoxIndex {
    cell: f64,
    boxes: Vec<Vec<(f64, f64)>>,
    cells: HashMap<Vec<i64>, Vec<u32>>,
    wide: Vec<u32>,
}

impl BoxIndex {
    pub fn new(boxes: Vec<Vec<(f64, f64)>>, cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut idx = BoxIndex { cell, boxes: Vec::new(), cells: HashMap::new(), wide: Vec::new() };
        for b in boxes {
            idx.push(b);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn bbox(&self, i: usize) -> &[(f64, f64)] {
        &self.boxes[i]
    }

    fn cell_range(&self, lo: f64, hi: f64) -> (i64, i64) {
        ((lo / self.cell).floor() as i64, (hi / self.cell).floor() as i64)
    }

    pub fn push(&mut self, b: Vec<(f64, f64)>) -> usize {
        let id = self.boxes.len() as u32;
        let ranges: Vec<(i64, i64)> = b.iter().map(|&(lo, hi)| self.cell_range(lo, hi)).collect();
        if ranges.iter().any(|&(a, z)| z - a > MAX_SPAN) {
            self.wide.push(id);
        } else {
            for key in cells_in(&ranges) {
                self.cells.entry(key).or_default().push(id);
            }
        }
        self.boxes.push(b);
        id as usize
    }

    /// Items whose box contains `p`.
    pub fn at_point(&self, p: &[f64]) -> Vec<usize> {
        let key: Vec<i64> = p.iter().map(|&x| (x / self.cell).floor() as i64).collect();
        let mut out: Vec<usize> = self
            .cells
            .get(&key)
            .into_iter()
            .flatten()
            .chain(&self.wide)
            .map(|&i| i as usize)
            .filter(|&i| box_distance(&self.boxes[i], p) <= 0.0)
            .collect();
        out.sort_unstable();
        out
    }

    /// Items whose box overlaps `q`, sorted.
    pub fn overlapping(&self, q: &[(f64, f64)]) -> Vec<usize> {
        let ranges: Vec<(i64, i64)> = q.iter().map(|&(lo, hi)| self.cell_range(lo, hi)).collect();
        let mut out: Vec<usize> = if ranges.iter().any(|&(a, z)| z - a > MAX_SPAN) {
            (0..self.boxes.len()).collect()
        } else {
            cells_in(&ranges)
                .filter_map(|k| self.cells.get(&k))
                .flatten()
                .chain(&self.wide)
                .map(|&i| i as usize)
                .collect()
        };
        out.sort_unstable();
        out.dedup();
        out.retain(|&i| boxes_overlap(&self.boxes[i], q));
        out
    }
}

/// Integer cell keys of the product of inclusive ranges, last axis fastest.
pub fn cells_in(ranges: &[(i64, i64)]) -> impl Iterator<Item = Vec<i64>> + '_ {
    let total: i64 = ranges.iter().map(|&(a, z)| z - a + 1).product();
    (0..total).map(move |mut flat| {
        let mut key = vec![0; ranges.len()];
        for (k, &(a, z)) in ranges.iter().enumerate().rev() {
            let n = z - a + 1;
            key[k] = a + flat % n;
            flat /= n;
        }
        key
    })
}

/// A finite union of bodies with an index over the coordinates `coords`.
/// Queried points are expected to be supported in `coords`.
#[derive(Debug, Clone)]
pub struct BodySet {
    pub bodies: Vec<Body>,
    pub coords: Vec<Index>,
    index: BoxIndex,
}

impl BodySet {
    pub fn new(bodies: Vec<Body>, coords: Vec<Index>, cell: f64) -> Self {
        let boxes = bodies.iter().map(|b| bounding_box(b, &coords)).collect();
        Self { index: BoxIndex::new(boxes, cell), bodies, coords }
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn index(&self) -> &BoxIndex {
        &self.index
    }

    pub fn dense(&self, x: &SparseVector) -> Vec<f64> {
        x.to_dense(&self.coords)
    }

    /// Index of the first body containing `x`.
    pub fn containing(&self, x: &SparseVector) -> Option<usize> {
        let p = self.dense(x);
        self.index.at_point(&p).into_iter().find(|&i| self.bodies[i].contains(x))
    }

    /// All bodies containing `x`.
    pub fn all_containing(&self, x: &SparseVector) -> Vec<usize> {
        let p = self.dense(x);
        self.index.at_point(&p).into_iter().filter(|&i| self.bodies[i].contains(x)).collect()
    }

    /// `min(cap, min_B dist_lower(B, x))`: a certified lower bound on the sup
    /// distance from `x` to the union, saturated at `cap`. Infinite when the
    /// set is empty and `cap` is infinite.
    pub fn dist_lb(&self, x: &SparseVector, cap: f64) -> f64 {
        if self.containing(x).is_some() {
            return 0.0;
        }
        let p = self.dense(x);
        let mut near: Vec<(f64, usize)> = (0..self.bodies.len())
            .filter_map(|i| {
                let d = box_distance(self.index.bbox(i), &p);
                (d < cap).then_some((d, i))
            })
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best = cap;
        for (lb, i) in near {
            if lb >= best {
                break;
            }
            best = best.min(dist_lower(&self.bodies[i], x).value.max(lb));
            if best == 0.0 {
                break;
            }
        }
        best
    }
}
