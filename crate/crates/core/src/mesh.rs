//! Axis-separable Cartesian meshes in one to three dimensions.
//!
//! A mesh is stored as one strictly increasing vertex list per axis.
//! Elements are numbered lexicographically with the x index fastest.

use crate::error::{Error, Result};
use crate::quadrature::{make_rule, RuleKind};

#[derive(Clone, Debug, PartialEq)]
pub struct CartesianMesh {
    axes: Vec<Vec<f64>>,
}

/// Low-order refinement: split every element into `subdivisions` pieces per
/// axis at the points of a closed node family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LorSpec {
    pub subdivisions: usize,
    pub node_set: RuleKind,
}

impl LorSpec {
    pub fn new(subdivisions: usize, node_set: RuleKind) -> Self {
        LorSpec {
            subdivisions,
            node_set,
        }
    }

    /// Split positions on `[-1, 1]`.
    pub fn split_points(&self) -> Result<Vec<f64>> {
        if !self.node_set.is_closed() {
            return Err(Error::arg(format!(
                "LOR refinement needs a closed node set, got {}",
                self.node_set
            )));
        }
        Ok(make_rule(self.node_set, self.subdivisions)?.points)
    }
}

impl CartesianMesh {
    /// Builds a mesh directly from per-axis vertex lists.
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::arg(format!("dimension {} not in 1..=3", axes.len())));
        }
        for (a, v) in axes.iter().enumerate() {
            if v.len() < 2 {
                return Err(Error::arg(format!("axis {a} needs at least two vertices")));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::arg(format!("axis {a} vertices not strictly increasing")));
            }
        }
        Ok(CartesianMesh { axes })
    }

    /// Uniform mesh with `counts[a]` elements on `[box[a].0, box[a].1]`.
    pub fn uniform(counts: &[usize], bbox: &[(f64, f64)]) -> Result<Self> {
        if counts.len() != bbox.len() {
            return Err(Error::arg("element counts and box have different dimensions"));
        }
        let mut axes = Vec::with_capacity(counts.len());
        for (a, (&n, &(lo, hi))) in counts.iter().zip(bbox).enumerate() {
            if n == 0 {
                return Err(Error::arg(format!("axis {a} needs at least one element")));
            }
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::arg(format!("degenerate box on axis {a}: [{lo}, {hi}]")));
            }
            let mut v: Vec<f64> = (0..=n)
                .map(|i| lo + (hi - lo) * (i as f64 / n as f64))
                .collect();
            v[n] = hi;
            axes.push(v);
        }
        Self::from_axes(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn elements_along(&self, a: usize) -> usize {
        self.axes[a].len() - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.dim()).map(|a| self.elements_along(a)).collect()
    }

    pub fn num_elements(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes
            .iter()
            .map(|v| (v[0], *v.last().unwrap()))
            .collect()
    }

    /// Per-axis indices of element `e`.
    pub fn element_multi(&self, mut e: usize) -> [usize; 3] {
        let mut m = [0; 3];
        for (a, slot) in m.iter_mut().enumerate().take(self.dim()) {
            let n = self.elements_along(a);
            *slot = e % n;
            e /= n;
        }
        m
    }

    pub fn element_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (a, &m) in multi.iter().enumerate().take(self.dim()) {
            idx += m * stride;
            stride *= self.elements_along(a);
        }
        idx
    }

    /// `[lo, hi]` of element `i` along axis `a`.
    pub fn interval(&self, a: usize, i: usize) -> (f64, f64) {
        (self.axes[a][i], self.axes[a][i + 1])
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        let m = self.element_multi(e);
        (0..self.dim())
            .map(|a| {
                let (lo, hi) = self.interval(a, m[a]);
                hi - lo
            })
            .product()
    }

    pub fn volume(&self) -> f64 {
        self.axes
            .iter()
            .map(|v| v.last().unwrap() - v[0])
            .product()
    }

    /// Largest element width over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|v| v.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }

    /// Locates the element containing `x` along axis `a`; points on a shared
    /// vertex go to the element on the right, except the last vertex.
    pub fn locate(&self, a: usize, x: f64) -> Option<usize> {
        let v = &self.axes[a];
        if x < v[0] || x > *v.last().unwrap() {
            return None;
        }
        let idx = v.partition_point(|&vx| vx <= x);
        Some(idx.saturating_sub(1).min(v.len() - 2))
    }

    /// Halves every element along every axis.
    pub fn refine_uniform(&self) -> CartesianMesh {
        let axes = self
            .axes
            .iter()
            .map(|v| {
                let mut out = Vec::with_capacity(2 * v.len() - 1);
                for w in v.windows(2) {
                    out.push(w[0]);
                    out.push(0.5 * (w[0] + w[1]));
                }
                out.push(*v.last().unwrap());
                out
            })
            .collect();
        CartesianMesh { axes }
    }

    pub fn refine_uniform_times(&self, k: usize) -> CartesianMesh {
        (0..k).fold(self.clone(), |m, _| m.refine_uniform())
    }

    /// Number of sub-intervals per element of `self` that `fine` uses on every
    /// axis, when `fine` is a nested refinement of `self`.
    pub fn refinement_factor(&self, fine: &CartesianMesh) -> Option<usize> {
        if fine.dim() != self.dim() {
            return None;
        }
        let factor = fine.elements_along(0) / self.elements_along(0);
        if factor == 0 {
            return None;
        }
        for a in 0..self.dim() {
            let coarse = &self.axes[a];
            let f = &fine.axes[a];
            if f.len() != (coarse.len() - 1) * factor + 1 {
                return None;
            }
            for (i, &x) in coarse.iter().enumerate() {
                let y = f[i * factor];
                let scale = 1.0 + x.abs();
                if (y - x).abs() > 1e-13 * scale {
                    return None;
                }
            }
        }
        Some(factor)
    }
}

/// Splits every element of `coarse` at the mapped points of `spec.node_set`.
/// The coarse vertices are copied exactly into the refined mesh.
pub fn make_lor_mesh(coarse: &CartesianMesh, spec: LorSpec) -> Result<CartesianMesh> {
    let nodes = spec.split_points()?;
    let axes = coarse
        .axes
        .iter()
        .map(|v| {
            let mut out = Vec::with_capacity((v.len() - 1) * spec.subdivisions + 1);
            for w in v.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                out.push(lo);
                for &t in &nodes[1..nodes.len() - 1] {
                    out.push(lo + 0.5 * (t + 1.0) * (hi - lo));
                }
            }
            out.push(*v.last().unwrap());
            out
        })
        .collect();
    CartesianMesh::from_axes(axes)
}
