//! Matrix-free mass operators by sum factorization.
//!
//! Every operator loops over the elements of a *base* mesh. The base is the
//! coarse mesh for mixed operators and the space's own mesh for square ones.
//! Spaces living on a nested refinement of the base are traced onto it: their
//! 1D factors become block matrices with one block per sub-interval.
//! Quadrature is a Gauss rule mapped into every sub-interval of the finest
//! participating mesh, so piecewise polynomial integrands are integrated
//! exactly.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fespace::{ensure_same, FESpace, Field};
use crate::mesh::CartesianMesh;
use crate::poly::{barycentric_weights, lagrange_values};
use crate::quadrature::gauss;

/// 1D Lagrange factor of a tensor basis.
#[derive(Clone, Debug)]
pub struct Basis1D {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl Basis1D {
    pub fn new(nodes: Vec<f64>) -> Self {
        let bary = barycentric_weights(&nodes);
        Basis1D { nodes, bary }
    }

    pub fn of_space(space: &FESpace) -> Self {
        Basis1D::new(space.nodes().to_vec())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Row-major `points.len() × len()` matrix of basis values at reference
    /// points.
    pub fn eval_matrix(&self, points: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut b = vec![0.0; points.len() * k];
        for (row, &x) in b.chunks_mut(k).zip(points) {
            lagrange_values(&self.nodes, &self.bary, x, row);
        }
        b
    }
}

/// Tensor Gauss quadrature on the elements of a base mesh, with every base
/// element split into `pieces` sub-intervals per axis.
#[derive(Clone, Debug)]
pub(crate) struct ElementQuadrature {
    base: CartesianMesh,
    pieces: usize,
    points_per_piece: usize,
    // [axis][base element along axis] -> physical points / weights
    pts: Vec<Vec<Vec<f64>>>,
    wts: Vec<Vec<Vec<f64>>>,
}

impl ElementQuadrature {
    /// `fine`, when given, is a nested refinement of `base` whose elements
    /// define the sub-intervals.
    pub(crate) fn new(
        base: &CartesianMesh,
        fine: Option<&CartesianMesh>,
        points_per_piece: usize,
    ) -> Result<Self> {
        let (pieces, fine) = match fine {
            Some(f) => (
                base.refinement_factor(f)
                    .ok_or_else(|| Error::arg("mesh is not a nested refinement of the base"))?,
                f,
            ),
            None => (1, base),
        };
        let rule = gauss(points_per_piece.max(1));
        let mut pts = Vec::with_capacity(base.dim());
        let mut wts = Vec::with_capacity(base.dim());
        for a in 0..base.dim() {
            let mut pa = Vec::with_capacity(base.elements_along(a));
            let mut wa = Vec::with_capacity(base.elements_along(a));
            for e in 0..base.elements_along(a) {
                let mut p = Vec::with_capacity(pieces * rule.len());
                let mut w = Vec::with_capacity(pieces * rule.len());
                for s in 0..pieces {
                    let (lo, hi) = fine.interval(a, e * pieces + s);
                    let h = hi - lo;
                    for (x, wq) in rule.points.iter().zip(rule.weights()) {
                        p.push(lo + 0.5 * (x + 1.0) * h);
                        w.push(0.5 * h * wq);
                    }
                }
                pa.push(p);
                wa.push(w);
            }
            pts.push(pa);
            wts.push(wa);
        }
        Ok(ElementQuadrature {
            base: base.clone(),
            pieces,
            points_per_piece: rule.len(),
            pts,
            wts,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.base.dim()
    }

    pub(crate) fn per_axis(&self) -> usize {
        self.pieces * self.points_per_piece
    }

    fn shape(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for slot in s.iter_mut().take(self.dim()) {
            *slot = self.per_axis();
        }
        s
    }

    /// Physical points of base element `em`, x index fastest.
    pub(crate) fn points(&self, em: &[usize; 3]) -> Vec<[f64; 3]> {
        let n = self.per_axis();
        let total = n.pow(self.dim() as u32);
        (0..total)
            .map(|l| {
                let mut p = [0.0; 3];
                let mut rem = l;
                for (a, slot) in p.iter_mut().enumerate().take(self.dim()) {
                    *slot = self.pts[a][em[a]][rem % n];
                    rem /= n;
                }
                p
            })
            .collect()
    }

    /// Tensor weights with the Jacobian folded in.
    pub(crate) fn weights(&self, em: &[usize; 3]) -> Vec<f64> {
        let n = self.per_axis();
        let total = n.pow(self.dim() as u32);
        (0..total)
            .map(|l| {
                let mut w = 1.0;
                let mut rem = l;
                for a in 0..self.dim() {
                    w *= self.wts[a][em[a]][rem % n];
                    rem /= n;
                }
                w
            })
            .collect()
    }
}

#[derive(Default)]
pub(crate) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Contracts axis `axis` of `input` (tensor of `shape`, first index fastest)
/// with `mat` (row-major `nq × nl`). Forward maps an axis of length `nl` to
/// `nq`; the transpose maps `nq` back to `nl`.
#[allow(clippy::too_many_arguments)]
fn contract_axis(
    input: &[f64],
    shape: &mut [usize; 3],
    axis: usize,
    mat: &[f64],
    nq: usize,
    nl: usize,
    forward: bool,
    out: &mut Vec<f64>,
) {
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let (in_len, out_len) = if forward { (nl, nq) } else { (nq, nl) };
    debug_assert_eq!(shape[axis], in_len);
    out.clear();
    out.resize(outer * out_len * inner, 0.0);
    for o in 0..outer {
        for io in 0..out_len {
            let dst = (o * out_len + io) * inner;
            for ii in 0..in_len {
                let c = if forward {
                    mat[io * nl + ii]
                } else {
                    mat[ii * nl + io]
                };
                if c == 0.0 {
                    continue;
                }
                let src = (o * in_len + ii) * inner;
                for t in 0..inner {
                    out[dst + t] += c * input[src + t];
                }
            }
        }
    }
    shape[axis] = out_len;
}

/// A space's basis restricted to the elements of a quadrature base.
#[derive(Clone, Debug)]
pub(crate) struct SpaceTrace {
    space: Arc<FESpace>,
    factor: usize,
    nloc: usize,
    // [axis][base element] -> row-major nq × nloc
    b: Vec<Vec<Vec<f64>>>,
    // [axis][base element] -> nloc global offsets
    offsets: Vec<Vec<Vec<usize>>>,
}

impl SpaceTrace {
    pub(crate) fn new(space: &Arc<FESpace>, quad: &ElementQuadrature) -> Result<Self> {
        let factor = quad
            .base
            .refinement_factor(space.mesh())
            .ok_or_else(|| Error::arg("space mesh is not a nested refinement of the base"))?;
        if quad.pieces % factor != 0 {
            return Err(Error::arg(
                "space sub-elements do not align with the quadrature pieces",
            ));
        }
        let k = space.nodes_per_axis();
        let nloc = factor * k;
        let nq = quad.per_axis();
        let per_sub = nq / factor;
        let basis = Basis1D::of_space(space);
        let mut b = Vec::with_capacity(space.dim());
        let mut offsets = Vec::with_capacity(space.dim());
        let mut vals = vec![0.0; k];
        for a in 0..space.dim() {
            let mut ba = Vec::new();
            let mut oa = Vec::new();
            for e in 0..quad.base.elements_along(a) {
                let mut mat = vec![0.0; nq * nloc];
                let mut offs = Vec::with_capacity(nloc);
                for s in 0..factor {
                    let fe = e * factor + s;
                    let (lo, hi) = space.mesh().interval(a, fe);
                    for q in s * per_sub..(s + 1) * per_sub {
                        let xi = 2.0 * (quad.pts[a][e][q] - lo) / (hi - lo) - 1.0;
                        lagrange_values(basis.nodes(), &basis.bary, xi, &mut vals);
                        mat[q * nloc + s * k..q * nloc + (s + 1) * k].copy_from_slice(&vals);
                    }
                    for j in 0..k {
                        offs.push(space.axis_offset(a, fe, j));
                    }
                }
                ba.push(mat);
                oa.push(offs);
            }
            b.push(ba);
            offsets.push(oa);
        }
        Ok(SpaceTrace {
            space: space.clone(),
            factor,
            nloc,
            b,
            offsets,
        })
    }

    pub(crate) fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    fn local_len(&self) -> usize {
        self.nloc.pow(self.space.dim() as u32)
    }

    /// Global DOF of every local tensor index of base element `em`.
    pub(crate) fn local_dofs(&self, em: &[usize; 3]) -> Vec<usize> {
        let dim = self.space.dim();
        let n = self.nloc;
        (0..self.local_len())
            .map(|l| {
                let mut rem = l;
                let mut idx = 0;
                for a in 0..dim {
                    idx += self.offsets[a][em[a]][rem % n];
                    rem /= n;
                }
                idx
            })
            .collect()
    }

    fn gather(&self, em: &[usize; 3], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let dim = self.space.dim();
        let n = self.nloc;
        let o = |a: usize| -> &[usize] {
            if a < dim {
                &self.offsets[a][em[a]]
            } else {
                &[0]
            }
        };
        let (o0, o1, o2) = (o(0), o(1), o(2));
        for &c in o2 {
            for &b in o1 {
                for &a in o0 {
                    out.push(x[a + b + c]);
                }
            }
        }
        debug_assert_eq!(out.len(), n.pow(dim as u32));
    }

    fn scatter(&self, em: &[usize; 3], vals: &[f64], y: &mut [f64]) {
        let dim = self.space.dim();
        let o = |a: usize| -> &[usize] {
            if a < dim {
                &self.offsets[a][em[a]]
            } else {
                &[0]
            }
        };
        let (o0, o1, o2) = (o(0), o(1), o(2));
        let mut l = 0;
        for &c in o2 {
            for &b in o1 {
                for &a in o0 {
                    y[a + b + c] += vals[l];
                    l += 1;
                }
            }
        }
    }

    /// Local coefficients -> values at the quadrature points (in `s.a`).
    fn local_to_quad(&self, quad: &ElementQuadrature, em: &[usize; 3], s: &mut Scratch) {
        let nq = quad.per_axis();
        let mut shape = [1; 3];
        for slot in shape.iter_mut().take(self.space.dim()) {
            *slot = self.nloc;
        }
        for a in 0..self.space.dim() {
            contract_axis(&s.a, &mut shape, a, &self.b[a][em[a]], nq, self.nloc, true, &mut s.b);
            std::mem::swap(&mut s.a, &mut s.b);
        }
    }

    /// Quadrature values (in `s.a`) -> local test-function integrals (in `s.a`).
    fn quad_to_local(&self, quad: &ElementQuadrature, em: &[usize; 3], s: &mut Scratch) {
        let nq = quad.per_axis();
        let mut shape = quad.shape();
        for a in 0..self.space.dim() {
            contract_axis(&s.a, &mut shape, a, &self.b[a][em[a]], nq, self.nloc, false, &mut s.b);
            std::mem::swap(&mut s.a, &mut s.b);
        }
    }

    pub(crate) fn gather_to_quad(
        &self,
        quad: &ElementQuadrature,
        em: &[usize; 3],
        x: &[f64],
        s: &mut Scratch,
    ) -> Vec<f64> {
        let mut buf = std::mem::take(&mut s.a);
        self.gather(em, x, &mut buf);
        s.a = buf;
        self.local_to_quad(quad, em, s);
        s.a.clone()
    }

    /// Adds `Σ_q vals[q] ψ_i(x_q)` into `y`; `vals` already carry the weights.
    pub(crate) fn scatter_from_quad(
        &self,
        quad: &ElementQuadrature,
        em: &[usize; 3],
        vals: &[f64],
        y: &mut [f64],
        s: &mut Scratch,
    ) {
        s.a.clear();
        s.a.extend_from_slice(vals);
        self.quad_to_local(quad, em, s);
        self.scatter(em, &s.a, y);
    }
}

/// Square or mixed mass matrix, optionally weighted by a density field.
#[derive(Clone, Debug)]
pub struct MassOperator {
    quad: ElementQuadrature,
    rows: SpaceTrace,
    cols: Option<SpaceTrace>,
    weight: Option<(SpaceTrace, Field)>,
}

impl MassOperator {
    /// `(M)_{ij} = ∫ ρ ψ_i ψ_j` on `space`, `ρ = 1` when `weight` is `None`.
    pub fn square(space: &Arc<FESpace>, weight: Option<&Field>) -> Result<Self> {
        Self::build(space.mesh(), space, None, weight)
    }

    /// `(M_LH)_{ik} = ∫ ρ ψ^L_i ψ^H_k` with rows on `low` and columns on
    /// `high`; `low` must live on a nested refinement of the mesh of `high`.
    pub fn mixed(low: &Arc<FESpace>, high: &Arc<FESpace>, weight: Option<&Field>) -> Result<Self> {
        Self::build(high.mesh(), low, Some(high), weight)
    }

    fn build(
        base: &CartesianMesh,
        rows: &Arc<FESpace>,
        cols: Option<&Arc<FESpace>>,
        weight: Option<&Field>,
    ) -> Result<Self> {
        let mut finest = rows.mesh();
        let mut factor = base
            .refinement_factor(rows.mesh())
            .ok_or_else(|| Error::arg("row space is not on a refinement of the base mesh"))?;
        let mut meshes = vec![];
        if let Some(c) = cols {
            meshes.push(c.mesh());
        }
        if let Some(w) = weight {
            meshes.push(w.space().mesh());
        }
        for m in meshes {
            let f = base
                .refinement_factor(m)
                .ok_or_else(|| Error::arg("space is not on a refinement of the base mesh"))?;
            if f > factor {
                if f % factor != 0 {
                    return Err(Error::arg("refinement factors are not nested"));
                }
                factor = f;
                finest = m;
            } else if factor % f != 0 {
                return Err(Error::arg("refinement factors are not nested"));
            }
        }
        let deg_r = rows.degree();
        let deg_c = cols.map_or(deg_r, |c| c.degree());
        let deg_w = weight.map_or(0, |w| w.space().degree());
        let g = deg_r.max(deg_c) + 1 + deg_w.div_ceil(2);
        let fine = (factor > 1).then_some(finest);
        let quad = ElementQuadrature::new(base, fine, g)?;
        let row_trace = SpaceTrace::new(rows, &quad)?;
        let col_trace = cols.map(|c| SpaceTrace::new(c, &quad)).transpose()?;
        let weight = weight
            .map(|w| SpaceTrace::new(w.space(), &quad).map(|t| (t, w.clone())))
            .transpose()?;
        Ok(MassOperator {
            quad,
            rows: row_trace,
            cols: col_trace,
            weight,
        })
    }

    pub fn row_space(&self) -> &Arc<FESpace> {
        self.rows.space()
    }

    pub fn col_space(&self) -> &Arc<FESpace> {
        self.col_trace().space()
    }

    pub fn is_square(&self) -> bool {
        self.cols.is_none()
    }

    pub fn weight(&self) -> Option<&Field> {
        self.weight.as_ref().map(|(_, f)| f)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_space().dof_count(), self.col_space().dof_count())
    }

    pub fn num_elements(&self) -> usize {
        self.quad.base.num_elements()
    }

    fn col_trace(&self) -> &SpaceTrace {
        self.cols.as_ref().unwrap_or(&self.rows)
    }

    /// Quadrature weights times the density at the points of element `em`.
    fn point_weights(&self, em: &[usize; 3], s: &mut Scratch) -> Vec<f64> {
        let mut w = self.quad.weights(em);
        if let Some((trace, field)) = &self.weight {
            let rho = trace.gather_to_quad(&self.quad, em, field.coefficients(), s);
            w.iter_mut().zip(&rho).for_each(|(w, r)| *w *= r);
        }
        w
    }

    /// Smallest density value over all quadrature points; `1` when unweighted.
    pub fn min_weight(&self) -> f64 {
        let Some((trace, field)) = &self.weight else {
            return 1.0;
        };
        let mut s = Scratch::default();
        let mut min = f64::INFINITY;
        for e in 0..self.num_elements() {
            let em = self.quad.base.element_multi(e);
            let rho = trace.gather_to_quad(&self.quad, &em, field.coefficients(), &mut s);
            min = rho.iter().copied().fold(min, f64::min);
        }
        min
    }

    fn apply_impl(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        let (src, dst) = if transpose {
            (&self.rows, self.col_trace())
        } else {
            (self.col_trace(), &self.rows)
        };
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut s = Scratch::default();
        let mut ws = Scratch::default();
        for e in 0..self.num_elements() {
            let em = self.quad.base.element_multi(e);
            let w = self.point_weights(&em, &mut ws);
            let mut buf = std::mem::take(&mut s.a);
            src.gather(&em, x, &mut buf);
            s.a = buf;
            src.local_to_quad(&self.quad, &em, &mut s);
            s.a.iter_mut().zip(&w).for_each(|(v, w)| *v *= w);
            dst.quad_to_local(&self.quad, &em, &mut s);
            dst.scatter(&em, &s.a, y);
        }
    }

    /// `y = M x` on raw coefficient slices.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.col_space().dof_count());
        assert_eq!(y.len(), self.row_space().dof_count());
        self.apply_impl(x, y, false);
    }

    /// `y = Mᵀ x` on raw coefficient slices.
    pub fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.row_space().dof_count());
        assert_eq!(y.len(), self.col_space().dof_count());
        self.apply_impl(x, y, true);
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.row_space().dof_count()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.col_space().dof_count()];
        self.apply_transpose_into(x, &mut y);
        y
    }

    pub fn apply(&self, x: &Field) -> Result<Field> {
        ensure_same(x.space(), self.col_space())?;
        Field::new(self.row_space().clone(), self.apply_vec(x.coefficients()))
    }

    pub fn apply_transpose(&self, x: &Field) -> Result<Field> {
        ensure_same(x.space(), self.row_space())?;
        Field::new(self.col_space().clone(), self.apply_transpose_vec(x.coefficients()))
    }

    /// Diagonal of the assembled square matrix.
    pub fn diagonal(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::arg("diagonal of a mixed mass operator"));
        }
        let t = &self.rows;
        let nq = self.quad.per_axis();
        let squares: Vec<Vec<Vec<f64>>> = t
            .b
            .iter()
            .map(|per| per.iter().map(|m| m.iter().map(|v| v * v).collect()).collect())
            .collect();
        let mut y = vec![0.0; t.space.dof_count()];
        let mut s = Scratch::default();
        let mut ws = Scratch::default();
        for e in 0..self.num_elements() {
            let em = self.quad.base.element_multi(e);
            s.a = self.point_weights(&em, &mut ws);
            let mut shape = self.quad.shape();
            for (a, sq) in squares.iter().enumerate() {
                contract_axis(&s.a, &mut shape, a, &sq[em[a]], nq, t.nloc, false, &mut s.b);
                std::mem::swap(&mut s.a, &mut s.b);
            }
            t.scatter(&em, &s.a, &mut y);
        }
        Ok(y)
    }

    /// Row and column DOFs of the local block of base element `e`, in the
    /// order used by [`element_matrix`](Self::element_matrix). Entries may
    /// repeat for continuous spaces traced onto sub-elements.
    pub fn element_dofs(&self, e: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        self.check_element(e)?;
        let em = self.quad.base.element_multi(e);
        Ok((self.rows.local_dofs(&em), self.col_trace().local_dofs(&em)))
    }

    fn check_element(&self, e: usize) -> Result<()> {
        if e >= self.num_elements() {
            return Err(Error::arg(format!(
                "element {e} out of range (mesh has {})",
                self.num_elements()
            )));
        }
        Ok(())
    }

    /// Local block of base element `e` through the sum-factorized kernel.
    pub(crate) fn element_block(&self, e: usize) -> DMatrix<f64> {
        let em = self.quad.base.element_multi(e);
        let (rt, ct) = (&self.rows, self.col_trace());
        let (nr, nc) = (rt.local_len(), ct.local_len());
        let mut s = Scratch::default();
        let mut ws = Scratch::default();
        let w = self.point_weights(&em, &mut ws);
        let mut m = DMatrix::zeros(nr, nc);
        for j in 0..nc {
            s.a.clear();
            s.a.resize(nc, 0.0);
            s.a[j] = 1.0;
            ct.local_to_quad(&self.quad, &em, &mut s);
            s.a.iter_mut().zip(&w).for_each(|(v, w)| *v *= w);
            rt.quad_to_local(&self.quad, &em, &mut s);
            for i in 0..nr {
                m[(i, j)] = s.a[i];
            }
        }
        m
    }

    /// Dense local block of base element `e`, computed by direct pointwise
    /// evaluation of the basis functions and the density on a finer Gauss
    /// rule. Independent of the kernel path and meant as its oracle.
    pub fn element_matrix(&self, e: usize) -> Result<DMatrix<f64>> {
        self.check_element(e)?;
        let base = &self.quad.base;
        let em = base.element_multi(e);
        let dim = base.dim();
        let pieces = self.quad.pieces;
        let rule = gauss(self.quad.points_per_piece + 1);
        let ng = rule.len();
        let (rt, ct) = (&self.rows, self.col_trace());
        let mut m = DMatrix::zeros(rt.local_len(), ct.local_len());
        let n_sub = pieces.pow(dim as u32);
        let n_pts = ng.pow(dim as u32);
        for sub in 0..n_sub {
            for qp in 0..n_pts {
                let mut x = [0.0; 3];
                let mut w = 1.0;
                let (mut rs, mut rq) = (sub, qp);
                for a in 0..dim {
                    let si = rs % pieces;
                    let qi = rq % ng;
                    rs /= pieces;
                    rq /= ng;
                    let (plo, phi) = self.piece_bounds(a, em[a], si);
                    x[a] = plo + 0.5 * (rule.points[qi] + 1.0) * (phi - plo);
                    w *= 0.5 * (phi - plo) * rule.weights()[qi];
                }
                let rho = match self.weight() {
                    Some(f) => f.evaluate(&x[..dim])?,
                    None => 1.0,
                };
                let rv = local_values(rt, &em, &x[..dim]);
                let cv = local_values(ct, &em, &x[..dim]);
                for (i, ri) in rv.iter().enumerate() {
                    if *ri == 0.0 {
                        continue;
                    }
                    for (j, cj) in cv.iter().enumerate() {
                        m[(i, j)] += w * rho * ri * cj;
                    }
                }
            }
        }
        Ok(m)
    }

    fn piece_bounds(&self, a: usize, e: usize, s: usize) -> (f64, f64) {
        let pieces = self.quad.pieces;
        [&self.rows, self.col_trace()]
            .into_iter()
            .chain(self.weight.as_ref().map(|(t, _)| t))
            .find(|t| t.factor == pieces)
            .map(|t| t.space.mesh().interval(a, e * pieces + s))
            .expect("the finest traced space defines the pieces")
    }

    /// Dense assembled matrix; intended for small problems and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (nr, nc) = self.shape();
        let mut m = DMatrix::zeros(nr, nc);
        for e in 0..self.num_elements() {
            let em = self.quad.base.element_multi(e);
            let rows = self.rows.local_dofs(&em);
            let cols = self.col_trace().local_dofs(&em);
            let blk = self.element_block(e);
            for (i, &gi) in rows.iter().enumerate() {
                for (j, &gj) in cols.iter().enumerate() {
                    m[(gi, gj)] += blk[(i, j)];
                }
            }
        }
        m
    }
}

/// Values of the local traced basis at a physical point of base element `em`,
/// evaluated directly from the space's own element containing the point.
fn local_values(t: &SpaceTrace, em: &[usize; 3], x: &[f64]) -> Vec<f64> {
    let space = &t.space;
    let dim = space.dim();
    let k = space.nodes_per_axis();
    let mut per_axis = vec![vec![0.0; t.nloc]; dim];
    let mut vals = vec![0.0; k];
    for a in 0..dim {
        let first = em[a] * t.factor;
        let mut s = space.mesh().locate(a, x[a]).expect("point inside element");
        s = s.clamp(first, first + t.factor - 1);
        let (lo, hi) = space.mesh().interval(a, s);
        space.basis_values(2.0 * (x[a] - lo) / (hi - lo) - 1.0, &mut vals);
        let off = (s - first) * k;
        per_axis[a][off..off + k].copy_from_slice(&vals);
    }
    (0..t.local_len())
        .map(|l| {
            let mut rem = l;
            let mut v = 1.0;
            for pa in &per_axis {
                v *= pa[rem % t.nloc];
                rem /= t.nloc;
            }
            v
        })
        .collect()
}
