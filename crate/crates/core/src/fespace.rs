//! Nodal finite element spaces on Cartesian meshes.
//!
//! Basis functions are tensor products of 1D Lagrange polynomials on the
//! Gauss–Lobatto points of the element; degree 0 is the constant per element.
//! `H1` spaces share the nodes on element interfaces and number them
//! lexicographically by node position. `L2` spaces number DOFs element by
//! element, lexicographic inside each element.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{ElementQuadrature, MassOperator, SpaceTrace};
use crate::mesh::CartesianMesh;
use crate::poly::{barycentric_weights, lagrange_values};
use crate::quadrature::gauss_lobatto;
use crate::solver::{pcg, BlockCholesky, CgConfig, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Continuity {
    H1,
    L2,
}

impl std::str::FromStr for Continuity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(Continuity::H1),
            "l2" => Ok(Continuity::L2),
            _ => Err(Error::arg(format!("unknown continuity '{s}'"))),
        }
    }
}

#[derive(Debug)]
pub struct FESpace {
    mesh: CartesianMesh,
    degree: usize,
    continuity: Continuity,
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl FESpace {
    pub fn new(mesh: CartesianMesh, degree: usize, continuity: Continuity) -> Result<Arc<Self>> {
        if degree == 0 && continuity == Continuity::H1 {
            return Err(Error::arg("degree 0 is only available for L2 spaces"));
        }
        let nodes = if degree == 0 {
            vec![0.0]
        } else {
            gauss_lobatto(degree).points
        };
        let bary = barycentric_weights(&nodes);
        Ok(Arc::new(FESpace {
            mesh,
            degree,
            continuity,
            nodes,
            bary,
        }))
    }

    pub fn mesh(&self) -> &CartesianMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    /// Reference basis nodes on `[-1, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.degree + 1
    }

    pub fn dofs_per_element(&self) -> usize {
        self.nodes_per_axis().pow(self.dim() as u32)
    }

    pub fn dof_count(&self) -> usize {
        match self.continuity {
            Continuity::L2 => self.mesh.num_elements() * self.dofs_per_element(),
            Continuity::H1 => (0..self.dim())
                .map(|a| self.mesh.elements_along(a) * self.degree + 1)
                .product(),
        }
    }

    /// Lagrange basis values at reference coordinate `xi`.
    pub fn basis_values(&self, xi: f64, out: &mut [f64]) {
        lagrange_values(&self.nodes, &self.bary, xi, out);
    }

    /// Additive contribution of axis `a` to the global index of local node
    /// `j` in element `elem` (along that axis). A DOF index is the sum of the
    /// per-axis contributions.
    pub fn axis_offset(&self, a: usize, elem: usize, j: usize) -> usize {
        let k = self.nodes_per_axis();
        match self.continuity {
            Continuity::H1 => {
                let stride: usize = (0..a)
                    .map(|b| self.mesh.elements_along(b) * self.degree + 1)
                    .product();
                (elem * self.degree + j) * stride
            }
            Continuity::L2 => {
                let estride: usize = (0..a).map(|b| self.mesh.elements_along(b)).product();
                elem * estride * self.dofs_per_element() + j * k.pow(a as u32)
            }
        }
    }

    /// Global DOFs of element `e` in local lexicographic order.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let m = self.mesh.element_multi(e);
        let k = self.nodes_per_axis();
        let dim = self.dim();
        let offs: Vec<Vec<usize>> = (0..dim)
            .map(|a| (0..k).map(|j| self.axis_offset(a, m[a], j)).collect())
            .collect();
        let mut out = Vec::with_capacity(self.dofs_per_element());
        for l in 0..self.dofs_per_element() {
            let mut rem = l;
            let mut idx = 0;
            for o in &offs {
                idx += o[rem % k];
                rem /= k;
            }
            out.push(idx);
        }
        out
    }

    /// Physical coordinate of local node `j` of element `elem` along axis `a`.
    pub fn node_coordinate(&self, a: usize, elem: usize, j: usize) -> f64 {
        let (lo, hi) = self.mesh.interval(a, elem);
        if self.degree > 0 && j == 0 {
            return lo;
        }
        if self.degree > 0 && j == self.degree {
            return hi;
        }
        lo + 0.5 * (self.nodes[j] + 1.0) * (hi - lo)
    }

    /// Physical position of every global DOF.
    pub fn dof_positions(&self) -> Vec<[f64; 3]> {
        let mut pos = vec![[0.0; 3]; self.dof_count()];
        let k = self.nodes_per_axis();
        for e in 0..self.mesh.num_elements() {
            let m = self.mesh.element_multi(e);
            for (l, &g) in self.element_dofs(e).iter().enumerate() {
                let mut rem = l;
                for (a, slot) in pos[g].iter_mut().enumerate().take(self.dim()) {
                    *slot = self.node_coordinate(a, m[a], rem % k);
                    rem /= k;
                }
            }
        }
        pos
    }

    /// Whether `other` is the same discrete space (same mesh, degree, continuity).
    pub fn same_as(&self, other: &FESpace) -> bool {
        std::ptr::eq(self, other)
            || (self.degree == other.degree
                && self.continuity == other.continuity
                && self.mesh == other.mesh)
    }

    /// Point evaluation of a coefficient vector.
    pub fn evaluate(&self, coefficients: &[f64], x: &[f64]) -> Result<f64> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(Error::arg("point dimension does not match the space"));
        }
        let k = self.nodes_per_axis();
        let mut elem = [0usize; 3];
        let mut vals = vec![vec![0.0; k]; dim];
        for a in 0..dim {
            let e = self
                .mesh
                .locate(a, x[a])
                .ok_or_else(|| Error::arg(format!("point {x:?} outside the mesh")))?;
            elem[a] = e;
            let (lo, hi) = self.mesh.interval(a, e);
            let xi = 2.0 * (x[a] - lo) / (hi - lo) - 1.0;
            self.basis_values(xi, &mut vals[a]);
        }
        let e = self.mesh.element_index(&elem[..dim]);
        let dofs = self.element_dofs(e);
        let mut sum = 0.0;
        for (l, &g) in dofs.iter().enumerate() {
            let mut rem = l;
            let mut w = 1.0;
            for v in &vals {
                w *= v[rem % k];
                rem /= k;
            }
            sum += w * coefficients[g];
        }
        Ok(sum)
    }
}

/// Coefficient vector attached to a space.
#[derive(Clone, Debug)]
pub struct Field {
    space: Arc<FESpace>,
    coefficients: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<FESpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dof_count() {
            return Err(Error::arg(format!(
                "field has {} coefficients, space has {} DOFs",
                coefficients.len(),
                space.dof_count()
            )));
        }
        Ok(Field {
            space,
            coefficients,
        })
    }

    pub fn zeros(space: Arc<FESpace>) -> Self {
        let n = space.dof_count();
        Field {
            space,
            coefficients: vec![0.0; n],
        }
    }

    /// The constant function `c`; nodal bases form a partition of unity.
    pub fn constant(space: Arc<FESpace>, c: f64) -> Self {
        let n = space.dof_count();
        Field {
            space,
            coefficients: vec![c; n],
        }
    }

    pub fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.space.evaluate(&self.coefficients, x)
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }

    pub fn l2_error(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        l2_error(self, f)
    }

    /// `‖self‖₀`.
    pub fn l2_norm(&self) -> f64 {
        l2_error(self, |_| 0.0)
    }

    /// `‖self - other‖₀` for two fields on the same space.
    pub fn l2_distance(&self, other: &Field) -> Result<f64> {
        ensure_same(&self.space, &other.space)?;
        let diff: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field::new(self.space.clone(), diff)?.l2_norm())
    }

    /// CSV dump with columns `global_dof,x,y,z,value`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "global_dof,x,y,z,value")?;
        for (i, (p, v)) in self
            .space
            .dof_positions()
            .iter()
            .zip(&self.coefficients)
            .enumerate()
        {
            writeln!(w, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2], v)?;
        }
        Ok(())
    }
}

pub(crate) fn ensure_same(a: &FESpace, b: &FESpace) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::arg("fields live on different spaces"))
    }
}

/// Coefficients equal to `f` at the mapped basis nodes.
pub fn interpolate_nodal(space: &Arc<FESpace>, f: impl Fn(&[f64]) -> f64) -> Result<Field> {
    if space.degree() == 0 {
        return Err(Error::arg(
            "degree-0 spaces have no nodal interpolation target; use project_l2",
        ));
    }
    let dim = space.dim();
    let coefficients = space
        .dof_positions()
        .iter()
        .map(|p| f(&p[..dim]))
        .collect();
    Field::new(space.clone(), coefficients)
}

/// `∫ f ψ_i` for every basis function, Gauss with `degree + 2` points per axis.
pub fn assemble_load(space: &Arc<FESpace>, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    assemble_load_with(space, f, space.degree() + 2)
}

/// `∫ f ψ_i` with `points` Gauss points per axis and element.
pub fn assemble_load_with(
    space: &Arc<FESpace>,
    f: impl Fn(&[f64]) -> f64,
    points: usize,
) -> Vec<f64> {
    let quad = ElementQuadrature::new(space.mesh(), None, points.max(1))
        .expect("space mesh is a valid quadrature base");
    let trace = SpaceTrace::new(space, &quad).expect("space lives on its own mesh");
    let mut out = vec![0.0; space.dof_count()];
    let mut scratch = Default::default();
    for e in 0..space.mesh().num_elements() {
        let em = space.mesh().element_multi(e);
        let pts = quad.points(&em);
        let w = quad.weights(&em);
        let vals: Vec<f64> = pts.iter().zip(&w).map(|(p, w)| w * f(&p[..space.dim()])).collect();
        trace.scatter_from_quad(&quad, &em, &vals, &mut out, &mut scratch);
    }
    out
}

/// L² projection onto `space`.
///
/// L2 spaces are solved element by element with dense Cholesky; H1 spaces use
/// Jacobi-preconditioned CG to a relative residual of `1e-13`.
pub fn project_l2(space: &Arc<FESpace>, f: impl Fn(&[f64]) -> f64) -> Result<Field> {
    project_l2_with(space, f, space.degree() + 2).map(|(field, _)| field)
}

/// L² projection with `points` Gauss points per axis for the load vector.
/// Low-degree spaces compared against high-order results need more points
/// than the default `degree + 2`, or the quadrature error dominates.
pub fn project_l2_with(
    space: &Arc<FESpace>,
    f: impl Fn(&[f64]) -> f64,
    points: usize,
) -> Result<(Field, SolveReport)> {
    let rhs = assemble_load_with(space, f, points);
    let mass = MassOperator::square(space, None)?;
    match space.continuity() {
        Continuity::L2 => {
            let n_el = space.mesh().num_elements();
            let blocks = BlockCholesky::new(
                space.dofs_per_element(),
                (0..n_el).map(|e| mass.element_block(e)),
            )?;
            let mut x = rhs;
            let bs = blocks.block_size();
            for (e, chunk) in x.chunks_mut(bs).enumerate() {
                blocks.solve_block(e, chunk);
            }
            Ok((Field::new(space.clone(), x)?, SolveReport::direct(0.0)))
        }
        Continuity::H1 => {
            let diag = mass.diagonal()?;
            let cfg = CgConfig {
                rel_tol: 1e-13,
                max_iter: 1000,
            };
            let (x, rep) = pcg(|v, out| mass.apply_into(v, out), &diag, &rhs, cfg)?;
            Ok((Field::new(space.clone(), x)?, rep))
        }
    }
}

/// `∫_Ω field dx`, exact for the field's polynomial degree.
pub fn integrate(field: &Field) -> f64 {
    integrate_with(field, |_| 1.0, 0)
}

/// `∫_Ω field · g dx` with `extra` additional Gauss points per axis.
pub(crate) fn integrate_with(field: &Field, g: impl Fn(&[f64]) -> f64, extra: usize) -> f64 {
    let space = field.space();
    let quad = ElementQuadrature::new(space.mesh(), None, space.degree() + 1 + extra)
        .expect("space mesh is a valid quadrature base");
    let trace = SpaceTrace::new(space, &quad).expect("space lives on its own mesh");
    let mut scratch = Default::default();
    let mut total = 0.0;
    for e in 0..space.mesh().num_elements() {
        let em = space.mesh().element_multi(e);
        let vals = trace.gather_to_quad(&quad, &em, field.coefficients(), &mut scratch);
        let w = quad.weights(&em);
        if extra == 0 {
            total += vals.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>();
        } else {
            let pts = quad.points(&em);
            total += vals
                .iter()
                .zip(&w)
                .zip(&pts)
                .map(|((v, w), p)| v * w * g(&p[..space.dim()]))
                .sum::<f64>();
        }
    }
    total
}

/// `‖field - f‖₀`, Gauss with `degree + 3` points per axis.
pub fn l2_error(field: &Field, f: impl Fn(&[f64]) -> f64) -> f64 {
    let space = field.space();
    let quad = ElementQuadrature::new(space.mesh(), None, space.degree() + 3)
        .expect("space mesh is a valid quadrature base");
    let trace = SpaceTrace::new(space, &quad).expect("space lives on its own mesh");
    let mut scratch = Default::default();
    let mut total = 0.0;
    for e in 0..space.mesh().num_elements() {
        let em = space.mesh().element_multi(e);
        let vals = trace.gather_to_quad(&quad, &em, field.coefficients(), &mut scratch);
        let w = quad.weights(&em);
        let pts = quad.points(&em);
        for ((v, w), p) in vals.iter().zip(&w).zip(&pts) {
            let d = v - f(&p[..space.dim()]);
            total += w * d * d;
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CartesianMesh;
    use approx::assert_abs_diff_eq;

    fn unit_square(n: usize) -> CartesianMesh {
        CartesianMesh::uniform(&[n, n], &[(0.0, 1.0); 2]).unwrap()
    }

    #[test]
    fn dof_counts() {
        let m = CartesianMesh::uniform(&[3, 2], &[(0.0, 1.0); 2]).unwrap();
        let h1 = FESpace::new(m.clone(), 2, Continuity::H1).unwrap();
        assert_eq!(h1.dof_count(), 7 * 5);
        let l2 = FESpace::new(m.clone(), 2, Continuity::L2).unwrap();
        assert_eq!(l2.dof_count(), 6 * 9);
        assert!(FESpace::new(m, 0, Continuity::H1).is_err());
    }

    #[test]
    fn l2_dof_map_is_a_bijection() {
        let m = CartesianMesh::uniform(&[3, 2, 2], &[(0.0, 1.0); 3]).unwrap();
        let s = FESpace::new(m, 1, Continuity::L2).unwrap();
        let mut seen = vec![false; s.dof_count()];
        for e in 0..s.mesh().num_elements() {
            for d in s.element_dofs(e) {
                assert!(!seen[d]);
                seen[d] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn h1_shares_interface_nodes() {
        let m = CartesianMesh::uniform(&[2, 1], &[(0.0, 1.0); 2]).unwrap();
        let s = FESpace::new(m, 2, Continuity::H1).unwrap();
        let left = s.element_dofs(0);
        let right = s.element_dofs(1);
        // right column of element 0 equals left column of element 1
        for row in 0..3 {
            assert_eq!(left[row * 3 + 2], right[row * 3]);
        }
    }

    #[test]
    fn h1_field_continuous_across_interface() {
        let m = unit_square(3);
        let s = FESpace::new(m, 3, Continuity::H1).unwrap();
        let coeffs: Vec<f64> = (0..s.dof_count()).map(|i| ((i * 7919) % 13) as f64 * 0.1 - 0.6).collect();
        let f = Field::new(s, coeffs).unwrap();
        let x = 1.0 / 3.0;
        for &y in &[0.1, 0.45, 0.8] {
            let a = f.evaluate(&[x - 1e-15, y]).unwrap();
            let b = f.evaluate(&[x + 1e-15, y]).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn projection_of_constant() {
        for cont in [Continuity::H1, Continuity::L2] {
            let s = FESpace::new(unit_square(2), 3, cont).unwrap();
            let p = project_l2(&s, |_| 2.5).unwrap();
            assert!(p.coefficients().iter().all(|c| (c - 2.5).abs() < 1e-12));
            assert!(p.l2_error(|_| 2.5) <= 1e-13);
        }
    }

    #[test]
    fn cell_average_projection() {
        let m = CartesianMesh::uniform(&[2], &[(-1.0, 1.0)]).unwrap();
        let s = FESpace::new(m, 0, Continuity::L2).unwrap();
        let p = project_l2(&s, |x| x[0]).unwrap();
        assert_abs_diff_eq!(p.coefficients()[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.coefficients()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate(&p), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn degree_zero_error_closed_form() {
        let m = CartesianMesh::uniform(&[1], &[(-1.0, 1.0)]).unwrap();
        let s = FESpace::new(m, 0, Continuity::L2).unwrap();
        let p = project_l2(&s, |x| x[0]).unwrap();
        assert_abs_diff_eq!(p.l2_error(|x| x[0]), (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert!(interpolate_nodal(&s, |x| x[0]).is_err());
    }

    #[test]
    fn integrals() {
        let s = FESpace::new(unit_square(3), 2, Continuity::H1).unwrap();
        assert_abs_diff_eq!(Field::constant(s, 1.0).integrate(), 1.0, epsilon = 1e-14);
        let m = CartesianMesh::uniform(&[1], &[(-1.0, 1.0)]).unwrap();
        let s = FESpace::new(m, 1, Continuity::H1).unwrap();
        let f = interpolate_nodal(&s, |x| x[0]).unwrap();
        assert_abs_diff_eq!(f.integrate(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_reproduces_linears() {
        let m = CartesianMesh::uniform(&[2, 3, 2], &[(0.0, 1.0), (-1.0, 1.0), (0.0, 2.0)]).unwrap();
        let s = FESpace::new(m, 2, Continuity::H1).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
        let u = interpolate_nodal(&s, f).unwrap();
        assert!(u.l2_error(f) <= 1e-13);
        let ones = interpolate_nodal(&s, |_| 1.0).unwrap();
        assert!(ones.coefficients().iter().all(|&c| c == 1.0));
    }

    #[test]
    fn projection_is_idempotent_and_conservative() {
        let f = |x: &[f64]| (3.0 * x[0]).sin() * (2.0 * x[1]).exp();
        for cont in [Continuity::H1, Continuity::L2] {
            let s = FESpace::new(unit_square(3), 2, cont).unwrap();
            let p = project_l2(&s, f).unwrap();
            let pf = p.clone();
            let again = project_l2(&s, |x| pf.evaluate(x).unwrap()).unwrap();
            for (a, b) in p.coefficients().iter().zip(again.coefficients()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            // load integrals are exact for x^3 y^2 with degree + 2 points
            let g = |x: &[f64]| x[0].powi(3) * x[1] * x[1];
            let exact = 1.0 / 12.0;
            let p = project_l2(&s, g).unwrap();
            assert!((p.integrate() - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let m = CartesianMesh::uniform(&[1], &[(0.0, 1.0)]).unwrap();
        let s = FESpace::new(m, 2, Continuity::H1).unwrap();
        let f = interpolate_nodal(&s, |x| x[0]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "global_dof,x,y,z,value");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,5.0"));
    }
}
