//! Coarsening from a uniformly refined space back to its parent space.
//!
//! With `R` the natural injection `V_C ↪ V_F` and `M_F` the fine mass
//! matrix, the coarsening operator is `P = (Rᵀ M_F R)⁻¹ Rᵀ M_F`. It is a left
//! inverse of `R` and conserves `∫u`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fespace::{ensure_same, FESpace, Field};
use crate::kernels::{Basis1D, MassOperator};
use crate::solver::{pcg, CgConfig, SolveReport};

#[derive(Clone, Debug)]
pub struct NestedPair {
    coarse: Arc<FESpace>,
    fine: Arc<FESpace>,
    factor: usize,
    // local injection per sub-element position, fine-local × coarse-local
    local: Vec<DMatrix<f64>>,
    fine_mass: MassOperator,
    coarse_diag: Vec<f64>,
    cg: CgConfig,
}

impl NestedPair {
    /// Pairs `coarse` with the same-degree space on `levels` uniform
    /// refinements of its mesh.
    pub fn new(coarse: &Arc<FESpace>, levels: usize) -> Result<Self> {
        let mesh = coarse.mesh().refine_uniform_times(levels);
        let fine = FESpace::new(mesh, coarse.degree(), coarse.continuity())?;
        Self::with_fine(coarse, &fine)
    }

    pub fn with_fine(coarse: &Arc<FESpace>, fine: &Arc<FESpace>) -> Result<Self> {
        if coarse.degree() != fine.degree() || coarse.continuity() != fine.continuity() {
            return Err(Error::arg("nested spaces must share degree and continuity"));
        }
        let factor = coarse
            .mesh()
            .refinement_factor(fine.mesh())
            .ok_or_else(|| Error::arg("fine mesh is not a refinement of the coarse mesh"))?;
        for a in 0..coarse.dim() {
            for i in 0..coarse.mesh().elements_along(a) {
                let (lo, hi) = coarse.mesh().interval(a, i);
                for s in 0..factor {
                    let (flo, fhi) = fine.mesh().interval(a, i * factor + s);
                    let h = (hi - lo) / factor as f64;
                    if (flo - (lo + s as f64 * h)).abs() > 1e-12 * (hi - lo)
                        || (fhi - flo - h).abs() > 1e-12 * (hi - lo)
                    {
                        return Err(Error::arg("fine mesh must split coarse elements evenly"));
                    }
                }
            }
        }

        // split[s] is the k × k matrix of coarse basis values at the fine
        // nodes of sub-interval s
        let basis = Basis1D::of_space(coarse);
        let k = basis.len();
        let split: Vec<DMatrix<f64>> = (0..factor)
            .map(|s| {
                let pts: Vec<f64> = coarse
                    .nodes()
                    .iter()
                    .map(|x| (2.0 * s as f64 + x + 1.0) / factor as f64 - 1.0)
                    .collect();
                DMatrix::from_row_slice(k, k, &basis.eval_matrix(&pts))
            })
            .collect();
        let dim = coarse.dim();
        let positions = factor.pow(dim as u32);
        let local = (0..positions)
            .map(|pos| {
                let mut rem = pos;
                let mut m = DMatrix::from_element(1, 1, 1.0);
                for _ in 0..dim {
                    // axis 0 varies fastest in the local numbering
                    m = split[rem % factor].kronecker(&m);
                    rem /= factor;
                }
                m
            })
            .collect();

        let fine_mass = MassOperator::square(fine, None)?;
        let coarse_diag = MassOperator::square(coarse, None)?.diagonal()?;
        Ok(NestedPair {
            coarse: coarse.clone(),
            fine: fine.clone(),
            factor,
            local,
            fine_mass,
            coarse_diag,
            cg: CgConfig::default(),
        })
    }

    pub fn coarse(&self) -> &Arc<FESpace> {
        &self.coarse
    }

    pub fn fine(&self) -> &Arc<FESpace> {
        &self.fine
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn set_cg_config(&mut self, cg: CgConfig) {
        self.cg = cg;
    }

    // coarse element and sub-element position of fine element `e`
    fn parent(&self, e: usize) -> (usize, usize) {
        let dim = self.fine.dim();
        let fm = self.fine.mesh().element_multi(e);
        let mut cm = [0usize; 3];
        let mut pos = 0;
        for a in (0..dim).rev() {
            cm[a] = fm[a] / self.factor;
            pos = pos * self.factor + fm[a] % self.factor;
        }
        (self.coarse.mesh().element_index(&cm[..dim]), pos)
    }

    pub fn inject_vec(&self, u_c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.fine.dof_count()];
        for e in 0..self.fine.mesh().num_elements() {
            let (ce, pos) = self.parent(e);
            let cd = self.coarse.element_dofs(ce);
            let fd = self.fine.element_dofs(e);
            let m = &self.local[pos];
            for (i, &f) in fd.iter().enumerate() {
                out[f] = cd.iter().enumerate().map(|(j, &c)| m[(i, j)] * u_c[c]).sum();
            }
        }
        out
    }

    /// `Rᵀ y`; each shared fine DOF contributes once.
    pub fn inject_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coarse.dof_count()];
        let mut seen = vec![false; self.fine.dof_count()];
        for e in 0..self.fine.mesh().num_elements() {
            let (ce, pos) = self.parent(e);
            let cd = self.coarse.element_dofs(ce);
            let fd = self.fine.element_dofs(e);
            let m = &self.local[pos];
            for (i, &f) in fd.iter().enumerate() {
                if std::mem::replace(&mut seen[f], true) {
                    continue;
                }
                for (j, &c) in cd.iter().enumerate() {
                    out[c] += m[(i, j)] * y[f];
                }
            }
        }
        out
    }

    pub fn inject(&self, u_c: &Field) -> Result<Field> {
        ensure_same(u_c.space(), &self.coarse)?;
        Field::new(self.fine.clone(), self.inject_vec(u_c.coefficients()))
    }

    /// `Rᵀ M_F R x`.
    pub fn apply_normal(&self, x: &[f64], out: &mut [f64]) {
        let y = self.fine_mass.apply_vec(&self.inject_vec(x));
        out.copy_from_slice(&self.inject_transpose_vec(&y));
    }

    /// `P u_F` by CG preconditioned with `diag(M_C)`.
    pub fn coarsen(&self, u_f: &Field) -> Result<(Field, SolveReport)> {
        ensure_same(u_f.space(), &self.fine)?;
        let b = self.inject_transpose_vec(&self.fine_mass.apply_vec(u_f.coefficients()));
        let (x, rep) = pcg(|v, o| self.apply_normal(v, o), &self.coarse_diag, &b, self.cg)?;
        Ok((Field::new(self.coarse.clone(), x)?, rep))
    }
}
