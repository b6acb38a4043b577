//! Conservative transfer between a high-order space and a low-order refined
//! (LOR) space.
//!
//! With `M_L`, `M_H` the mass matrices and `M_LH` the mixed mass matrix,
//! restriction is `R = M_L⁻¹ M_LH` and prolongation is
//! `P = (Rᵀ M_L R)⁻¹ Rᵀ M_L`, applied as `A u_H = M_LHᵀ v_L` with
//! `A = M_LHᵀ M_L⁻¹ M_LH`. The LOR space is discontinuous so `M_L⁻¹` is
//! applied element by element.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fespace::{ensure_same, Continuity, FESpace, Field};
use crate::kernels::MassOperator;
use crate::mesh::{make_lor_mesh, LorSpec};
use crate::solver::{norm, pcg, BlockCholesky, CgConfig, SolveReport};

/// Largest `(p+1)^dim` for which prolongation into an L2 space is solved
/// with dense per-element factorizations instead of CG.
pub const DIRECT_BLOCK_LIMIT: usize = 512;

#[derive(Clone, Debug)]
pub struct TransferPair {
    high: Arc<FESpace>,
    low: Arc<FESpace>,
    lor_n: usize,
    mixed: MassOperator,
    low_blocks: BlockCholesky,
    high_diag: Vec<f64>,
    high_blocks: Option<BlockCholesky>,
    density: Option<(Field, Field)>,
    cg: CgConfig,
}

/// Builds the low space of degree `q` on the LOR refinement of `high`'s mesh.
pub fn lor_space(high: &FESpace, spec: LorSpec, q: usize) -> Result<Arc<FESpace>> {
    let mesh = make_lor_mesh(high.mesh(), spec)?;
    FESpace::new(mesh, q, Continuity::L2)
}

/// Checks `n (q + 1) ≥ p + 1`.
pub fn check_compatibility(p: usize, q: usize, lor_n: usize) -> Result<()> {
    if lor_n * (q + 1) < p + 1 {
        return Err(Error::Compatibility { p, q, lor_n });
    }
    Ok(())
}

/// Pairs `high` with `low`, where `low` lives on an `lor_n`-fold LOR
/// refinement of the high mesh. `density`, when given, is `(ρ_H, ρ_L)` and
/// switches every inner product to the density-weighted one.
pub fn make_pair(
    high: &Arc<FESpace>,
    low: &Arc<FESpace>,
    lor_n: usize,
    density: Option<(&Field, &Field)>,
) -> Result<TransferPair> {
    TransferPair::new(high, low, lor_n, density, CgConfig::default())
}

impl TransferPair {
    pub fn new(
        high: &Arc<FESpace>,
        low: &Arc<FESpace>,
        lor_n: usize,
        density: Option<(&Field, &Field)>,
        cg: CgConfig,
    ) -> Result<Self> {
        if low.continuity() != Continuity::L2 {
            return Err(Error::Unsupported(
                "low-order space must be discontinuous (L2)".into(),
            ));
        }
        match high.mesh().refinement_factor(low.mesh()) {
            Some(f) if f == lor_n => {}
            _ => {
                return Err(Error::arg(format!(
                    "low mesh is not an {lor_n}-fold refinement of the high mesh"
                )))
            }
        }
        check_compatibility(high.degree(), low.degree(), lor_n)?;
        let (rho_h, rho_l) = match density {
            Some((h, l)) => {
                check_on(h, high)?;
                check_on(l, low)?;
                (Some(h), Some(l))
            }
            None => (None, None),
        };

        let mixed = MassOperator::mixed(low, high, rho_h)?;
        let low_mass = MassOperator::square(low, rho_l)?;
        let high_mass = MassOperator::square(high, rho_h)?;
        for (name, op) in [("ρ_H", &mixed), ("ρ_L", &low_mass)] {
            let m = op.min_weight();
            if !(m > 0.0) {
                return Err(Error::arg(format!(
                    "density {name} is not positive at every quadrature point (min {m:.3e})"
                )));
            }
        }
        let low_blocks = BlockCholesky::new(
            low.dofs_per_element(),
            (0..low.mesh().num_elements()).map(|e| low_mass.element_block(e)),
        )?;
        let high_diag = high_mass.diagonal()?;
        let mut pair = TransferPair {
            high: high.clone(),
            low: low.clone(),
            lor_n,
            mixed,
            low_blocks,
            high_diag,
            high_blocks: None,
            density: density.map(|(h, l)| (h.clone(), l.clone())),
            cg,
        };
        if high.continuity() == Continuity::L2 && high.dofs_per_element() <= DIRECT_BLOCK_LIMIT {
            let blocks: Vec<DMatrix<f64>> = (0..high.mesh().num_elements())
                .map(|e| pair.normal_block(e))
                .collect::<Result<_>>()?;
            pair.high_blocks = Some(BlockCholesky::new(high.dofs_per_element(), blocks)?);
        }
        Ok(pair)
    }

    /// Weighted pair with `ρ_L = R ρ_H` computed by this (unweighted) pair.
    pub fn with_density(&self, rho_h: &Field) -> Result<TransferPair> {
        if self.density.is_some() {
            return Err(Error::arg("pair already carries a density"));
        }
        let rho_l = self.restrict(rho_h)?;
        TransferPair::new(&self.high, &self.low, self.lor_n, Some((rho_h, &rho_l)), self.cg)
    }

    pub fn high(&self) -> &Arc<FESpace> {
        &self.high
    }

    pub fn low(&self) -> &Arc<FESpace> {
        &self.low
    }

    pub fn lor_n(&self) -> usize {
        self.lor_n
    }

    pub fn density(&self) -> Option<(&Field, &Field)> {
        self.density.as_ref().map(|(h, l)| (h, l))
    }

    pub fn cg_config(&self) -> CgConfig {
        self.cg
    }

    pub fn mixed_operator(&self) -> &MassOperator {
        &self.mixed
    }

    /// Diagonal of the (weighted) high-order mass matrix; the CG preconditioner.
    pub fn high_mass_diagonal(&self) -> &[f64] {
        &self.high_diag
    }

    /// Whether prolongation uses dense per-element solves.
    pub fn uses_direct_blocks(&self) -> bool {
        self.high_blocks.is_some()
    }

    /// In-place `x ← M_L⁻¹ x`.
    pub fn solve_low_mass(&self, x: &mut [f64]) {
        let bs = self.low_blocks.block_size();
        for (e, chunk) in x.chunks_mut(bs).enumerate() {
            self.low_blocks.solve_block(e, chunk);
        }
    }

    pub fn restrict_vec(&self, u_h: &[f64]) -> Vec<f64> {
        let mut v = self.mixed.apply_vec(u_h);
        self.solve_low_mass(&mut v);
        v
    }

    /// `A x = M_LHᵀ M_L⁻¹ M_LH x`.
    pub fn apply_normal(&self, x: &[f64], out: &mut [f64]) {
        let v = self.restrict_vec(x);
        self.mixed.apply_transpose_into(&v, out);
    }

    /// `R u_H`: solves `M_L v_L = M_LH u_H`.
    pub fn restrict(&self, u_h: &Field) -> Result<Field> {
        ensure_same(u_h.space(), &self.high)?;
        Field::new(self.low.clone(), self.restrict_vec(u_h.coefficients()))
    }

    /// `P v_L`: solves `A u_H = M_LHᵀ v_L`.
    pub fn prolong(&self, v_l: &Field) -> Result<(Field, SolveReport)> {
        ensure_same(v_l.space(), &self.low)?;
        let (u, rep) = self.prolong_vec(v_l.coefficients())?;
        Ok((Field::new(self.high.clone(), u)?, rep))
    }

    pub fn prolong_vec(&self, v_l: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let rhs = self.mixed.apply_transpose_vec(v_l);
        self.solve_normal(&rhs)
    }

    /// Solves `A x = b`.
    pub fn solve_normal(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        match &self.high_blocks {
            Some(blocks) => {
                let mut x = b.to_vec();
                let bs = blocks.block_size();
                for (e, chunk) in x.chunks_mut(bs).enumerate() {
                    blocks.solve_block(e, chunk);
                }
                let mut ax = vec![0.0; x.len()];
                self.apply_normal(&x, &mut ax);
                let b_norm = norm(b);
                let res = if b_norm == 0.0 {
                    0.0
                } else {
                    ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / b_norm
                };
                Ok((x, SolveReport::direct(res)))
            }
            None => pcg(|v, o| self.apply_normal(v, o), &self.high_diag, b, self.cg),
        }
    }

    /// Solves `A x = b` by CG even when direct blocks are available.
    pub fn solve_normal_cg(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        pcg(|v, o| self.apply_normal(v, o), &self.high_diag, b, self.cg)
    }

    /// `R_ρ u_H`; requires a density.
    pub fn restrict_weighted(&self, u_h: &Field) -> Result<Field> {
        self.require_density()?;
        self.restrict(u_h)
    }

    /// `P_ρ v_L`; requires a density.
    pub fn prolong_weighted(&self, v_l: &Field) -> Result<(Field, SolveReport)> {
        self.require_density()?;
        self.prolong(v_l)
    }

    fn require_density(&self) -> Result<()> {
        if self.density.is_none() {
            return Err(Error::arg("pair has no density weight"));
        }
        Ok(())
    }

    /// `A` restricted to coarse element `e` for an L2 high space.
    fn normal_block(&self, e: usize) -> Result<DMatrix<f64>> {
        let (rows, cols) = self.mixed.element_dofs(e)?;
        debug_assert_eq!(cols, self.high.element_dofs(e));
        let b = self.mixed.element_block(e);
        let bs = self.low_blocks.block_size();
        // M_L⁻¹ B, grouping rows by LOR element
        let mut x = b.clone();
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, &g) in rows.iter().enumerate() {
            let el = g / bs;
            match groups.iter_mut().find(|(k, _)| *k == el) {
                Some((_, v)) => v.push(i),
                None => groups.push((el, vec![i])),
            }
        }
        for (el, idx) in &groups {
            let mut ordered = vec![0usize; bs];
            for &i in idx {
                ordered[rows[i] % bs] = i;
            }
            for j in 0..b.ncols() {
                let rhs = DVector::from_iterator(bs, ordered.iter().map(|&i| b[(i, j)]));
                let sol = self.low_blocks.factor(*el).solve(&rhs);
                for (l, &i) in ordered.iter().enumerate() {
                    x[(i, j)] = sol[l];
                }
            }
        }
        Ok(b.transpose() * x)
    }
}

fn check_on(f: &Field, space: &Arc<FESpace>) -> Result<()> {
    if space.mesh().refinement_factor(f.space().mesh()).is_none() {
        return Err(Error::arg(
            "density must live on the space's mesh or a refinement of it",
        ));
    }
    Ok(())
}
