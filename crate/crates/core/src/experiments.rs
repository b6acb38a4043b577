//! Table drivers for the convergence, conditioning, coupling and coarsening
//! studies. Each returns a [`Table`] ready to be written as CSV or JSON.

use std::fmt;

use crate::amr::NestedPair;
use crate::error::{Error, Result};
use crate::fespace::{
    assemble_load_with, interpolate_nodal, project_l2, project_l2_with, Continuity, FESpace, Field,
};
use crate::fv::{run_coupled_experiment, CoupledConfig};
use crate::kernels::MassOperator;
use crate::mesh::{CartesianMesh, LorSpec};
use crate::quadrature::{angle_view, make_rule, RuleKind};
use crate::spectral::node_set_sweep;
use crate::solver::CgConfig;
use crate::transfer::{lor_space, make_pair, TransferPair};

/// Smooth test function in 1, 2 or 3 dimensions.
pub fn test_function(x: &[f64]) -> f64 {
    let (a, b) = match x.len() {
        1 => (5.1 * x[0], 4.3 * x[0]),
        2 => (5.1 * x[0] - 6.2 * x[1], 4.3 * x[0] + 3.4 * x[1]),
        _ => (
            5.1 * x[0] - 6.2 * x[1] + 3.3 * x[2],
            4.3 * x[0] + 3.4 * x[1] + 1.9 * x[2],
        ),
    };
    (0.1 * a.sin() + 0.3 * b.cos()).exp()
}

/// Positive density used by the weighted studies.
pub fn test_density(x: &[f64]) -> f64 {
    1.0 + 0.5 * x.iter().map(|v| (3.0 * v).sin()).product::<f64>()
}

/// `log2(e_coarse / e_fine)` between consecutive entries.
pub fn rates(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    out.extend(errors.windows(2).map(|w| Some((w[0] / w[1]).log2())));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    /// Printed in scientific notation with 3 significant digits.
    Sci(f64),
    /// Printed with 2 decimals; `None` prints as `-`.
    Rate(Option<f64>),
    /// Printed with full round-trip precision.
    Real(f64),
    Text(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Sci(v) => write!(f, "{v:.2e}"),
            Cell::Rate(Some(v)) => write!(f, "{v:.2}"),
            Cell::Rate(None) => write!(f, "-"),
            Cell::Real(v) => write!(f, "{v:?}"),
            Cell::Text(s) => write!(f, "{s}"),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// `index, point, weight, angle, gap, spacing` for one rule.
pub fn quadrature_table(kind: RuleKind, n: usize) -> Result<Table> {
    let rule = make_rule(kind, n)?;
    let view = angle_view(&rule);
    let mut t = Table::new(&["index", "point", "weight", "angle", "gap", "spacing"]);
    for i in 0..rule.len() {
        let weight = match &rule.weights {
            Some(w) => Cell::Real(w[i]),
            None => Cell::Empty,
        };
        let (gap, spacing) = if i == 0 {
            (Cell::Empty, Cell::Empty)
        } else {
            (Cell::Real(view.gaps[i - 1]), Cell::Real(view.spacings[i - 1]))
        };
        t.push(vec![
            i.into(),
            Cell::Real(rule.points[i]),
            weight,
            Cell::Real(view.angles[i]),
            gap,
            spacing,
        ]);
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferStudy {
    pub dim: usize,
    /// Elements per axis of the level-0 mesh on `[0, 1]^dim`.
    pub base: usize,
    pub p: usize,
    pub q: usize,
    pub lor_n: usize,
    pub nodes: RuleKind,
    pub refinements: usize,
    pub continuity: Continuity,
    pub weighted: bool,
    pub cg: CgConfig,
}

impl Default for TransferStudy {
    fn default() -> Self {
        TransferStudy {
            dim: 2,
            base: 2,
            p: 2,
            q: 0,
            lor_n: 3,
            nodes: RuleKind::GaussLobatto,
            refinements: 4,
            continuity: Continuity::H1,
            weighted: false,
            cg: CgConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferRow {
    pub h: f64,
    pub dof_high: usize,
    pub dof_low: usize,
    /// `‖Π_H f - f‖₀`
    pub err_pi_h: f64,
    /// `‖R Π_H f - f‖₀`
    pub err_r_pi_h: f64,
    /// `‖Π_L f - f‖₀`
    pub err_pi_l: f64,
    /// `‖P Π_L f - f‖₀`
    pub err_p_pi_l: f64,
    /// `|∫R Π_H f - ∫Π_H f|`, density-weighted when the study is weighted.
    pub cons_r: f64,
    /// `|∫P Π_L f - ∫Π_L f|`, density-weighted when the study is weighted.
    pub cons_p: f64,
    pub cg_iterations: usize,
}

fn weighted_integral(u: &Field, rho: Option<&Field>) -> Result<f64> {
    match rho {
        None => Ok(u.integrate()),
        Some(r) => {
            let m = MassOperator::square(u.space(), Some(r))?;
            Ok(m.apply_vec(u.coefficients()).iter().sum())
        }
    }
}

/// Density-weighted projection onto the low space: `M_{L,ρ_L} v = (ρ_H f, ψ_L)`.
/// This is the low-order datum that `P_ρ` maps back at full order; the plain
/// projection is only `O(h^{q+1})` close to `R_ρ f`.
fn weighted_low_projection(pair: &TransferPair, rho_h: &Field, points: usize) -> Result<Field> {
    let mut v = assemble_load_with(
        pair.low(),
        |x| {
            let r = rho_h.evaluate(x).expect("low mesh points lie in the high mesh");
            r * test_function(x)
        },
        points,
    );
    pair.solve_low_mass(&mut v);
    Field::new(pair.low().clone(), v)
}

/// Runs one level of the transfer study.
pub fn transfer_level(study: &TransferStudy, level: usize) -> Result<TransferRow> {
    let d = study.dim;
    if !(1..=3).contains(&d) {
        return Err(Error::arg("dimension must be 1, 2 or 3"));
    }
    let mesh = CartesianMesh::uniform(&vec![study.base; d], &vec![(0.0, 1.0); d])?
        .refine_uniform_times(level);
    let h = mesh.max_spacing();
    let high = FESpace::new(mesh, study.p, study.continuity)?;
    let low = lor_space(&high, LorSpec::new(study.lor_n, study.nodes), study.q)?;
    let plain = TransferPair::new(&high, &low, study.lor_n, None, study.cg)?;
    let pair = if study.weighted {
        let rho = if study.p == 0 {
            project_l2(&high, test_density)?
        } else {
            interpolate_nodal(&high, test_density)?
        };
        plain.with_density(&rho)?
    } else {
        plain
    };
    let (rho_h, rho_l) = match pair.density() {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };

    let pi_h = project_l2(&high, test_function)?;
    let r_pi_h = pair.restrict(&pi_h)?;
    let pi_l = match rho_h {
        None => project_l2_with(&low, test_function, study.p + 2)?.0,
        Some(rho) => weighted_low_projection(&pair, rho, study.p + 2)?,
    };
    let (p_pi_l, rep) = pair.prolong(&pi_l)?;
    Ok(TransferRow {
        h,
        dof_high: high.dof_count(),
        dof_low: low.dof_count(),
        err_pi_h: pi_h.l2_error(test_function),
        err_r_pi_h: r_pi_h.l2_error(test_function),
        err_pi_l: pi_l.l2_error(test_function),
        err_p_pi_l: p_pi_l.l2_error(test_function),
        cons_r: (weighted_integral(&r_pi_h, rho_l)? - weighted_integral(&pi_h, rho_h)?).abs(),
        cons_p: (weighted_integral(&p_pi_l, rho_h)? - weighted_integral(&pi_l, rho_l)?).abs(),
        cg_iterations: rep.iterations,
    })
}

pub fn transfer_convergence(study: &TransferStudy) -> Result<Vec<TransferRow>> {
    (0..=study.refinements).map(|l| transfer_level(study, l)).collect()
}

pub fn transfer_table(rows: &[TransferRow]) -> Table {
    let mut t = Table::new(&[
        "h",
        "dof_H",
        "dof_L",
        "err_PiH",
        "rate_PiH",
        "err_R_PiH",
        "rate_R_PiH",
        "err_PiL",
        "rate_PiL",
        "err_P_PiL",
        "rate_P_PiL",
        "cons_R",
        "cons_P",
        "cg_iters",
    ]);
    let col = |f: fn(&TransferRow) -> f64| rates(&rows.iter().map(f).collect::<Vec<_>>());
    let r1 = col(|r| r.err_pi_h);
    let r2 = col(|r| r.err_r_pi_h);
    let r3 = col(|r| r.err_pi_l);
    let r4 = col(|r| r.err_p_pi_l);
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![
            Cell::Sci(r.h),
            r.dof_high.into(),
            r.dof_low.into(),
            Cell::Sci(r.err_pi_h),
            Cell::Rate(r1[i]),
            Cell::Sci(r.err_r_pi_h),
            Cell::Rate(r2[i]),
            Cell::Sci(r.err_pi_l),
            Cell::Rate(r3[i]),
            Cell::Sci(r.err_p_pi_l),
            Cell::Rate(r4[i]),
            Cell::Sci(r.cons_r),
            Cell::Sci(r.cons_p),
            r.cg_iterations.into(),
        ]);
    }
    t
}

/// Smallest `n` with `n (q + 1) ≥ p + 1`.
pub fn minimal_lor_n(p: usize, q: usize) -> usize {
    (p + 1).div_ceil(q + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreconditionRow {
    pub p: usize,
    pub q: usize,
    pub lor_n: usize,
    /// CG iterations for `P Π_L f`, one entry per refinement level.
    pub iterations: Vec<usize>,
}

/// CG iteration counts of prolongation on a 2D `base × base` mesh refined
/// `0..=refinements` times, H1 high space, Gauss–Lobatto LOR spacing.
pub fn precondition_sweep(
    degrees: impl IntoIterator<Item = usize>,
    low_degrees: &[usize],
    base: usize,
    refinements: usize,
) -> Result<Vec<PreconditionRow>> {
    let mut out = Vec::new();
    for p in degrees {
        for &q in low_degrees {
            let n = minimal_lor_n(p, q);
            let study = TransferStudy {
                base,
                p,
                q,
                lor_n: n,
                ..TransferStudy::default()
            };
            let mut iterations = Vec::new();
            for level in 0..=refinements {
                let mesh = CartesianMesh::uniform(&[base, base], &[(0.0, 1.0); 2])?
                    .refine_uniform_times(level);
                let high = FESpace::new(mesh, p, Continuity::H1)?;
                let low = lor_space(&high, LorSpec::new(n, study.nodes), q)?;
                let pair = make_pair(&high, &low, n, None)?;
                let pi_l = project_l2_with(&low, test_function, p + 2)?.0;
                let (_, rep) = pair.prolong(&pi_l)?;
                iterations.push(rep.iterations);
            }
            out.push(PreconditionRow {
                p,
                q,
                lor_n: n,
                iterations,
            });
        }
    }
    Ok(out)
}

pub fn precondition_table(rows: &[PreconditionRow]) -> Table {
    let levels = rows.first().map_or(0, |r| r.iterations.len());
    let mut cols = vec!["p".to_string(), "q".to_string(), "lor_n".to_string()];
    cols.extend((0..levels).map(|l| format!("ref{l}")));
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for r in rows {
        let mut row = vec![r.p.into(), r.q.into(), r.lor_n.into()];
        row.extend(r.iterations.iter().map(|&i| Cell::from(i)));
        t.push(row);
    }
    t
}

/// `kind, p, alpha, beta, kappa` for `p = 2..=pmax`.
pub fn alpha_table(kinds: &[RuleKind], pmax: usize) -> Result<Table> {
    if pmax < 2 {
        return Err(Error::arg("pmax must be at least 2"));
    }
    let mut t = Table::new(&["kind", "p", "alpha", "beta", "kappa"]);
    for row in node_set_sweep(kinds, 2..=pmax)? {
        t.push(vec![
            Cell::Text(row.kind.name().into()),
            row.p.into(),
            Cell::Real(row.report.alpha),
            Cell::Real(row.report.beta),
            Cell::Real(row.report.kappa),
        ]);
    }
    Ok(t)
}

/// Coupled FE/FV runs at `nx, 2 nx, …` with `refinements` doublings.
pub fn coupling_table(base: CoupledConfig, refinements: usize) -> Result<(Table, Vec<f64>)> {
    let reports = (0..=refinements)
        .map(|l| {
            run_coupled_experiment(CoupledConfig {
                nx: base.nx << l,
                ..base
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e1: Vec<f64> = reports.iter().map(|r| r.err_low_exact).collect();
    let e2: Vec<f64> = reports.iter().map(|r| r.err_low_projected).collect();
    let e3: Vec<f64> = reports.iter().map(|r| r.err_prolonged).collect();
    let (r1, r2, r3) = (rates(&e1), rates(&e2), rates(&e3));
    let mut t = Table::new(&[
        "nx",
        "steps",
        "err_uL_u",
        "rate_uL_u",
        "err_uL_PiLu",
        "rate_uL_PiLu",
        "err_PuL_u",
        "rate_PuL_u",
        "conservation",
        "cg_iters",
    ]);
    for (i, r) in reports.iter().enumerate() {
        t.push(vec![
            r.nx.into(),
            r.steps.into(),
            Cell::Sci(e1[i]),
            Cell::Rate(r1[i]),
            Cell::Sci(e2[i]),
            Cell::Rate(r2[i]),
            Cell::Sci(e3[i]),
            Cell::Rate(r3[i]),
            Cell::Sci(r.conservation),
            r.cg_iterations.into(),
        ]);
    }
    let cons = reports.iter().map(|r| r.conservation).collect();
    Ok((t, cons))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmrRow {
    pub level: usize,
    /// `‖u_h - f‖₀` on the fine space.
    pub err_fine: f64,
    /// `‖P u_h - f‖₀` on the coarse space.
    pub err_coarse: f64,
    pub conservation: f64,
    pub cg_iterations: usize,
}

/// Interpolates [`test_function`] on one uniform refinement of a 2D
/// `base × base` mesh (itself refined `level` times) and coarsens it.
pub fn amr_study(p: usize, base: usize, refinements: usize) -> Result<Vec<AmrRow>> {
    (0..=refinements)
        .map(|level| {
            let mesh = CartesianMesh::uniform(&[base, base], &[(0.0, 1.0); 2])?
                .refine_uniform_times(level);
            let coarse = FESpace::new(mesh, p, Continuity::H1)?;
            let pair = NestedPair::new(&coarse, 1)?;
            let u_h = interpolate_nodal(pair.fine(), test_function)?;
            let (pu, rep) = pair.coarsen(&u_h)?;
            Ok(AmrRow {
                level,
                err_fine: u_h.l2_error(test_function),
                err_coarse: pu.l2_error(test_function),
                conservation: (u_h.integrate() - pu.integrate()).abs(),
                cg_iterations: rep.iterations,
            })
        })
        .collect()
}

pub fn amr_table(rows: &[AmrRow]) -> Table {
    let r1 = rates(&rows.iter().map(|r| r.err_fine).collect::<Vec<_>>());
    let r2 = rates(&rows.iter().map(|r| r.err_coarse).collect::<Vec<_>>());
    let mut t = Table::new(&[
        "ref",
        "err_uh",
        "rate_uh",
        "err_Puh",
        "rate_Puh",
        "conservation",
        "cg_iters",
    ]);
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![
            r.level.into(),
            Cell::Sci(r.err_fine),
            Cell::Rate(r1[i]),
            Cell::Sci(r.err_coarse),
            Cell::Rate(r2[i]),
            Cell::Sci(r.conservation),
            r.cg_iterations.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_halving_errors() {
        let r = rates(&[1.0, 0.25, 0.0625]);
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(Cell::Rate(r[2]).to_string(), "2.00");
        assert_eq!(Cell::Sci(1.264e-2).to_string(), "1.26e-2");
    }

    #[test]
    fn minimal_subdivisions() {
        assert_eq!(minimal_lor_n(5, 0), 6);
        assert_eq!(minimal_lor_n(5, 1), 3);
        assert_eq!(minimal_lor_n(4, 1), 3);
    }
}
