//! Numerical lower and upper bounds of the restriction operator.
//!
//! `α = min ‖R v‖₀ / ‖v‖₀` and `β = max ‖R v‖₀ / ‖v‖₀` over the high-order
//! space, i.e. the square roots of the extreme eigenvalues of the pencil
//! `(Rᵀ M_L R, M_H)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fespace::{Continuity, FESpace};
use crate::kernels::MassOperator;
use crate::mesh::{CartesianMesh, LorSpec};
use crate::quadrature::{gauss, make_rule, RuleKind};
use crate::solver::{dot, pcg, CgConfig, SolveReport};
use crate::transfer::{lor_space, TransferPair};

/// Largest high-order DOF count accepted by [`Method::DenseEig`].
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    DenseEig,
    PowerIteration,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "dense-eig" => Ok(Method::DenseEig),
            "power" | "power-iteration" => Ok(Method::PowerIteration),
            _ => Err(Error::arg(format!("unknown method '{s}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DenseEig => "dense-eig",
            Method::PowerIteration => "power-iteration",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub alpha: f64,
    pub beta: f64,
    /// `β² / α²`
    pub kappa: f64,
    pub method: Method,
}

impl SpectralReport {
    fn new(alpha: f64, beta: f64, method: Method) -> Self {
        SpectralReport {
            alpha,
            beta,
            kappa: (beta * beta) / (alpha * alpha),
            method,
        }
    }
}

pub fn lower_bound_alpha(pair: &TransferPair, method: Method) -> Result<SpectralReport> {
    match method {
        Method::DenseEig => dense_bounds(pair),
        Method::PowerIteration => power_bounds(pair),
    }
}

/// Singular values of `L_L⁻¹ M_LH L_H⁻ᵀ` where `M = L Lᵀ`; these are the
/// square roots of the pencil eigenvalues without forming the pencil.
fn dense_bounds(pair: &TransferPair) -> Result<SpectralReport> {
    let nh = pair.high().dof_count();
    if nh > DENSE_LIMIT {
        return Err(Error::arg(format!(
            "dense eigensolve limited to {DENSE_LIMIT} high-order DOFs, got {nh}"
        )));
    }
    let (rho_h, rho_l) = match pair.density() {
        Some((h, l)) => (Some(h), Some(l)),
        None => (None, None),
    };
    let ml = MassOperator::square(pair.low(), rho_l)?.to_dense();
    let mh = MassOperator::square(pair.high(), rho_h)?.to_dense();
    let mlh = pair.mixed_operator().to_dense();
    let ll = Cholesky::new(ml)
        .ok_or_else(|| Error::arg("low mass matrix is not positive definite"))?
        .l();
    let lh = Cholesky::new(mh)
        .ok_or_else(|| Error::arg("high mass matrix is not positive definite"))?
        .l();
    let a = ll
        .solve_lower_triangular(&mlh)
        .ok_or_else(|| Error::arg("singular low mass factor"))?;
    // C = A L_H⁻ᵀ, i.e. Cᵀ = L_H⁻¹ Aᵀ
    let ct = lh
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| Error::arg("singular high mass factor"))?;
    let sv = ct.singular_values();
    let alpha = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = sv.iter().copied().fold(0.0, f64::max);
    Ok(SpectralReport::new(alpha, beta, Method::DenseEig))
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_STEPS: usize = 500;

fn power_bounds(pair: &TransferPair) -> Result<SpectralReport> {
    let rho_h = pair.density().map(|(h, _)| h);
    let mh = MassOperator::square(pair.high(), rho_h)?;
    let diag = pair.high_mass_diagonal().to_vec();
    let cg = CgConfig {
        rel_tol: 1e-13,
        max_iter: 2000,
    };
    let apply_a = |x: &[f64], y: &mut [f64]| pair.apply_normal(x, y);
    let apply_m = |x: &[f64], y: &mut [f64]| mh.apply_into(x, y);
    // smallest: x ← A⁻¹ M x; largest: x ← M⁻¹ A x
    let lo = rayleigh_iteration(&apply_a, &apply_m, &diag, cg, true)?;
    let hi = rayleigh_iteration(&apply_a, &apply_m, &diag, cg, false)?;
    Ok(SpectralReport::new(
        lo.max(0.0).sqrt(),
        hi.max(0.0).sqrt(),
        Method::PowerIteration,
    ))
}

fn rayleigh_iteration(
    apply_a: &dyn Fn(&[f64], &mut [f64]),
    apply_m: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    cg: CgConfig,
    smallest: bool,
) -> Result<f64> {
    let n = diag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut ax = vec![0.0; n];
    let mut mx = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut history = Vec::new();
    for step in 1..=POWER_MAX_STEPS {
        apply_a(&x, &mut ax);
        apply_m(&x, &mut mx);
        let next_lambda = dot(&x, &ax) / dot(&x, &mx);
        let change = ((next_lambda - lambda) / next_lambda).abs();
        history.push(change);
        lambda = next_lambda;
        if change <= POWER_TOL {
            return Ok(lambda);
        }
        let (y, _) = if smallest {
            pcg(apply_a, diag, &mx, cg)?
        } else {
            pcg(apply_m, diag, &ax, cg)?
        };
        let scale = dot(&y, &y).sqrt();
        x = y.into_iter().map(|v| v / scale).collect();
        if step == POWER_MAX_STEPS {
            break;
        }
    }
    Err(Error::NonConvergence {
        report: SolveReport {
            iterations: POWER_MAX_STEPS,
            relative_residual: history.last().copied().unwrap_or(f64::NAN),
            converged: false,
        },
        history,
    })
}

/// 1D reference pairing used by the node-set studies: degree `p` on `[-1, 1]`
/// against piecewise constants on `n = p + 1` cells split at `kind`.
pub fn reference_pair(p: usize, kind: RuleKind) -> Result<TransferPair> {
    let mesh = CartesianMesh::uniform(&[1], &[(-1.0, 1.0)])?;
    let cont = if p == 0 { Continuity::L2 } else { Continuity::H1 };
    let high = FESpace::new(mesh, p, cont)?;
    let n = p + 1;
    let low = lor_space(&high, LorSpec::new(n, kind), 0)?;
    TransferPair::new(&high, &low, n, None, CgConfig::default())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub kind: RuleKind,
    pub p: usize,
    pub report: SpectralReport,
}

/// α and β for every kind and degree with `q = 0`, `n = p + 1`, by DenseEig.
pub fn node_set_sweep(
    kinds: &[RuleKind],
    degrees: impl IntoIterator<Item = usize> + Clone,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for p in degrees.clone() {
            let pair = reference_pair(p, kind)?;
            rows.push(SweepRow {
                kind,
                p,
                report: lower_bound_alpha(&pair, Method::DenseEig)?,
            });
        }
    }
    Ok(rows)
}

/// Legendre-basis Gram data on the cells of the closed `kind` mesh with `p`
/// cells: `(M, A)` with `M` the L² Gram matrix of `P_0..P_{p-1}` and `A` the
/// Gram matrix of their cell-average functions.
fn average_grams(p: usize, kind: RuleKind) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if p == 0 {
        return Err(Error::arg("norm equivalence needs p ≥ 1"));
    }
    let splits = make_rule(kind, p)?.points;
    if splits.len() != p + 1 {
        return Err(Error::arg(format!("{kind} is not a closed node set")));
    }
    let g = gauss(p + 1);
    let m = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            2.0 / (2 * i + 1) as f64
        } else {
            0.0
        }
    });
    // averages[c][k] = mean of P_k over cell c
    let mut avg = DMatrix::zeros(p, p);
    for c in 0..p {
        let (lo, hi) = (splits[c], splits[c + 1]);
        for k in 0..p {
            let mut s = 0.0;
            for (x, w) in g.points.iter().zip(g.weights()) {
                let t = lo + 0.5 * (x + 1.0) * (hi - lo);
                s += 0.5 * w * crate::poly::legendre(k, t);
            }
            avg[(c, k)] = s;
        }
    }
    let h = DMatrix::from_fn(p, p, |i, j| if i == j { splits[i + 1] - splits[i] } else { 0.0 });
    let a = avg.transpose() * h * &avg;
    Ok((m, a))
}

/// Extremes of `‖v_L‖₀ / ‖v‖₀` over degree-`(p-1)` polynomials, `v_L` the
/// cell-average function on the `kind` mesh with `p` cells.
pub fn norm_equivalence_extremes(p: usize, kind: RuleKind) -> Result<(f64, f64)> {
    let (m, a) = average_grams(p, kind)?;
    // M is diagonal; symmetric scaling M^{-1/2} A M^{-1/2}
    let s = DMatrix::from_fn(p, p, |i, j| a[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt());
    let ev = nalgebra::SymmetricEigen::new(s).eigenvalues;
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    let hi = ev.iter().copied().fold(0.0, f64::max).sqrt();
    Ok((lo, hi))
}

/// Minimum and maximum of `‖v_L‖₀ / ‖v‖₀` over `samples` random polynomials
/// of degree `p - 1` with uniform Legendre coefficients in `[-1, 1]`.
pub fn norm_equivalence_check(
    p: usize,
    kind: RuleKind,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (m, a) = average_grams(p, kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for _ in 0..samples {
        let c = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let r = (c.dot(&(&a * &c)) / c.dot(&(&m * &c))).sqrt();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Ratio for a single polynomial given by Legendre coefficients.
pub fn norm_ratio(legendre_coeffs: &[f64], kind: RuleKind) -> Result<f64> {
    let p = legendre_coeffs.len();
    let (m, a) = average_grams(p, kind)?;
    let c = DVector::from_column_slice(legendre_coeffs);
    Ok((c.dot(&(&a * &c)) / c.dot(&(&m * &c))).sqrt())
}

/// Singular values of the single-element mixed block on `[-1, 1]`, sorted
/// descending and normalized by the largest.
pub fn mixed_block_singular_values(p: usize, q: usize, n: usize, kind: RuleKind) -> Result<Vec<f64>> {
    let mesh = CartesianMesh::uniform(&[1], &[(-1.0, 1.0)])?;
    let cont = if p == 0 { Continuity::L2 } else { Continuity::H1 };
    let high: Arc<FESpace> = FESpace::new(mesh, p, cont)?;
    let low = lor_space(&high, LorSpec::new(n, kind), q)?;
    let op = MassOperator::mixed(&low, &high, None)?;
    let blk = op.element_matrix(0)?;
    let mut sv: Vec<f64> = blk.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max = sv[0];
    Ok(sv.into_iter().map(|s| s / max).collect())
}

/// Numerical rank with relative threshold `1e-10`.
pub fn mixed_block_rank(p: usize, q: usize, n: usize, kind: RuleKind) -> Result<usize> {
    Ok(mixed_block_singular_values(p, q, n, kind)?
        .iter()
        .filter(|&&s| s > 1e-10)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_when_spaces_coincide() {
        let mesh = CartesianMesh::uniform(&[3], &[(0.0, 1.0)]).unwrap();
        let high = FESpace::new(mesh, 0, Continuity::L2).unwrap();
        let low = lor_space(&high, LorSpec::new(1, RuleKind::GaussLobatto), 0).unwrap();
        let pair = TransferPair::new(&high, &low, 1, None, CgConfig::default()).unwrap();
        let r = lower_bound_alpha(&pair, Method::DenseEig).unwrap();
        assert_abs_diff_eq!(r.alpha, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.beta, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_on_two_cells() {
        let r = lower_bound_alpha(&reference_pair(1, RuleKind::GaussLobatto).unwrap(), Method::DenseEig)
            .unwrap();
        assert_abs_diff_eq!(r.alpha, 3f64.sqrt() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.beta, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            norm_ratio(&[0.0, 1.0], RuleKind::GaussLobatto).unwrap(),
            3f64.sqrt() / 2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(norm_ratio(&[1.0], RuleKind::GaussLobatto).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn methods_agree() {
        for kind in [RuleKind::GaussLobatto, RuleKind::UniformClosed] {
            let pair = reference_pair(6, kind).unwrap();
            let d = lower_bound_alpha(&pair, Method::DenseEig).unwrap();
            let p = lower_bound_alpha(&pair, Method::PowerIteration).unwrap();
            assert!((d.alpha - p.alpha).abs() <= 1e-8 * d.alpha, "{d:?} {p:?}");
            assert!((d.beta - p.beta).abs() <= 1e-8 * d.beta);
        }
    }
}
