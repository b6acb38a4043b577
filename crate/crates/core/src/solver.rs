//! Jacobi-preconditioned conjugate gradients and small dense helpers.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final true relative residual `‖b - A x‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub(crate) fn direct(relative_residual: f64) -> Self {
        SolveReport {
            iterations: 0,
            relative_residual,
            converged: true,
        }
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}, converged={}",
            self.iterations, self.relative_residual, self.converged
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            rel_tol: 1e-12,
            max_iter: 200,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` from a zero initial guess with preconditioner `diag(d)`.
///
/// Stops once the preconditioned residual `sqrt(rᵀ D⁻¹ r)` has dropped by
/// `rel_tol` relative to its initial value *and* the recomputed true residual
/// satisfies `‖b - A x‖ ≤ rel_tol ‖b‖`. If only the first test passes the
/// iteration restarts from the true residual.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    cfg: CgConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    if diag.len() != n {
        return Err(Error::arg("preconditioner size does not match right-hand side"));
    }
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, SolveReport::direct(0.0)));
    }
    let inv_d: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut history = vec![1.0];

    for it in 1..=cfg.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NonConvergence {
                report: SolveReport {
                    iterations: it,
                    relative_residual: norm(&r) / b_norm,
                    converged: false,
                },
                history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new = dot(&r, &z);
        let prec_rel = (rz_new / rz0).max(0.0).sqrt();
        history.push(prec_rel);

        if prec_rel <= cfg.rel_tol {
            apply(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let true_rel = norm(&r) / b_norm;
            if true_rel <= cfg.rel_tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations: it,
                        relative_residual: true_rel,
                        converged: true,
                    },
                ));
            }
            for i in 0..n {
                z[i] = r[i] * inv_d[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    apply(&x, &mut ap);
    let true_rel = ap
        .iter()
        .zip(b)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    Err(Error::NonConvergence {
        report: SolveReport {
            iterations: cfg.max_iter,
            relative_residual: true_rel,
            converged: false,
        },
        history,
    })
}

/// Cholesky factors of a list of small SPD blocks stored back to back.
#[derive(Clone, Debug)]
pub(crate) struct BlockCholesky {
    size: usize,
    factors: Vec<Cholesky<f64, Dyn>>,
}

impl BlockCholesky {
    pub(crate) fn new(size: usize, blocks: impl IntoIterator<Item = DMatrix<f64>>) -> Result<Self> {
        let factors = blocks
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                Cholesky::new(m).ok_or_else(|| {
                    Error::arg(format!("block {i} is not symmetric positive definite"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockCholesky { size, factors })
    }

    pub(crate) fn block_size(&self) -> usize {
        self.size
    }

    pub(crate) fn solve_block(&self, block: usize, rhs: &mut [f64]) {
        let v = DVector::from_column_slice(rhs);
        let sol = self.factors[block].solve(&v);
        rhs.copy_from_slice(sol.as_slice());
    }

    pub(crate) fn factor(&self, block: usize) -> &Cholesky<f64, Dyn> {
        &self.factors[block]
    }
}
