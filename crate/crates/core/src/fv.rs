//! Finite-volume advection on periodic uniform 2D grids and the coupling
//! experiment that moves a high-order field through it and back.
//!
//! Cell averages follow the same numbering as a degree-0 L2 space on the
//! grid, so an [`FvState`] converts to and from a [`Field`] without copies
//! being reordered.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fespace::{interpolate_nodal, project_l2_with, Continuity, FESpace, Field};
use crate::mesh::{CartesianMesh, LorSpec};
use crate::quadrature::{gauss, RuleKind};
use crate::transfer::{lor_space, make_pair};

/// Largest accepted Courant number `dt · max|β| / h`.
pub const MAX_COURANT: f64 = 0.5;
/// Courant number used by [`stable_step`].
pub const DEFAULT_COURANT: f64 = 0.3;

pub trait VelocityField: Sync {
    fn velocity(&self, x: f64, y: f64) -> [f64; 2];
}

/// `β = (2y - 1, 1 - 2x)`: rigid rotation about `(1/2, 1/2)` with angular
/// speed 2, clockwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rotation;

impl VelocityField for Rotation {
    fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        [2.0 * y - 1.0, 1.0 - 2.0 * x]
    }
}

impl Rotation {
    /// Pre-image at time 0 of the point `(x, y)` at time `t`.
    pub fn trace_back(x: f64, y: f64, t: f64) -> (f64, f64) {
        let (s, c) = (2.0 * t).sin_cos();
        let (dx, dy) = (x - 0.5, y - 0.5);
        (0.5 + c * dx - s * dy, 0.5 + s * dx + c * dy)
    }
}

/// Constant velocity.
#[derive(Clone, Copy, Debug)]
pub struct Uniform(pub f64, pub f64);

impl VelocityField for Uniform {
    fn velocity(&self, _x: f64, _y: f64) -> [f64; 2] {
        [self.0, self.1]
    }
}

#[derive(Clone, Debug)]
pub struct FvState {
    pub grid: CartesianMesh,
    pub averages: Vec<f64>,
    pub q_rec: usize,
    pub t: f64,
}

impl FvState {
    pub fn from_field(field: &Field, q_rec: usize) -> Result<Self> {
        let s = field.space();
        if s.degree() != 0 || s.continuity() != Continuity::L2 || s.dim() != 2 {
            return Err(Error::arg("finite-volume state needs a 2D degree-0 L2 field"));
        }
        Ok(FvState {
            grid: s.mesh().clone(),
            averages: field.coefficients().to_vec(),
            q_rec,
            t: 0.0,
        })
    }

    pub fn to_field(&self, space: &Arc<FESpace>) -> Result<Field> {
        if space.mesh() != &self.grid || space.degree() != 0 {
            return Err(Error::arg("space does not match the finite-volume grid"));
        }
        Field::new(space.clone(), self.averages.clone())
    }

    /// `Σ ū_i |cell_i|`.
    pub fn mass(&self) -> f64 {
        (0..self.grid.num_elements())
            .map(|e| self.averages[e] * self.grid.element_volume(e))
            .sum()
    }
}

/// Weights `w` with `Σ_k w_k ū_{start+k}` equal to the value at `xi` of the
/// degree-`q` polynomial whose averages over unit cells centered at
/// `start..=start+q` are `ū`. `xi` is measured from the center of cell 0.
pub fn reconstruction_weights(start: isize, q: usize, xi: f64) -> Vec<f64> {
    let n = q + 1;
    let a = DMatrix::from_fn(n, n, |k, m| {
        let o = (start + k as isize) as f64;
        let e = (m + 1) as i32;
        ((o + 0.5).powi(e) - (o - 0.5).powi(e)) / e as f64
    });
    let v = DVector::from_fn(n, |m, _| xi.powi(m as i32));
    let w = a
        .transpose()
        .lu()
        .solve(&v)
        .expect("moment matrix of distinct cells is invertible");
    w.iter().copied().collect()
}

struct Stencil {
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

impl Stencil {
    fn new(start: isize, q: usize, xi: f64) -> Self {
        Stencil {
            offsets: (0..=q as isize).map(|k| start + k).collect(),
            weights: reconstruction_weights(start, q, xi),
        }
    }

    /// Average of the two stencils, merged over their offset union.
    fn average(a: Stencil, b: Stencil) -> Self {
        let lo = a.offsets[0].min(b.offsets[0]);
        let hi = *a.offsets.last().unwrap().max(b.offsets.last().unwrap());
        let offsets: Vec<isize> = (lo..=hi).collect();
        let mut weights = vec![0.0; offsets.len()];
        for s in [&a, &b] {
            for (o, w) in s.offsets.iter().zip(&s.weights) {
                weights[(o - lo) as usize] += 0.5 * w;
            }
        }
        Stencil { offsets, weights }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

// flux += w β û with û the upwind value
fn upwind(flux: &mut [f64], w: f64, beta: &[f64], ul: &[f64], ur: &[f64]) {
    for (((f, &b), &l), &r) in flux.iter_mut().zip(beta).zip(ul).zip(ur) {
        *f += w * b * if b > 0.0 { l } else { r };
    }
}

/// Semi-discrete operator and RK4 stepper on a fixed grid and velocity.
pub struct FvSolver {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    q_rec: usize,
    left: Stencil,
    right: Stencil,
    transverse: Vec<Stencil>,
    gauss_w: Vec<f64>,
    // β·e_x at x-face points, [(j * ng + g) * nx + i] for the face right of cell i
    vx: Vec<f64>,
    // β·e_y at y-face points, [(j * ng + g) * nx + i] for the face above cell j
    vy: Vec<f64>,
    max_speed: f64,
    // wrap_y[o + pad][j] = (j + o) mod ny
    wrap_y: Vec<Vec<usize>>,
    pad: isize,
}

fn uniform_spacing(v: &[f64]) -> Option<f64> {
    let h = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    v.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0))
        .then_some(h)
}

impl FvSolver {
    pub fn new(grid: &CartesianMesh, q_rec: usize, velocity: &dyn VelocityField) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::arg("finite-volume solver is two-dimensional"));
        }
        let hx = uniform_spacing(grid.axis(0))
            .ok_or_else(|| Error::arg("finite-volume grid must be uniform along x"))?;
        let hy = uniform_spacing(grid.axis(1))
            .ok_or_else(|| Error::arg("finite-volume grid must be uniform along y"))?;
        let (nx, ny) = (grid.elements_along(0), grid.elements_along(1));
        if nx <= q_rec + 1 || ny <= q_rec + 1 {
            return Err(Error::arg("grid too small for the reconstruction stencil"));
        }
        let q = q_rec;
        let lshift = q.div_ceil(2) as isize;
        let left = Stencil::new(-lshift, q, 0.5);
        let right = Stencil::new(-(q as isize - lshift), q, -0.5);

        let ng = q.div_ceil(2) + 1;
        let rule = gauss(ng);
        let transverse = rule
            .points
            .iter()
            .map(|&x| {
                let eta = 0.5 * x;
                if q % 2 == 0 {
                    Stencil::new(-(q as isize / 2), q, eta)
                } else {
                    let h = (q as isize + 1) / 2;
                    Stencil::average(Stencil::new(-h, q, eta), Stencil::new(-h + 1, q, eta))
                }
            })
            .collect();
        let gauss_w: Vec<f64> = rule.weights().iter().map(|w| 0.5 * w).collect();

        let (x0, y0) = (grid.axis(0)[0], grid.axis(1)[0]);
        let mut vx = vec![0.0; nx * ny * ng];
        let mut vy = vec![0.0; nx * ny * ng];
        let mut max_speed: f64 = 0.0;
        for j in 0..ny {
            for (g, &pt) in rule.points.iter().enumerate() {
                for i in 0..nx {
                    let xf = x0 + (i + 1) as f64 * hx;
                    let yf = y0 + (j + 1) as f64 * hy;
                    let yg = y0 + (j as f64 + 0.5 + 0.5 * pt) * hy;
                    let xg = x0 + (i as f64 + 0.5 + 0.5 * pt) * hx;
                    let bx = velocity.velocity(xf, yg);
                    let by = velocity.velocity(xg, yf);
                    vx[(j * ng + g) * nx + i] = bx[0];
                    vy[(j * ng + g) * nx + i] = by[1];
                    let speed = bx[0].hypot(bx[1]).max(by[0].hypot(by[1]));
                    max_speed = max_speed.max(speed / hx.min(hy));
                }
            }
        }
        let pad = q as isize + 2;
        let wrap_y = (-pad..=pad)
            .map(|o| (0..ny).map(|j| (j as isize + o).rem_euclid(ny as isize) as usize).collect())
            .collect();
        Ok(FvSolver {
            nx,
            ny,
            hx,
            hy,
            q_rec,
            left,
            right,
            transverse,
            gauss_w,
            vx,
            vy,
            max_speed,
            wrap_y,
            pad,
        })
    }

    pub fn q_rec(&self) -> usize {
        self.q_rec
    }

    /// `max |β| / h` over all face quadrature points.
    pub fn max_rate(&self) -> f64 {
        self.max_speed
    }

    /// Step size with Courant number `courant`.
    pub fn stable_step(&self, courant: f64) -> f64 {
        courant / self.max_speed
    }

    pub fn courant(&self, dt: f64) -> f64 {
        dt * self.max_speed
    }

    fn wy(&self, o: isize) -> &[usize] {
        &self.wrap_y[(o + self.pad) as usize]
    }

    /// `du/dt` of the semi-discrete scheme.
    pub fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let ng = self.gauss_w.len();
        let pad = self.pad as usize;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut a_l = vec![0.0; nx * ny];
        let mut a_r = vec![0.0; nx * ny];
        // periodically padded rows: ext[pad + i] = row[i mod nx]
        let mut ext = vec![0.0; nx + 2 * pad];
        let mut ext_r = vec![0.0; nx + 2 * pad];
        let mut ul = vec![0.0; nx];
        let mut ur = vec![0.0; nx];
        let mut flux = vec![0.0; nx];
        // pad ≤ nx because nx > q_rec + 1
        let fill = |ext: &mut [f64], row: &[f64]| {
            ext[..pad].copy_from_slice(&row[nx - pad..]);
            ext[pad..pad + nx].copy_from_slice(row);
            ext[pad + nx..].copy_from_slice(&row[..pad]);
        };

        // x-faces: reconstruct along x, index (j, i) for the face right of cell i
        for j in 0..ny {
            let row = j * nx;
            fill(&mut ext, &u[row..row + nx]);
            for (st, dst, base) in [(&self.left, &mut a_l, 0), (&self.right, &mut a_r, 1)] {
                let dst = &mut dst[row..row + nx];
                for (o, w) in st.offsets.iter().zip(&st.weights) {
                    axpy(dst, *w, &ext[(self.pad + o + base) as usize..][..nx]);
                }
            }
        }
        let cx = self.hy / (self.hx * self.hy);
        for j in 0..ny {
            flux.iter_mut().for_each(|v| *v = 0.0);
            for g in 0..ng {
                let st = &self.transverse[g];
                ul.iter_mut().for_each(|v| *v = 0.0);
                ur.iter_mut().for_each(|v| *v = 0.0);
                for (o, w) in st.offsets.iter().zip(&st.weights) {
                    let r = self.wy(*o)[j] * nx;
                    axpy(&mut ul, *w, &a_l[r..r + nx]);
                    axpy(&mut ur, *w, &a_r[r..r + nx]);
                }
                let gw = self.gauss_w[g];
                let vel = &self.vx[(j * ng + g) * nx..][..nx];
                upwind(&mut flux, gw, vel, &ul, &ur);
            }
            let row = &mut out[j * nx..(j + 1) * nx];
            for i in 0..nx {
                row[i] -= cx * flux[i];
            }
            row[0] += cx * flux[nx - 1];
            for i in 1..nx {
                row[i] += cx * flux[i - 1];
            }
        }

        // y-faces: reconstruct along y, index (j, i) for the face above cell j
        a_l.iter_mut().for_each(|v| *v = 0.0);
        a_r.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..ny {
            let row = j * nx;
            for (st, dst, base) in [(&self.left, &mut a_l, 0), (&self.right, &mut a_r, 1)] {
                let dst = &mut dst[row..row + nx];
                for (o, w) in st.offsets.iter().zip(&st.weights) {
                    let src = self.wy(o + base)[j] * nx;
                    axpy(dst, *w, &u[src..src + nx]);
                }
            }
        }
        let cy = self.hx / (self.hx * self.hy);
        for j in 0..ny {
            let row = j * nx;
            fill(&mut ext, &a_l[row..row + nx]);
            fill(&mut ext_r, &a_r[row..row + nx]);
            flux.iter_mut().for_each(|v| *v = 0.0);
            for g in 0..ng {
                let st = &self.transverse[g];
                ul.iter_mut().for_each(|v| *v = 0.0);
                ur.iter_mut().for_each(|v| *v = 0.0);
                for (o, w) in st.offsets.iter().zip(&st.weights) {
                    let at = (self.pad + o) as usize;
                    axpy(&mut ul, *w, &ext[at..at + nx]);
                    axpy(&mut ur, *w, &ext_r[at..at + nx]);
                }
                let gw = self.gauss_w[g];
                let vel = &self.vy[(j * ng + g) * nx..][..nx];
                upwind(&mut flux, gw, vel, &ul, &ur);
            }
            let up = self.wy(1)[j] * nx;
            for i in 0..nx {
                out[row + i] -= cy * flux[i];
                out[up + i] += cy * flux[i];
            }
        }
    }

    /// One classical RK4 step.
    pub fn step(&self, state: &mut FvState, dt: f64) -> Result<()> {
        let c = self.courant(dt);
        if !(c <= MAX_COURANT) {
            return Err(Error::arg(format!(
                "Courant number {c:.3} exceeds {MAX_COURANT}"
            )));
        }
        let n = state.averages.len();
        let u = &state.averages;
        let mut k = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut acc = u.clone();

        self.rhs(u, &mut k);
        for i in 0..n {
            acc[i] += dt / 6.0 * k[i];
            tmp[i] = u[i] + 0.5 * dt * k[i];
        }
        self.rhs(&tmp, &mut k);
        for i in 0..n {
            acc[i] += dt / 3.0 * k[i];
            tmp[i] = u[i] + 0.5 * dt * k[i];
        }
        self.rhs(&tmp, &mut k);
        for i in 0..n {
            acc[i] += dt / 3.0 * k[i];
            tmp[i] = u[i] + dt * k[i];
        }
        self.rhs(&tmp, &mut k);
        for i in 0..n {
            acc[i] += dt / 6.0 * k[i];
        }
        state.averages = acc;
        state.t += dt;
        Ok(())
    }

    /// Advances to `t_final` with equal steps no larger than the
    /// default-Courant step. Returns the number of steps.
    pub fn evolve(&self, state: &mut FvState, t_final: f64) -> Result<usize> {
        let span = t_final - state.t;
        if span <= 0.0 {
            return Ok(0);
        }
        let steps = (span / self.stable_step(DEFAULT_COURANT)).ceil() as usize;
        let dt = span / steps as f64;
        for _ in 0..steps {
            self.step(state, dt)?;
        }
        state.t = t_final;
        Ok(steps)
    }
}

/// One RK4 step of `u_t + ∇·(β u) = 0`.
pub fn fv_step(state: &FvState, velocity: &dyn VelocityField, dt: f64) -> Result<FvState> {
    let solver = FvSolver::new(&state.grid, state.q_rec, velocity)?;
    let mut next = state.clone();
    solver.step(&mut next, dt)?;
    Ok(next)
}

/// Two Gaussian bumps centred at `(1/4, 1/2)` and `(-1/4, 1/2)`.
pub fn initial_condition(x: f64, y: f64) -> f64 {
    let bump = |cx: f64| (-200.0 * ((x - cx).powi(2) + (y - 0.5).powi(2))).exp();
    bump(0.25) + bump(-0.25)
}

/// Exact solution of the rotation problem at time `t`.
pub fn exact_solution(x: f64, y: f64, t: f64) -> f64 {
    let (x0, y0) = Rotation::trace_back(x, y, t);
    initial_condition(x0, y0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledReport {
    pub nx: usize,
    pub steps: usize,
    pub dof_high: usize,
    pub dof_low: usize,
    /// `‖u_L^N - u‖₀`
    pub err_low_exact: f64,
    /// `‖u_L^N - Π_L u‖₀`
    pub err_low_projected: f64,
    /// `‖P u_L^N - u‖₀`
    pub err_prolonged: f64,
    /// `|∫ u_H^N - ∫ u_H^0|`
    pub conservation: f64,
    /// `|Σ ū^N |cell| - Σ ū^0 |cell||`
    pub fv_mass_drift: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledConfig {
    pub p: usize,
    pub q_rec: usize,
    pub nx: usize,
    pub lor_n: usize,
    pub t_final: f64,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        CoupledConfig {
            p: 2,
            q_rec: 3,
            nx: 10,
            lor_n: 4,
            t_final: FRAC_PI_4,
        }
    }
}

/// Interpolate, restrict, evolve, prolong, and measure.
pub fn run_coupled_experiment(cfg: CoupledConfig) -> Result<CoupledReport> {
    let mesh = CartesianMesh::uniform(&[cfg.nx, cfg.nx], &[(0.0, 1.0); 2])?;
    let high = FESpace::new(mesh, cfg.p, Continuity::H1)?;
    let low = lor_space(&high, LorSpec::new(cfg.lor_n, RuleKind::UniformClosed), 0)?;
    if low.dof_count() <= high.dof_count() {
        return Err(Error::arg("LOR space must have more DOFs than the high-order space"));
    }
    let pair = make_pair(&high, &low, cfg.lor_n, None)?;

    let u_h0 = interpolate_nodal(&high, |x| initial_condition(x[0], x[1]))?;
    let u_l0 = pair.restrict(&u_h0)?;
    let mut state = FvState::from_field(&u_l0, cfg.q_rec)?;
    let mass0 = state.mass();
    let solver = FvSolver::new(&state.grid, cfg.q_rec, &Rotation)?;
    let steps = solver.evolve(&mut state, cfg.t_final)?;
    let u_ln = state.to_field(&low)?;
    let (u_hn, rep) = pair.prolong(&u_ln)?;

    let t = cfg.t_final;
    let exact = |x: &[f64]| exact_solution(x[0], x[1], t);
    let pi_l = project_l2_with(&low, exact, cfg.p + 2)?.0;
    Ok(CoupledReport {
        nx: cfg.nx,
        steps,
        dof_high: high.dof_count(),
        dof_low: low.dof_count(),
        err_low_exact: u_ln.l2_error(exact),
        err_low_projected: u_ln.l2_distance(&pi_l)?,
        err_prolonged: u_hn.l2_error(exact),
        conservation: (u_hn.integrate() - u_h0.integrate()).abs(),
        fv_mass_drift: (state.mass() - mass0).abs(),
        cg_iterations: rep.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reconstruction_reproduces_polynomials() {
        // averages of x^3 over unit cells centred at integers
        let avg = |o: f64| ((o + 0.5).powi(4) - (o - 0.5).powi(4)) / 4.0;
        let w = reconstruction_weights(-2, 3, 0.5);
        let v: f64 = w.iter().enumerate().map(|(k, w)| w * avg(k as f64 - 2.0)).sum();
        assert_abs_diff_eq!(v, 0.125, epsilon = 1e-13);
        assert_eq!(reconstruction_weights(0, 0, 0.3), vec![1.0]);
    }

    #[test]
    fn rotation_solves_advection() {
        let (x, y, t) = (0.3, 0.6, 0.4);
        let eps = 1e-6;
        let ut = (exact_solution(x, y, t + eps) - exact_solution(x, y, t - eps)) / (2.0 * eps);
        let ux = (exact_solution(x + eps, y, t) - exact_solution(x - eps, y, t)) / (2.0 * eps);
        let uy = (exact_solution(x, y + eps, t) - exact_solution(x, y - eps, t)) / (2.0 * eps);
        let b = Rotation.velocity(x, y);
        assert!((ut + b[0] * ux + b[1] * uy).abs() < 1e-6);
        let (x0, y0) = Rotation::trace_back(0.5, 0.75, FRAC_PI_4);
        assert_abs_diff_eq!(x0, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(y0, 0.5, epsilon = 1e-15);
    }
}
