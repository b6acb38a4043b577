//! One-dimensional point families on `[-1, 1]`.
//!
//! Open families (`Gauss`, `Chebyshev`, `GaussLobattoMidpoints`) of order `n`
//! have `n` points. Closed families (`GaussLobatto`, `ChebyshevLobatto`,
//! `UniformClosed` and the augmented sets) of order `n` have `n + 1` points,
//! include `±1`, and split the interval into `n` pieces; they are the ones that
//! can drive low-order refinement.
//!
//! Only the Gauss and Gauss–Lobatto families carry quadrature weights. The
//! remaining families are point sets (mesh vertices, nodal basis points).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::poly::{barycentric_weights, lagrange_values, legendre_and_derivative};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-15;

/// Largest order accepted by the dense conditioning analysis.
pub const DENSE_ANALYSIS_MAX_N: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Gauss,
    GaussLobatto,
    Chebyshev,
    ChebyshevLobatto,
    UniformClosed,
    /// Chebyshev points of order `n - 1` together with `±1`.
    AugmentedChebyshev,
    /// Gauss points of order `n - 1` together with `±1`.
    AugmentedGauss,
    /// Midpoints of the `n` Gauss–Lobatto subintervals.
    GaussLobattoMidpoints,
}

impl RuleKind {
    pub const ALL: [RuleKind; 8] = [
        RuleKind::Gauss,
        RuleKind::GaussLobatto,
        RuleKind::Chebyshev,
        RuleKind::ChebyshevLobatto,
        RuleKind::UniformClosed,
        RuleKind::AugmentedChebyshev,
        RuleKind::AugmentedGauss,
        RuleKind::GaussLobattoMidpoints,
    ];

    /// Whether the family contains both interval endpoints.
    pub fn is_closed(self) -> bool {
        matches!(
            self,
            RuleKind::GaussLobatto
                | RuleKind::ChebyshevLobatto
                | RuleKind::UniformClosed
                | RuleKind::AugmentedChebyshev
                | RuleKind::AugmentedGauss
        )
    }

    pub fn has_weights(self) -> bool {
        matches!(self, RuleKind::Gauss | RuleKind::GaussLobatto)
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Gauss => "gauss",
            RuleKind::GaussLobatto => "gauss-lobatto",
            RuleKind::Chebyshev => "chebyshev",
            RuleKind::ChebyshevLobatto => "chebyshev-lobatto",
            RuleKind::UniformClosed => "uniform",
            RuleKind::AugmentedChebyshev => "augmented-chebyshev",
            RuleKind::AugmentedGauss => "augmented-gauss",
            RuleKind::GaussLobattoMidpoints => "gauss-lobatto-midpoints",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let kind = match norm.as_str() {
            "gauss" | "g" | "gauss-legendre" => RuleKind::Gauss,
            "gauss-lobatto" | "gl" => RuleKind::GaussLobatto,
            "chebyshev" | "c" => RuleKind::Chebyshev,
            "chebyshev-lobatto" | "cl" => RuleKind::ChebyshevLobatto,
            "uniform" | "uniform-closed" | "u" => RuleKind::UniformClosed,
            "augmented-chebyshev" => RuleKind::AugmentedChebyshev,
            "augmented-gauss" => RuleKind::AugmentedGauss,
            "gauss-lobatto-midpoints" | "gl-midpoints" => RuleKind::GaussLobattoMidpoints,
            _ => return Err(Error::arg(format!("unknown node kind '{s}'"))),
        };
        Ok(kind)
    }
}

/// A symmetric point set on `[-1, 1]`, optionally with quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub kind: RuleKind,
    pub n: usize,
    pub points: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub closed: bool,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weights of an integrating rule. Panics for point-only families.
    pub fn weights(&self) -> &[f64] {
        self.weights
            .as_deref()
            .unwrap_or_else(|| panic!("{} is a point-only family", self.kind))
    }

    /// Applies the rule to `f` on `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(self.weights())
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss rule with `n` points; shorthand for the most common call.
pub fn gauss(n: usize) -> QuadRule {
    make_rule(RuleKind::Gauss, n).expect("Gauss rule construction")
}

/// Gauss–Lobatto rule with `n + 1` points.
pub fn gauss_lobatto(n: usize) -> QuadRule {
    make_rule(RuleKind::GaussLobatto, n).expect("Gauss-Lobatto rule construction")
}

pub fn make_rule(kind: RuleKind, n: usize) -> Result<QuadRule> {
    if n == 0 {
        return Err(Error::arg("rule order must be at least 1"));
    }
    let (points, weights) = match kind {
        RuleKind::Gauss => {
            let pts = gauss_points(n)?;
            let w = pts
                .iter()
                .map(|&x| {
                    let (_, dp) = legendre_and_derivative(n, x);
                    2.0 / ((1.0 - x * x) * dp * dp)
                })
                .collect();
            (pts, Some(w))
        }
        RuleKind::GaussLobatto => {
            let pts = gauss_lobatto_points(n)?;
            let scale = (n * (n + 1)) as f64;
            let w = pts
                .iter()
                .map(|&x| {
                    let (p, _) = legendre_and_derivative(n, x);
                    2.0 / (scale * p * p)
                })
                .collect();
            (pts, Some(w))
        }
        RuleKind::Chebyshev => (
            symmetric_from_angles(n, |i| PI * ((i as f64 + 0.5) / n as f64)),
            None,
        ),
        RuleKind::ChebyshevLobatto => (
            symmetric_from_angles(n + 1, |i| PI * (i as f64 / n as f64)),
            None,
        ),
        RuleKind::UniformClosed => {
            let pts = symmetric_fill(n + 1, |i| -1.0 + 2.0 * (i as f64 / n as f64));
            (pts, None)
        }
        RuleKind::AugmentedChebyshev => {
            let inner = if n > 1 {
                symmetric_from_angles(n - 1, |i| PI * ((i as f64 + 0.5) / (n - 1) as f64))
            } else {
                Vec::new()
            };
            (augment(inner), None)
        }
        RuleKind::AugmentedGauss => {
            let inner = if n > 1 { gauss_points(n - 1)? } else { Vec::new() };
            (augment(inner), None)
        }
        RuleKind::GaussLobattoMidpoints => {
            let gl = gauss_lobatto_points(n)?;
            let mids = symmetric_fill(n, |i| 0.5 * (gl[i] + gl[i + 1]));
            (mids, None)
        }
    };
    Ok(QuadRule {
        kind,
        n,
        points,
        weights,
        closed: kind.is_closed(),
    })
}

/// Builds a point set of length `m` from the left half, mirroring the right
/// half so the set is exactly symmetric.
fn symmetric_fill(m: usize, left: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut pts = vec![0.0; m];
    for i in 0..m / 2 {
        let x = left(i);
        pts[i] = x;
        pts[m - 1 - i] = -x;
    }
    pts
}

fn symmetric_from_angles(m: usize, angle: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut pts = symmetric_fill(m, |i| -angle(i).cos());
    if let (Some(first), Some(last)) = (pts.first().copied(), pts.last().copied()) {
        // closed families: keep endpoints exact
        if first < -1.0 + 1e-15 {
            pts[0] = -1.0;
        }
        if last > 1.0 - 1e-15 {
            *pts.last_mut().unwrap() = 1.0;
        }
    }
    pts
}

fn augment(inner: Vec<f64>) -> Vec<f64> {
    let mut pts = Vec::with_capacity(inner.len() + 2);
    pts.push(-1.0);
    pts.extend(inner);
    pts.push(1.0);
    pts
}

/// Safeguarded Newton iteration for a root of `f` bracketed by `[lo, hi]`.
fn bracketed_newton(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    seed: f64,
    index: usize,
    n: usize,
) -> Result<f64> {
    let mut f_lo = f(lo).0;
    let f_hi = f(hi).0;
    if f_lo * f_hi > 0.0 {
        return Err(Error::Construction {
            index,
            n,
            reason: "angle bracket does not enclose a sign change".into(),
        });
    }
    let mut x = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == (f_lo < 0.0) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= NEWTON_TOL {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Construction {
        index,
        n,
        reason: format!("no convergence after {NEWTON_MAX_ITER} iterations"),
    })
}

/// Zeros of `P_n`, seeded inside the Bruns angle brackets.
fn gauss_points(n: usize) -> Result<Vec<f64>> {
    let mut pts = vec![0.0; n];
    let denom = (2 * n + 1) as f64;
    for i in 0..n / 2 {
        let k = (i + 1) as f64;
        let lo = -(PI * ((2.0 * k - 1.0) / denom)).cos();
        let hi = -(PI * (2.0 * k / denom)).cos();
        let seed = -(PI * ((4.0 * k - 1.0) / (2.0 * denom))).cos();
        let x = bracketed_newton(|x| legendre_and_derivative(n, x), lo, hi, seed, i, n)?;
        pts[i] = x;
        pts[n - 1 - i] = -x;
    }
    Ok(pts)
}

/// Zeros of `(1 - x^2) P'_n`, with interior nodes seeded inside the
/// Sündermann angle brackets.
fn gauss_lobatto_points(n: usize) -> Result<Vec<f64>> {
    let mut pts = vec![0.0; n + 1];
    pts[0] = -1.0;
    pts[n] = 1.0;
    let denom = (2 * n + 1) as f64;
    let nn = (n * (n + 1)) as f64;
    // P'_n and P''_n; P''_n from the Legendre ODE on the open interval.
    let dp = |x: f64| {
        let (p, d) = legendre_and_derivative(n, x);
        let dd = (2.0 * x * d - nn * p) / (1.0 - x * x);
        (d, dd)
    };
    for i in 1..n.div_ceil(2) {
        let k = i as f64;
        let lo = -(PI * (2.0 * k / denom)).cos();
        let hi = -(PI * ((2.0 * k + 1.0) / denom)).cos();
        let seed = -(PI * (k / n as f64)).cos();
        let seed = if seed > lo && seed < hi { seed } else { 0.5 * (lo + hi) };
        let x = bracketed_newton(dp, lo, hi, seed, i, n)?;
        pts[i] = x;
        pts[n - i] = -x;
    }
    Ok(pts)
}

/// Semicircle parameterisation of a point set.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleView {
    /// `φ_i = arccos(-x_i)`, increasing in `[0, π]`.
    pub angles: Vec<f64>,
    /// `φ_i - φ_{i-1}`, one shorter than `angles`.
    pub gaps: Vec<f64>,
    /// `h_i = x_i - x_{i-1}`.
    pub spacings: Vec<f64>,
}

/// Accurate `arccos(-x)`: uses half-angle form to avoid cancellation near `±1`.
pub fn angle_of(x: f64) -> f64 {
    2.0 * (1.0 + x).max(0.0).sqrt().atan2((1.0 - x).max(0.0).sqrt())
}

pub fn angle_view(rule: &QuadRule) -> AngleView {
    let angles: Vec<f64> = rule.points.iter().map(|&x| angle_of(x)).collect();
    let gaps = angles.windows(2).map(|w| w[1] - w[0]).collect();
    let spacings = rule.points.windows(2).map(|w| w[1] - w[0]).collect();
    AngleView {
        angles,
        gaps,
        spacings,
    }
}

/// True when the `n` Gauss points strictly interleave the `n + 1` closed points.
pub fn check_interlacing(gauss: &QuadRule, closed: &QuadRule) -> Result<bool> {
    if closed.len() != gauss.len() + 1 {
        return Err(Error::arg(format!(
            "interlacing needs n and n+1 points, got {} and {}",
            gauss.len(),
            closed.len()
        )));
    }
    Ok(gauss
        .points
        .iter()
        .enumerate()
        .all(|(i, &x)| closed.points[i] < x && x < closed.points[i + 1]))
}

/// Dense nodal mass matrix on `nodes` (exact: Gauss with `len + 1` points).
pub fn nodal_mass_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let m = nodes.len();
    let quad = gauss(m + 1);
    let bary = barycentric_weights(nodes);
    let mut vals = vec![0.0; m];
    let mut mass = DMatrix::zeros(m, m);
    for (&x, &w) in quad.points.iter().zip(quad.weights()) {
        lagrange_values(nodes, &bary, x, &mut vals);
        for i in 0..m {
            for j in 0..m {
                mass[(i, j)] += w * vals[i] * vals[j];
            }
        }
    }
    mass
}

/// Condition number of the diagonally scaled nodal mass matrix,
/// `κ(D^{-1} M)` with `D = diag(M)`.
pub fn diag_precond_condition(kind: RuleKind, n: usize) -> Result<f64> {
    if n > DENSE_ANALYSIS_MAX_N {
        return Err(Error::arg(format!(
            "dense conditioning analysis limited to n <= {DENSE_ANALYSIS_MAX_N}"
        )));
    }
    let rule = make_rule(kind, n)?;
    let mass = nodal_mass_matrix(&rule.points);
    let scale: Vec<f64> = (0..mass.nrows()).map(|i| mass[(i, i)].sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(mass.nrows(), mass.ncols(), |i, j| {
        mass[(i, j)] * scale[i] * scale[j]
    });
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    Ok(max / min)
}
