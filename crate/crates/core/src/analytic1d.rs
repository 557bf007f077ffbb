//! Closed-form machinery for the 1D transmission eigenproblem
//!
//! ```text
//!   -(a u')' = λ u  on (0,b) ∪ (b,1),   a = 1 on (0,b), a = a_R on (b,1),
//!   u(0) = 0,   a_R u'(1) + c u(1) = 0,   [u]_b = [a u']_b = 0.
//! ```
//!
//! An eigenvalue is a zero of the 2×2 transmission determinant. Its order
//! equals the ascent, so defective eigenvalues are recognized from the
//! Taylor coefficients of `det M` about the eigenvalue. Those are computed
//! with the trapezoid rule applied to Cauchy's integral on a small circle,
//! which converges geometrically for these entire-in-a-disk functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cplx::C64;
use crate::error::{Error, Result};

/// Diffusion jump location, right diffusion value, and Robin coefficient.
///
/// The left diffusion value is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub b: f64,
    pub a_r: C64,
    pub c: C64,
}

impl ModelParams {
    pub fn new(b: f64, a_r: C64, c: C64) -> Result<Self> {
        let p = ModelParams { b, a_r, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidInput(format!("breakpoint b = {} not in (0,1)", self.b)));
        }
        if !(self.a_r.re > 0.0) || !self.a_r.im.is_finite() {
            return Err(Error::InvalidInput(format!("Re(a_R) must be positive, got {}", self.a_r)));
        }
        if !(self.c.re.is_finite() && self.c.im.is_finite()) {
            return Err(Error::InvalidInput("Robin coefficient must be finite".into()));
        }
        Ok(())
    }

    /// Diffusion coefficient: 1 for `x ≤ b`, `a_R` for `x > b`.
    pub fn coefficient(&self, x: f64) -> C64 {
        if x <= self.b {
            C64::new(1.0, 0.0)
        } else {
            self.a_r
        }
    }
}

/// An eigenvalue of a parameter set together with its (claimed or measured) ascent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub params: ModelParams,
    pub lambda: C64,
    pub ascent: usize,
    /// Scaled |γ_ℓ| values, ℓ = 0..=ascent.
    pub residuals: Vec<f64>,
}

impl EigenConfig {
    pub fn new(params: ModelParams, lambda: C64, ascent: usize) -> Result<Self> {
        params.validate()?;
        if lambda.norm() == 0.0 {
            return Err(Error::InvalidInput("eigenvalue must be nonzero".into()));
        }
        if ascent == 0 {
            return Err(Error::InvalidInput("ascent must be at least 1".into()));
        }
        Ok(EigenConfig { params, lambda, ascent, residuals: Vec::new() })
    }
}

/// Values of the left/right fundamental solutions and their x-derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalValues {
    pub vl: C64,
    pub dvl: C64,
    pub vr: C64,
    pub dvr: C64,
}

/// Principal square roots `μ_L = √λ`, `μ_R = √(λ/a_R)`.
pub fn wave_numbers(params: &ModelParams, lambda: C64) -> (C64, C64) {
    (lambda.sqrt(), (lambda / params.a_r).sqrt())
}

/// Right fundamental solution and its derivative at `x`.
///
/// `v^R(x) = a_R μ cos(μ (1 - x)) + c sin(μ (1 - x))`, so that
/// `a_R v'(1) + c v(1) = 0`; for `a_R = 1, c = 0` this is `μ cos(μ (1 - x))`.
fn right_solution(a_r: C64, c: C64, mu_r: C64, x: f64) -> (C64, C64) {
    let arg = mu_r * (1.0 - x);
    let (s, co) = (arg.sin(), arg.cos());
    (a_r * mu_r * co + c * s, mu_r * (a_r * mu_r * s - c * co))
}

pub fn fundamental_solutions(params: &ModelParams, lambda: C64, x: f64) -> FundamentalValues {
    let (mu_l, mu_r) = wave_numbers(params, lambda);
    fundamental_solutions_with_roots(params, mu_l, mu_r, x)
}

/// Same as [`fundamental_solutions`] with explicitly chosen square-root branches.
pub fn fundamental_solutions_with_roots(params: &ModelParams, mu_l: C64, mu_r: C64, x: f64) -> FundamentalValues {
    let (vr, dvr) = right_solution(params.a_r, params.c, mu_r, x);
    FundamentalValues { vl: (mu_l * x).sin(), dvl: mu_l * (mu_l * x).cos(), vr, dvr }
}

pub type Mat2 = [[C64; 2]; 2];

pub fn transmission_matrix(params: &ModelParams, lambda: C64) -> Mat2 {
    let (mu_l, mu_r) = wave_numbers(params, lambda);
    transmission_matrix_with_roots(params, mu_l, mu_r)
}

pub fn transmission_matrix_with_roots(params: &ModelParams, mu_l: C64, mu_r: C64) -> Mat2 {
    let f = fundamental_solutions_with_roots(params, mu_l, mu_r, params.b);
    [[f.vl, -f.vr], [f.dvl, -params.a_r * f.dvr]]
}

fn det2(m: &Mat2) -> C64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn det_transmission(params: &ModelParams, lambda: C64) -> C64 {
    det2(&transmission_matrix(params, lambda))
}

/// Magnitude of the two products forming `det M`; the rounding level of the determinant.
pub fn det_term_scale(params: &ModelParams, lambda: C64) -> f64 {
    let m = transmission_matrix(params, lambda);
    (m[0][0] * m[1][1]).norm() + (m[0][1] * m[1][0]).norm()
}

/// Contour settings for Cauchy-integral Taylor coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub radius: f64,
    pub nodes: usize,
}

impl Contour {
    /// `radius = max(1e-2, 1e-3 |λ0|)`, 64 nodes.
    pub fn default_for(lambda0: C64) -> Self {
        Contour { radius: (1e-3 * lambda0.norm()).max(1e-2), nodes: 64 }
    }
}

/// Relative tolerance for node-doubling certification of contour rules.
pub const CERTIFY_TOL: f64 = 1e-8;
/// Relative threshold below which a scaled Taylor coefficient counts as zero.
pub const ASCENT_TOL: f64 = 1e-6;
/// Highest Taylor coefficient inspected when measuring the order of a zero.
pub const ASCENT_PROBE_ORDER: usize = 8;

/// Trapezoid-rule Taylor coefficients of a vector-valued holomorphic `f` about `center`.
///
/// `floor` is the magnitude of the terms `f` is computed from; node-doubling
/// differences are compared against `max(max|f|, floor)` so cancellation noise
/// near a zero does not fail certification.
///
/// Returns `coeffs[ℓ][i]` for ℓ = 0..=n, certified by comparing against the
/// half-node rule (the even-index subset of the nodes).
pub(crate) fn cauchy_taylor<F>(f: F, center: C64, n: usize, contour: Contour, floor: f64) -> Result<Vec<Vec<C64>>>
where
    F: Fn(C64) -> Vec<C64>,
{
    let Contour { radius, nodes } = contour;
    if !(radius > 0.0) || nodes < 16 {
        return Err(Error::InvalidInput(format!("contour radius {radius} / nodes {nodes} invalid")));
    }
    if nodes <= 2 * n + 2 {
        return Err(Error::InvalidInput(format!("{nodes} nodes too few for order {n}")));
    }
    let fine = 2 * nodes;
    let samples: Vec<Vec<C64>> = (0..fine)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / fine as f64;
            f(center + C64::from_polar(radius, theta))
        })
        .collect();
    let dim = samples[0].len();
    let fmax = samples
        .iter()
        .flat_map(|v| v.iter().map(|z| z.norm()))
        .fold(0.0, f64::max)
        .max(floor);
    if !fmax.is_finite() {
        return Err(Error::NotConverged("non-finite function values on contour".into()));
    }

    let rule = |stride: usize| -> Vec<Vec<C64>> {
        let m = fine / stride;
        (0..=n)
            .map(|l| {
                let scale = 1.0 / (m as f64 * radius.powi(l as i32));
                (0..dim)
                    .map(|i| {
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..m {
                            let theta = 2.0 * PI * (k * l) as f64 / m as f64;
                            acc += samples[k * stride][i] * C64::from_polar(1.0, -theta);
                        }
                        acc * scale
                    })
                    .collect()
            })
            .collect()
    };
    let coarse = rule(2);
    let refined = rule(1);
    for l in 0..=n {
        let bound = CERTIFY_TOL * fmax / radius.powi(l as i32);
        for i in 0..dim {
            if (coarse[l][i] - refined[l][i]).norm() > bound {
                return Err(Error::NotConverged(format!(
                    "Taylor coefficient {l} changed by {:.3e} under node doubling (bound {bound:.3e})",
                    (coarse[l][i] - refined[l][i]).norm()
                )));
            }
        }
    }
    Ok(refined)
}

/// Taylor coefficients `γ_0..=γ_n` of `det M` about `lambda0`.
pub fn taylor_coefficients(params: &ModelParams, lambda0: C64, n: usize, radius: f64, nodes: usize) -> Result<Vec<C64>> {
    if lambda0.norm() == 0.0 {
        return Err(Error::InvalidInput("expansion point must be nonzero".into()));
    }
    let coeffs = cauchy_taylor(
        |z| vec![det_transmission(params, z)],
        lambda0,
        n,
        Contour { radius, nodes },
        det_term_scale(params, lambda0),
    )?;
    Ok(coeffs.into_iter().map(|v| v[0]).collect())
}

/// `|γ_ℓ| / S_ℓ` with `S_ℓ = max_k |γ_k| ρ^(k-ℓ)`.
pub fn scaled_magnitudes(gammas: &[C64], radius: f64) -> Vec<f64> {
    let weighted_max = gammas
        .iter()
        .enumerate()
        .map(|(k, g)| g.norm() * radius.powi(k as i32))
        .fold(0.0, f64::max);
    gammas
        .iter()
        .enumerate()
        .map(|(l, g)| {
            let s = weighted_max / radius.powi(l as i32);
            if s > 0.0 {
                g.norm() / s
            } else {
                0.0
            }
        })
        .collect()
}

/// Order of the zero of `det M` at `lambda0`.
pub fn ascent_of(params: &ModelParams, lambda0: C64) -> Result<usize> {
    let contour = Contour::default_for(lambda0);
    let gammas = taylor_coefficients(params, lambda0, ASCENT_PROBE_ORDER, contour.radius, contour.nodes)?;
    order_of_zero(&gammas, contour.radius, lambda0)
}

pub(crate) fn order_of_zero(gammas: &[C64], radius: f64, lambda0: C64) -> Result<usize> {
    let scaled = scaled_magnitudes(gammas, radius);
    if scaled[0] > ASCENT_TOL {
        return Err(Error::NoZero(format!("{lambda0} (scaled |γ0| = {:.3e})", scaled[0])));
    }
    scaled
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, s)| **s > ASCENT_TOL)
        .map(|(l, _)| l)
        .ok_or_else(|| Error::NotConverged(format!("order of zero exceeds probe order {}", gammas.len() - 1)))
}

const POLISH_MAX_STEPS: usize = 50;
const POLISH_TOL: f64 = 1e-12;

/// Refines an approximate root of `det M` by Newton's method.
///
/// The step is the multiplicity-robust form `-γ0 γ1 / (γ1² - 2 γ0 γ2)`
/// (Newton applied to `det / det'`), which is plain Newton near simple roots.
pub fn polish_eigenvalue(params: &ModelParams, lambda_guess: C64) -> Result<C64> {
    if lambda_guess.norm() == 0.0 {
        return Err(Error::InvalidInput("initial guess must be nonzero".into()));
    }
    let mut z = lambda_guess;
    for _ in 0..POLISH_MAX_STEPS {
        if !(z.norm() <= 1e6) {
            return Err(Error::Diverged(format!("iterate {z} left the plausibility region")));
        }
        let contour = Contour::default_for(z);
        let g = taylor_coefficients(params, z, 2, contour.radius, contour.nodes)?;
        if g[0].norm() <= POLISH_TOL * det_term_scale(params, z) {
            return centre_cluster(params, z);
        }
        let denom = g[1] * g[1] - g[0] * g[2] * 2.0;
        if denom.norm() == 0.0 {
            return Err(Error::Diverged("vanishing Newton denominator".into()));
        }
        let step = -g[0] * g[1] / denom;
        z += step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm() {
            return centre_cluster(params, z);
        }
    }
    Err(Error::Diverged(format!("no convergence within {POLISH_MAX_STEPS} Newton steps (last iterate {z})")))
}

const CLUSTER_TOL: f64 = 1e-2;
const CENTRE_STEPS: usize = 8;

/// Moves `z` to the centroid `-γ_{k-1} / (k γ_k)` of the `k` nearby roots.
///
/// `|det| ≤ tol` only locates a `k`-fold root to `tol^(1/k)`; the centroid is
/// well conditioned and lands on the multiple root itself.
fn centre_cluster(params: &ModelParams, mut z: C64) -> Result<C64> {
    for _ in 0..CENTRE_STEPS {
        let contour = Contour::default_for(z);
        let g = taylor_coefficients(params, z, ASCENT_PROBE_ORDER, contour.radius, contour.nodes)?;
        let scaled = scaled_magnitudes(&g, contour.radius);
        let Some(k) = (1..scaled.len()).find(|&l| scaled[l] > CLUSTER_TOL) else {
            return Ok(z);
        };
        if k < 2 {
            return Ok(z);
        }
        let step = -g[k - 1] / (g[k] * k as f64);
        if step.norm() > contour.radius {
            return Ok(z);
        }
        z += step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm() {
            break;
        }
    }
    Ok(z)
}

/// Which branch formula to evaluate for a jet entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Left,
    Right,
}

/// Generalized eigenfunctions `w_ℓ = ∂_λ^(ℓ-1) u(λ, ·)` at an eigenvalue.
///
/// `u(λ, ·)` is the ansatz with coefficients from a smooth null-vector
/// parametrization of `M(λ)`; the family is left unnormalized.
#[derive(Debug, Clone)]
pub struct Jet {
    params: ModelParams,
    lambda0: C64,
    order: usize,
    /// Per contour node: wave numbers and ansatz amplitudes.
    nodes: Vec<JetNode>,
    /// `weights[d][k]`: d-th derivative weight of node k.
    weights: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy)]
struct JetNode {
    mu_l: C64,
    mu_r: C64,
    amp_l: C64,
    amp_r: C64,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> C64 {
        self.lambda0
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Value and x-derivative of `w_l` (1-based) at `x`, using the piece containing `x`.
    pub fn eval(&self, l: usize, x: f64) -> (C64, C64) {
        let piece = if x <= self.params.b { Piece::Left } else { Piece::Right };
        self.eval_piece(l, x, piece)
    }

    /// Value and x-derivative of the analytic continuation of one piece of `w_l`.
    pub fn eval_piece(&self, l: usize, x: f64, piece: Piece) -> (C64, C64) {
        assert!(l >= 1 && l <= self.order, "jet index {l} out of range 1..={}", self.order);
        let w = &self.weights[l - 1];
        let mut val = C64::new(0.0, 0.0);
        let mut der = C64::new(0.0, 0.0);
        for (node, wk) in self.nodes.iter().zip(w) {
            let (u, du) = node.ansatz(&self.params, x, piece);
            val += wk * u;
            der += wk * du;
        }
        (val, der)
    }
}

impl JetNode {
    fn ansatz(&self, params: &ModelParams, x: f64, piece: Piece) -> (C64, C64) {
        match piece {
            Piece::Left => {
                let arg = self.mu_l * x;
                (self.amp_l * arg.sin(), self.amp_l * self.mu_l * arg.cos())
            }
            Piece::Right => {
                let (v, dv) = right_solution(params.a_r, params.c, self.mu_r, x);
                (self.amp_r * v, self.amp_r * dv)
            }
        }
    }
}

/// Builds the jet `w_1..=w_order` at an eigenvalue `lambda0` of ascent ≥ `order`.
pub fn eigenfunction_jet(params: &ModelParams, lambda0: C64, order: usize) -> Result<Jet> {
    params.validate()?;
    if order == 0 {
        return Err(Error::InvalidInput("jet order must be at least 1".into()));
    }
    let ascent = ascent_of(params, lambda0)?;
    if order > ascent {
        return Err(Error::InvalidInput(format!("jet order {order} exceeds ascent {ascent}")));
    }

    // Null vectors of M: (M12, -M11) from the first row, (M22, -M21) from the second.
    let m0 = transmission_matrix(params, lambda0);
    let mmax = m0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let first = (m0[0][1].norm().powi(2) + m0[0][0].norm().powi(2)).sqrt();
    let second = (m0[1][1].norm().powi(2) + m0[1][0].norm().powi(2)).sqrt();
    let tol = 1e-8 * mmax;
    let use_first = if first > tol {
        true
    } else if second > tol {
        false
    } else {
        return Err(Error::DegenerateParametrization(format!("{lambda0}")));
    };

    let contour = Contour::default_for(lambda0);
    let build = |nodes: usize| -> Vec<JetNode> {
        (0..nodes)
            .map(|k| {
                let z = lambda0 + C64::from_polar(contour.radius, 2.0 * PI * k as f64 / nodes as f64);
                let (mu_l, mu_r) = wave_numbers(params, z);
                let m = transmission_matrix_with_roots(params, mu_l, mu_r);
                let (amp_l, amp_r) = if use_first { (m[0][1], -m[0][0]) } else { (m[1][1], -m[1][0]) };
                JetNode { mu_l, mu_r, amp_l, amp_r }
            })
            .collect()
    };
    let weights = |nodes: usize| -> Vec<Vec<C64>> {
        let mut fact = 1.0;
        (0..order)
            .map(|d| {
                if d > 0 {
                    fact *= d as f64;
                }
                let scale = fact / (nodes as f64 * contour.radius.powi(d as i32));
                (0..nodes)
                    .map(|k| C64::from_polar(scale, -2.0 * PI * (k * d) as f64 / nodes as f64))
                    .collect()
            })
            .collect()
    };

    let coarse = Jet {
        params: *params,
        lambda0,
        order,
        nodes: build(contour.nodes),
        weights: weights(contour.nodes),
    };
    let fine = Jet {
        params: *params,
        lambda0,
        order,
        nodes: build(2 * contour.nodes),
        weights: weights(2 * contour.nodes),
    };

    // Certify at probe points on both pieces.
    let probes = [
        (0.5 * params.b, Piece::Left),
        (params.b, Piece::Left),
        (params.b, Piece::Right),
        (0.5 * (1.0 + params.b), Piece::Right),
        (1.0, Piece::Right),
    ];
    let umax = fine
        .nodes
        .iter()
        .flat_map(|n| probes.iter().map(move |&(x, p)| n.ansatz(params, x, p)))
        .map(|(u, du)| u.norm().max(du.norm()))
        .fold(0.0, f64::max);
    let mut fact = 1.0;
    for l in 1..=order {
        if l > 1 {
            fact *= (l - 1) as f64;
        }
        let bound = CERTIFY_TOL * fact * umax / contour.radius.powi(l as i32 - 1);
        for &(x, p) in &probes {
            let (a, da) = coarse.eval_piece(l, x, p);
            let (b, db) = fine.eval_piece(l, x, p);
            if (a - b).norm() > bound || (da - db).norm() > bound {
                return Err(Error::NotConverged(format!("jet entry {l} not certified at x = {x}")));
            }
        }
    }
    Ok(fine)
}
