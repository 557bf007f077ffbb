//! Manufacturing parameter sets `(a_R, c, λ)` for which `det M` has a zero
//! of prescribed order at `λ`.
//!
//! The unknowns solve `γ_0 = … = γ_{ν-1} = 0`, where `γ_ℓ` are the Taylor
//! coefficients of `det M` about `λ` itself. Residual components are weighted
//! by `ρ^ℓ` (fixed contour radius of the solve) and compared against the
//! term scale of the determinant, which keeps every component at the same
//! rounding level.

use serde::{Deserialize, Serialize};

use crate::analytic1d::{
    det_term_scale, order_of_zero, scaled_magnitudes, taylor_coefficients, Contour, EigenConfig, ModelParams,
    ASCENT_PROBE_ORDER,
};
use crate::cplx::{Cplx, C64};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 50;
const SUCCESS_TOL: f64 = 1e-10;
const MAX_JACOBIAN_COND: f64 = 1e14;
const ARMIJO_C: f64 = 1e-4;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Outcome of a parameter solve or verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgeReport {
    pub solution: EigenConfig,
    pub iterations: usize,
    /// Weighted residual norm, relative to the determinant's term scale.
    pub residual_norm: f64,
    /// Measured order of the zero; 0 when no zero was detected.
    pub certified_ascent: usize,
    /// Residual norm after each Newton iterate (first entry: initial guess).
    pub history: Vec<f64>,
    /// Why verification failed, if it did.
    pub failure: Option<String>,
}

impl ForgeReport {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// `(γ_0, …, γ_{ν-1})` about `lambda`, with the default contour.
pub fn defect_residual(b: f64, a_r: C64, c: C64, lambda: C64, nu: usize) -> Result<Vec<C64>> {
    let params = ModelParams::new(b, a_r, c)?;
    if nu == 0 {
        return Err(Error::InvalidInput("defect order must be at least 1".into()));
    }
    let contour = Contour::default_for(lambda);
    let mut g = taylor_coefficients(&params, lambda, nu.max(2), contour.radius, contour.nodes)?;
    g.truncate(nu);
    Ok(g)
}

/// Which of `(a_R, c, λ)` are unknowns for a given defect order.
fn free_mask(nu: usize) -> [bool; 3] {
    match nu {
        1 => [false, false, true],
        2 => [true, false, true],
        _ => [true, true, true],
    }
}

struct System {
    b: f64,
    nu: usize,
    radius: f64,
    nodes: usize,
    mask: [bool; 3],
}

impl System {
    /// Weighted residual `γ_ℓ ρ^ℓ / scale` and the scale itself.
    fn eval(&self, z: [C64; 3]) -> Result<(Vec<C64>, f64)> {
        let params = ModelParams::new(self.b, z[0], z[1])?;
        let g = taylor_coefficients(&params, z[2], self.nu.max(2), self.radius, self.nodes)?;
        let scale = det_term_scale(&params, z[2]);
        let f = (0..self.nu).map(|l| g[l] * self.radius.powi(l as i32) / scale).collect();
        Ok((f, scale))
    }

    fn free(&self) -> Vec<usize> {
        (0..3).filter(|&k| self.mask[k]).collect()
    }

    /// Central differences in each free complex variable.
    fn jacobian(&self, z: [C64; 3]) -> Result<DenseMatrix> {
        let free = self.free();
        let mut jac = DenseMatrix::zeros(self.nu);
        for (col, &k) in free.iter().enumerate() {
            let h = 1e-6 * (1.0 + z[k].norm());
            let (mut zp, mut zm) = (z, z);
            zp[k] += h;
            zm[k] -= h;
            let (fp, sp) = self.eval(zp)?;
            let (fm, sm) = self.eval(zm)?;
            for row in 0..self.nu {
                // Undo the per-point scale so the difference is of one smooth function.
                jac[(row, col)] = (fp[row] * sp - fm[row] * sm) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Damped Newton solve for a zero of order `nu` from an initial triple.
pub fn solve_defect_system(b: f64, nu: usize, init: (C64, C64, C64)) -> Result<ForgeReport> {
    if !(1..=3).contains(&nu) {
        return Err(Error::InvalidInput(format!("defect order {nu} unsupported (expected 1, 2 or 3)")));
    }
    ModelParams::new(b, init.0, init.1)?;
    if init.2.norm() == 0.0 {
        return Err(Error::InvalidInput("initial eigenvalue must be nonzero".into()));
    }
    let contour = Contour::default_for(init.2);
    let sys = System { b, nu, radius: contour.radius, nodes: contour.nodes, mask: free_mask(nu) };
    let free = sys.free();

    let mut z = [init.0, init.1, init.2];
    let (mut f, mut scale) = sys.eval(z)?;
    let mut res = norm2(&f);
    let mut history = vec![res];
    let mut iterations = 0;
    // Past the tolerance, keep polishing while Newton still gains a factor of two:
    // the ascent test needs the residual at rounding level, not merely below 1e-10.
    while res > SUCCESS_TOL || (history.len() >= 2 && res < 0.5 * history[history.len() - 2]) {
        if iterations == MAX_ITERATIONS {
            if res <= SUCCESS_TOL {
                break;
            }
            return Err(Error::Diverged(format!("no convergence in {MAX_ITERATIONS} iterations (residual {res:.3e})")));
        }
        iterations += 1;
        let mut jac = sys.jacobian(z)?;
        for (col, &k) in free.iter().enumerate() {
            let w = 1.0 + z[k].norm();
            for row in 0..nu {
                jac[(row, col)] *= w;
            }
        }
        let cond = jac.cond1();
        if !(cond <= MAX_JACOBIAN_COND) {
            return Err(Error::RankDeficient(cond));
        }
        let rhs: Vec<C64> = f.iter().map(|v| -v * scale).collect();
        let step = jac.lu().ok_or(Error::RankDeficient(f64::INFINITY))?.solve(&rhs);

        let mut t = 1.0;
        loop {
            let mut trial = z;
            for (col, &k) in free.iter().enumerate() {
                trial[k] += step[col] * (t * (1.0 + z[k].norm()));
            }
            if !(trial[0].re > 0.0) {
                if t > MIN_DAMPING {
                    t *= 0.5;
                    continue;
                }
                return Err(Error::LeftAdmissibleRegion(format!("Re(a_R) = {} after damping", trial[0].re)));
            }
            let evaluated = sys.eval(trial);
            let accept = match &evaluated {
                Ok((ft, _)) => norm2(ft) <= (1.0 - ARMIJO_C * t) * res,
                Err(_) => false,
            };
            if !accept && res <= SUCCESS_TOL {
                break;
            }
            if accept || t <= MIN_DAMPING {
                let (ft, st) = evaluated?;
                z = trial;
                f = ft;
                scale = st;
                res = norm2(&f);
                break;
            }
            t *= 0.5;
        }
        history.push(res);
    }

    let params = ModelParams::new(b, z[0], z[1])?;
    let mut report = verify_configuration(&EigenConfig { params, lambda: z[2], ascent: nu, residuals: Vec::new() });
    if report.certified_ascent < nu {
        return Err(Error::NotConverged(format!(
            "solution certifies ascent {} < {nu}",
            report.certified_ascent
        )));
    }
    report.iterations = iterations;
    report.residual_norm = res;
    report.history = history;
    Ok(report)
}

/// Recomputes the Taylor coefficients of a stored configuration and measures its ascent.
pub fn verify_configuration(config: &EigenConfig) -> ForgeReport {
    let mut solution = config.clone();
    let fail = |solution: EigenConfig, msg: String| ForgeReport {
        solution,
        iterations: 0,
        residual_norm: f64::INFINITY,
        certified_ascent: 0,
        history: Vec::new(),
        failure: Some(msg),
    };
    if let Err(e) = config.params.validate() {
        return fail(solution, e.to_string());
    }
    if config.lambda.norm() == 0.0 {
        return fail(solution, "eigenvalue must be nonzero".into());
    }
    let contour = Contour::default_for(config.lambda);
    let probe = ASCENT_PROBE_ORDER.max(config.ascent + 1);
    let gammas = match taylor_coefficients(&config.params, config.lambda, probe, contour.radius, contour.nodes) {
        Ok(g) => g,
        Err(e) => return fail(solution, e.to_string()),
    };
    let scaled = scaled_magnitudes(&gammas, contour.radius);
    solution.residuals = scaled[..=config.ascent].to_vec();
    let residual_norm = scaled[..config.ascent].iter().copied().fold(0.0, f64::max);
    let (certified_ascent, failure) = match order_of_zero(&gammas, contour.radius, config.lambda) {
        Ok(k) if k == config.ascent => (k, None),
        Ok(k) => (k, Some(format!("measured ascent {k}, claimed {}", config.ascent))),
        Err(e) => (0, Some(e.to_string())),
    };
    ForgeReport { solution, iterations: 0, residual_norm, certified_ascent, history: Vec::new(), failure }
}

/// Parameter-set wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub b: f64,
    #[serde(rename = "a_R")]
    pub a_r: Cplx,
    pub c: Cplx,
    pub lambda: Cplx,
    pub ascent: usize,
    #[serde(default)]
    pub residuals: Vec<f64>,
}

impl From<&EigenConfig> for ConfigJson {
    fn from(cfg: &EigenConfig) -> Self {
        ConfigJson {
            b: cfg.params.b,
            a_r: cfg.params.a_r.into(),
            c: cfg.params.c.into(),
            lambda: cfg.lambda.into(),
            ascent: cfg.ascent,
            residuals: cfg.residuals.clone(),
        }
    }
}

impl TryFrom<ConfigJson> for EigenConfig {
    type Error = Error;
    fn try_from(j: ConfigJson) -> Result<Self> {
        let params = ModelParams::new(j.b, j.a_r.into(), j.c.into())?;
        let mut cfg = EigenConfig::new(params, j.lambda.into(), j.ascent)?;
        cfg.residuals = j.residuals;
        Ok(cfg)
    }
}

pub fn config_to_json(cfg: &EigenConfig) -> String {
    serde_json::to_string_pretty(&ConfigJson::from(cfg)).expect("plain data serializes")
}

pub fn config_from_json(text: &str) -> Result<EigenConfig> {
    let j: ConfigJson = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("parameter JSON: {e}")))?;
    j.try_into()
}
