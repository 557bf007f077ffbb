//! WebAssembly bindings for the single-page demo in `www/`.

use defbench::analytic1d::{
    ascent_of, det_term_scale, det_transmission, eigenfunction_jet, polish_eigenvalue, scaled_magnitudes,
    taylor_coefficients, Contour, ModelParams,
};
use defbench::bench::{run_convergence, BenchmarkCase};
use defbench::cases::CaseId;
use defbench::C64;
use wasm_bindgen::prelude::*;

fn params(b: f64, ar_re: f64, ar_im: f64, c_re: f64, c_im: f64) -> Result<ModelParams, JsError> {
    ModelParams::new(b, C64::new(ar_re, ar_im), C64::new(c_re, c_im)).map_err(|e| JsError::new(&e.to_string()))
}

fn one_d_case(case: &str) -> Result<BenchmarkCase, JsError> {
    let id: CaseId = case.parse().map_err(|e: defbench::Error| JsError::new(&e.to_string()))?;
    if id.dim() != 1 {
        return Err(JsError::new("the demo runs one-dimensional cases only"));
    }
    Ok(BenchmarkCase::new(id))
}

/// `log10(|det M| / scale)` on an `nx × ny` grid over the rectangle, row-major from the top-left.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn det_landscape(
    b: f64,
    ar_re: f64,
    ar_im: f64,
    c_re: f64,
    c_im: f64,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, JsError> {
    let p = params(b, ar_re, ar_im, c_re, c_im)?;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let im = im_max - (im_max - im_min) * j as f64 / (ny.max(2) - 1) as f64;
        for i in 0..nx {
            let re = re_min + (re_max - re_min) * i as f64 / (nx.max(2) - 1) as f64;
            let z = C64::new(re, im);
            let s = det_term_scale(&p, z).max(f64::MIN_POSITIVE);
            out.push((det_transmission(&p, z).norm() / s).max(1e-300).log10());
        }
    }
    Ok(out)
}

/// Polishes a root near the guess and reports it as JSON with its ascent and scaled Taylor coefficients.
#[wasm_bindgen]
pub fn ascent_at(b: f64, ar_re: f64, ar_im: f64, c_re: f64, c_im: f64, re: f64, im: f64) -> Result<String, JsError> {
    let p = params(b, ar_re, ar_im, c_re, c_im)?;
    let err = |e: defbench::Error| JsError::new(&e.to_string());
    let z = polish_eigenvalue(&p, C64::new(re, im)).map_err(err)?;
    let ascent = ascent_of(&p, z).map_err(err)?;
    let c = Contour::default_for(z);
    let g = taylor_coefficients(&p, z, ascent + 1, c.radius, c.nodes).map_err(err)?;
    Ok(serde_json::json!({
        "re": z.re,
        "im": z.im,
        "ascent": ascent,
        "scaled": scaled_magnitudes(&g, c.radius),
    })
    .to_string())
}

/// Convergence table of a 1D case as CSV: `level,N,idx1..idxm,mean` errors, then a `rate` row.
#[wasm_bindgen]
pub fn convergence_table(case: &str, p: usize, levels: usize) -> Result<String, JsError> {
    let case = one_d_case(case)?;
    let t = run_convergence(&case, p, levels).map_err(|e| JsError::new(&e.to_string()))?;
    let m = case.m_alg;
    let mut s = String::from("level,N");
    for j in 1..=m {
        s += &format!(",idx{j}");
    }
    s += ",mean\n";
    for r in t.rows.iter().filter(|r| r.ok()) {
        s += &format!("{},{}", r.level, r.n_dofs);
        for e in &r.errors {
            s += &format!(",{e:.3e}");
        }
        s += &format!(",{:.3e}\n", r.mean_error.unwrap_or(f64::NAN));
    }
    s += "rate,";
    for j in 1..=m {
        s += &format!(",{:.3}", t.rate(&format!("idx{j}")).unwrap_or(f64::NAN));
    }
    s += &format!(",{:.3}\n", t.rate("mean").unwrap_or(f64::NAN));
    Ok(s)
}

/// Real and imaginary parts of `w_1..w_α` at `n` points of `[0, 1]`, each normalized by its maximum modulus.
///
/// Layout: for each `l`, `n` real parts followed by `n` imaginary parts.
#[wasm_bindgen]
pub fn jet_samples(case: &str, n: usize) -> Result<Vec<f64>, JsError> {
    let case = one_d_case(case)?;
    let cfg = &case.config;
    let jet = eigenfunction_jet(&cfg.params, cfg.lambda, cfg.ascent).map_err(|e| JsError::new(&e.to_string()))?;
    let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n.max(2) - 1) as f64).collect();
    let mut out = Vec::with_capacity(2 * n * jet.order());
    for l in 1..=jet.order() {
        let w: Vec<C64> = xs.iter().map(|&x| jet.eval(l, x).0).collect();
        let big = w.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        out.extend(w.iter().map(|z| z.re / big));
        out.extend(w.iter().map(|z| z.im / big));
    }
    Ok(out)
}
