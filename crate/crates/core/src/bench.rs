//! Experiment drivers: convergence tables, rate fits, sensitivity in the Robin
//! coefficient, the residual estimator, Dörfler marking and the adaptive loop.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::Path;

use crate::analytic1d::{eigenfunction_jet, EigenConfig, ModelParams};
use crate::cases::CaseId;
use crate::cplx::{format_f64, C64};
use crate::eigensolve::{eigs_near, mean_of_cluster, pair_residual, select_cluster, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_interval, assemble_tensor, assemble_triangles_in, h1_error, Coefficient2D, DiscreteFunction1d, Evaluator,
    Pencil, TriGeom, TriSpace,
};
use crate::meshing::{
    initial_square_triangulation, nvb_refine, nvb_refine_uniform, uniform_interval_mesh, BoundaryTag, IntervalMesh,
    TriMesh,
};
use crate::quadrature::{gauss_legendre_unit, triangle_degree4};

/// Default rate-fit window.
pub const K_LAST: usize = 4;

/// Errors below this multiple of `|target|` are excluded from rate fits.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Distance of the shift from the target, relative to `|target|`.
pub const SHIFT_OFFSET: f64 = 0.15;

/// Mesh exponents of the P3 reference computation.
pub const REFERENCE_LEVELS: [u32; 3] = [7, 8, 9];

/// Extra eigenpairs requested beyond the cluster size.
const EXTRA_PAIRS: usize = 4;

const CSV_HEADER: &str = "case,p,level,N,h,idx,lambda_re,lambda_im,abs_err,mean_abs_err,eta_total";

/// A benchmark problem: 1D base configuration, dimension and cluster target.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub id: CaseId,
    pub config: EigenConfig,
    pub dim: usize,
    pub target: C64,
    pub m_alg: usize,
}

impl BenchmarkCase {
    /// Built-in case with the published parameters.
    pub fn new(id: CaseId) -> Self {
        Self::with_config(id, id.base_config())
    }

    /// Case geometry of `id` with a user-supplied 1D configuration.
    pub fn with_config(id: CaseId, config: EigenConfig) -> Self {
        let dim = id.dim();
        BenchmarkCase {
            id,
            target: config.lambda * dim as f64,
            m_alg: config.ascent.pow(dim as u32),
            dim,
            config,
        }
    }

    /// Whether meshes resolve the coefficient jump.
    pub fn aligned(&self) -> bool {
        self.id.is_regular()
    }

    fn coeff(&self) -> Coefficient2D {
        Coefficient2D::from_params(&self.config.params)
    }
}

/// One refinement level of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub n_dofs: usize,
    pub h: f64,
    /// Cluster values sorted by distance to the reference.
    pub values: Vec<C64>,
    pub errors: Vec<f64>,
    pub mean: Option<C64>,
    pub mean_error: Option<f64>,
    pub eta_total: Option<f64>,
    pub failure: Option<String>,
}

impl ConvergenceRow {
    fn failed(level: usize, n_dofs: usize, h: f64, e: &Error) -> Self {
        ConvergenceRow {
            level,
            n_dofs,
            h,
            values: Vec::new(),
            errors: Vec::new(),
            mean: None,
            mean_error: None,
            eta_total: None,
            failure: Some(e.to_string()),
        }
    }

    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Fitted slope of one error column against `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub column: String,
    pub slope: f64,
    pub k_last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: CaseId,
    pub p: usize,
    pub target: C64,
    pub rows: Vec<ConvergenceRow>,
    pub rates: Vec<Rate>,
}

impl ConvergenceTable {
    fn new(case: CaseId, p: usize, target: C64) -> Self {
        ConvergenceTable { case, p, target, rows: Vec::new(), rates: Vec::new() }
    }

    /// `(N, err)` of column `idx` (0-based) over the successful rows.
    pub fn column(&self, idx: usize) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.ok() && idx < r.errors.len()).map(|r| (r.n_dofs as f64, r.errors[idx])).collect()
    }

    pub fn mean_column(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| Some((r.n_dofs as f64, r.mean_error?))).collect()
    }

    pub fn eta_column(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| Some((r.n_dofs as f64, r.eta_total?))).collect()
    }

    /// Fits every column over the last `k_last` levels, skipping columns with too few points.
    pub fn fit(&mut self, k_last: usize) {
        let floor = NOISE_FLOOR * self.target.norm();
        let m = self.rows.iter().map(|r| r.errors.len()).max().unwrap_or(0);
        let mut rates = Vec::new();
        for j in 0..m {
            if let Ok(slope) = fit_rate(&self.column(j), k_last, floor) {
                rates.push(Rate { column: format!("idx{}", j + 1), slope, k_last });
            }
        }
        if let Ok(slope) = fit_rate(&self.mean_column(), k_last, floor) {
            rates.push(Rate { column: "mean".into(), slope, k_last });
        }
        if let Ok(slope) = fit_rate(&self.eta_column(), k_last, 0.0) {
            rates.push(Rate { column: "eta".into(), slope, k_last });
        }
        self.rates = rates;
    }

    pub fn rate(&self, column: &str) -> Option<f64> {
        self.rates.iter().find(|r| r.column == column).map(|r| r.slope)
    }

    /// Slope of the column with the largest errors.
    pub fn worst_rate(&self) -> Option<f64> {
        let m = self.rows.iter().map(|r| r.errors.len()).max()?;
        self.rate(&format!("idx{m}"))
    }

    /// Slopes of all per-eigenvalue columns.
    pub fn index_rates(&self) -> Vec<f64> {
        self.rates.iter().filter(|r| r.column.starts_with("idx")).map(|r| r.slope).collect()
    }
}

/// Least-squares slope of `log err` against `log N` over the last `k_last` points.
///
/// Points with `err < floor` are dropped after the window is taken.
pub fn fit_rate(points: &[(f64, f64)], k_last: usize, floor: f64) -> Result<f64> {
    if points.len() < 2 || k_last < 2 {
        return Err(Error::InvalidInput("a rate fit needs at least two points".into()));
    }
    let window = &points[points.len() - k_last.min(points.len())..];
    let used: Vec<(f64, f64)> =
        window.iter().filter(|&&(n, e)| n > 0.0 && e > 0.0 && e >= floor).map(|&(n, e)| (n.ln(), e.ln())).collect();
    if used.len() < 2 {
        return Err(Error::InvalidInput("all points below the noise floor".into()));
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs distinct N".into()));
    }
    Ok(sxy / sxx)
}

/// A certified cluster of eigenpairs nearest a target.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub values: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
}

impl Cluster {
    pub fn mean(&self) -> Result<C64> {
        mean_of_cluster(&self.values)
    }
}

/// Shift used for a cluster around `target`.
pub fn shift_for(target: C64) -> C64 {
    target + C64::from_polar(SHIFT_OFFSET * target.norm().max(1.0), FRAC_PI_4)
}

/// The `m` eigenpairs nearest `target`, sorted by distance to it.
///
/// The shift is placed off the cluster: shift-invert with the pole inside a
/// near-defective cluster loses the cluster mean to rounding.
pub fn solve_cluster(pencil: &Pencil, target: C64, m: usize) -> Result<Cluster> {
    let n = pencil.n();
    if m > n {
        return Err(Error::InvalidInput(format!("cluster of {m} in a {n}-dimensional space")));
    }
    let k = (m + EXTRA_PAIRS).min(n);
    let sigma = shift_for(target);
    let spec = match eigs_near(pencil, sigma, k, DEFAULT_TOL) {
        Err(Error::SingularShift) => eigs_near(pencil, sigma + 1e-8 * (1.0 + sigma.norm()), k, DEFAULT_TOL)?,
        r => r?,
    };
    let idx = select_cluster(&spec.values, target, m);
    Ok(Cluster {
        values: idx.iter().map(|&i| spec.values[i]).collect(),
        vectors: idx.iter().map(|&i| spec.vectors[i].clone()).collect(),
        residuals: idx.iter().map(|&i| spec.residuals[i]).collect(),
    })
}

/// Mesh of one refinement level.
#[derive(Debug, Clone)]
pub enum LevelMesh {
    Interval(IntervalMesh),
    Tensor(IntervalMesh),
    Triangles(TriMesh),
}

/// Elements per axis of 1D and tensor levels.
///
/// Unaligned meshes refine by four so the jump keeps its relative position in
/// its element (`4 ≡ 1 mod 3`); bisection alternates between two positions.
pub fn interval_elements(case: &BenchmarkCase, level: usize) -> usize {
    let factor: usize = if case.aligned() { 2 } else { 4 };
    4 * factor.pow(level as u32)
}

/// Mesh of `level`: intervals and tensor axes scale as above, triangles take
/// two newest-vertex bisection rounds per level from a 4×4 square grid.
pub fn level_mesh(case: &BenchmarkCase, level: usize) -> Result<LevelMesh> {
    let force = case.aligned().then_some(case.config.params.b);
    match case.id {
        CaseId::Regular1d | CaseId::Reduced1d => {
            Ok(LevelMesh::Interval(uniform_interval_mesh(interval_elements(case, level), force)?))
        }
        CaseId::Regular2dTensor | CaseId::Regular3dTensor => {
            Ok(LevelMesh::Tensor(uniform_interval_mesh(interval_elements(case, level), force)?))
        }
        CaseId::Regular2dTri | CaseId::Reduced2dTri => {
            let mut mesh = initial_square_triangulation(4)?;
            for _ in 0..2 * level {
                mesh = nvb_refine_uniform(&mesh);
            }
            Ok(LevelMesh::Triangles(mesh))
        }
    }
}

fn tri_h(mesh: &TriMesh) -> f64 {
    (0..mesh.num_triangles()).map(|t| mesh.diameter(t)).fold(0.0, f64::max)
}

/// Assembles the pencil of a level mesh; returns it with the mesh size.
pub fn level_pencil(case: &BenchmarkCase, mesh: &LevelMesh, p: usize) -> Result<(Pencil, f64)> {
    match mesh {
        LevelMesh::Interval(m) => Ok((assemble_interval(m, &case.config.params, p)?, m.max_h())),
        LevelMesh::Tensor(m) => {
            let one = assemble_interval(m, &case.config.params, p)?;
            Ok((assemble_tensor(&one, case.dim)?, m.max_h()))
        }
        LevelMesh::Triangles(m) => {
            let space = TriSpace::new(m, p)?;
            Ok((assemble_triangles_in(m, &case.coeff(), &space)?, tri_h(m)))
        }
    }
}

fn cluster_row(level: usize, n_dofs: usize, h: f64, values: Vec<C64>, reference: C64) -> Result<ConvergenceRow> {
    let mean = mean_of_cluster(&values)?;
    Ok(ConvergenceRow {
        level,
        n_dofs,
        h,
        errors: values.iter().map(|v| (v - reference).norm()).collect(),
        values,
        mean: Some(mean),
        mean_error: Some((mean - reference).norm()),
        eta_total: None,
        failure: None,
    })
}

/// Uniform-refinement convergence table of the cluster around the case target.
pub fn run_convergence(case: &BenchmarkCase, p: usize, levels: usize) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 levels, got {levels}")));
    }
    let mut table = ConvergenceTable::new(case.id, p, case.target);
    for level in 0..levels {
        let mesh = level_mesh(case, level)?;
        let (pencil, h) = level_pencil(case, &mesh, p)?;
        let n = pencil.n();
        let row = solve_cluster(&pencil, case.target, case.m_alg)
            .and_then(|cl| cluster_row(level, n, h, cl.values, case.target))
            .unwrap_or_else(|e| ConvergenceRow::failed(level, n, h, &e));
        table.rows.push(row);
    }
    table.fit(K_LAST.min(levels - 1));
    Ok(table)
}

/// Largest relative mismatch between the tensor cluster and sums of 1D eigenvalues.
pub fn tensor_cross_check(case: &BenchmarkCase, p: usize, level: usize) -> Result<f64> {
    let LevelMesh::Tensor(axis) = level_mesh(case, level)? else {
        return Err(Error::InvalidInput(format!("{} is not a tensor case", case.id)));
    };
    let one = assemble_interval(&axis, &case.config.params, p)?;
    let k1 = (case.config.ascent + 2 * EXTRA_PAIRS).min(one.n());
    let lam = case.config.lambda;
    let spec1 = eigs_near(&one, shift_for(lam), k1, DEFAULT_TOL)?;
    let mut sums = vec![C64::new(0.0, 0.0)];
    for _ in 0..case.dim {
        sums = sums.iter().flat_map(|s| spec1.values.iter().map(move |v| s + v)).collect();
    }
    let near = select_cluster(&sums, case.target, case.m_alg);
    let mut expected: Vec<C64> = near.iter().map(|&i| sums[i]).collect();
    let tensor = solve_cluster(&assemble_tensor(&one, case.dim)?, case.target, case.m_alg)?;
    let mut worst = 0.0f64;
    for v in &tensor.values {
        let (k, d) = expected
            .iter()
            .enumerate()
            .map(|(k, e)| (k, (e - v).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::InvalidInput("empty comparison set".into()))?;
        expected.swap_remove(k);
        worst = worst.max(d / v.norm());
    }
    Ok(worst)
}

/// P3 reference values of the cluster after adding `delta` to `Re c`.
///
/// Meshes of 2⁷, 2⁸ and 2⁹ aligned elements; each eigenvalue is paired
/// across meshes by nearest match and Richardson-extrapolated from the two
/// finest when the observed local order is at least 2. Finer P3 meshes are
/// less accurate: rounding in the near-defective cluster grows like `N²`.
pub fn compute_reference_cluster(config: &EigenConfig, delta: f64) -> Result<Vec<C64>> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be nonnegative, got {delta}")));
    }
    let params = perturbed(&config.params, delta)?;
    let m = config.ascent;
    let mut sets = Vec::new();
    for k in REFERENCE_LEVELS {
        let mesh = uniform_interval_mesh(1 << k, Some(params.b))?;
        let pencil = assemble_interval(&mesh, &params, 3)?;
        sets.push(solve_cluster(&pencil, config.lambda, m)?.values);
    }
    let (c0, c1, c2) = (&sets[0], &sets[1], &sets[2]);
    let mut refs = Vec::with_capacity(m);
    for &fine in c2 {
        let mid = c1[nearest_unambiguous(c1, fine)?];
        let coarse = c0[nearest_unambiguous(c0, mid)?];
        let (d_fine, d_coarse) = ((fine - mid).norm(), (mid - coarse).norm());
        let scale = fine.norm();
        let value = if d_fine <= 1e-13 * scale || d_coarse < 4.0 * d_fine {
            fine
        } else {
            let q = (d_coarse / d_fine).log2().min(6.0);
            let r = 2f64.powf(q);
            (fine * r - mid) / (r - 1.0)
        };
        refs.push(value);
    }
    Ok(refs)
}

fn perturbed(params: &ModelParams, delta: f64) -> Result<ModelParams> {
    ModelParams::new(params.b, params.a_r, params.c + delta)
}

/// Index of the value nearest `z`, requiring the runner-up to be at least twice as far.
fn nearest_unambiguous(values: &[C64], z: C64) -> Result<usize> {
    let mut d: Vec<(usize, f64)> = values.iter().enumerate().map(|(i, v)| (i, (v - z).norm())).collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if let [best, second, ..] = d.as_slice() {
        if second.1 < 2.0 * best.1 {
            return Err(Error::PairingAmbiguity(format!(
                "match distances {:.3e} and {:.3e} near {z}",
                best.1, second.1
            )));
        }
    }
    d.first().map(|x| x.0).ok_or_else(|| Error::PairingAmbiguity("empty set".into()))
}

/// One δ of a sensitivity study.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRun {
    pub delta: f64,
    pub references: Vec<C64>,
    /// Per-eigenvalue errors against `references`, mean against the defective λ.
    pub table: ConvergenceTable,
    /// Largest pairwise distance within the finest successful cluster.
    pub separation: f64,
}

/// Regular 1D cluster with `Re c` shifted by each δ.
pub fn sensitivity_study(case: &BenchmarkCase, deltas: &[f64], p: usize, levels: usize) -> Result<Vec<SensitivityRun>> {
    if case.id != CaseId::Regular1d {
        return Err(Error::InvalidInput(format!("sensitivity studies use regular1d, not {}", case.id)));
    }
    if levels < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 levels, got {levels}")));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::InvalidInput(format!("deltas must be positive, got {d}")));
    }
    let runs: Vec<Result<SensitivityRun>> = std::thread::scope(|s| {
        let handles: Vec<_> = deltas.iter().map(|&d| s.spawn(move || sensitivity_run(case, d, p, levels))).collect();
        handles.into_iter().map(|h| h.join().expect("sensitivity worker panicked")).collect()
    });
    runs.into_iter().collect()
}

fn sensitivity_run(case: &BenchmarkCase, delta: f64, p: usize, levels: usize) -> Result<SensitivityRun> {
    let references = compute_reference_cluster(&case.config, delta)?;
    let params = perturbed(&case.config.params, delta)?;
    let lam = case.config.lambda;
    let mut table = ConvergenceTable::new(case.id, p, lam);
    let mut separation = 0.0;
    for level in 0..levels {
        let mesh = uniform_interval_mesh(interval_elements(case, level), Some(params.b))?;
        let pencil = assemble_interval(&mesh, &params, p)?;
        let (n, h) = (pencil.n(), mesh.max_h());
        let row = solve_cluster(&pencil, lam, case.m_alg).and_then(|cl| {
            let mut free: Vec<C64> = cl.values.clone();
            let mut values = Vec::with_capacity(references.len());
            let mut errors = Vec::with_capacity(references.len());
            for r in &references {
                let (k, d) = free
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k, (v - r).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .ok_or_else(|| Error::InvalidInput("cluster smaller than the reference set".into()))?;
                values.push(free.swap_remove(k));
                errors.push(d);
            }
            let mean = mean_of_cluster(&cl.values)?;
            separation = max_pairwise(&cl.values);
            Ok(ConvergenceRow {
                level,
                n_dofs: n,
                h,
                values,
                errors,
                mean: Some(mean),
                mean_error: Some((mean - lam).norm()),
                eta_total: None,
                failure: None,
            })
        });
        table.rows.push(row.unwrap_or_else(|e| ConvergenceRow::failed(level, n, h, &e)));
    }
    table.fit(K_LAST.min(levels - 1));
    Ok(SensitivityRun { delta, references, table, separation })
}

pub fn max_pairwise(values: &[C64]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Per-triangle squared indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorField {
    pub indicators: Vec<f64>,
    pub total: f64,
    pub primal_total: f64,
    pub adjoint_total: f64,
}

/// Residual estimator of a cluster of P1/P2 eigenpairs on a triangulation.
///
/// `pairs` hold values over the free unknowns of `space`. The adjoint half is
/// evaluated on conjugated pairs and coefficients.
pub fn residual_estimator(
    mesh: &TriMesh,
    space: &TriSpace,
    pairs: &[(C64, Vec<C64>)],
    coeff: &Coefficient2D,
) -> EstimatorField {
    let full: Vec<(C64, Vec<C64>)> = pairs.iter().map(|(l, v)| (*l, space.expand(v))).collect();
    let primal = indicators(mesh, space, &full, coeff);
    let conj_pairs: Vec<(C64, Vec<C64>)> =
        full.iter().map(|(l, v)| (l.conj(), v.iter().map(|z| z.conj()).collect())).collect();
    let conj_coeff = Coefficient2D { b: coeff.b, a_r: coeff.a_r.conj(), c: coeff.c.conj() };
    let adjoint = indicators(mesh, space, &conj_pairs, &conj_coeff);
    let indicators: Vec<f64> = primal.iter().zip(&adjoint).map(|(a, b)| a + b).collect();
    EstimatorField {
        total: indicators.iter().sum(),
        primal_total: primal.iter().sum(),
        adjoint_total: adjoint.iter().sum(),
        indicators,
    }
}

fn barycentric(geo: &TriGeom, x: [f64; 2]) -> [f64; 3] {
    let mut l = [0.0; 3];
    for (i, li) in l.iter_mut().enumerate() {
        let (v, g) = (geo.verts[i], geo.grad_l[i]);
        *li = 1.0 + g[0] * (x[0] - v[0]) + g[1] * (x[1] - v[1]);
    }
    l
}

fn centroid(geo: &TriGeom) -> [f64; 2] {
    geo.point([1.0 / 3.0; 3])
}

/// `a ∇u_h · n` at `x` from inside triangle `t`.
fn flux(geo: &TriGeom, p: usize, a: [C64; 2], u: &[C64], x: [f64; 2], n: [f64; 2]) -> C64 {
    let (_, g) = geo.basis(p, barycentric(geo, x));
    let mut grad = [C64::new(0.0, 0.0); 2];
    for (ui, gi) in u.iter().zip(&g) {
        grad[0] += ui * gi[0];
        grad[1] += ui * gi[1];
    }
    a[0] * grad[0] * n[0] + a[1] * grad[1] * n[1]
}

fn value_at(geo: &TriGeom, p: usize, u: &[C64], x: [f64; 2]) -> C64 {
    let (v, _) = geo.basis(p, barycentric(geo, x));
    u.iter().zip(&v).map(|(ui, vi)| ui * vi).sum()
}

fn indicators(mesh: &TriMesh, space: &TriSpace, pairs: &[(C64, Vec<C64>)], coeff: &Coefficient2D) -> Vec<f64> {
    let p = space.p;
    let nt = mesh.num_triangles();
    let geos: Vec<TriGeom> = (0..nt).map(|t| TriGeom::new(mesh, t)).collect();
    let a_of: Vec<[C64; 2]> = geos.iter().map(|g| coeff.diag(centroid(g))).collect();
    let locals = |t: usize, u: &[C64]| -> Vec<C64> { space.elem_dofs[t].iter().map(|&d| u[d]).collect() };
    let mut eta = vec![0.0; nt];
    let rule = triangle_degree4();
    for t in 0..nt {
        let geo = &geos[t];
        let hess = geo.basis_hessian_diag(p);
        let a = a_of[t];
        let h = mesh.diameter(t);
        for (lam, u) in pairs {
            let ul = locals(t, u);
            let mut div = C64::new(0.0, 0.0);
            for (ui, hi) in ul.iter().zip(&hess) {
                div += ui * (a[0] * hi[0] + a[1] * hi[1]);
            }
            let mut vol = 0.0;
            for &(bary, w) in &rule {
                let (v, _) = geo.basis(p, bary);
                let uh: C64 = ul.iter().zip(&v).map(|(ui, vi)| ui * vi).sum();
                vol += w * geo.area * (div + lam * uh).norm_sqr();
            }
            eta[t] += h * h * vol;
        }
    }
    let gauss = gauss_legendre_unit(p + 2);
    let boundary: std::collections::HashMap<(usize, usize), BoundaryTag> =
        mesh.boundary_edges.iter().map(|&(a, b, tag)| ((a.min(b), a.max(b)), tag)).collect();
    let mut edges: Vec<((usize, usize), Vec<usize>)> = mesh.edge_triangles().into_iter().collect();
    edges.sort_by_key(|e| e.0);
    for ((va, vb), tris) in edges {
        let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let mut n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        let t0 = tris[0];
        let c0 = centroid(&geos[t0]);
        // Orient the normal out of the first triangle.
        if (c0[0] - pa[0]) * n[0] + (c0[1] - pa[1]) * n[1] > 0.0 {
            n = [-n[0], -n[1]];
        }
        let tag = boundary.get(&(va, vb)).copied();
        if tris.len() == 1 && tag != Some(BoundaryTag::Robin) {
            continue;
        }
        for (_, u) in pairs {
            let mut sq = 0.0;
            for &(s, w) in &gauss {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let f0 = flux(&geos[t0], p, a_of[t0], &locals(t0, u), x, n);
                let r = if tris.len() == 2 {
                    let t1 = tris[1];
                    f0 - flux(&geos[t1], p, a_of[t1], &locals(t1, u), x, n)
                } else {
                    f0 + coeff.c * value_at(&geos[t0], p, &locals(t0, u), x)
                };
                sq += w * len * r.norm_sqr();
            }
            if tris.len() == 2 {
                eta[t0] += 0.5 * len * sq;
                eta[tris[1]] += 0.5 * len * sq;
            } else {
                eta[t0] += len * sq;
            }
        }
    }
    eta
}

/// Smallest prefix of the indicators sorted descending (ties by index) carrying `theta` of the total.
pub fn dorfler_mark(field: &EstimatorField, theta: f64) -> Result<BTreeSet<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidInput(format!("theta must lie in (0, 1], got {theta}")));
    }
    let mut order: Vec<usize> = (0..field.indicators.len()).filter(|&t| field.indicators[t] > 0.0).collect();
    order.sort_by(|&i, &j| field.indicators[j].total_cmp(&field.indicators[i]).then(i.cmp(&j)));
    let total: f64 = order.iter().map(|&t| field.indicators[t]).sum();
    let mut marked = BTreeSet::new();
    let mut acc = 0.0;
    for t in order {
        if acc >= theta * total {
            break;
        }
        acc += field.indicators[t];
        marked.insert(t);
    }
    Ok(marked)
}

/// Solve, estimate, mark, refine until the next mesh exceeds `max_dofs` unknowns.
///
/// Rows carry the cluster errors against the target and the total estimator.
pub fn adaptive_loop(case: &BenchmarkCase, p: usize, theta: f64, max_dofs: usize) -> Result<ConvergenceTable> {
    if !matches!(case.id, CaseId::Regular2dTri | CaseId::Reduced2dTri) {
        return Err(Error::InvalidInput(format!("adaptive refinement needs a triangle case, not {}", case.id)));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidInput(format!("theta must lie in (0, 1], got {theta}")));
    }
    let coeff = case.coeff();
    let mut mesh = initial_square_triangulation(4)?;
    let mut table = ConvergenceTable::new(case.id, p, case.target);
    for level in 0.. {
        let space = TriSpace::new(&mesh, p)?;
        let n = space.n_free();
        if n > max_dofs {
            if level == 0 {
                return Err(Error::InvalidInput(format!("max_dofs {max_dofs} below the initial {n} unknowns")));
            }
            break;
        }
        let h = tri_h(&mesh);
        let step = assemble_triangles_in(&mesh, &coeff, &space).and_then(|pencil| {
            let cl = solve_cluster(&pencil, case.target, case.m_alg)?;
            let pairs: Vec<(C64, Vec<C64>)> = cl.values.iter().copied().zip(cl.vectors).collect();
            let field = residual_estimator(&mesh, &space, &pairs, &coeff);
            let mut row = cluster_row(level, n, h, cl.values, case.target)?;
            row.eta_total = Some(field.total);
            Ok((row, field))
        });
        match step {
            Ok((row, field)) => {
                table.rows.push(row);
                let marked = dorfler_mark(&field, theta)?;
                if marked.is_empty() {
                    break;
                }
                mesh = nvb_refine(&mesh, &marked)?;
            }
            Err(e) => {
                table.rows.push(ConvergenceRow::failed(level, n, h, &e));
                break;
            }
        }
    }
    let k = K_LAST.min(table.rows.len().saturating_sub(1)).max(2);
    table.fit(k);
    Ok(table)
}

/// One level of an eigenfunction study.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionRow {
    pub level: usize,
    pub n_dofs: usize,
    pub h: f64,
    pub lambda: C64,
    /// Relative H¹ distance to span{w_1, …, w_α}.
    pub dist_jet: f64,
    /// Relative H¹ distance to span{w_1}.
    pub dist_first: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionTable {
    pub case: CaseId,
    pub p: usize,
    pub rows: Vec<EigenfunctionRow>,
    pub rates: Vec<Rate>,
}

/// H¹ distance of the best-resolved discrete eigenfunction to the analytic jet span.
pub fn eigenfunction_convergence(case: &BenchmarkCase, p: usize, levels: usize) -> Result<EigenfunctionTable> {
    if case.dim != 1 {
        return Err(Error::InvalidInput(format!("eigenfunction studies are one-dimensional, not {}", case.id)));
    }
    if levels < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 levels, got {levels}")));
    }
    let params = case.config.params;
    let jet = eigenfunction_jet(&params, case.config.lambda, case.config.ascent)?;
    let jet = &jet;
    let ws: Vec<Box<dyn Fn(f64) -> (C64, C64) + '_>> =
        (1..=jet.order()).map(|l| Box::new(move |x| jet.eval(l, x)) as Box<dyn Fn(f64) -> (C64, C64)>).collect();
    let span: Vec<Evaluator<'_>> = ws.iter().map(|f| f.as_ref() as Evaluator<'_>).collect();
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let LevelMesh::Interval(mesh) = level_mesh(case, level)? else {
            unreachable!("one-dimensional case");
        };
        let pencil = assemble_interval(&mesh, &params, p)?;
        let cl = solve_cluster(&pencil, case.target, case.m_alg)?;
        let norms = (pencil.a.norm1(), pencil.b.norm1());
        let k = (0..cl.values.len())
            .min_by(|&i, &j| {
                let ri = pair_residual(&pencil, norms, cl.values[i], &cl.vectors[i]);
                let rj = pair_residual(&pencil, norms, cl.values[j], &cl.vectors[j]);
                ri.total_cmp(&rj).then(i.cmp(&j))
            })
            .ok_or_else(|| Error::InvalidInput("empty cluster".into()))?;
        let u = DiscreteFunction1d::from_free(&mesh, &pencil, &cl.vectors[k]);
        let norm = u.h1_norm();
        rows.push(EigenfunctionRow {
            level,
            n_dofs: pencil.n(),
            h: mesh.max_h(),
            lambda: cl.values[k],
            dist_jet: h1_error(&u, &span, &[params.b])? / norm,
            dist_first: h1_error(&u, &span[..1], &[params.b])? / norm,
        });
    }
    let k_last = K_LAST.min(levels - 1);
    let mut rates = Vec::new();
    for (column, pts) in [
        ("h1_jet", rows.iter().map(|r| (r.n_dofs as f64, r.dist_jet)).collect::<Vec<_>>()),
        ("h1_first", rows.iter().map(|r| (r.n_dofs as f64, r.dist_first)).collect()),
    ] {
        if let Ok(slope) = fit_rate(&pts, k_last, 0.0) {
            rates.push(Rate { column: column.into(), slope, k_last });
        }
    }
    Ok(EigenfunctionTable { case: case.id, p, rows, rates })
}

/// CSV rows of a convergence table (no header).
pub fn table_csv_rows(table: &ConvergenceTable) -> String {
    let mut s = String::new();
    let eta = |r: &ConvergenceRow| r.eta_total.map(format_f64).unwrap_or_default();
    for r in table.rows.iter().filter(|r| r.ok()) {
        let mean_err = r.mean_error.map(format_f64).unwrap_or_default();
        for (j, (v, e)) in r.values.iter().zip(&r.errors).enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                table.case,
                table.p,
                r.level,
                r.n_dofs,
                format_f64(r.h),
                j + 1,
                format_f64(v.re),
                format_f64(v.im),
                format_f64(*e),
                mean_err,
                eta(r)
            );
        }
        if let Some(m) = r.mean {
            let _ = writeln!(
                s,
                "{},{},{},{},{},mean,{},{},{},{},{}",
                table.case,
                table.p,
                r.level,
                r.n_dofs,
                format_f64(r.h),
                format_f64(m.re),
                format_f64(m.im),
                mean_err,
                mean_err,
                eta(r)
            );
        }
    }
    s
}

/// CSV rows of an eigenfunction table: the chosen pair, its jet-span distance in `abs_err`.
pub fn eigenfunction_csv_rows(table: &EigenfunctionTable) -> String {
    let mut s = String::new();
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},1,{},{},{},,",
            table.case,
            table.p,
            r.level,
            r.n_dofs,
            format_f64(r.h),
            format_f64(r.lambda.re),
            format_f64(r.lambda.im),
            format_f64(r.dist_jet)
        );
    }
    s
}

pub fn csv_document(rows: &str) -> String {
    format!("{CSV_HEADER}\n{rows}")
}

pub fn rates_csv(case: CaseId, p: usize, rates: &[Rate]) -> String {
    let mut s = String::new();
    for r in rates {
        let _ = writeln!(s, "{case},{p},{},{},{}", r.column, format_f64(r.slope), r.k_last);
    }
    s
}

pub fn rates_document(rows: &str) -> String {
    format!("case,p,column,slope,k_last\n{rows}")
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `rates.csv` next to a table output.
pub fn rates_path(out: &Path) -> std::path::PathBuf {
    out.with_file_name("rates.csv")
}
