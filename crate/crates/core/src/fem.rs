//! Galerkin pencils `(A, B)` for `(a∇u, ∇v) + (c u, v)_{Γ_R} = λ (u, v)`.
//!
//! Dirichlet unknowns are eliminated, so both matrices act on free degrees of
//! freedom only. Basis functions are real, hence `A` and `B` are complex
//! symmetric (not Hermitian).

use std::collections::HashMap;

use crate::analytic1d::ModelParams;
use crate::cplx::C64;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::meshing::{BoundaryTag, IntervalMesh, TriMesh};
use crate::quadrature::{gauss_legendre_unit, triangle_degree4};
use crate::sparse::CsrMatrix;

/// Largest tensor pencil that may be materialized.
pub const MAX_TENSOR_DOFS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PencilMeta {
    pub p: usize,
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub meta: PencilMeta,
    /// Global index of each free unknown.
    pub free: Vec<usize>,
    /// Global unknown count including eliminated Dirichlet ones.
    pub n_total: usize,
}

impl Pencil {
    pub fn n(&self) -> usize {
        self.meta.n
    }
}

fn check_degree(p: usize, max: usize) -> Result<()> {
    if (1..=max).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("polynomial degree {p} not in 1..={max}")))
    }
}

/// Values and `t`-derivatives of the equispaced Lagrange basis of degree `p` on `[0,1]`.
pub fn lagrange_1d(p: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes: Vec<f64> = (0..=p).map(|k| k as f64 / p as f64).collect();
    let mut val = vec![0.0; p + 1];
    let mut der = vec![0.0; p + 1];
    for i in 0..=p {
        let mut v = 1.0;
        let mut d = 0.0;
        for j in (0..=p).filter(|&j| j != i) {
            let den = nodes[i] - nodes[j];
            d = d * (t - nodes[j]) / den + v / den;
            v *= (t - nodes[j]) / den;
        }
        val[i] = v;
        der[i] = d;
    }
    (val, der)
}

/// Restricts global triplets to free unknowns.
fn eliminate(n_total: usize, fixed: &[bool], trip: &[(usize, usize, C64)]) -> (Vec<usize>, Vec<(usize, usize, C64)>) {
    let mut index = vec![usize::MAX; n_total];
    let mut free = Vec::new();
    for g in 0..n_total {
        if !fixed[g] {
            index[g] = free.len();
            free.push(g);
        }
    }
    let reduced = trip
        .iter()
        .filter(|(i, j, _)| !fixed[*i] && !fixed[*j])
        .map(|&(i, j, v)| (index[i], index[j], v))
        .collect();
    (free, reduced)
}

/// 1D pencil with Lagrange elements of degree `p ∈ {1,2,3}`.
///
/// Element `e` owns global unknowns `e·p ..= e·p + p`; unknown 0 (x = 0) is
/// eliminated and the last one carries the Robin term. Elements containing
/// the jump are integrated exactly by splitting at `b`.
pub fn assemble_interval(mesh: &IntervalMesh, params: &ModelParams, p: usize) -> Result<Pencil> {
    check_degree(p, 3)?;
    params.validate()?;
    let ne = mesh.num_elements();
    let n_total = ne * p + 1;
    let gauss = gauss_legendre_unit(p + 1);
    let mut ta = Vec::with_capacity(ne * (p + 1) * (p + 1) + 1);
    let mut tb = Vec::with_capacity(ne * (p + 1) * (p + 1));
    let x = mesh.nodes();
    for e in 0..ne {
        let (x0, x1) = (x[e], x[e + 1]);
        let h = x1 - x0;
        let pieces: Vec<(f64, f64, C64)> = if params.b > x0 && params.b < x1 {
            vec![(x0, params.b, C64::new(1.0, 0.0)), (params.b, x1, params.a_r)]
        } else {
            vec![(x0, x1, params.coefficient(0.5 * (x0 + x1)))]
        };
        let mut ke = vec![vec![C64::new(0.0, 0.0); p + 1]; p + 1];
        let mut me = vec![vec![0.0; p + 1]; p + 1];
        for &(lo, hi, a) in &pieces {
            for &(s, w) in &gauss {
                let xq = lo + s * (hi - lo);
                let (v, d) = lagrange_1d(p, (xq - x0) / h);
                let wq = w * (hi - lo);
                for i in 0..=p {
                    for j in i..=p {
                        ke[i][j] += a * (wq * d[i] * d[j] / (h * h));
                        me[i][j] += wq * v[i] * v[j];
                    }
                }
            }
        }
        for i in 0..=p {
            for j in 0..i {
                ke[i][j] = ke[j][i];
                me[i][j] = me[j][i];
            }
        }
        for i in 0..=p {
            for j in 0..=p {
                ta.push((e * p + i, e * p + j, ke[i][j]));
                tb.push((e * p + i, e * p + j, C64::new(me[i][j], 0.0)));
            }
        }
    }
    ta.push((n_total - 1, n_total - 1, params.c));
    let mut fixed = vec![false; n_total];
    fixed[0] = true;
    let (free, ta) = eliminate(n_total, &fixed, &ta);
    let (_, tb) = eliminate(n_total, &fixed, &tb);
    let n = free.len();
    Ok(Pencil {
        a: CsrMatrix::from_triplets(n, &ta),
        b: CsrMatrix::from_triplets(n, &tb),
        meta: PencilMeta { p, dim: 1, n },
        free,
        n_total,
    })
}

/// Kronecker-sum pencil on the tensor grid built from a 1D pencil.
pub fn assemble_tensor(p1d: &Pencil, dim: usize) -> Result<Pencil> {
    if p1d.meta.dim != 1 {
        return Err(Error::InvalidInput("tensor assembly needs a 1D pencil".into()));
    }
    let n1 = p1d.n();
    let n = match dim {
        2 | 3 => n1.checked_pow(dim as u32).filter(|&n| n <= MAX_TENSOR_DOFS),
        _ => return Err(Error::InvalidInput(format!("tensor dimension {dim} not in {{2,3}}"))),
    }
    .ok_or_else(|| Error::SizeOverflow(format!("{n1}^{dim} unknowns exceed {MAX_TENSOR_DOFS}")))?;
    let (a, b) = (&p1d.a, &p1d.b);
    let (a_t, b_t) = if dim == 2 {
        let ab = a.kron(b);
        (ab.add_scaled(C64::new(1.0, 0.0), &b.kron(a)), b.kron(b))
    } else {
        let bb = b.kron(b);
        let s = a.kron(&bb).add_scaled(C64::new(1.0, 0.0), &b.kron(&a.kron(b)));
        (s.add_scaled(C64::new(1.0, 0.0), &bb.kron(a)), b.kron(&bb))
    };
    let n_total1 = p1d.n_total;
    let free = (0..n)
        .map(|k| {
            let mut digits = [0usize; 3];
            let mut rest = k;
            for d in (0..dim).rev() {
                digits[d] = rest % n1;
                rest /= n1;
            }
            digits[..dim].iter().fold(0, |g, &i| g * n_total1 + p1d.free[i])
        })
        .collect();
    Ok(Pencil {
        a: a_t,
        b: b_t,
        meta: PencilMeta { p: p1d.meta.p, dim, n },
        free,
        n_total: n_total1.pow(dim as u32),
    })
}

/// Tensorized coefficient `diag(a(x), a(y))` with Robin coefficient `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient2D {
    pub b: f64,
    pub a_r: C64,
    pub c: C64,
}

impl Coefficient2D {
    pub fn from_params(p: &ModelParams) -> Self {
        Coefficient2D { b: p.b, a_r: p.a_r, c: p.c }
    }

    /// Scalar factor along one axis: 1 for `t ≤ b`, `a_R` beyond.
    pub fn axis(&self, t: f64) -> C64 {
        if t <= self.b {
            C64::new(1.0, 0.0)
        } else {
            self.a_r
        }
    }

    pub fn diag(&self, pt: [f64; 2]) -> [C64; 2] {
        [self.axis(pt[0]), self.axis(pt[1])]
    }
}

/// Degree-of-freedom layout of P1/P2 on a triangulation.
///
/// Local order: vertices `0,1,2`, then (P2) midpoints of the edges opposite
/// vertices `0,1,2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriSpace {
    pub p: usize,
    pub elem_dofs: Vec<Vec<usize>>,
    pub n_total: usize,
    /// Free index of each global unknown (`None` for Dirichlet).
    pub free_of: Vec<Option<usize>>,
    pub free: Vec<usize>,
    edge_dof: HashMap<(usize, usize), usize>,
}

/// Local vertex pair of the edge opposite local vertex `k`.
pub const OPPOSITE_EDGE: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TriSpace {
    pub fn new(mesh: &TriMesh, p: usize) -> Result<Self> {
        check_degree(p, 2)?;
        let nv = mesh.num_vertices();
        let mut edge_dof = HashMap::new();
        let mut elem_dofs = Vec::with_capacity(mesh.num_triangles());
        let mut n_total = nv;
        for tri in &mesh.triangles {
            let mut dofs = tri.to_vec();
            if p == 2 {
                for (a, b) in OPPOSITE_EDGE {
                    let d = *edge_dof.entry(key(tri[a], tri[b])).or_insert_with(|| {
                        n_total += 1;
                        n_total - 1
                    });
                    dofs.push(d);
                }
            }
            elem_dofs.push(dofs);
        }
        let mut fixed = vec![false; n_total];
        for &(a, b, tag) in &mesh.boundary_edges {
            if tag == BoundaryTag::Dirichlet {
                fixed[a] = true;
                fixed[b] = true;
                if p == 2 {
                    fixed[edge_dof[&key(a, b)]] = true;
                }
            }
        }
        let mut free_of = vec![None; n_total];
        let mut free = Vec::new();
        for g in 0..n_total {
            if !fixed[g] {
                free_of[g] = Some(free.len());
                free.push(g);
            }
        }
        Ok(TriSpace { p, elem_dofs, n_total, free_of, free, edge_dof })
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Global unknown at the midpoint of edge `(a, b)` (P2 only).
    pub fn edge_dof(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_dof.get(&key(a, b)).copied()
    }

    /// Expands a free-unknown vector to all global unknowns (zeros on Dirichlet).
    pub fn expand(&self, v: &[C64]) -> Vec<C64> {
        self.free_of.iter().map(|f| f.map_or(C64::new(0.0, 0.0), |k| v[k])).collect()
    }
}

/// Geometry of one triangle: vertices, area, barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub verts: [[f64; 2]; 3],
    pub area: f64,
    pub grad_l: [[f64; 2]; 3],
}

impl TriGeom {
    pub fn new(mesh: &TriMesh, t: usize) -> Self {
        let verts = mesh.triangles[t].map(|i| mesh.vertices[i]);
        let area = mesh.area(t);
        let grad_l = std::array::from_fn(|i| {
            let (p, q) = (verts[(i + 1) % 3], verts[(i + 2) % 3]);
            [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)]
        });
        TriGeom { verts, area, grad_l }
    }

    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for k in 0..3 {
            x[0] += bary[k] * self.verts[k][0];
            x[1] += bary[k] * self.verts[k][1];
        }
        x
    }

    /// Basis values and gradients at a barycentric point.
    pub fn basis(&self, p: usize, l: [f64; 3]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let g = &self.grad_l;
        if p == 1 {
            return (l.to_vec(), g.to_vec());
        }
        let mut val = Vec::with_capacity(6);
        let mut grad = Vec::with_capacity(6);
        for i in 0..3 {
            val.push(l[i] * (2.0 * l[i] - 1.0));
            let s = 4.0 * l[i] - 1.0;
            grad.push([s * g[i][0], s * g[i][1]]);
        }
        for (a, b) in OPPOSITE_EDGE {
            val.push(4.0 * l[a] * l[b]);
            grad.push([4.0 * (l[a] * g[b][0] + l[b] * g[a][0]), 4.0 * (l[a] * g[b][1] + l[b] * g[a][1])]);
        }
        (val, grad)
    }

    /// Diagonal second derivatives `(∂xx φ, ∂yy φ)` of each basis function (constant per triangle).
    pub fn basis_hessian_diag(&self, p: usize) -> Vec<[f64; 2]> {
        if p == 1 {
            return vec![[0.0; 2]; 3];
        }
        let g = &self.grad_l;
        let mut out = Vec::with_capacity(6);
        for i in 0..3 {
            out.push([4.0 * g[i][0] * g[i][0], 4.0 * g[i][1] * g[i][1]]);
        }
        for (a, b) in OPPOSITE_EDGE {
            out.push([8.0 * g[a][0] * g[b][0], 8.0 * g[a][1] * g[b][1]]);
        }
        out
    }
}

/// Edge shape functions in the arclength parameter `s ∈ [0,1]` (endpoints, then midpoint for P2).
pub fn edge_basis(p: usize, s: f64) -> Vec<f64> {
    if p == 1 {
        vec![1.0 - s, s]
    } else {
        vec![(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
    }
}

/// Triangle pencil with P1 or P2 elements.
pub fn assemble_triangles(mesh: &TriMesh, coeff: &Coefficient2D, p: usize) -> Result<Pencil> {
    let space = TriSpace::new(mesh, p)?;
    assemble_triangles_in(mesh, coeff, &space)
}

pub fn assemble_triangles_in(mesh: &TriMesh, coeff: &Coefficient2D, space: &TriSpace) -> Result<Pencil> {
    let p = space.p;
    let nl = if p == 1 { 3 } else { 6 };
    let rule = triangle_degree4();
    let mut ta = Vec::with_capacity(mesh.num_triangles() * nl * nl);
    let mut tb = Vec::with_capacity(mesh.num_triangles() * nl * nl);
    for t in 0..mesh.num_triangles() {
        let geo = TriGeom::new(mesh, t);
        let mut ke = vec![C64::new(0.0, 0.0); nl * nl];
        let mut me = vec![0.0; nl * nl];
        for &(bary, w) in &rule {
            let wq = w * geo.area;
            let [ax, ay] = coeff.diag(geo.point(bary));
            let (v, g) = geo.basis(p, bary);
            for i in 0..nl {
                for j in i..nl {
                    ke[i * nl + j] += ax * (wq * g[i][0] * g[j][0]) + ay * (wq * g[i][1] * g[j][1]);
                    me[i * nl + j] += wq * v[i] * v[j];
                }
            }
        }
        for i in 0..nl {
            for j in 0..i {
                ke[i * nl + j] = ke[j * nl + i];
                me[i * nl + j] = me[j * nl + i];
            }
        }
        let dofs = &space.elem_dofs[t];
        for i in 0..nl {
            for j in 0..nl {
                ta.push((dofs[i], dofs[j], ke[i * nl + j]));
                tb.push((dofs[i], dofs[j], C64::new(me[i * nl + j], 0.0)));
            }
        }
    }
    let gauss = gauss_legendre_unit(3);
    for &(a, b, tag) in &mesh.boundary_edges {
        if tag != BoundaryTag::Robin {
            continue;
        }
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let mut dofs = vec![a, b];
        if p == 2 {
            dofs.push(space.edge_dof(a, b).expect("boundary edge has a midpoint unknown"));
        }
        let mut local = vec![0.0; dofs.len() * dofs.len()];
        for &(s, w) in &gauss {
            let phi = edge_basis(p, s);
            for i in 0..dofs.len() {
                for j in i..dofs.len() {
                    local[i * dofs.len() + j] += w * len * phi[i] * phi[j];
                }
            }
        }
        for i in 0..dofs.len() {
            for j in 0..i {
                local[i * dofs.len() + j] = local[j * dofs.len() + i];
            }
        }
        for i in 0..dofs.len() {
            for j in 0..dofs.len() {
                ta.push((dofs[i], dofs[j], coeff.c * local[i * dofs.len() + j]));
            }
        }
    }
    let fixed: Vec<bool> = space.free_of.iter().map(Option::is_none).collect();
    let (free, ta) = eliminate(space.n_total, &fixed, &ta);
    let (_, tb) = eliminate(space.n_total, &fixed, &tb);
    let n = free.len();
    Ok(Pencil {
        a: CsrMatrix::from_triplets(n, &ta),
        b: CsrMatrix::from_triplets(n, &tb),
        meta: PencilMeta { p, dim: 2, n },
        free,
        n_total: space.n_total,
    })
}

/// Coercivity shift for `(a∇u,∇u) + c‖u‖²_{Γ_R}` with `Re a ≥ α0`, `Re c ≥ c0`.
pub fn coercivity_shift(alpha0: f64, c0: f64, c_trace: f64, has_dirichlet: bool) -> f64 {
    if c0 >= 0.0 {
        if has_dirichlet {
            0.0
        } else {
            alpha0
        }
    } else {
        alpha0 + c_trace * c0 * c0 / alpha0
    }
}

/// A 1D finite element function (all global unknowns, including the Dirichlet one).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction1d {
    pub nodes: Vec<f64>,
    pub p: usize,
    pub coeffs: Vec<C64>,
}

impl DiscreteFunction1d {
    pub fn from_free(mesh: &IntervalMesh, pencil: &Pencil, v: &[C64]) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); pencil.n_total];
        for (k, &g) in pencil.free.iter().enumerate() {
            coeffs[g] = v[k];
        }
        DiscreteFunction1d { nodes: mesh.nodes().to_vec(), p: pencil.meta.p, coeffs }
    }

    /// Interpolant of `f` at the Lagrange nodes.
    pub fn interpolate(mesh: &IntervalMesh, p: usize, f: impl Fn(f64) -> C64) -> Self {
        let x = mesh.nodes();
        let mut coeffs = Vec::with_capacity(mesh.num_elements() * p + 1);
        for e in 0..mesh.num_elements() {
            for k in 0..p {
                coeffs.push(f(x[e] + (x[e + 1] - x[e]) * k as f64 / p as f64));
            }
        }
        coeffs.push(f(1.0));
        DiscreteFunction1d { nodes: x.to_vec(), p, coeffs }
    }

    pub fn scaled(&self, s: C64) -> Self {
        DiscreteFunction1d { coeffs: self.coeffs.iter().map(|c| c * s).collect(), ..self.clone() }
    }

    /// Value and derivative on element `e` at `x`.
    pub fn eval_in(&self, e: usize, x: f64) -> (C64, C64) {
        let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
        let h = x1 - x0;
        let (v, d) = lagrange_1d(self.p, (x - x0) / h);
        let mut val = C64::new(0.0, 0.0);
        let mut der = C64::new(0.0, 0.0);
        for k in 0..=self.p {
            let c = self.coeffs[e * self.p + k];
            val += c * v[k];
            der += c * (d[k] / h);
        }
        (val, der)
    }

    pub fn h1_norm(&self) -> f64 {
        let gauss = gauss_legendre_unit(self.p + 2);
        let mut s = 0.0;
        for e in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            for &(t, w) in &gauss {
                let (v, d) = self.eval_in(e, x0 + t * (x1 - x0));
                s += w * (x1 - x0) * (v.norm_sqr() + d.norm_sqr());
            }
        }
        s.sqrt()
    }
}

/// Analytic function on `[0,1]` returning value and derivative.
pub type Evaluator<'a> = &'a dyn Fn(f64) -> (C64, C64);

/// `min_γ ‖Σ γ_i w_i − u_h‖_{H¹}` by per-element Gauss quadrature.
///
/// Elements are additionally split at `breaks` (kinks of the analytic functions).
pub fn h1_error(u_h: &DiscreteFunction1d, space: &[Evaluator<'_>], breaks: &[f64]) -> Result<f64> {
    let k = space.len();
    if k == 0 {
        return Ok(u_h.h1_norm());
    }
    let gauss = gauss_legendre_unit(u_h.p + 3);
    // Quadrature samples: (weight, u, u', w_i, w_i').
    let mut samples: Vec<(f64, (C64, C64), Vec<(C64, C64)>)> = Vec::new();
    for e in 0..u_h.nodes.len() - 1 {
        let (x0, x1) = (u_h.nodes[e], u_h.nodes[e + 1]);
        let mut cuts = vec![x0];
        cuts.extend(breaks.iter().copied().filter(|&b| b > x0 && b < x1));
        cuts.push(x1);
        for piece in cuts.windows(2) {
            let (lo, hi) = (piece[0], piece[1]);
            for &(t, w) in &gauss {
                let x = lo + t * (hi - lo);
                samples.push((w * (hi - lo), u_h.eval_in(e, x), space.iter().map(|f| f(x)).collect()));
            }
        }
    }
    let inner = |f: (C64, C64), g: (C64, C64)| f.0 * g.0.conj() + f.1 * g.1.conj();
    let mut gram = DenseMatrix::zeros(k);
    let mut rhs = vec![C64::new(0.0, 0.0); k];
    for (w, u, ws) in &samples {
        for i in 0..k {
            rhs[i] += inner(*u, ws[i]) * w;
            for j in 0..k {
                gram[(i, j)] += inner(ws[j], ws[i]) * w;
            }
        }
    }
    // Equilibrate so the conditioning test reflects linear independence, not scaling.
    let scale: Vec<f64> = (0..k).map(|i| gram[(i, i)].re.sqrt()).collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::SingularGram);
    }
    let g = DenseMatrix::from_fn(k, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
    if !(g.cond1() <= 1e14) {
        return Err(Error::SingularGram);
    }
    let r: Vec<C64> = (0..k).map(|i| rhs[i] / scale[i]).collect();
    let y = g.lu().ok_or(Error::SingularGram)?.solve(&r);
    let gamma: Vec<C64> = (0..k).map(|i| y[i] / scale[i]).collect();
    let mut err = 0.0;
    for (w, u, ws) in &samples {
        let mut d = (-u.0, -u.1);
        for i in 0..k {
            d.0 += gamma[i] * ws[i].0;
            d.1 += gamma[i] * ws[i].1;
        }
        err += w * (d.0.norm_sqr() + d.1.norm_sqr());
    }
    Ok(err.sqrt())
}
