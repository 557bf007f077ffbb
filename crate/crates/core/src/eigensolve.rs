//! Shift-invert Arnoldi for complex pencils `A x = λ B x`.
//!
//! The operator `T = (A − σB)⁻¹ B` maps eigenvalues near `σ` to the dominant
//! eigenvalues `θ = 1/(λ − σ)`. Ritz values come from a complex Schur form of
//! the Arnoldi Hessenberg matrix, and every returned pair is certified by its
//! residual in the original pencil.

use crate::cplx::C64;
use crate::error::{Error, Result};
use crate::fem::Pencil;
use crate::sparse::CsrMatrix;

/// Band storage limit (complex entries) for the banded factorization.
const MAX_BAND_ENTRIES: usize = 20_000_000;
/// Band factorization work limit, in units of `n · bw²`.
const MAX_BAND_WORK: f64 = 4e8;
/// Relative deflation threshold of the Hessenberg QR iteration.
const QR_DEFLATION: f64 = 1e-14;
/// Arnoldi attempts (the later ones restart from the wanted Ritz vectors with a doubled basis).
const MAX_ATTEMPTS: usize = 3;

pub const DEFAULT_TOL: f64 = 1e-9;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    // x^H y
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Reverse Cuthill–McKee ordering of the symmetric pattern of `m` (plus its transpose).
pub fn reverse_cuthill_mckee(m: &CsrMatrix) -> Vec<usize> {
    let n = m.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in m.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (eccentricity, a minimum-degree node of the last level)
        let mut seen = visited.to_vec();
        let mut level = vec![start];
        seen[start] = true;
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &u in &level {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                let far = *level.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
                return (depth, far);
            }
            depth += 1;
            level = next;
        }
    };
    while order.len() < n {
        let seed = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)).unwrap();
        // Pseudo-peripheral start node.
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        let begin = order.len();
        order.push(start);
        visited[start] = true;
        let mut head = begin;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                order.push(v);
            }
        }
    }
    order.reverse();
    order
}

/// LU with partial pivoting of a banded matrix, row storage of columns `i-kl ..= i+kl+ku`.
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factor(m: &CsrMatrix, perm: &[usize], inv: &[usize], bw: usize) -> Result<Self> {
        let n = m.n();
        let (kl, ku) = (bw, bw);
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu { n, kl, ku, width, data: vec![zero(); n * width], piv: vec![0; n] };
        for (i_new, &i_old) in perm.iter().enumerate() {
            for (j_old, v) in m.row(i_old) {
                let s = lu.slot(i_new, inv[j_old]);
                lu.data[s] = v;
            }
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.slot(k, k)].norm();
            for i in k + 1..=last_row {
                let v = lu.data[lu.slot(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularShift);
            }
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (lu.slot(k, j), lu.slot(p, j));
                    lu.data.swap(a, b);
                }
            }
            let pivot = lu.data[lu.slot(k, k)];
            for i in k + 1..=last_row {
                let s = lu.slot(i, k);
                let l = lu.data[s] / pivot;
                lu.data[s] = l;
                if l == zero() {
                    continue;
                }
                let (row_k, row_i) = (k * width + kl - k, i * width + kl - i);
                for j in k + 1..=last_col {
                    let u = lu.data[row_k + j];
                    lu.data[row_i + j] -= l * u;
                }
            }
        }
        Ok(lu)
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk == zero() {
                continue;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.data[i * width + kl + k - i] * bk;
            }
        }
        for i in (0..n).rev() {
            let row = i * width + kl - i;
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.data[row + j] * b[j];
            }
            b[i] = s / self.data[row + i];
        }
    }
}

#[derive(Debug)]
enum Backend {
    Band { lu: BandLu, perm: Vec<usize> },
    #[cfg(feature = "sparse-lu")]
    Sparse(faer::sparse::linalg::solvers::Lu<usize, C64>),
}

/// Direct factorization of `A − σB`.
#[derive(Debug)]
pub struct ShiftedFactorization {
    sigma: C64,
    n: usize,
    backend: Backend,
}

pub fn factorize_shifted(pencil: &Pencil, sigma: C64) -> Result<ShiftedFactorization> {
    let m = pencil.a.add_scaled(-sigma, &pencil.b);
    factorize_matrix(&m, sigma)
}

fn factorize_matrix(m: &CsrMatrix, sigma: C64) -> Result<ShiftedFactorization> {
    let n = m.n();
    if n == 0 {
        return Err(Error::InvalidInput("empty pencil".into()));
    }
    let perm = reverse_cuthill_mckee(m);
    let mut inv = vec![0; n];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    let bw = (0..n).flat_map(|i| m.row(i).map(move |(j, _)| (i, j))).map(|(i, j)| inv[i].abs_diff(inv[j])).max().unwrap_or(0);
    let entries = n.saturating_mul(3 * bw + 1);
    let band_ok = entries <= MAX_BAND_ENTRIES && (n as f64) * (bw as f64).powi(2) <= MAX_BAND_WORK;
    if band_ok || !cfg!(feature = "sparse-lu") {
        if entries > MAX_BAND_ENTRIES {
            return Err(Error::SizeOverflow(format!("band storage {entries} exceeds {MAX_BAND_ENTRIES}")));
        }
        let lu = BandLu::factor(m, &perm, &inv, bw)?;
        return Ok(ShiftedFactorization { sigma, n, backend: Backend::Band { lu, perm } });
    }
    #[cfg(feature = "sparse-lu")]
    {
        sparse_factor(m, sigma)
    }
    #[cfg(not(feature = "sparse-lu"))]
    unreachable!()
}

#[cfg(feature = "sparse-lu")]
fn sparse_factor(m: &CsrMatrix, sigma: C64) -> Result<ShiftedFactorization> {
    use faer::sparse::{SparseColMat, Triplet};
    let n = m.n();
    let trips: Vec<Triplet<usize, usize, C64>> =
        (0..n).flat_map(|i| m.row(i).map(move |(j, v)| Triplet::new(i, j, v))).collect();
    let mat = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::InvalidInput(format!("sparse matrix: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|_| Error::SingularShift)?;
    let f = ShiftedFactorization { sigma, n, backend: Backend::Sparse(lu) };
    // Numerical singularity shows up as non-finite solutions.
    let mut probe = vec![C64::new(1.0, 0.0); n];
    f.solve_in_place(&mut probe);
    if probe.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularShift);
    }
    Ok(f)
}

impl ShiftedFactorization {
    pub fn sigma(&self) -> C64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the banded (as opposed to general sparse) backend is in use.
    pub fn is_banded(&self) -> bool {
        matches!(self.backend, Backend::Band { .. })
    }

    /// Overwrites `b` with `(A − σB)⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        match &self.backend {
            Backend::Band { lu, perm } => {
                let mut y: Vec<C64> = perm.iter().map(|&p| b[p]).collect();
                lu.solve_in_place(&mut y);
                for (k, &p) in perm.iter().enumerate() {
                    b[p] = y[k];
                }
            }
            #[cfg(feature = "sparse-lu")]
            Backend::Sparse(lu) => {
                use faer::linalg::solvers::Solve;
                let mut rhs = faer::Mat::<C64>::from_fn(self.n, 1, |i, _| b[i]);
                lu.solve_in_place(rhs.as_mut());
                for (i, z) in b.iter_mut().enumerate() {
                    *z = rhs[(i, 0)];
                }
            }
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Eigenvalues near a target shift with certified residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub sigma: C64,
    /// Sorted by `|λ − σ|` ascending.
    pub values: Vec<C64>,
    /// B-normalized, largest component real positive.
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
}

/// Scaled residual `‖Av − λBv‖₂ / ((‖A‖₁ + |λ|‖B‖₁) ‖v‖₂)`.
pub fn pair_residual(pencil: &Pencil, norms: (f64, f64), lambda: C64, v: &[C64]) -> f64 {
    let av = pencil.a.matvec(v);
    let bv = pencil.b.matvec(v);
    let r: Vec<C64> = av.iter().zip(&bv).map(|(a, b)| a - lambda * b).collect();
    norm(&r) / ((norms.0 + lambda.norm() * norms.1) * norm(v))
}

/// Complex Schur form `H = Q T Q^H` of an upper Hessenberg matrix (row-major, `k × k`).
///
/// Returns `(T, Q)`.
pub fn hessenberg_schur(h: &[C64], k: usize) -> Result<(Vec<C64>, Vec<C64>)> {
    let mut t = h.to_vec();
    let mut q = vec![zero(); k * k];
    for i in 0..k {
        q[i * k + i] = C64::new(1.0, 0.0);
    }
    let hnorm = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut hi = k;
    let mut iter_since_deflation = 0;
    while hi > 1 {
        // Find the active block [lo, hi).
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = t[lo * k + lo - 1].norm();
            let diag = t[(lo - 1) * k + lo - 1].norm() + t[lo * k + lo].norm();
            if sub <= QR_DEFLATION * hnorm || sub <= f64::EPSILON * diag {
                t[lo * k + lo - 1] = zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        iter_since_deflation += 1;
        if iter_since_deflation > 100 {
            return Err(Error::NotConverged("Hessenberg QR did not deflate".into()));
        }
        // Wilkinson shift from the trailing 2×2 block, exceptional shift occasionally.
        let (a, b, c, d) = (t[(hi - 2) * k + hi - 2], t[(hi - 2) * k + hi - 1], t[(hi - 1) * k + hi - 2], t[(hi - 1) * k + hi - 1]);
        let mut mu = {
            let tr = a + d;
            let det = a * d - b * c;
            let disc = (tr * tr * 0.25 - det).sqrt();
            let (r1, r2) = (tr * 0.5 + disc, tr * 0.5 - disc);
            if (r1 - d).norm() < (r2 - d).norm() {
                r1
            } else {
                r2
            }
        };
        if iter_since_deflation % 11 == 0 {
            mu = d + C64::new(t[(hi - 1) * k + hi - 2].norm(), 0.0) * 0.75;
        }
        // Implicit single-shift QR sweep on rows/cols lo..hi.
        let mut x = t[lo * k + lo] - mu;
        let mut y = t[(lo + 1) * k + lo];
        for j in lo..hi - 1 {
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (cs, sn) = if r == 0.0 { (C64::new(1.0, 0.0), zero()) } else { (x / r, y / r) };
            // G = [[conj(cs), conj(sn)], [-sn, cs]] applied to rows j, j+1.
            let col_start = if j > lo { j - 1 } else { lo };
            for col in col_start..k {
                let (u, v) = (t[j * k + col], t[(j + 1) * k + col]);
                t[j * k + col] = cs.conj() * u + sn.conj() * v;
                t[(j + 1) * k + col] = -sn * u + cs * v;
            }
            let row_end = (j + 3).min(hi);
            for row in 0..row_end {
                let (u, v) = (t[row * k + j], t[row * k + j + 1]);
                t[row * k + j] = u * cs + v * sn;
                t[row * k + j + 1] = -u * sn.conj() + v * cs.conj();
            }
            for row in 0..k {
                let (u, v) = (q[row * k + j], q[row * k + j + 1]);
                q[row * k + j] = u * cs + v * sn;
                q[row * k + j + 1] = -u * sn.conj() + v * cs.conj();
            }
            if j + 2 < hi {
                x = t[(j + 1) * k + j];
                y = t[(j + 2) * k + j];
            }
        }
    }
    for i in 1..k {
        for j in 0..i {
            t[i * k + j] = zero();
        }
    }
    Ok((t, q))
}

/// Eigenvectors of an upper triangular matrix, one column per diagonal entry.
fn triangular_eigenvectors(t: &[C64], k: usize) -> Vec<Vec<C64>> {
    let tnorm = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let small = f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);
    (0..k)
        .map(|i| {
            let lam = t[i * k + i];
            let mut y = vec![zero(); k];
            y[i] = C64::new(1.0, 0.0);
            for j in (0..i).rev() {
                let s: C64 = (j + 1..=i).map(|l| t[j * k + l] * y[l]).sum();
                let mut d = t[j * k + j] - lam;
                if d.norm() < small {
                    d = C64::new(small, 0.0);
                }
                y[j] = -s / d;
            }
            y
        })
        .collect()
}

struct Arnoldi {
    basis: Vec<Vec<C64>>,
    h: Vec<C64>,
    k: usize,
}

/// Arnoldi with modified Gram–Schmidt and one reorthogonalization pass.
fn arnoldi(op: &dyn Fn(&[C64]) -> Vec<C64>, start: Vec<C64>, kmax: usize) -> Arnoldi {
    let mut basis = Vec::with_capacity(kmax + 1);
    let s = norm(&start);
    basis.push(start.iter().map(|z| z / s).collect::<Vec<_>>());
    let mut hcols: Vec<Vec<C64>> = Vec::with_capacity(kmax);
    let mut k = kmax;
    for j in 0..kmax {
        let mut w = op(&basis[j]);
        let wnorm0 = norm(&w);
        let mut col = vec![zero(); j + 2];
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                col[i] += c;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let beta = norm(&w);
        col[j + 1] = C64::new(beta, 0.0);
        hcols.push(col);
        if beta <= 1e-13 * wnorm0.max(f64::MIN_POSITIVE) || j + 1 == kmax {
            k = j + 1;
            if beta > 1e-13 * wnorm0 {
                basis.push(w.iter().map(|z| z / beta).collect());
            }
            break;
        }
        basis.push(w.iter().map(|z| z / beta).collect());
    }
    let mut h = vec![zero(); k * k];
    for (j, col) in hcols.iter().enumerate().take(k) {
        for (i, v) in col.iter().enumerate() {
            if i < k {
                h[i * k + j] = *v;
            }
        }
    }
    basis.truncate(k);
    Arnoldi { basis, h, k }
}

/// B-normalizes `v` and rotates its largest component to the positive real axis.
pub fn b_normalize(b: &CsrMatrix, v: &mut [C64]) {
    let bv = b.matvec(v);
    let s = dot(v, &bv).re.max(f64::MIN_POSITIVE).sqrt();
    let big = v.iter().copied().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap_or(C64::new(1.0, 0.0));
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { C64::new(1.0, 0.0) };
    for z in v.iter_mut() {
        *z = *z * phase / s;
    }
}

/// The `m` eigenpairs of the pencil closest to `sigma`.
pub fn eigs_near(pencil: &Pencil, sigma: C64, m: usize, tol: f64) -> Result<Spectrum> {
    let n = pencil.n();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("requested {m} eigenpairs of a {n}×{n} pencil")));
    }
    let fact = factorize_shifted(pencil, sigma)?;
    eigs_near_with(pencil, &fact, m, tol)
}

/// As [`eigs_near`] with a precomputed factorization.
pub fn eigs_near_with(pencil: &Pencil, fact: &ShiftedFactorization, m: usize, tol: f64) -> Result<Spectrum> {
    let n = pencil.n();
    let sigma = fact.sigma();
    let norms = (pencil.a.norm1(), pencil.b.norm1());
    let op = |x: &[C64]| {
        let mut y = pencil.b.matvec(x);
        fact.solve_in_place(&mut y);
        y
    };
    let mut start = vec![C64::new(1.0, 0.0); n];
    b_normalize(&pencil.b, &mut start);
    let mut kmax = (2 * m + 20).max(40).min(n);
    let mut best_residuals = Vec::new();
    for _attempt in 0..MAX_ATTEMPTS {
        let arn = arnoldi(&op, start.clone(), kmax);
        let k = arn.k;
        let (t, q) = hessenberg_schur(&arn.h, k)?;
        let ys = triangular_eigenvectors(&t, k);
        let mut ritz: Vec<(C64, Vec<C64>)> = (0..k)
            .filter(|&i| t[i * k + i].norm() > 0.0)
            .map(|i| {
                let theta = t[i * k + i];
                let z: Vec<C64> = (0..k).map(|r| (0..k).map(|c| q[r * k + c] * ys[i][c]).sum()).collect();
                let mut x = vec![zero(); n];
                for (zj, v) in z.iter().zip(&arn.basis) {
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi += zj * vi;
                    }
                }
                (sigma + theta.inv(), x)
            })
            .collect();
        ritz.sort_by(|a, b| (a.0 - sigma).norm().total_cmp(&(b.0 - sigma).norm()));
        ritz.truncate(m);
        let residuals: Vec<f64> = ritz.iter().map(|(l, x)| pair_residual(pencil, norms, *l, x)).collect();
        if ritz.len() == m && residuals.iter().all(|&r| r <= tol) {
            let mut values = Vec::with_capacity(m);
            let mut vectors = Vec::with_capacity(m);
            for (l, mut x) in ritz {
                b_normalize(&pencil.b, &mut x);
                values.push(l);
                vectors.push(x);
            }
            return Ok(Spectrum { sigma, values, vectors, residuals });
        }
        best_residuals = residuals;
        if kmax == n {
            break;
        }
        start = vec![zero(); n];
        for (_, x) in &ritz {
            let s = norm(x);
            for (si, xi) in start.iter_mut().zip(x) {
                *si += xi / s;
            }
        }
        if norm(&start) == 0.0 {
            start = vec![C64::new(1.0, 0.0); n];
        }
        kmax = (2 * kmax).min(n);
    }
    Err(Error::EigNotConverged { residuals: best_residuals })
}

/// Inverse of the mean of inverses.
pub fn mean_of_cluster(values: &[C64]) -> Result<C64> {
    if values.is_empty() || values.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::InvalidInput("cluster mean needs nonzero values".into()));
    }
    let s: C64 = values.iter().map(|z| z.inv()).sum();
    Ok((s / values.len() as f64).inv())
}

/// Indices of the `m` values nearest `target`, ties to the lower index.
pub fn select_cluster(values: &[C64], target: C64, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| (values[i] - target).norm().total_cmp(&(values[j] - target).norm()).then(i.cmp(&j)));
    idx.truncate(m);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::PencilMeta;

    fn diag_pencil(d: &[f64]) -> Pencil {
        let n = d.len();
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect();
        Pencil {
            a: CsrMatrix::from_triplets(n, &t),
            b: CsrMatrix::identity(n),
            meta: PencilMeta { p: 1, dim: 1, n },
            free: (0..n).collect(),
            n_total: n,
        }
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn factorization_examples() {
        let p = diag_pencil(&[1.0, 2.0]);
        let f = factorize_shifted(&p, re(0.0)).unwrap();
        let x = f.solve(&[re(1.0), re(2.0)]);
        assert!((x[0] - 1.0).norm() < 1e-15 && (x[1] - 1.0).norm() < 1e-15);
        assert!(matches!(factorize_shifted(&p, re(1.0)), Err(Error::SingularShift)));
    }

    #[test]
    fn diagonal_eigs() {
        let p = diag_pencil(&[1.0, 2.0, 3.0]);
        let s = eigs_near(&p, re(2.2), 1, DEFAULT_TOL).unwrap();
        assert!((s.values[0] - 2.0).norm() < 1e-12);
        let s = eigs_near(&p, re(2.2), 3, DEFAULT_TOL).unwrap();
        for (v, want) in s.values.iter().zip([2.0, 3.0, 1.0]) {
            assert!((v - want).norm() < 1e-12, "{v}");
        }
        assert!(s.residuals.iter().all(|&r| r <= DEFAULT_TOL));
    }

    #[test]
    fn cluster_mean_and_selection() {
        let l = C64::new(5.0, 6.0);
        assert!((mean_of_cluster(&[l, l, l]).unwrap() - l).norm() < 1e-14);
        assert!((mean_of_cluster(&[re(1.0), re(1.0 / 3.0)]).unwrap() - 0.5).norm() < 1e-15);
        assert_eq!(mean_of_cluster(&[re(2.0)]).unwrap(), re(2.0));
        assert!(mean_of_cluster(&[re(0.0)]).is_err());
        let v = [re(2.0), re(3.0), re(1.0)];
        assert_eq!(select_cluster(&v, re(2.2), 2), vec![0, 1]);
        assert_eq!(select_cluster(&v, re(2.2), 3).len(), 3);
        assert_eq!(select_cluster(&[re(1.0), re(3.0)], re(2.0), 1), vec![0]);
    }

    #[test]
    fn schur_of_jordan_like_block() {
        // Upper Hessenberg with known eigenvalues 1, 2, 3 after a similarity.
        let k = 3;
        let h = vec![re(1.0), re(5.0), re(-2.0), re(0.0), re(2.0), re(7.0), re(0.0), re(0.0), re(3.0)];
        let (t, q) = hessenberg_schur(&h, k).unwrap();
        let mut d: Vec<f64> = (0..k).map(|i| t[i * k + i].re).collect();
        d.sort_by(f64::total_cmp);
        assert!((d[0] - 1.0).abs() < 1e-13 && (d[2] - 3.0).abs() < 1e-13);
        // Q unitary.
        for i in 0..k {
            for j in 0..k {
                let s: C64 = (0..k).map(|r| q[r * k + i].conj() * q[r * k + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rcm_reduces_bandwidth_of_shuffled_path() {
        let n = 30;
        let perm: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((perm[i], perm[i], re(2.0)));
            if i + 1 < n {
                t.push((perm[i], perm[i + 1], re(-1.0)));
                t.push((perm[i + 1], perm[i], re(-1.0)));
            }
        }
        let m = CsrMatrix::from_triplets(n, &t);
        let order = reverse_cuthill_mckee(&m);
        let mut inv = vec![0; n];
        for (k, &p) in order.iter().enumerate() {
            inv[p] = k;
        }
        let bw = (0..n).flat_map(|i| m.row(i).map(move |(j, _)| (i, j))).map(|(i, j)| inv[i].abs_diff(inv[j])).max();
        assert_eq!(bw, Some(1));
    }
}
