#![allow(dead_code)]

use defbench::dense::DenseMatrix;
use defbench::fem::{Pencil, PencilMeta};
use defbench::sparse::CsrMatrix;
use defbench::C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn dense_pencil(a: &DenseMatrix, b: &DenseMatrix) -> Pencil {
    let n = a.n;
    Pencil {
        a: CsrMatrix::from_dense(a),
        b: CsrMatrix::from_dense(b),
        meta: PencilMeta { p: 1, dim: 1, n },
        free: (0..n).collect(),
        n_total: n,
    }
}

/// Random complex symmetric `A` and real SPD `B`.
pub fn random_pencil(rng: &mut ChaCha8Rng, n: usize) -> (DenseMatrix, DenseMatrix) {
    let mut a = DenseMatrix::zeros(n);
    let mut g = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        }
        for j in i..n {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            a[(i, j)] = z;
            a[(j, i)] = z;
        }
    }
    let b = DenseMatrix::from_fn(n, |i, j| {
        let s: C64 = (0..n).map(|k| g[(k, i)] * g[(k, j)]).sum();
        if i == j {
            s + C64::new(n as f64, 0.0)
        } else {
            s
        }
    });
    (a, b)
}

/// All roots of `det(A − λB)` by Newton with Maehly deflation.
pub fn dense_eigenvalues(a: &DenseMatrix, b: &DenseMatrix) -> Vec<C64> {
    let n = a.n;
    let mut roots: Vec<C64> = Vec::with_capacity(n);
    let mut start = C64::new(0.1, 0.2);
    while roots.len() < n {
        let mut lam = start;
        for _ in 0..500 {
            let shifted = DenseMatrix::from_fn(n, |i, j| a[(i, j)] - lam * b[(i, j)]);
            let lu = shifted.lu().expect("shift hit an eigenvalue");
            let mut tr = C64::new(0.0, 0.0);
            for j in 0..n {
                let col: Vec<C64> = (0..n).map(|i| b[(i, j)]).collect();
                tr += lu.solve(&col)[j];
            }
            let deflation: C64 = roots.iter().map(|r| (lam - r).inv()).sum();
            let step = (-tr - deflation).inv();
            lam -= step;
            if step.norm() <= 1e-15 * (1.0 + lam.norm()) {
                break;
            }
        }
        roots.push(lam);
        start = lam + C64::new(0.05, -0.03);
    }
    roots
}

/// Largest distance from an element of `got` to its nearest element of `want`, relative.
pub fn match_sets(got: &[C64], want: &[C64]) -> f64 {
    let mut pool = want.to_vec();
    let mut worst = 0.0f64;
    for g in got {
        let (k, d) = pool
            .iter()
            .enumerate()
            .map(|(k, w)| (k, rel(*g, *w)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("sets of equal size");
        pool.swap_remove(k);
        worst = worst.max(d);
    }
    worst
}
