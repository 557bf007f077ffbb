//! Small dense complex linear algebra (row-major), for systems of a handful of unknowns.

use crate::cplx::C64;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// LU with partial pivoting. Returns `None` on an exactly zero pivot.
    pub fn lu(&self) -> Option<DenseLu> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
                .unwrap();
            if a[p * n + k].norm() == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a[k * n + k];
            for i in (k + 1)..n {
                let l = a[i * n + k] / piv;
                a[i * n + k] = l;
                for j in (k + 1)..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= l * u;
                }
            }
        }
        Some(DenseLu { n, lu: a, perm, sign })
    }

    pub fn det(&self) -> C64 {
        match self.lu() {
            Some(lu) => lu.det(),
            None => C64::new(0.0, 0.0),
        }
    }

    /// 1-norm condition number; infinite when singular.
    pub fn cond1(&self) -> f64 {
        let Some(lu) = self.lu() else {
            return f64::INFINITY;
        };
        let n = self.n;
        let mut inv_norm: f64 = 0.0;
        for j in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            let col = lu.solve(&e);
            inv_norm = inv_norm.max(col.iter().map(|z| z.norm()).sum());
        }
        self.norm1() * inv_norm
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    sign: f64,
}

impl DenseLu {
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    pub fn det(&self) -> C64 {
        (0..self.n).map(|i| self.lu[i * self.n + i]).product::<C64>() * self.sign
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_det() {
        let m = DenseMatrix::from_fn(3, |i, j| C64::new((i * 3 + j) as f64 + if i == j { 5.0 } else { 0.0 }, (i as f64) - (j as f64)));
        let x = vec![C64::new(1.0, 2.0), C64::new(-1.0, 0.5), C64::new(0.25, -3.0)];
        let b = m.matvec(&x);
        let y = m.lu().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-13);
        }
        assert_eq!(DenseMatrix::identity(4).det(), C64::new(1.0, 0.0));
        let mut sing = DenseMatrix::identity(2);
        sing[(1, 1)] = C64::new(0.0, 0.0);
        assert!(sing.lu().is_none());
        assert!(sing.cond1().is_infinite());
    }
}
