//! Sparse symmetric positive definite solves for the Dirichlet Laplacian:
//! a banded Cholesky factorization (the workhorse, since lattice regions
//! ordered row by row have bandwidth ~ one row) and an IC(0)-preconditioned
//! conjugate gradient used as an independent cross-check.

use crate::error::{Error, Result};

/// Symmetric matrix in CSR form (both triangles stored).
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Rows given as (col, value) lists; columns are sorted here.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                col.push(c);
                val.push(v);
            }
            ptr.push(col.len());
        }
        Csr { n, ptr, col, val }
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| (self.ptr[i]..self.ptr[i + 1]).map(move |k| (i, k)))
            .map(|(i, k)| i.abs_diff(self.col[k]))
            .max()
            .unwrap_or(0)
    }

    /// max_i |(A x − b)_i|.
    pub fn residual_inf(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul(x, &mut y);
        y.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
    }
}

/// Lower-triangular band factor L with A = L Lᵀ; row i stores L[i][i−bw..=i].
#[derive(Clone, Debug)]
pub struct BandCholesky {
    pub n: usize,
    pub bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let (n, bw) = (a.n, a.bandwidth());
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // scatter the lower triangle
        for i in 0..n {
            for k in a.ptr[i]..a.ptr[i + 1] {
                let j = a.col[k];
                if j <= i {
                    l[i * w + (j + bw - i)] = a.val[k];
                }
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let j0 = j.saturating_sub(bw).max(i0);
                let mut s = l[i * w + (j + bw - i)];
                let (ri, rj) = (i * w + bw - i, j * w + bw - j);
                for k in j0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Numerical(format!("matrix not positive definite at row {i}")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }

    /// Solve for A⁻¹ e_j.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        e[j] = 1.0;
        self.solve(&e)
    }
}

/// Zero fill-in incomplete Cholesky, same sparsity as the lower triangle.
struct Ic0 {
    a: Csr,
    diag: Vec<usize>,
}

impl Ic0 {
    fn new(a: &Csr) -> Result<Self> {
        let mut f = a.clone();
        let n = f.n;
        let diag: Vec<usize> = (0..n)
            .map(|i| (f.ptr[i]..f.ptr[i + 1]).find(|&k| f.col[k] == i).ok_or_else(|| Error::Numerical("missing diagonal".into())))
            .collect::<Result<_>>()?;
        for i in 0..n {
            for kk in f.ptr[i]..diag[i] {
                let j = f.col[kk];
                // l_ij = (a_ij − Σ_{k<j} l_ik l_jk) / l_jj over the shared pattern
                let mut s = f.val[kk];
                for p in f.ptr[i]..kk {
                    let k = f.col[p];
                    if let Some(q) = (f.ptr[j]..diag[j]).find(|&q| f.col[q] == k) {
                        s -= f.val[p] * f.val[q];
                    }
                }
                f.val[kk] = s / f.val[diag[j]];
            }
            let mut s = f.val[diag[i]];
            for p in f.ptr[i]..diag[i] {
                s -= f.val[p] * f.val[p];
            }
            if s <= 0.0 {
                return Err(Error::Numerical("IC(0) breakdown".into()));
            }
            f.val[diag[i]] = s.sqrt();
        }
        Ok(Ic0 { a: f, diag })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let f = &self.a;
        let n = f.n;
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in f.ptr[i]..self.diag[i] {
                s -= f.val[p] * y[f.col[p]];
            }
            y[i] = s / f.val[self.diag[i]];
        }
        for i in (0..n).rev() {
            y[i] /= f.val[self.diag[i]];
            let yi = y[i];
            for p in f.ptr[i]..self.diag[i] {
                y[f.col[p]] -= f.val[p] * yi;
            }
        }
        y
    }
}

/// Preconditioned CG to relative residual `tol`; returns (x, iterations).
pub fn cg_ic0(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let pre = Ic0::new(a)?;
    let n = a.n;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut z = pre.apply(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= tol * bn {
            return Ok((x, it));
        }
        a.mul(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = pre.apply(&r);
        let rz2: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz2 / rz;
        rz = rz2;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!("CG did not converge in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    // 2D grid Laplacian 4I − A on an m×m block with Dirichlet outside
    fn grid(m: usize) -> Csr {
        let idx = |i: usize, j: usize| i * m + j;
        let rows = (0..m * m)
            .map(|v| {
                let (i, j) = (v / m, v % m);
                let mut r = vec![(v, 4.0)];
                if i > 0 {
                    r.push((idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    r.push((idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    r.push((idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    r.push((idx(i, j + 1), -1.0));
                }
                r
            })
            .collect();
        Csr::from_rows(rows)
    }

    #[test]
    fn band_cholesky_and_cg_agree() {
        let a = grid(17);
        assert_eq!(a.bandwidth(), 17);
        let ch = BandCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..a.n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x = ch.solve(&b);
        assert!(a.residual_inf(&x, &b) < 1e-12);
        let (y, it) = cg_ic0(&a, &b, 1e-13, 500).unwrap();
        assert!(it < 100);
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    #[test]
    fn one_by_one_green() {
        // single free site: (4I − A)⁻¹ = 1/4
        let a = Csr::from_rows(vec![vec![(0, 4.0)]]);
        let ch = BandCholesky::factor(&a).unwrap();
        assert_eq!(ch.column(0), vec![0.25]);
    }
}
