//! Small dense linear algebra: a row-major matrix type, a cyclic Jacobi
//! eigensolver for symmetric matrices, LU solves, the continuous Lyapunov
//! equation and the matrix exponential.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidParameter {
                name: "rows",
                reason: "ragged rows".into(),
            });
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_matvec shape mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&self) -> Self {
        self.add(&self.transpose()).scale(0.5)
    }

    /// Sub-block `[r0, r0+nr) x [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        let mut b = Self::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                b[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        b
    }

    /// Assemble a 2x2 block matrix from square blocks of equal size.
    pub fn from_blocks(tl: &Mat, tr: &Mat, bl: &Mat, br: &Mat) -> Self {
        let n = tl.rows;
        let mut m = Self::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = tl[(i, j)];
                m[(i, n + j)] = tr[(i, j)];
                m[(n + i, j)] = bl[(i, j)];
                m[(n + i, n + j)] = br[(i, j)];
            }
        }
        m
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// Spectral norm, computed from the eigenvalues of `AᵀA`.
    pub fn op_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        if self.is_square() && self.asymmetry() == 0.0 {
            let eig = symmetric_eigen(self).expect("symmetric input");
            return eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        let gram = self.transpose().matmul(self);
        let eig = symmetric_eigen(&gram.symmetrize()).expect("gram matrix is symmetric");
        eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
/// matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymmetricEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi iteration, run until the off-diagonal Frobenius norm drops
/// below `1e-12` relative to the input norm.
pub fn symmetric_eigen(a: &Mat) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::Dimension {
            expected: a.rows,
            got: a.cols,
        });
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = a.asymmetry();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let n = a.rows;
    let mut m = a.symmetrize();
    let mut v = Mat::identity(n);
    let tol = 1e-12 * a.frobenius().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of the symmetric 2x2 matrix `[[a, b], [b, c]]` in closed form.
pub fn symmetric_eigs_2x2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// LU factorisation with partial pivoting, stored in place.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.rows,
                got: a.cols,
            });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= 1e-14 * scale {
                return Err(Error::Singular(format!(
                    "pivot {pval:.3e} at column {k} of a {n}x{n} system"
                )));
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    lu.data.swap(piv * n + j, k * n + j);
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                if f == 0.0 {
                    continue;
                }
                lu[(i, k)] = f;
                let (upper, lower) = lu.data.split_at_mut(i * n);
                let krow = &upper[k * n + k + 1..k * n + n];
                let irow = &mut lower[k + 1..n];
                for (x, y) in irow.iter_mut().zip(krow) {
                    *x -= f * y;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Lu::new(a)?.solve(b))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    let lu = Lu::new(a)?;
    let n = a.rows;
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Solution of the continuous Lyapunov equation `BᵀK + KB = C` together with
/// its residual `‖BᵀK + KB − C‖_F`.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub k: Mat,
    pub residual: f64,
}

/// Solve `BᵀK + KB = C` for symmetric `C` by vectorising the upper triangle
/// of `K` into a dense linear system.
pub fn solve_lyapunov(b: &Mat, c: &Mat) -> Result<LyapunovSolution> {
    let n = b.rows;
    if !b.is_square() || c.rows != n || c.cols != n {
        return Err(Error::Dimension {
            expected: n,
            got: c.rows,
        });
    }
    let scale = c.max_abs().max(f64::MIN_POSITIVE);
    if c.asymmetry() > 1e-12 * scale {
        return Err(Error::NotSymmetric(c.asymmetry()));
    }
    let idx = |i: usize, j: usize| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * n - a * (a + 1) / 2 + b
    };
    let m = n * (n + 1) / 2;
    let mut sys = Mat::zeros(m, m);
    let mut rhs = vec![0.0; m];
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            rhs[row] = c[(i, j)];
            // (BᵀK)_ij = Σ_k B_ki K_kj, (KB)_ij = Σ_k K_ik B_kj
            for k in 0..n {
                sys[(row, idx(k, j))] += b[(k, i)];
                sys[(row, idx(i, k))] += b[(k, j)];
            }
        }
    }
    let sol = Lu::new(&sys).map_err(|_| {
        Error::Singular(format!(
            "Lyapunov operator is singular; drift matrix spectrum must avoid λ_i + λ_j = 0 (diag of B: {:?})",
            (0..n).map(|i| b[(i, i)]).collect::<Vec<_>>()
        ))
    })?;
    let x = sol.solve(&rhs);
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = x[idx(i, j)];
        }
    }
    let residual = lyapunov_residual(b, &k, c);
    Ok(LyapunovSolution { k, residual })
}

pub fn lyapunov_residual(b: &Mat, k: &Mat, c: &Mat) -> f64 {
    b.transpose().matmul(k).add(&k.matmul(b)).sub(c).frobenius()
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor
/// polynomial.
pub fn expm(a: &Mat) -> Mat {
    let n = a.rows;
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5_f64.powi(s));
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..=18 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum = sum.add(&term);
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_identity_and_diagonal() {
        let e = symmetric_eigen(&Mat::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = symmetric_eigen(&Mat::diag(&[5.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 5.0]);
    }

    #[test]
    fn jacobi_rejects_asymmetric() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(symmetric_eigen(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, -2.0, 0.5],
            vec![1.0, 3.0, 0.0, 1.5],
            vec![-2.0, 0.0, 1.0, -1.0],
            vec![0.5, 1.5, -1.0, 2.0],
        ])
        .unwrap();
        let e = symmetric_eigen(&a).unwrap();
        let back = e
            .vectors
            .matmul(&Mat::diag(&e.values))
            .matmul(&e.vectors.transpose());
        assert!(back.sub(&a).max_abs() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lu_solves_small_system() {
        let a = Mat::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_negative_identity() {
        let b = Mat::identity(2).scale(-1.0);
        let c = Mat::identity(2).scale(-2.0);
        let sol = solve_lyapunov(&b, &c).unwrap();
        assert!(sol.k.sub(&Mat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal() {
        let e = expm(&Mat::diag(&[1.0, -2.0]));
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-13);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn op_norm_of_rotation_scaled() {
        let a = Mat::from_rows(&[vec![0.0, -3.0], vec![3.0, 0.0]]).unwrap();
        assert!((a.op_norm() - 3.0).abs() < 1e-12);
    }
}
