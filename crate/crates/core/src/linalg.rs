//! Dense matrix/vector kernels sized for this problem class (blocks up to a
//! few thousand rows): row-major storage, Cholesky and LU solves, and a
//! cyclic Jacobi symmetric eigensolver used for operator norms and
//! eigenvalue certification.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatSerde", into = "MatSerde")]
pub struct Mat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

/// Wire form: a list of rows.
#[derive(Serialize, Deserialize)]
struct MatSerde(Vec<Vec<f64>>);

impl From<Mat> for MatSerde {
    fn from(m: Mat) -> Self {
        MatSerde((0..m.nrows()).map(|i| m.row(i).to_vec()).collect())
    }
}

impl TryFrom<MatSerde> for Mat {
    type Error = String;
    fn try_from(w: MatSerde) -> std::result::Result<Self, String> {
        let nrows = w.0.len();
        if nrows == 0 {
            return Ok(Mat::zeros(0, 0));
        }
        let ncols = w.0[0].len();
        if w.0.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(Mat { nrows, ncols, data: w.0.into_iter().flatten().collect() })
    }
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows > 0 { rows[0].len() } else { 0 };
        let mut m = Mat::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols, "ragged rows");
            m.data[i * ncols..(i + 1) * ncols].copy_from_slice(r);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for j in 0..other.ncols {
                    out_row[j] += a * orow[j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, v.len());
        (0..self.nrows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, k: f64) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= k;
        }
        out
    }

    /// Copies `block` into `self` with upper-left corner at `(i0, j0)`.
    pub fn set_block(&mut self, i0: usize, j0: usize, block: &Mat) {
        for i in 0..block.nrows {
            for j in 0..block.ncols {
                self[(i0 + i, j0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, i0: usize, j0: usize, nrows: usize, ncols: usize) -> Mat {
        Mat::from_fn(nrows, ncols, |i, j| self[(i0 + i, j0 + j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest singular value, computed as sqrt of the top eigenvalue of AᵀA
    /// by the Jacobi eigensolver.
    pub fn op_norm(&self) -> f64 {
        let ata = self.transpose().matmul(self);
        let (evals, _) = sym_eigen(&ata);
        evals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn symmetrize(&self) -> Mat {
        assert!(self.is_square());
        Mat::from_fn(self.nrows, self.ncols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows {
            write!(f, "  ")?;
            for j in 0..self.ncols {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cholesky factor L (lower) of a symmetric positive definite matrix.
/// Returns `None` on a non-positive pivot.
pub fn cholesky(a: &Mat) -> Option<Mat> {
    assert!(a.is_square());
    let n = a.nrows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (i * n, j * n);
            // s -= sum_k L[i,k] L[j,k]
            let li = &l.data[ri..ri + j];
            let lj = &l.data[rj..rj + j];
            s -= dot(li, lj);
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solves L Lᵀ x = b given the Cholesky factor L.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = b.to_vec();
    // forward
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &x[..i]);
        x[i] = (x[i] - s) / l[(i, i)];
    }
    // backward with Lᵀ
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves A x = b by LU with partial pivoting. `None` if singular.
pub fn lu_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    assert!(a.is_square());
    let n = a.nrows();
    assert_eq!(b.len(), n);
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(piv[k], k)].abs();
        for i in (k + 1)..n {
            let v = lu[(piv[i], k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < 1e-300 {
            return None;
        }
        piv.swap(k, p);
        let pk = piv[k];
        let akk = lu[(pk, k)];
        for i in (k + 1)..n {
            let pi = piv[i];
            let f = lu[(pi, k)] / akk;
            lu[(pi, k)] = f;
            for j in (k + 1)..n {
                let v = lu[(pk, j)];
                lu[(pi, j)] -= f * v;
            }
            x[pi] -= f * x[pk];
        }
    }
    let mut out = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = x[piv[k]];
        for j in (k + 1)..n {
            s -= lu[(piv[k], j)] * out[j];
        }
        out[k] = s / lu[(piv[k], k)];
    }
    Some(out)
}

/// Inverse via LU column solves. `None` if singular.
pub fn inverse(a: &Mat) -> Option<Mat> {
    assert!(a.is_square());
    let n = a.nrows();
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lu_solve(a, &e)?;
        e[j] = 0.0;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Some(inv)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the matching eigenvector
/// columns. Convergence is quadratic; 30 sweeps is far beyond what the
/// block sizes here require.
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert!(a.is_square());
    let n = a.nrows();
    let mut m = a.symmetrize();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return (m.diagonal(), v);
    }
    for _sweep in 0..30 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + m.frobenius_norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
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
    let diag = m.diagonal();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let evecs = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    (evals, evecs)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    sym_eigen(a).0[0]
}

/// Symmetric positive (semi)definite square root via eigendecomposition.
/// Negative eigenvalues below `-1e-10` are rejected with `None`; small
/// negative values from roundoff are clamped to zero.
pub fn spd_sqrt(a: &Mat) -> Option<Mat> {
    let (evals, vecs) = sym_eigen(a);
    if evals.iter().any(|&e| e < -1e-10) {
        return None;
    }
    let n = a.nrows();
    let d = Mat::diag(&evals.iter().map(|&e| e.max(0.0).sqrt()).collect::<Vec<_>>());
    Some(vecs.matmul(&d).matmul(&vecs.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Mat::from_rows(&[&[4.0, 2.0, 0.6], &[2.0, 5.0, 1.0], &[0.6, 1.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let b = vec![1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, &b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 8;
            let q = random_orthogonal(n, &mut rng);
            let evals: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
            let a = q.matmul(&Mat::diag(&evals)).matmul(&q.transpose());
            let (got, vecs) = sym_eigen(&a);
            for (g, e) in got.iter().zip(&evals) {
                assert!((g - e).abs() < 1e-10, "eigenvalue {g} vs {e}");
            }
            // residual A v = lambda v
            for j in 0..n {
                let v: Vec<f64> = (0..n).map(|i| vecs[(i, j)]).collect();
                let av = a.matvec(&v);
                for i in 0..n {
                    assert!((av[i] - got[j] * v[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn lu_solve_matches_cholesky_on_spd() {
        let a = Mat::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]);
        let b = vec![1.0, 2.0];
        let x1 = lu_solve(&a, &b).unwrap();
        let x2 = cholesky_solve(&cholesky(&a).unwrap(), &b);
        assert!((x1[0] - x2[0]).abs() < 1e-12 && (x1[1] - x2[1]).abs() < 1e-12);
    }

    #[test]
    fn op_norm_of_scaled_identity() {
        let a = Mat::identity(5).scale(-3.0);
        assert!((a.op_norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spd_sqrt_squares_back() {
        let a = Mat::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let r = spd_sqrt(&a).unwrap();
        assert!(r.matmul(&r).sub(&a).max_abs() < 1e-12);
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        // Gram-Schmidt on a random Gaussian matrix
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(rand_distr_standard())).collect())
            .collect();
        for j in 0..n {
            for k in 0..j {
                let proj = dot(&cols[j], &cols[k]);
                let ck = cols[k].clone();
                axpy(-proj, &ck, &mut cols[j]);
            }
            let nrm = norm2(&cols[j]);
            for v in cols[j].iter_mut() {
                *v /= nrm;
            }
        }
        Mat::from_fn(n, n, |i, j| cols[j][i])
    }

    fn rand_distr_standard() -> rand::distributions::Uniform<f64> {
        rand::distributions::Uniform::new(-1.0, 1.0)
    }
}
