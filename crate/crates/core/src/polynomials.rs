//! Univariate polynomials with dense real coefficients (ascending degree)
//! and matrices of such polynomials. Degrees in this artifact stay small
//! (at most 8 after multiplier products), so dense storage is the right
//! call.

use crate::linalg::Mat;
use serde::{Deserialize, Serialize};

/// Absolute tolerance for coefficient comparisons and trimming.
pub const COEFF_TOL: f64 = 1e-12;

/// Real polynomial, `coeffs[k]` multiplying `x^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// Monomial c·x^k.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Poly::new(coeffs)
    }

    /// The interval polynomial x(x - l), nonpositive exactly on [0, l].
    pub fn interval(l: f64) -> Self {
        Poly::new(vec![0.0, -l, 1.0])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of x^k (0 beyond the stored degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    fn trim(&mut self) {
        while let Some(&c) = self.coeffs.last() {
            if c.abs() <= COEFF_TOL {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (i as f64 + 1.0) * c)
                .collect(),
        )
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// p(a·x + b), used to map coefficients between the unit interval and
    /// a physical interval.
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly {
        let mut out = Poly::zero();
        let lin = Poly::new(vec![b, a]);
        let mut pw = Poly::constant(1.0);
        for &c in &self.coeffs {
            out = out.add(&pw.scale(c));
            pw = pw.mul(&lin);
        }
        out
    }
}

/// Rectangular matrix with polynomial entries.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PolyMatrix { rows, cols, entries: vec![Poly::zero(); rows * cols] }
    }

    pub fn from_diag(diag: &[Poly]) -> Self {
        let n = diag.len();
        let mut m = PolyMatrix::zeros(n, n);
        for (i, p) in diag.iter().enumerate() {
            m.set(i, i, p.clone());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|p| if p.is_zero() { 0 } else { p.degree() }).max().unwrap_or(0)
    }

    /// Entrywise Horner evaluation to a dense matrix.
    pub fn eval(&self, x: f64) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = self.get(i, j).sub(self.get(j, i));
                if d.coeffs().iter().any(|c| c.abs() > tol) {
                    return false;
                }
            }
        }
        true
    }
}
