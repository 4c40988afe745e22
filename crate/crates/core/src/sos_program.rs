//! Compilation of the stabilization conditions into a standard-form conic
//! program.
//!
//! The program is `min <c,x>  s.t.  A x = b,  x in K`, with K an ordered
//! product of free, nonnegative and PSD blocks. PSD blocks are stored in
//! scaled-vector (svec) coordinates: upper triangle row by row, off-diagonal
//! entries multiplied by sqrt(2), so that Euclidean inner products of svec
//! vectors equal trace inner products of the matrices they represent.
//!
//! Sum-of-squares constraints are Gram parametrizations: a polynomial
//! equality between affine expressions in the decision variables and the
//! quadratic form z(x)' W z(x) over the monomial basis z, with W a PSD
//! block. The matrix version uses the basis I_dim (x) z(x).

use crate::beam_model::BeamModel;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::polynomials::Poly;
use serde::{Deserialize, Serialize};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// One cone block of the decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeBlock {
    Free(usize),
    Nonneg(usize),
    /// Matrix order n; occupies n(n+1)/2 svec coordinates.
    Psd(usize),
}

impl ConeBlock {
    /// Number of decision coordinates the block occupies.
    pub fn len(&self) -> usize {
        match *self {
            ConeBlock::Free(n) | ConeBlock::Nonneg(n) => n,
            ConeBlock::Psd(n) => n * (n + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// svec coordinate of matrix entry (p, q), p <= q, in an order-n block.
pub fn svec_index(p: usize, q: usize, n: usize) -> usize {
    debug_assert!(p <= q && q < n);
    p * n - p * (p - 1) / 2 + (q - p)
}

pub fn svec_of_mat(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for p in 0..n {
        out.push(m[(p, p)]);
        for q in (p + 1)..n {
            out.push(m[(p, q)] * SQRT2);
        }
    }
    out
}

pub fn mat_of_svec(v: &[f64], n: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    let mut k = 0;
    for p in 0..n {
        m[(p, p)] = v[k];
        k += 1;
        for q in (p + 1)..n {
            m[(p, q)] = v[k] / SQRT2;
            m[(q, p)] = m[(p, q)];
            k += 1;
        }
    }
    m
}

/// Standard-form conic program with sparse equality rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicProgram {
    /// objective vector c (minimized)
    pub objective: Vec<f64>,
    /// sparse rows of A
    pub rows: Vec<Vec<(usize, f64)>>,
    /// right-hand side b
    pub rhs: Vec<f64>,
    /// ordered cone blocks covering the decision vector exactly
    pub cones: Vec<ConeBlock>,
    /// one label per cone block (which Gram / which constraint)
    pub block_names: Vec<String>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.cones.iter().map(|c| c.len()).sum()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.cones.len());
        let mut k = 0;
        for c in &self.cones {
            offs.push(k);
            k += c.len();
        }
        offs
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.len() != n {
            return Err(Error::Validation(format!(
                "objective length {} does not match decision length {n}",
                self.objective.len()
            )));
        }
        if self.rhs.len() != self.rows.len() {
            return Err(Error::Validation("rhs/rows length mismatch".into()));
        }
        if self.block_names.len() != self.cones.len() {
            return Err(Error::Validation("block_names/cones length mismatch".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= n {
                    return Err(Error::Validation(format!("row {r} references variable {j} >= {n}")));
                }
                if !v.is_finite() {
                    return Err(Error::Validation(format!("row {r} has non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Residuals A x - b for a candidate decision vector.
    pub fn equality_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| row.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - b)
            .collect()
    }
}

/// Linear expression over decision slots plus a constant.
#[derive(Clone, Debug, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { terms: vec![], constant: c }
    }

    pub fn var(slot: usize) -> Self {
        AffineExpr { terms: vec![(slot, 1.0)], constant: 0.0 }
    }

    pub fn scaled_var(slot: usize, coeff: f64) -> Self {
        AffineExpr { terms: vec![(slot, coeff)], constant: 0.0 }
    }

    pub fn push(&mut self, slot: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((slot, coeff));
        }
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.terms.extend_from_slice(&other.terms);
        out.constant += other.constant;
        out.normalize();
        out
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        let mut n = self.clone();
        n.normalize();
        n.constant.abs() <= tol && n.terms.iter().all(|&(_, v)| v.abs() <= tol)
    }

    /// Merges duplicate slots and drops zero coefficients.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(j, v) in &self.terms {
            if let Some(last) = merged.last_mut() {
                if last.0 == j {
                    last.1 += v;
                    continue;
                }
            }
            merged.push((j, v));
        }
        merged.retain(|&(_, v)| v != 0.0);
        self.terms = merged;
    }

    fn differs_from(&self, other: &AffineExpr, tol: f64) -> bool {
        let mut d = self.clone();
        for &(j, v) in &other.terms {
            d.push(j, -v);
        }
        d.constant -= other.constant;
        !d.is_zero(tol)
    }
}

/// Polynomial whose coefficients are affine expressions in decision slots.
#[derive(Clone, Debug, Default)]
pub struct AffinePoly {
    pub coeffs: Vec<AffineExpr>,
}

impl AffinePoly {
    pub fn zero() -> Self {
        AffinePoly { coeffs: vec![] }
    }

    pub fn from_poly(p: &Poly) -> Self {
        AffinePoly { coeffs: p.coeffs().iter().map(|&c| AffineExpr::constant(c)).collect() }
    }

    pub fn coeff(&self, k: usize) -> AffineExpr {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn coeff_mut(&mut self, k: usize) -> &mut AffineExpr {
        if self.coeffs.len() <= k {
            self.coeffs.resize_with(k + 1, AffineExpr::default);
        }
        &mut self.coeffs[k]
    }

    pub fn add(&self, other: &AffinePoly) -> AffinePoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        AffinePoly { coeffs: (0..n).map(|k| self.coeff(k).add(&other.coeff(k))).collect() }
    }
}

/// Reference to a PSD Gram block created by one of the SOS helpers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GramRef {
    pub block_index: usize,
    pub offset: usize,
    /// matrix order of the block
    pub order: usize,
    /// for SOS Grams: dimension of the vector part (1 for scalar SOS)
    pub vec_dim: usize,
}

/// Incremental builder for [`ConicProgram`].
#[derive(Default)]
pub struct ProgramBuilder {
    cones: Vec<ConeBlock>,
    names: Vec<String>,
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    obj: Vec<(usize, f64)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a cone block, returning its offset in the decision vector.
    pub fn add_block(&mut self, block: ConeBlock, name: impl Into<String>) -> usize {
        let off = self.n;
        self.n += block.len();
        self.cones.push(block);
        self.names.push(name.into());
        off
    }

    pub fn add_row(&mut self, mut terms: Vec<(usize, f64)>, rhs: f64) {
        terms.retain(|&(_, v)| v != 0.0);
        self.rows.push(terms);
        self.rhs.push(rhs);
    }

    /// Adds the equality `expr == 0` (the constant moves to the rhs).
    pub fn add_equality(&mut self, mut expr: AffineExpr) {
        expr.normalize();
        self.add_row(expr.terms, -expr.constant);
    }

    pub fn set_objective_term(&mut self, slot: usize, coeff: f64) {
        self.obj.push((slot, coeff));
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Gram parametrization of a scalar SOS constraint: `p(x)` must equal
    /// `z(x)' W z(x)` with `z = (1, x, ..., x^(degree/2))` and `W` PSD.
    pub fn scalar_sos_gram(&mut self, p: &AffinePoly, degree: usize, name: &str) -> Result<GramRef> {
        if degree % 2 != 0 {
            return Err(Error::Validation(format!(
                "scalar SOS target degree must be even, got {degree}"
            )));
        }
        if p.coeffs.len() > degree + 1 {
            let extra = p.coeffs[degree + 1..].iter().any(|e| !e.is_zero(0.0));
            if extra {
                return Err(Error::Validation(format!(
                    "polynomial degree exceeds SOS target degree {degree}"
                )));
            }
        }
        let m = degree / 2;
        let order = m + 1;
        let off = self.add_block(ConeBlock::Psd(order), name);
        for k in 0..=degree {
            let mut expr = p.coeff(k);
            add_gram_convolution(&mut expr, off, order, k, -1.0);
            self.add_equality(expr);
        }
        Ok(GramRef { block_index: self.cones.len() - 1, offset: off, order, vec_dim: 1 })
    }

    /// Gram parametrization of a matrix SOS constraint on a symmetric
    /// `dim x dim` polynomial matrix of the given even degree. The Gram
    /// basis is ordered monomial-major: coordinate `a*dim + i` carries
    /// `x^a e_i`.
    pub fn matrix_sos_gram(
        &mut self,
        entries: &[Vec<AffinePoly>],
        dim: usize,
        degree: usize,
        name: &str,
    ) -> Result<GramRef> {
        if degree % 2 != 0 {
            return Err(Error::Validation(format!(
                "matrix SOS target degree must be even, got {degree}"
            )));
        }
        if entries.len() != dim || entries.iter().any(|r| r.len() != dim) {
            return Err(Error::Validation("matrix SOS entries must be dim x dim".into()));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let n = entries[i][j].coeffs.len().max(entries[j][i].coeffs.len());
                for k in 0..n {
                    if entries[i][j].coeff(k).differs_from(&entries[j][i].coeff(k), 1e-12) {
                        return Err(Error::Validation(format!(
                            "matrix SOS input is not symmetric at entry ({i},{j}), coefficient {k}"
                        )));
                    }
                }
            }
        }
        let m = degree / 2;
        let order = dim * (m + 1);
        let off = self.add_block(ConeBlock::Psd(order), name);
        for i in 0..dim {
            for j in i..dim {
                for k in 0..=degree {
                    let mut expr = entries[i][j].coeff(k);
                    // minus sum over ordered monomial pairs (a, b), a+b = k,
                    // of W[(a,i),(b,j)]
                    for a in 0..=m {
                        if k < a || k - a > m {
                            continue;
                        }
                        let b = k - a;
                        let (p, q) = (a * dim + i, b * dim + j);
                        let (p, q) = if p <= q { (p, q) } else { (q, p) };
                        let w = if p == q { 1.0 } else { 1.0 / SQRT2 };
                        expr.push(off + svec_index(p, q, order), -w);
                    }
                    self.add_equality(expr);
                }
            }
        }
        Ok(GramRef { block_index: self.cones.len() - 1, offset: off, order, vec_dim: dim })
    }

    pub fn build(self) -> ConicProgram {
        let mut objective = vec![0.0; self.n];
        for (j, v) in self.obj {
            objective[j] += v;
        }
        ConicProgram {
            objective,
            rows: self.rows,
            rhs: self.rhs,
            cones: self.cones,
            block_names: self.names,
        }
    }
}

/// Adds `scale * coeff_k(z' W z)` to `expr`, where W is the PSD block at
/// `off` of the given order and z is the monomial basis.
fn add_gram_convolution(expr: &mut AffineExpr, off: usize, order: usize, k: usize, scale: f64) {
    for a in 0..order {
        if k < a || k - a >= order {
            continue;
        }
        let b = k - a;
        if a > b {
            continue;
        }
        let w = if a == b { 1.0 } else { 2.0 / SQRT2 };
        expr.push(off + svec_index(a, b, order), scale * w);
    }
}

/// Where each named decision group lives inside the assembled program.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosDecisionLayout {
    pub degree_q: usize,
    pub degree_s: usize,
    /// degree of the compiled polynomial constraints
    pub constraint_degree: usize,
    pub gamma: f64,
    pub nu: f64,
    pub eps1: f64,
    pub length: f64,
    /// q_i coefficient k (in unit-interval coordinates) lives at
    /// `q0 + i*(degree_q+1) + k`
    pub q0: usize,
    /// kappa_tilde entry (r, c) lives at `kt0 + 6r + c`
    pub kt0: usize,
    pub beta: usize,
    pub gram_decay: GramRef,
    pub gram_q_lower: Vec<GramRef>,
    pub gram_q_upper: Vec<GramRef>,
    pub gram_s: Vec<GramRef>,
    /// block index of the boundary Schur block
    pub boundary_block: usize,
    /// offset of the boundary Schur block
    pub boundary_offset: usize,
    /// offset of the nonnegative slack block
    pub slack_offset: usize,
}

impl SosDecisionLayout {
    pub fn q_coeff(&self, i: usize, k: usize) -> usize {
        self.q0 + i * (self.degree_q + 1) + k
    }

    pub fn kappa_tilde(&self, r: usize, c: usize) -> usize {
        self.kt0 + 6 * r + c
    }
}

/// A feasible decision of the stabilization program, with polynomials in
/// physical x-coordinates on [0, length].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub q: Vec<Poly>,
    pub kappa_tilde: Mat,
    pub beta: f64,
    pub s1: Poly,
    pub s2: Poly,
    pub s3: Poly,
    pub gamma: f64,
    pub nu: f64,
    pub degree_q: usize,
    pub degree_s: usize,
    pub length: f64,
}

impl Certificate {
    /// Q(x) as a diagonal 12x12 polynomial matrix.
    pub fn q_matrix(&self) -> crate::polynomials::PolyMatrix {
        crate::polynomials::PolyMatrix::from_diag(&self.q)
    }

    /// Q_-(x) diagonal (first six weights).
    pub fn q_minus_at(&self, x: f64) -> Vec<f64> {
        (0..6).map(|i| self.q[i].eval(x)).collect()
    }

    /// Q_+(x) diagonal (last six weights).
    pub fn q_plus_at(&self, x: f64) -> Vec<f64> {
        (6..12).map(|i| self.q[i].eval(x)).collect()
    }

    /// S(x) = -Q'(x) Dfull + Q(x) B + B' Q(x).
    pub fn dissipation_matrix(&self, model: &BeamModel, x: f64) -> Mat {
        let qx = Mat::diag(&self.q.iter().map(|p| p.eval(x)).collect::<Vec<_>>());
        let qpx = Mat::diag(&self.q.iter().map(|p| p.derivative().eval(x)).collect::<Vec<_>>());
        qpx.matmul(&model.dfull)
            .scale(-1.0)
            .add(&qx.matmul(&model.b))
            .add(&model.b.transpose().matmul(&qx))
    }
}

/// Compiles the decay-maximization program at fixed eigenvalue bounds
/// (gamma, nu):
///
///   max beta
///   s.t. S(x) - beta I + s1(x) Il(x) I  matrix-SOS,
///        q_{i+6}(l) >= q_i(l),
///        [[I6, kt],[kt', Q_-(0) D]] PSD,
///        q_i(x) - gamma + s2(x) Il(x)  SOS  (12 scalar constraints),
///        nu - q_i(x) + s3(x) Il(x)     SOS  (12 scalar constraints),
///        beta >= eps1,  s1, s2, s3 SOS,
///
/// with S = -Q' Dfull + Q B + B' Q and Il(x) = x(x - l). Assembly happens
/// in unit-interval coordinates t = x/l (Dfull scales by 1/l); the
/// extraction maps coefficients back.
pub fn assemble_roa_sdp(
    model: &BeamModel,
    gamma: f64,
    nu: f64,
    degree_q: usize,
    degree_s: usize,
    eps1: f64,
) -> Result<(ConicProgram, SosDecisionLayout)> {
    if !(gamma > 0.0) || !gamma.is_finite() || !nu.is_finite() {
        return Err(Error::Validation(format!(
            "eigenvalue bounds must be positive, got gamma={gamma}"
        )));
    }
    if gamma > nu {
        return Err(Error::Validation(format!(
            "eigenvalue bounds require gamma <= nu, got gamma={gamma}, nu={nu}"
        )));
    }
    if degree_q == 0 {
        return Err(Error::Validation("degree_q must be at least 1".into()));
    }
    let degree_s = degree_s + degree_s % 2; // Gram targets are even
    let nq = degree_q + 1;
    let mut constraint_degree = degree_q.max(degree_s + 2);
    constraint_degree += constraint_degree % 2;
    let mm = constraint_degree / 2;
    let ms = degree_s / 2 + 1;
    let _ = mm;

    let mut bld = ProgramBuilder::new();
    let q0 = bld.add_block(ConeBlock::Free(12 * nq + 36 + 1), "free:q|kappa_tilde|beta");
    let kt0 = q0 + 12 * nq;
    let beta_slot = kt0 + 36;
    bld.set_objective_term(beta_slot, -1.0);

    // multiplier Grams first so the constraint polynomials can reference them
    let gram_s: Vec<GramRef> = (1..=3)
        .map(|i| {
            let off = bld.add_block(ConeBlock::Psd(ms), format!("gram:s{i}"));
            GramRef { block_index: bld.cones.len() - 1, offset: off, order: ms, vec_dim: 1 }
        })
        .collect();

    // scaled transport matrix: assembly runs on t = x/l
    let ell = model.params.length;
    let dfull_t: Vec<f64> = model.dfull.diagonal().iter().map(|v| v / ell).collect();
    let b = &model.b;

    // multiplier-times-interval contribution, interval poly t(t-1)
    let s_interval = |gram: &GramRef, k: usize, expr: &mut AffineExpr| {
        // coeff_k(s * (t^2 - t)) = coeff_{k-2}(s) - coeff_{k-1}(s)
        if k >= 2 {
            add_gram_convolution(expr, gram.offset, gram.order, k - 2, 1.0);
        }
        if k >= 1 {
            add_gram_convolution(expr, gram.offset, gram.order, k - 1, -1.0);
        }
    };

    // decay constraint: S(t) - beta I + s1 Il I, entries as affine polys
    let mut entries = vec![vec![AffinePoly::zero(); 12]; 12];
    for i in 0..12 {
        for j in 0..12 {
            let mut p = AffinePoly::zero();
            for k in 0..=constraint_degree {
                let mut e = AffineExpr::default();
                if i == j && k + 1 < nq {
                    // -(q_i' Dfull)_ii
                    e.push(q0 + i * nq + k + 1, -((k + 1) as f64) * dfull_t[i]);
                }
                if k < nq {
                    e.push(q0 + i * nq + k, b[(i, j)]);
                    e.push(q0 + j * nq + k, b[(j, i)]);
                }
                if i == j && k == 0 {
                    e.push(beta_slot, -1.0);
                }
                if i == j {
                    s_interval(&gram_s[0], k, &mut e);
                }
                *p.coeff_mut(k) = e;
            }
            entries[i][j] = p;
        }
    }
    let gram_decay = bld.matrix_sos_gram(&entries, 12, constraint_degree, "gram:decay")?;

    // eigenvalue bounds, decoupled per diagonal entry of Q
    let mut gram_q_lower = Vec::with_capacity(12);
    let mut gram_q_upper = Vec::with_capacity(12);
    for i in 0..12 {
        let mut lo = AffinePoly::zero();
        let mut hi = AffinePoly::zero();
        for k in 0..=constraint_degree {
            let mut el = AffineExpr::default();
            let mut eh = AffineExpr::default();
            if k < nq {
                el.push(q0 + i * nq + k, 1.0);
                eh.push(q0 + i * nq + k, -1.0);
            }
            if k == 0 {
                el.constant -= gamma;
                eh.constant += nu;
            }
            s_interval(&gram_s[1], k, &mut el);
            s_interval(&gram_s[2], k, &mut eh);
            *lo.coeff_mut(k) = el;
            *hi.coeff_mut(k) = eh;
        }
        gram_q_lower.push(bld.scalar_sos_gram(&lo, constraint_degree, &format!("gram:q_lower:{i}"))?);
        gram_q_upper.push(bld.scalar_sos_gram(&hi, constraint_degree, &format!("gram:q_upper:{i}"))?);
    }

    // boundary Schur block [[I6, kt],[kt', Q_-(0) D]]
    let boundary_offset = bld.add_block(ConeBlock::Psd(12), "boundary_schur");
    let boundary_block = bld.cones.len() - 1;
    let d_diag = model.d.diagonal();
    for p in 0..12 {
        for q in p..12 {
            let slot = boundary_offset + svec_index(p, q, 12);
            let w = if p == q { 1.0 } else { SQRT2 };
            let mut e = AffineExpr::default();
            e.push(slot, w);
            if p < 6 && q < 6 {
                e.constant -= if p == q { 1.0 } else { 0.0 };
            } else if p < 6 {
                e.push(kt0 + 6 * p + (q - 6), -1.0);
            } else if p == q {
                e.push(q0 + (p - 6) * nq, -d_diag[p - 6]);
            }
            bld.add_equality(e);
        }
    }

    // ordering at x = l (t = 1) and the beta floor, via nonnegative slacks
    let slack_offset = bld.add_block(ConeBlock::Nonneg(7), "slack:boundary_order|beta_floor");
    for i in 0..6 {
        let mut e = AffineExpr::default();
        for k in 0..nq {
            e.push(q0 + (i + 6) * nq + k, 1.0);
            e.push(q0 + i * nq + k, -1.0);
        }
        e.push(slack_offset + i, -1.0);
        bld.add_equality(e);
    }
    let mut e = AffineExpr::default();
    e.push(beta_slot, 1.0);
    e.push(slack_offset + 6, -1.0);
    e.constant = -eps1;
    bld.add_equality(e);

    let program = bld.build();
    program.validate()?;
    let layout = SosDecisionLayout {
        degree_q,
        degree_s,
        constraint_degree,
        gamma,
        nu,
        eps1,
        length: ell,
        q0,
        kt0,
        beta: beta_slot,
        gram_decay,
        gram_q_lower,
        gram_q_upper,
        gram_s,
        boundary_block,
        boundary_offset,
        slack_offset,
    };
    Ok((program, layout))
}

/// Reconstructs the certificate from a solver's primal decision vector,
/// mapping polynomials back from unit-interval to physical coordinates and
/// checking every Gram equality residual.
pub fn extract_certificate(
    program: &ConicProgram,
    layout: &SosDecisionLayout,
    primal: &[f64],
) -> Result<Certificate> {
    if primal.len() != program.num_vars() {
        return Err(Error::Certification(format!(
            "primal length {} does not match program {}",
            primal.len(),
            program.num_vars()
        )));
    }
    let resid = program.equality_residuals(primal);
    let worst = resid.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    if worst > 1e-7 {
        return Err(Error::Certification(format!(
            "Gram equality residual {worst:.3e} exceeds 1e-7"
        )));
    }

    let nq = layout.degree_q + 1;
    let inv_l = 1.0 / layout.length;
    let q: Vec<Poly> = (0..12)
        .map(|i| {
            let coeffs: Vec<f64> = (0..nq).map(|k| primal[layout.q_coeff(i, k)]).collect();
            // q_i(x) = qt_i(x / l)
            Poly::new(coeffs).compose_affine(inv_l, 0.0)
        })
        .collect();
    let kappa_tilde = Mat::from_fn(6, 6, |r, c| primal[layout.kappa_tilde(r, c)]);
    let beta = primal[layout.beta];

    let multiplier = |gram: &GramRef| -> Poly {
        let n = gram.order;
        let w = mat_of_svec(&primal[gram.offset..gram.offset + svec_len(n)], n);
        let mut coeffs = vec![0.0; 2 * n - 1];
        for a in 0..n {
            for bb in 0..n {
                coeffs[a + bb] += w[(a, bb)];
            }
        }
        Poly::new(coeffs).compose_affine(inv_l, 0.0)
    };
    Ok(Certificate {
        q,
        kappa_tilde,
        beta,
        s1: multiplier(&layout.gram_s[0]),
        s2: multiplier(&layout.gram_s[1]),
        s3: multiplier(&layout.gram_s[2]),
        gamma: layout.gamma,
        nu: layout.nu,
        degree_q: layout.degree_q,
        degree_s: layout.degree_s,
        length: layout.length,
    })
}

/// Serializes the program in sparse SDPA format (".dat-s").
///
/// Free variables are eliminated exactly against pivot equality rows, and
/// the remaining pure-cone program is written in its dual (LMI) form: one
/// SDPA variable per surviving equality. The mapping is deterministic, so
/// identical programs serialize to identical bytes.
pub fn export_sdpa(program: &ConicProgram) -> String {
    let reduced = eliminate_free_variables(program);
    let mut out = String::new();
    out.push_str("* conic program export: dual (LMI) form of the equality-reduced program\n");
    out.push_str("* SDPA primal optimum = -(source optimum) + objective offset below\n");
    out.push_str(&format!("* objective offset: {:.17e}\n", reduced.offset));
    let m = reduced.rows.len();
    out.push_str(&format!("{m}\n"));
    let blocks: Vec<&ConeBlock> = reduced.cones.iter().filter(|c| !c.is_empty()).collect();
    out.push_str(&format!("{}\n", blocks.len()));
    if blocks.is_empty() {
        out.push_str("\n\n");
        return out;
    }
    let mut line = String::new();
    for b in &blocks {
        match b {
            ConeBlock::Psd(n) => line.push_str(&format!("{n} ")),
            ConeBlock::Nonneg(n) => line.push_str(&format!("-{n} ")),
            ConeBlock::Free(_) => unreachable!("free blocks are eliminated before export"),
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for (i, v) in reduced.rhs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{:.17e}", -v));
    }
    out.push('\n');

    // block lookup per variable index
    let mut var_block = Vec::with_capacity(reduced.num_vars());
    let mut block_no = 0usize;
    let mut block_start = 0usize;
    let mut lookups: Vec<(usize, usize, ConeBlock)> = Vec::new();
    for c in &reduced.cones {
        if c.is_empty() {
            continue;
        }
        block_no += 1;
        lookups.push((block_start, block_no, *c));
        for _ in 0..c.len() {
            var_block.push(lookups.len() - 1);
        }
        block_start += c.len();
    }

    let emit = |out: &mut String, mat_no: usize, var: usize, coeff: f64| {
        let (start, blk, cone) = lookups[var_block[var]];
        let local = var - start;
        let (i, j, v) = match cone {
            ConeBlock::Nonneg(_) => (local + 1, local + 1, coeff),
            ConeBlock::Psd(n) => {
                let (p, q) = svec_unindex(local, n);
                let scale = if p == q { 1.0 } else { 1.0 / SQRT2 };
                (p + 1, q + 1, coeff * scale)
            }
            ConeBlock::Free(_) => unreachable!(),
        };
        if v != 0.0 {
            out.push_str(&format!("{mat_no} {blk} {i} {j} {:.17e}\n", v));
        }
    };

    // F0 = -smat(c); constraint matrices F_r = -smat(row_r)
    let mut c_sorted: Vec<(usize, f64)> = reduced
        .objective
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != 0.0)
        .map(|(j, &v)| (j, v))
        .collect();
    c_sorted.sort_by_key(|&(j, _)| j);
    for (j, v) in c_sorted {
        emit(&mut out, 0, j, -v);
    }
    for (r, row) in reduced.rows.iter().enumerate() {
        let mut row_sorted = row.clone();
        row_sorted.sort_by_key(|&(j, _)| j);
        for (j, v) in row_sorted {
            emit(&mut out, r + 1, j, -v);
        }
    }
    out
}

fn svec_unindex(mut local: usize, n: usize) -> (usize, usize) {
    for p in 0..n {
        let row_len = n - p;
        if local < row_len {
            return (p, p + local);
        }
        local -= row_len;
    }
    unreachable!("svec index out of range")
}

struct ReducedProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    cones: Vec<ConeBlock>,
    offset: f64,
}

impl ReducedProgram {
    fn num_vars(&self) -> usize {
        self.cones.iter().map(|c| c.len()).sum()
    }
}

/// Exact Gaussian elimination of every free variable against a pivot row,
/// then removal of the (now empty) free columns.
fn eliminate_free_variables(program: &ConicProgram) -> ReducedProgram {
    let offsets = program.block_offsets();
    let mut is_free = vec![false; program.num_vars()];
    for (c, off) in program.cones.iter().zip(&offsets) {
        if let ConeBlock::Free(n) = c {
            for j in *off..*off + n {
                is_free[j] = true;
            }
        }
    }
    let mut dense: Vec<std::collections::BTreeMap<usize, f64>> =
        program.rows.iter().map(|row| row.iter().copied().collect()).collect();
    let mut rhs = program.rhs.clone();
    let mut obj: std::collections::BTreeMap<usize, f64> = program
        .objective
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != 0.0)
        .map(|(j, &v)| (j, v))
        .collect();
    let mut offset = 0.0;
    let mut dead_row = vec![false; dense.len()];

    for f in (0..program.num_vars()).filter(|&j| is_free[j]) {
        // deterministic pivot: live row with the largest |coefficient|
        let mut pivot: Option<(usize, f64)> = None;
        for (r, row) in dense.iter().enumerate() {
            if dead_row[r] {
                continue;
            }
            if let Some(&v) = row.get(&f) {
                if v.abs() > pivot.map_or(1e-12, |(_, pv): (usize, f64)| pv.abs()) {
                    pivot = Some((r, v));
                }
            }
        }
        let Some((pr, pv)) = pivot else { continue };
        let prow: Vec<(usize, f64)> = dense[pr].iter().map(|(&j, &v)| (j, v)).collect();
        let pb = rhs[pr];
        dead_row[pr] = true;
        for r in 0..dense.len() {
            if dead_row[r] {
                continue;
            }
            let Some(&cr) = dense[r].get(&f) else { continue };
            let factor = cr / pv;
            for &(j, v) in &prow {
                let e = dense[r].entry(j).or_insert(0.0);
                *e -= factor * v;
                if e.abs() < 1e-14 {
                    dense[r].remove(&j);
                }
            }
            rhs[r] -= factor * pb;
            dense[r].remove(&f);
        }
        if let Some(&cf) = obj.get(&f) {
            let factor = cf / pv;
            for &(j, v) in &prow {
                let e = obj.entry(j).or_insert(0.0);
                *e -= factor * v;
                if e.abs() < 1e-16 {
                    obj.remove(&j);
                }
            }
            offset += factor * pb;
            obj.remove(&f);
        }
    }

    // drop free columns, remap indices
    let mut remap = vec![usize::MAX; program.num_vars()];
    let mut next = 0usize;
    for j in 0..program.num_vars() {
        if !is_free[j] {
            remap[j] = next;
            next += 1;
        }
    }
    let cones: Vec<ConeBlock> =
        program.cones.iter().filter(|c| !matches!(c, ConeBlock::Free(_))).copied().collect();
    let mut rows = Vec::new();
    let mut rrhs = Vec::new();
    for (r, row) in dense.into_iter().enumerate() {
        if dead_row[r] {
            continue;
        }
        let mapped: Vec<(usize, f64)> = row
            .into_iter()
            .filter(|&(j, _)| remap[j] != usize::MAX)
            .map(|(j, v)| (remap[j], v))
            .collect();
        rows.push(mapped);
        rrhs.push(rhs[r]);
    }
    let mut objective = vec![0.0; next];
    for (j, v) in obj {
        if remap[j] != usize::MAX {
            objective[remap[j]] = v;
        }
    }
    ReducedProgram { objective, rows, rhs: rrhs, cones, offset }
}
