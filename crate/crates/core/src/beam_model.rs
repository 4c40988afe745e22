//! Coefficient matrices of the intrinsic beam system and its diagonal
//! (characteristic) form.
//!
//! State layout: y = [v; s] with v the six linear/angular velocities and s
//! the six strains, all in the section-attached frame. The first-order
//! system is
//!
//!   y_t + A y_x + Bbar(x) y = gbar(y),
//!
//! and the change of variables r = L y with L = [[I, D],[I, -D]],
//! D = (M C)^(-1/2), turns it into
//!
//!   r_t + Dfull r_x + B r = g(r),   Dfull = diag(-D, D),
//!
//! whose first six components travel leftward and last six rightward. The
//! quadratic map g decomposes as g_i(r) = <r, G^i r> with symmetric G^i,
//! which this module extracts by polarization probing.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};

/// Physical beam constants in the product form they enter the model
/// (sectional mass/stiffness products rather than raw material data).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamParameters {
    /// rho*a, kg/m
    pub mass_per_length: f64,
    /// rho*I2, kg*m
    pub rotational_inertia_i2: f64,
    /// rho*I3, kg*m
    pub rotational_inertia_i3: f64,
    /// E*a, N
    pub axial_stiffness: f64,
    /// G*a, N
    pub shear_stiffness: f64,
    /// G*(I2+I3), N*m^2
    pub torsional_stiffness: f64,
    /// E*I2, N*m^2
    pub bending_stiffness_2: f64,
    /// E*I3, N*m^2
    pub bending_stiffness_3: f64,
    /// polar moment of area correction
    pub k1: f64,
    /// shear correction factors
    pub k2: f64,
    pub k3: f64,
    /// arclength, m
    pub length: f64,
    /// constant pre-curvature vector
    #[serde(default)]
    pub curvature: [f64; 3],
}

impl BeamParameters {
    /// The unit beam: every sectional product and correction factor is 1,
    /// length 1, zero pre-curvature.
    pub fn unit() -> Self {
        BeamParameters {
            mass_per_length: 1.0,
            rotational_inertia_i2: 1.0,
            rotational_inertia_i3: 1.0,
            axial_stiffness: 1.0,
            shear_stiffness: 1.0,
            torsional_stiffness: 1.0,
            bending_stiffness_2: 1.0,
            bending_stiffness_3: 1.0,
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            length: 1.0,
            curvature: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mass_per_length", self.mass_per_length),
            ("rotational_inertia_i2", self.rotational_inertia_i2),
            ("rotational_inertia_i3", self.rotational_inertia_i3),
            ("axial_stiffness", self.axial_stiffness),
            ("shear_stiffness", self.shear_stiffness),
            ("torsional_stiffness", self.torsional_stiffness),
            ("bending_stiffness_2", self.bending_stiffness_2),
            ("bending_stiffness_3", self.bending_stiffness_3),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("length", self.length),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "beam parameter `{name}` must be strictly positive, got {v}"
                )));
            }
        }
        if self.curvature.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("curvature must be finite".into()));
        }
        Ok(())
    }
}

/// Sectional mass and flexibility matrices (all diagonal here).
#[derive(Clone, Debug)]
pub struct SectionMatrices {
    /// mass matrix M (6x6, positive diagonal)
    pub m: Mat,
    /// flexibility matrix C = C_inv^-1
    pub c: Mat,
    /// stiffness matrix C^-1
    pub c_inv: Mat,
}

/// skew(u) such that skew(u) z = u x z.
pub fn hat(u: &[f64; 3]) -> Mat {
    Mat::from_rows(&[
        &[0.0, -u[2], u[1]],
        &[u[2], 0.0, -u[0]],
        &[-u[1], u[0], 0.0],
    ])
}

/// Inverse of [`hat`]; rejects matrices that are not skew-symmetric.
pub fn vec_of_skew(m: &Mat) -> Result<[f64; 3]> {
    if m.nrows() != 3 || m.ncols() != 3 {
        return Err(Error::Validation("vec_of_skew expects a 3x3 matrix".into()));
    }
    let tol = 1e-10 * (1.0 + m.max_abs());
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 0.0 } else { -m[(j, i)] };
            if (m[(i, j)] - target).abs() > tol {
                return Err(Error::Validation("vec_of_skew: input is not skew-symmetric".into()));
            }
        }
    }
    Ok([m[(2, 1)], m[(0, 2)], m[(1, 0)]])
}

/// Block operator [[hat(u2), 0],[hat(u1), hat(u2)]] for u = [u1; u2].
fn l1_op(u: &[f64; 6]) -> Mat {
    let u1 = [u[0], u[1], u[2]];
    let u2 = [u[3], u[4], u[5]];
    let mut m = Mat::zeros(6, 6);
    m.set_block(0, 0, &hat(&u2));
    m.set_block(3, 0, &hat(&u1));
    m.set_block(3, 3, &hat(&u2));
    m
}

/// Block operator [[0, hat(u1)],[hat(u1), hat(u2)]] for u = [u1; u2].
fn l2_op(u: &[f64; 6]) -> Mat {
    let u1 = [u[0], u[1], u[2]];
    let u2 = [u[3], u[4], u[5]];
    let mut m = Mat::zeros(6, 6);
    m.set_block(0, 3, &hat(&u1));
    m.set_block(3, 0, &hat(&u1));
    m.set_block(3, 3, &hat(&u2));
    m
}

/// Builds M, C, C^-1 from the sectional products.
pub fn build_section_matrices(params: &BeamParameters) -> Result<SectionMatrices> {
    params.validate()?;
    let p = params;
    let m = Mat::diag(&[
        p.mass_per_length,
        p.mass_per_length,
        p.mass_per_length,
        (p.rotational_inertia_i2 + p.rotational_inertia_i3) * p.k1,
        p.rotational_inertia_i2,
        p.rotational_inertia_i3,
    ]);
    let c_inv = Mat::diag(&[
        p.axial_stiffness,
        p.k2 * p.shear_stiffness,
        p.k3 * p.shear_stiffness,
        p.torsional_stiffness * p.k1,
        p.bending_stiffness_2,
        p.bending_stiffness_3,
    ]);
    let c = Mat::diag(&c_inv.diagonal().iter().map(|d| 1.0 / d).collect::<Vec<_>>());
    Ok(SectionMatrices { m, c, c_inv })
}

/// Fully assembled beam model: physical-form and diagonal-form coefficient
/// matrices, the quadratic-form tensors of the nonlinearity, and the scalar
/// constants entering the region-of-attraction bounds.
#[derive(Clone, Debug)]
pub struct BeamModel {
    pub params: BeamParameters,
    pub sections: SectionMatrices,
    /// transport matrix of the physical form (12x12)
    pub a: Mat,
    /// lower-order coefficient of the physical form (constant pre-curvature)
    pub bbar: Mat,
    /// E = L1([e1; curvature]) (6x6)
    pub e: Mat,
    /// change of variables r = L y and its inverse
    pub l: Mat,
    pub l_inv: Mat,
    /// wave-speed matrix D = (M C)^(-1/2) (6x6, positive diagonal)
    pub d: Mat,
    /// diag(-D, D)
    pub dfull: Mat,
    /// lower-order coefficient of the diagonal form, B = L Bbar L^-1
    pub b: Mat,
    /// symmetric quadratic-form tensors: g_i(r) = <r, G^i r>
    pub g: Vec<Mat>,
    /// sqrt(sum_i ||G^i||^2), operator norms
    pub c_g: f64,
    /// max_x ||B(x)|| (constant in x here)
    pub c_b: f64,
    /// Sobolev embedding constant of sup-norm vs H1 on (0, length)
    pub c1: f64,
    pub norm_l: f64,
    pub norm_l_inv: f64,
    pub norm_dfull: f64,
}

/// Builds the full model. Construction is pure; the result is immutable.
pub fn build_model(params: BeamParameters) -> Result<BeamModel> {
    let sections = build_section_matrices(&params)?;
    let sbar = [1.0, 0.0, 0.0, params.curvature[0], params.curvature[1], params.curvature[2]];
    let e = l1_op(&sbar);

    let m_diag = sections.m.diagonal();
    let c_diag = sections.c.diagonal();
    let mc_inv = Mat::diag(
        &m_diag.iter().zip(&c_diag).map(|(m, c)| 1.0 / (m * c)).collect::<Vec<_>>(),
    );
    let mut a = Mat::zeros(12, 12);
    a.set_block(0, 6, &mc_inv.scale(-1.0));
    a.set_block(6, 0, &Mat::identity(6).scale(-1.0));

    let m_inv = Mat::diag(&m_diag.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
    let mut bbar = Mat::zeros(12, 12);
    bbar.set_block(0, 6, &m_inv.matmul(&e).matmul(&sections.c_inv).scale(-1.0));
    bbar.set_block(6, 0, &e.transpose());

    let d = Mat::diag(
        &m_diag.iter().zip(&c_diag).map(|(m, c)| 1.0 / (m * c).sqrt()).collect::<Vec<_>>(),
    );
    let d_inv = Mat::diag(&d.diagonal().iter().map(|v| 1.0 / v).collect::<Vec<_>>());

    let mut l = Mat::zeros(12, 12);
    l.set_block(0, 0, &Mat::identity(6));
    l.set_block(0, 6, &d);
    l.set_block(6, 0, &Mat::identity(6));
    l.set_block(6, 6, &d.scale(-1.0));
    // closed-form inverse: 1/2 [[I, I],[D^-1, -D^-1]]
    let mut l_inv = Mat::zeros(12, 12);
    l_inv.set_block(0, 0, &Mat::identity(6).scale(0.5));
    l_inv.set_block(0, 6, &Mat::identity(6).scale(0.5));
    l_inv.set_block(6, 0, &d_inv.scale(0.5));
    l_inv.set_block(6, 6, &d_inv.scale(-0.5));

    let mut dfull = Mat::zeros(12, 12);
    dfull.set_block(0, 0, &d.scale(-1.0));
    dfull.set_block(6, 6, &d);

    let b = l.matmul(&bbar).matmul(&l_inv);

    let mut model = BeamModel {
        params,
        sections,
        a,
        bbar,
        e,
        l,
        l_inv,
        d,
        dfull,
        b,
        g: Vec::new(),
        c_g: 0.0,
        c_b: 0.0,
        c1: 0.0,
        norm_l: 0.0,
        norm_l_inv: 0.0,
        norm_dfull: 0.0,
    };
    let diag_err = model.l.matmul(&model.a).matmul(&model.l_inv).sub(&model.dfull).max_abs();
    if diag_err > 1e-10 {
        return Err(Error::Validation(format!(
            "diagonalization residual {diag_err:.3e} exceeds tolerance"
        )));
    }
    model.g = extract_quadratic_forms(&model);
    compute_constants(&mut model);
    Ok(model)
}

/// The quadratic right side of the physical form at y = [v; s].
pub fn eval_gbar(model: &BeamModel, y: &[f64; 12]) -> [f64; 12] {
    let v: [f64; 6] = y[0..6].try_into().unwrap();
    let s: [f64; 6] = y[6..12].try_into().unwrap();
    let m_diag = model.sections.m.diagonal();
    let cinv_diag = model.sections.c_inv.diagonal();

    let l1v = l1_op(&v);
    let cs: [f64; 6] = std::array::from_fn(|i| cinv_diag[i] * s[i]);
    let l2cs = l2_op(&cs);

    let mv: Vec<f64> = (0..6).map(|i| m_diag[i] * v[i]).collect();
    let top_raw = {
        let t1 = l1v.matvec(&mv);
        let t2 = l2cs.matvec(&s);
        (0..6).map(|i| -(t1[i] + t2[i]) / m_diag[i]).collect::<Vec<f64>>()
    };
    let bot = l1v.transpose().matvec(&s);
    let mut out = [0.0; 12];
    out[..6].copy_from_slice(&top_raw);
    out[6..].copy_from_slice(&bot);
    out
}

/// The quadratic right side of the diagonal form: g(r) = L gbar(L^-1 r).
pub fn eval_g(model: &BeamModel, r: &[f64; 12]) -> [f64; 12] {
    let y_vec = model.l_inv.matvec(r);
    let y: [f64; 12] = y_vec.as_slice().try_into().unwrap();
    let gb = eval_gbar(model, &y);
    let out = model.l.matvec(&gb);
    out.as_slice().try_into().unwrap()
}

/// Recovers the symmetric tensors G^i of g by polarization probing:
/// G^i_jj = g_i(e_j), G^i_jk = (g_i(e_j+e_k) - g_i(e_j) - g_i(e_k)) / 2.
/// Exact for quadratic maps.
pub fn extract_quadratic_forms(model: &BeamModel) -> Vec<Mat> {
    let mut basis_vals = [[0.0; 12]; 12];
    for j in 0..12 {
        let mut ej = [0.0; 12];
        ej[j] = 1.0;
        basis_vals[j] = eval_g(model, &ej);
    }
    let mut tensors = vec![Mat::zeros(12, 12); 12];
    for j in 0..12 {
        for g in tensors.iter_mut().zip(basis_vals[j]) {
            g.0[(j, j)] = g.1;
        }
        for k in (j + 1)..12 {
            let mut ejk = [0.0; 12];
            ejk[j] = 1.0;
            ejk[k] = 1.0;
            let val = eval_g(model, &ejk);
            for (i, g) in tensors.iter_mut().enumerate() {
                let off = 0.5 * (val[i] - basis_vals[j][i] - basis_vals[k][i]);
                g[(j, k)] = off;
                g[(k, j)] = off;
            }
        }
    }
    tensors
}

/// Fills in the scalar constants: C_g, C_B (sampled on a grid; constant in x
/// under constant pre-curvature), the Sobolev constant C1, and the operator
/// norms of L, L^-1, Dfull.
///
/// C1 is the sharp constant of sup|phi| <= C1 ||phi||_{H1(0,l)}: the
/// extremal function is cosh on the interval, giving C1 = sqrt(coth(l)).
pub fn compute_constants(model: &mut BeamModel) {
    model.c_g = model.g.iter().map(|g| g.op_norm().powi(2)).sum::<f64>().sqrt();
    // B is constant in x for constant pre-curvature; keep the grid scan so
    // a future x-dependent Bbar only changes this one spot.
    let grid = 16;
    let l = model.params.length;
    model.c_b = (0..=grid)
        .map(|k| {
            let _x = l * k as f64 / grid as f64;
            model.b.op_norm()
        })
        .fold(0.0, f64::max);
    model.c1 = (1.0 / model.params.length.tanh()).sqrt();
    model.norm_l = model.l.op_norm();
    model.norm_l_inv = model.l_inv.op_norm();
    model.norm_dfull = model.dfull.op_norm();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_model() -> BeamModel {
        build_model(BeamParameters::unit()).unwrap()
    }

    #[test]
    fn unit_beam_section_matrices() {
        let s = build_section_matrices(&BeamParameters::unit()).unwrap();
        assert_eq!(s.m.diagonal(), vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0]);
        assert!(s.c.sub(&Mat::identity(6)).max_abs() < 1e-14);
        assert!(s.c.matmul(&s.c_inv).sub(&Mat::identity(6)).max_abs() < 1e-14);
    }

    #[test]
    fn identity_mass_when_k1_compensates() {
        let mut p = BeamParameters::unit();
        // rho(I2+I3)k1 = 1 requires k1 = 1/2 here
        p.k1 = 0.5;
        let s = build_section_matrices(&p).unwrap();
        assert!(s.m.sub(&Mat::identity(6)).max_abs() < 1e-14);
    }

    #[test]
    fn section_matrices_reject_nonpositive_input() {
        let mut p = BeamParameters::unit();
        p.shear_stiffness = 0.0;
        assert!(build_section_matrices(&p).is_err());
        p.shear_stiffness = -1.0;
        assert!(build_section_matrices(&p).is_err());
    }

    #[test]
    fn hat_matches_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let z = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let hz = hat(&u).matvec(&z);
            let cross = [
                u[1] * z[2] - u[2] * z[1],
                u[2] * z[0] - u[0] * z[2],
                u[0] * z[1] - u[1] * z[0],
            ];
            for i in 0..3 {
                assert!((hz[i] - cross[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hat_of_e1_matches_component_layout() {
        let h = hat(&[1.0, 0.0, 0.0]);
        let expect = Mat::from_rows(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, -1.0], &[0.0, 1.0, 0.0]]);
        assert!(h.sub(&expect).max_abs() == 0.0);
    }

    #[test]
    fn hat_vec_round_trip_and_zero() {
        assert_eq!(hat(&[0.0; 3]).max_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let u = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            assert_eq!(vec_of_skew(&hat(&u)).unwrap(), u);
        }
        assert!(vec_of_skew(&Mat::identity(3)).is_err());
    }

    #[test]
    fn unit_beam_wave_speeds_and_norms() {
        let m = unit_model();
        let expect = [1.0, 1.0, 1.0, 1.0 / 2f64.sqrt(), 1.0, 1.0];
        for (got, want) in m.d.diagonal().iter().zip(expect) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!((m.norm_l - 2f64.sqrt()).abs() < 1e-10);
        assert!((m.norm_l_inv - 1.0).abs() < 1e-10);
        assert!((m.norm_dfull - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_curvature_e_and_bbar_blocks() {
        let m = unit_model();
        let mut e_expect = Mat::zeros(6, 6);
        e_expect.set_block(3, 0, &hat(&[1.0, 0.0, 0.0]));
        assert!(m.e.sub(&e_expect).max_abs() == 0.0);
        // Bbar = [[0, -M^-1 E C^-1],[E^T, 0]]
        let minv = Mat::diag(&m.sections.m.diagonal().iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        let ur = minv.matmul(&m.e).matmul(&m.sections.c_inv).scale(-1.0);
        assert!(m.bbar.block(0, 6, 6, 6).sub(&ur).max_abs() == 0.0);
        assert!(m.bbar.block(6, 0, 6, 6).sub(&m.e.transpose()).max_abs() == 0.0);
        assert!(m.bbar.block(0, 0, 6, 6).max_abs() == 0.0);
        assert!(m.bbar.block(6, 6, 6, 6).max_abs() == 0.0);
    }

    #[test]
    fn diagonalization_is_exact() {
        for params in [BeamParameters::unit(), varied_params()] {
            let m = build_model(params).unwrap();
            let lhs = m.l.matmul(&m.a).matmul(&m.l_inv);
            assert!(lhs.sub(&m.dfull).max_abs() < 1e-10);
            assert!(m.l.matmul(&m.l_inv).sub(&Mat::identity(12)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_of_a_equals_dfull_diagonal() {
        for params in [BeamParameters::unit(), varied_params()] {
            let m = build_model(params).unwrap();
            // A is not symmetric, but it is diagonalizable with real spectrum;
            // compare sorted eigenvalues through the similarity transform.
            let mut want = m.dfull.diagonal();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // eigenvalues of A = eigenvalues of L A L^-1 = Dfull exactly by
            // the diagonalization test; double-check via the characteristic
            // values of the symmetrized similarity D^(1/2)-free route:
            let sim = m.l.matmul(&m.a).matmul(&m.l_inv);
            let mut got = sim.diagonal();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gbar_energy_orthogonality() {
        let m = unit_model();
        let weight: Vec<f64> = m
            .sections
            .m
            .diagonal()
            .into_iter()
            .chain(m.sections.c_inv.diagonal())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let mut y = [0.0; 12];
            for v in y.iter_mut() {
                *v = rng.gen_range(-10.0..10.0);
            }
            let g = eval_gbar(&m, &y);
            let ip: f64 = (0..12).map(|i| g[i] * weight[i] * y[i]).sum();
            let scale = 1.0 + y.iter().map(|v| v * v).sum::<f64>();
            assert!(ip.abs() < 1e-10 * scale, "energy orthogonality violated: {ip}");
        }
    }

    #[test]
    fn gbar_zero_and_velocity_free_structure() {
        let m = unit_model();
        assert_eq!(eval_gbar(&m, &[0.0; 12]), [0.0; 12]);
        // v = 0: both L1(v) terms vanish; only -M^-1 L2(C^-1 s) s remains,
        // which occupies the velocity block.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let mut y = [0.0; 12];
            for v in y[6..].iter_mut() {
                *v = rng.gen_range(-3.0..3.0);
            }
            let g = eval_gbar(&m, &y);
            for gi in &g[6..] {
                assert!(gi.abs() < 1e-14, "strain block must vanish for v = 0");
            }
            // direct formula for the remaining block
            let s: [f64; 6] = y[6..].try_into().unwrap();
            let cinv = m.sections.c_inv.diagonal();
            let cs: [f64; 6] = std::array::from_fn(|i| cinv[i] * s[i]);
            let m_diag = m.sections.m.diagonal();
            let direct = l2_op(&cs).matvec(&s);
            for i in 0..6 {
                assert!((g[i] + direct[i] / m_diag[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn g_matches_quadratic_forms() {
        let m = unit_model();
        assert_eq!(eval_g(&m, &[0.0; 12]), [0.0; 12]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let mut r = [0.0; 12];
            for v in r.iter_mut() {
                *v = rng.gen_range(-2.0..2.0);
            }
            let g = eval_g(&m, &r);
            for (i, gi) in g.iter().enumerate() {
                let q: f64 = (0..12)
                    .map(|a| (0..12).map(|b| r[a] * m.g[i][(a, b)] * r[b]).sum::<f64>())
                    .sum();
                assert!((gi - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn g_is_l_conjugate_of_gbar() {
        let m = unit_model();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let mut y = [0.0; 12];
            for v in y.iter_mut() {
                *v = rng.gen_range(-2.0..2.0);
            }
            let r_vec = m.l.matvec(&y);
            let r: [f64; 12] = r_vec.as_slice().try_into().unwrap();
            let lhs = eval_g(&m, &r);
            let rhs = m.l.matvec(&eval_gbar(&m, &y));
            for i in 0..12 {
                assert!((lhs[i] - rhs[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tensors_are_symmetric_and_cg_finite() {
        let m = unit_model();
        for g in &m.g {
            assert!(g.is_symmetric(0.0), "G tensors must be symmetric by construction");
        }
        assert!(m.c_g > 0.0 && m.c_g.is_finite());
        // cross-check against the eigensolver route: ||G|| = max |eig(G)|
        let alt: f64 = m
            .g
            .iter()
            .map(|g| {
                let (ev, _) = sym_eigen(g);
                let nrm = ev.iter().fold(0.0f64, |a, e| a.max(e.abs()));
                nrm * nrm
            })
            .sum::<f64>()
            .sqrt();
        assert!((m.c_g - alt).abs() < 1e-10);
    }

    #[test]
    fn constants_of_unit_beam() {
        let m = unit_model();
        // constant-coefficient B: single-evaluation C_B equals the norm
        assert!((m.c_b - m.b.op_norm()).abs() < 1e-12);
        // sharp Sobolev constant at l = 1: sqrt(coth(1))
        assert!((m.c1 - (1.0f64 / 1.0f64.tanh()).sqrt()).abs() < 1e-14);
        // B + B^T = 0 for the unit beam: the lower-order term conserves the
        // flat r-energy
        assert!(m.b.add(&m.b.transpose()).max_abs() < 1e-12);
    }

    #[test]
    fn zero_bbar_gives_zero_cb() {
        let mut m = unit_model();
        m.bbar = Mat::zeros(12, 12);
        m.b = Mat::zeros(12, 12);
        compute_constants(&mut m);
        assert_eq!(m.c_b, 0.0);
    }

    #[test]
    fn sobolev_constant_dominates_sampled_ratios() {
        // ||phi||_inf <= C1 ||phi||_H1 checked against trial functions on a
        // fine trapezoidal grid; the cosh extremal must come within 1e-3.
        let m = unit_model();
        let l = 1.0;
        let n = 4000;
        let h = l / n as f64;
        let check = |f: &dyn Fn(f64) -> f64, fp: &dyn Fn(f64) -> f64| -> f64 {
            let mut sup: f64 = 0.0;
            let mut nrm2 = 0.0;
            for k in 0..=n {
                let x = k as f64 * h;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                sup = sup.max(f(x).abs());
                nrm2 += w * h * (f(x) * f(x) + fp(x) * fp(x));
            }
            sup / nrm2.sqrt()
        };
        let ratios = [
            check(&|x: f64| x.cosh(), &|x: f64| x.sinh()),
            check(&|x: f64| (1.0 - x) * (1.0 - x), &|x: f64| -2.0 * (1.0 - x)),
            check(&|x: f64| (3.1 * x).sin(), &|x: f64| 3.1 * (3.1 * x).cos()),
        ];
        for r in ratios {
            assert!(r <= m.c1 + 1e-9, "ratio {r} exceeds C1 {}", m.c1);
        }
        assert!(ratios[0] > m.c1 - 1e-3, "cosh extremal should be near-tight");
    }

    fn varied_params() -> BeamParameters {
        BeamParameters {
            mass_per_length: 2.3,
            rotational_inertia_i2: 0.7,
            rotational_inertia_i3: 1.9,
            axial_stiffness: 3.0,
            shear_stiffness: 1.4,
            torsional_stiffness: 0.8,
            bending_stiffness_2: 2.2,
            bending_stiffness_3: 0.5,
            k1: 1.1,
            k2: 0.9,
            k3: 1.2,
            length: 1.8,
            curvature: [0.1, -0.2, 0.05],
        }
    }
}
