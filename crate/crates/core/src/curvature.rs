//! Curvature measures of a microrotation field and the algebraic relations
//! tying them to the first Cosserat deformation tensor `U = R^T grad phi`.
//!
//! Three equivalent second/third-order curvature measures are provided:
//!
//! - `K3 = R^T Grad R` (third order, slices skew),
//! - the wryness `Gamma`, column `k` = `axl(R^T dR/dx_k)`,
//! - the dislocation density `K = R^T Curl R`,
//!
//! related pointwise by `-K = Gamma^T - tr(Gamma) id` and `K3 = Anti(Gamma)`.
//!
//! [`integrability_rhs`] expresses `Gamma` through `U` and `Curl U` alone:
//!
//! ```text
//! Gamma = [U (Curl U)^T - 1/2 tr(U (Curl U)^T) id] U / det U
//! ```
//!
//! and [`curl_from_strain_curvature`] inverts that relation for `Curl U`.

use crate::error::{Error, Result};
use crate::field::{curl_mat_field, grad_mat_field, grad_vec_field, max_interior_diff, Grid3, GridField};
use crate::tensor::{adjugate, axial_part, big_anti, big_axl, double_dot, polar_decomposition, skew, sym, Mat3, Rot3, Tensor3, Vec3};

/// Absolute threshold below which `|det U|` is treated as singular.
pub const EPS_DET: f64 = 1e-10;

/// The three curvature measures at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSet {
    pub frak: Tensor3,
    pub gamma: Mat3,
    pub kbar: Mat3,
}

impl CurvatureSet {
    /// Builds a consistent set from the wryness tensor.
    pub fn from_gamma(gamma: Mat3) -> Self {
        Self {
            frak: big_anti(&gamma),
            gamma,
            kbar: nye_gamma_to_kbar(&gamma),
        }
    }
}

/// `K3 = R^T Grad R` at every node.
pub fn second_cosserat(r: &GridField<Rot3>) -> GridField<Tensor3> {
    let grad = grad_mat_field(&r.matrices());
    grad.zip_map(r, |g, rot| g.left_mul(&rot.matrix().transpose()))
        .expect("gradient shares the grid of its input")
}

/// Wryness `Gamma` with column `k` equal to `axl(R^T d_k R)`; identical to
/// `-1/2 eps : K3` with the same stencil.
pub fn wryness(r: &GridField<Rot3>) -> GridField<Mat3> {
    let m = r.matrices();
    GridField::from_nodes(*r.grid(), |n| {
        let rt = m.data()[n].transpose();
        Mat3::from_columns(&[
            axial_part(&(rt * m.partial(n, 0))),
            axial_part(&(rt * m.partial(n, 1))),
            axial_part(&(rt * m.partial(n, 2))),
        ])
    })
}

/// Dislocation density `K = R^T Curl R`.
pub fn dislocation_density(r: &GridField<Rot3>) -> GridField<Mat3> {
    let curl = curl_mat_field(&r.matrices());
    curl.zip_map(r, |c, rot| rot.matrix().transpose() * c)
        .expect("curl shares the grid of its input")
}

/// `K = tr(Gamma) id - Gamma^T`.
pub fn nye_gamma_to_kbar(gamma: &Mat3) -> Mat3 {
    Mat3::identity() * gamma.trace() - gamma.transpose()
}

/// `Gamma = 1/2 tr(K) id - K^T`.
pub fn nye_kbar_to_gamma(kbar: &Mat3) -> Mat3 {
    Mat3::identity() * (0.5 * kbar.trace()) - kbar.transpose()
}

/// `K3 = eps K^T - 1/2 tr(K) eps`, i.e. `Anti` of the matching wryness.
pub fn frak_from_kbar(kbar: &Mat3) -> Tensor3 {
    big_anti(&nye_kbar_to_gamma(kbar))
}

/// `K = -K3 : eps`; the slices of `frak` must be skew within `tol`.
pub fn kbar_from_frak(frak: &Tensor3, tol: f64) -> Result<Mat3> {
    big_axl(frak, tol)?;
    Ok(-double_dot(frak, &Tensor3::levi_civita()))
}

fn check_det(u: &Mat3) -> Result<f64> {
    let det = u.determinant();
    if det.abs() <= EPS_DET || !det.is_finite() {
        Err(Error::SingularStretch { det, node: None })
    } else {
        Ok(det)
    }
}

/// `[U C^T - 1/2 tr(U C^T) id] U / det U` with `C = Curl U`.
pub fn integrability_rhs(u: &Mat3, curl_u: &Mat3) -> Result<Mat3> {
    let det = check_det(u)?;
    let m = u * curl_u.transpose();
    Ok((m - Mat3::identity() * (0.5 * m.trace())) * u / det)
}

/// `Curl U` from `(U, Gamma)`: `(Curl U)^T = Adj U [Gamma U^-1 - tr(Gamma U^-1) id]`.
pub fn curl_from_strain_curvature(u: &Mat3, gamma: &Mat3) -> Result<Mat3> {
    let det = check_det(u)?;
    let adj = adjugate(u);
    let u_inv = adj / det;
    let g = gamma * u_inv;
    Ok((adj * (g - Mat3::identity() * g.trace())).transpose())
}

/// `Curl U` from `(U, K)`:
/// `(Curl U)^T = Adj U [1/2 tr K (U^-1 - tr(U^-1) id) - (K^T U^-1 - tr(K^T U^-1) id)]`.
pub fn curl_from_strain_dislocation(u: &Mat3, kbar: &Mat3) -> Result<Mat3> {
    let det = check_det(u)?;
    let adj = adjugate(u);
    let u_inv = adj / det;
    let id = Mat3::identity();
    let kt = kbar.transpose() * u_inv;
    let bracket = (u_inv - id * u_inv.trace()) * (0.5 * kbar.trace()) - (kt - id * kt.trace());
    Ok((adj * bracket).transpose())
}

/// Both sides of the linearized integrability relation
/// `grad axl(skew grad u) = (Curl sym grad u)^T`.
#[derive(Debug, Clone)]
pub struct LinearizedCheck {
    pub lhs: GridField<Mat3>,
    pub rhs: GridField<Mat3>,
    /// Max over interior nodes of `|lhs - rhs|`.
    pub max_discrepancy: f64,
}

/// Evaluates both sides of the linearized relation from a sampled `grad u`.
pub fn linearized_curvature(gradu: &GridField<Mat3>) -> Result<LinearizedCheck> {
    let axial = gradu.map(|g| axial_part(&skew(g)));
    let lhs = grad_vec_field(&axial);
    let rhs = curl_mat_field(&gradu.map(sym)).map(|c| {
        let ct = c.transpose();
        ct - Mat3::identity() * (0.5 * ct.trace())
    });
    let max_discrepancy = max_interior_diff(&lhs, &rhs, 1)?;
    Ok(LinearizedCheck { lhs, rhs, max_discrepancy })
}

/// Nodewise [`integrability_rhs`] on a sampled stretch field.
pub fn integrability_field(u: &GridField<Mat3>) -> Result<GridField<Mat3>> {
    let curl = curl_mat_field(u);
    let out: Vec<Result<Mat3>> = u
        .zip_map(&curl, integrability_rhs)?
        .into_data();
    let data = out
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            r.map_err(|e| match e {
                Error::SingularStretch { det, .. } => Error::SingularStretch { det, node: Some(n) },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GridField::new(*u.grid(), data)
}

/// Gap between the nonlinear connection of a small deformation and its
/// linearization: `U` is the symmetric polar stretch of `id + grad u` with
/// `u = smooth_displacement(., amp)`, and the result is the max interior
/// `|integrability_rhs(U, Curl U) - (Curl sym grad u)^T|`. Shrinks like `amp^2`.
pub fn linearization_gap(grid: &Grid3, amp: f64) -> Result<f64> {
    let gradu = GridField::from_positions(*grid, |x| smooth_displacement_gradient(x, amp));
    let stretch: Vec<Mat3> = gradu
        .data()
        .iter()
        .map(|g| polar_decomposition(&(Mat3::identity() + g)).map(|(_, u)| u))
        .collect::<Result<_>>()?;
    let a = integrability_field(&GridField::new(*grid, stretch)?)?;
    let lin = linearized_curvature(&gradu)?;
    max_interior_diff(&a, &lin.rhs, 1)
}

/// `u(x) = amp * (sin x2 cos x3, sin(x1 + x3), sin(x1) x2^2)`.
pub fn smooth_displacement(x: Vec3, amp: f64) -> Vec3 {
    Vec3::new(x.y.sin() * x.z.cos(), (x.x + x.z).sin(), x.x.sin() * x.y * x.y) * amp
}

/// Closed-form gradient of [`smooth_displacement`].
pub fn smooth_displacement_gradient(x: Vec3, amp: f64) -> Mat3 {
    let c13 = (x.x + x.z).cos();
    Mat3::new(
        0.0,
        x.y.cos() * x.z.cos(),
        -x.y.sin() * x.z.sin(),
        c13,
        0.0,
        c13,
        x.x.cos() * x.y * x.y,
        2.0 * x.x.sin() * x.y,
        0.0,
    ) * amp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::case_by_name;
    use crate::field::max_interior;
    use crate::tensor::{dev, SKEW_TOL};

    fn m(a: [f64; 9]) -> Mat3 {
        Mat3::from_row_slice(&a)
    }

    #[test]
    fn nye_simple_values() {
        assert_eq!(nye_gamma_to_kbar(&Mat3::zeros()), Mat3::zeros());
        let k = nye_gamma_to_kbar(&Mat3::identity());
        assert_eq!(k, Mat3::identity() * 2.0);
        assert_eq!(k.trace(), 6.0);
    }

    #[test]
    fn nye_relations_on_fixed_matrix() {
        let g = m([0.3, -1.2, 0.5, 0.7, 0.1, -0.4, 2.0, 0.9, -0.6]);
        let k = nye_gamma_to_kbar(&g);
        assert!((nye_kbar_to_gamma(&k) - g).amax() < 1e-14);
        assert!((k.trace() - 2.0 * g.trace()).abs() < 1e-14);
        assert!((skew(&k) - skew(&g)).amax() < 1e-14);
        assert!((dev(&sym(&k)) + dev(&sym(&g))).amax() < 1e-14);
    }

    #[test]
    fn frak_kbar_roundtrip_and_zero() {
        assert_eq!(frak_from_kbar(&Mat3::zeros()), Tensor3::zero());
        let k = m([0.3, -1.2, 0.5, 0.7, 0.1, -0.4, 2.0, 0.9, -0.6]);
        let frak = frak_from_kbar(&k);
        for s in 0..3 {
            assert!(sym(&frak.slice(s)).amax() < 1e-13);
        }
        assert!((kbar_from_frak(&frak, SKEW_TOL).unwrap() - k).amax() < 1e-13);
    }

    #[test]
    fn singular_stretch_rejected() {
        let sing = m([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert!(matches!(integrability_rhs(&sing, &Mat3::identity()), Err(Error::SingularStretch { .. })));
        assert!(curl_from_strain_curvature(&sing, &Mat3::identity()).is_err());
    }

    #[test]
    fn rhs_vanishes_for_curl_free_stretch() {
        let mut u = Mat3::identity();
        u[(0, 1)] = 0.2;
        assert_eq!(integrability_rhs(&u, &Mat3::zeros()).unwrap(), Mat3::zeros());
        assert_eq!(curl_from_strain_curvature(&u, &Mat3::zeros()).unwrap(), Mat3::zeros());
    }

    #[test]
    fn constant_rotation_has_no_curvature() {
        let g = Grid3::unit_cube(5).unwrap();
        let r = GridField::constant(g, crate::tensor::exp_so3(&Vec3::new(0.2, 0.4, -0.1)));
        assert!(second_cosserat(&r).data().iter().all(|t| t.norm() < 1e-12));
        assert!(wryness(&r).data().iter().all(|t| t.norm() < 1e-12));
        assert!(dislocation_density(&r).data().iter().all(|t| t.norm() < 1e-12));
    }

    #[test]
    fn twist_curvatures_converge_at_second_order() {
        let case = case_by_name("twist").unwrap();
        let errs: Vec<[f64; 3]> = [9, 17]
            .iter()
            .map(|&n| {
                let g = Grid3::unit_cube(n).unwrap();
                let (_, r) = case.sample(&g).unwrap();
                let gamma_ex = GridField::from_positions(g, case.gamma.unwrap());
                let k_ex = GridField::from_positions(g, case.kbar.unwrap());
                let frak = second_cosserat(&r);
                let frak_ex = gamma_ex.map(big_anti);
                let e_frak = max_interior(&frak.zip_map(&frak_ex, |a, b| (*a - *b).norm()).unwrap(), 1, |v| *v);
                let e_g = max_interior_diff(&wryness(&r), &gamma_ex, 1).unwrap();
                let e_k = max_interior_diff(&dislocation_density(&r), &k_ex, 1).unwrap();
                [e_frak, e_g, e_k]
            })
            .collect();
        for (c, (coarse, fine)) in errs[0].iter().zip(&errs[1]).enumerate() {
            let ratio = coarse / fine;
            assert!((ratio - 4.0).abs() < 0.6, "check {c}: ratio {ratio}");
        }
    }

    #[test]
    fn wryness_equals_axial_part_of_frak() {
        let case = case_by_name("bend").unwrap();
        let g = Grid3::unit_cube(7).unwrap();
        let (_, r) = case.sample(&g).unwrap();
        let frak = second_cosserat(&r);
        let w = wryness(&r);
        for (t, gm) in frak.data().iter().zip(w.data()) {
            let via_eps = double_dot(&Tensor3::levi_civita(), t) * -0.5;
            assert!((via_eps - gm).amax() <= 1e-12 * gm.amax().max(1.0));
            assert!((t.axial_part() - gm).amax() <= 1e-10 * gm.amax().max(1.0));
        }
    }

    #[test]
    fn linearized_identity_exact_for_linear_u() {
        let g = Grid3::unit_cube(5).unwrap();
        let b = m([0.1, 0.3, -0.2, 0.0, 0.4, 0.5, -0.3, 0.2, 0.1]);
        let check = linearized_curvature(&GridField::constant(g, b)).unwrap();
        assert!(check.max_discrepancy < 1e-12);
    }

    #[test]
    fn linearized_identity_second_order() {
        let d = |n: usize| {
            let g = Grid3::unit_cube(n).unwrap();
            let gu = GridField::from_positions(g, |x| smooth_displacement_gradient(x, 0.01));
            linearized_curvature(&gu).unwrap().max_discrepancy
        };
        let ratio = d(9) / d(17);
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }

    #[test]
    fn linearization_gap_is_second_order_in_amplitude() {
        let g = Grid3::unit_cube(9).unwrap();
        let ratio = linearization_gap(&g, 1e-2).unwrap() / linearization_gap(&g, 5e-3).unwrap();
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }
}
