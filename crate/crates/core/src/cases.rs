//! Analytic manufactured deformations `(phi, R)` used as convergence oracles.

use crate::error::{Error, Result};
use crate::field::{Grid3, GridField};
use crate::tensor::{axial_part, exp_so3, polar_decomposition, Mat3, Rot3, Vec3};

/// Twist wave vector: the microrotation turns about `e3` by `<k, x>`.
pub const TWIST_K: [f64; 3] = [0.3, 0.0, 0.2];
/// Shear magnitude of the `shear` case.
pub const SHEAR_GAMMA: f64 = 0.2;

/// Smooth `phi` with `det grad phi > 0` on the unit cube, closed-form gradient
/// and a prescribed orthogonal field.
#[derive(Clone, Copy)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub phi: fn(Vec3) -> Vec3,
    pub grad_phi: fn(Vec3) -> Mat3,
    pub rotation: fn(Vec3) -> Mat3,
    /// Closed-form wryness `Gamma`, when known.
    pub gamma: Option<fn(Vec3) -> Mat3>,
    /// Closed-form dislocation density `K`, when known.
    pub kbar: Option<fn(Vec3) -> Mat3>,
    /// True when `R` is the polar factor of `grad phi` (symmetric stretch).
    pub symmetric: bool,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("name", &self.name).finish()
    }
}

fn k_twist() -> Vec3 {
    Vec3::new(TWIST_K[0], TWIST_K[1], TWIST_K[2])
}

fn identity_phi(x: Vec3) -> Vec3 {
    x
}

fn identity_grad(_: Vec3) -> Mat3 {
    Mat3::identity()
}

fn zero_mat(_: Vec3) -> Mat3 {
    Mat3::zeros()
}

fn shear_phi(x: Vec3) -> Vec3 {
    x + Vec3::x() * (SHEAR_GAMMA * x.y)
}

fn shear_grad(_: Vec3) -> Mat3 {
    let mut f = Mat3::identity();
    f[(0, 1)] = SHEAR_GAMMA;
    f
}

fn twist_rotation(x: Vec3) -> Mat3 {
    let t = k_twist().dot(&x);
    Mat3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0)
}

/// `Gamma = e3 (x) k`.
fn twist_gamma(_: Vec3) -> Mat3 {
    Vec3::z() * k_twist().transpose()
}

/// `K = k3 id - k (x) e3`.
fn twist_kbar(_: Vec3) -> Mat3 {
    let k = k_twist();
    Mat3::identity() * k.z - k * Vec3::z().transpose()
}

fn wavy_phi(x: Vec3) -> Vec3 {
    x + Vec3::new(x.y.sin(), x.z.sin(), x.x.sin()) * 0.1
}

fn wavy_grad(x: Vec3) -> Mat3 {
    let mut f = Mat3::identity();
    f[(0, 1)] = 0.1 * x.y.cos();
    f[(1, 2)] = 0.1 * x.z.cos();
    f[(2, 0)] = 0.1 * x.x.cos();
    f
}

fn bend_rotation(x: Vec3) -> Mat3 {
    let w = Vec3::new(0.3 * (1.5 * x.y).sin(), 0.4 * x.x * x.z, 0.25 * (x.x - 0.5 * x.z).cos());
    *exp_so3(&w).matrix()
}

fn polar_phi(x: Vec3) -> Vec3 {
    Vec3::new(
        x.x + 0.2 * x.y * x.y,
        x.y + 0.15 * (x.x + x.z).sin(),
        x.z + 0.1 * x.x * x.y,
    )
}

fn polar_grad(x: Vec3) -> Mat3 {
    let c = 0.15 * (x.x + x.z).cos();
    Mat3::new(1.0, 0.4 * x.y, 0.0, c, 1.0, c, 0.1 * x.y, 0.1 * x.x, 1.0)
}

fn polar_rotation(x: Vec3) -> Mat3 {
    let (r, _) = polar_decomposition(&polar_grad(x)).expect("polar case gradient is invertible");
    *r.matrix()
}

const CASES: &[ManufacturedCase] = &[
    ManufacturedCase {
        name: "identity",
        phi: identity_phi,
        grad_phi: identity_grad,
        rotation: identity_grad,
        gamma: Some(zero_mat),
        kbar: Some(zero_mat),
        symmetric: true,
    },
    ManufacturedCase {
        name: "shear",
        phi: shear_phi,
        grad_phi: shear_grad,
        rotation: identity_grad,
        gamma: Some(zero_mat),
        kbar: Some(zero_mat),
        symmetric: false,
    },
    ManufacturedCase {
        name: "twist",
        phi: identity_phi,
        grad_phi: identity_grad,
        rotation: twist_rotation,
        gamma: Some(twist_gamma),
        kbar: Some(twist_kbar),
        symmetric: false,
    },
    ManufacturedCase {
        name: "twist-composite",
        phi: wavy_phi,
        grad_phi: wavy_grad,
        rotation: twist_rotation,
        gamma: Some(twist_gamma),
        kbar: Some(twist_kbar),
        symmetric: false,
    },
    ManufacturedCase {
        name: "bend",
        phi: wavy_phi,
        grad_phi: wavy_grad,
        rotation: bend_rotation,
        gamma: None,
        kbar: None,
        symmetric: false,
    },
    ManufacturedCase {
        name: "polar",
        phi: polar_phi,
        grad_phi: polar_grad,
        rotation: polar_rotation,
        gamma: None,
        kbar: None,
        symmetric: true,
    },
];

pub fn case_names() -> Vec<&'static str> {
    CASES.iter().map(|c| c.name).collect()
}

pub fn case_by_name(name: &str) -> Result<ManufacturedCase> {
    CASES
        .iter()
        .find(|c| c.name == name)
        .copied()
        .ok_or_else(|| Error::UnknownCase(name.to_string()))
}

/// Nodal samples of one case.
#[derive(Debug, Clone)]
pub struct CaseSamples {
    pub phi: GridField<Vec3>,
    pub rotation: GridField<Rot3>,
    /// `U = R^T grad phi` with the closed-form gradient.
    pub stretch: GridField<Mat3>,
}

impl ManufacturedCase {
    /// Wryness of the prescribed rotation: the closed form when registered,
    /// otherwise a fourth-order central difference of the analytic rotation
    /// (step 1e-3, error far below any grid truncation error of interest).
    pub fn gamma_at(&self, x: Vec3) -> Mat3 {
        if let Some(g) = self.gamma {
            return g(x);
        }
        const STEP: f64 = 1e-3;
        let r = (self.rotation)(x);
        let mut gamma = Mat3::zeros();
        for k in 0..3 {
            let mut dx = Vec3::zeros();
            dx[k] = STEP;
            let f = self.rotation;
            let d = (f(x - dx * 2.0) - f(x + dx * 2.0) + (f(x + dx) - f(x - dx)) * 8.0) / (12.0 * STEP);
            gamma.set_column(k, &axial_part(&(r.transpose() * d)));
        }
        gamma
    }

    pub fn stretch_at(&self, x: Vec3) -> Mat3 {
        (self.rotation)(x).transpose() * (self.grad_phi)(x)
    }

    /// Pointwise evaluation of `phi` and `R` on every grid node.
    pub fn sample(&self, grid: &Grid3) -> Result<(GridField<Vec3>, GridField<Rot3>)> {
        let s = self.sample_all(grid)?;
        Ok((s.phi, s.rotation))
    }

    pub fn sample_all(&self, grid: &Grid3) -> Result<CaseSamples> {
        let phi = GridField::from_positions(*grid, self.phi);
        if let Some(n) = phi.data().iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFiniteSample { node: n });
        }
        let mats = GridField::from_positions(*grid, self.rotation);
        if let Some(n) = mats.data().iter().position(|m| !m.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFiniteSample { node: n });
        }
        let rotation = GridField::<Rot3>::from_matrices(&mats)?;
        let stretch = GridField::from_positions(*grid, |x| self.stretch_at(x));
        Ok(CaseSamples { phi, rotation, stretch })
    }
}
