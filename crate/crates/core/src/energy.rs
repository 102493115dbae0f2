//! Discrete geometrically nonlinear Cosserat energy
//!
//! ```text
//! W = mu |sym(U - id)|^2 + mu_c |skew(U - id)|^2 + lambda/2 ((det U)^2 + (det U)^-2 - 2)
//!   + mu Lc^2 |Curl U|^2 + mu Lc_hat (2 |Gamma|^2)^(q/2)
//! ```
//!
//! integrated with trapezoidal weights, minus the load potential `int f . phi`,
//! plus an optional boundary penalty on `(U - id) x n`. The gradient is
//! assembled in reverse mode through the transposed stencils, so it is the
//! exact derivative of the discrete energy.

use nalgebra::UnitQuaternion;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{nye_kbar_to_gamma, EPS_DET};
use crate::error::{Error, Result};
use crate::field::{curl_mat_adjoint, curl_mat_field, grad_vec_adjoint, grad_vec_field, trapezoid_weight, Grid3, GridField};
use crate::random;
use crate::tensor::{adjugate, anti_mat, axial_part, mat_cross_vec, skew, sym, Mat3, Rot3, Vec3};

/// Constitutive constants and the body force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosseratParams {
    pub mu: f64,
    pub lambda: f64,
    #[serde(default)]
    pub mu_c: f64,
    #[serde(rename = "Lc", default)]
    pub lc: f64,
    #[serde(rename = "Lc_hat", default)]
    pub lc_hat: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Constant body force.
    #[serde(rename = "f", default)]
    pub body_force: [f64; 3],
}

fn default_q() -> f64 {
    4.0
}

/// Parameter regimes with known existence results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamCase {
    /// `mu_c > 0`, `Lc_hat > 0`.
    CouplePositive,
    /// `mu_c = 0`, `Lc > 0`, `Lc_hat > 0`, `q >= 2`.
    CoupleFree,
    Unclassified,
}

impl CosseratParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if self.mu.is_nan() || self.mu <= 0.0 {
            return bad("mu must be positive");
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return bad("lambda must be positive");
        }
        if [self.mu_c, self.lc, self.lc_hat].iter().any(|x| x.is_nan() || *x < 0.0) {
            return bad("mu_c, Lc and Lc_hat must be non-negative");
        }
        if !self.q.is_finite() || self.q < 2.0 {
            return bad("q must be at least 2");
        }
        if !self.body_force.iter().all(|x| x.is_finite()) {
            return bad("body force must be finite");
        }
        Ok(())
    }

    pub fn case(&self) -> ParamCase {
        if self.mu_c > 0.0 && self.lc_hat > 0.0 {
            ParamCase::CouplePositive
        } else if self.mu_c == 0.0 && self.lc > 0.0 && self.lc_hat > 0.0 && self.q >= 2.0 {
            ParamCase::CoupleFree
        } else {
            ParamCase::Unclassified
        }
    }

    pub fn force(&self) -> Vec3 {
        Vec3::from(self.body_force)
    }
}

/// One of the six faces of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Xmin,
    Xmax,
    Ymin,
    Ymax,
    Zmin,
    Zmax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::Xmin, Face::Xmax, Face::Ymin, Face::Ymax, Face::Zmin, Face::Zmax];

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    fn is_max(self) -> bool {
        self as usize % 2 == 1
    }

    /// Outward unit normal.
    pub fn normal(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = if self.is_max() { 1.0 } else { -1.0 };
        n
    }

    pub fn contains(self, grid: &Grid3, index: usize) -> bool {
        let c = grid.coords(index)[self.axis()];
        if self.is_max() {
            c + 1 == grid.dims[self.axis()]
        } else {
            c == 0
        }
    }

    /// Trapezoidal surface weight of a node lying on this face.
    pub fn surface_weight(self, grid: &Grid3, index: usize) -> f64 {
        let c = grid.coords(index);
        (0..3)
            .filter(|&a| a != self.axis())
            .map(|a| {
                let edge = c[a] == 0 || c[a] + 1 == grid.dims[a];
                grid.spacing[a] * if edge { 0.5 } else { 1.0 }
            })
            .product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// `phi = phi_bc` and `R = id` on the Dirichlet faces.
    Hard,
    /// `phi = phi_bc` on the Dirichlet faces, plus a weighted surface penalty
    /// on `(U - id) x n` that couples the free microrotation to the boundary.
    Penalty,
}

/// Affine Dirichlet data `phi_bc(x) = linear x + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: [[f64; 3]; 3],
    pub shift: [f64; 3],
}

impl Default for AffineMap {
    fn default() -> Self {
        Self {
            linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            shift: [0.0; 3],
        }
    }
}

impl AffineMap {
    pub fn apply(&self, x: Vec3) -> Vec3 {
        Mat3::from_fn(|i, j| self.linear[i][j]) * x + Vec3::from(self.shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub faces: Vec<Face>,
    pub mode: BoundaryMode,
    #[serde(default)]
    pub penalty_weight: f64,
    #[serde(default)]
    pub phi_bc: AffineMap,
}

impl BoundarySpec {
    pub fn hard(faces: Vec<Face>) -> Self {
        Self { faces, mode: BoundaryMode::Hard, penalty_weight: 0.0, phi_bc: AffineMap::default() }
    }

    pub fn penalty(faces: Vec<Face>, weight: f64) -> Self {
        Self { faces, mode: BoundaryMode::Penalty, penalty_weight: weight, phi_bc: AffineMap::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::InvalidParams("at least one Dirichlet face is required".into()));
        }
        if !self.penalty_weight.is_finite() || self.penalty_weight < 0.0 {
            return Err(Error::InvalidParams("penalty weight must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn on_dirichlet(&self, grid: &Grid3, index: usize) -> bool {
        self.faces.iter().any(|f| f.contains(grid, index))
    }

    fn penalty_active(&self) -> bool {
        self.mode == BoundaryMode::Penalty && self.penalty_weight > 0.0
    }
}

/// Current iterate of the minimizer.
#[derive(Debug, Clone)]
pub struct MinimizeState {
    pub phi: GridField<Vec3>,
    pub rotation: GridField<UnitQuaternion<f64>>,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
}

impl MinimizeState {
    /// `phi = x`, `R = id`.
    pub fn reference(grid: Grid3) -> Self {
        Self {
            phi: GridField::from_positions(grid, |x| x),
            rotation: GridField::constant(grid, UnitQuaternion::identity()),
            energy_trace: Vec::new(),
            iterations: 0,
        }
    }

    /// Reference state with `phi` shifted by `amp` times a random vector and
    /// `R` rotated by `amp` times a random axis vector, node by node.
    pub fn perturbed(grid: Grid3, amp: f64, rng: &mut impl Rng) -> Self {
        let mut s = Self::reference(grid);
        for v in s.phi.data_mut() {
            *v += random::vec3(rng) * amp;
        }
        for q in s.rotation.data_mut() {
            *q = UnitQuaternion::from_scaled_axis(random::vec3(rng) * amp);
        }
        s
    }

    pub fn from_fields(phi: GridField<Vec3>, rotation: &GridField<Rot3>) -> Result<Self> {
        phi.same_grid(rotation)?;
        let rotation = rotation.map(|r| {
            UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(*r.matrix()))
        });
        Ok(Self { phi, rotation, energy_trace: Vec::new(), iterations: 0 })
    }

    pub fn grid(&self) -> &Grid3 {
        self.phi.grid()
    }

    pub fn rotations(&self) -> GridField<Rot3> {
        self.rotation.map(|q| Rot3::new_unchecked(q.to_rotation_matrix().into_inner()))
    }

    /// Max `| |q| - 1 |` over nodes.
    pub fn max_quaternion_defect(&self) -> f64 {
        self.rotation.data().iter().map(|q| (q.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Applies the Dirichlet data (and `R = id` in hard mode) on the boundary.
    pub fn enforce(&mut self, bc: &BoundarySpec) {
        let grid = *self.grid();
        for n in 0..grid.len() {
            if bc.on_dirichlet(&grid, n) {
                self.phi.data_mut()[n] = bc.phi_bc.apply(grid.position(n));
                if bc.mode == BoundaryMode::Hard {
                    self.rotation.data_mut()[n] = UnitQuaternion::identity();
                }
            }
        }
    }
}

/// Pointwise energy density. `curl_u` is `Curl U` (equal to `Curl(U - id)`).
pub fn energy_density(u: &Mat3, curl_u: &Mat3, kbar: &Mat3, p: &CosseratParams) -> Result<f64> {
    let det = u.determinant();
    if det.abs() <= EPS_DET {
        return Err(Error::SingularStretch { det, node: None });
    }
    let e = u - Mat3::identity();
    let gamma = nye_kbar_to_gamma(kbar);
    let d2 = det * det;
    Ok(p.mu * sym(&e).norm_squared()
        + p.mu_c * skew(&e).norm_squared()
        + 0.5 * p.lambda * (d2 + 1.0 / d2 - 2.0)
        + p.mu * p.lc * p.lc * curl_u.norm_squared()
        + p.mu * p.lc_hat * (2.0 * gamma.norm_squared()).powf(0.5 * p.q))
}

/// Partial derivatives of [`energy_density`] with respect to `U`, `Curl U`
/// and `K`.
fn density_partials(u: &Mat3, curl_u: &Mat3, kbar: &Mat3, p: &CosseratParams) -> (Mat3, Mat3, Mat3) {
    let e = u - Mat3::identity();
    let det = u.determinant();
    let ubar = sym(&e) * (2.0 * p.mu)
        + skew(&e) * (2.0 * p.mu_c)
        + adjugate(u).transpose() * (p.lambda * (det - det.powi(-3)));
    let cbar = curl_u * (2.0 * p.mu * p.lc * p.lc);
    let gamma = nye_kbar_to_gamma(kbar);
    let s = 2.0 * gamma.norm_squared();
    let gbar = if p.lc_hat == 0.0 || s == 0.0 && p.q > 2.0 {
        Mat3::zeros()
    } else {
        gamma * (p.mu * p.lc_hat * 0.5 * p.q * s.powf(0.5 * p.q - 1.0) * 4.0)
    };
    let kbar_bar = Mat3::identity() * (0.5 * gbar.trace()) - gbar.transpose();
    (ubar, cbar, kbar_bar)
}

/// Nodal kinematic fields shared by energy and gradient.
struct Kinematics {
    f: GridField<Mat3>,
    r: Vec<Mat3>,
    u: GridField<Mat3>,
    curl_u: GridField<Mat3>,
    curl_r: GridField<Mat3>,
    kbar: Vec<Mat3>,
    weights: Vec<f64>,
}

fn kinematics(state: &MinimizeState) -> Result<Kinematics> {
    state.phi.same_grid(&state.rotation)?;
    let grid = *state.grid();
    let f = grad_vec_field(&state.phi);
    let rmats = state.rotations().matrices();
    let u = rmats.zip_map(&f, |r, f| r.transpose() * f)?;
    if let Some((n, det)) = u
        .data()
        .iter()
        .map(|m| m.determinant())
        .enumerate()
        .find(|(_, d)| d.is_nan() || *d <= EPS_DET)
    {
        return Err(Error::SingularStretch { det, node: Some(n) });
    }
    let curl_u = curl_mat_field(&u);
    let curl_r = curl_mat_field(&rmats);
    let kbar = rmats.data().iter().zip(curl_r.data()).map(|(r, c)| r.transpose() * c).collect();
    let weights = (0..grid.len()).map(|n| trapezoid_weight(&grid, n)).collect();
    Ok(Kinematics { f, r: rmats.into_data(), u, curl_u, curl_r, kbar, weights })
}

/// Sum over Dirichlet faces through `n` of `weight * w_face * |(U - id) x n|^2`.
fn penalty_at(grid: &Grid3, bc: &BoundarySpec, n: usize, u: &Mat3) -> f64 {
    let e = u - Mat3::identity();
    bc.faces
        .iter()
        .filter(|f| f.contains(grid, n))
        .map(|f| bc.penalty_weight * f.surface_weight(grid, n) * mat_cross_vec(&e, &f.normal()).norm_squared())
        .sum()
}

fn penalty_partial(grid: &Grid3, bc: &BoundarySpec, n: usize, u: &Mat3) -> Mat3 {
    let e = u - Mat3::identity();
    bc.faces.iter().filter(|f| f.contains(grid, n)).fold(Mat3::zeros(), |acc, f| {
        let a = anti_mat(&f.normal());
        acc + e * a * a.transpose() * (2.0 * bc.penalty_weight * f.surface_weight(grid, n))
    })
}

/// Stored energy only (`int W dV`, no load, no penalty).
pub fn stored_energy(state: &MinimizeState, p: &CosseratParams) -> Result<f64> {
    let k = kinematics(state)?;
    let per_node: Vec<f64> = (0..k.weights.len())
        .into_par_iter()
        .map(|n| energy_density(&k.u.data()[n], &k.curl_u.data()[n], &k.kbar[n], p).map(|w| k.weights[n] * w))
        .collect::<Result<_>>()?;
    Ok(per_node.iter().sum())
}

/// `int (W - f . phi) dV` plus the boundary penalty in penalty mode.
pub fn total_energy(state: &MinimizeState, p: &CosseratParams, bc: &BoundarySpec) -> Result<f64> {
    let k = kinematics(state)?;
    let grid = *state.grid();
    let force = p.force();
    let penalty = bc.penalty_active();
    let per_node: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let u = &k.u.data()[n];
            let w = energy_density(u, &k.curl_u.data()[n], &k.kbar[n], p)?;
            let mut e = k.weights[n] * (w - force.dot(&state.phi.data()[n]));
            if penalty {
                e += penalty_at(&grid, bc, n, u);
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;
    // fixed-order reduction keeps totals bit-stable
    Ok(per_node.iter().sum())
}

/// Gradient with respect to nodal `phi` and to left exponential coordinates of
/// each rotation: `dE = <dphi, delta phi> + <dR_tangent, w>` for
/// `R -> exp(anti(w)) R`. Constrained nodes get zero entries.
#[derive(Debug, Clone)]
pub struct EnergyGradient {
    pub dphi: GridField<Vec3>,
    pub drot: GridField<Vec3>,
}

impl EnergyGradient {
    pub fn max_abs(&self) -> f64 {
        self.dphi
            .data()
            .iter()
            .chain(self.drot.data())
            .map(|v| v.amax())
            .fold(0.0, f64::max)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dphi.data().iter().chain(self.drot.data()).map(|v| v.norm_squared()).sum()
    }
}

pub fn gradient(state: &MinimizeState, p: &CosseratParams, bc: &BoundarySpec) -> Result<EnergyGradient> {
    let k = kinematics(state)?;
    let grid = *state.grid();
    let penalty = bc.penalty_active();

    // local cotangents on U, Curl U, K
    let local: Vec<(Mat3, Mat3, Mat3)> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let u = &k.u.data()[n];
            let (mut ub, cb, kb) = density_partials(u, &k.curl_u.data()[n], &k.kbar[n], p);
            let w = k.weights[n];
            ub *= w;
            if penalty {
                ub += penalty_partial(&grid, bc, n, u);
            }
            (ub, cb * w, kb * w)
        })
        .collect();
    let cbar: Vec<Mat3> = local.iter().map(|t| t.1).collect();
    let from_curl_u = curl_mat_adjoint(&grid, &cbar);
    // K = R^T Curl R
    let curl_r_bar: Vec<Mat3> = local.iter().zip(&k.r).map(|(t, r)| r * t.2).collect();
    let from_curl_r = curl_mat_adjoint(&grid, &curl_r_bar);

    let mut fbar = Vec::with_capacity(grid.len());
    let mut rbar = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let ub = local[n].0 + from_curl_u[n];
        let r = &k.r[n];
        fbar.push(r * ub);
        // U = R^T F, K = R^T Curl R
        rbar.push(k.f.data()[n] * ub.transpose() + k.curl_r.data()[n] * local[n].2.transpose() + from_curl_r[n]);
    }
    let force = p.force();
    let mut dphi = grad_vec_adjoint(&grid, &fbar);
    let mut drot: Vec<Vec3> = rbar.iter().zip(&k.r).map(|(rb, r)| axial_part(&(rb * r.transpose())) * 2.0).collect();
    for n in 0..grid.len() {
        dphi[n] -= force * k.weights[n];
        if bc.on_dirichlet(&grid, n) {
            dphi[n] = Vec3::zeros();
            if bc.mode == BoundaryMode::Hard {
                drot[n] = Vec3::zeros();
            }
        }
    }
    Ok(EnergyGradient { dphi: GridField::new(grid, dphi)?, drot: GridField::new(grid, drot)? })
}

/// Moves the state by `-step * grad` (additive on `phi`, exponential on `R`).
pub fn retract(state: &MinimizeState, grad: &EnergyGradient, step: f64) -> MinimizeState {
    let phi = state.phi.zip_map(&grad.dphi, |x, d| x - d * step).expect("gradient shares the state grid");
    let rotation = state
        .rotation
        .zip_map(&grad.drot, |q, d| {
            let next = UnitQuaternion::from_scaled_axis(-d * step) * q;
            UnitQuaternion::new_normalize(next.into_inner())
        })
        .expect("gradient shares the state grid");
    MinimizeState { phi, rotation, energy_trace: state.energy_trace.clone(), iterations: state.iterations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
}

fn default_initial_step() -> f64 {
    1.0
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iter: 5000, grad_tol: 1e-9, initial_step: default_initial_step() }
    }
}

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const GROW: f64 = 1.25;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub state: MinimizeState,
    /// `max |gradient|` at the returned state.
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Gradient descent with Armijo backtracking. Trial steps that make any
/// `det U` non-positive count as rejections.
pub fn minimize(
    initial: &MinimizeState,
    p: &CosseratParams,
    bc: &BoundarySpec,
    opts: &MinimizeOptions,
) -> Result<MinimizeOutcome> {
    p.validate()?;
    bc.validate()?;
    let mut state = initial.clone();
    state.enforce(bc);
    let mut energy = total_energy(&state, p, bc)?;
    state.energy_trace = vec![energy];
    let mut step = opts.initial_step;
    loop {
        let grad = gradient(&state, p, bc)?;
        let gnorm = grad.max_abs();
        if gnorm < opts.grad_tol || state.iterations >= opts.max_iter {
            return Ok(MinimizeOutcome { state, gradient_norm: gnorm, converged: gnorm < opts.grad_tol });
        }
        let g2 = grad.norm_squared();
        loop {
            let trial = retract(&state, &grad, step);
            match total_energy(&trial, p, bc) {
                Ok(e) if e <= energy - ARMIJO_C * step * g2 => {
                    state = trial;
                    energy = e;
                    state.iterations += 1;
                    state.energy_trace.push(e);
                    step *= GROW;
                    break;
                }
                Ok(_) | Err(Error::SingularStretch { .. }) => {
                    step *= SHRINK;
                    if step < MIN_STEP {
                        return Err(Error::LineSearchStalled { iteration: state.iterations, step });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Discrete Rayleigh quotient `int(|sym P|^2 + |Curl P|^2) / int |P|^2` with
/// `P = U - id`.
pub fn korn_ratio(u: &GridField<Mat3>) -> Result<f64> {
    let grid = *u.grid();
    let p = u.map(|m| m - Mat3::identity());
    let curl = curl_mat_field(&p);
    let (mut num, mut den) = (0.0, 0.0);
    for n in 0..grid.len() {
        let w = trapezoid_weight(&grid, n);
        let pn = &p.data()[n];
        num += w * (sym(pn).norm_squared() + curl.data()[n].norm_squared());
        den += w * pn.norm_squared();
    }
    if den == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(num / den)
}

/// Projects `P` so that `P x n = 0` on every face: `P <- P (n (x) n)` per face
/// through the node, which zeroes edges and corners.
pub fn clamp_tangential(p: &GridField<Mat3>) -> GridField<Mat3> {
    let grid = *p.grid();
    GridField::from_nodes(grid, |n| {
        Face::ALL
            .iter()
            .filter(|f| f.contains(&grid, n))
            .fold(p.data()[n], |m, f| {
                let nn = f.normal();
                m * (nn * nn.transpose())
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::exp_so3;

    fn params() -> CosseratParams {
        CosseratParams { mu: 1.0, lambda: 1.0, mu_c: 0.5, lc: 0.3, lc_hat: 0.2, q: 4.0, body_force: [0.0; 3] }
    }

    fn case_three() -> CosseratParams {
        CosseratParams { mu: 1.0, lambda: 1.0, mu_c: 0.0, lc: 0.1, lc_hat: 0.1, q: 4.0, body_force: [0.0; 3] }
    }

    fn perturbed(grid: Grid3, amp: f64, seed: u64) -> MinimizeState {
        MinimizeState::perturbed(grid, amp, &mut random::seeded(seed))
    }

    #[test]
    fn density_hand_values() {
        let p = CosseratParams { mu_c: 0.0, ..params() };
        let z = Mat3::zeros();
        assert_eq!(energy_density(&Mat3::identity(), &z, &z, &p).unwrap(), 0.0);
        let (mu, lambda) = (1.3, 0.7);
        let p2 = CosseratParams { mu, lambda, ..p };
        let w = energy_density(&Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)), &z, &z, &p2).unwrap();
        assert!((w - (mu + 9.0 / 8.0 * lambda)).abs() < 1e-14);

        let g: f64 = 0.3;
        let u = Mat3::identity() + anti_mat(&(Vec3::z() * g));
        let d = 1.0 + g * g;
        let expected = 0.5 * lambda * (d * d + 1.0 / (d * d) - 2.0);
        assert!((energy_density(&u, &z, &z, &p2).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn density_is_nonnegative_and_rejects_singular() {
        let mut rng = random::seeded(3);
        for _ in 0..200 {
            let u = random::invertible_mat3(&mut rng);
            let w = energy_density(&u, &random::mat3(&mut rng), &random::mat3(&mut rng), &params()).unwrap();
            assert!(w > 0.0);
        }
        assert!(matches!(
            energy_density(&Mat3::zeros(), &Mat3::zeros(), &Mat3::zeros(), &params()),
            Err(Error::SingularStretch { .. })
        ));
    }

    #[test]
    fn curvature_norm_via_wryness() {
        // |frak|^2 = 2 |Gamma|^2 for frak = Anti(Gamma)
        let mut rng = random::seeded(4);
        let gamma = random::mat3(&mut rng);
        let frak = crate::tensor::big_anti(&gamma);
        assert!((frak.norm_squared() - 2.0 * gamma.norm_squared()).abs() < 1e-13);
    }

    #[test]
    fn param_case_tags() {
        assert_eq!(params().case(), ParamCase::CouplePositive);
        assert_eq!(case_three().case(), ParamCase::CoupleFree);
        assert_eq!(CosseratParams { lc: 0.0, ..case_three() }.case(), ParamCase::Unclassified);
        assert!(CosseratParams { q: 1.5, ..params() }.validate().is_err());
    }

    #[test]
    fn reference_state_energy() {
        let g = Grid3::unit_cube(5).unwrap();
        let s = MinimizeState::reference(g);
        let bc = BoundarySpec::penalty(vec![Face::Xmin], 10.0);
        assert_eq!(total_energy(&s, &params(), &bc).unwrap(), 0.0);

        // -int c . x over the unit cube; the trapezoidal rule is exact for linear integrands
        let c = [0.1, -0.2, 0.3];
        let p = CosseratParams { body_force: c, ..params() };
        let expected = -0.5 * (c[0] + c[1] + c[2]);
        assert!((total_energy(&s, &p, &bc).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn uniform_stretch_energy() {
        let g = Grid3::unit_cube(4).unwrap();
        let mut s = MinimizeState::reference(g);
        s.phi = GridField::from_positions(g, |x| Vec3::new(2.0 * x.x, x.y, x.z));
        let p = CosseratParams { mu_c: 0.0, ..params() };
        let e = total_energy(&s, &p, &BoundarySpec::hard(vec![Face::Xmin])).unwrap();
        assert!((e - (p.mu + 9.0 / 8.0 * p.lambda)).abs() < 1e-13);
    }

    #[test]
    fn reference_is_critical_and_load_gradient() {
        let g = Grid3::unit_cube(5).unwrap();
        let s = MinimizeState::reference(g);
        let bc = BoundarySpec::hard(vec![Face::Zmin]);
        let grad = gradient(&s, &params(), &bc).unwrap();
        assert!(grad.max_abs() < 1e-14);

        let f = Vec3::new(0.0, 0.0, 0.01);
        let p = CosseratParams { body_force: f.into(), ..params() };
        let grad = gradient(&s, &p, &bc).unwrap();
        for n in 0..g.len() {
            let expected = if bc.on_dirichlet(&g, n) { Vec3::zeros() } else { -f * trapezoid_weight(&g, n) };
            assert!((grad.dphi.data()[n] - expected).amax() < 1e-15);
            assert!(grad.drot.data()[n].amax() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid3::new([4, 5, 4], [0.3, 0.25, 0.35], [0.1, -0.2, 0.0]).unwrap();
        let bc = BoundarySpec::penalty(vec![Face::Xmin, Face::Ymax], 3.0);
        let p = CosseratParams { body_force: [0.1, 0.2, -0.3], q: 3.0, ..params() };
        for seed in 0..3 {
            let s = perturbed(g, 0.02, seed);
            let grad = gradient(&s, &p, &bc).unwrap();
            let mut rng = random::seeded(100 + seed);
            let dphi = (0..g.len())
                .map(|n| if bc.on_dirichlet(&g, n) { Vec3::zeros() } else { random::vec3(&mut rng) })
                .collect();
            let drot = (0..g.len()).map(|_| random::vec3(&mut rng)).collect();
            let dir = EnergyGradient { dphi: GridField::new(g, dphi).unwrap(), drot: GridField::new(g, drot).unwrap() };
            let eps = 1e-6;
            let fd = (total_energy(&retract(&s, &dir, -eps), &p, &bc).unwrap()
                - total_energy(&retract(&s, &dir, eps), &p, &bc).unwrap())
                / (2.0 * eps);
            let an: f64 = grad.dphi.data().iter().zip(dir.dphi.data()).map(|(a, b)| a.dot(b)).sum::<f64>()
                + grad.drot.data().iter().zip(dir.drot.data()).map(|(a, b)| a.dot(b)).sum::<f64>();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-8), "seed {seed}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn stored_energy_is_frame_indifferent() {
        let g = Grid3::unit_cube(5).unwrap();
        let s = perturbed(g, 0.02, 11);
        let q = exp_so3(&Vec3::new(0.4, -1.1, 0.7));
        let b = Vec3::new(1.0, 2.0, -3.0);
        let moved = MinimizeState {
            phi: s.phi.map(|x| q * *x + b),
            rotation: s.rotation.map(|r| {
                UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(*q.matrix())) * r
            }),
            ..s.clone()
        };
        let (e0, e1) = (stored_energy(&s, &params()).unwrap(), stored_energy(&moved, &params()).unwrap());
        assert!((e0 - e1).abs() < 1e-12 * e0.max(1.0), "{e0} vs {e1}");
    }

    #[test]
    fn minimizer_from_reference_stops_immediately() {
        let g = Grid3::unit_cube(4).unwrap();
        let out = minimize(&MinimizeState::reference(g), &params(), &BoundarySpec::hard(vec![Face::Xmin]), &MinimizeOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.state.iterations, 0);
    }

    #[test]
    fn loaded_minimizer_moves_with_the_load() {
        let g = Grid3::unit_cube(5).unwrap();
        let f = [0.0, 0.0, 0.01];
        let p = CosseratParams { body_force: f, ..case_three() };
        let bc = BoundarySpec::hard(vec![Face::Zmin]);
        let opts = MinimizeOptions { max_iter: 5000, grad_tol: 1e-7, ..Default::default() };
        let out = minimize(&MinimizeState::reference(g), &p, &bc, &opts).unwrap();
        assert!(out.converged, "gradient {}", out.gradient_norm);
        assert!(out.state.energy_trace.windows(2).all(|w| w[1] < w[0]));
        let work: f64 = (0..g.len())
            .map(|n| trapezoid_weight(&g, n) * (out.state.phi.data()[n] - g.position(n)).dot(&Vec3::from(f)))
            .sum();
        assert!(work > 0.0);
        assert!(out.state.max_quaternion_defect() < 1e-12);
    }

    #[test]
    fn korn_ratio_special_fields() {
        let g = Grid3::unit_cube(5).unwrap();
        let s = Mat3::new(0.3, 0.1, 0.0, 0.1, -0.2, 0.4, 0.0, 0.4, 0.5);
        let r = korn_ratio(&GridField::constant(g, Mat3::identity() + s)).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let w = anti_mat(&Vec3::new(0.2, -0.5, 0.1));
        assert_eq!(korn_ratio(&GridField::constant(g, Mat3::identity() + w)).unwrap(), 0.0);
        assert!(matches!(korn_ratio(&GridField::constant(g, Mat3::identity())), Err(Error::ZeroField)));
    }

    #[test]
    fn tangential_clamp_kills_cross_product() {
        let g = Grid3::unit_cube(4).unwrap();
        let p = clamp_tangential(&random::smooth_mat3_field(&g, &mut random::seeded(9)));
        for n in 0..g.len() {
            for f in Face::ALL.iter().filter(|f| f.contains(&g, n)) {
                assert!(mat_cross_vec(&p.data()[n], &f.normal()).amax() < 1e-15);
            }
        }
    }
}
