//! Closed-form algebra of 3-vectors, 3x3 matrices and 3x3x3 tensors.
//!
//! Conventions:
//! - `anti(a) v = a x v`, with `(axl A)_k = -1/2 eps_ijk A_ij`.
//! - A third-order tensor `S` is indexed `(i, j, k)`; its `k`-th slice
//!   `S.e_k` is the matrix `S[.][.][k]`.
//! - `Anti(M)_ijk = -eps_ijl M_lk`, so slice `k` of `Anti(M)` is `anti(M e_k)`.
//! - `(A : B)_ij = A_irs B_rsj`.
//! - `Curl` acts row-wise (see [`crate::field::curl_mat_field`]).

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `|R^T R - id|` accepted as-is without re-projection.
pub const ORTHO_EXACT_TOL: f64 = 1e-12;
/// Largest orthogonality defect that is silently repaired by projection.
pub const ORTHO_REPAIR_TOL: f64 = 1e-8;
/// Default skewness tolerance for slices of `So(3)`-valued tensors.
pub const SKEW_TOL: f64 = 1e-10;

/// Levi-Civita symbol with zero-based indices.
#[inline]
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    if i == j || j == k || i == k {
        return 0.0;
    }
    // even permutations of (0,1,2) are its cyclic shifts
    if (j + 3 - i) % 3 == 1 && (k + 3 - j) % 3 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// A skew-symmetric matrix, stored by its axial vector so `X^T = -X` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMat3 {
    axial: Vec3,
}

impl SkewMat3 {
    pub fn zero() -> Self {
        Self { axial: Vec3::zeros() }
    }

    /// Accepts `m` if `|sym m| <= tol * max(1, |m|)`.
    pub fn from_matrix(m: &Mat3, tol: f64) -> Option<Self> {
        let dev = sym(m).norm();
        if dev <= tol * m.norm().max(1.0) {
            Some(Self { axial: axial_part(m) })
        } else {
            None
        }
    }

    pub fn matrix(&self) -> Mat3 {
        anti_mat(&self.axial)
    }

    pub fn axial(&self) -> Vec3 {
        self.axial
    }
}

/// `anti: R^3 -> so(3)`.
pub fn anti(v: &Vec3) -> SkewMat3 {
    SkewMat3 { axial: *v }
}

/// `axl: so(3) -> R^3`.
pub fn axl(a: &SkewMat3) -> Vec3 {
    a.axial
}

/// The matrix of `w -> v x w`.
#[inline]
pub fn anti_mat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `-1/2 eps_ijk A_ij`; equals `axl(skew A)` for arbitrary `A`.
#[inline]
pub fn axial_part(a: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    )
}

#[inline]
pub fn sym(a: &Mat3) -> Mat3 {
    (a + a.transpose()) * 0.5
}

#[inline]
pub fn skew(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

#[inline]
pub fn dev(a: &Mat3) -> Mat3 {
    a - Mat3::identity() * (a.trace() / 3.0)
}

/// Frobenius inner product `tr(A B^T)`.
#[inline]
pub fn inner(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// Real 3x3x3 tensor indexed `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor3 {
    data: [[[f64; 3]; 3]; 3],
}

impl Default for Tensor3 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Tensor3 {
    pub fn zero() -> Self {
        Self {
            data: [[[0.0; 3]; 3]; 3],
        }
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t.data[i][j][k] = f(i, j, k);
                }
            }
        }
        t
    }

    /// The alternator `eps_ijk`.
    pub fn levi_civita() -> Self {
        Self::from_fn(levi_civita)
    }

    /// Builds the tensor whose `k`-th slice is `slices[k]`.
    pub fn from_slices(slices: &[Mat3; 3]) -> Self {
        Self::from_fn(|i, j, k| slices[k][(i, j)])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[i][j][k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[i][j][k] = v;
    }

    /// `S.e_k`.
    pub fn slice(&self, k: usize) -> Mat3 {
        Mat3::from_fn(|i, j| self.data[i][j][k])
    }

    /// `S.u = sum_k S_ijk u_k`.
    pub fn contract(&self, u: &Vec3) -> Mat3 {
        Mat3::from_fn(|i, j| (0..3).map(|k| self.data[i][j][k] * u[k]).sum())
    }

    /// Left multiplication `(M S)_ijk = M_il S_ljk`.
    pub fn left_mul(&self, m: &Mat3) -> Self {
        Self::from_fn(|i, j, k| (0..3).map(|l| m[(i, l)] * self.data[l][j][k]).sum())
    }

    /// `-1/2 eps : S`, the column-wise axial vectors of the skew parts of the slices.
    /// Unlike [`big_axl`] this does not require the slices to be skew.
    pub fn axial_part(&self) -> Mat3 {
        Mat3::from_columns(&[
            axial_part(&self.slice(0)),
            axial_part(&self.slice(1)),
            axial_part(&self.slice(2)),
        ])
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().flatten().flatten().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().flatten().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    m = m.max((self.data[i][j][k] - other.data[i][j][k]).abs());
                }
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(|i, j, k| s * self.data[i][j][k])
    }
}

impl std::ops::Add for Tensor3 {
    type Output = Tensor3;
    fn add(self, rhs: Tensor3) -> Tensor3 {
        Tensor3::from_fn(|i, j, k| self.data[i][j][k] + rhs.data[i][j][k])
    }
}

impl std::ops::Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(self, rhs: Tensor3) -> Tensor3 {
        Tensor3::from_fn(|i, j, k| self.data[i][j][k] - rhs.data[i][j][k])
    }
}

impl std::ops::Mul<f64> for Tensor3 {
    type Output = Tensor3;
    fn mul(self, rhs: f64) -> Tensor3 {
        self.scale(rhs)
    }
}

/// `Anti: R^{3x3} -> So(3)`, `Anti(M)_ijk = -eps_ijl M_lk`.
pub fn big_anti(m: &Mat3) -> Tensor3 {
    Tensor3::from_slices(&[
        anti_mat(&m.column(0).into_owned()),
        anti_mat(&m.column(1).into_owned()),
        anti_mat(&m.column(2).into_owned()),
    ])
}

/// `Axl: So(3) -> R^{3x3}`; fails if some slice is not skew within `tol`
/// (relative to `max(1, |slice|)`).
pub fn big_axl(s: &Tensor3, tol: f64) -> Result<Mat3> {
    for k in 0..3 {
        let slice = s.slice(k);
        let deviation = sym(&slice).norm();
        if deviation > tol * slice.norm().max(1.0) {
            return Err(Error::NonSkewSlice { slice: k, deviation });
        }
    }
    Ok(s.axial_part())
}

/// `(A : B)_ij = A_irs B_rsj`.
pub fn double_dot(a: &Tensor3, b: &Tensor3) -> Mat3 {
    let mut out = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for r in 0..3 {
                for s in 0..3 {
                    acc += a.get(i, r, s) * b.get(r, s, j);
                }
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// `S_ijk -> S_ikj`.
pub fn transpose_23(s: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(|i, j, k| s.get(i, k, j))
}

/// Transposed cofactor matrix; defined for singular `a` as well.
pub fn adjugate(a: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
        a[(r0, c0)] * a[(r1, c1)] - a[(r0, c1)] * a[(r1, c0)]
    };
    Mat3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

/// `det(u | v | w)`.
pub fn vol(u: &Vec3, v: &Vec3, w: &Vec3) -> f64 {
    Mat3::from_columns(&[*u, *v, *w]).determinant()
}

/// Row-wise cross product: row `i` of the result is `(row i of p) x n`.
pub fn mat_cross_vec(p: &Mat3, n: &Vec3) -> Mat3 {
    // (p_i x n)^T = p_i^T anti(n)
    p * anti_mat(n)
}

/// Orthogonal decomposition `X = dev sym X + skew X + sphere * id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartanParts {
    pub devsym: Mat3,
    pub skew: SkewMat3,
    /// `tr(X) / 3`.
    pub sphere: f64,
}

impl CartanParts {
    pub fn sphere_part(&self) -> Mat3 {
        Mat3::identity() * self.sphere
    }

    pub fn reassemble(&self) -> Mat3 {
        self.devsym + self.skew.matrix() + self.sphere_part()
    }
}

pub fn cartan_split(x: &Mat3) -> CartanParts {
    CartanParts {
        devsym: dev(&sym(x)),
        skew: anti(&axial_part(x)),
        sphere: x.trace() / 3.0,
    }
}

/// An orthogonal matrix (usually a rotation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(Mat3);

impl Default for Rot3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Mat3::identity())
    }

    /// Accepts `m` if `|m^T m - id| <= 1e-8`, re-projecting it onto O(3) when the
    /// defect exceeds `1e-12`.
    pub fn new(m: Mat3) -> Result<Self> {
        let deviation = orthogonality_defect(&m);
        if !deviation.is_finite() || deviation > ORTHO_REPAIR_TOL {
            return Err(Error::NotOrthogonal { deviation, node: None });
        }
        if deviation <= ORTHO_EXACT_TOL {
            Ok(Rot3(m))
        } else {
            Ok(Rot3(project_to_orthogonal(&m)))
        }
    }

    /// Skips validation; callers guarantee orthogonality (e.g. products of rotations).
    pub fn new_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    /// Projects an arbitrary invertible matrix onto the nearest orthogonal matrix.
    pub fn projected(m: &Mat3) -> Result<Self> {
        let r = project_to_orthogonal(m);
        let deviation = orthogonality_defect(&r);
        if deviation.is_finite() && deviation <= ORTHO_EXACT_TOL {
            Ok(Rot3(r))
        } else {
            Err(Error::NotOrthogonal { deviation, node: None })
        }
    }

    pub fn about_axis(axis: &Vec3, angle: f64) -> Self {
        exp_so3(&(axis.normalize() * angle))
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rot3 {
        Rot3(self.0.transpose())
    }

    pub fn compose(&self, other: &Rot3) -> Rot3 {
        Rot3(self.0 * other.0)
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }
}

impl std::ops::Mul<Vec3> for Rot3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Closest orthogonal matrix via the Newton iteration `X <- (X + X^{-T}) / 2`.
pub fn project_to_orthogonal(m: &Mat3) -> Mat3 {
    let mut x = *m;
    for _ in 0..50 {
        let Some(inv) = x.try_inverse() else {
            return x;
        };
        let next = (x + inv.transpose()) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta <= 1e-15 * x.norm() {
            break;
        }
    }
    x
}

/// Rodrigues' formula for `exp(anti(w))`.
pub fn exp_so3(w: &Vec3) -> Rot3 {
    let theta2 = w.norm_squared();
    let k = anti_mat(w);
    let (a, b) = if theta2 < 1e-10 {
        // series for sin(t)/t and (1 - cos t)/t^2
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rot3(Mat3::identity() + k * a + k * k * b)
}

/// Polar decomposition `F = R U` with `U = sqrt(F^T F)` from a symmetric
/// eigendecomposition. Fails for singular `F`.
pub fn polar_decomposition(f: &Mat3) -> Result<(Rot3, Mat3)> {
    let det = f.determinant();
    if det.abs() <= 1e-14 * f.norm().powi(3).max(1e-300) {
        return Err(Error::SingularStretch { det, node: None });
    }
    let c = f.transpose() * f;
    let eig = SymmetricEigen::new(c);
    let v = eig.eigenvectors;
    let sqrt_l = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = v * Mat3::from_diagonal(&sqrt_l) * v.transpose();
    let u = sym(&u);
    let u_inv = v * Mat3::from_diagonal(&sqrt_l.map(|s| 1.0 / s)) * v.transpose();
    let r = f * sym(&u_inv);
    let r = if orthogonality_defect(&r) > ORTHO_EXACT_TOL {
        project_to_orthogonal(&r)
    } else {
        r
    };
    Ok((Rot3(r), u))
}

/// Largest absolute entry difference.
pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).amax()
}
