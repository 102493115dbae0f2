//! Reconstruction of `(phi, R)` from a compatible stretch field.
//!
//! The rotation solves `R^T d_k R = anti(A e_k)` along grid lines with a
//! Lie-group midpoint step `R <- R exp(anti(h A_mid e_k))`, then the deformation
//! is line-integrated from `grad phi = R U` with the trapezoidal rule. Both use
//! axis-ordered sweeps from a base node: a line along the first axis, planes
//! spanned with the second, then the full box along the third.

use serde::Serialize;

use crate::compatibility::a_field;
use crate::error::{Error, Result};
use crate::field::{Grid3, GridField};
use crate::tensor::{exp_so3, orthogonality_defect, Mat3, Rot3, Vec3, ORTHO_EXACT_TOL};

/// Fixes the rigid-body freedom of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauge {
    pub base_node: [usize; 3],
    pub r0: Rot3,
    pub phi0: Vec3,
}

impl Gauge {
    pub fn identity_at(base_node: [usize; 3], grid: &Grid3) -> Self {
        Self {
            base_node,
            r0: Rot3::identity(),
            phi0: grid.position(grid.index(base_node)),
        }
    }

    fn check(&self, grid: &Grid3) -> Result<usize> {
        if (0..3).any(|a| self.base_node[a] >= grid.dims[a]) {
            return Err(Error::InvalidParams(format!(
                "base node {:?} outside grid {:?}",
                self.base_node, grid.dims
            )));
        }
        Ok(grid.index(self.base_node))
    }
}

/// Order in which axes are swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    /// x-line, then y-planes, then z-slabs.
    Xyz,
    /// z-line, then y-planes, then x-slabs.
    Zyx,
}

impl SweepOrder {
    fn axes(self) -> [usize; 3] {
        match self {
            SweepOrder::Xyz => [0, 1, 2],
            SweepOrder::Zyx => [2, 1, 0],
        }
    }
}

/// Propagates a value from the base node over the whole grid. `step` receives
/// the value at `from` and returns the value at the neighbour `to` along `axis`
/// with signed spacing `h`.
fn sweep<T: Clone>(
    grid: &Grid3,
    base: [usize; 3],
    order: SweepOrder,
    init: T,
    mut step: impl FnMut(&T, usize, usize, usize, f64) -> T,
) -> Vec<T> {
    let mut out: Vec<Option<T>> = vec![None; grid.len()];
    out[grid.index(base)] = Some(init);
    let axes = order.axes();
    let mut seeds = vec![base];
    for &axis in &axes {
        let mut next_seeds = Vec::with_capacity(seeds.len() * grid.dims[axis]);
        for seed in &seeds {
            let h = grid.spacing[axis];
            // forward
            let mut c = *seed;
            while c[axis] + 1 < grid.dims[axis] {
                let mut d = c;
                d[axis] += 1;
                let (from, to) = (grid.index(c), grid.index(d));
                let v = step(out[from].as_ref().expect("sweep visits in order"), from, to, axis, h);
                out[to] = Some(v);
                c = d;
            }
            // backward
            let mut c = *seed;
            while c[axis] > 0 {
                let mut d = c;
                d[axis] -= 1;
                let (from, to) = (grid.index(c), grid.index(d));
                let v = step(out[from].as_ref().expect("sweep visits in order"), from, to, axis, -h);
                out[to] = Some(v);
                c = d;
            }
            for p in 0..grid.dims[axis] {
                let mut s = *seed;
                s[axis] = p;
                next_seeds.push(s);
            }
        }
        seeds = next_seeds;
    }
    out.into_iter().map(|v| v.expect("every node reached")).collect()
}

fn axis_vec(axis: usize) -> Vec3 {
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    e
}

/// Integrated rotation matrices before projection, with their orthogonality drift.
#[derive(Debug, Clone)]
pub struct RawRotation {
    pub matrices: GridField<Mat3>,
    pub drift: f64,
}

pub fn integrate_rotation_raw(a: &GridField<Mat3>, gauge: &Gauge, order: SweepOrder) -> Result<RawRotation> {
    let grid = *a.grid();
    gauge.check(&grid)?;
    if let Some(n) = a.data().iter().position(|m| !m.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFiniteA { node: n });
    }
    let data = sweep(&grid, gauge.base_node, order, *gauge.r0.matrix(), |r, from, to, axis, h| {
        let mid = (a.data()[from] + a.data()[to]) * 0.5;
        let w = mid * axis_vec(axis) * h;
        r * exp_so3(&w).matrix()
    });
    let drift = data.iter().map(orthogonality_defect).fold(0.0, f64::max);
    Ok(RawRotation {
        matrices: GridField::new(grid, data)?,
        drift,
    })
}

fn finish_rotation(raw: &RawRotation) -> Result<GridField<Rot3>> {
    let data = raw
        .matrices
        .data()
        .iter()
        .enumerate()
        .map(|(n, m)| {
            if orthogonality_defect(m) <= ORTHO_EXACT_TOL {
                Ok(Rot3::new_unchecked(*m))
            } else {
                Rot3::projected(m).map_err(|e| match e {
                    Error::NotOrthogonal { deviation, .. } => Error::NotOrthogonal { deviation, node: Some(n) },
                    other => other,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    GridField::new(*raw.matrices.grid(), data)
}

/// Rotation field with `R^T Grad R = Anti(A)` (discretely), `R(base) = R0`.
pub fn integrate_rotation(a: &GridField<Mat3>, gauge: &Gauge) -> Result<GridField<Rot3>> {
    finish_rotation(&integrate_rotation_raw(a, gauge, SweepOrder::Xyz)?)
}

/// Max nodewise `|R_xyz - R_zyx|` between two sweep orders.
pub fn path_independence(a: &GridField<Mat3>, gauge: &Gauge) -> Result<f64> {
    let ra = integrate_rotation_raw(a, gauge, SweepOrder::Xyz)?;
    let rb = integrate_rotation_raw(a, gauge, SweepOrder::Zyx)?;
    Ok(ra
        .matrices
        .data()
        .iter()
        .zip(rb.matrices.data())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

/// Deformation with `grad phi = R U` (discretely), `phi(base) = phi0`.
pub fn integrate_deformation(r: &GridField<Rot3>, u: &GridField<Mat3>, gauge: &Gauge) -> Result<GridField<Vec3>> {
    r.same_grid(u)?;
    let grid = *u.grid();
    gauge.check(&grid)?;
    let f: Vec<Mat3> = r.data().iter().zip(u.data()).map(|(rr, uu)| rr.matrix() * uu).collect();
    let data = sweep(&grid, gauge.base_node, SweepOrder::Xyz, gauge.phi0, |p, from, to, axis, h| {
        p + (f[from] + f[to]) * axis_vec(axis) * (0.5 * h)
    });
    GridField::new(grid, data)
}

/// Output of [`reconstruct`].
#[derive(Debug, Clone)]
pub struct ReconResult {
    pub rotation: GridField<Rot3>,
    pub phi: GridField<Vec3>,
    pub path_independence_error: f64,
    /// Max `|R^T R - id|` before the final projection.
    pub orthogonality_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconDiagnostics {
    pub path_independence_error: f64,
    pub orthogonality_drift: f64,
}

impl ReconResult {
    pub fn diagnostics(&self) -> ReconDiagnostics {
        ReconDiagnostics {
            path_independence_error: self.path_independence_error,
            orthogonality_drift: self.orthogonality_drift,
        }
    }
}

/// Stretch field to `(phi, R)`.
pub fn reconstruct(u: &GridField<Mat3>, gauge: &Gauge) -> Result<ReconResult> {
    let a = a_field(u)?;
    let raw = integrate_rotation_raw(&a, gauge, SweepOrder::Xyz)?;
    let rotation = finish_rotation(&raw)?;
    let path_independence_error = path_independence(&a, gauge)?;
    let phi = integrate_deformation(&rotation, u, gauge)?;
    Ok(ReconResult {
        rotation,
        phi,
        path_independence_error,
        orthogonality_drift: raw.drift,
    })
}

/// Rigid motion aligning a reconstruction with a reference at the base node.
#[derive(Debug, Clone, Copy)]
pub struct RigidAlignment {
    pub q: Rot3,
    pub b: Vec3,
    /// Max `|Q R_rec - R_ref|`.
    pub rotation_residual: f64,
    /// Max `|Q phi_rec + b - phi_ref|`.
    pub deformation_residual: f64,
}

pub fn rigid_align(
    r_rec: &GridField<Rot3>,
    phi_rec: &GridField<Vec3>,
    r_ref: &GridField<Rot3>,
    phi_ref: &GridField<Vec3>,
    base_node: [usize; 3],
) -> Result<RigidAlignment> {
    r_rec.same_grid(phi_rec)?;
    r_rec.same_grid(r_ref)?;
    r_rec.same_grid(phi_ref)?;
    let base = r_rec.grid().index(base_node);
    let q = Rot3::new(r_ref.data()[base].matrix() * r_rec.data()[base].matrix().transpose())?;
    let b = phi_ref.data()[base] - q * phi_rec.data()[base];
    let rotation_residual = r_rec
        .data()
        .iter()
        .zip(r_ref.data())
        .map(|(x, y)| (q.matrix() * x.matrix() - y.matrix()).norm())
        .fold(0.0, f64::max);
    let deformation_residual = phi_rec
        .data()
        .iter()
        .zip(phi_ref.data())
        .map(|(x, y)| (q * *x + b - y).norm())
        .fold(0.0, f64::max);
    Ok(RigidAlignment {
        q,
        b,
        rotation_residual,
        deformation_residual,
    })
}
