//! Compatibility of a prescribed first Cosserat deformation tensor field.
//!
//! A stretch field `U` comes from some `grad phi = R U` with orthogonal `R`
//! (on a simply connected box) iff the connection tensor
//! `A = [U (Curl U)^T - 1/2 tr(U (Curl U)^T) id] U / det U` satisfies
//! `(Curl A)^T + Adj A = 0`.

use serde::Serialize;

use crate::curvature::integrability_field;
use crate::error::Result;
use crate::field::{curl_mat_field, max_interior, GridField};
use crate::tensor::{adjugate, Mat3};

/// Layers excluded from the residual norm. The residual differentiates `A`,
/// itself a stencil derivative of `U`; next to the boundary it mixes one-sided
/// and central truncation errors, which only converge at first order.
pub const RESIDUAL_MARGIN: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct CompatReport {
    /// Max interior Frobenius norm of `(Curl A)^T + Adj A`.
    pub max_residual: f64,
    #[serde(skip)]
    pub residual_field: GridField<Mat3>,
    pub compatible: bool,
    pub tolerance_used: f64,
    pub max_connection_norm: f64,
    pub h_max: f64,
}

/// Connection tensor `A` at every node.
pub fn a_field(u: &GridField<Mat3>) -> Result<GridField<Mat3>> {
    integrability_field(u)
}

/// `(Curl A)^T + Adj A` at every node.
pub fn compat_residual(a: &GridField<Mat3>) -> GridField<Mat3> {
    let curl = curl_mat_field(a);
    curl.zip_map(a, |c, aa| c.transpose() + adjugate(aa))
        .expect("curl shares the grid of its input")
}

/// `max(1e-8, 10 h_max^2 max|A|^2)`.
pub fn default_tolerance(a: &GridField<Mat3>) -> f64 {
    let scale = a.data().iter().map(|m| m.norm_squared()).fold(0.0, f64::max);
    let h = a.grid().h_max();
    (10.0 * h * h * scale).max(1e-8)
}

/// Runs the full check; `tol = None` selects [`default_tolerance`].
pub fn check_compatibility(u: &GridField<Mat3>, tol: Option<f64>) -> Result<CompatReport> {
    let a = a_field(u)?;
    let residual_field = compat_residual(&a);
    let max_residual = max_interior(&residual_field, RESIDUAL_MARGIN, |m| m.norm());
    let tolerance_used = tol.unwrap_or_else(|| default_tolerance(&a));
    Ok(CompatReport {
        max_residual,
        residual_field,
        compatible: max_residual <= tolerance_used,
        tolerance_used,
        max_connection_norm: a.data().iter().map(|m| m.norm()).fold(0.0, f64::max),
        h_max: u.grid().h_max(),
    })
}

/// `U + amp * x1 e1 (x) e2`, a non-gradient perturbation of a stretch field.
pub fn perturb_incompatible(u: &GridField<Mat3>, amp: f64) -> GridField<Mat3> {
    let grid = *u.grid();
    GridField::from_nodes(grid, |n| {
        let mut m = u.data()[n];
        m[(0, 1)] += amp * grid.position(n).x;
        m
    })
}
