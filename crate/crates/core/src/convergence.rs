//! Refinement studies on the manufactured cases: each level halves the
//! spacing of the unit cube and records the fieldwise errors of the
//! integrability formula, the compatibility residual and the reconstruction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::cases::ManufacturedCase;
use crate::compatibility::{a_field, check_compatibility};
use crate::curvature::wryness;
use crate::error::{Error, Result};
use crate::field::{max_interior_diff, Grid3, GridField};
use crate::reconstruction::{reconstruct, rigid_align, Gauge};

/// Errors below this are treated as exact zeros when computing orders.
pub const EXACT_FLOOR: f64 = 1e-12;

/// Nodes per axis of the coarsest level.
pub const DEFAULT_BASE_NODES: usize = 17;

/// Connection `A` of the sampled stretch against the true wryness of `R`.
pub const CHECK_INTEGRABILITY: &str = "integrability";
/// Connection `A` against the same-stencil discrete wryness of sampled `R`.
pub const CHECK_INTEGRABILITY_DISCRETE: &str = "integrability_discrete";
/// Discrete wryness of sampled `R` against the true wryness.
pub const CHECK_WRYNESS: &str = "wryness";
pub const CHECK_COMPATIBILITY: &str = "compatibility_residual";
pub const CHECK_RECON_ROTATION: &str = "reconstruction_rotation";
pub const CHECK_RECON_DEFORMATION: &str = "reconstruction_deformation";

/// Observed order between two consecutive levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// Both errors below [`EXACT_FLOOR`].
    Exact,
    Observed(f64),
}

impl Order {
    pub fn between(coarse: f64, fine: f64) -> Self {
        if coarse < EXACT_FLOOR && fine < EXACT_FLOOR {
            Order::Exact
        } else {
            Order::Observed((coarse / fine).log2())
        }
    }

    /// True for exact levels or an observed order within `tol` of `target`.
    pub fn near(&self, target: f64, tol: f64) -> bool {
        match self {
            Order::Exact => true,
            Order::Observed(p) => (p - target).abs() <= tol,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Exact => f.write_str("exact"),
            Order::Observed(p) => write!(f, "{p:.6}"),
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Exact => s.serialize_str("exact"),
            Order::Observed(p) if p.is_finite() => s.serialize_f64(*p),
            Order::Observed(_) => s.serialize_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub nodes: usize,
    pub h: f64,
    pub errors: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub case: &'static str,
    pub levels: Vec<LevelRecord>,
    /// Per check, one order per consecutive level pair.
    pub orders: BTreeMap<&'static str, Vec<Order>>,
}

impl ConvergenceReport {
    pub fn orders_of(&self, check: &str) -> &[Order] {
        self.orders.get(check).map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with one row per level and check; `order` refers to the previous level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,nodes,h,error,order\n");
        for check in self.orders.keys() {
            for (l, level) in self.levels.iter().enumerate() {
                let order = if l == 0 { String::new() } else { self.orders[check][l - 1].to_string() };
                writeln!(out, "{check},{},{:.6e},{:.6e},{order}", level.nodes, level.h, level.errors[check])
                    .expect("writing to a String cannot fail");
            }
        }
        out
    }
}

/// Errors of every check on one grid.
pub fn level_errors(case: &ManufacturedCase, grid: &Grid3) -> Result<BTreeMap<&'static str, f64>> {
    let samples = case.sample_all(grid)?;
    let mut errors = BTreeMap::new();

    let gamma = wryness(&samples.rotation);
    let exact = GridField::from_positions(*grid, |x| case.gamma_at(x));
    let a = a_field(&samples.stretch)?;
    errors.insert(CHECK_INTEGRABILITY, max_interior_diff(&exact, &a, 1)?);
    errors.insert(CHECK_INTEGRABILITY_DISCRETE, max_interior_diff(&gamma, &a, 1)?);
    errors.insert(CHECK_WRYNESS, max_interior_diff(&gamma, &exact, 1)?);

    errors.insert(CHECK_COMPATIBILITY, check_compatibility(&samples.stretch, None)?.max_residual);

    let base = [0, 0, 0];
    let gauge = Gauge { base_node: base, r0: samples.rotation.data()[0], phi0: samples.phi.data()[0] };
    let rec = reconstruct(&samples.stretch, &gauge)?;
    let al = rigid_align(&rec.rotation, &rec.phi, &samples.rotation, &samples.phi, base)?;
    errors.insert(CHECK_RECON_ROTATION, al.rotation_residual);
    errors.insert(CHECK_RECON_DEFORMATION, al.deformation_residual);
    Ok(errors)
}

/// Runs `levels` refinements starting from `base_nodes` per axis.
pub fn run_convergence(case: &ManufacturedCase, levels: usize, base_nodes: usize) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(Error::InvalidParams("a convergence study needs at least 2 levels".into()));
    }
    let mut grid = Grid3::unit_cube(base_nodes)?;
    let mut records = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            grid = grid.refined()?;
        }
        records.push(LevelRecord { nodes: grid.dims[0], h: grid.h_max(), errors: level_errors(case, &grid)? });
    }
    let mut orders: BTreeMap<&'static str, Vec<Order>> = BTreeMap::new();
    for check in records[0].errors.keys() {
        let o = records.windows(2).map(|w| Order::between(w[0].errors[check], w[1].errors[check])).collect();
        orders.insert(check, o);
    }
    Ok(ConvergenceReport { case: case.name, levels: records, orders })
}
