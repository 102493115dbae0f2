//! Fields sampled on a collocated structured grid and their finite-difference
//! derivatives.
//!
//! All derivative operators share one stencil: second-order central differences
//! at interior nodes and second-order one-sided differences on boundary nodes.
//! Nodes are ordered x-fastest: `index = i + nx * (j + ny * k)`.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mat3, Rot3, Tensor3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid3 {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n < 3) {
            return Err(Error::GridTooSmall { dims });
        }
        if spacing.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// `n^3` nodes covering the unit cube `[0, 1]^3`.
    pub fn unit_cube(n: usize) -> Result<Self> {
        let h = 1.0 / (n.max(2) - 1) as f64;
        Self::new([n; 3], [h; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let rest = index / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn position(&self, index: usize) -> Vec3 {
        let c = self.coords(index);
        Vec3::new(
            self.origin[0] + c[0] as f64 * self.spacing[0],
            self.origin[1] + c[1] as f64 * self.spacing[1],
            self.origin[2] + c[2] as f64 * self.spacing[2],
        )
    }

    pub fn origin_vec(&self) -> Vec3 {
        Vec3::new(self.origin[0], self.origin[1], self.origin[2])
    }

    pub fn h_max(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// True if the node is at least `margin` layers away from every face.
    pub fn is_interior(&self, index: usize, margin: usize) -> bool {
        let c = self.coords(index);
        (0..3).all(|a| c[a] >= margin && c[a] + margin < self.dims[a])
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        !self.is_interior(index, 1)
    }

    /// Same grid with every spacing halved and `2n - 1` nodes per axis.
    pub fn refined(&self) -> Result<Self> {
        Self::new(
            self.dims.map(|n| 2 * n - 1),
            self.spacing.map(|h| h / 2.0),
            self.origin,
        )
    }

    /// Second-order first-derivative weights at position `i` on an axis with
    /// `n` nodes and spacing `h`.
    #[inline]
    pub fn stencil(i: usize, n: usize, h: f64) -> [(usize, f64); 3] {
        let inv = 1.0 / (2.0 * h);
        if i == 0 {
            [(0, -3.0 * inv), (1, 4.0 * inv), (2, -inv)]
        } else if i == n - 1 {
            [(n - 1, 3.0 * inv), (n - 2, -4.0 * inv), (n - 3, inv)]
        } else {
            [(i - 1, -inv), (i + 1, inv), (i, 0.0)]
        }
    }

    /// Derivative weights along `axis` at node `index`, in terms of flat node indices.
    #[inline]
    pub fn derivative_weights(&self, index: usize, axis: usize) -> [(usize, f64); 3] {
        let c = self.coords(index);
        let st = Self::stencil(c[axis], self.dims[axis], self.spacing[axis]);
        st.map(|(p, w)| {
            let mut cc = c;
            cc[axis] = p;
            (self.index(cc), w)
        })
    }
}

/// Values that can be differentiated by the linear stencils.
pub trait Linear: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Linear for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Linear for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
}

impl Linear for Mat3 {
    fn zero() -> Self {
        Mat3::zeros()
    }
}

impl Linear for Tensor3 {
    fn zero() -> Self {
        Tensor3::zero()
    }
}

/// One value per grid node, x-fastest ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<V> {
    grid: Grid3,
    data: Vec<V>,
}

impl<V> GridField<V> {
    pub fn new(grid: Grid3, data: Vec<V>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::FieldFormat(format!(
                "expected {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn data(&self) -> &[V] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<V> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_grid<W>(&self, other: &GridField<W>) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl<V: Send + Sync> GridField<V> {
    /// Evaluates `f` at every node position.
    pub fn from_positions(grid: Grid3, f: impl Fn(Vec3) -> V + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(|n| f(grid.position(n))).collect();
        Self { grid, data }
    }

    pub fn from_nodes(grid: Grid3, f: impl Fn(usize) -> V + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(&f).collect();
        Self { grid, data }
    }

    pub fn map<W: Send>(&self, f: impl Fn(&V) -> W + Sync) -> GridField<W> {
        GridField {
            grid: self.grid,
            data: self.data.par_iter().map(&f).collect(),
        }
    }

    pub fn zip_map<U: Sync, W: Send>(
        &self,
        other: &GridField<U>,
        f: impl Fn(&V, &U) -> W + Sync,
    ) -> Result<GridField<W>> {
        self.same_grid(other)?;
        Ok(GridField {
            grid: self.grid,
            data: self.data.par_iter().zip(other.data.par_iter()).map(|(a, b)| f(a, b)).collect(),
        })
    }
}

impl<V: Clone> GridField<V> {
    pub fn constant(grid: Grid3, value: V) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }
}

impl<V: Linear> GridField<V> {
    /// Stencil derivative of the field along `axis` at one node, evaluated on
    /// differences to the node value so constants differentiate to exactly zero.
    #[inline]
    pub fn partial(&self, index: usize, axis: usize) -> V {
        let w = self.grid.derivative_weights(index, axis);
        let v = self.data[index];
        (self.data[w[0].0] - v) * w[0].1 + (self.data[w[1].0] - v) * w[1].1 + (self.data[w[2].0] - v) * w[2].1
    }
}

impl GridField<Rot3> {
    pub fn matrices(&self) -> GridField<Mat3> {
        self.map(|r| *r.matrix())
    }

    /// Validates every node as an orthogonal matrix.
    pub fn from_matrices(field: &GridField<Mat3>) -> Result<Self> {
        let data = field
            .data()
            .iter()
            .enumerate()
            .map(|(n, m)| {
                Rot3::new(*m).map_err(|e| match e {
                    Error::NotOrthogonal { deviation, .. } => {
                        Error::NotOrthogonal { deviation, node: Some(n) }
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridField { grid: field.grid, data })
    }
}

/// `F_ij = d phi_i / d x_j`.
pub fn grad_vec_field(phi: &GridField<Vec3>) -> GridField<Mat3> {
    GridField::from_nodes(phi.grid, |n| {
        Mat3::from_columns(&[phi.partial(n, 0), phi.partial(n, 1), phi.partial(n, 2)])
    })
}

/// `(Grad R)_ijk = d R_ij / d x_k`.
pub fn grad_mat_field(r: &GridField<Mat3>) -> GridField<Tensor3> {
    GridField::from_nodes(r.grid, |n| {
        Tensor3::from_slices(&[r.partial(n, 0), r.partial(n, 1), r.partial(n, 2)])
    })
}

/// Row-wise curl at one node: `(Curl P)_ij = eps_jrs d_r P_is`.
#[inline]
pub fn curl_at(p: &GridField<Mat3>, n: usize) -> Mat3 {
    let d1 = p.partial(n, 0);
    let d2 = p.partial(n, 1);
    let d3 = p.partial(n, 2);
    Mat3::from_fn(|i, j| match j {
        0 => d2[(i, 2)] - d3[(i, 1)],
        1 => d3[(i, 0)] - d1[(i, 2)],
        _ => d1[(i, 1)] - d2[(i, 0)],
    })
}

/// Row-wise Curl: row `i` of the result is `curl` of row `i` of `p`.
pub fn curl_mat_field(p: &GridField<Mat3>) -> GridField<Mat3> {
    GridField::from_nodes(p.grid, |n| curl_at(p, n))
}

/// `curl` of a vector field.
pub fn curl_vec_field(v: &GridField<Vec3>) -> GridField<Vec3> {
    GridField::from_nodes(v.grid, |n| {
        let d1 = v.partial(n, 0);
        let d2 = v.partial(n, 1);
        let d3 = v.partial(n, 2);
        Vec3::new(d2.z - d3.y, d3.x - d1.z, d1.y - d2.x)
    })
}

/// Transpose of the discrete gradient: given a cotangent `fbar` on `F`, returns
/// the induced cotangent on the nodal values of `phi`.
pub fn grad_vec_adjoint(grid: &Grid3, fbar: &[Mat3]) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); grid.len()];
    for (n, fb) in fbar.iter().enumerate() {
        for axis in 0..3 {
            let col: Vec3 = fb.column(axis).into_owned();
            for (m, w) in grid.derivative_weights(n, axis) {
                if m != n {
                    out[m] += col * w;
                    out[n] -= col * w;
                }
            }
        }
    }
    out
}

/// Transpose of the discrete row-wise Curl.
pub fn curl_mat_adjoint(grid: &Grid3, cbar: &[Mat3]) -> Vec<Mat3> {
    let mut out = vec![Mat3::zeros(); grid.len()];
    for (n, cb) in cbar.iter().enumerate() {
        // Curl P = sum_r (d_r P) M_r with (M_r)_sj = eps_jrs, so the adjoint
        // contribution of axis r is cb * M_r^T.
        let contrib = [
            // r = 0: col 1 <- -P_:,2 ; col 2 <- P_:,1
            Mat3::from_fn(|i, s| match s {
                1 => cb[(i, 2)],
                2 => -cb[(i, 1)],
                _ => 0.0,
            }),
            // r = 1: col 0 <- P_:,2 ; col 2 <- -P_:,0
            Mat3::from_fn(|i, s| match s {
                0 => -cb[(i, 2)],
                2 => cb[(i, 0)],
                _ => 0.0,
            }),
            // r = 2: col 0 <- -P_:,1 ; col 1 <- P_:,0
            Mat3::from_fn(|i, s| match s {
                0 => cb[(i, 1)],
                1 => -cb[(i, 0)],
                _ => 0.0,
            }),
        ];
        for (axis, c) in contrib.iter().enumerate() {
            for (m, w) in grid.derivative_weights(n, axis) {
                if m != n {
                    out[m] += c * w;
                    out[n] -= c * w;
                }
            }
        }
    }
    out
}

/// Maximum over nodes at least `margin` layers inside of `norm(value)`.
pub fn max_interior<V>(field: &GridField<V>, margin: usize, norm: impl Fn(&V) -> f64) -> f64 {
    field
        .data
        .iter()
        .enumerate()
        .filter(|(n, _)| field.grid.is_interior(*n, margin))
        .map(|(_, v)| norm(v))
        .fold(0.0, f64::max)
}

/// Max interior Frobenius norm of the nodewise difference of two matrix fields.
pub fn max_interior_diff(a: &GridField<Mat3>, b: &GridField<Mat3>, margin: usize) -> Result<f64> {
    let d = a.zip_map(b, |x, y| (x - y).norm())?;
    Ok(max_interior(&d, margin, |v| *v))
}

/// Trapezoidal (product rule) quadrature weight of a node.
pub fn trapezoid_weight(grid: &Grid3, index: usize) -> f64 {
    let c = grid.coords(index);
    (0..3)
        .map(|a| {
            let edge = c[a] == 0 || c[a] + 1 == grid.dims[a];
            grid.spacing[a] * if edge { 0.5 } else { 1.0 }
        })
        .product()
}

// --- file format -----------------------------------------------------------

/// Node payload kinds supported by the field file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Vec3,
    Mat3,
    Rot3,
}

impl FieldKind {
    fn width(self) -> usize {
        match self {
            FieldKind::Vec3 => 3,
            FieldKind::Mat3 | FieldKind::Rot3 => 9,
        }
    }
}

/// A field file decoded into one of the supported payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyField {
    Vec3(GridField<Vec3>),
    Mat3(GridField<Mat3>),
    Rot3(GridField<Rot3>),
}

#[derive(Deserialize)]
struct RawField {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    kind: FieldKind,
    data: Vec<f64>,
}

fn push_number(out: &mut String, x: f64) {
    // 17 significant digits always round-trip an f64.
    out.push_str(&format!("{x:.16e}"));
}

fn write_header(out: &mut String, grid: &Grid3, kind: &str) {
    out.push_str(&format!(
        "{{\"dims\":[{},{},{}],\"spacing\":[",
        grid.dims[0], grid.dims[1], grid.dims[2]
    ));
    for (a, h) in grid.spacing.iter().enumerate() {
        if a > 0 {
            out.push(',');
        }
        push_number(out, *h);
    }
    out.push_str("],\"origin\":[");
    for (a, o) in grid.origin.iter().enumerate() {
        if a > 0 {
            out.push(',');
        }
        push_number(out, *o);
    }
    out.push_str(&format!("],\"kind\":\"{kind}\",\"data\":["));
}

fn encode(grid: &Grid3, kind: &str, values: impl Iterator<Item = f64>) -> String {
    let mut out = String::new();
    write_header(&mut out, grid, kind);
    for (i, x) in values.enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_number(&mut out, x);
    }
    out.push_str("]}\n");
    out
}

fn mat_row_major(m: &Mat3) -> impl Iterator<Item = f64> + '_ {
    (0..3).flat_map(move |i| (0..3).map(move |j| m[(i, j)]))
}

impl AnyField {
    pub fn kind(&self) -> FieldKind {
        match self {
            AnyField::Vec3(_) => FieldKind::Vec3,
            AnyField::Mat3(_) => FieldKind::Mat3,
            AnyField::Rot3(_) => FieldKind::Rot3,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        match self {
            AnyField::Vec3(f) => f.grid(),
            AnyField::Mat3(f) => f.grid(),
            AnyField::Rot3(f) => f.grid(),
        }
    }

    /// Serializes to the JSON field format with 17 significant digits per value.
    pub fn to_json(&self) -> String {
        match self {
            AnyField::Vec3(f) => encode(f.grid(), "vec3", f.data().iter().flat_map(|v| [v.x, v.y, v.z])),
            AnyField::Mat3(f) => encode(f.grid(), "mat3", f.data().iter().flat_map(mat_row_major)),
            AnyField::Rot3(f) => encode(
                f.grid(),
                "rot3",
                f.data().iter().flat_map(|r| mat_row_major(r.matrix()).collect::<Vec<_>>()),
            ),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawField = serde_json::from_str(text)?;
        let grid = Grid3::new(raw.dims, raw.spacing, raw.origin)?;
        let width = raw.kind.width();
        if raw.data.len() != grid.len() * width {
            return Err(Error::FieldFormat(format!(
                "kind {:?} on {:?} needs {} values, found {}",
                raw.kind,
                raw.dims,
                grid.len() * width,
                raw.data.len()
            )));
        }
        if let Some(n) = raw.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample { node: n / width });
        }
        let chunks = raw.data.chunks_exact(width);
        Ok(match raw.kind {
            FieldKind::Vec3 => {
                AnyField::Vec3(GridField::new(grid, chunks.map(|c| Vec3::new(c[0], c[1], c[2])).collect())?)
            }
            FieldKind::Mat3 => AnyField::Mat3(GridField::new(grid, chunks.map(Mat3::from_row_slice).collect())?),
            FieldKind::Rot3 => {
                let mats = GridField::new(grid, chunks.map(Mat3::from_row_slice).collect())?;
                AnyField::Rot3(GridField::<Rot3>::from_matrices(&mats)?)
            }
        })
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn into_vec3(self) -> Result<GridField<Vec3>> {
        match self {
            AnyField::Vec3(f) => Ok(f),
            other => Err(Error::FieldFormat(format!("expected vec3 field, found {:?}", other.kind()))),
        }
    }

    /// Accepts both `mat3` and `rot3` payloads.
    pub fn into_mat3(self) -> Result<GridField<Mat3>> {
        match self {
            AnyField::Mat3(f) => Ok(f),
            AnyField::Rot3(f) => Ok(f.matrices()),
            other => Err(Error::FieldFormat(format!("expected mat3 field, found {:?}", other.kind()))),
        }
    }

    pub fn into_rot3(self) -> Result<GridField<Rot3>> {
        match self {
            AnyField::Rot3(f) => Ok(f),
            AnyField::Mat3(f) => GridField::<Rot3>::from_matrices(&f),
            other => Err(Error::FieldFormat(format!("expected rot3 field, found {:?}", other.kind()))),
        }
    }
}
