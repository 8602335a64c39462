//! Uniform box grids and the discrete calculus used everywhere else:
//! 4th-order finite differences with one-sided closure, trapezoid and
//! Simpson quadrature, FFT-based semiclassical Sobolev norms, and a small
//! binary dump format for fields.
//!
//! Fields store complex values node-major, component-minor. A field with
//! one component is a scalar, three components a vector, four a spinor and
//! sixteen a 4x4 matrix (row-major components), used for matrix-valued
//! solutions whose columns are independent spinor solutions.

use crate::error::{Error, Result};
use crate::spinor::{CVec3, Mat4, RVec3, C};
use rustfft::FftPlanner;
use std::io::{Read, Write};
use std::path::Path;

/// Axis-aligned uniform grid over `[origin, origin + extent]`, inclusive of
/// both endpoints, with `n[axis]` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: RVec3,
    pub extent: RVec3,
    pub n: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: RVec3, extent: RVec3, n: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if n[a] < 5 {
                return Err(Error::InvalidParameter(format!(
                    "grid needs at least 5 nodes per axis, got {}",
                    n[a]
                )));
            }
            if !(extent[a] > 0.0) || !extent[a].is_finite() {
                return Err(Error::InvalidParameter(
                    "grid extent must be positive and finite".into(),
                ));
            }
        }
        Ok(Self { origin, extent, n })
    }

    /// Cube `[-half, half]^3` with `n` nodes per axis.
    pub fn cube(half: f64, n: usize) -> Result<Self> {
        Self::new(
            RVec3::new(-half, -half, -half),
            RVec3::new(2.0 * half, 2.0 * half, 2.0 * half),
            [n, n, n],
        )
    }

    pub fn spacing(&self) -> RVec3 {
        RVec3::new(
            self.extent[0] / (self.n[0] - 1) as f64,
            self.extent[1] / (self.n[1] - 1) as f64,
            self.extent[2] / (self.n[2] - 1) as f64,
        )
    }

    pub fn max_spacing(&self) -> f64 {
        let s = self.spacing();
        s[0].max(s[1]).max(s[2])
    }

    pub fn num_nodes(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    #[inline]
    pub fn coords(&self, node: usize) -> [usize; 3] {
        let k = node % self.n[2];
        let j = (node / self.n[2]) % self.n[1];
        let i = node / (self.n[1] * self.n[2]);
        [i, j, k]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> RVec3 {
        let s = self.spacing();
        self.origin + RVec3::new(i as f64 * s[0], j as f64 * s[1], k as f64 * s[2])
    }

    pub fn point_at(&self, node: usize) -> RVec3 {
        let [i, j, k] = self.coords(node);
        self.point(i, j, k)
    }

    /// Period used when the grid is viewed as one cell of a periodic
    /// lattice: `n * spacing` per axis (one spacing beyond the far face).
    pub fn period(&self, axis: usize) -> f64 {
        self.n[axis] as f64 * self.spacing()[axis]
    }

    /// Angular frequency of DFT bin `m` along `axis`, with negative bins in
    /// the upper half.
    pub fn freq(&self, axis: usize, m: usize) -> f64 {
        let n = self.n[axis] as isize;
        let m = m as isize;
        let signed = if m <= n / 2 { m } else { m - n };
        2.0 * std::f64::consts::PI * signed as f64 / self.period(axis)
    }

    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i == self.n[0] - 1 || j == self.n[1] - 1 || k == self.n[2] - 1
    }
}

/// Refuse scales the grid cannot resolve: operations that materialise
/// oscillation of wavelength `~h` need `h >= 4 * max spacing`.
pub fn check_scale(h: f64, grid: &GridSpec) -> Result<()> {
    let min_h = 4.0 * grid.max_spacing();
    if h < min_h {
        return Err(Error::UnresolvedScale { h, min_h });
    }
    Ok(())
}

/// Complex field over a grid; `values[node * ncomp + c]`.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: GridSpec,
    pub ncomp: usize,
    pub values: Vec<C>,
}

impl Field {
    pub fn zeros(grid: GridSpec, ncomp: usize) -> Self {
        Self {
            grid,
            ncomp,
            values: vec![C::ZERO; grid.num_nodes() * ncomp],
        }
    }

    pub fn from_fn(grid: GridSpec, ncomp: usize, f: impl Fn(RVec3, &mut [C])) -> Self {
        let mut out = Self::zeros(grid, ncomp);
        for node in 0..grid.num_nodes() {
            let x = grid.point_at(node);
            f(x, &mut out.values[node * ncomp..(node + 1) * ncomp]);
        }
        out
    }

    pub fn scalar_from_fn(grid: GridSpec, f: impl Fn(RVec3) -> C) -> Self {
        Self::from_fn(grid, 1, |x, v| v[0] = f(x))
    }

    #[inline]
    pub fn node(&self, node: usize) -> &[C] {
        &self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    #[inline]
    pub fn node_mut(&mut self, node: usize) -> &mut [C] {
        &mut self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn same_shape(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.ncomp != other.ncomp {
            return Err(Error::GridMismatch(
                "fields have different grids or component counts".into(),
            ));
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &Field, coeff: C) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += coeff * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, coeff: C) {
        for v in self.values.iter_mut() {
            *v *= coeff;
        }
    }

    /// Multiply every component by a scalar field, node by node.
    pub fn mul_scalar_field(&mut self, s: &Field) -> Result<()> {
        if self.grid != s.grid || s.ncomp != 1 {
            return Err(Error::GridMismatch(
                "scalar multiplier must be a scalar field on the same grid".into(),
            ));
        }
        for node in 0..self.grid.num_nodes() {
            let f = s.values[node];
            for v in self.node_mut(node) {
                *v *= f;
            }
        }
        Ok(())
    }

    /// Partial derivative along `axis`, 4th order: centered 5-point stencils
    /// in the interior, one-sided 5-point stencils at the first two layers.
    pub fn derivative(&self, axis: usize) -> Field {
        let grid = self.grid;
        let n = grid.n[axis];
        let dx = grid.spacing()[axis];
        let table = stencil_table(n, dx);
        let mut out = Field::zeros(grid, self.ncomp);
        let nc = self.ncomp;
        let stride = match axis {
            0 => grid.n[1] * grid.n[2],
            1 => grid.n[2],
            _ => 1,
        } * nc;
        // iterate over lines along `axis`
        let (na, nb) = match axis {
            0 => (grid.n[1], grid.n[2]),
            1 => (grid.n[0], grid.n[2]),
            _ => (grid.n[0], grid.n[1]),
        };
        for a in 0..na {
            for b in 0..nb {
                let base_node = match axis {
                    0 => grid.idx(0, a, b),
                    1 => grid.idx(a, 0, b),
                    _ => grid.idx(a, b, 0),
                } * nc;
                for i in 0..n {
                    let (start, w) = &table[i];
                    for c in 0..nc {
                        let mut acc = C::ZERO;
                        for (s, wt) in w.iter().enumerate() {
                            acc += self.values[base_node + (start + s) * stride + c] * *wt;
                        }
                        out.values[base_node + i * stride + c] = acc;
                    }
                }
            }
        }
        out
    }

    /// L2 norm with uniform cell weights (exact trapezoid for fields that
    /// vanish on the boundary).
    pub fn l2_norm(&self) -> f64 {
        let s = self.grid.spacing();
        let dv = s[0] * s[1] * s[2];
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Trapezoid integral of a scalar field.
    pub fn integrate(&self) -> Result<C> {
        if self.ncomp != 1 {
            return Err(Error::InvalidParameter(
                "integrate expects a scalar field".into(),
            ));
        }
        let w = trapezoid_weights(&self.grid);
        let mut acc = C::ZERO;
        for node in 0..self.grid.num_nodes() {
            acc += self.values[node] * w(node);
        }
        Ok(acc)
    }

    /// Simpson integral of a scalar field; every axis must have an odd
    /// node count.
    pub fn integrate_simpson(&self) -> Result<C> {
        if self.ncomp != 1 {
            return Err(Error::InvalidParameter(
                "integrate_simpson expects a scalar field".into(),
            ));
        }
        let w = simpson_weights(&self.grid)?;
        let mut acc = C::ZERO;
        for node in 0..self.grid.num_nodes() {
            acc += self.values[node] * w(node);
        }
        Ok(acc)
    }

    /// Trapezoid integral of a 16-component matrix field.
    pub fn integrate_matrix(&self) -> Result<Mat4> {
        if self.ncomp != 16 {
            return Err(Error::InvalidParameter(
                "integrate_matrix expects a 16-component field".into(),
            ));
        }
        let w = trapezoid_weights(&self.grid);
        let mut acc = Mat4::zeros();
        for node in 0..self.grid.num_nodes() {
            let wt = w(node);
            let vals = self.node(node);
            for r in 0..4 {
                for c in 0..4 {
                    acc[(r, c)] += vals[r * 4 + c] * wt;
                }
            }
        }
        Ok(acc)
    }

    pub fn matrix_at(&self, node: usize) -> Mat4 {
        debug_assert_eq!(self.ncomp, 16);
        let v = self.node(node);
        Mat4::from_fn(|r, c| v[r * 4 + c])
    }

    pub fn set_matrix(&mut self, node: usize, m: &Mat4) {
        debug_assert_eq!(self.ncomp, 16);
        let v = self.node_mut(node);
        for r in 0..4 {
            for c in 0..4 {
                v[r * 4 + c] = m[(r, c)];
            }
        }
    }

    /// Left-multiply a spinor (4) or matrix (16) field by a node-dependent
    /// 4x4 matrix.
    pub fn left_mul(&self, m_at: impl Fn(usize) -> Mat4) -> Result<Field> {
        let mut out = Field::zeros(self.grid, self.ncomp);
        match self.ncomp {
            4 => {
                for node in 0..self.grid.num_nodes() {
                    let m = m_at(node);
                    let u = self.node(node);
                    let o = out.node_mut(node);
                    for r in 0..4 {
                        let mut acc = C::ZERO;
                        for c in 0..4 {
                            acc += m[(r, c)] * u[c];
                        }
                        o[r] = acc;
                    }
                }
            }
            16 => {
                for node in 0..self.grid.num_nodes() {
                    let m = m_at(node);
                    let prod = m * self.matrix_at(node);
                    out.set_matrix(node, &prod);
                }
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "left_mul expects 4 or 16 components".into(),
                ))
            }
        }
        Ok(out)
    }

    /// Forward (unnormalised) or inverse (1/N) DFT of every component.
    pub fn fft3(&mut self, inverse: bool) {
        let n = self.grid.n;
        let nc = self.ncomp;
        let mut planner = FftPlanner::<f64>::new();
        for axis in 0..3 {
            let len = n[axis];
            let fft = if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            };
            let stride = match axis {
                0 => n[1] * n[2],
                1 => n[2],
                _ => 1,
            } * nc;
            let (na, nb) = match axis {
                0 => (n[1], n[2]),
                1 => (n[0], n[2]),
                _ => (n[0], n[1]),
            };
            let mut line = vec![C::ZERO; len];
            for a in 0..na {
                for b in 0..nb {
                    let base = match axis {
                        0 => self.grid.idx(0, a, b),
                        1 => self.grid.idx(a, 0, b),
                        _ => self.grid.idx(a, b, 0),
                    } * nc;
                    for c in 0..nc {
                        for i in 0..len {
                            line[i] = self.values[base + i * stride + c];
                        }
                        fft.process(&mut line);
                        let scale = if inverse { 1.0 / len as f64 } else { 1.0 };
                        for i in 0..len {
                            self.values[base + i * stride + c] = line[i] * scale;
                        }
                    }
                }
            }
        }
    }

    /// Semiclassical Sobolev norm `|| <hD>^s u ||_{L2}` on the periodised
    /// box, computed spectrally.
    pub fn sobolev_norm(&self, s: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("sobolev_norm needs h > 0".into()));
        }
        let mut hat = self.clone();
        hat.fft3(false);
        let grid = self.grid;
        let ntot = grid.num_nodes() as f64;
        let dv = {
            let sp = grid.spacing();
            sp[0] * sp[1] * sp[2]
        };
        let mut acc = 0.0;
        for node in 0..grid.num_nodes() {
            let [i, j, k] = grid.coords(node);
            let kk = RVec3::new(grid.freq(0, i), grid.freq(1, j), grid.freq(2, k));
            let weight = (1.0 + h * h * kk.norm_squared()).powf(s);
            for c in 0..self.ncomp {
                acc += weight * hat.values[node * self.ncomp + c].norm_sqr();
            }
        }
        Ok((acc * dv / ntot).sqrt())
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let mut buf = Vec::with_capacity(49 + self.values.len() * 16);
        for a in 0..3 {
            buf.extend_from_slice(&self.grid.origin[a].to_le_bytes());
        }
        for a in 0..3 {
            buf.extend_from_slice(&self.grid.extent[a].to_le_bytes());
        }
        for a in 0..3 {
            buf.extend_from_slice(&(self.grid.n[a] as u32).to_le_bytes());
        }
        buf.push(kind_code(self.ncomp)?);
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read_dump(path: &Path) -> Result<Field> {
        let mut f = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        if buf.len() < 61 {
            return Err(Error::InvalidParameter("field dump truncated".into()));
        }
        let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        let origin = RVec3::new(f64_at(0), f64_at(8), f64_at(16));
        let extent = RVec3::new(f64_at(24), f64_at(32), f64_at(40));
        let mut n = [0usize; 3];
        for a in 0..3 {
            n[a] = u32::from_le_bytes(buf[48 + 4 * a..52 + 4 * a].try_into().unwrap()) as usize;
        }
        let ncomp = ncomp_of_kind(buf[60])?;
        let grid = GridSpec::new(origin, extent, n)?;
        let count = grid.num_nodes() * ncomp;
        if buf.len() != 61 + count * 16 {
            return Err(Error::InvalidParameter(
                "field dump has wrong payload size".into(),
            ));
        }
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let o = 61 + 16 * i;
            values.push(C::new(f64_at(o), f64_at(o + 8)));
        }
        Ok(Field {
            grid,
            ncomp,
            values,
        })
    }
}

fn kind_code(ncomp: usize) -> Result<u8> {
    match ncomp {
        1 => Ok(0),
        3 => Ok(1),
        4 => Ok(2),
        16 => Ok(3),
        _ => Err(Error::InvalidParameter(format!(
            "no dump kind for {ncomp} components"
        ))),
    }
}

fn ncomp_of_kind(kind: u8) -> Result<usize> {
    match kind {
        0 => Ok(1),
        1 => Ok(3),
        2 => Ok(4),
        3 => Ok(16),
        _ => Err(Error::InvalidParameter(format!("unknown dump kind {kind}"))),
    }
}

/// Finite-difference weights for the first derivative at `x0` from nodes
/// `xs` (Fornberg's recursion, exact for polynomials up to the stencil
/// degree).
pub fn fd_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let m = 1usize; // first derivative
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Per-index 5-point stencils along one axis: `(start, weights)` so that
/// `f'(x_i) = sum_s weights[s] f(x_{start+s})`.
pub(crate) fn stencil_table(n: usize, dx: f64) -> Vec<(usize, [f64; 5])> {
    (0..n)
        .map(|i| {
            let start = (i as isize - 2).clamp(0, n as isize - 5) as usize;
            let xs: Vec<f64> = (0..5).map(|s| (start + s) as f64 * dx).collect();
            let w = fd_weights(i as f64 * dx, &xs);
            (start, [w[0], w[1], w[2], w[3], w[4]])
        })
        .collect()
}

fn axis_trapezoid(n: usize, dx: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx })
        .collect()
}

fn axis_simpson(n: usize, dx: f64) -> Result<Vec<f64>> {
    if n % 2 == 0 {
        return Err(Error::InvalidParameter(
            "Simpson quadrature needs an odd node count".into(),
        ));
    }
    Ok((0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * dx / 3.0
        })
        .collect())
}

fn trapezoid_weights(grid: &GridSpec) -> impl Fn(usize) -> f64 + '_ {
    let s = grid.spacing();
    let w: [Vec<f64>; 3] = [
        axis_trapezoid(grid.n[0], s[0]),
        axis_trapezoid(grid.n[1], s[1]),
        axis_trapezoid(grid.n[2], s[2]),
    ];
    let g = *grid;
    move |node| {
        let [i, j, k] = g.coords(node);
        w[0][i] * w[1][j] * w[2][k]
    }
}

fn simpson_weights(grid: &GridSpec) -> Result<impl Fn(usize) -> f64 + '_> {
    let s = grid.spacing();
    let w: [Vec<f64>; 3] = [
        axis_simpson(grid.n[0], s[0])?,
        axis_simpson(grid.n[1], s[1])?,
        axis_simpson(grid.n[2], s[2])?,
    ];
    let g = *grid;
    Ok(move |node: usize| {
        let [i, j, k] = g.coords(node);
        w[0][i] * w[1][j] * w[2][k]
    })
}

/// `integral of conj(g) . f` over the box with Simpson volume weights.
pub fn inner_product_simpson(f: &Field, g: &Field) -> Result<C> {
    f.same_shape(g)?;
    let w = simpson_weights(&f.grid)?;
    let mut acc = C::ZERO;
    for node in 0..f.grid.num_nodes() {
        let wt = w(node);
        let fv = f.node(node);
        let gv = g.node(node);
        for c in 0..f.ncomp {
            acc += gv[c].conj() * fv[c] * wt;
        }
    }
    Ok(acc)
}

/// The six faces of the box, in canonical priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

pub const FACES: [Face; 6] = [
    Face::XMin,
    Face::XMax,
    Face::YMin,
    Face::YMax,
    Face::ZMin,
    Face::ZMax,
];

impl Face {
    pub fn axis(&self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    pub fn is_max(&self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }

    /// Outward unit normal.
    pub fn normal(&self) -> RVec3 {
        let mut v = RVec3::zeros();
        v[self.axis()] = if self.is_max() { 1.0 } else { -1.0 };
        v
    }

    /// All node indices on this face (including its edges and corners).
    pub fn nodes(&self, grid: &GridSpec) -> Vec<usize> {
        let axis = self.axis();
        let fixed = if self.is_max() { grid.n[axis] - 1 } else { 0 };
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut out = Vec::with_capacity(grid.n[a1] * grid.n[a2]);
        for p in 0..grid.n[a1] {
            for q in 0..grid.n[a2] {
                let mut ijk = [0usize; 3];
                ijk[axis] = fixed;
                ijk[a1] = p;
                ijk[a2] = q;
                out.push(grid.idx(ijk[0], ijk[1], ijk[2]));
            }
        }
        out
    }
}

/// `integral over one face of conj(g) . f` with 2D Simpson weights.
pub fn face_inner_product_simpson(f: &Field, g: &Field, face: Face) -> Result<C> {
    f.same_shape(g)?;
    let grid = f.grid;
    let axis = face.axis();
    let (a1, a2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let s = grid.spacing();
    let w1 = axis_simpson(grid.n[a1], s[a1])?;
    let w2 = axis_simpson(grid.n[a2], s[a2])?;
    let fixed = if face.is_max() { grid.n[axis] - 1 } else { 0 };
    let mut acc = C::ZERO;
    for p in 0..grid.n[a1] {
        for q in 0..grid.n[a2] {
            let mut ijk = [0usize; 3];
            ijk[axis] = fixed;
            ijk[a1] = p;
            ijk[a2] = q;
            let node = grid.idx(ijk[0], ijk[1], ijk[2]);
            let wt = w1[p] * w2[q];
            let fv = f.node(node);
            let gv = g.node(node);
            for c in 0..f.ncomp {
                acc += gv[c].conj() * fv[c] * wt;
            }
        }
    }
    Ok(acc)
}

/// 2D Simpson quadrature rule on one face as explicit `(node, weight)`
/// pairs.
pub fn face_quadrature(grid: &GridSpec, face: Face) -> Result<Vec<(usize, f64)>> {
    let axis = face.axis();
    let (a1, a2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let s = grid.spacing();
    let w1 = axis_simpson(grid.n[a1], s[a1])?;
    let w2 = axis_simpson(grid.n[a2], s[a2])?;
    let fixed = if face.is_max() { grid.n[axis] - 1 } else { 0 };
    let mut out = Vec::with_capacity(grid.n[a1] * grid.n[a2]);
    for p in 0..grid.n[a1] {
        for q in 0..grid.n[a2] {
            let mut ijk = [0usize; 3];
            ijk[axis] = fixed;
            ijk[a1] = p;
            ijk[a2] = q;
            out.push((grid.idx(ijk[0], ijk[1], ijk[2]), w1[p] * w2[q]));
        }
    }
    Ok(out)
}

/// Simpson integral of a 16-component matrix field.
pub fn integrate_matrix_simpson(f: &Field) -> Result<Mat4> {
    if f.ncomp != 16 {
        return Err(Error::InvalidParameter(
            "integrate_matrix_simpson expects a 16-component field".into(),
        ));
    }
    let w = simpson_weights(&f.grid)?;
    let mut acc = Mat4::zeros();
    for node in 0..f.grid.num_nodes() {
        acc += f.matrix_at(node) * C::new(w(node), 0.0);
    }
    Ok(acc)
}

/// Canonical partition of the boundary nodes: each node is assigned to the
/// first face containing it in the order XMin, XMax, YMin, YMax, ZMin,
/// ZMax, so edges and corners appear exactly once.
pub fn boundary_partition(grid: &GridSpec) -> Vec<(usize, Face)> {
    let mut seen = vec![false; grid.num_nodes()];
    let mut out = Vec::new();
    for face in FACES {
        for node in face.nodes(grid) {
            if !seen[node] {
                seen[node] = true;
                out.push((node, face));
            }
        }
    }
    out
}

/// Apply the semiclassical free operator `P0(hD)` (with `D = -i grad`) to a
/// spinor (4) or matrix (16) field.
pub fn apply_p0_d(u: &Field, h: f64) -> Result<Field> {
    if u.ncomp != 4 && u.ncomp != 16 {
        return Err(Error::InvalidParameter(
            "apply_p0_d expects 4 or 16 components".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("apply_p0_d needs h > 0".into()));
    }
    let d = [u.derivative(0), u.derivative(1), u.derivative(2)];
    let mut out = Field::zeros(u.grid, u.ncomp);
    let mih = C::new(0.0, -h); // hD = -i h grad
    let ncols = u.ncomp / 4;
    for node in 0..u.grid.num_nodes() {
        for col in 0..ncols {
            let at = |f: &Field, r: usize| f.node(node)[r * ncols + col];
            // v_j = (hD_j u), spinor components (a+, b+, a-, b-)
            let mut v = [[C::ZERO; 4]; 3];
            for j in 0..3 {
                for r in 0..4 {
                    v[j][r] = mih * at(&d[j], r);
                }
            }
            // P0(w) u = (sigma.w u_minus, sigma.w u_plus)
            let o = out.node_mut(node);
            let (t0, t1) = sigma_rows(&v, 2, 3);
            o[0 * ncols + col] = t0;
            o[1 * ncols + col] = t1;
            let (b0, b1) = sigma_rows(&v, 0, 1);
            o[2 * ncols + col] = b0;
            o[3 * ncols + col] = b1;
        }
    }
    Ok(out)
}

/// `sigma . w` acting on the two components `(v[j][ra], v[j][rb])`, where
/// the vector `w` is itself indexed by `j`.
#[inline]
fn sigma_rows(v: &[[C; 4]; 3], ra: usize, rb: usize) -> (C, C) {
    let a = |j: usize| v[j][ra];
    let b = |j: usize| v[j][rb];
    // sigma.w (a, b) = (w3 a + (w1 - i w2) b, (w1 + i w2) a - w3 b)
    // with component j of w taken from v[j]
    let first = a(2) + (b(0) - C::I * b(1));
    let second = (a(0) + C::I * a(1)) - b(2);
    (first, second)
}

/// Pointwise `P0(v(x)) u` for a spinor or matrix field, with `v` a
/// node-indexed complex vector.
pub fn p0_pointwise_mul(u: &Field, v_at: impl Fn(usize) -> CVec3) -> Result<Field> {
    u.left_mul(|node| crate::spinor::p0(&v_at(node)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor::p0;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn fornberg_reproduces_known_five_point_weights() {
        // centered
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let w = fd_weights(2.0, &xs);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-13);
        }
        // fully one-sided
        let w = fd_weights(0.0, &xs);
        let expect = [
            -25.0 / 12.0,
            48.0 / 12.0,
            -36.0 / 12.0,
            16.0 / 12.0,
            -3.0 / 12.0,
        ];
        for (a, b) in w.iter().zip(expect) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-13);
        }
        // offset by one
        let w = fd_weights(1.0, &xs);
        let expect = [
            -3.0 / 12.0,
            -10.0 / 12.0,
            18.0 / 12.0,
            -6.0 / 12.0,
            1.0 / 12.0,
        ];
        for (a, b) in w.iter().zip(expect) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-13);
        }
    }

    #[test]
    fn derivative_exact_on_quartics() {
        let grid = GridSpec::cube(1.0, 9).unwrap();
        let f = Field::scalar_from_fn(grid, |x| {
            c(
                x[0].powi(4) + 2.0 * x[1].powi(3) * x[2] - x[0] * x[1] * x[2],
                0.5 * x[2].powi(4),
            )
        });
        let d0 = f.derivative(0);
        let d2 = f.derivative(2);
        for node in 0..grid.num_nodes() {
            let x = grid.point_at(node);
            let e0 = c(4.0 * x[0].powi(3) - x[1] * x[2], 0.0);
            let e2 = c(2.0 * x[1].powi(3) - x[0] * x[1], 2.0 * x[2].powi(3));
            assert_abs_diff_eq!(d0.values[node].re, e0.re, epsilon = 1e-11);
            assert_abs_diff_eq!(d0.values[node].im, e0.im, epsilon = 1e-11);
            assert_abs_diff_eq!(d2.values[node].re, e2.re, epsilon = 1e-11);
            assert_abs_diff_eq!(d2.values[node].im, e2.im, epsilon = 1e-11);
        }
    }

    #[test]
    fn quadrature_on_smooth_integrand() {
        let grid = GridSpec::cube(1.0, 33).unwrap();
        let f = Field::scalar_from_fn(grid, |x| {
            c((x[0] * 1.3).sin() * (x[1] * 0.7).cos() * x[2].cos(), 0.0)
        });
        // separable exact value: int sin(1.3 x) dx over [-1,1] = 0
        let exact = 0.0;
        let t = f.integrate().unwrap();
        let s = f.integrate_simpson().unwrap();
        assert_abs_diff_eq!(t.re, exact, epsilon = 1e-4);
        assert_abs_diff_eq!(s.re, exact, epsilon = 1e-8);
        // a non-vanishing one
        let g = Field::scalar_from_fn(grid, |x| c(x[0].cos() * x[1].cos() * x[2].cos(), 0.0));
        let exact = (2.0 * 1.0f64.sin()).powi(3);
        assert_abs_diff_eq!(g.integrate_simpson().unwrap().re, exact, epsilon = 1e-5);
        assert!((g.integrate().unwrap().re - exact).abs() < 1e-2);
    }

    #[test]
    fn sobolev_norm_of_lattice_mode() {
        let grid = GridSpec::cube(1.0, 16).unwrap();
        // pure lattice mode of the periodised box
        let kappa = RVec3::new(grid.freq(0, 3), grid.freq(1, 14), 0.0);
        let u = Field::scalar_from_fn(grid, |x| C::new(0.0, kappa.dot(&x)).exp());
        let h = 0.3;
        let n0 = u.sobolev_norm(0.0, h).unwrap();
        let n1 = u.sobolev_norm(1.0, h).unwrap();
        let factor = (1.0 + h * h * kappa.norm_squared()).sqrt();
        assert_abs_diff_eq!(n1 / n0, factor, epsilon = 1e-10);
        assert_abs_diff_eq!(n0, u.l2_norm(), epsilon = 1e-10);
    }

    #[test]
    fn free_dirac_matches_symbol_on_plane_wave_polynomial() {
        let grid = GridSpec::cube(1.0, 11).unwrap();
        let h = 0.7;
        // u = p(x) * spinor with cubic p: stencils are exact
        let spin = [c(1.0, 0.0), c(0.0, -1.0), c(0.5, 0.5), c(-2.0, 0.25)];
        let u = Field::from_fn(grid, 4, |x, v| {
            let p = c(x[0].powi(3) - x[1] * x[2], x[2] * x[2]);
            for r in 0..4 {
                v[r] = p * spin[r];
            }
        });
        let got = apply_p0_d(&u, h).unwrap();
        for node in 0..grid.num_nodes() {
            let x = grid.point_at(node);
            let grad = CVec3::new(
                c(3.0 * x[0] * x[0], 0.0),
                c(-x[2], 0.0),
                c(-x[1], 2.0 * x[2]),
            );
            let hd = grad.map(|g| g * C::new(0.0, -h));
            let m = p0(&hd);
            let sv = nalgebra::Vector4::from_row_slice(&spin);
            let expect = m * sv;
            for r in 0..4 {
                let e = expect[r];
                let g = got.node(node)[r];
                assert_abs_diff_eq!(g.re, e.re, epsilon = 1e-10);
                assert_abs_diff_eq!(g.im, e.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn matrix_field_columns_behave_like_spinors() {
        let grid = GridSpec::cube(1.0, 7).unwrap();
        let h = 0.5;
        let m0 = Mat4::from_fn(|r, q| c(0.3 * r as f64 - 0.1 * q as f64, 0.2 * (r * q) as f64));
        let u = Field::from_fn(grid, 16, |x, v| {
            let p = c(x[0] * x[0] - x[1], x[2]);
            for r in 0..4 {
                for q in 0..4 {
                    v[r * 4 + q] = p * m0[(r, q)];
                }
            }
        });
        let full = apply_p0_d(&u, h).unwrap();
        // compare column 1 against an independent spinor computation
        let col = Field::from_fn(grid, 4, |x, v| {
            let p = c(x[0] * x[0] - x[1], x[2]);
            for r in 0..4 {
                v[r] = p * m0[(r, 1)];
            }
        });
        let cres = apply_p0_d(&col, h).unwrap();
        for node in 0..grid.num_nodes() {
            for r in 0..4 {
                let a = full.node(node)[r * 4 + 1];
                let b = cres.node(node)[r];
                assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
                assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn boundary_partition_counts_each_node_once() {
        let grid = GridSpec::cube(1.0, 6).unwrap();
        let part = boundary_partition(&grid);
        let expect = 6 * 6 * 6 - 4 * 4 * 4;
        assert_eq!(part.len(), expect);
        let mut nodes: Vec<usize> = part.iter().map(|(n, _)| *n).collect();
        nodes.sort_unstable();
        nodes.dedup();
        assert_eq!(nodes.len(), expect);
        // corner goes to XMin by priority
        let corner = grid.idx(0, 0, 0);
        let f = part.iter().find(|(n, _)| *n == corner).unwrap().1;
        assert_eq!(f, Face::XMin);
    }

    #[test]
    fn dump_roundtrip() {
        let grid = GridSpec::new(
            RVec3::new(-0.5, 0.0, 1.0),
            RVec3::new(1.0, 2.0, 0.5),
            [5, 6, 7],
        )
        .unwrap();
        let f = Field::from_fn(grid, 4, |x, v| {
            for (r, vr) in v.iter_mut().enumerate() {
                *vr = c(x[0] + r as f64, x[1] * x[2]);
            }
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        f.write_dump(&path).unwrap();
        let g = Field::read_dump(&path).unwrap();
        assert_eq!(f.grid, g.grid);
        assert_eq!(f.ncomp, g.ncomp);
        assert_eq!(f.values, g.values);
    }

    #[test]
    fn scale_guard_rejects_coarse_grids() {
        let grid = GridSpec::cube(1.0, 9).unwrap(); // spacing 0.25
        assert!(check_scale(0.5, &grid).is_err());
        assert!(check_scale(1.1, &grid).is_ok());
    }
}
