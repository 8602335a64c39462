//! Electromagnetic potentials: analytic building blocks, their sampled
//! grid form, and the smooth/rough mollifier split used by the rough-CGO
//! construction.
//!
//! The full potential is `V = P0(A) + Q` with a real vector potential `A`
//! and the diagonal electric block `Q = diag(q+ I2, q- I2)`. All potentials
//! here are compactly supported inside the grid box with a configurable
//! margin of identically-zero node layers, which keeps periodised FFT
//! operations honest.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::spinor::{
    p0, q_matrix, q_matrix_flipped, to_complex, CVec3, Mat4, RVec3, ScalarPair, C,
};

/// Radially symmetric analytic bump profiles.
#[derive(Debug, Clone, Copy)]
pub enum Bump {
    /// `exp(-|x-c|^2 / (2 sigma^2))`; supported everywhere but numerically
    /// negligible a few sigma out.
    Gaussian { center: RVec3, sigma: f64 },
    /// `(1 - |x-c|^2/r^2)^4` inside the ball of radius `r`, zero outside;
    /// compactly supported and C^3.
    Poly { center: RVec3, radius: f64 },
    /// `max(0, 1 - |x-c|/r)`; Lipschitz but not C^1, the rough test case.
    Tent { center: RVec3, radius: f64 },
    /// `(1 - |x-c|^2/r^2)^2` inside the ball, zero outside; C^1 with the
    /// lowest gradient-to-mass ratio of the smooth profiles here.
    QuadWell { center: RVec3, radius: f64 },
}

impl Bump {
    pub fn eval(&self, x: &RVec3) -> f64 {
        match self {
            Bump::Gaussian { center, sigma } => {
                (-(x - center).norm_squared() / (2.0 * sigma * sigma)).exp()
            }
            Bump::Poly { center, radius } => {
                let t = 1.0 - (x - center).norm_squared() / (radius * radius);
                if t > 0.0 {
                    t.powi(4)
                } else {
                    0.0
                }
            }
            Bump::Tent { center, radius } => (1.0 - (x - center).norm() / radius).max(0.0),
            Bump::QuadWell { center, radius } => {
                let t = 1.0 - (x - center).norm_squared() / (radius * radius);
                if t > 0.0 {
                    t * t
                } else {
                    0.0
                }
            }
        }
    }

    /// Gradient where it exists (the tent profile is differentiable away
    /// from its center and rim, which is all quadrature ever samples).
    pub fn grad(&self, x: &RVec3) -> RVec3 {
        match self {
            Bump::Gaussian { center, sigma } => {
                let r = x - center;
                -r * (self.eval(x) / (sigma * sigma))
            }
            Bump::Poly { center, radius } => {
                let r = x - center;
                let t = 1.0 - r.norm_squared() / (radius * radius);
                if t > 0.0 {
                    -r * (8.0 * t.powi(3) / (radius * radius))
                } else {
                    RVec3::zeros()
                }
            }
            Bump::Tent { center, radius } => {
                let r = x - center;
                let d = r.norm();
                if d > 0.0 && d < *radius {
                    -r / (d * radius)
                } else {
                    RVec3::zeros()
                }
            }
            Bump::QuadWell { center, radius } => {
                let r = x - center;
                let t = 1.0 - r.norm_squared() / (radius * radius);
                if t > 0.0 {
                    -r * (4.0 * t / (radius * radius))
                } else {
                    RVec3::zeros()
                }
            }
        }
    }
}

/// Analytic potential: sums of direction-weighted bumps for `A` and
/// coefficient-weighted bumps for `q+`, `q-`.
#[derive(Debug, Clone, Default)]
pub struct PotentialSpec {
    pub a_terms: Vec<(RVec3, Bump)>,
    pub qp_terms: Vec<(C, Bump)>,
    pub qm_terms: Vec<(C, Bump)>,
    /// Constant offsets added to q± everywhere (not subject to the support
    /// margin).  Used as the eigenvalue-avoidance shift that keeps the
    /// boundary value problem away from the spectrum.
    pub qp_const: C,
    pub qm_const: C,
}

impl PotentialSpec {
    pub fn a_at(&self, x: &RVec3) -> RVec3 {
        self.a_terms.iter().map(|(d, b)| d * b.eval(x)).sum()
    }

    /// `curl A` using `curl(d f) = grad f x d`.
    pub fn curl_a_at(&self, x: &RVec3) -> RVec3 {
        self.a_terms.iter().map(|(d, b)| b.grad(x).cross(d)).sum()
    }

    pub fn qp_at(&self, x: &RVec3) -> C {
        self.qp_const + self.qp_terms.iter().map(|(c, b)| c * b.eval(x)).sum::<C>()
    }

    pub fn qm_at(&self, x: &RVec3) -> C {
        self.qm_const + self.qm_terms.iter().map(|(c, b)| c * b.eval(x)).sum::<C>()
    }

    /// Full symbol `V(x) = P0(A(x)) + Q(x)`.
    pub fn v_at(&self, x: &RVec3) -> Mat4 {
        p0(&to_complex(&self.a_at(x))) + q_matrix(ScalarPair::new(self.qp_at(x), self.qm_at(x)))
    }

    /// Sample onto a grid, forcing the outer `margin` node layers to zero.
    pub fn sample(&self, grid: GridSpec, margin: usize) -> Result<Potential> {
        let a = Field::from_fn(grid, 3, |x, v| {
            let av = self.a_at(&x);
            for j in 0..3 {
                v[j] = C::new(av[j], 0.0);
            }
        });
        // Margin zeroing applies to the variable (bump) parts only; the
        // constant offsets survive on the full grid.
        let qp = Field::scalar_from_fn(grid, |x| self.qp_at(&x) - self.qp_const);
        let qm = Field::scalar_from_fn(grid, |x| self.qm_at(&x) - self.qm_const);
        let mut pot = Potential {
            grid,
            a,
            qp,
            qm,
            support_margin: margin,
        };
        pot.zero_margin();
        for node in 0..grid.num_nodes() {
            pot.qp.values[node] += self.qp_const;
            pot.qm.values[node] += self.qm_const;
        }
        Ok(pot)
    }
}

/// Grid-sampled potential.
#[derive(Debug, Clone)]
pub struct Potential {
    pub grid: GridSpec,
    /// 3-component field (real content unless produced by arithmetic).
    pub a: Field,
    pub qp: Field,
    pub qm: Field,
    /// Number of outer node layers that are identically zero.
    pub support_margin: usize,
}

impl Potential {
    pub fn zero(grid: GridSpec) -> Self {
        Self {
            grid,
            a: Field::zeros(grid, 3),
            qp: Field::zeros(grid, 1),
            qm: Field::zeros(grid, 1),
            support_margin: 0,
        }
    }

    fn zero_margin(&mut self) {
        let m = self.support_margin;
        if m == 0 {
            return;
        }
        let n = self.grid.n;
        for node in 0..self.grid.num_nodes() {
            let [i, j, k] = self.grid.coords(node);
            let inside = i >= m && j >= m && k >= m && i < n[0] - m && j < n[1] - m && k < n[2] - m;
            if !inside {
                for c in 0..3 {
                    self.a.values[node * 3 + c] = C::ZERO;
                }
                self.qp.values[node] = C::ZERO;
                self.qm.values[node] = C::ZERO;
            }
        }
    }

    pub fn a_vec(&self, node: usize) -> CVec3 {
        let v = self.a.node(node);
        CVec3::new(v[0], v[1], v[2])
    }

    pub fn q_at(&self, node: usize) -> ScalarPair {
        ScalarPair::new(self.qp.values[node], self.qm.values[node])
    }

    /// `V(x) = P0(A) + Q` at a node.
    pub fn v_matrix(&self, node: usize) -> Mat4 {
        p0(&self.a_vec(node)) + q_matrix(self.q_at(node))
    }

    /// Pointwise `P0(A) u`.
    pub fn p0_a_mul(&self, u: &Field) -> Result<Field> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch(
                "potential and field live on different grids".into(),
            ));
        }
        u.left_mul(|node| p0(&self.a_vec(node)))
    }

    /// Pointwise `Q u` (or `Q_I u` with `flipped`).
    pub fn q_mul(&self, u: &Field, flipped: bool) -> Result<Field> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch(
                "potential and field live on different grids".into(),
            ));
        }
        u.left_mul(|node| {
            let q = self.q_at(node);
            if flipped {
                q_matrix_flipped(q)
            } else {
                q_matrix(q)
            }
        })
    }

    /// Pointwise `V u = (P0(A) + Q) u`.
    pub fn v_mul(&self, u: &Field) -> Result<Field> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch(
                "potential and field live on different grids".into(),
            ));
        }
        u.left_mul(|node| self.v_matrix(node))
    }

    /// `curl A` by grid differentiation (3-component field).
    pub fn curl_a(&self) -> Field {
        let d = [
            self.a.derivative(0),
            self.a.derivative(1),
            self.a.derivative(2),
        ];
        let mut out = Field::zeros(self.grid, 3);
        for node in 0..self.grid.num_nodes() {
            let at = |axis: usize, comp: usize| d[axis].node(node)[comp];
            let o = out.node_mut(node);
            o[0] = at(1, 2) - at(2, 1);
            o[1] = at(2, 0) - at(0, 2);
            o[2] = at(0, 1) - at(1, 0);
        }
        out
    }

    /// Split into a smooth part (convolution with a bump of width `eps`)
    /// and the rough remainder, returned as `(smooth, remainder)`.
    ///
    /// Both parts keep the full grid; the smooth part's support grows by
    /// `eps`, so the caller must leave enough margin inside the box.
    pub fn mollify(&self, eps: f64) -> Result<(Potential, Potential)> {
        let dx = self.grid.max_spacing();
        if eps < 2.0 * dx {
            return Err(Error::InvalidParameter(format!(
                "mollifier width {eps} below twice the grid spacing {dx}"
            )));
        }
        let kernel = mollifier_kernel(&self.grid, eps);
        let smooth_a = convolve(&self.a, &kernel);
        let smooth_qp = convolve(&self.qp, &kernel);
        let smooth_qm = convolve(&self.qm, &kernel);
        let mut rough = self.clone();
        rough.a.add_scaled(&smooth_a, -C::ONE)?;
        rough.qp.add_scaled(&smooth_qp, -C::ONE)?;
        rough.qm.add_scaled(&smooth_qm, -C::ONE)?;
        rough.support_margin = 0;
        let smooth = Potential {
            grid: self.grid,
            a: smooth_a,
            qp: smooth_qp,
            qm: smooth_qm,
            support_margin: 0,
        };
        Ok((smooth, rough))
    }

    /// Max norm over `A`, `q+`, `q-` values.
    pub fn sup_norm(&self) -> f64 {
        self.a
            .max_norm()
            .max(self.qp.max_norm())
            .max(self.qm.max_norm())
    }
}

/// Pointwise difference `V1(x) - V2(x)` as a matrix field.
pub fn potential_difference(p1: &Potential, p2: &Potential) -> Result<Field> {
    if p1.grid != p2.grid {
        return Err(Error::GridMismatch(
            "potential difference needs a shared grid".into(),
        ));
    }
    let mut out = Field::zeros(p1.grid, 16);
    for node in 0..p1.grid.num_nodes() {
        let m = p1.v_matrix(node) - p2.v_matrix(node);
        out.set_matrix(node, &m);
    }
    Ok(out)
}

/// Discrete mollifier: a compactly supported bump of width `eps`, sampled
/// on the periodised grid (centered at the origin node, wrapped), and
/// normalised so its discrete integral is exactly one.
fn mollifier_kernel(grid: &GridSpec, eps: f64) -> Field {
    let s = grid.spacing();
    let mut kern = Field::zeros(*grid, 1);
    let mut total = 0.0;
    for node in 0..grid.num_nodes() {
        let [i, j, k] = grid.coords(node);
        // wrapped signed offsets from the origin node
        let off = |idx: usize, n: usize| -> f64 {
            let m = if idx <= n / 2 {
                idx as f64
            } else {
                idx as f64 - n as f64
            };
            m
        };
        let y = RVec3::new(
            off(i, grid.n[0]) * s[0],
            off(j, grid.n[1]) * s[1],
            off(k, grid.n[2]) * s[2],
        );
        let t = y.norm_squared() / (eps * eps);
        let v = if t < 1.0 {
            (-1.0 / (1.0 - t)).exp()
        } else {
            0.0
        };
        kern.values[node] = C::new(v, 0.0);
        total += v;
    }
    let dv = s[0] * s[1] * s[2];
    kern.scale(C::new(1.0 / (total * dv), 0.0));
    kern
}

/// Circular convolution (per component) via FFT, scaled as a quadrature
/// of `integral f(x - y) g(y) dy`.
fn convolve(f: &Field, kernel: &Field) -> Field {
    let mut khat = kernel.clone();
    khat.fft3(false);
    let mut out = f.clone();
    out.fft3(false);
    let s = f.grid.spacing();
    let dv = s[0] * s[1] * s[2];
    for node in 0..f.grid.num_nodes() {
        let kv = khat.values[node] * dv;
        for c in 0..f.ncomp {
            out.values[node * f.ncomp + c] *= kv;
        }
    }
    out.fft3(true);
    out
}
