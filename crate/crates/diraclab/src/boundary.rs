//! Boundary determination: solutions concentrating at a boundary point,
//! the concentration-limit pairings, and the algebraic recovery of the
//! tangential vector potential and the scalar coefficients at that point.
//!
//! The concentrating family is `U = N P0(t + i grad rho) u0` with
//! `u0 = e^{N (i t.x - rho(x))} eta(M (x', rho(x)))`, `N = M^2 / L`, where
//! `rho` is the defining function of the domain (positive inside,
//! `|grad rho| = 1` on the patch) and `L` a Lipschitz modulus for
//! `grad rho`. Pairing two such families against a potential difference
//! and letting `M` grow isolates the pointwise matrix
//!
//! `limit(t) = 1/2 P0(t - i nu) (V1 - V2)(x0) P0(t + i nu)`
//!
//! (with `eta` normalised so the slice integral of `eta^2` is 1). Summing
//! the limits at `t` and `-t` cancels the antisymmetric terms and leaves
//! `2 [ (a.t) P0(t) - P0(a) + dQ_flipped ]` for the difference coefficients
//! `a = A1 - A2`, from which `(a.t1, a.t2, dq+, dq-)` follow by a linear
//! solve. Only the tangential part of `a` enters: `P0(t - i nu) P0(nu)
//! P0(t + i nu) = 0` identically, the algebraic face of normal-component
//! invisibility.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::potentials::PotentialSpec;
use crate::spinor::{p0, q_matrix, to_complex, CVec3, Mat4, RVec3, ScalarPair, C};

/// Shape of the built-in boundary patches.
#[derive(Debug, Clone, Copy)]
pub enum PatchShape {
    /// `rho(x) = nu_in . (x - x0)`; the domain is the half-space.
    Flat,
    /// `rho(x) = radius - |x - c|` with the sphere centre
    /// `c = x0 + radius nu_in`; the domain is the ball.
    SphericalCap { radius: f64 },
}

/// A boundary point with an adapted orthonormal frame and a defining
/// function for the domain near it.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPatch {
    pub x0: RVec3,
    /// inward unit normal at `x0` (`= grad rho(x0)`)
    pub nu_in: RVec3,
    /// tangent frame; `t2 = nu_in x t1`
    pub t1: RVec3,
    pub t2: RVec3,
    pub shape: PatchShape,
    /// Lipschitz constant of the stated modulus of continuity for
    /// `grad rho`; sets the concentration rate `N = M^2 / L`.
    pub lipschitz: f64,
}

impl BoundaryPatch {
    fn build(x0: RVec3, nu_in: RVec3, t1: RVec3, shape: PatchShape) -> Result<Self> {
        let ok = (nu_in.norm() - 1.0).abs() < 1e-12
            && (t1.norm() - 1.0).abs() < 1e-12
            && nu_in.dot(&t1).abs() < 1e-12;
        if !ok {
            return Err(Error::InvalidParameter(
                "patch needs orthonormal inward normal and tangent".into(),
            ));
        }
        let lipschitz = match shape {
            // any positive constant is a valid modulus for the flat patch
            PatchShape::Flat => 1.0,
            PatchShape::SphericalCap { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidParameter(
                        "spherical cap needs a positive radius".into(),
                    ));
                }
                (1.0 / radius).max(1.0)
            }
        };
        Ok(BoundaryPatch {
            x0,
            nu_in,
            t1,
            t2: nu_in.cross(&t1),
            shape,
            lipschitz,
        })
    }

    pub fn flat(x0: RVec3, nu_in: RVec3, t1: RVec3) -> Result<Self> {
        Self::build(x0, nu_in, t1, PatchShape::Flat)
    }

    pub fn spherical_cap(x0: RVec3, nu_in: RVec3, t1: RVec3, radius: f64) -> Result<Self> {
        Self::build(x0, nu_in, t1, PatchShape::SphericalCap { radius })
    }

    /// Defining function (positive inside the domain).
    pub fn rho(&self, x: &RVec3) -> f64 {
        match self.shape {
            PatchShape::Flat => self.nu_in.dot(&(x - self.x0)),
            PatchShape::SphericalCap { radius } => {
                let c = self.x0 + self.nu_in * radius;
                radius - (x - c).norm()
            }
        }
    }

    /// `grad rho`, a unit vector everywhere it is defined.
    pub fn grad_rho(&self, x: &RVec3) -> RVec3 {
        match self.shape {
            PatchShape::Flat => self.nu_in,
            PatchShape::SphericalCap { radius } => {
                let c = self.x0 + self.nu_in * radius;
                let d = x - c;
                let n = d.norm();
                if n == 0.0 {
                    self.nu_in
                } else {
                    -d / n
                }
            }
        }
    }

    /// The null boundary frame `zeta = t + i grad rho(x)`.
    pub fn zeta(&self, t_hat: &RVec3, x: &RVec3) -> CVec3 {
        to_complex(t_hat) + to_complex(&self.grad_rho(x)) * C::i()
    }

    /// Tangential coordinates of a point in the patch chart.
    fn chart(&self, u1: f64, u2: f64, t: f64) -> RVec3 {
        self.x0 + self.t1 * u1 + self.t2 * u2 + self.nu_in * t
    }
}

/// Cut-off profiles for the concentration bump, normalised so that the
/// boundary-slice integral of `eta(y', 0)^2` is 1.
#[derive(Debug, Clone, Copy)]
pub enum EtaProfile {
    /// `c (1 - |y|^2)^2` on the unit ball
    QuadWell,
    /// `c (1 - |y|^2)^3` on the unit ball
    Cubic,
}

impl EtaProfile {
    fn power(&self) -> i32 {
        match self {
            EtaProfile::QuadWell => 2,
            EtaProfile::Cubic => 3,
        }
    }

    /// normalisation constant for the slice condition
    fn constant(&self) -> f64 {
        // integral over R^2 of (1-r^2)^(2p) = pi / (2p+1)
        let p = self.power();
        ((2 * p + 1) as f64 / std::f64::consts::PI).sqrt()
    }

    pub fn eval(&self, y: &RVec3) -> f64 {
        let t = 1.0 - y.norm_squared();
        if t > 0.0 {
            self.constant() * t.powi(self.power())
        } else {
            0.0
        }
    }

    /// `integral over R^2 of eta(y', 0) dy'` (first power), the target of
    /// the scalar concentration identity.
    pub fn slice_integral(&self) -> f64 {
        // integral of (1-r^2)^p over the unit disc = pi / (p+1)
        self.constant() * std::f64::consts::PI / (self.power() as f64 + 1.0)
    }
}

/// Sweep data for one tangent direction.
#[derive(Debug, Clone)]
pub struct ConcentrationSweep {
    pub t_hat: RVec3,
    pub m_values: Vec<f64>,
    pub pairings: Vec<Mat4>,
    pub extrapolated_limit: Mat4,
}

/// The concentrating matrix solution (leading term, remainder dropped) on
/// a grid: `N P0(t + i grad rho) e^{N(i t.x - rho)} eta(M(x', rho))`.
pub fn concentrating_solution(
    patch: &BoundaryPatch,
    t_hat: &RVec3,
    m: f64,
    eta: EtaProfile,
    grid: GridSpec,
) -> Result<Field> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter("concentration needs M > 0".into()));
    }
    let n_rate = m * m / patch.lipschitz;
    let dx = grid.max_spacing();
    if n_rate * dx > 1.5 {
        return Err(Error::UnresolvedScale {
            h: 1.0 / n_rate,
            min_h: dx / 1.5,
        });
    }
    // the support is the 1/M-ball around x0 in chart coordinates; demand it
    // fits inside the grid box
    for corner in 0..8 {
        let s = |b: usize| if corner >> b & 1 == 0 { -1.0 } else { 1.0 };
        let p = patch.chart(s(0) / m, s(1) / m, (s(2) * 0.5 + 0.5) / m);
        for axis in 0..3 {
            if p[axis] < grid.origin[axis] - 1e-12
                || p[axis] > grid.origin[axis] + grid.extent[axis] + 1e-12
            {
                return Err(Error::InvalidParameter(format!(
                    "eta support (M = {m}) overflows the grid box near axis {axis}"
                )));
            }
        }
    }
    let mut out = Field::zeros(grid, 16);
    for node in 0..grid.num_nodes() {
        let x = grid.point_at(node);
        let r = x - patch.x0;
        let rho = patch.rho(&x);
        if rho < 0.0 {
            continue;
        }
        let y = RVec3::new(patch.t1.dot(&r) * m, patch.t2.dot(&r) * m, rho * m);
        let e = eta.eval(&y);
        if e == 0.0 {
            continue;
        }
        let u0 = (C::i() * (n_rate * t_hat.dot(&x))).exp() * (-n_rate * rho).exp() * e;
        let mat = p0(&patch.zeta(t_hat, &x)) * (u0 * n_rate);
        out.set_matrix(node, &mat);
    }
    Ok(out)
}

/// Scalar concentration integral `M^2 N  integral of e^{-2 N rho} eta_M`
/// over the domain, evaluated on a dedicated M-scaled local quadrature
/// chart; converges to `1/2 integral of eta(y', 0) dy'` as `M` grows.
pub fn scalar_concentration_integral(patch: &BoundaryPatch, eta: EtaProfile, m: f64) -> f64 {
    local_integral(patch, m, |_, _| C::ONE, eta).map(|v| v[(0, 0)].re).unwrap_or(f64::NAN)
}

/// `M^2 N integral of e^{-2 N rho} eta_M^2 f(x) weight(x)` in chart
/// coordinates, where the integrand matrix is
/// `P0(t - i grad rho) dV(x) P0(t + i grad rho)` scaled by the scalar
/// concentration weight — shared quadrature core. The closure receives the
/// physical point and the local `grad rho`.
fn local_integral(
    patch: &BoundaryPatch,
    m: f64,
    f: impl Fn(&RVec3, &RVec3) -> C,
    eta: EtaProfile,
) -> Result<Mat4> {
    let n_rate = m * m / patch.lipschitz;
    // tangential Simpson grid over [-1/M, 1/M]^2; normal direction in the
    // stretched variable tau = N t so the exponential scale is resolved
    // regardless of M
    let nu_pts = 61usize;
    let nt_pts = 241usize;
    let tau_max = (n_rate / m).min(40.0);
    let du = 2.0 / m / (nu_pts - 1) as f64;
    let dtau = tau_max / (nt_pts - 1) as f64;
    let w1d = |i: usize, n: usize| -> f64 {
        if i == 0 || i == n - 1 {
            1.0 / 3.0
        } else if i % 2 == 1 {
            4.0 / 3.0
        } else {
            2.0 / 3.0
        }
    };
    let mut acc = Mat4::zeros();
    for i in 0..nu_pts {
        let u1 = -1.0 / m + i as f64 * du;
        for j in 0..nu_pts {
            let u2 = -1.0 / m + j as f64 * du;
            for l in 0..nt_pts {
                let tau = l as f64 * dtau;
                let t = tau / n_rate;
                let x = patch.chart(u1, u2, t);
                let rho = patch.rho(&x);
                if rho < 0.0 {
                    continue;
                }
                let y = RVec3::new(u1 * m, u2 * m, rho * m);
                let e = eta.eval(&y);
                if e == 0.0 {
                    continue;
                }
                let g = patch.grad_rho(&x);
                let wt = w1d(i, nu_pts) * w1d(j, nu_pts) * w1d(l, nt_pts) * du * du * dtau
                    / n_rate;
                let scalar = e * e * (-2.0 * n_rate * rho).exp() * wt;
                acc += Mat4::identity() * (f(&x, &g) * scalar);
            }
        }
    }
    // halt on the quadrature returning garbage rather than silently
    if !acc.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::ExtrapolationFailure(
            "concentration quadrature produced non-finite values".into(),
        ));
    }
    Ok(acc * C::new(m * m * n_rate, 0.0))
}

/// The matrix concentration value at one `M`:
/// `M^2 N integral of eta_M^2 e^{-2 N rho} P0(t - i grad rho) dV P0(t + i grad rho)`.
pub fn concentration_value(
    patch: &BoundaryPatch,
    t_hat: &RVec3,
    dv_at: &impl Fn(&RVec3) -> Mat4,
    m: f64,
    eta: EtaProfile,
) -> Result<Mat4> {
    let n_rate = m * m / patch.lipschitz;
    let nu_pts = 61usize;
    let nt_pts = 241usize;
    let tau_max = (n_rate / m).min(40.0);
    let du = 2.0 / m / (nu_pts - 1) as f64;
    let dtau = tau_max / (nt_pts - 1) as f64;
    let w1d = |i: usize, n: usize| -> f64 {
        if i == 0 || i == n - 1 {
            1.0 / 3.0
        } else if i % 2 == 1 {
            4.0 / 3.0
        } else {
            2.0 / 3.0
        }
    };
    let tc = to_complex(t_hat);
    let mut acc = Mat4::zeros();
    for i in 0..nu_pts {
        let u1 = -1.0 / m + i as f64 * du;
        for j in 0..nu_pts {
            let u2 = -1.0 / m + j as f64 * du;
            for l in 0..nt_pts {
                let tau = l as f64 * dtau;
                let t = tau / n_rate;
                let x = patch.chart(u1, u2, t);
                let rho = patch.rho(&x);
                if rho < 0.0 {
                    continue;
                }
                let y = RVec3::new(u1 * m, u2 * m, rho * m);
                let e = eta.eval(&y);
                if e == 0.0 {
                    continue;
                }
                let g = to_complex(&patch.grad_rho(&x));
                let zeta = tc + g * C::i();
                let zbar = tc - g * C::i();
                let wt =
                    w1d(i, nu_pts) * w1d(j, nu_pts) * w1d(l, nt_pts) * du * du * dtau / n_rate;
                let scalar = e * e * (-2.0 * n_rate * rho).exp() * wt;
                acc += p0(&zbar) * dv_at(&x) * p0(&zeta) * C::new(scalar, 0.0);
            }
        }
    }
    if !acc.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::ExtrapolationFailure(
            "concentration quadrature produced non-finite values".into(),
        ));
    }
    Ok(acc * C::new(m * m * n_rate, 0.0))
}

/// Sweep the concentration values over `m_values` and extrapolate to
/// `M = infinity` by a linear fit in `1/M` over the three largest `M`.
/// The limit approximates `1/2 P0(t - i nu) dV(x0) P0(t + i nu)`.
pub fn concentration_limit(
    patch: &BoundaryPatch,
    t_hat: &RVec3,
    spec1: &PotentialSpec,
    spec2: &PotentialSpec,
    m_values: &[f64],
    eta: EtaProfile,
) -> Result<ConcentrationSweep> {
    if m_values.len() < 3 {
        return Err(Error::InvalidParameter(
            "concentration sweep needs at least three M values".into(),
        ));
    }
    let mut ms = m_values.to_vec();
    ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // normal components of the difference must vanish at x0 (the gauge
    // normalisation the recovery relies on)
    let da0 = spec1.a_at(&patch.x0) - spec2.a_at(&patch.x0);
    if da0.dot(&patch.nu_in).abs() > 1e-10 * (1.0 + da0.norm()) {
        return Err(Error::InvalidParameter(
            "the difference of vector potentials has a normal component at x0; \
             gauge it away before boundary recovery"
                .into(),
        ));
    }
    let dv_at = |x: &RVec3| spec1.v_at(x) - spec2.v_at(x);
    let mut pairings = Vec::with_capacity(ms.len());
    for &m in &ms {
        pairings.push(concentration_value(patch, t_hat, &dv_at, m, eta)?);
    }
    // linear fit p(M) = limit + c / M over the three largest M
    let tail = &ms[ms.len() - 3..];
    let vals = &pairings[ms.len() - 3..];
    let mut sxx = 0.0;
    let mut sx = 0.0;
    let mut sw = 0.0;
    let mut sxy = Mat4::zeros();
    let mut sy = Mat4::zeros();
    for (m, v) in tail.iter().zip(vals) {
        let x = 1.0 / m;
        sxx += x * x;
        sx += x;
        sw += 1.0;
        sxy += v * C::new(x, 0.0);
        sy += *v;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-14 {
        return Err(Error::ExtrapolationFailure(
            "degenerate M values in the concentration fit".into(),
        ));
    }
    let extrapolated_limit = (sy * C::new(sxx, 0.0) - sxy * C::new(sx, 0.0)) * C::new(1.0 / det, 0.0);
    Ok(ConcentrationSweep {
        t_hat: *t_hat,
        m_values: ms,
        pairings,
        extrapolated_limit,
    })
}

/// Recovered boundary values of the coefficient differences at `x0`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryValues {
    /// tangential components `(a . t1, a . t2)` of `A1 - A2`
    pub a_tan: [C; 2],
    pub q: ScalarPair,
    /// relative residual of the least-squares fit
    pub residual: f64,
}

/// Solve for the boundary values from concentration limits at tangent
/// directions (any set spanning the tangent plane; `{t1, -t1, t2}` is the
/// canonical choice). Each limit is modelled as
/// `1/2 P0(t - i nu) (P0(a1 t1 + a2 t2) + Q) P0(t + i nu)`, linear in the
/// four unknowns.
pub fn solve_boundary_values(
    patch: &BoundaryPatch,
    limits: &[(RVec3, Mat4)],
) -> Result<BoundaryValues> {
    if limits.len() < 3 {
        return Err(Error::InvalidParameter(
            "boundary solve needs at least three tangent limits".into(),
        ));
    }
    let nu = to_complex(&patch.nu_in);
    let half = C::new(0.5, 0.0);
    let mut rows = nalgebra::DMatrix::<C>::zeros(16 * limits.len(), 4);
    let mut rhs = nalgebra::DVector::<C>::zeros(16 * limits.len());
    for (li, (t_hat, limit)) in limits.iter().enumerate() {
        if t_hat.dot(&patch.nu_in).abs() > 1e-10 {
            return Err(Error::InvalidParameter(
                "concentration directions must be tangent to the patch".into(),
            ));
        }
        let zeta = to_complex(t_hat) + nu * C::i();
        let zbar = to_complex(t_hat) - nu * C::i();
        let pl = p0(&zbar);
        let pr = p0(&zeta);
        let cols = [
            pl * p0(&to_complex(&patch.t1)) * pr * half,
            pl * p0(&to_complex(&patch.t2)) * pr * half,
            pl * q_matrix(ScalarPair::new(C::ONE, C::ZERO)) * pr * half,
            pl * q_matrix(ScalarPair::new(C::ZERO, C::ONE)) * pr * half,
        ];
        for r in 0..4 {
            for c in 0..4 {
                let row = li * 16 + r * 4 + c;
                for (jc, col) in cols.iter().enumerate() {
                    rows[(row, jc)] = col[(r, c)];
                }
                rhs[row] = limit[(r, c)];
            }
        }
    }
    let svd = rows.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let sol = svd
        .solve(&rhs, 1e-12 * max_sv)
        .map_err(|e| Error::SingularSystem(format!("boundary value fit failed: {e}")))?;
    let residual = (&rows * &sol - &rhs).norm() / rhs.norm().max(1e-300);
    Ok(BoundaryValues {
        a_tan: [sol[0], sol[1]],
        q: ScalarPair::new(sol[2], sol[3]),
        residual,
    })
}

/// The closed-form limit matrix for a constant difference, the oracle the
/// sweeps are tested against.
pub fn closed_form_limit(patch: &BoundaryPatch, t_hat: &RVec3, dv0: &Mat4) -> Mat4 {
    let zeta = patch.zeta(t_hat, &patch.x0);
    let zbar = to_complex(t_hat) - to_complex(&patch.nu_in) * C::i();
    p0(&zbar) * dv0 * p0(&zeta) * C::new(0.5, 0.0)
}
