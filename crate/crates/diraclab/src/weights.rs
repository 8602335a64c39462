//! Carleman weights and the null frames attached to them.
//!
//! A weight is a real function `phi` entering the conjugated operator
//! `P0(hD) + i P0(grad phi) + hV`. The limiting weights used throughout are
//! linear, `phi = alpha.x`; a convexified variant `phi + h phi^2 / (2 eps)`
//! and the logarithmic weight `log|x - x0|` are provided for ratio sweeps.
//!
//! A null frame packages a complex vector `zeta = alpha + i beta` with
//! orthonormal real unit vectors `alpha, beta`, so that `zeta.zeta = 0` and
//! `rho = zeta.x` solves the eikonal equation `(grad rho).(grad rho) = 0`,
//! together with a real lattice mode `k` orthogonal to both.

use crate::error::{Error, Result};
use crate::spinor::{to_complex, CVec3, RVec3, C};

/// Linear weight `phi(x) = alpha.x` with `|alpha| = 1`.
#[derive(Debug, Clone, Copy)]
pub struct LinearWeight {
    pub alpha: RVec3,
}

/// Convexified weight `phi + h phi^2 / (2 eps)` over a linear base.
#[derive(Debug, Clone, Copy)]
pub struct ConvexifiedWeight {
    pub base: LinearWeight,
    pub h: f64,
    pub eps: f64,
}

/// Logarithmic weight `phi(x) = log |x - x0|`.
#[derive(Debug, Clone, Copy)]
pub struct LogWeight {
    pub x0: RVec3,
}

#[derive(Debug, Clone, Copy)]
pub enum Weight {
    Linear(LinearWeight),
    Convexified(ConvexifiedWeight),
    Log(LogWeight),
}

impl LinearWeight {
    pub fn new(alpha: RVec3) -> Result<Self> {
        let n = alpha.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter(
                "weight direction must be a nonzero finite vector".into(),
            ));
        }
        Ok(Self { alpha: alpha / n })
    }
}

impl ConvexifiedWeight {
    pub fn new(base: LinearWeight, h: f64, eps: f64) -> Result<Self> {
        if !(h > 0.0 && eps > 0.0) {
            return Err(Error::InvalidParameter(
                "convexified weight needs h > 0 and eps > 0".into(),
            ));
        }
        Ok(Self { base, h, eps })
    }
}

impl Weight {
    pub fn eval(&self, x: &RVec3) -> f64 {
        match self {
            Weight::Linear(w) => w.alpha.dot(x),
            Weight::Convexified(w) => {
                let p = w.base.alpha.dot(x);
                p + w.h * p * p / (2.0 * w.eps)
            }
            Weight::Log(w) => (x - w.x0).norm().ln(),
        }
    }

    pub fn grad(&self, x: &RVec3) -> RVec3 {
        match self {
            Weight::Linear(w) => w.alpha,
            Weight::Convexified(w) => {
                let p = w.base.alpha.dot(x);
                w.base.alpha * (1.0 + w.h * p / w.eps)
            }
            Weight::Log(w) => {
                let r = x - w.x0;
                r / r.norm_squared()
            }
        }
    }

    pub fn laplacian(&self, x: &RVec3) -> f64 {
        match self {
            Weight::Linear(_) => 0.0,
            Weight::Convexified(w) => w.h / w.eps,
            Weight::Log(w) => 1.0 / (x - w.x0).norm_squared(),
        }
    }
}

/// Complete `alpha` to an orthonormal pair `(alpha, beta)` and return the
/// null eikonal gradient `grad rho = alpha + i beta`. `beta` is obtained by
/// Gram-Schmidt from the first standard basis vector not parallel to
/// `alpha`, so the choice is deterministic.
pub fn eikonal_linear(alpha: &RVec3) -> Result<(RVec3, CVec3)> {
    let n = alpha.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(
            "eikonal direction must be a nonzero finite vector".into(),
        ));
    }
    let a = alpha / n;
    for j in 0..3 {
        let mut e = RVec3::zeros();
        e[j] = 1.0;
        if 1.0 - a.dot(&e).abs() > 1e-9 {
            let b = (e - a * a.dot(&e)).normalize();
            let zeta = to_complex(&a) + to_complex(&b) * C::I;
            return Ok((b, zeta));
        }
    }
    unreachable!("a unit vector cannot be parallel to all three axes")
}

/// Null frame `zeta = alpha + i beta` with an attached real mode `k`
/// orthogonal to both, and the semiclassical parameter `h` it will be
/// used with.
#[derive(Debug, Clone)]
pub struct NullFrame {
    pub zeta: CVec3,
    pub alpha: RVec3,
    pub beta: RVec3,
    pub k: RVec3,
    pub h: f64,
}

impl NullFrame {
    /// Frame from a weight direction alone (`k = 0`).
    pub fn from_direction(alpha: &RVec3, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("frame needs h > 0".into()));
        }
        let a = alpha.normalize();
        let (beta, zeta) = eikonal_linear(&a)?;
        Ok(Self {
            zeta,
            alpha: a,
            beta,
            k: RVec3::zeros(),
            h,
        })
    }

    /// Frame adapted to a nonzero Fourier mode `k`: both `alpha` and `beta`
    /// are orthogonal to `k`, with `beta = k_hat x alpha` fixing the
    /// orientation deterministically.
    pub fn for_mode(k: &RVec3, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("frame needs h > 0".into()));
        }
        let kn = k.norm();
        if !(kn > 0.0) {
            return Err(Error::UnrecoverableMode(
                "frame for the zero mode is not defined".into(),
            ));
        }
        let khat = k / kn;
        // first standard basis vector not parallel to k, projected off k
        let mut alpha = RVec3::zeros();
        for j in 0..3 {
            let mut e = RVec3::zeros();
            e[j] = 1.0;
            if 1.0 - khat.dot(&e).abs() > 1e-9 {
                alpha = (e - khat * khat.dot(&e)).normalize();
                break;
            }
        }
        let beta = khat.cross(&alpha);
        let zeta = to_complex(&alpha) + to_complex(&beta) * C::I;
        Ok(Self {
            zeta,
            alpha,
            beta,
            k: *k,
            h,
        })
    }

    /// The conjugate frame, carrying `conj(zeta) = alpha - i beta`.
    pub fn conjugate(&self) -> Self {
        Self {
            zeta: self.zeta.map(|z| z.conj()),
            alpha: self.alpha,
            beta: -self.beta,
            k: self.k,
            h: self.h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor::cdot;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn eikonal_for_axis_directions() {
        // alpha = e1 pairs with beta = e2; alpha = e3 pairs with beta = e1
        let (b, z) = eikonal_linear(&RVec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(b, RVec3::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(cdot(&z, &z).norm(), 0.0, epsilon = 1e-15);
        let (b, _) = eikonal_linear(&RVec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(b, RVec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn convexified_weight_gradient_and_laplacian() {
        let base = LinearWeight::new(RVec3::new(1.0, 0.0, 0.0)).unwrap();
        let w = Weight::Convexified(ConvexifiedWeight::new(base, 0.1, 0.5).unwrap());
        let x = RVec3::new(0.3, -0.2, 0.9);
        // finite-difference cross-check
        let d = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += d;
            xm[j] -= d;
            let fd = (w.eval(&xp) - w.eval(&xm)) / (2.0 * d);
            assert_abs_diff_eq!(fd, w.grad(&x)[j], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(w.laplacian(&x), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn log_weight_is_harmonic_nowhere_in_3d() {
        let w = Weight::Log(LogWeight { x0: RVec3::zeros() });
        let x = RVec3::new(0.6, -0.8, 0.3);
        let d = 1e-5;
        let mut lap = 0.0;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += d;
            xm[j] -= d;
            lap += (w.eval(&xp) - 2.0 * w.eval(&x) + w.eval(&xm)) / (d * d);
        }
        assert_abs_diff_eq!(lap, w.laplacian(&x), epsilon = 1e-4);
        assert_abs_diff_eq!(w.laplacian(&x), 1.0 / x.norm_squared(), epsilon = 1e-15);
    }

    #[test]
    fn zero_direction_is_rejected() {
        assert!(LinearWeight::new(RVec3::zeros()).is_err());
        assert!(eikonal_linear(&RVec3::zeros()).is_err());
        assert!(NullFrame::for_mode(&RVec3::zeros(), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn frames_are_null_and_orthogonal(
            kx in -3.0f64..3.0, ky in -3.0f64..3.0, kz in -3.0f64..3.0,
        ) {
            prop_assume!(RVec3::new(kx, ky, kz).norm() > 1e-3);
            let k = RVec3::new(kx, ky, kz);
            let f = NullFrame::for_mode(&k, 0.25).unwrap();
            prop_assert!(cdot(&f.zeta, &f.zeta).norm() < 1e-12);
            prop_assert!(f.alpha.dot(&k).abs() < 1e-12 * k.norm());
            prop_assert!(f.beta.dot(&k).abs() < 1e-12 * k.norm());
            prop_assert!((f.alpha.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.beta.norm() - 1.0).abs() < 1e-12);
            prop_assert!(f.alpha.dot(&f.beta).abs() < 1e-12);
            let g = f.conjugate();
            prop_assert!(cdot(&g.zeta, &g.zeta).norm() < 1e-12);
        }
    }
}
