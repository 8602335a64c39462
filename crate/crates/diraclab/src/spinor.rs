//! Exact 4x4 spinor algebra for the symbol `P0(xi)`.
//!
//! The free Dirac symbol is the off-diagonal block matrix
//!
//! ```text
//! P0(xi) = [ 0         sigma.xi ]
//!          [ sigma.xi  0        ]
//! ```
//!
//! built from the 2x2 Pauli matrices. It satisfies `P0(xi)^2 = (xi.xi) I4`
//! with the bilinear (unconjugated) dot product, which is what makes null
//! vectors `zeta` with `zeta.zeta = 0` produce rank-two symbols.

use nalgebra::{Matrix2, Matrix4, Vector3};
use num_complex::Complex64;

pub type C = Complex64;
pub type Mat2 = Matrix2<C>;
pub type Mat4 = Matrix4<C>;
/// Complex 3-vector; all dot products on these are bilinear, not hermitian.
pub type CVec3 = Vector3<C>;
pub type RVec3 = Vector3<f64>;

/// The pair of electric potentials coupling the two spinor halves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPair {
    pub plus: C,
    pub minus: C,
}

impl ScalarPair {
    pub fn new(plus: C, minus: C) -> Self {
        Self { plus, minus }
    }

    pub fn zero() -> Self {
        Self {
            plus: C::ZERO,
            minus: C::ZERO,
        }
    }
}

pub fn to_complex(v: &RVec3) -> CVec3 {
    v.map(|x| C::new(x, 0.0))
}

/// Bilinear dot product `a.b = sum a_j b_j` (no conjugation).
pub fn cdot(a: &CVec3, b: &CVec3) -> C {
    a.dot(b)
}

/// Pauli matrix `sigma_j` for `j` in `1..=3`.
///
/// Panics on any other index; the index is always a literal at call sites.
pub fn pauli(j: usize) -> Mat2 {
    let o = C::ZERO;
    let l = C::ONE;
    let i = C::I;
    match j {
        1 => Mat2::new(o, l, l, o),
        2 => Mat2::new(o, -i, i, o),
        3 => Mat2::new(l, o, o, -l),
        _ => panic!("pauli index must be 1, 2 or 3, got {j}"),
    }
}

/// `sigma . v = v1 sigma_1 + v2 sigma_2 + v3 sigma_3`.
pub fn sigma_dot(v: &CVec3) -> Mat2 {
    let o = C::ZERO;
    let mut m = Mat2::new(o, o, o, o);
    for j in 0..3 {
        m += pauli(j + 1) * v[j];
    }
    m
}

/// The free Dirac symbol `P0(xi)`.
pub fn p0(xi: &CVec3) -> Mat4 {
    let s = sigma_dot(xi);
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&s);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&s);
    m
}

/// Anticommutator `P0(zeta) P0(xi) + P0(xi) P0(zeta)`; equals
/// `2 (zeta.xi) I4` by the Clifford relation.
pub fn anticommutator(zeta: &CVec3, xi: &CVec3) -> Mat4 {
    let a = p0(zeta);
    let b = p0(xi);
    a * b + b * a
}

/// Diagonal electric block `Q = diag(q+ I2, q- I2)`.
pub fn q_matrix(q: ScalarPair) -> Mat4 {
    let mut m = Mat4::zeros();
    for d in 0..2 {
        m[(d, d)] = q.plus;
        m[(d + 2, d + 2)] = q.minus;
    }
    m
}

/// The swapped block `Q_I = diag(q- I2, q+ I2)`; it satisfies the
/// intertwining identity `P0(a) Q = Q_I P0(a)`.
pub fn q_matrix_flipped(q: ScalarPair) -> Mat4 {
    q_matrix(ScalarPair::new(q.minus, q.plus))
}

/// Zeroth-order matrix `W` in the factorisation
/// `(P0(D+A) + Q)(P0(D+A) - Q_I) = (D+A)^2 I4 + W`:
///
/// diagonal blocks `sigma.(curl A) - q+ q- I2`, off-diagonal blocks
/// `-sigma.(D q+)` (top right) and `-sigma.(D q-)` (bottom left), where
/// `D = -i grad`.
pub fn w_matrix(curl_a: &CVec3, grad_qp: &CVec3, grad_qm: &CVec3, q: ScalarPair) -> Mat4 {
    let diag = sigma_dot(curl_a) - Mat2::identity() * (q.plus * q.minus);
    // -sigma.(Dq) = -sigma.(-i grad q) = i sigma.(grad q)
    let tr = sigma_dot(grad_qp) * C::I;
    let bl = sigma_dot(grad_qm) * C::I;
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&diag);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&diag);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&tr);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&bl);
    m
}

/// Coefficient of `P0(zeta)` in `m` for a null frame `zeta = alpha + i beta`
/// with orthonormal real and imaginary parts: `tr(P0(conj zeta) m) / 8`.
pub fn null_projection_coeff(m: &Mat4, zeta: &CVec3) -> C {
    let zbar = zeta.map(|z| z.conj());
    (p0(&zbar) * m).trace() / C::new(8.0, 0.0)
}

/// Trace of a product of four symbols:
/// `tr(P0(w)P0(x)P0(y)P0(z)) = 4 [(w.x)(y.z) - (w x x).(y x z)]`
/// with bilinear dots and cross products.
pub fn trace_four(w: &CVec3, x: &CVec3, y: &CVec3, z: &CVec3) -> C {
    let a = cdot(w, x) * cdot(y, z);
    let b = cdot(&w.cross(x), &y.cross(z));
    (a - b) * C::new(4.0, 0.0)
}
