//! Complex geometrical optics (CGO) solutions.
//!
//! A CGO solution has the form `U = e^{s zeta.x / h} (C0 + h C1 + R)` with
//! a null frame `zeta` and matrix amplitudes built from a scalar phase:
//!
//! * the phase `phi` solves the transport equation
//!   `zeta.grad phi = -zeta.A` through the Cauchy transform,
//! * `C0 = E P0(zeta)` with envelope `E = e^{i phi + i k.x}`,
//! * `C1 = (1/i) E (P0(grad phi + k + A) - Q_I) + E P0(zeta) G`, where the
//!   second-order correction `G` solves another transport equation driven
//!   by the Schroedinger-type factorisation remainder
//!   `H = (D+A)^2 + W` applied to the envelope.
//!
//! For Lipschitz potentials the amplitudes are built from a mollified
//! potential; applying the conjugated operator with the full potential then
//! measures the honest defect, including the rough remainder term.

use crate::cauchy::{cauchy_transform, CauchyMethod};
use crate::error::{Error, Result};
use crate::grid::{apply_p0_d, check_scale, Field};
use crate::potentials::Potential;
use crate::spinor::{cdot, p0, to_complex, w_matrix, CVec3, Mat4, C};
use crate::weights::NullFrame;

#[derive(Debug, Clone)]
pub struct CgoAnsatz {
    pub frame: NullFrame,
    /// 1 keeps only `C0`, 2 adds the corrector `C1`.
    pub order: usize,
    /// scalar phase `phi`
    pub phi: Field,
    /// scalar envelope `E = e^{i phi + i k.x}`
    pub envelope: Field,
    /// matrix amplitude including the envelope factor
    pub c0: Field,
    /// matrix corrector including the envelope factor (zero when order 1)
    pub c1: Field,
    /// mollifier width used to smooth the potential, if any
    pub eps: Option<f64>,
}

/// Build a CGO ansatz of the given order. With `mollify_eps` the amplitude
/// construction uses the smoothed part of the potential only, as required
/// for merely Lipschitz data.
pub fn build_cgo(
    pot: &Potential,
    frame: &NullFrame,
    order: usize,
    mollify_eps: Option<f64>,
) -> Result<CgoAnsatz> {
    if order != 1 && order != 2 {
        return Err(Error::InvalidParameter("CGO order must be 1 or 2".into()));
    }
    let grid = pot.grid;
    let sharp;
    let pot_sharp = match mollify_eps {
        Some(eps) => {
            let (smooth, _) = pot.mollify(eps)?;
            sharp = smooth;
            &sharp
        }
        None => pot,
    };
    let zeta = frame.zeta;
    let k = frame.k;

    // phase: zeta.grad phi = -zeta.A
    let mut rhs = Field::zeros(grid, 1);
    for node in 0..grid.num_nodes() {
        rhs.values[node] = -cdot(&zeta, &pot_sharp.a_vec(node));
    }
    let phi = cauchy_transform(&rhs, &zeta, CauchyMethod::SpectralTorus)?.g;

    let envelope = Field::from_fn(grid, 1, |x, v| v[0] = C::ZERO * x[0]); // filled below
    let mut envelope = envelope;
    for node in 0..grid.num_nodes() {
        let x = grid.point_at(node);
        let kx = C::new(0.0, k.dot(&x));
        envelope.values[node] = (C::I * phi.values[node] + kx).exp();
    }

    // C0 = E P0(zeta)
    let p0z = p0(&zeta);
    let mut c0 = Field::zeros(grid, 16);
    for node in 0..grid.num_nodes() {
        let m = p0z * envelope.values[node];
        c0.set_matrix(node, &m);
    }

    let mut c1 = Field::zeros(grid, 16);
    if order == 2 {
        let grad_phi = [phi.derivative(0), phi.derivative(1), phi.derivative(2)];
        // g(x) = grad phi + k + A
        let g_at = |node: usize| -> CVec3 {
            CVec3::new(
                grad_phi[0].values[node],
                grad_phi[1].values[node],
                grad_phi[2].values[node],
            ) + to_complex(&k)
                + pot_sharp.a_vec(node)
        };

        // scalar part of E^{-1} H E with the constant |k|^2 removed:
        // -i lap phi - i div A + (grad phi + k + A).(grad phi + k + A) - |k|^2;
        // the pure constant would only add a secular linearly-growing
        // corrector while the defect it cures is already O(h^2)
        let lap_phi = {
            let mut acc = Field::zeros(grid, 1);
            for axis in 0..3 {
                let dd = grad_phi[axis].derivative(axis);
                acc.add_scaled(&dd, C::ONE)?;
            }
            acc
        };
        let div_a = {
            let mut acc = Field::zeros(grid, 1);
            for axis in 0..3 {
                let d = pot_sharp.a.derivative(axis);
                for node in 0..grid.num_nodes() {
                    acc.values[node] += d.node(node)[axis];
                }
            }
            acc
        };
        let curl = pot_sharp.curl_a();
        let dqp = [
            pot_sharp.qp.derivative(0),
            pot_sharp.qp.derivative(1),
            pot_sharp.qp.derivative(2),
        ];
        let dqm = [
            pot_sharp.qm.derivative(0),
            pot_sharp.qm.derivative(1),
            pot_sharp.qm.derivative(2),
        ];

        // transport source: -(1/2) E^{-1} H E as a matrix field
        let mut source = Field::zeros(grid, 16);
        for node in 0..grid.num_nodes() {
            let g = g_at(node);
            let scal = -C::I * lap_phi.values[node] - C::I * div_a.values[node] + cdot(&g, &g)
                - C::new(k.norm_squared(), 0.0);
            let cv = CVec3::new(curl.node(node)[0], curl.node(node)[1], curl.node(node)[2]);
            let gp = CVec3::new(
                dqp[0].values[node],
                dqp[1].values[node],
                dqp[2].values[node],
            );
            let gm = CVec3::new(
                dqm[0].values[node],
                dqm[1].values[node],
                dqm[2].values[node],
            );
            let w = w_matrix(&cv, &gp, &gm, pot_sharp.q_at(node));
            let m = (Mat4::identity() * scal + w) * C::new(-0.5, 0.0);
            source.set_matrix(node, &m);
        }
        let gcorr = cauchy_transform(&source, &zeta, CauchyMethod::SpectralTorus)?.g;

        for node in 0..grid.num_nodes() {
            let e = envelope.values[node];
            let g = g_at(node);
            let first = (p0(&g) - q_flip(pot_sharp, node)) * (C::ONE / C::I);
            let second = p0z * gcorr.matrix_at(node);
            let m = (first + second) * e;
            c1.set_matrix(node, &m);
        }
    }

    Ok(CgoAnsatz {
        frame: frame.clone(),
        order,
        phi,
        envelope,
        c0,
        c1,
        eps: mollify_eps,
    })
}

fn q_flip(pot: &Potential, node: usize) -> Mat4 {
    crate::spinor::q_matrix_flipped(pot.q_at(node))
}

/// Apply the conjugated operator `P0(hD) + i P0(zeta) + hV` to a matrix
/// field.
pub fn apply_conjugated(u: &Field, pot: &Potential, zeta: &CVec3, h: f64) -> Result<Field> {
    let mut out = apply_p0_d(u, h)?;
    let p0z = p0(zeta);
    let iz = p0z * C::I;
    let zero_order = u.left_mul(|node| iz + pot.v_matrix(node) * C::new(h, 0.0))?;
    out.add_scaled(&zero_order, C::ONE)?;
    Ok(out)
}

/// The amplitude sum `C0 + h C1`.
pub fn amplitude(ansatz: &CgoAnsatz) -> Result<Field> {
    let mut amp = ansatz.c0.clone();
    if ansatz.order == 2 {
        amp.add_scaled(&ansatz.c1, C::new(ansatz.frame.h, 0.0))?;
    }
    Ok(amp)
}

/// Residual of the conjugated equation on the amplitude sum,
/// `(P0(hD) + i P0(zeta) + hV)(C0 + h C1)`, measured with the full
/// potential. Returns the residual field and its L2 norm.
pub fn conjugated_residual(ansatz: &CgoAnsatz, pot: &Potential) -> Result<(Field, f64)> {
    let amp = amplitude(ansatz)?;
    let res = apply_conjugated(&amp, pot, &ansatz.frame.zeta, ansatz.frame.h)?;
    let norm = res.l2_norm();
    Ok((res, norm))
}

/// Materialise the exponentially weighted solution
/// `e^{sign zeta.x / h} (C0 + h C1)` on the grid. Refuses grids that cannot
/// resolve the `h`-scale oscillation.
pub fn materialize(ansatz: &CgoAnsatz, sign: f64) -> Result<Field> {
    let grid = ansatz.c0.grid;
    check_scale(ansatz.frame.h, &grid)?;
    let mut out = amplitude(ansatz)?;
    let zeta = ansatz.frame.zeta;
    let h = ansatz.frame.h;
    for node in 0..grid.num_nodes() {
        let x = grid.point_at(node);
        let w = (cdot(&zeta, &to_complex(&x)) * (sign / h)).exp();
        for c in 0..16 {
            out.values[node * 16 + c] *= w;
        }
    }
    Ok(out)
}

/// Fit `log residual ~ slope log h` by least squares over a sweep of `h`
/// values; used to verify the order of the construction.
pub fn residual_order_estimate(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "order estimate needs at least two samples".into(),
        ));
    }
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, r) in samples {
        if !(h > 0.0 && r > 0.0) {
            return Err(Error::InvalidParameter(
                "order estimate needs positive samples".into(),
            ));
        }
        let x = h.ln();
        let y = r.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(Error::ExtrapolationFailure(
            "order estimate needs distinct h values".into(),
        ));
    }
    Ok((n * sxy - sx * sy) / denom)
}
