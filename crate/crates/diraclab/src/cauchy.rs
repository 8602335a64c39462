//! Right inverses for the degenerate directional operator `zeta . grad`,
//! where `zeta = alpha + i beta` is a null frame (orthonormal real unit
//! vectors). Writing points of each plane spanned by `(alpha, beta)` as
//! `z = alpha.y + i beta.y`, the operator is `2 d/dzbar`, so the problem is
//! a family of planar Cauchy transforms fibered over the direction
//! `gamma = alpha x beta`.
//!
//! Three evaluation schemes are provided:
//!
//! * [`CauchyMethod::SpectralTorus`]: division by the symbol `i zeta.kappa`
//!   on the periodised box, with explicit secular terms
//!   `fhat_m e^{i kappa_m.x} (alpha.x + const)` completing the modes on the
//!   singular line `kappa || gamma`. This solves the defining equation to
//!   roundoff and is the workhorse used by the CGO builders, at the price
//!   of a periodic (rather than decaying) convention for the solution.
//! * [`CauchyMethod::SpectralFreeSpace`]: per-fiber FFT convolution with
//!   the truncated free kernel `1/(2 pi z)` on an oversampled, zero-padded
//!   plane; matches the decaying free-space convention. The fiber direction
//!   must be a grid axis.
//! * [`cauchy_direct_quadrature`]: slow polar-coordinate quadrature of the
//!   free-space convolution against an analytic integrand, used as an
//!   independent oracle.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::spinor::{cdot, to_complex, CVec3, RVec3, C};
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy)]
pub enum CauchyMethod {
    SpectralTorus,
    SpectralFreeSpace {
        /// zero-padding factor for the planar convolution (>= 3)
        pad: usize,
        /// trigonometric oversampling factor for the slice samples (>= 1)
        oversample: usize,
    },
}

impl Default for CauchyMethod {
    fn default() -> Self {
        CauchyMethod::SpectralTorus
    }
}

/// Solution of `zeta . grad g = f` together with the measured residual of
/// that equation in `L2` of the box, absolute and relative to `||f||`.
#[derive(Debug, Clone)]
pub struct CauchyResult {
    pub g: Field,
    pub residual_l2: f64,
    pub residual_rel: f64,
}

/// Validate that `zeta = alpha + i beta` is a unit null frame and return
/// `(alpha, beta)`.
pub fn split_frame(zeta: &CVec3) -> Result<(RVec3, RVec3)> {
    let alpha = RVec3::new(zeta[0].re, zeta[1].re, zeta[2].re);
    let beta = RVec3::new(zeta[0].im, zeta[1].im, zeta[2].im);
    let ok = (alpha.norm() - 1.0).abs() < 1e-10
        && (beta.norm() - 1.0).abs() < 1e-10
        && alpha.dot(&beta).abs() < 1e-10;
    if !ok {
        return Err(Error::InvalidParameter(
            "cauchy transform needs zeta = alpha + i beta with orthonormal unit parts".into(),
        ));
    }
    Ok((alpha, beta))
}

pub fn cauchy_transform(f: &Field, zeta: &CVec3, method: CauchyMethod) -> Result<CauchyResult> {
    match method {
        CauchyMethod::SpectralTorus => torus_transform(f, zeta),
        CauchyMethod::SpectralFreeSpace { pad, oversample } => {
            free_space_transform(f, zeta, pad, oversample)
        }
    }
}

fn torus_transform(f: &Field, zeta: &CVec3) -> Result<CauchyResult> {
    let (alpha, _) = split_frame(zeta)?;
    let grid = f.grid;
    let nc = f.ncomp;
    let ntot = grid.num_nodes() as f64;
    let mut hat = f.clone();
    hat.fft3(false);

    // secular modes: kappa on the line zeta.kappa = 0
    let mut secular: Vec<(usize, RVec3)> = Vec::new();
    let mut ghat = hat.clone();
    for node in 0..grid.num_nodes() {
        let [i, j, k] = grid.coords(node);
        let kappa = RVec3::new(grid.freq(0, i), grid.freq(1, j), grid.freq(2, k));
        let zk = cdot(zeta, &to_complex(&kappa));
        if zk.norm() <= 1e-9 * kappa.norm().max(1.0) {
            secular.push((node, kappa));
            for c in 0..nc {
                ghat.values[node * nc + c] = C::ZERO;
            }
        } else {
            let inv = C::ONE / (C::I * zk);
            for c in 0..nc {
                ghat.values[node * nc + c] *= inv;
            }
        }
    }
    let mut g = ghat.clone();
    g.fft3(true);

    // residual of the periodic part: i zeta.kappa ghat - fhat, which is
    // -fhat on the secular line and 0 elsewhere up to roundoff
    let mut rhat = Field::zeros(grid, nc);
    for node in 0..grid.num_nodes() {
        let [i, j, k] = grid.coords(node);
        let kappa = RVec3::new(grid.freq(0, i), grid.freq(1, j), grid.freq(2, k));
        let zk = C::I * cdot(zeta, &to_complex(&kappa));
        for c in 0..nc {
            rhat.values[node * nc + c] =
                zk * ghat.values[node * nc + c] - hat.values[node * nc + c];
        }
    }
    let mut res = rhat;
    res.fft3(true);

    // secular completion: a_m e^{i kappa_m.(x - origin)} alpha.(x - center)
    // satisfies zeta.grad = a_m e^{...} (1 + i zeta.kappa alpha.(..)) with
    // zeta.kappa ~ 0 and zeta.alpha = 1
    let center = grid.origin + grid.extent * 0.5;
    for (mnode, kappa) in &secular {
        for node in 0..grid.num_nodes() {
            let x = grid.point_at(node);
            let phase = (C::I * C::new(kappa.dot(&(x - grid.origin)), 0.0)).exp();
            let lin = C::new(alpha.dot(&(x - center)), 0.0);
            let zk = C::I * cdot(zeta, &to_complex(kappa));
            for c in 0..nc {
                let a = hat.values[mnode * nc + c] / ntot;
                g.values[node * nc + c] += a * phase * lin;
                // equation contribution of the secular term minus the
                // outstanding -fhat part already present in `res`
                res.values[node * nc + c] += a * phase * (C::ONE + zk * lin);
            }
        }
    }

    let rl2 = res.l2_norm();
    let fl2 = f.l2_norm();
    Ok(CauchyResult {
        g,
        residual_l2: rl2,
        residual_rel: rl2 / fl2.max(1e-300),
    })
}

fn free_space_transform(
    f: &Field,
    zeta: &CVec3,
    pad: usize,
    oversample: usize,
) -> Result<CauchyResult> {
    let (alpha, beta) = split_frame(zeta)?;
    if pad < 3 || oversample < 1 {
        return Err(Error::InvalidParameter(
            "free-space transform needs pad >= 3 and oversample >= 1".into(),
        ));
    }
    let gamma = alpha.cross(&beta);
    let mut fiber_axis = usize::MAX;
    for a in 0..3 {
        if (gamma[a].abs() - 1.0).abs() < 1e-10 {
            fiber_axis = a;
        }
    }
    if fiber_axis == usize::MAX {
        return Err(Error::InvalidParameter(
            "free-space transform needs the fiber direction alpha x beta to be a grid axis".into(),
        ));
    }
    let grid = f.grid;
    let nc = f.ncomp;
    let (a1, a2) = match fiber_axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let n1 = grid.n[a1];
    let n2 = grid.n[a2];
    let s = grid.spacing();
    if (s[a1] - s[a2]).abs() > 1e-12 * s[a1] {
        // nothing fundamental, but the kernel sampling below assumes it
        return Err(Error::InvalidParameter(
            "free-space transform needs equal spacing in the slice plane".into(),
        ));
    }
    // effective complex components of zeta in the slice plane
    let mut e1 = RVec3::zeros();
    e1[a1] = 1.0;
    let mut e2 = RVec3::zeros();
    e2[a2] = 1.0;
    let z1 = C::new(alpha.dot(&e1), beta.dot(&e1));
    let z2 = C::new(alpha.dot(&e2), beta.dot(&e2));

    // fine sampling and padded plane sizes
    let m1 = n1 * oversample;
    let m2 = n2 * oversample;
    let p1 = n1 * oversample * pad;
    let p2 = n2 * oversample * pad;
    let df1 = s[a1] / oversample as f64;
    let df2 = s[a2] / oversample as f64;
    let da = df1 * df2;
    // truncation radius: beyond the slice diagonal, below the wrap limit
    let period1 = p1 as f64 * df1;
    let period2 = p2 as f64 * df2;
    let diag = (grid.extent[a1].powi(2) + grid.extent[a2].powi(2)).sqrt();
    let t_max = 0.5 * period1.min(period2) * 0.98;
    let t_need = diag * 1.02;
    if t_need > t_max {
        return Err(Error::InvalidParameter(
            "free-space transform padding too small for the box diagonal".into(),
        ));
    }
    let trunc = 0.5 * (t_need + t_max);

    // transform of the truncated kernel, exact at every padded mode:
    // the planar FT of `1/(2 pi z)` restricted to `|y| <= T` is
    // `(1 - J0(T |kappa|)) / (i zeta.kappa)`
    let mut planner = FftPlanner::<f64>::new();
    let khat = {
        let mut kern = vec![C::ZERO; p1 * p2];
        for i in 0..p1 {
            let k1 = plane_freq(i, p1, period1);
            for j in 0..p2 {
                let k2 = plane_freq(j, p2, period2);
                let w = z1 * k1 + z2 * k2; // zeta.kappa, |w| = |kappa|
                let kn = (k1 * k1 + k2 * k2).sqrt();
                if kn > 0.0 {
                    kern[i * p2 + j] = (1.0 - bessel_j0(trunc * kn)) / (C::I * w);
                }
            }
        }
        kern
    };

    let mut g = Field::zeros(grid, nc);
    let mut res_sq = 0.0;
    let fiber_dx = s[fiber_axis];
    for i3 in 0..grid.n[fiber_axis] {
        for c in 0..nc {
            // gather the slice, trig-oversample into the padded fine plane
            let mut coarse = vec![C::ZERO; n1 * n2];
            for i in 0..n1 {
                for j in 0..n2 {
                    let mut ijk = [0usize; 3];
                    ijk[fiber_axis] = i3;
                    ijk[a1] = i;
                    ijk[a2] = j;
                    coarse[i * n2 + j] = f.values[grid.idx(ijk[0], ijk[1], ijk[2]) * nc + c];
                }
            }
            // trig-oversample within the coarse period, then zero-pad
            // physically into the larger plane
            fft2(&mut coarse, n1, n2, false, &mut planner);
            let mut fine = vec![C::ZERO; m1 * m2];
            embed_spectrum(&coarse, n1, n2, &mut fine, m1, m2);
            fft2(&mut fine, m1, m2, true, &mut planner);
            let mut fhat = vec![C::ZERO; p1 * p2];
            for i in 0..m1 {
                for j in 0..m2 {
                    fhat[i * p2 + j] = fine[i * m2 + j];
                }
            }
            fft2(&mut fhat, p1, p2, false, &mut planner);
            let mut ghat = vec![C::ZERO; p1 * p2];
            for idx in 0..p1 * p2 {
                ghat[idx] = fhat[idx] * khat[idx];
            }
            // residual in spectral form: i(z1 k1 + z2 k2) ghat - fhat
            let mut rres = vec![C::ZERO; p1 * p2];
            for i in 0..p1 {
                let k1 = plane_freq(i, p1, period1);
                for j in 0..p2 {
                    let k2 = plane_freq(j, p2, period2);
                    let sym = C::I * (z1 * k1 + z2 * k2);
                    let idx = i * p2 + j;
                    rres[idx] = sym * ghat[idx] - fhat[idx];
                }
            }
            fft2(&mut ghat, p1, p2, true, &mut planner);
            fft2(&mut rres, p1, p2, true, &mut planner);
            // scatter values back to the original nodes; accumulate the
            // residual over the box region only (the truncated-kernel ring
            // defect lives far outside it)
            for i in 0..n1 {
                for j in 0..n2 {
                    let mut ijk = [0usize; 3];
                    ijk[fiber_axis] = i3;
                    ijk[a1] = i;
                    ijk[a2] = j;
                    let node = grid.idx(ijk[0], ijk[1], ijk[2]);
                    g.values[node * nc + c] = ghat[(i * oversample) * p2 + j * oversample];
                }
            }
            for fi in 0..m1 {
                for fj in 0..m2 {
                    res_sq += rres[fi * p2 + fj].norm_sqr() * da * fiber_dx;
                }
            }
        }
    }
    let res_l2 = res_sq.sqrt();
    let fl2 = f.l2_norm();
    Ok(CauchyResult {
        g,
        residual_l2: res_l2,
        residual_rel: res_l2 / fl2.max(1e-300),
    })
}

fn plane_freq(i: usize, n: usize, period: f64) -> f64 {
    let m = if i <= n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    };
    2.0 * std::f64::consts::PI * m as f64 / period
}

/// Bessel function `J0`, polynomial approximations with absolute error
/// below 1e-7 (small argument) and the asymptotic amplitude/phase form
/// beyond 3.
fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 3.0 {
        let t = (ax / 3.0).powi(2);
        1.0 + t
            * (-2.2499997
                + t * (1.2656208
                    + t * (-0.3163866 + t * (0.0444479 + t * (-0.0039444 + t * 0.0002100)))))
    } else {
        let u = 3.0 / ax;
        let f0 = 0.79788456
            + u * (-0.00000077
                + u * (-0.00552740
                    + u * (-0.00009512 + u * (0.00137237 + u * (-0.00072805 + u * 0.00014476)))));
        let th = ax - 0.78539816
            + u * (-0.04166397
                + u * (-0.00003954
                    + u * (0.00262573 + u * (-0.00054125 + u * (-0.00029333 + u * 0.00013558)))));
        f0 * th.cos() / ax.sqrt()
    }
}

fn embed_spectrum(coarse: &[C], n1: usize, n2: usize, fine: &mut [C], p1: usize, p2: usize) {
    // map coarse spectral bins to the corresponding padded bins, scaling so
    // that the inverse transform of `fine` reproduces the trig interpolant
    let scale = C::new((p1 * p2) as f64 / ((n1 * n2) as f64), 0.0);
    for i in 0..n1 {
        let ti = if i <= n1 / 2 { i } else { p1 - (n1 - i) };
        for j in 0..n2 {
            let tj = if j <= n2 / 2 { j } else { p2 - (n2 - j) };
            fine[ti * p2 + tj] = coarse[i * n2 + j] * scale;
        }
    }
}

fn fft2(data: &mut [C], n1: usize, n2: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let fft_rows = if inverse {
        planner.plan_fft_inverse(n2)
    } else {
        planner.plan_fft_forward(n2)
    };
    for i in 0..n1 {
        fft_rows.process(&mut data[i * n2..(i + 1) * n2]);
    }
    let fft_cols = if inverse {
        planner.plan_fft_inverse(n1)
    } else {
        planner.plan_fft_forward(n1)
    };
    let mut col = vec![C::ZERO; n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col[i] = data[i * n2 + j];
        }
        fft_cols.process(&mut col);
        for i in 0..n1 {
            data[i * n2 + j] = col[i];
        }
    }
    if inverse {
        let s = 1.0 / (n1 * n2) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Free-space Cauchy transform by polar quadrature against an analytic
/// integrand: for each output node
/// `g(x) = (1/2 pi) int_0^R int_0^{2 pi} f(x - r(cos t alpha + sin t beta)) e^{-i t} dt dr`,
/// with periodic-trapezoid quadrature in the angle and Simpson in the
/// radius. Slow; used as an oracle.
pub fn cauchy_direct_quadrature(
    f: impl Fn(&RVec3) -> C + Sync,
    grid: &GridSpec,
    zeta: &CVec3,
    n_r: usize,
    n_theta: usize,
) -> Result<Field> {
    use rayon::prelude::*;
    let (alpha, beta) = split_frame(zeta)?;
    if n_r < 2 || n_r % 2 != 0 || n_theta < 4 {
        return Err(Error::InvalidParameter(
            "direct quadrature needs even n_r >= 2 and n_theta >= 4".into(),
        ));
    }
    let reach = grid.extent.norm() * 1.01;
    let dr = reach / n_r as f64;
    let dt = 2.0 * std::f64::consts::PI / n_theta as f64;
    // precompute angular directions and phases
    let dirs: Vec<(RVec3, C)> = (0..n_theta)
        .map(|it| {
            let t = it as f64 * dt;
            (alpha * t.cos() + beta * t.sin(), C::new(0.0, -t).exp())
        })
        .collect();
    let values: Vec<C> = (0..grid.num_nodes())
        .into_par_iter()
        .map(|node| {
            let x = grid.point_at(node);
            let mut acc = C::ZERO;
            for ir in 0..=n_r {
                let r = ir as f64 * dr;
                let sw = if ir == 0 || ir == n_r {
                    1.0
                } else if ir % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * dr
                    / 3.0;
                let mut ring = C::ZERO;
                for (dir, phase) in &dirs {
                    let y = x - dir * r;
                    ring += f(&y) * *phase;
                }
                acc += ring * (sw * dt);
            }
            acc / C::new(2.0 * std::f64::consts::PI, 0.0)
        })
        .collect();
    Ok(Field {
        grid: *grid,
        ncomp: 1,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::NullFrame;

    fn gaussian(x: &RVec3, sigma: f64) -> C {
        C::new((-x.norm_squared() / (2.0 * sigma * sigma)).exp(), 0.0)
    }

    #[test]
    fn frame_validation() {
        let bad = CVec3::new(C::new(1.0, 0.0), C::new(0.0, 0.5), C::ZERO);
        assert!(split_frame(&bad).is_err());
        let good = CVec3::new(C::new(1.0, 0.0), C::new(0.0, 1.0), C::ZERO);
        assert!(split_frame(&good).is_ok());
    }

    #[test]
    fn torus_transform_solves_equation_to_roundoff() {
        let grid = GridSpec::cube(1.0, 24).unwrap();
        let f = Field::scalar_from_fn(grid, |x| gaussian(&x, 0.25) * C::new(1.0, 0.3));
        let frame = NullFrame::from_direction(&RVec3::new(0.0, 0.0, 1.0), 1.0).unwrap();
        let out = cauchy_transform(&f, &frame.zeta, CauchyMethod::SpectralTorus).unwrap();
        assert!(out.residual_rel < 1e-11, "residual {}", out.residual_rel);
    }

    #[test]
    fn torus_transform_recovers_manufactured_solution() {
        let grid = GridSpec::cube(1.0, 24).unwrap();
        let frame = NullFrame::from_direction(&RVec3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        let zeta = frame.zeta;
        // g0 margin-supported smooth; f = zeta.grad g0 analytic
        let sigma = 0.18;
        let g0 = Field::scalar_from_fn(grid, |x| gaussian(&x, sigma));
        let f = Field::scalar_from_fn(grid, |x| {
            let g = gaussian(&x, sigma);
            let grad = -x / (sigma * sigma);
            g * cdot(&zeta, &to_complex(&grad))
        });
        let out = cauchy_transform(&f, &zeta, CauchyMethod::SpectralTorus).unwrap();
        // the periodic convention fixes solutions only up to modes constant
        // in the (alpha, beta) plane; remove that line from the difference
        let mut diff = out.g.clone();
        diff.add_scaled(&g0, -C::ONE).unwrap();
        let mut dh = diff.clone();
        dh.fft3(false);
        let gamma = frame.alpha.cross(&frame.beta);
        for node in 0..grid.num_nodes() {
            let [i, j, k] = grid.coords(node);
            let kappa = RVec3::new(grid.freq(0, i), grid.freq(1, j), grid.freq(2, k));
            let on_line = kappa.cross(&gamma).norm() <= 1e-9 * kappa.norm().max(1.0);
            if on_line {
                dh.values[node] = C::ZERO;
            }
        }
        dh.fft3(true);
        // the Gaussian tail is not exactly margin-supported; allow its
        // aliasing level
        assert!(
            dh.l2_norm() < 1e-6 * g0.l2_norm().max(1e-300),
            "mismatch {}",
            dh.l2_norm()
        );
    }

    #[test]
    fn free_space_matches_direct_quadrature() {
        let grid = GridSpec::cube(1.0, 25).unwrap();
        let sigma = 0.2;
        let f_analytic = |x: &RVec3| gaussian(x, sigma) * C::new(0.8, -0.4);
        let f = Field::scalar_from_fn(grid, |x| f_analytic(&x));
        let frame = NullFrame::from_direction(&RVec3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        // gamma = alpha x beta = e1 x e2 = e3: fiber axis is a grid axis
        let out = cauchy_transform(
            &f,
            &frame.zeta,
            CauchyMethod::SpectralFreeSpace {
                pad: 4,
                oversample: 2,
            },
        )
        .unwrap();
        assert!(
            out.residual_rel < 1e-4,
            "free-space residual {}",
            out.residual_rel
        );
        let oracle = cauchy_direct_quadrature(f_analytic, &grid, &frame.zeta, 160, 64).unwrap();
        // relative L2 over the interior
        let mut num = 0.0;
        let mut den = 0.0;
        for node in 0..grid.num_nodes() {
            let [i, j, k] = grid.coords(node);
            if [i, j, k].iter().any(|&t| t < 4 || t > 20) {
                continue;
            }
            num += (out.g.values[node] - oracle.values[node]).norm_sqr();
            den += oracle.values[node].norm_sqr();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-3, "free-space vs direct disagreement {rel}");
    }

    #[test]
    fn transform_is_linear() {
        let grid = GridSpec::cube(1.0, 16).unwrap();
        let f = Field::scalar_from_fn(grid, |x| gaussian(&x, 0.3));
        let frame = NullFrame::from_direction(&RVec3::new(0.0, 1.0, 0.0), 1.0).unwrap();
        let c0 = C::new(2.0, -1.5);
        let mut cf = f.clone();
        cf.scale(c0);
        let g1 = cauchy_transform(&f, &frame.zeta, CauchyMethod::SpectralTorus)
            .unwrap()
            .g;
        let g2 = cauchy_transform(&cf, &frame.zeta, CauchyMethod::SpectralTorus)
            .unwrap()
            .g;
        let mut d = g2.clone();
        d.add_scaled(&g1, -c0).unwrap();
        assert!(d.l2_norm() < 1e-12 * g1.l2_norm());
    }
}
