//! Acceptance suite: ten numbered criteria covering the whole laboratory,
//! executed sequentially (the heavy solves must not share memory) and
//! reporting one pass/fail line each. Run with `--nocapture` to see the
//! lines as they complete.

use diraclab::boundary::{
    closed_form_limit, concentration_limit, scalar_concentration_integral, solve_boundary_values,
    BoundaryPatch, EtaProfile,
};
use diraclab::carleman::{linear_identity_check, ratio_sweep, CarlemanReport, TestFamily};
use diraclab::cauchy::{cauchy_direct_quadrature, cauchy_transform, CauchyMethod};
use diraclab::cgo::{build_cgo, conjugated_residual, residual_order_estimate};
use diraclab::error::Error;
use diraclab::forward::{apply_sigma_block, cauchy_data, BoundaryTrace, PhysicalSolver};
use diraclab::grid::{Field, GridSpec};
use diraclab::inverse::{
    fourier_oracle, k_lattice, potential_diff, recover_born, recover_curl_oracle,
    recover_q_oracle,
};
use diraclab::potentials::{Bump, Potential, PotentialSpec};
use diraclab::spinor::{
    anticommutator, cdot, p0, to_complex, CVec3, Mat4, RVec3, Vector4, C,
};
use diraclab::weights::{LinearWeight, NullFrame, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Tally {
    failures: Vec<String>,
}

impl Tally {
    fn report(&mut self, idx: usize, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {idx:>2} [{verdict}] {name}: {detail}");
        if !pass {
            self.failures.push(format!("criterion {idx}: {detail}"));
        }
    }
}

fn max_entry(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn criterion_1(t: &mut Tally) {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut dev = 0.0f64;
    for _ in 0..1000 {
        let rv = |rng: &mut ChaCha8Rng| {
            CVec3::from_fn(|_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        };
        let zeta = rv(&mut rng);
        let xi = rv(&mut rng);
        dev = dev.max(max_entry(
            &(anticommutator(&zeta, &xi) - Mat4::identity() * (cdot(&zeta, &xi) * 2.0)),
        ));
        dev = dev.max(max_entry(&(p0(&xi) * p0(&xi) - Mat4::identity() * cdot(&xi, &xi))));
        dev = dev.max(max_entry(&(p0(&xi).adjoint() - p0(&xi.map(|z| z.conj())))));
    }
    t.report(
        1,
        "symbol algebra identities",
        dev <= 1e-13,
        format!("max deviation {dev:.2e} over 1000 draws ({:.1}s)", start.elapsed().as_secs_f64()),
    );
}

fn boundary_touching_field(grid: GridSpec) -> Field {
    Field::from_fn(grid, 4, |x, out| {
        let w = CVec3::new(C::new(0.9, 0.0), C::new(-0.6, 0.0), C::new(0.4, 0.0));
        let ph = (C::i() * cdot(&w, &to_complex(&x))).exp();
        out[0] = ph * C::new(1.0, 0.2);
        out[1] = ph * C::new(-0.3, 0.5) * C::new(x[0], 0.0);
        out[2] = ph * C::new(0.4, -0.7);
        out[3] = ph * C::new(0.1, 0.9) * C::new(x[1] * x[2], 0.0);
    })
}

fn criterion_2(t: &mut Tally) {
    let start = std::time::Instant::now();
    let h = 0.2;
    let alpha = RVec3::new(0.0, 1.0, 0.0);
    let mut gaps = Vec::new();
    for n in [17usize, 25, 33] {
        // half-width 0.4 keeps h = 0.2 resolvable on the coarsest grid
        let grid = GridSpec::cube(0.4, n).unwrap();
        let gap = linear_identity_check(&boundary_touching_field(grid), &alpha, h).unwrap();
        gaps.push(gap);
    }
    let monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
    t.report(
        2,
        "linear-weight integral identity",
        monotone && gaps[2] <= 1e-3,
        format!(
            "gaps {:.2e} -> {:.2e} -> {:.2e} ({:.1}s)",
            gaps[0],
            gaps[1],
            gaps[2],
            start.elapsed().as_secs_f64()
        ),
    );
}

fn carleman_combined_slope(
    h_grids: &[(f64, usize)],
    pot_spec: Option<&PotentialSpec>,
) -> (f64, f64) {
    let alpha = RVec3::new(1.0, 0.0, 0.0);
    let weight = Weight::Linear(LinearWeight::new(alpha).unwrap());
    let families = [
        TestFamily::bump_poly(7, 2),
        TestFamily::modulated(&alpha, 11, 2),
    ];
    let mut max_per_h = vec![0.0f64; h_grids.len()];
    let mut overall = 0.0f64;
    for family in &families {
        for (i, &(h, n)) in h_grids.iter().enumerate() {
            let grid = GridSpec::cube(0.5, n).unwrap();
            let pot = pot_spec.map(|s| s.sample(grid, 2).unwrap());
            let rep = ratio_sweep(&weight, pot.as_ref(), 0.0, family, &[h], grid).unwrap();
            max_per_h[i] = max_per_h[i].max(rep.ratios[0]);
            overall = overall.max(rep.max_ratio);
        }
    }
    let combined = CarlemanReport {
        weight: "linear".into(),
        potential: String::new(),
        s: 0.0,
        h_values: h_grids.iter().map(|&(h, _)| h).collect(),
        ratios: max_per_h,
        records: vec![],
        max_ratio: overall,
        identity_gap: None,
    };
    (combined.log_slope().unwrap(), overall)
}

fn criterion_3(t: &mut Tally) {
    let start = std::time::Instant::now();
    // each h on its own grid with dx = h/8
    let recipe = [(0.2, 41usize), (0.14, 59), (0.1, 81), (0.07, 117), (0.05, 161)];
    let (slope_free, max_free) = carleman_combined_slope(&recipe, None);
    // bounded random potential: the boundedness persists below a recorded
    // threshold (h <= 0.14 here)
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut rb = |scale: f64| -> f64 { rng.random_range(-scale..scale) };
    let rand_bump = |rng: &mut dyn FnMut(f64) -> f64| Bump::Gaussian {
        center: RVec3::new(rng(0.15), rng(0.15), rng(0.15)),
        sigma: 0.12 + rng(0.02).abs(),
    };
    let pot_spec = PotentialSpec {
        a_terms: vec![(RVec3::new(rb(0.4), rb(0.4), rb(0.4)), rand_bump(&mut rb))],
        qp_terms: vec![(C::new(rb(0.5), rb(0.2)), rand_bump(&mut rb))],
        qm_terms: vec![(C::new(rb(0.5), rb(0.2)), rand_bump(&mut rb))],
        ..Default::default()
    };
    let threshold = [(0.14, 59usize), (0.1, 81), (0.07, 117)];
    let (slope_pot, max_pot) = carleman_combined_slope(&threshold, Some(&pot_spec));
    let pass = slope_free.abs() <= 0.15
        && max_free.is_finite()
        && slope_pot.abs() <= 0.15
        && max_pot.is_finite();
    t.report(
        3,
        "Carleman ratio boundedness",
        pass,
        format!(
            "free slope {slope_free:+.4} (max {max_free:.3}); random V slope {slope_pot:+.4} \
             for h <= 0.14 (max {max_pot:.3}) ({:.1}s)",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_4(t: &mut Tally) {
    let start = std::time::Instant::now();
    let grid = GridSpec::cube(0.5, 33).unwrap();
    let zeta: CVec3 =
        to_complex(&RVec3::new(1.0, 0.0, 0.0)) + to_complex(&RVec3::new(0.0, 1.0, 0.0)) * C::i();
    let gaussian = |x: &RVec3| C::new((-x.norm_squared() / (2.0 * 0.15 * 0.15)).exp(), 0.0);
    let f = Field::scalar_from_fn(grid, |x| gaussian(&x));
    let torus = cauchy_transform(&f, &zeta, CauchyMethod::SpectralTorus).unwrap();
    let free = cauchy_transform(
        &f,
        &zeta,
        CauchyMethod::SpectralFreeSpace { pad: 8, oversample: 2 },
    )
    .unwrap();
    let oracle = cauchy_direct_quadrature(|x| gaussian(x), &grid, &zeta, 128, 256).unwrap();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for node in 0..grid.num_nodes() {
        if grid.point_at(node).amax() <= 0.17 {
            num += (free.g.values[node] - oracle.values[node]).norm_sqr();
            den += oracle.values[node].norm_sqr();
        }
    }
    let rel = (num / den).sqrt();
    t.report(
        4,
        "Cauchy transform",
        torus.residual_rel <= 1e-4 && rel <= 1e-3,
        format!(
            "defining-equation residual {:.2e}; spectral vs quadrature {rel:.2e} ({:.1}s)",
            torus.residual_rel,
            start.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_5(t: &mut Tally) {
    let start = std::time::Instant::now();
    let grid = GridSpec::cube(0.5, 25).unwrap();
    let free = PotentialSpec::default().sample(grid, 2).unwrap();
    let smooth = PotentialSpec {
        qp_terms: vec![(
            C::new(0.4, 0.0),
            Bump::Gaussian { center: RVec3::zeros(), sigma: 0.15 },
        )],
        ..Default::default()
    }
    .sample(grid, 2)
    .unwrap();
    let tent = PotentialSpec {
        qp_terms: vec![(
            C::new(0.4, 0.0),
            Bump::Tent { center: RVec3::zeros(), radius: 0.3 },
        )],
        ..Default::default()
    }
    .sample(grid, 2)
    .unwrap();
    let dir = RVec3::new(1.0, 0.0, 0.0);
    // free: the amplitude is constant, so the discrete residual is exact
    let frame = NullFrame::from_direction(&dir, 0.3).unwrap();
    let (_, res_free) = conjugated_residual(&build_cgo(&free, &frame, 1, None).unwrap(), &free).unwrap();
    // smooth order 2: one extra power of h
    let mut samples = Vec::new();
    for h in [0.4, 0.3, 0.2] {
        let fr = NullFrame::from_direction(&dir, h).unwrap();
        let (_, r) = conjugated_residual(&build_cgo(&smooth, &fr, 2, None).unwrap(), &smooth).unwrap();
        samples.push((h, r));
    }
    let slope = residual_order_estimate(&samples).unwrap();
    // Lipschitz data with eps = h^0.25: monotone decrease
    let mut tent_res = Vec::new();
    for h in [0.4, 0.3, 0.2] {
        let fr = NullFrame::from_direction(&dir, h).unwrap();
        let (_, r) =
            conjugated_residual(&build_cgo(&tent, &fr, 2, Some(h.powf(0.25))).unwrap(), &tent).unwrap();
        tent_res.push(r);
    }
    let tent_monotone = tent_res[0] > tent_res[1] && tent_res[1] > tent_res[2];
    t.report(
        5,
        "CGO residual orders",
        res_free <= 1e-12 && slope >= 1.8 && tent_monotone,
        format!(
            "free residual {res_free:.1e}; order-2 slope {slope:.2}; tent residuals \
             {:.2e} > {:.2e} > {:.2e} ({:.1}s)",
            tent_res[0],
            tent_res[1],
            tent_res[2],
            start.elapsed().as_secs_f64()
        ),
    );
}

/// `P0(D + A0) + mu I` with `A0 . zeta = 0` and `mu^2 = A0 . A0`
/// annihilates `e^{-zeta.x/h} P0(zeta) (mu + P0(A0)) d` exactly; this gives
/// an exact solution of a well-posed plus-block problem.
fn exact_cgo_error() -> f64 {
    let grid = GridSpec::cube(0.5, 17).unwrap();
    let h = 0.5;
    let mu = 0.7;
    let a0 = RVec3::new(0.0, 0.0, mu); // orthogonal to alpha = e1 and beta = e2
    let frame = NullFrame::from_direction(&RVec3::new(1.0, 0.0, 0.0), h).unwrap();
    let zeta = frame.zeta;
    let d = Vector4::new(C::new(1.0, 0.0), C::new(0.0, 0.3), C::new(-0.2, 0.0), C::new(0.5, 0.0));
    let c = (Mat4::identity() * C::new(mu, 0.0) + p0(&to_complex(&a0))) * d;
    // algebraic annihilation check
    let ann = (p0(&to_complex(&a0)) + Mat4::identity() * C::new(mu, 0.0)) * p0(&zeta) * c;
    assert!(ann.norm() < 1e-12, "annihilation device broken: {:.2e}", ann.norm());
    let mut pot = PotentialSpec {
        qp_const: C::new(mu, 0.0),
        qm_const: C::new(mu, 0.0),
        ..Default::default()
    }
    .sample(grid, 0)
    .unwrap();
    for node in 0..grid.num_nodes() {
        pot.a.node_mut(node)[2] = C::new(mu, 0.0);
    }
    let spinor = |x: &RVec3| -> Vector4<C> {
        let w = (cdot(&zeta, &to_complex(x)) * (-1.0 / h)).exp();
        p0(&zeta) * c * w
    };
    let u_exact = Field::from_fn(grid, 4, |x, out| {
        let v = spinor(&x);
        out.copy_from_slice(v.as_slice());
    });
    // interior defect of the grid discretisation (the continuum residual is
    // exactly zero; the defect vanishes under refinement)
    let mut plus = Field::zeros(grid, 2);
    let mut minus = Field::zeros(grid, 2);
    for node in 0..grid.num_nodes() {
        let v = u_exact.node(node);
        plus.node_mut(node).copy_from_slice(&v[0..2]);
        minus.node_mut(node).copy_from_slice(&v[2..4]);
    }
    let s_minus = apply_sigma_block(&minus, &pot, 1).unwrap();
    let s_plus = apply_sigma_block(&plus, &pot, 1).unwrap();
    let mut src = Field::zeros(grid, 4);
    for node in 0..grid.num_nodes() {
        let q = pot.q_at(node);
        let sv = src.node_mut(node);
        sv[0] = s_minus.node(node)[0] + q.plus * plus.node(node)[0];
        sv[1] = s_minus.node(node)[1] + q.plus * plus.node(node)[1];
        sv[2] = s_plus.node(node)[0] + q.minus * minus.node(node)[0];
        sv[3] = s_plus.node(node)[1] + q.minus * minus.node(node)[1];
    }
    let data = BoundaryTrace::plus_of(&u_exact).unwrap();
    let solver = PhysicalSolver::new(&pot).unwrap();
    let sol = solver.solve(1, &data, Some(&src)).unwrap();
    let mut diff = sol.clone();
    diff.add_scaled(&u_exact, -C::ONE).unwrap();
    diff.l2_norm() / u_exact.l2_norm()
}

fn manufactured_error(grid: GridSpec) -> f64 {
    let pspec = PotentialSpec {
        qp_terms: vec![(
            C::new(0.3, 0.0),
            Bump::Gaussian { center: RVec3::zeros(), sigma: 0.3 * grid.extent[0] },
        )],
        qp_const: C::new(0.8, 0.0),
        qm_const: C::new(0.7, 0.0),
        ..Default::default()
    };
    let pot = pspec.sample(grid, 2).unwrap();
    let waves = [
        CVec3::new(C::new(1.2, 0.0), C::new(-0.7, 0.0), C::new(0.4, 0.0)),
        CVec3::new(C::new(-0.5, 0.0), C::new(0.9, 0.0), C::new(1.1, 0.0)),
        CVec3::new(C::new(0.3, 0.0), C::new(0.6, 0.0), C::new(-0.8, 0.0)),
        CVec3::new(C::new(-1.0, 0.0), C::new(0.2, 0.0), C::new(0.5, 0.0)),
    ];
    let u_exact =
        |x: &RVec3| Vector4::from_fn(|r, _| (C::i() * cdot(&waves[r], &to_complex(x))).exp());
    let e = [
        p0(&to_complex(&RVec3::new(1.0, 0.0, 0.0))),
        p0(&to_complex(&RVec3::new(0.0, 1.0, 0.0))),
        p0(&to_complex(&RVec3::new(0.0, 0.0, 1.0))),
    ];
    let src = Field::from_fn(grid, 4, |x, out| {
        let u = u_exact(&x);
        let mut g = pspec.v_at(&x) * u;
        for axis in 0..3 {
            for r in 0..4 {
                for c in 0..4 {
                    g[r] += e[axis][(r, c)] * waves[c][axis] * u[c];
                }
            }
        }
        out.copy_from_slice(g.as_slice());
    });
    let data = BoundaryTrace::from_fn(grid, 1, |x, out| {
        let u = u_exact(&x);
        out[0] = u[0];
        out[1] = u[1];
    });
    let solver = PhysicalSolver::new(&pot).unwrap();
    let sol = solver.solve(1, &data, Some(&src)).unwrap();
    let truth = Field::from_fn(grid, 4, |x, out| {
        let u = u_exact(&x);
        out.copy_from_slice(u.as_slice());
    });
    let mut diff = sol;
    diff.add_scaled(&truth, -C::ONE).unwrap();
    diff.l2_norm() / truth.l2_norm()
}

fn gauge_invariance_gap(grid: GridSpec) -> f64 {
    let base = PotentialSpec {
        qp_terms: vec![(
            C::new(0.3, 0.0),
            Bump::Gaussian { center: RVec3::zeros(), sigma: 0.15 },
        )],
        qp_const: C::new(0.8, 0.0),
        qm_const: C::new(0.7, 0.0),
        ..Default::default()
    };
    let pot1 = base.sample(grid, 2).unwrap();
    // gauge field p: compactly supported bump, so p and grad p vanish on
    // the boundary and the Cauchy data must not change
    let gauge = Bump::Poly { center: RVec3::zeros(), radius: 0.4 };
    let mut pot2 = base.sample(grid, 2).unwrap();
    for node in 0..grid.num_nodes() {
        let g = gauge.grad(&grid.point_at(node)) * 0.3;
        let av = pot2.a.node_mut(node);
        for j in 0..3 {
            av[j] += C::new(g[j], 0.0);
        }
    }
    let data = BoundaryTrace::from_fn(grid, 4, |x, row| {
        let g = (2.0 * x[0] + x[1]).cos();
        for (c, v) in row.iter_mut().enumerate() {
            *v = C::new(g + 0.1 * c as f64, x[2]);
        }
    });
    let s1 = PhysicalSolver::new(&pot1).unwrap();
    let s2 = PhysicalSolver::new(&pot2).unwrap();
    let (_, c1) = cauchy_data(&s1, &data).unwrap();
    let (_, c2) = cauchy_data(&s2, &data).unwrap();
    c1.minus.max_diff(&c2.minus).unwrap() / c1.minus.rms()
}

fn criterion_6(t: &mut Tally) {
    let start = std::time::Instant::now();
    let cgo_err = exact_cgo_error();
    let e13 = manufactured_error(GridSpec::cube(1.0, 13).unwrap());
    let e25 = manufactured_error(GridSpec::cube(1.0, 25).unwrap());
    let order = (e13 / e25).ln() / 2.0f64.ln();
    // "solver tolerance" at a given resolution = its manufactured-solution
    // accuracy there; gauge invariance must hold to 10x that
    let tol13 = manufactured_error(GridSpec::cube(0.5, 13).unwrap());
    let gauge = gauge_invariance_gap(GridSpec::cube(0.5, 13).unwrap());
    t.report(
        6,
        "forward solver",
        cgo_err <= 1e-8 && order >= 1.8 && gauge <= 10.0 * tol13,
        format!(
            "exact-CGO reproduction {cgo_err:.1e}; manufactured order {order:.2} \
             ({e13:.2e} -> {e25:.2e}); gauge gap {gauge:.2e} vs 10 x {tol13:.2e} ({:.1}s)",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn small_a_instance(grid: GridSpec) -> (PotentialSpec, PotentialSpec) {
    let shift = (C::new(0.8, 0.0), C::new(0.7, 0.0));
    let spec1 = PotentialSpec {
        a_terms: vec![(
            RVec3::new(0.05, 0.0, 0.0),
            Bump::Gaussian { center: RVec3::zeros(), sigma: 0.12 },
        )],
        qp_const: shift.0,
        qm_const: shift.1,
        ..Default::default()
    };
    let spec2 = PotentialSpec {
        qp_const: shift.0,
        qm_const: shift.1,
        ..Default::default()
    };
    let _ = grid;
    (spec1, spec2)
}

fn criterion_7(t: &mut Tally) {
    let start = std::time::Instant::now();
    let grid = GridSpec::cube(0.5, 13).unwrap();
    let (spec1, spec2) = small_a_instance(grid);
    let pot1 = spec1.sample(grid, 2).unwrap();
    let pot2 = spec2.sample(grid, 2).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    let ks = [RVec3::new(0.0, two_pi, 0.0), RVec3::new(0.0, 0.0, two_pi)];
    // null test: identical potentials give vanishing boundary-data pairings
    let eq_solver = PhysicalSolver::new(&pot2).unwrap();
    let null_rec = recover_born(&eq_solver, &pot2, &ks, 0.25, 0.5).unwrap();
    let null_size = null_rec
        .curl_a_hat
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    // oracle equivalence on the small-A instance
    let measured = PhysicalSolver::new(&pot1).unwrap();
    let born = recover_born(&measured, &pot2, &ks, 0.25, 0.5).unwrap();
    let oracle = recover_curl_oracle(&potential_diff(&pot1, &pot2).unwrap(), &ks).unwrap();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..ks.len() {
        num += (born.curl_a_hat[i] - oracle.curl_a_hat[i]).norm_squared();
        den += oracle.curl_a_hat[i].norm_squared();
    }
    let rel = (num / den).sqrt();
    t.report(
        7,
        "pairing null test and oracle equivalence",
        null_size <= 1e-8 && rel <= 0.25,
        format!(
            "null pairing max {null_size:.1e}; boundary vs oracle gap {rel:.2e} ({:.1}s)",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_8(t: &mut Tally) {
    let start = std::time::Instant::now();
    let grid = GridSpec::cube(0.5, 21).unwrap();
    let (spec1, spec2) = small_a_instance(grid);
    let pot1 = spec1.sample(grid, 2).unwrap();
    let pot2 = spec2.sample(grid, 2).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    // Euclidean ball |k| <= 3 (2 pi / L), zero mode excluded
    let ks: Vec<RVec3> = k_lattice(&grid, 3.0, false)
        .into_iter()
        .filter(|k| k.norm() <= 3.0 * two_pi + 1e-9)
        .collect();
    let dv = potential_diff(&pot1, &pot2).unwrap();
    let truth = fourier_oracle(&dv.curl_a(), &ks).unwrap();
    let tmax = truth
        .iter()
        .map(|v| (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt())
        .fold(0.0, f64::max);

    // oracle mode: per-mode error against the transform of the true curl,
    // measured against the spectrum's scale (the transform has exact zeros)
    let oracle = recover_curl_oracle(&dv, &ks).unwrap();
    let mut worst_oracle = 0.0f64;
    for (i, tv) in truth.iter().enumerate() {
        let mut err2 = 0.0;
        for j in 0..3 {
            err2 += (oracle.curl_a_hat[i][j] - tv[j]).norm_sqr();
        }
        worst_oracle = worst_oracle.max(err2.sqrt() / tmax);
    }

    // Born mode: one h per |k| shell (the probe needs 1/h >= |k|/2), then
    // aggregate relative l2 over the whole lattice
    let measured = PhysicalSolver::new(&pot1).unwrap();
    let mut born_hat = vec![CVec3::zeros(); ks.len()];
    for (shell_max, h) in [(1.5, 0.25), (2.5, 0.14), (3.5, 0.095)] {
        let idx: Vec<usize> = (0..ks.len())
            .filter(|&i| {
                let m = ks[i].norm() / two_pi;
                m <= shell_max && m > shell_max - 1.0
            })
            .collect();
        if idx.is_empty() {
            continue;
        }
        let shell_ks: Vec<RVec3> = idx.iter().map(|&i| ks[i]).collect();
        let rec = recover_born(&measured, &pot2, &shell_ks, h, 0.5).unwrap();
        for (slot, &i) in idx.iter().enumerate() {
            born_hat[i] = rec.curl_a_hat[slot];
        }
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (i, tv) in truth.iter().enumerate() {
        for j in 0..3 {
            num += (born_hat[i][j] - tv[j]).norm_sqr();
            den += tv[j].norm_sqr();
        }
    }
    let born_rel = (num / den).sqrt();
    t.report(
        8,
        "curl recovery",
        worst_oracle <= 0.02 && born_rel <= 0.10,
        format!(
            "oracle worst mode {worst_oracle:.3} (of spectrum scale); Born aggregate \
             {born_rel:.3} over {} modes ({:.1}s)",
            ks.len(),
            start.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_9(t: &mut Tally) {
    let start = std::time::Instant::now();
    let grid = GridSpec::cube(0.5, 21).unwrap();
    let spec1 = PotentialSpec {
        qp_terms: vec![(
            C::new(0.3, 0.0),
            Bump::Gaussian { center: RVec3::zeros(), sigma: 0.15 },
        )],
        ..Default::default()
    };
    let pot1 = spec1.sample(grid, 2).unwrap();
    let pot2 = PotentialSpec::default().sample(grid, 2).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    let ks: Vec<RVec3> = k_lattice(&grid, 3.0, false)
        .into_iter()
        .filter(|k| k.norm() <= 3.0 * two_pi + 1e-9)
        .collect();
    let rec = recover_q_oracle(&pot1, &pot2, &ks, &[0.3, 0.2, 0.1]).unwrap();
    let truth = fourier_oracle(&pot1.qp, &ks).unwrap();
    let mut worst = 0.0f64;
    for (i, tv) in truth.iter().enumerate() {
        worst = worst.max((rec.q_plus_hat[i] - tv[0]).norm() / tv[0].norm());
    }
    // zero mode must be refused, not silently averaged
    let zero = recover_q_oracle(&pot1, &pot2, &[RVec3::zeros()], &[0.3, 0.2, 0.1]);
    let zero_refused = matches!(zero, Err(Error::UnrecoverableMode(_)));
    t.report(
        9,
        "q recovery",
        worst <= 0.05 && zero_refused,
        format!(
            "worst relative error {worst:.3} over {} modes; zero mode refused: {zero_refused} \
             ({:.1}s)",
            ks.len(),
            start.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_10(t: &mut Tally) {
    let start = std::time::Instant::now();
    let patch = BoundaryPatch::flat(
        RVec3::new(0.0, 0.0, -0.5),
        RVec3::new(0.0, 0.0, 1.0),
        RVec3::new(1.0, 0.0, 0.0),
    )
    .unwrap();
    // scalar concentration identity, extrapolated over the three largest M
    let ms = [8.0, 12.0, 16.0];
    let vals: Vec<f64> = ms
        .iter()
        .map(|&m| scalar_concentration_integral(&patch, EtaProfile::QuadWell, m))
        .collect();
    let (x1, x3) = (1.0 / ms[0], 1.0 / ms[2]);
    let scalar_fit = vals[2] + (vals[2] - vals[0]) / (x3 - x1) * (0.0 - x3);
    let scalar_err = (scalar_fit - 0.5).abs() / 0.5;

    // constant-near-x0 coefficients
    let spec1 = PotentialSpec {
        a_terms: vec![(
            RVec3::new(0.3, -0.1, 0.0),
            Bump::Gaussian { center: patch.x0, sigma: 1e6 },
        )],
        qp_const: C::new(0.4, 0.0),
        qm_const: C::new(-0.2, 0.1),
        ..Default::default()
    };
    let spec2 = PotentialSpec::default();
    let dirs = [patch.t1, -patch.t1, patch.t2];
    let mut limits = Vec::new();
    for d in &dirs {
        let sweep =
            concentration_limit(&patch, d, &spec1, &spec2, &ms, EtaProfile::QuadWell).unwrap();
        limits.push((*d, sweep.extrapolated_limit));
    }
    let rec = solve_boundary_values(&patch, &limits).unwrap();
    let truth = [C::new(0.3, 0.0), C::new(-0.1, 0.0), C::new(0.4, 0.0), C::new(-0.2, 0.1)];
    let got = [rec.a_tan[0], rec.a_tan[1], rec.q.plus, rec.q.minus];
    let worst = truth
        .iter()
        .zip(&got)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max);

    // normal-component invisibility, exact at the algebra level
    let mut invisible = true;
    let a = to_complex(&RVec3::new(0.3, -0.1, 0.0));
    let a_n = a + to_complex(&patch.nu_in) * C::new(0.9, 0.0);
    for d in &dirs {
        let dv1 = p0(&a);
        let dv2 = p0(&a_n);
        let gap = closed_form_limit(&patch, d, &dv1) - closed_form_limit(&patch, d, &dv2);
        invisible &= gap.norm() < 1e-13;
    }
    t.report(
        10,
        "boundary determination",
        scalar_err <= 0.02 && worst <= 0.05 && invisible,
        format!(
            "scalar limit error {scalar_err:.3}; worst recovered value error {worst:.3}; \
             normal invisibility exact: {invisible} ({:.1}s)",
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut tally = Tally { failures: Vec::new() };
    criterion_1(&mut tally);
    criterion_2(&mut tally);
    criterion_3(&mut tally);
    criterion_4(&mut tally);
    criterion_5(&mut tally);
    criterion_6(&mut tally);
    criterion_7(&mut tally);
    criterion_8(&mut tally);
    criterion_9(&mut tally);
    criterion_10(&mut tally);
    assert!(
        tally.failures.is_empty(),
        "failed criteria:\n{}",
        tally.failures.join("\n")
    );
}
