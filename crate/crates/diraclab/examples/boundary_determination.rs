//! Boundary determination at a flat patch: solutions concentrating at a
//! boundary point isolate `1/2 P0(t - i nu)(V1 - V2)(x0) P0(t + i nu)` in
//! the limit; limits at three tangent directions determine the tangential
//! vector potential and both scalar coefficients at the point.

use diraclab::boundary::{
    closed_form_limit, concentration_limit, solve_boundary_values, BoundaryPatch, EtaProfile,
};
use diraclab::potentials::{Bump, PotentialSpec};
use diraclab::spinor::{RVec3, C};

fn main() {
    let patch = BoundaryPatch::flat(
        RVec3::new(0.0, 0.0, -0.5),
        RVec3::new(0.0, 0.0, 1.0),
        RVec3::new(1.0, 0.0, 0.0),
    )
    .unwrap();

    // effectively constant near the patch; tangential by construction
    let spec1 = PotentialSpec {
        a_terms: vec![(
            RVec3::new(0.3, -0.1, 0.0),
            Bump::Gaussian {
                center: patch.x0,
                sigma: 1e6,
            },
        )],
        qp_const: C::new(0.4, 0.0),
        qm_const: C::new(-0.2, 0.1),
        ..Default::default()
    };
    let spec2 = PotentialSpec::default();

    let ms = [8.0, 12.0, 16.0];
    let dirs = [patch.t1, -patch.t1, patch.t2];
    let mut limits = Vec::new();
    for t in &dirs {
        let sweep =
            concentration_limit(&patch, t, &spec1, &spec2, &ms, EtaProfile::QuadWell).unwrap();
        let dv0 = spec1.v_at(&patch.x0) - spec2.v_at(&patch.x0);
        let expected = closed_form_limit(&patch, t, &dv0);
        let rel = (sweep.extrapolated_limit - expected).norm() / expected.norm();
        println!(
            "t = ({:>4}, {:>4}, {:>4}): extrapolated limit vs closed form, rel err {rel:.3e}",
            t[0], t[1], t[2]
        );
        limits.push((*t, sweep.extrapolated_limit));
    }

    let values = solve_boundary_values(&patch, &limits).unwrap();
    println!("recovered at x0:");
    println!("  A.t1 = {:.4} {:+.4}i   (truth 0.3)", values.a_tan[0].re, values.a_tan[0].im);
    println!("  A.t2 = {:.4} {:+.4}i   (truth -0.1)", values.a_tan[1].re, values.a_tan[1].im);
    println!("  q+   = {:.4} {:+.4}i   (truth 0.4)", values.q.plus.re, values.q.plus.im);
    println!("  q-   = {:.4} {:+.4}i   (truth -0.2+0.1i)", values.q.minus.re, values.q.minus.im);
    println!("  fit residual {:.2e}", values.residual);
    assert!((values.a_tan[0] - C::new(0.3, 0.0)).norm() < 0.05);
    assert!((values.q.plus - C::new(0.4, 0.0)).norm() < 0.05);
}
