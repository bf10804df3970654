use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use riemheat::admissible::*;
use riemheat::exponents::{bootstrap_table, Variant, Q};
use riemheat::geometry::*;
use riemheat::grid::NodeGrid;
use riemheat::heatflow::*;
use riemheat::linalg::point;
use riemheat::norms::*;

fn p(xs: &[f64]) -> [f64; 3] {
    point(xs)
}

fn geo(spec: ModelSpec, lo: &[f64], hi: &[f64], counts: &[usize], periodic: bool) -> Arc<GridGeometry<f64>> {
    GridGeometry::new(spec.build().unwrap(), NodeGrid::new(&p(lo), &p(hi), counts, periodic).unwrap()).unwrap()
}

fn torus(n: usize) -> Arc<GridGeometry<f64>> {
    geo(ModelSpec::torus(2, 2.0 * PI), &[0.0, 0.0], &[2.0 * PI, 2.0 * PI], &[n, n], true)
}

fn discrete_eigenvalue(n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    2.0 * (2.0 * (h / 2.0).sin() / h).powi(2)
}

fn nodes(g: &GridGeometry<f64>, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
    (0..g.len()).map(|q| f(&g.grid.node(q))).collect()
}

#[test]
fn torus_scalar_eigenmode_and_kernel() {
    let g = torus(32);
    let lap = discrete_laplacian(g.clone(), FieldKind::Scalar).unwrap();
    let u = lap.restrict(&nodes(&g, |x| x[0].sin() * x[1].sin()));
    let lu = lap.apply(&u);
    let lam = discrete_eigenvalue(32);
    assert!(u.iter().zip(&lu).all(|(a, b)| (b - lam * a).abs() < 1e-10));
    assert!((lam - 2.0).abs() < 2.0 * (2.0 * PI / 32.0f64).powi(2) / 12.0 + 1e-6);
    let c = lap.apply(&vec![3.0; lap.dofs()]);
    assert!(c.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn dirichlet_square_matches_the_continuum_eigenvalue() {
    let err = |n: usize| {
        let g = geo(
            ModelSpec::euclidean(2).with_box(&[-1.0, -1.0], &[2.0, 2.0]),
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[n + 1, n + 1],
            false,
        );
        let lap = discrete_laplacian(g.clone(), FieldKind::Scalar).unwrap();
        let u = lap.restrict(&nodes(&g, |x| (PI * x[0]).sin() * (PI * x[1]).sin()));
        let lu = lap.apply(&u);
        u.iter().zip(&lu).fold(0.0f64, |m, (a, b)| m.max((b - 2.0 * PI * PI * a).abs()))
    };
    let (a, b) = (err(16), err(32));
    assert!(a < 0.2 && (a / b).log2() > 1.9, "{a} {b}");
}

#[test]
fn halfplane_laplacian_of_x_squared() {
    // Delta_g = -y^2 (d_xx + d_yy) in two dimensions: Delta x^2 = -2 y^2
    let g = geo(ModelSpec::halfplane(2), &[-0.5, 1.0], &[0.5, 2.0], &[21, 21], false);
    let lap = discrete_laplacian(g.clone(), FieldKind::Scalar).unwrap();
    let u = lap.restrict(&nodes(&g, |x| x[0] * x[0]));
    let lu = lap.apply(&u);
    let rows: Vec<usize> = lap.nodes.clone();
    for (k, &q) in rows.iter().enumerate() {
        let x = g.grid.node(q);
        let next_to_wall =
            (0..2).any(|a| [-1, 1].iter().any(|&k| g.grid.shift(q, a, k).is_some_and(|r| g.grid.is_boundary(r))));
        if !next_to_wall {
            assert!((lu[k] + 2.0 * x[1] * x[1]).abs() < 1e-9, "{} at {x:?}", lu[k]);
        }
    }
}

#[test]
fn operators_are_symmetric_and_positive() {
    let cases = vec![
        (geo(ModelSpec::halfplane(2), &[-0.5, 0.5], &[0.5, 1.5], &[17, 17], false), FieldKind::Scalar),
        (geo(ModelSpec::poincare(3), &[-0.5; 3], &[0.5; 3], &[9, 9, 9], false), FieldKind::Scalar),
        (
            geo(ModelSpec::perturbed(2, 0.3, 1.0).periodic(), &[0.0, 0.0], &[2.0 * PI, 2.0 * PI], &[16, 16], true),
            FieldKind::OneForm,
        ),
        (torus(12), FieldKind::OneForm),
        (geo(ModelSpec::perturbed(2, 0.3, 1.0), &[-1.0, -1.0], &[1.0, 1.0], &[15, 15], false), FieldKind::Scalar),
    ];
    for (g, kind) in cases {
        let lap = discrete_laplacian(g, kind).unwrap();
        assert!(lap.stiffness.asymmetry() < 1e-12);
        assert!(lap.min_ritz_value() >= -1e-10);
        let n = lap.dofs();
        let u: Vec<f64> = (0..n).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 104729) % 89) as f64 / 89.0).collect();
        let (a, b) = (lap.inner(&lap.apply(&u), &v), lap.inner(&u, &lap.apply(&v)));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0), "{a} {b}");
    }
}

#[test]
fn one_form_eigenmode_harmonic_forms_and_capability() {
    let g = torus(24);
    let lap = discrete_laplacian(g.clone(), FieldKind::OneForm).unwrap();
    let w: Vec<f64> = (0..g.len())
        .flat_map(|q| {
            let x = g.grid.node(q);
            [x[0].sin() * x[1].sin(), 0.0]
        })
        .collect();
    let c = lap.restrict(&w);
    let lc = lap.apply(&c);
    let lam = discrete_eigenvalue(24);
    assert!(c.iter().zip(&lc).all(|(a, b)| (b - lam * a).abs() < 1e-10));
    let harmonic = lap.restrict(&vec![1.0; 2 * g.len()]);
    assert!(lap.apply(&harmonic).iter().all(|v| v.abs() < 1e-10));
    let flat = geo(ModelSpec::euclidean(2), &[1.0, 1.0], &[2.0, 2.0], &[8, 8], false);
    assert!(matches!(discrete_laplacian(flat, FieldKind::OneForm), Err(riemheat::Error::Capability(_))));
}

fn eigen_problem(n: usize, dt: f64, kind: FieldKind) -> ParabolicProblem<f64> {
    ParabolicProblem::new(torus(n), kind, Forcing::Spec(ForcingSpec::Eigen { amplitude: 1.0 }), 0.5, 0.1, dt).unwrap()
}

#[test]
fn zero_forcing_gives_zero() {
    let g = torus(12);
    let prob = ParabolicProblem::new(g, FieldKind::Scalar, Forcing::zero(), 0.3, 0.1, 0.05).unwrap();
    let sol = solve_parabolic(&prob).unwrap();
    assert!(sol.u.frames.iter().all(|f| f.iter().all(|v| *v == 0.0)));
    let rep = check_threshold_contraction(&sol);
    assert!(rep.holds && rep.u_norms.iter().all(|v| *v == 0.0));
    let loc = local_estimate_experiment(&sol, &prob, &p(&[PI, PI]), 1.0, 2, 2.0, 2.0).unwrap();
    assert_eq!(loc.c_emp, 0.0);
}

#[test]
fn eigen_forcing_follows_the_discrete_mode_ode() {
    for kind in [FieldKind::Scalar, FieldKind::OneForm] {
        let (n, dt) = (24, 0.05);
        let prob = eigen_problem(n, dt, kind);
        let sol = solve_parabolic(&prob).unwrap();
        assert_eq!(sol.u.times.len(), 13);
        let lam = discrete_eigenvalue(n);
        let mut a = 0.0;
        let g = &prob.geometry;
        for j in 0..sol.u.times.len() {
            if j > 0 {
                a = (a + dt) / (1.0 + dt * lam);
            }
            let frame = sol.laplacian.restrict(&sol.u.frames[j]);
            let f0: Vec<f64> = (0..g.len())
                .flat_map(|q| {
                    let x = g.grid.node(q);
                    let s = x[0].sin() * x[1].sin();
                    if kind == FieldKind::Scalar {
                        vec![s]
                    } else {
                        vec![s, 0.0]
                    }
                })
                .collect();
            // u stays in the mode: restrict(extend(c)) is a fixed multiple of c for one-forms
            let mode = sol.laplacian.restrict(&f0);
            let den = sol.laplacian.inner(&mode, &mode);
            let coef = sol.laplacian.inner(&frame, &mode) / den;
            let expect = if kind == FieldKind::Scalar { a } else { a * ((PI / n as f64).cos()).powi(2) };
            assert!((coef - expect).abs() < 1e-9, "{kind:?} j={j}: {coef} vs {expect}");
        }
        assert!(sol.steps.iter().all(|s| s.residual <= 1e-10));
        let rep = check_threshold_contraction(&sol);
        assert!(rep.holds && rep.holds_trapezoid);
    }
}

#[test]
fn steady_state_is_reached() {
    let g = torus(64);
    let lap = discrete_laplacian(g.clone(), FieldKind::Scalar).unwrap();
    let c = p(&[2.0, 3.0]);
    let raw: Vec<f64> = nodes(&g, |x| {
        let s = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() / 1.5;
        if s < 1.0 {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    });
    let mean = lap.inner(&raw, &vec![1.0; raw.len()]) / lap.inner(&vec![1.0; raw.len()], &vec![1.0; raw.len()]);
    let v: Vec<f64> = raw.iter().map(|x| x - mean).collect();
    let w = lap.apply(&v);
    let prob = ParabolicProblem::new(
        g,
        FieldKind::Scalar,
        Forcing::Nodal { values: Arc::new(w), profile: TimeProfile::Constant },
        4.9,
        0.1,
        0.02,
    )
    .unwrap();
    let sol = solve_parabolic(&prob).unwrap();
    let last = sol.laplacian.restrict(sol.u.frames.last().unwrap());
    let diff: Vec<f64> = last.iter().zip(&v).map(|(a, b)| a - b).collect();
    let rel = sol.laplacian.norm(&diff) / sol.laplacian.norm(&v);
    assert!(rel < 1e-2, "{rel}");
}

#[test]
fn contraction_and_dissipation_on_dirichlet_boxes() {
    let forcing = ForcingSpec::Bump {
        center: vec![0.0, 1.0],
        radius: 0.3,
        amplitude: 2.0,
        profile: TimeProfile::Pulse { t_off: 0.2 },
    };
    let g = geo(ModelSpec::halfplane(2), &[-0.6, 0.4], &[0.6, 1.6], &[33, 33], false);
    let prob = ParabolicProblem::new(g, FieldKind::Scalar, Forcing::Spec(forcing), 0.4, 0.1, 0.01).unwrap();
    let sol = solve_parabolic(&prob).unwrap();
    let rep = check_threshold_contraction(&sol);
    assert!(rep.holds, "{}", rep.worst_ratio);
    assert!(rep.worst_ratio > 0.5 && rep.worst_ratio <= 1.0);
    for j in 1..rep.times.len() {
        if rep.times[j - 1] >= 0.2 {
            assert!(rep.u_norms[j] <= rep.u_norms[j - 1] * (1.0 + 1e-12));
        }
    }
    let mut csv = Vec::new();
    rep.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("t,norm_u,int_norm_omega"));
}

#[test]
fn rejects_bad_problems() {
    let g = geo(ModelSpec::euclidean(2), &[0.0, 0.0], &[1.0, 1.0], &[11, 11], false);
    assert!(matches!(
        ParabolicProblem::new(g.clone(), FieldKind::Scalar, Forcing::zero(), 1.0, 0.1, 0.0),
        Err(riemheat::Error::Config(_))
    ));
    let near_wall =
        ForcingSpec::Bump { center: vec![0.1, 0.5], radius: 0.2, amplitude: 1.0, profile: TimeProfile::Constant };
    assert!(ParabolicProblem::new(g, FieldKind::Scalar, Forcing::Spec(near_wall), 1.0, 0.1, 0.1).is_err());
}

#[test]
fn problem_spec_round_trip() {
    let spec = ProblemSpec {
        model: ModelSpec::torus(2, 2.0 * PI),
        kind: FieldKind::Scalar,
        cells: 16,
        lo: None,
        hi: None,
        forcing: ForcingSpec::Bump {
            center: vec![3.0, 3.0],
            radius: 1.0,
            amplitude: 1.0,
            profile: TimeProfile::Ramp { t_on: 0.1 },
        },
        horizon: 0.2,
        alpha: 0.1,
        dt: 0.05,
    };
    let json = serde_json::to_string(&spec).unwrap();
    let back: ProblemSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);

    let sub = ProblemSpec {
        model: ModelSpec::euclidean(2),
        lo: Some(vec![1.5, 1.5]),
        hi: Some(vec![4.5, 5.0]),
        ..spec.clone()
    };
    let p = sub.build::<f64>().unwrap();
    assert_eq!(p.geometry.grid.node(p.geometry.len() - 1)[..2], [4.5, 5.0]);
    let outside = ProblemSpec { hi: Some(vec![4.5, 11.0]), ..sub };
    assert!(matches!(outside.build::<f64>(), Err(riemheat::Error::Domain(_))));
    let torus = ProblemSpec { lo: Some(vec![1.0, 1.0]), ..spec.clone() };
    assert!(matches!(torus.build::<f64>(), Err(riemheat::Error::Config(_))));
    let prob = spec.build::<f64>().unwrap();
    assert_eq!(prob.geometry.len(), 256);
    assert_eq!(prob.steps(), 6);
}

#[test]
fn local_estimate_is_scale_stable_on_euclidean() {
    let g =
        geo(ModelSpec::euclidean(2).with_box(&[-1.0, -1.0], &[4.0, 4.0]), &[0.0, 0.0], &[3.0, 3.0], &[61, 61], false);
    let f = ForcingSpec::Bump {
        center: vec![1.5, 1.5],
        radius: 1.0,
        amplitude: 1.0,
        profile: TimeProfile::Ramp { t_on: 0.1 },
    };
    let prob = ParabolicProblem::new(g, FieldKind::Scalar, Forcing::Spec(f), 0.3, 0.1, 0.02).unwrap();
    let sol = solve_parabolic(&prob).unwrap();
    let c = p(&[1.5, 1.5]);
    let a = local_estimate_experiment(&sol, &prob, &c, 1.0, 2, 2.0, 2.0).unwrap();
    let b = local_estimate_experiment(&sol, &prob, &c, 0.5, 2, 2.0, 2.0).unwrap();
    assert!(a.c_emp > 0.0 && b.c_emp > 0.0);
    let drift = (a.c_emp / b.c_emp).max(b.c_emp / a.c_emp);
    assert!(drift <= 4.0, "{a:?} {b:?}");
}

#[test]
fn global_estimate_is_finite_and_vacuous_for_zero_forcing() {
    let chart = ModelSpec::euclidean(2).with_box(&[-1.0, -1.0], &[4.0, 4.0]).build::<f64>().unwrap();
    let field =
        radius_field(chart.clone(), GridSpec::new(&[0.0, 0.0], &[3.0, 3.0], &[3, 3]), AdmissibilityParams::new(2, 0.2))
            .unwrap();
    let g =
        GridGeometry::new(chart, NodeGrid::new(&p(&[0.0, 0.0]), &p(&[3.0, 3.0]), &[31, 31], false).unwrap()).unwrap();
    let table = bootstrap_table(2, 2, Q::from_integer(4), Variant::Sections).unwrap();
    let f = ForcingSpec::Bump { center: vec![1.5, 1.5], radius: 1.0, amplitude: 1.0, profile: TimeProfile::Constant };
    let prob = ParabolicProblem::new(g.clone(), FieldKind::Scalar, Forcing::Spec(f), 0.2, 0.1, 0.05).unwrap();
    let rep = global_estimate_experiment(&solve_parabolic(&prob).unwrap(), &prob, &field, &table).unwrap();
    assert!(!rep.vacuous && rep.ratio.unwrap().is_finite() && rep.ratio.unwrap() > 0.0);
    let zero = ParabolicProblem::new(g, FieldKind::Scalar, Forcing::zero(), 0.2, 0.1, 0.05).unwrap();
    let rep = global_estimate_experiment(&solve_parabolic(&zero).unwrap(), &zero, &field, &table).unwrap();
    assert!(rep.vacuous && rep.ratio.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn contraction_holds_for_random_bumps(cx in 1.0..5.0f64, cy in 1.0..5.0f64, rad in 0.4..1.5f64, amp in -3.0..3.0f64, t_on in 0.01..0.3f64) {
        let f = ForcingSpec::Bump { center: vec![cx, cy], radius: rad, amplitude: amp, profile: TimeProfile::Ramp { t_on } };
        let prob = ParabolicProblem::new(torus(20), FieldKind::Scalar, Forcing::Spec(f), 0.3, 0.1, 0.05).unwrap();
        let rep = check_threshold_contraction(&solve_parabolic(&prob).unwrap());
        prop_assert!(rep.holds);
    }
}
