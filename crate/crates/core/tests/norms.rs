#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use riemheat::admissible::*;
use riemheat::covering::*;
use riemheat::exponents::Variant;
use riemheat::geometry::*;
use riemheat::grid::NodeGrid;
use riemheat::linalg::point;
use riemheat::norms::*;

fn p(xs: &[f64]) -> [f64; 3] {
    point(xs)
}

fn geometry(spec: ModelSpec, lo: &[f64], hi: &[f64], counts: &[usize], periodic: bool) -> Arc<GridGeometry<f64>> {
    let chart = spec.build::<f64>().unwrap();
    GridGeometry::new(chart, NodeGrid::new(&p(lo), &p(hi), counts, periodic).unwrap()).unwrap()
}

fn torus(n: usize) -> Arc<GridGeometry<f64>> {
    geometry(ModelSpec::torus(2, 2.0 * PI), &[0.0, 0.0], &[2.0 * PI, 2.0 * PI], &[n, n], true)
}

fn unit_square(n: usize) -> Arc<GridGeometry<f64>> {
    geometry(ModelSpec::euclidean(2), &[0.0, 0.0], &[1.0, 1.0], &[n, n], false)
}

fn halfplane_box(n: usize) -> Arc<GridGeometry<f64>> {
    geometry(ModelSpec::halfplane(2), &[-0.5, 1.0], &[0.5, 2.0], &[n, n], false)
}

#[test]
fn constants_have_their_absolute_value() {
    let g = unit_square(9);
    let u = DiscreteField::scalar(g, |_| -3.0);
    for r in [1.0, 2.0, 3.5] {
        for order in 0..=2 {
            let v = sobolev_norm(&u, &NormRequest::sobolev(r, order)).unwrap();
            assert!((v - 3.0).abs() < 1e-12, "r={r} order={order}: {v}");
        }
    }
}

#[test]
fn torus_sine_norms() {
    let u = DiscreteField::scalar(torus(128), |x| x[0].sin());
    let l2 = sobolev_norm(&u, &NormRequest::lebesgue(2.0)).unwrap();
    assert!((l2 - PI * 2f64.sqrt()).abs() < 1e-12);
    // the central difference of sin is cos scaled by sin(h)/h
    let h = 2.0 * PI / 128.0;
    let w12 = sobolev_norm(&u, &NormRequest::sobolev(2.0, 1)).unwrap();
    assert!((w12 - PI * 2f64.sqrt() * (1.0 + h.sin() / h)).abs() < 1e-10);
}

#[test]
fn second_order_convergence_of_the_hessian_norm() {
    // |Hess(sin x sin y)|^2 = 2 sin^2 x sin^2 y + 2 cos^2 x cos^2 y, integral 4 pi^2
    let err = |n: usize| {
        let u = DiscreteField::scalar(torus(n), |x| x[0].sin() * x[1].sin());
        let m = pointwise_moduli(&u, 0, 2);
        let quad = &u.geometry.quad;
        let h2: f64 = m[2].iter().zip(quad.iter()).map(|(v, q)| v * v * q).sum();
        (h2.sqrt() - 2.0 * PI).abs()
    };
    let (a, b) = (err(32), err(64));
    assert!(a < 0.1, "{a}");
    let rate = (a / b).log2();
    assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
}

#[test]
fn halfplane_covariant_derivatives_of_the_height_function() {
    // u = y: |du|_g = y, Hess u = -Gamma^2_ij, |Hess u|_g^2 = 2 y^2 and dv = dx dy / y^2
    let g = halfplane_box(33);
    let u = DiscreteField::scalar(g.clone(), |x| x[1]);
    let grad = sobolev_norm(&u, &NormRequest::sobolev(2.0, 1)).unwrap()
        - sobolev_norm(&u, &NormRequest::lebesgue(2.0)).unwrap();
    assert!((grad - 1.0).abs() < 1e-3, "{grad}");
    let m = pointwise_moduli(&u, 0, 2);
    for q in 0..g.len() {
        let y = g.grid.node(q)[1];
        assert!((m[1][q] - y).abs() < 1e-9);
        assert!((m[2][q] - 2f64.sqrt() * y).abs() < 1e-9);
    }
}

#[test]
fn halfplane_covariant_derivative_of_dx() {
    // (nabla dx)_{bi} = -Gamma^1_bi: only the (1,2) entries, both 1/y
    let g = halfplane_box(17);
    let w = DiscreteField::one_form(g.clone(), |_| [1.0, 0.0]).unwrap();
    let m = pointwise_moduli(&w, 0, 1);
    for q in 0..g.len() {
        let y = g.grid.node(q)[1];
        assert!((m[0][q] - y).abs() < 1e-12);
        assert!((m[1][q] - 2f64.sqrt() * y).abs() < 1e-9);
    }
}

#[test]
fn flat_one_form_on_the_torus() {
    // omega = sin(y) dx: ||omega||_2^2 = 2 pi^2, ||nabla omega||_2^2 = 2 pi^2, ||nabla^2 omega||_2^2 = 2 pi^2
    let w = DiscreteField::one_form(torus(96), |x| [x[1].sin(), 0.0]).unwrap();
    let v = sobolev_norm(&w, &NormRequest::sobolev(2.0, 2)).unwrap();
    let h = 2.0 * PI / 96.0;
    let s = h.sin() / h;
    assert!((v - PI * 2f64.sqrt() * (1.0 + s + s * s)).abs() < 1e-10, "{v}");
    assert!(DiscreteField::one_form(
        geometry(ModelSpec::euclidean(3), &[0.0; 3], &[1.0; 3], &[4, 4, 4], false),
        |_| [0.0; 2]
    )
    .is_err());
}

#[test]
fn bochner_norm_in_time() {
    let g = unit_square(5);
    let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let frames = times.iter().map(|&t| vec![2.0 * t; g.len()]).collect();
    let u = DiscreteField::new(g, FieldKind::Scalar, times, frames).unwrap();
    let req = NormRequest::lebesgue(2.0).over(TimeWindow { s: 1.0, t0: 0.0, t1: 1.0 });
    assert!((sobolev_norm(&u, &req).unwrap() - 1.0).abs() < 1e-12);
    let half = NormRequest::lebesgue(2.0).over(TimeWindow { s: 1.0, t0: 0.0, t1: 0.5 });
    assert!((sobolev_norm(&u, &half).unwrap() - 0.25).abs() < 1e-12);
    assert!(sobolev_norm(&u, &NormRequest::lebesgue(2.0)).is_err());
}

#[test]
fn holder_volume_inequality() {
    let g = torus(32);
    let c = DiscreteField::scalar(g.clone(), |_| 1.5);
    let ball = Region::Ball { center: p(&[PI, PI]), radius: 1.0 };
    let rep = holder_volume_check(&c, 0, &ball, 4.0).unwrap();
    assert!(rep.holds && (rep.lhs - rep.rhs).abs() < 1e-12 * rep.rhs);
    let u = DiscreteField::scalar(g, |x| x[0].cos() + 0.3 * x[1].sin());
    let at_two = holder_volume_check(&u, 0, &ball, 2.0).unwrap();
    assert!((at_two.lhs - at_two.rhs).abs() < 1e-12);
    assert!(holder_volume_check(&u, 0, &ball, 1.5).is_err());
}

#[test]
fn euclidean_chart_comparison_is_exact() {
    let g = geometry(
        ModelSpec::euclidean(2).with_box(&[-2.0, -2.0], &[2.0, 2.0]),
        &[-1.0, -1.0],
        &[1.0, 1.0],
        &[41, 41],
        false,
    );
    let u = DiscreteField::scalar(g, |x| (x[0] * 2.0).sin() + x[1] * x[1]);
    let rep = chart_norm_comparison(&u, 0, &p(&[0.0, 0.0]), 0.8, 2, 2.0, 0.25, Variant::Sections).unwrap();
    assert!((rep.manifold_over_chart - 1.0).abs() < 1e-12);
    assert!(rep.chart_inner_over_manifold <= 1.0);
    assert!((rep.scaled_upper - 0.8f64.powi(2)).abs() < 1e-12);
}

#[test]
fn halfplane_chart_comparison_stays_in_the_band() {
    let g = geometry(ModelSpec::halfplane(2), &[-0.3, 0.7], &[0.3, 1.3], &[61, 61], false);
    let u = DiscreteField::scalar(g, |x| (3.0 * x[0]).cos() * x[1]);
    let rep = chart_norm_comparison(&u, 0, &p(&[0.0, 1.0]), 0.2, 1, 2.0, 0.3, Variant::Sections).unwrap();
    assert!(rep.manifold_over_chart > 0.7 && rep.manifold_over_chart < 1.4, "{rep:?}");
    assert!(rep.chart_inner_over_manifold > 0.5 && rep.chart_inner_over_manifold <= 1.0 + 1e-9, "{rep:?}");
}

#[test]
fn embedding_check_reports_tau_and_domain() {
    let g = geometry(
        ModelSpec::euclidean(2).with_box(&[-2.0, -2.0], &[2.0, 2.0]),
        &[-1.0, -1.0],
        &[1.0, 1.0],
        &[41, 41],
        false,
    );
    let u = DiscreteField::scalar(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
    let rep = sobolev_embedding_check(&u, 0, &p(&[0.0, 0.0]), 0.9, 1, 1.5, Variant::Sections).unwrap();
    assert!((rep.tau - 6.0).abs() < 1e-12);
    assert!(rep.c_emp > 0.0 && rep.c_emp.is_finite());
    assert!(matches!(
        sobolev_embedding_check(&u, 0, &p(&[0.0, 0.0]), 0.9, 1, 2.0, Variant::Sections),
        Err(riemheat::Error::Domain(_))
    ));
}

#[test]
fn covering_sum_is_equivalent_to_the_weighted_norm() {
    let chart = ModelSpec::euclidean(2).with_box(&[-2.0, -2.0], &[3.0, 3.0]).build::<f64>().unwrap();
    let field =
        radius_field(chart.clone(), GridSpec::new(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]), AdmissibilityParams::new(1, 0.2))
            .unwrap();
    let cover = build_admissible_covering(&field, 0).unwrap();
    let g =
        GridGeometry::new(chart, NodeGrid::new(&p(&[0.0, 0.0]), &p(&[1.0, 1.0]), &[41, 41], false).unwrap()).unwrap();
    let u = DiscreteField::scalar(g, |x| (2.0 * x[0]).sin() * (x[1] + 0.5));
    for members in [Members::Cover, Members::Full] {
        let rep = check_norm_equivalence(&u, 0, &cover, &field, 1.5, 1, 2.0, members).unwrap();
        assert_eq!(rep.uncovered_nodes, 0);
        assert!(rep.holds, "{rep:?}");
        assert!(rep.sum > 0.0);
    }
}

fn trig_coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 6)
}

fn trig(g: &Arc<GridGeometry<f64>>, c: &[f64]) -> DiscreteField<f64> {
    let c = c.to_vec();
    DiscreteField::scalar(g.clone(), move |x| {
        c[0] + c[1] * x[0].sin()
            + c[2] * x[1].cos()
            + c[3] * (x[0] + x[1]).sin()
            + c[4] * (2.0 * x[0]).cos()
            + c[5] * x[1]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norms_are_homogeneous_and_subadditive(a in trig_coeffs(), b in trig_coeffs(), lambda in -3.0..3.0f64, r in 1.0..4.0f64, order in 0usize..=2) {
        let g = halfplane_box(13);
        let (u, v) = (trig(&g, &a), trig(&g, &b));
        let req = NormRequest::sobolev(r, order);
        let nu = sobolev_norm(&u, &req).unwrap();
        let scaled = sobolev_norm(&u.scaled(lambda), &req).unwrap();
        prop_assert!((scaled - lambda.abs() * nu).abs() <= 1e-10 * (1.0 + nu));
        let sum: Vec<f64> = u.frames[0].iter().zip(&v.frames[0]).map(|(x, y)| x + y).collect();
        let w = DiscreteField::new(g.clone(), FieldKind::Scalar, vec![0.0], vec![sum]).unwrap();
        let nw = sobolev_norm(&w, &req).unwrap();
        prop_assert!(nw <= (nu + sobolev_norm(&v, &req).unwrap()) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn holder_inequality_holds(a in trig_coeffs(), r in 2.0..8.0f64, cx in 1.0..5.0f64, rad in 0.3..2.0f64) {
        let g = torus(24);
        let rep = holder_volume_check(&trig(&g, &a), 0, &Region::Ball { center: p(&[cx, 3.0]), radius: rad }, r).unwrap();
        prop_assert!(rep.holds);
    }
}
