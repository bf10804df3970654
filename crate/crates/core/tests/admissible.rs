use proptest::prelude::*;
use riemheat::admissible::*;
use riemheat::geometry::*;
use riemheat::linalg::point;
use std::f64::consts::{FRAC_PI_2, PI};

fn p(xs: &[f64]) -> [f64; 3] {
    point(xs)
}

#[test]
fn euclidean_balls_are_admissible() {
    let c = ModelSpec::euclidean(2).build::<f64>().unwrap();
    for eps in [0.05, 0.2, 1.0 / 3.0] {
        assert!(is_admissible(c.as_ref(), &p(&[5.0, 5.0]), 1.0, &AdmissibilityParams::new(2, eps)));
    }
}

#[test]
fn strongly_perturbed_ball_leaves_the_band() {
    // a = 0.5 exceeds eps = 0.1 once |x1| > 0.2
    let c = ModelSpec::perturbed(2, 0.5, 1.0).build::<f64>().unwrap();
    for density in [8.0, 80.0] {
        let prm = AdmissibilityParams::new(1, 0.1).with_density(density);
        assert!(!is_admissible(c.as_ref(), &p(&[0.0, 0.0]), 1.0, &prm));
    }
}

#[test]
fn halfplane_radius_two_is_not_admissible() {
    let c = ModelSpec::halfplane(2).build::<f64>().unwrap();
    let prm = AdmissibilityParams::new(1, 1.0 / 3.0);
    assert!(!is_admissible(c.as_ref(), &p(&[0.0, 1.0]), 2.0, &prm));
}

#[test]
fn ball_outside_box_is_truncated() {
    let c = ModelSpec::euclidean(2).build::<f64>().unwrap();
    let r = check_admissible(c.as_ref(), &p(&[0.5, 5.0]), 1.0, &AdmissibilityParams::new(1, 0.2));
    assert_eq!(r, Admissibility { admissible: false, truncated: true });
}

#[test]
fn euclidean_radius_is_the_cap() {
    let c = ModelSpec::euclidean(2).build::<f64>().unwrap();
    let s = admissible_radius(c.as_ref(), &p(&[5.0, 5.0]), &AdmissibilityParams::new(2, 0.2)).unwrap();
    assert_eq!(s.r_prime, 2.0);
    assert_eq!(s.r_eps, 1.0);
    assert!(s.truncated);
    let near_edge = admissible_radius(c.as_ref(), &p(&[1.0, 5.0]), &AdmissibilityParams::new(2, 0.2)).unwrap();
    assert!(near_edge.truncated && (near_edge.r_prime - 1.0).abs() < 1e-9);
}

#[test]
fn torus_radius_is_one_everywhere() {
    let c = ModelSpec::torus(2, 4.0).build::<f64>().unwrap();
    let f =
        radius_field(c, GridSpec::new(&[0.0, 0.0], &[3.9, 3.9], &[6, 6]), AdmissibilityParams::new(2, 0.2)).unwrap();
    assert!(f.samples.iter().all(|s| s.r_eps == 1.0));
}

#[test]
fn center_on_the_box_face_is_degenerate() {
    let c = ModelSpec::euclidean(2).build::<f64>().unwrap();
    let e = admissible_radius(c.as_ref(), &p(&[0.0, 5.0]), &AdmissibilityParams::new(2, 0.2)).unwrap_err();
    assert!(matches!(e, riemheat::Error::Degenerate { .. }));
    let f =
        radius_field(c, GridSpec::new(&[0.0, 5.0], &[5.0, 5.0], &[2, 1]), AdmissibilityParams::new(2, 0.2)).unwrap();
    assert!(f.samples[0].degenerate && !f.samples[1].degenerate);
}

#[test]
fn invalid_parameters_are_rejected() {
    let c = ModelSpec::euclidean(2).build::<f64>().unwrap();
    let at = p(&[5.0, 5.0]);
    assert!(admissible_radius(c.as_ref(), &at, &AdmissibilityParams::new(2, 0.4)).is_err());
    assert!(admissible_radius(c.as_ref(), &at, &AdmissibilityParams::new(2, 0.2).with_density(4.0)).is_err());
    assert!(matches!(
        admissible_radius(c.as_ref(), &at, &AdmissibilityParams::new(4, 0.2)),
        Err(riemheat::Error::Capability(_))
    ));
}

// phi = 1 + a sin x1 at center (pi/2, 0); the normalized chart divides by
// sqrt(1.1) per index. The extreme x1 offset w of B(c, R) solves
// int_c^{c+w} sqrt(phi) = R (a straight path along x1 is shortest there),
// so the continuum condition 2 reads R * a * sin(w) / 1.1^1.5 <= eps.
fn perturbed_oracle(a: f64, eps: f64) -> f64 {
    let phi = |x: f64| 1.0 + a * x.sin();
    let offset = |r: f64| {
        // both sides are symmetric about pi/2
        let (mut w, mut acc, dx) = (0.0f64, 0.0f64, 1e-5);
        while acc < r {
            acc += phi(FRAC_PI_2 + w + 0.5 * dx).sqrt() * dx;
            w += dx;
        }
        w
    };
    let cond = |r: f64| r * a * offset(r).sin() / 1.1f64.powf(1.5);
    let mut r = 0.0;
    while cond(r + 1e-4) <= eps {
        r += 1e-4;
    }
    r
}

#[test]
fn perturbed_radius_matches_analytic_scan() {
    let c = ModelSpec::perturbed(2, 0.1, 1.0).build::<f64>().unwrap();
    let center = p(&[FRAC_PI_2, 0.0]);
    let oracle = perturbed_oracle(0.1, 0.05);
    let coarse = admissible_radius(c.as_ref(), &center, &AdmissibilityParams::new(1, 0.05)).unwrap();
    let fine =
        admissible_radius(c.as_ref(), &center, &AdmissibilityParams::new(1, 0.05).with_density(40.0).with_tol(1e-4))
            .unwrap();
    assert!(!coarse.truncated);
    // a lattice sup never exceeds the continuum sup
    assert!(coarse.r_prime >= oracle - 1e-3 && fine.r_prime >= oracle - 1e-4);
    assert!((fine.r_prime - oracle).abs() < 5e-3, "fine {} oracle {oracle}", fine.r_prime);
    assert!(coarse.r_prime - oracle < 0.08 * oracle, "coarse {} oracle {oracle}", coarse.r_prime);
}

// Normalized chart at (x0, y0): g~ = (1 + eta)^-2 with eta = (y - y0)/y0 and
// d^k g~ = (-1)^k (k+1)! (1 + eta)^(-2-k); the ball spans y0 e^{+-R} in y.
fn halfplane_oracle(m: usize, eps: f64) -> f64 {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let ok = |r: f64| {
        let band = (2.0 * r).exp() <= 1.0 + eps && (-2.0 * r).exp() >= 1.0 - eps;
        let s: f64 = (1..=m).map(|k| r.powi(k as i32) * fact(k + 1) * ((k as f64 + 2.0) * r).exp()).sum();
        band && s <= eps
    };
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn halfplane_field_matches_pointwise_oracle() {
    let c = ModelSpec::halfplane(2).build::<f64>().unwrap();
    for (m, eps) in [(1, 1.0 / 3.0), (2, 0.2)] {
        let oracle = halfplane_oracle(m, eps);
        let f = radius_field(
            c.clone(),
            GridSpec::new(&[-1.0, 0.5], &[1.0, 2.0], &[5, 7]),
            AdmissibilityParams::new(m, eps),
        )
        .unwrap();
        for s in &f.samples {
            assert!(s.r_eps > 0.0 && !s.truncated);
            assert!(s.r_prime >= oracle - 1e-3, "{} < {oracle}", s.r_prime);
            assert!(s.r_prime <= oracle * 1.03 + 2e-3, "{} vs {oracle}", s.r_prime);
        }
        // isometric dilations of the half-plane map normalized charts onto each other
        let first = f.samples[0].r_prime;
        assert!(f.samples.iter().all(|s| (s.r_prime - first).abs() <= 2e-3));
    }
}

#[test]
fn perturbed_field_is_periodic() {
    let c = ModelSpec::perturbed(2, 0.1, 1.0).build::<f64>().unwrap();
    let prm = AdmissibilityParams::new(2, 0.1);
    for x in [-1.0, -0.3, 0.4] {
        let a = admissible_radius(c.as_ref(), &p(&[x, 0.0]), &prm).unwrap();
        let b = admissible_radius(c.as_ref(), &p(&[x + 2.0 * PI, 0.0]), &prm);
        // x + 2 pi may leave the default box; use a wider one
        let wide = ModelSpec::perturbed(2, 0.1, 1.0).with_box(&[-8.0, -4.0], &[12.0, 4.0]).build::<f64>().unwrap();
        let b = b.unwrap_or_else(|_| admissible_radius(wide.as_ref(), &p(&[x + 2.0 * PI, 0.0]), &prm).unwrap());
        assert!((a.r_eps - b.r_eps).abs() <= prm.bisection_tol, "{} vs {}", a.r_eps, b.r_eps);
    }
}

#[test]
fn slow_variation_and_lipschitz_on_models() {
    let cases = [
        (ModelSpec::euclidean(2), [2.0, 2.0], [8.0, 8.0], 2, 0.2),
        (ModelSpec::perturbed(2, 0.1, 1.0), [-2.0, -1.0], [2.0, 1.0], 2, 0.1),
        (ModelSpec::halfplane(2), [-0.1, 0.9], [0.1, 1.1], 1, 1.0 / 3.0),
    ];
    for (spec, lo, hi, m, eps) in cases {
        let f =
            radius_field(spec.build().unwrap(), GridSpec::new(&lo, &hi, &[10, 10]), AdmissibilityParams::new(m, eps))
                .unwrap();
        let sv = check_slow_variation(&f);
        let li = check_lipschitz(&f);
        assert!(sv.passed() && li.passed(), "{}: {:?} {:?}", spec.model, sv.violations, li.violations);
        assert!(sv.pairs_checked > 0, "{}", spec.model);
    }
}

#[test]
fn uniform_lower_bounds() {
    let e = radius_field(
        ModelSpec::euclidean(2).build().unwrap(),
        GridSpec::new(&[2.0, 2.0], &[8.0, 8.0], &[8, 8]),
        AdmissibilityParams::new(2, 0.2),
    )
    .unwrap();
    assert_eq!(uniform_lower_bound(&e), Some(1.0));
    let f = radius_field(
        ModelSpec::perturbed(2, 0.1, 1.0).build().unwrap(),
        GridSpec::new(&[-2.0, -1.0], &[2.0, 1.0], &[9, 3]),
        AdmissibilityParams::new(1, 0.2),
    )
    .unwrap();
    let lb = uniform_lower_bound(&f).unwrap();
    let min = f.samples.iter().map(|s| s.r_eps).fold(f64::INFINITY, f64::min);
    assert!(lb > 0.0 && lb == min);
}

#[test]
fn poincare_radius_is_invariant_under_signed_permutations() {
    // The componentwise derivative sup is preserved by the rotations and
    // reflections that permute coordinates up to sign, and by nothing finer.
    let c = ModelSpec::poincare(2).build::<f64>().unwrap();
    let prm = AdmissibilityParams::new(2, 0.2).with_density(16.0);
    for x in [[0.2, 0.0], [0.3, 0.1], [0.25, 0.25]] {
        let reference = admissible_radius(c.as_ref(), &p(&x), &prm).unwrap();
        for img in [[-x[0], x[1]], [x[1], x[0]], [-x[1], x[0]], [-x[0], -x[1]], [x[1], -x[0]]] {
            let s = admissible_radius(c.as_ref(), &p(&img), &prm).unwrap();
            assert!((s.r_eps - reference.r_eps).abs() <= 2.0 * prm.bisection_tol, "{x:?} -> {img:?}");
        }
    }
}

#[test]
fn csv_has_documented_columns() {
    let f = radius_field(
        ModelSpec::euclidean(2).build::<f64>().unwrap(),
        GridSpec::new(&[4.0, 4.0], &[6.0, 6.0], &[2, 2]),
        AdmissibilityParams::new(1, 0.2),
    )
    .unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,R_prime,R_eps,truncated,iterations"));
    assert_eq!(lines.next(), Some("4,4,2,1,1,1"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn interpolation_reproduces_nodes() {
    let f = radius_field(
        ModelSpec::perturbed(2, 0.1, 1.0).build::<f64>().unwrap(),
        GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[3, 3]),
        AdmissibilityParams::new(2, 0.1),
    )
    .unwrap();
    for (i, s) in f.samples.iter().enumerate() {
        assert!((f.interpolate(&f.grid.node(i)).unwrap() - s.r_eps).abs() < 1e-12);
    }
    assert!(f.interpolate(&p(&[1.5, 0.0])).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predicate_is_monotone_in_radius(x in -1.0f64..1.0, y in -1.0f64..1.0, which in 0usize..3) {
        let (spec, center) = match which {
            0 => (ModelSpec::perturbed(2, 0.2, 1.5), p(&[x, y])),
            1 => (ModelSpec::halfplane(2), p(&[x, 1.0 + 0.4 * y])),
            _ => (ModelSpec::poincare(2), p(&[0.4 * x, 0.4 * y])),
        };
        let c = spec.build::<f64>().unwrap();
        let prm = AdmissibilityParams::new(2, 0.2);
        let ladder: Vec<f64> = (0..12).map(|k| 0.01 * 1.6f64.powi(k)).collect();
        let flags: Vec<bool> = ladder.iter().map(|&r| is_admissible(c.as_ref(), &center, r, &prm)).collect();
        for w in flags.windows(2) {
            prop_assert!(w[0] || !w[1]);
        }
    }

    #[test]
    fn bisection_brackets_the_radius(x in -1.0f64..1.0, y in -1.0f64..1.0, which in 0usize..3) {
        let (spec, center) = match which {
            0 => (ModelSpec::perturbed(2, 0.2, 1.5), p(&[x, y])),
            1 => (ModelSpec::halfplane(2), p(&[x, 1.0 + 0.4 * y])),
            _ => (ModelSpec::poincare(2), p(&[0.4 * x, 0.4 * y])),
        };
        let c = spec.build::<f64>().unwrap();
        let prm = AdmissibilityParams::new(2, 0.2);
        let s = admissible_radius(c.as_ref(), &center, &prm).unwrap();
        prop_assume!(!s.truncated);
        let t = prm.bisection_tol;
        prop_assert!(is_admissible(c.as_ref(), &center, s.r_prime - 2.0 * t, &prm));
        prop_assert!(!is_admissible(c.as_ref(), &center, s.r_prime + 2.0 * t, &prm));
        prop_assert!(s.r_eps == (s.r_prime / 2.0).min(1.0) && s.r_eps > 0.0 && s.r_eps <= 1.0);
    }

    #[test]
    fn radius_is_monotone_in_eps(x in -1.0f64..1.0, y in -1.0f64..1.0, which in 0usize..2) {
        let (spec, center) = match which {
            0 => (ModelSpec::perturbed(2, 0.1, 1.0), p(&[x, y])),
            _ => (ModelSpec::halfplane(2), p(&[x, 1.0 + 0.4 * y])),
        };
        let c = spec.build::<f64>().unwrap();
        let mut last = 0.0;
        for eps in [0.05, 0.1, 0.2, 1.0 / 3.0] {
            let s = admissible_radius(c.as_ref(), &center, &AdmissibilityParams::new(2, eps)).unwrap();
            prop_assert!(s.r_prime >= last);
            last = s.r_prime;
        }
    }
}
