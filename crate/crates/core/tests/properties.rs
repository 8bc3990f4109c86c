use isotherm_core::asymptotics::{curvature_prediction, heat_constant, heat_constant_closed_form};
use isotherm_core::comparison::{profile_f_pm, t1_epsilon};
use isotherm_core::detectors::{constant_distance_test, moment_balance, monge_ampere_test};
use isotherm_core::geometry::{
    build_signed_distance, dist, parallel_body, principal_curvatures, reflection_containment, sample_boundary,
    touching_ball_with, DomainSpec,
};
use isotherm_core::grid::GridSpec;
use isotherm_core::nonlinearity::{pressure, Nonlinearity};
use isotherm_core::solver::{solve, SolverOptions, Stepping};
use isotherm_core::ProblemKind;
use proptest::prelude::*;

fn square(half: f64, h: f64) -> GridSpec {
    GridSpec::covering(&[-half, -half], &[half, half], h, 0.0).unwrap()
}

fn small_solve(domain: &DomainSpec, problem: ProblemKind, grid: &GridSpec, schedule: &[f64]) -> isotherm_core::SolutionSeries {
    let h = grid.max_spacing();
    let step = Stepping {
        dt_initial: 1e-3 * h * h,
        growth: 1.2,
        dt_max: 1.0,
    };
    solve(problem, domain, &Nonlinearity::identity(), grid, schedule, &step, &SolverOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn eikonal_and_sign_consistency(a in 0.5f64..1.0, b in 0.5f64..1.0, cx in -0.1f64..0.1) {
        let h = 1.0 / 32.0;
        let d = DomainSpec::ellipse(&[cx, 0.0], &[a, b]).unwrap();
        let grid = square(1.3, h);
        let sdf = build_signed_distance(&d, &grid).unwrap();
        let reach = a.min(b).powi(2) / a.max(b);
        for i in 0..grid.node_count() {
            let v = sdf.values[i];
            let x = grid.coord(i);
            if v.abs() > h {
                prop_assert_eq!(v > 0.0, d.contains(&x));
            }
            if v.abs() < 0.5 * reach && !grid.is_edge_node(i) {
                let g = sdf.node_gradient_norm(i);
                prop_assert!((g - 1.0).abs() <= 10.0 * h, "|grad d| = {} at {:?}", g, x);
            }
        }
    }

    #[test]
    fn touching_ball_curvature_bound(a in 0.6f64..1.2, b in 0.6f64..1.2, s in 0.05f64..0.9, ang in 0.0f64..6.28) {
        let d = DomainSpec::ellipse(&[0.0, 0.0], &[a, b]).unwrap();
        let x0 = [s * a * ang.cos() * 0.9, s * b * ang.sin() * 0.9, 0.0];
        let h = 1e-3;
        let tb = touching_ball_with(&d, &x0, &[1.0, 0.0, 0.0], h).unwrap();
        if tb.contact_count == 1 {
            let k = principal_curvatures(&d, &tb.y0).unwrap().curvatures;
            let kmax = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(kmax <= 1.0 / tb.radius + 10.0 * h, "kappa {} vs 1/R {}", kmax, 1.0 / tb.radius);
        }
    }

    #[test]
    fn parallel_body_of_ball_sits_at_distance(r in 0.1f64..0.8, big_r in 0.05f64..0.5) {
        let d = DomainSpec::ball(&[0.1, -0.2], r).unwrap();
        let body = parallel_body(&d, big_r).unwrap();
        let h = 1.0 / 64.0;
        for s in sample_boundary(&body, 16.0).unwrap() {
            let gap = dist(&s.point, &[0.1, -0.2, 0.0]) - r;
            prop_assert!((gap - big_r).abs() <= h);
        }
    }

    #[test]
    fn reflection_containment_is_monotone_for_convex(r in 0.3f64..0.8, ang in 0.0f64..6.28, cx in -0.2f64..0.2) {
        let d = DomainSpec::ball(&[cx, 0.1], r).unwrap();
        let probe = square(1.1, 1.0 / 32.0);
        let l = [ang.cos(), ang.sin(), 0.0];
        let top = cx * l[0] + 0.1 * l[1] + r;
        let mut seen = false;
        for k in (0..40).rev() {
            let lambda = top - 2.0 * r * k as f64 / 39.0;
            let c = reflection_containment(&d, &l, lambda, &probe);
            // scanning upward: once contained, contained for all larger lambda
            if seen {
                prop_assert!(c, "lost containment at lambda {}", lambda);
            }
            seen |= c;
        }
    }

    #[test]
    fn pressure_sign_monotone_and_sandwich(amp in 0.0f64..0.5, saturating in any::<bool>(), e1 in -6.0f64..6.0, de in 0.01f64..2.0) {
        let n = if saturating { Nonlinearity::saturating(amp).unwrap() } else { Nonlinearity::wavy(amp).unwrap() };
        let (s1, s2) = (e1.exp(), (e1 + de).exp());
        let (p1, p2) = (pressure(&n, s1).unwrap(), pressure(&n, s2).unwrap());
        prop_assert!(p2 > p1);
        prop_assert_eq!(p1 <= 0.0, s1 <= 1.0);
        let l = s1.ln();
        let (lo, hi) = if l >= 0.0 { (n.delta1() * l, n.delta2() * l) } else { (n.delta2() * l, n.delta1() * l) };
        prop_assert!(p1 >= lo - 1e-9 && p1 <= hi + 1e-9, "Phi({}) = {} not in [{}, {}]", s1, p1, lo, hi);
    }

    #[test]
    fn prediction_increases_with_curvature(r in 0.2f64..2.0, f1 in 0.0f64..0.9, f2 in 0.0f64..0.9, bump in 0.01f64..0.09) {
        let inv = 1.0 / r;
        let k = [f1 * inv, f2 * inv];
        let c = heat_constant(3, ProblemKind::Ibvp).unwrap();
        let base = curvature_prediction(r, &k, c).unwrap();
        let up = curvature_prediction(r, &[(f1 + bump) * inv, f2 * inv], c).unwrap();
        prop_assert!(up > base);
    }

    #[test]
    fn shifted_profiles_are_ordered(xi in -8.0f64..8.0, e1 in 0.01f64..0.24, de in 0.0001f64..0.01) {
        let e2 = (e1 + de).min(0.2499);
        prop_assume!(e2 > e1);
        prop_assert!(profile_f_pm(xi, e1, 1.0) <= profile_f_pm(xi, e2, 1.0));
        prop_assert!(profile_f_pm(xi, e1, -1.0) >= profile_f_pm(xi, e2, -1.0));
    }

    #[test]
    fn threshold_scales_with_epsilon_squared(eps in 0.01f64..0.12, r in 0.5f64..1.0) {
        let d = DomainSpec::ball(&[0.0, 0.0], r).unwrap();
        let sdf = build_signed_distance(&d, &square(r + 0.1, 1.0 / 64.0)).unwrap().with_band(0.2 * r);
        let a = t1_epsilon(&sdf, eps).unwrap();
        let b = t1_epsilon(&sdf, 2.0 * eps).unwrap();
        prop_assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn offsets_have_constant_distance(a in 0.8f64..1.2, b in 0.6f64..0.8, frac in 0.1f64..0.6) {
        let h = 1.0 / 64.0;
        let omega = DomainSpec::ellipse(&[0.0, 0.0], &[a, b]).unwrap();
        let big_r = frac * b * b / a;
        let inner = DomainSpec::inner_parallel(&omega, big_r).unwrap();
        let sdf = build_signed_distance(&omega, &square(1.3, h)).unwrap();
        let gamma = sample_boundary(&inner, 16.0).unwrap();
        let cd = constant_distance_test(&sdf, &gamma).unwrap();
        prop_assert!(cd.is_constant);
        prop_assert!((cd.radius - big_r).abs() <= 3.0 * h);
    }

    #[test]
    fn monge_ampere_constant_on_balls(r in 0.2f64..3.0, big_r in 0.05f64..0.15) {
        let d = DomainSpec::ball(&[0.0, 0.0], r).unwrap();
        let samples = sample_boundary(&d, 64.0 / r).unwrap();
        let rep = monge_ampere_test(&samples, big_r * r, 1.0 / 64.0).unwrap();
        prop_assert!(rep.is_constant);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn ibvp_is_monotone_in_time_and_in_range(r in 0.5f64..1.0) {
        let d = DomainSpec::ball(&[0.0, 0.0], r).unwrap();
        let grid = square(r, 1.0 / 32.0);
        let s = small_solve(&d, ProblemKind::Ibvp, &grid, &[0.002, 0.01, 0.05]);
        prop_assert_eq!(s.stats.range_violations, 0);
        for w in s.snapshots.windows(2) {
            for (a, b) in w[0].field.iter().zip(&w[1].field) {
                prop_assert!((0.0..=1.0).contains(a));
                prop_assert!(*a <= *b + 1e-12);
            }
        }
    }

    #[test]
    fn nested_domains_compare(r in 0.5f64..0.8, grow in 0.05f64..0.2) {
        let h = 1.0 / 32.0;
        let grid = square(1.0, h);
        let small = DomainSpec::ball(&[0.0, 0.0], r).unwrap();
        let large = DomainSpec::ball(&[0.0, 0.0], r + grow).unwrap();
        let times = [0.005, 0.02];
        let s1 = small_solve(&small, ProblemKind::Ibvp, &grid, &times);
        let s2 = small_solve(&large, ProblemKind::Ibvp, &grid, &times);
        for (a, b) in s1.snapshots.iter().zip(&s2.snapshots) {
            for i in 0..grid.node_count() {
                if small.contains(&grid.coord(i)) {
                    prop_assert!(b.field[i] <= a.field[i] + 5.0 * h);
                }
            }
        }
    }

    #[test]
    fn radial_moments_vanish(r in 0.5f64..1.0, frac in 0.2f64..0.9) {
        let d = DomainSpec::ball(&[0.0, 0.0], r).unwrap();
        let grid = square(r, 1.0 / 32.0);
        let s = small_solve(&d, ProblemKind::Ibvp, &grid, &[0.005, 0.02]);
        for t in [0.005, 0.02] {
            let m = moment_balance(&s, &[0.0, 0.0, 0.0], frac * r, t).unwrap();
            prop_assert!(m.iter().all(|v| v.abs() <= 1e-10), "{:?}", m);
        }
    }
}

#[test]
fn constants_agree_across_paths() {
    for n in [2, 3] {
        for p in [ProblemKind::Ibvp, ProblemKind::Cauchy] {
            let a = heat_constant(n, p).unwrap();
            let b = heat_constant_closed_form(n, p).unwrap();
            assert!((a - b).abs() < 1e-8, "N={n} {p:?}: {a} vs {b}");
        }
    }
}

#[test]
fn asymmetric_domain_breaks_moment_balance() {
    let d = DomainSpec::ellipse(&[0.0, 0.0], &[1.0, 0.7]).unwrap();
    let grid = square(1.0, 1.0 / 32.0);
    let s = small_solve(&d, ProblemKind::Ibvp, &grid, &[0.005, 0.02]);
    let x0 = [0.2, 0.1, 0.0];
    let worst = [0.005, 0.02]
        .iter()
        .flat_map(|&t| [0.2, 0.4].map(|r| moment_balance(&s, &x0, r, t).unwrap()))
        .flat_map(|m| m.into_iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst > 1e-6, "{worst}");
}
