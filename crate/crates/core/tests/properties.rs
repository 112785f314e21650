#![allow(clippy::needless_range_loop)]

use minvol_core::center::{solve_p, OuterConfig};
use minvol_core::gaussint::{
    check_in_cone, integral_exp, moment_vector, resolve_rule, QuadratureSpec,
};
use minvol_core::kkt::{build_certificate, weighted_power_sums};
use minvol_core::oracle::{mc_volume, mvee_symmetric};
use minvol_core::polycore::{enumerate_basis, min_on_sphere, Basis, HomogeneousPoly};
use minvol_core::semialg::{to_constraints, ConstraintSet, KDescription, Polynomial, Provenance};
use minvol_core::solver::{solve_p0, solve_p0_from, SolverConfig};
use proptest::prelude::*;

/// Power sum plus a perturbation small enough to stay well inside the cone.
fn in_cone_poly(n: usize, d: u32, noise: &[f64], scale: f64) -> HomogeneousPoly {
    let base = HomogeneousPoly::power_sum(n, d).unwrap();
    let l = base.coeffs().len();
    let bound = 0.5 / l as f64;
    let coeffs = base
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| scale * (c + bound * noise[i % noise.len()]))
        .collect();
    base.with_coeffs(coeffs).unwrap()
}

fn cloud(raw: &[f64], n: usize, symmetric: bool) -> ConstraintSet {
    let mut pts: Vec<Vec<f64>> = raw.chunks(n).map(|c| c.to_vec()).collect();
    if symmetric {
        let mirrored: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| -v).collect()).collect();
        pts.extend(mirrored);
    }
    ConstraintSet::new(pts, Provenance::Native).unwrap()
}

fn nontrivial(raw: &[f64]) -> bool {
    raw.chunks(2).all(|c| c[0].hypot(c[1]) > 0.2)
}

fn max_coeff_gap(a: &HomogeneousPoly, b: &HomogeneousPoly) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eval_is_homogeneous(
        n in 1usize..=4,
        half in 1u32..=3,
        noise in prop::collection::vec(-1.0f64..1.0, 8),
        x in prop::collection::vec(-2.0f64..2.0, 4),
        lambda in 0.1f64..3.0,
    ) {
        let d = 2 * half;
        let g = in_cone_poly(n, d, &noise, 1.0);
        let x = &x[..n];
        let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let expect = lambda.powi(d as i32) * g.eval(x).unwrap();
        prop_assert!((g.eval(&scaled).unwrap() - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
    }

    #[test]
    fn basis_is_a_bijection(n in 1usize..=4, half in 1u32..=4) {
        let basis = enumerate_basis(n, 2 * half).unwrap();
        for (i, alpha) in basis.indices().iter().enumerate() {
            prop_assert_eq!(basis.index_of(alpha), Some(i));
            prop_assert_eq!(basis.at(i), alpha);
            prop_assert_eq!(alpha.degree(), 2 * half);
        }
    }

    #[test]
    fn cone_is_closed_under_convex_combination(
        n in 2usize..=3,
        a in prop::collection::vec(-1.0f64..1.0, 8),
        b in prop::collection::vec(-1.0f64..1.0, 8),
        lambda in 0.0f64..1.0,
    ) {
        let g = in_cone_poly(n, 4, &a, 1.0);
        let h = in_cone_poly(n, 4, &b, 2.0);
        prop_assert!(min_on_sphere(&g, 512).0 > 0.0);
        prop_assert!(min_on_sphere(&h, 512).0 > 0.0);
        let mix = g.convex_combination(&h, lambda).unwrap();
        prop_assert!(min_on_sphere(&mix, 512).0 > 0.0);
    }

    #[test]
    fn integral_scaling_law(
        n in 2usize..=3,
        noise in prop::collection::vec(-1.0f64..1.0, 8),
        lambda in 0.2f64..5.0,
    ) {
        let g = in_cone_poly(n, 4, &noise, 1.0);
        let q = QuadratureSpec::for_dim(n);
        let base = integral_exp(&g, &q).unwrap();
        let scaled = integral_exp(&g.scaled(lambda), &q).unwrap();
        let expect = lambda.powf(-(n as f64) / 4.0) * base;
        prop_assert!((scaled - expect).abs() <= 1e-8 * expect);
    }

    #[test]
    fn euler_identity_and_even_moment_positivity(
        n in 2usize..=3,
        half in 1u32..=2,
        noise in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let d = 2 * half;
        let g = in_cone_poly(n, d, &noise, 1.0);
        let (mv, _) = moment_vector(&g, &QuadratureSpec::for_dim(n), true).unwrap();
        let expect = n as f64 / d as f64 * mv.y0;
        prop_assert!((mv.euler_sum(&g) - expect).abs() <= 1e-8 * mv.y0);
        for (alpha, y) in mv.basis_d().indices().iter().zip(&mv.moments_d) {
            if alpha.is_even() {
                prop_assert!(*y > 0.0);
            }
        }
    }

    #[test]
    fn hessian_depends_only_on_sum(noise in prop::collection::vec(-1.0f64..1.0, 8)) {
        let g = in_cone_poly(2, 4, &noise, 1.0);
        let (mv, _) = moment_vector(&g, &QuadratureSpec::for_dim(2), true).unwrap();
        let basis = mv.basis_d().clone();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                for k in 0..basis.len() {
                    for l in 0..basis.len() {
                        if basis.at(i).add(basis.at(j)) == basis.at(k).add(basis.at(l)) {
                            prop_assert_eq!(mv.hessian_entry(i, j), mv.hessian_entry(k, l));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn objective_is_convex(
        n in 2usize..=3,
        a in prop::collection::vec(-1.0f64..1.0, 8),
        b in prop::collection::vec(-1.0f64..1.0, 8),
        s in 0.3f64..3.0,
        lambda in 0.0f64..1.0,
    ) {
        let g = in_cone_poly(n, 4, &a, 1.0);
        let h = in_cone_poly(n, 4, &b, s);
        let mix = g.convex_combination(&h, lambda).unwrap();
        let q = QuadratureSpec::for_dim(n);
        let f = |p: &HomogeneousPoly| integral_exp(p, &q).unwrap();
        prop_assert!(f(&mix) <= lambda * f(&g) + (1.0 - lambda) * f(&h) + 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sampling_is_deterministic_and_inside(seed in 0u64..1000, r in 0.5f64..2.0) {
        let disk = Polynomial::from_keyed(2, [("0,0", r * r), ("2,0", -1.0), ("0,2", -1.0)]).unwrap();
        let k = KDescription::Semialgebraic {
            inequalities: vec![disk.clone()],
            bbox: vec![(-2.0, 2.0), (-2.0, 2.0)],
        };
        let a = to_constraints(&k, 300, seed).unwrap();
        let b = to_constraints(&k, 300, seed).unwrap();
        prop_assert_eq!(a.points(), b.points());
        prop_assert!(a.points().iter().all(|p| disk.eval(p) >= -1e-12));
    }

    #[test]
    fn more_points_never_lower_the_objective(
        raw in prop::collection::vec(-1.0f64..1.0, 16).prop_filter("spread", |v| nontrivial(v)),
    ) {
        let small = cloud(&raw[..8], 2, false);
        let large = cloud(&raw, 2, false);
        let cfg = SolverConfig::default();
        let rs = solve_p0(&small, 4, &cfg);
        let rl = solve_p0(&large, 4, &cfg);
        if let (Ok(rs), Ok(rl)) = (rs, rl) {
            prop_assert!(rl.objective >= rs.objective * (1.0 - 1e-9));
        }
    }

    #[test]
    fn problem_scales_homogeneously(
        raw in prop::collection::vec(-1.0f64..1.0, 8).prop_filter("spread", |v| nontrivial(v)),
        c in 0.3f64..3.0,
    ) {
        let base = cloud(&raw, 2, true);
        let scaled_pts: Vec<Vec<f64>> = base.points().iter().map(|p| p.iter().map(|v| c * v).collect()).collect();
        let scaled = ConstraintSet::new(scaled_pts, Provenance::Native).unwrap();
        let cfg = SolverConfig::default();
        let r0 = solve_p0(&base, 4, &cfg).unwrap();
        let r1 = solve_p0(&scaled, 4, &cfg).unwrap();
        let expect = r0.g_star.scaled(c.powi(-4));
        prop_assert!(max_coeff_gap(&r1.g_star, &expect) <= 1e-6 * expect.max_abs_coeff());
        prop_assert!((r1.volume - c * c * r0.volume).abs() <= 1e-6 * r1.volume);
    }

    #[test]
    fn optimum_is_unique(
        raw in prop::collection::vec(-1.0f64..1.0, 10).prop_filter("spread", |v| nontrivial(v)),
        noise in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let cs = cloud(&raw, 2, true);
        let cfg = SolverConfig::default();
        let r0 = solve_p0(&cs, 4, &cfg).unwrap();
        let other = in_cone_poly(2, 4, &noise, 1.0);
        let smax = cs.points().iter().map(|p| other.eval(p).unwrap()).fold(0.0, f64::max);
        let start = other.scaled(0.5 / smax);
        let r1 = solve_p0_from(&cs, 4, &cfg, &start).unwrap();
        let scale = r0.g_star.max_abs_coeff();
        prop_assert!(max_coeff_gap(&r0.g_star, &r1.g_star) <= 10.0 * cfg.kkt_tolerance * scale);
    }

    #[test]
    fn optimum_certificate_holds(
        raw in prop::collection::vec(-1.0f64..1.0, 12).prop_filter("spread", |v| nontrivial(v)),
        directions in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 20),
    ) {
        let cs = cloud(&raw, 2, false);
        let cfg = SolverConfig::default();
        let r = solve_p0(&cs, 4, &cfg).unwrap();
        let g = &r.g_star;
        let y0 = r.objective;

        // mass identity
        let mass: f64 = r.dual_weights.iter().sum();
        prop_assert!((mass - 0.5 * y0).abs() <= 1e-6 * y0);

        // certificate round trip, atom bound, level set, moment matrix form
        let cert = build_certificate(&r, &cs).unwrap();
        prop_assert!(cert.contacts.len() <= cert.atom_bound);
        prop_assert!(cert.level_residual <= 1e-6);
        let rule = r.rule().unwrap();
        let mv = rule.moments(g, false).unwrap();
        let sums = weighted_power_sums(&cert.contacts, g.basis());
        for (a, b) in sums.iter().zip(&mv.moments_d) {
            prop_assert!((a - b).abs() <= 1e-6 * y0);
        }
        let half = Basis::homogeneous(2, 2);
        for beta in half.indices() {
            for gamma in half.indices() {
                let alpha = beta.add(gamma);
                let lhs: f64 = cert.contacts.iter().map(|c| c.weight * alpha.eval(&c.point)).sum();
                prop_assert!((lhs - mv.moment_d(&alpha).unwrap()).abs() <= 1e-6 * y0);
            }
        }

        // no feasible in-cone perturbation improves the objective
        for dir in &directions {
            let trial: Vec<f64> = g.coeffs().iter().zip(dir).map(|(c, d)| c + 1e-3 * d).collect();
            let trial = g.with_coeffs(trial).unwrap();
            let smax = cs.points().iter().map(|p| trial.eval(p).unwrap()).fold(0.0, f64::max);
            let trial = if smax > 1.0 { trial.scaled(1.0 / smax) } else { trial };
            if check_in_cone(&trial).is_ok() {
                prop_assert!(rule.integral_exp(&trial).unwrap() >= y0 * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn ellipsoid_case_matches_oracle(
        n in 2usize..=3,
        raw in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let pts: Vec<Vec<f64>> = raw.chunks(n).filter(|c| c.len() == n).map(|c| c.to_vec()).collect();
        let cs = cloud(&pts.concat(), n, true);
        let oracle = mvee_symmetric(cs.points(), 1e-9).unwrap();
        let r = solve_p0(&cs, 2, &SolverConfig::default()).unwrap();
        prop_assert!((r.volume - oracle.volume).abs() <= 1e-4 * oracle.volume);
    }

    #[test]
    fn mc_volume_scales_like_power_law(y in 0.3f64..3.0, seed in 0u64..1000) {
        let g = HomogeneousPoly::power_sum(2, 4).unwrap();
        let one = mc_volume(&g, &[0.0, 0.0], 1.0, 100_000, seed).unwrap();
        let at_y = mc_volume(&g, &[0.0, 0.0], y, 100_000, seed + 1).unwrap();
        let expect = y.sqrt() * one.estimate;
        let se = (at_y.std_error.powi(2) + (y.sqrt() * one.std_error).powi(2)).sqrt();
        prop_assert!((at_y.estimate - expect).abs() <= 3.0 * se + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn center_is_translation_covariant(
        raw in prop::collection::vec(-1.0f64..1.0, 16).prop_filter("spread", |v| nontrivial(v)),
        shift in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let cs = cloud(&raw, 2, false);
        let moved: Vec<Vec<f64>> = cs.points().iter().map(|p| vec![p[0] + shift[0], p[1] + shift[1]]).collect();
        let moved = ConstraintSet::new(moved, Provenance::Native).unwrap();
        let cfg = SolverConfig::default();
        let outer = OuterConfig::default();
        let r0 = solve_p(&cs, 2, &cfg, &outer).unwrap();
        let r1 = solve_p(&moved, 2, &cfg, &outer).unwrap();
        prop_assert!((r1.volume - r0.volume).abs() <= 1e-6 * r0.volume);
        for k in 0..2 {
            prop_assert!((r1.a_star[k] - r0.a_star[k] - shift[k]).abs() <= 1e-4);
        }
    }
}

#[test]
fn objective_blows_up_toward_cone_boundary() {
    // x²y² + s(x⁴ + y⁴) loses positivity on the axes as s → 0
    let q = QuadratureSpec::for_dim(2);
    let mut values = Vec::new();
    for s in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let g = HomogeneousPoly::from_terms(2, 4, &[(&[4, 0], s), (&[2, 2], 1.0), (&[0, 4], s)])
            .unwrap();
        let (rule, _) = resolve_rule(&g, &q).unwrap();
        let f = rule.integral_exp(&g).unwrap();
        values.push(f);
    }
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    assert!(values[5] > 3.0 * values[0], "{values:?}");
    let boundary = HomogeneousPoly::from_terms(2, 4, &[(&[2, 2], 1.0)]).unwrap();
    assert!(check_in_cone(&boundary).is_err());
    assert!(integral_exp(&boundary, &q).is_err());
}
