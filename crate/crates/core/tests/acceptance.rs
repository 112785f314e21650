//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Expected values come from oracles defined here (composite Simpson rules,
//! finite differences, the ellipsoid oracle, Monte-Carlo), never from the
//! code under test.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use minvol_core::center::{solve_p, OuterConfig};
use minvol_core::gaussint::{
    crosscheck_levelset_moment, moment_vector, resolve_rule, volume_sublevel, QuadratureSpec,
};
use minvol_core::kkt::{build_certificate, weighted_power_sums, KktCertificate};
use minvol_core::oracle::{mc_volume, mvee_symmetric};
use minvol_core::polycore::{binomial, HomogeneousPoly};
use minvol_core::semialg::{ConstraintSet, Provenance};
use minvol_core::solver::{solve_p0, solve_p0_from, SolveReport, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// `∫_ℝ t^k exp(-t^d) dt` by composite Simpson on [-L, L].
fn simpson_1d(k: i32, d: i32) -> f64 {
    let (a, b, m) = (-8.0f64, 8.0f64, 400_000usize);
    let h = (b - a) / m as f64;
    let f = |t: f64| t.powi(k) * (-t.powi(d)).exp();
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    s * h / 3.0
}

fn random_in_cone(rng: &mut ChaCha8Rng, n: usize, d: u32) -> HomogeneousPoly {
    let base = HomogeneousPoly::power_sum(n, d).unwrap();
    let l = base.coeffs().len();
    let coeffs = base
        .coeffs()
        .iter()
        .map(|c| c + rng.random_range(-0.5..0.5) / l as f64)
        .collect();
    base.with_coeffs(coeffs).unwrap()
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, count: usize, symmetric: bool) -> ConstraintSet {
    let mut pts = Vec::new();
    while pts.len() < count {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if p.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.2 {
            continue;
        }
        if symmetric {
            pts.push(p.iter().map(|v| -v).collect());
        }
        pts.push(p);
    }
    ConstraintSet::new(pts, Provenance::Native).unwrap()
}

fn certificate_ok(report: &SolveReport, cs: &ConstraintSet) -> Result<KktCertificate, String> {
    let cert = build_certificate(report, cs).map_err(|e| e.to_string())?;
    let y0 = report.objective;
    let n = report.g_star.n();
    let d = report.g_star.degree() as usize;
    check(
        cert.moment_residual <= 1e-6,
        format!("moment residual {:.2e}", cert.moment_residual),
    )?;
    check(
        (cert.mass - n as f64 / d as f64 * y0).abs() <= 1e-6 * y0,
        format!("mass {} vs {}", cert.mass, n as f64 / d as f64 * y0),
    )?;
    check(
        cert.level_residual <= 1e-6,
        format!("level residual {:.2e}", cert.level_residual),
    )?;
    check(
        cert.contacts.len() <= binomial(n + d - 1, d),
        format!("{} atoms > bound", cert.contacts.len()),
    )?;
    Ok(cert)
}

fn volume_formula() -> Outcome {
    let q = QuadratureSpec::for_dim(2);
    let disk = HomogeneousPoly::power_sum(2, 2).unwrap();
    let quartic = HomogeneousPoly::power_sum(2, 4).unwrap();
    let v_disk = volume_sublevel(&disk, 1.0, &q).map_err(|e| e.to_string())?;
    check((v_disk - PI).abs() <= 1e-9, format!("disk volume {v_disk}"))?;

    // ∫ exp(-x⁴-y⁴) = (∫ e^{-t⁴})², volume = that / Γ(3/2)
    let oracle = simpson_1d(0, 4).powi(2) / (PI.sqrt() / 2.0);
    check((oracle - 3.70815).abs() <= 1e-5, format!("oracle {oracle}"))?;
    let v_quartic = volume_sublevel(&quartic, 1.0, &q).map_err(|e| e.to_string())?;
    check(
        (v_quartic - oracle).abs() <= 1e-6,
        format!("quartic volume {v_quartic} vs {oracle}"),
    )?;

    let mc = mc_volume(&quartic, &[0.0, 0.0], 1.0, 1_000_000, 11).map_err(|e| e.to_string())?;
    check(
        (mc.estimate - v_quartic).abs() <= 3.0 * mc.std_error,
        format!("MC {} ± {} vs {v_quartic}", mc.estimate, mc.std_error),
    )?;
    let mc = mc_volume(&disk, &[0.0, 0.0], 1.0, 1_000_000, 12).map_err(|e| e.to_string())?;
    check(
        (mc.estimate - PI).abs() <= 3.0 * mc.std_error,
        format!("MC {} ± {} vs π", mc.estimate, mc.std_error),
    )?;
    Ok(format!("disk {v_disk:.12}, quartic {v_quartic:.9}"))
}

fn random_gs() -> Vec<HomogeneousPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..10)
        .map(|i| random_in_cone(&mut rng, 2, [2, 4, 6][i % 3]))
        .collect()
}

fn derivatives() -> Outcome {
    let mut worst: f64 = 0.0;
    for g in random_gs() {
        let (rule, _) = resolve_rule(&g, &QuadratureSpec::for_dim(2)).map_err(|e| e.to_string())?;
        let at = |c: &[f64]| {
            rule.moments(&g.with_coeffs(c.to_vec()).unwrap(), false)
                .unwrap()
        };
        let mv = rule.moments(&g, true).map_err(|e| e.to_string())?;
        let hess = mv.hessian().unwrap();
        let l = g.coeffs().len();
        let eps = 1e-5;
        let gscale = mv.moments_d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let hscale = hess.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..l {
            let mut cp = g.coeffs().to_vec();
            let mut cm = g.coeffs().to_vec();
            cp[k] += eps;
            cm[k] -= eps;
            let (p, m) = (at(&cp), at(&cm));
            let fd_grad = (p.y0 - m.y0) / (2.0 * eps);
            let rel = (fd_grad + mv.moments_d[k]).abs() / gscale;
            worst = worst.max(rel);
            // Hessian column k: derivative of -y_d
            for j in 0..l {
                let fd = -(p.moments_d[j] - m.moments_d[j]) / (2.0 * eps);
                worst = worst.max((fd - hess[j][k]).abs() / hscale);
            }
        }
    }
    check(worst <= 1e-5, format!("worst relative error {worst:.2e}"))?;
    Ok(format!("worst relative FD error {worst:.2e}"))
}

fn euler() -> Outcome {
    let mut worst: f64 = 0.0;
    for g in random_gs() {
        let (mv, _) =
            moment_vector(&g, &QuadratureSpec::for_dim(2), false).map_err(|e| e.to_string())?;
        let expect = 2.0 / g.degree() as f64 * mv.y0;
        worst = worst.max((mv.euler_sum(&g) - expect).abs() / mv.y0);
    }
    check(worst <= 1e-8, format!("worst {worst:.2e}"))?;
    Ok(format!("worst scaled gap {worst:.2e}"))
}

fn ellipsoid_oracle(certs: &mut Vec<(SolveReport, ConstraintSet)>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_vol, mut worst_q): (f64, f64) = (0.0, 0.0);
    for i in 0..20 {
        let n = 2 + i % 2;
        let cs = random_cloud(&mut rng, n, 12, true);
        let oracle = mvee_symmetric(cs.points(), 1e-9).map_err(|e| e.to_string())?;
        let r = solve_p0(&cs, 2, &SolverConfig::default()).map_err(|e| e.to_string())?;
        worst_vol = worst_vol.max((r.volume - oracle.volume).abs() / oracle.volume);
        let q = oracle.as_poly();
        for (a, b) in r.g_star.coeffs().iter().zip(q.coeffs()) {
            worst_q = worst_q.max((a - b).abs());
        }
        certs.push((r, cs));
    }
    check(worst_vol <= 1e-4, format!("volume gap {worst_vol:.2e}"))?;
    check(worst_q <= 1e-3, format!("shape gap {worst_q:.2e}"))?;
    Ok(format!(
        "volume gap {worst_vol:.2e}, shape gap {worst_q:.2e}"
    ))
}

fn uniqueness(certs: &mut Vec<(SolveReport, ConstraintSet)>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let cs = random_cloud(&mut rng, 2, 16, i % 2 == 0);
        let r0 = solve_p0(&cs, 4, &cfg).map_err(|e| e.to_string())?;
        let other = random_in_cone(&mut rng, 2, 4);
        let smax = cs
            .points()
            .iter()
            .map(|p| other.eval(p).unwrap())
            .fold(0.0, f64::max);
        let start = other.scaled(rng.random_range(0.2..0.9) / smax);
        let r1 = solve_p0_from(&cs, 4, &cfg, &start).map_err(|e| e.to_string())?;
        let scale = r0.g_star.max_abs_coeff();
        for (a, b) in r0.g_star.coeffs().iter().zip(r1.g_star.coeffs()) {
            worst = worst.max((a - b).abs() / scale);
        }
        certs.push((r0, cs));
    }
    check(
        worst <= 10.0 * cfg.kkt_tolerance,
        format!("worst scaled gap {worst:.2e}"),
    )?;
    Ok(format!("worst scaled coefficient gap {worst:.2e}"))
}

fn nonconvex_example(certs: &mut Vec<(SolveReport, ConstraintSet)>) -> Outcome {
    let gen = HomogeneousPoly::from_terms(2, 4, &[(&[4, 0], 0.1), (&[2, 2], 1.0), (&[0, 4], 0.1)])
        .unwrap();
    let pts: Vec<Vec<f64>> = (0..2000)
        .map(|k| {
            let th = 2.0 * PI * (k as f64 + 0.5) / 2000.0;
            let u = [th.cos(), th.sin()];
            let r = gen.eval(&u).unwrap().powf(-0.25);
            vec![r * u[0], r * u[1]]
        })
        .collect();
    let cs = ConstraintSet::new(pts, Provenance::Native).unwrap();
    let r = solve_p0(&cs, 4, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let coeff_gap = r
        .g_star
        .coeffs()
        .iter()
        .zip(gen.coeffs())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let (rule, _) = resolve_rule(&gen, &QuadratureSpec::for_dim(2)).map_err(|e| e.to_string())?;
    let gen_obj = rule.integral_exp(&gen).map_err(|e| e.to_string())?;
    let obj_gap = (r.objective - gen_obj).abs() / gen_obj;
    certs.push((r, cs));
    check(
        coeff_gap <= 1e-3,
        format!("coefficient gap {coeff_gap:.2e}"),
    )?;
    check(obj_gap <= 1e-5, format!("objective gap {obj_gap:.2e}"))?;
    Ok(format!(
        "coefficient gap {coeff_gap:.2e}, objective gap {obj_gap:.2e}"
    ))
}

fn center_mode() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = SolverConfig::default();
    let outer = OuterConfig::default();
    let (mut worst_a, mut worst_v): (f64, f64) = (0.0, 0.0);
    for i in 0..10 {
        let d = if i % 2 == 0 { 2 } else { 4 };
        let offset = [rng.random_range(0.2..0.6), rng.random_range(-0.6..-0.2)];
        let mut cs = random_cloud(&mut rng, 2, 10, false);
        cs = cs.translated(&[-offset[0], -offset[1]]);
        let shift = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let moved = cs.translated(&[-shift[0], -shift[1]]);
        let p = solve_p(&cs, d, &cfg, &outer).map_err(|e| e.to_string())?;
        let q = solve_p(&moved, d, &cfg, &outer).map_err(|e| e.to_string())?;
        let p0 = solve_p0(&cs, d, &cfg).map_err(|e| e.to_string())?;
        check(
            p.volume <= p0.volume * (1.0 + 1e-12),
            format!(
                "cloud {i}: volume(P) {} > volume(P0) {}",
                p.volume, p0.volume
            ),
        )?;
        for k in 0..2 {
            worst_a = worst_a.max((q.a_star[k] - p.a_star[k] - shift[k]).abs());
        }
        worst_v = worst_v.max((q.volume - p.volume).abs() / p.volume);
    }
    check(worst_a <= 1e-4, format!("center shift error {worst_a:.2e}"))?;
    check(worst_v <= 1e-6, format!("volume change {worst_v:.2e}"))?;
    Ok(format!(
        "center shift error {worst_a:.2e}, volume change {worst_v:.2e}"
    ))
}

fn dball(certs: &mut Vec<(SolveReport, ConstraintSet)>) -> Outcome {
    let c = 2f64.powf(-0.25);
    let pts = vec![
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.0, -1.0],
        vec![c, c],
        vec![-c, c],
        vec![c, -c],
        vec![-c, -c],
    ];
    let cs = ConstraintSet::new(pts, Provenance::Native).unwrap();
    let r = solve_p0(&cs, 4, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let ball = HomogeneousPoly::power_sum(2, 4).unwrap();
    let off = r
        .g_star
        .coeffs()
        .iter()
        .zip(ball.coeffs())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    check(off <= 1e-6, format!("optimum is not x⁴+y⁴ (gap {off:.2e})"))?;
    let cert = build_certificate(&r, &cs).map_err(|e| e.to_string())?;
    let sums = weighted_power_sums(&cert.contacts, r.g_star.basis());
    let (mut even_gap, mut odd_gap): (f64, f64) = (0.0, 0.0);
    for (alpha, s) in r.g_star.basis().indices().iter().zip(sums) {
        let e = alpha.exponents();
        if alpha.is_even() {
            let target = simpson_1d(e[0] as i32, 4) * simpson_1d(e[1] as i32, 4);
            even_gap = even_gap.max((s - target).abs());
        } else {
            odd_gap = odd_gap.max(s.abs());
        }
    }
    certs.push((r, cs));
    check(
        even_gap <= 1e-5,
        format!("even power-sum gap {even_gap:.2e}"),
    )?;
    check(odd_gap <= 1e-9, format!("odd power sum {odd_gap:.2e}"))?;
    Ok(format!("even gap {even_gap:.2e}, odd {odd_gap:.2e}"))
}

fn levelset_identity() -> Outcome {
    let q = QuadratureSpec::for_dim(2);
    let mut worst: f64 = 0.0;
    let mut seed = 100;
    for d in [2u32, 4] {
        let g = HomogeneousPoly::power_sum(2, d).unwrap();
        let mut alphas = vec![minvol_core::polycore::MultiIndex::zero(2)];
        alphas.extend(g.basis().indices().iter().cloned());
        for alpha in alphas {
            seed += 1;
            let c = crosscheck_levelset_moment(&g, &alpha, &q, 400_000, seed)
                .map_err(|e| e.to_string())?;
            let z = if c.std_error > 0.0 {
                (c.lhs - c.rhs).abs() / c.std_error
            } else {
                0.0
            };
            worst = worst.max(z);
            check(
                c.agree && (c.lhs - c.rhs).abs() <= 4.0 * c.std_error.max(1e-12),
                format!("d={d} α={alpha}: {} vs {} ± {}", c.lhs, c.rhs, c.std_error),
            )?;
        }
    }
    Ok(format!("worst deviation {worst:.2} standard errors"))
}

fn run(
    id: usize,
    name: &str,
    budget: Option<Duration>,
    f: impl FnOnce() -> Outcome,
    failures: &mut usize,
) {
    let start = Instant::now();
    let mut outcome = f();
    let elapsed = start.elapsed();
    if let (Ok(_), Some(b)) = (&outcome, budget) {
        if elapsed > b {
            outcome = Err(format!("took {elapsed:.1?}, budget {b:?}"));
        }
    }
    match outcome {
        Ok(msg) => println!("criterion {id:>2} PASS  {name}: {msg} [{elapsed:.2?}]"),
        Err(msg) => {
            *failures += 1;
            println!("criterion {id:>2} FAIL  {name}: {msg} [{elapsed:.2?}]");
        }
    }
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut solved = Vec::new();
    let secs = Duration::from_secs;
    run(
        1,
        "volume formula",
        Some(secs(5)),
        volume_formula,
        &mut failures,
    );
    run(
        2,
        "gradient and Hessian",
        Some(secs(30)),
        derivatives,
        &mut failures,
    );
    run(3, "Euler identity", None, euler, &mut failures);
    run(
        4,
        "d=2 ellipsoid oracle",
        Some(secs(120)),
        || ellipsoid_oracle(&mut solved),
        &mut failures,
    );
    run(
        6,
        "uniqueness",
        None,
        || uniqueness(&mut solved),
        &mut failures,
    );
    run(
        7,
        "non-convex example",
        Some(secs(120)),
        || nonconvex_example(&mut solved),
        &mut failures,
    );
    run(8, "center mode", None, center_mode, &mut failures);
    run(
        9,
        "d-ball contacts",
        None,
        || dball(&mut solved),
        &mut failures,
    );
    run(
        5,
        "KKT certificate",
        None,
        || {
            for (i, (r, cs)) in solved.iter().enumerate() {
                certificate_ok(r, cs).map_err(|e| format!("solve {i}: {e}"))?;
            }
            Ok(format!("{} converged solves certified", solved.len()))
        },
        &mut failures,
    );
    run(
        10,
        "level-set moment identity",
        None,
        levelset_identity,
        &mut failures,
    );
    if failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria fail");
        ExitCode::FAILURE
    }
}
