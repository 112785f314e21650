//! Joint search over the center `a` and the polynomial `g`: minimize the
//! volume of `{x : g(x - a) ≤ 1}` containing `K`.
//!
//! For fixed `a` the problem is the centered one on `K - a`, with optimal
//! value `ρ_a`. The map `a ↦ ρ_a` is continuous but not convex in general,
//! so it is searched by Nelder-Mead from the centroid, which finds a local
//! minimizer. The origin is always evaluated as well.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polycore::HomogeneousPoly;
use crate::semialg::ConstraintSet;
use crate::solver::{solve_p0, solve_p0_from, SolveReport, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuterConfig {
    /// Initial simplex edge as a fraction of the bounding radius.
    pub simplex_scale: f64,
    /// Stop when the simplex diameter falls below this fraction of the
    /// bounding radius.
    pub diameter_tol: f64,
    pub max_iterations: usize,
    /// Start inner solves from the best polynomial found so far.
    pub warm_start: bool,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            simplex_scale: 0.25,
            diameter_tol: 1e-5,
            max_iterations: 100,
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CenteredSolveReport {
    pub a_star: Vec<f64>,
    /// Solve on `K - a*`.
    pub inner: SolveReport,
    pub volume: f64,
    pub outer_iterations: usize,
    /// Distinct centers at which the inner problem was solved.
    pub evaluations: usize,
}

/// `ρ_a`: optimal value of the centered problem on `K - a`.
pub fn rho_of_a(a: &[f64], cs: &ConstraintSet, d: u32, cfg: &SolverConfig) -> Result<f64> {
    if a.len() != cs.n() {
        return Err(Error::InvalidArgument(format!(
            "center has {} coordinates, expected {}",
            a.len(),
            cs.n()
        )));
    }
    Ok(solve_p0(&cs.translated(a), d, cfg)?.objective)
}

/// Memoized `ρ_a` keyed by the bit pattern of `a`.
struct RhoCache<'a> {
    cs: &'a ConstraintSet,
    d: u32,
    cfg: &'a SolverConfig,
    warm_start: bool,
    seen: HashMap<Vec<u64>, Option<SolveReport>>,
    best: Option<(f64, HomogeneousPoly)>,
    last_error: Option<Error>,
}

impl<'a> RhoCache<'a> {
    fn new(cs: &'a ConstraintSet, d: u32, cfg: &'a SolverConfig, warm_start: bool) -> Self {
        RhoCache {
            cs,
            d,
            cfg,
            warm_start,
            seen: HashMap::new(),
            best: None,
            last_error: None,
        }
    }

    fn solve(&mut self, a: &[f64]) -> Result<SolveReport> {
        let shifted = self.cs.translated(a);
        if self.warm_start {
            if let Some((_, g)) = &self.best {
                let smax = shifted
                    .points()
                    .iter()
                    .map(|p| g.eval_unchecked(p))
                    .fold(0.0, f64::max);
                if smax > 0.0 {
                    let start = g.scaled(1.0 / (smax * (1.0 + self.cfg.initial_margin)));
                    if let Ok(r) = solve_p0_from(&shifted, self.d, self.cfg, &start) {
                        return Ok(r);
                    }
                }
            }
        }
        solve_p0(&shifted, self.d, self.cfg)
    }

    /// `ρ_a`, or `+∞` where the inner problem fails.
    fn value(&mut self, a: &[f64]) -> Result<f64> {
        let key: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.seen.get(&key) {
            return Ok(hit.as_ref().map_or(f64::INFINITY, |r| r.objective));
        }
        let report = match self.solve(a) {
            Ok(r) => Some(r),
            Err(e @ (Error::InvalidArgument(_) | Error::Unsupported(_))) => return Err(e),
            Err(e) => {
                self.last_error = Some(e);
                None
            }
        };
        let value = report.as_ref().map_or(f64::INFINITY, |r| r.objective);
        if let Some(r) = &report {
            if self.best.as_ref().is_none_or(|(v, _)| r.objective < *v) {
                self.best = Some((r.objective, r.g_star.clone()));
            }
        }
        self.seen.insert(key, report);
        Ok(value)
    }

    fn report(&self, a: &[f64]) -> Option<&SolveReport> {
        let key: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        self.seen.get(&key).and_then(|r| r.as_ref())
    }
}

/// Minimize the sublevel-set volume jointly over the center and `g`.
pub fn solve_p(
    cs: &ConstraintSet,
    d: u32,
    cfg: &SolverConfig,
    outer: &OuterConfig,
) -> Result<CenteredSolveReport> {
    if !(outer.simplex_scale > 0.0) || !(outer.diameter_tol > 0.0) || outer.max_iterations == 0 {
        return Err(Error::InvalidArgument(
            "invalid outer search configuration".into(),
        ));
    }
    cfg.validate(cs.n())?;
    let n = cs.n();
    let centroid = cs.centroid();
    let radius = cs
        .points()
        .iter()
        .map(|p| dist(p, &centroid))
        .fold(0.0, f64::max);
    if !(radius > 0.0) {
        return Err(Error::Degenerate("constraint points coincide".into()));
    }

    let mut rho = RhoCache::new(cs, d, cfg, outer.warm_start);
    let mut simplex: Vec<Vec<f64>> = vec![centroid.clone()];
    for k in 0..n {
        let mut v = centroid.clone();
        v[k] += outer.simplex_scale * radius;
        simplex.push(v);
    }
    let mut values = Vec::with_capacity(n + 1);
    for v in &simplex {
        values.push(rho.value(v)?);
    }

    let mut iterations = 0;
    while iterations < outer.max_iterations {
        order(&mut simplex, &mut values);
        let diameter = simplex
            .iter()
            .flat_map(|p| simplex.iter().map(move |q| dist(p, q)))
            .fold(0.0, f64::max);
        if diameter < outer.diameter_tol * radius {
            break;
        }
        iterations += 1;

        let worst = n;
        let mean: Vec<f64> = (0..n)
            .map(|k| simplex[..worst].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            mean.iter()
                .zip(&simplex[worst])
                .map(|(m, w)| m + t * (m - w))
                .collect()
        };

        let reflected = along(1.0);
        let fr = rho.value(&reflected)?;
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = rho.value(&expanded)?;
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[worst - 1] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[worst] {
            let c = along(0.5);
            let f = rho.value(&c)?;
            (c, f)
        } else {
            let c = along(-0.5);
            let f = rho.value(&c)?;
            (c, f)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, p)| b + 0.5 * (p - b))
                .collect();
            values[i] = rho.value(&shrunk)?;
            simplex[i] = shrunk;
        }
    }
    order(&mut simplex, &mut values);

    let origin = vec![0.0; n];
    let at_origin = rho.value(&origin)?;
    let a_star = if at_origin <= values[0] {
        origin
    } else {
        simplex[0].clone()
    };
    let Some(inner) = rho.report(&a_star).cloned() else {
        return Err(match rho.last_error.take() {
            Some(Error::Infeasible(m) | Error::Degenerate(m)) => Error::Degenerate(m),
            Some(e) => e,
            None => Error::Degenerate("inner problem failed at every probed center".into()),
        });
    };
    Ok(CenteredSolveReport {
        volume: inner.volume,
        a_star,
        inner,
        outer_iterations: iterations,
        evaluations: rho.seen.len(),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Sort vertices by value; ties keep their current order.
fn order(simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
    *values = idx.iter().map(|&i| values[i]).collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semialg::Provenance;
    use std::f64::consts::PI;

    fn cs(points: &[[f64; 2]]) -> ConstraintSet {
        ConstraintSet::new(
            points.iter().map(|p| p.to_vec()).collect(),
            Provenance::Native,
        )
        .unwrap()
    }

    #[test]
    fn shifted_square() {
        let square = cs(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]);
        let r = solve_p(
            &square,
            2,
            &SolverConfig::default(),
            &OuterConfig::default(),
        )
        .unwrap();
        assert!(
            (r.a_star[0] - 1.0).abs() < 1e-4 && (r.a_star[1] - 1.0).abs() < 1e-4,
            "{:?}",
            r.a_star
        );
        assert!((r.volume - 2.0 * PI).abs() < 1e-6);
        let expect = [0.5, 0.0, 0.5];
        for (a, b) in r.inner.g_star.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn rho_translation_invariance() {
        let square = cs(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]);
        let centered = cs(&[[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]]);
        let cfg = SolverConfig::default();
        let shifted = rho_of_a(&[1.0, 1.0], &square, 2, &cfg).unwrap();
        let direct = rho_of_a(&[0.0, 0.0], &centered, 2, &cfg).unwrap();
        assert!((shifted - direct).abs() < 1e-10);
        assert!((direct - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn rho_is_continuous() {
        let pts = cs(&[
            [1.0, 0.2],
            [-0.7, 0.9],
            [-0.4, -1.1],
            [0.8, -0.6],
            [0.1, 1.3],
        ]);
        let cfg = SolverConfig::default();
        let a = [0.05, -0.02];
        let base = rho_of_a(&a, &pts, 4, &cfg).unwrap();
        let near = rho_of_a(&[a[0] + 1e-4, a[1]], &pts, 4, &cfg).unwrap();
        assert!((base - near).abs() < 1e-2 * base);
    }

    #[test]
    fn symmetric_cloud_stays_at_origin() {
        let pts = cs(&[
            [1.0, 0.3],
            [-1.0, -0.3],
            [0.2, 1.0],
            [-0.2, -1.0],
            [0.7, -0.7],
            [-0.7, 0.7],
        ]);
        let r = solve_p(&pts, 2, &SolverConfig::default(), &OuterConfig::default()).unwrap();
        assert!(r.a_star.iter().all(|v| v.abs() < 1e-4), "{:?}", r.a_star);
    }

    #[test]
    fn never_worse_than_origin() {
        let pts = cs(&[
            [1.0, 0.0],
            [0.0, 1.0],
            [-0.3, -0.2],
            [0.9, 0.8],
            [1.4, 0.3],
            [0.2, -0.5],
            [-0.4, 0.6],
            [0.6, 1.3],
        ]);
        let cfg = SolverConfig::default();
        let r = solve_p(&pts, 4, &cfg, &OuterConfig::default()).unwrap();
        let p0 = solve_p0(&pts, 4, &cfg).unwrap();
        assert!(r.volume <= p0.volume + 1e-9);
    }

    #[test]
    fn bad_outer_config_rejected() {
        let pts = cs(&[[1.0, 0.0], [0.0, 1.0]]);
        let outer = OuterConfig {
            max_iterations: 0,
            ..OuterConfig::default()
        };
        assert!(matches!(
            solve_p(&pts, 2, &SolverConfig::default(), &outer),
            Err(Error::InvalidArgument(_))
        ));
    }
}
