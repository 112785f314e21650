//! Minimize `h(g) = ∫ exp(-g)` over homogeneous `g` of degree `d` subject to
//! `g(xᵢ) ≤ 1` on the constraint points.
//!
//! `h` is strictly convex, its gradient is `-y_α` and its Hessian is
//! `y_{α+β}` (moments of `exp(-g)`), and it blows up at the boundary of the
//! cone of admissible `g`, so it acts as its own barrier there. The point
//! constraints are linear in the coefficients and get a log barrier:
//!
//! ```text
//! minimize  t·h(g) - Σᵢ log(1 - g(xᵢ))
//! ```
//!
//! solved by damped Newton for an increasing sequence of `t`. The last
//! central point is then polished by Newton on the equality-constrained
//! problem over the identified contact points, which recovers the optimum
//! and its multipliers to near machine precision.
//!
//! The constant `Γ(1+n/d)` relating `h` to the volume is dropped from the
//! objective and applied when reporting the volume.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gaussint::{
    check_in_cone, resolve_rule, MomentVector, QuadDiagnostics, QuadratureSpec, SphereRule,
    POSITIVITY_FLOOR,
};
use crate::linalg::{independent_rows, nnls};
use crate::oracle::spans_space;
use crate::polycore::{validate_dims, Basis, HomogeneousPoly};
use crate::semialg::ConstraintSet;

/// Barrier stages give up past this many multiplications of `t`.
const MAX_BARRIER_STAGES: usize = 60;
/// Coefficient growth (relative to the initial point) treated as divergence.
const DIVERGENCE_RATIO: f64 = 1e10;
/// A central point whose smallest node value is within this factor of the
/// positivity floor is escaping the cone along a recession direction.
const FLOOR_PROXIMITY: f64 = 10.0;
/// Quadrature re-resolutions at the optimum before giving up.
const MAX_QUADRATURE_PASSES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Target for the scaled KKT residual.
    pub kkt_tolerance: f64,
    /// Newton iteration cap per barrier stage.
    pub max_newton_iters: usize,
    /// Initial barrier weight, as a multiple of `m / h(g₀)`.
    pub initial_t: f64,
    /// Factor applied to `t` between stages.
    pub t_multiplier: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step shrink ratio in backtracking.
    pub backtrack: f64,
    /// Points with `g(xᵢ) ≥ 1 - activity_tol` count as contacts.
    pub activity_tol: f64,
    /// Slack `ε` of the initial point `Σxᵢ^d / ((1+ε) max)`.
    pub initial_margin: f64,
    /// `None` picks the default scheme for the dimension.
    pub quadrature: Option<QuadratureSpec>,
    /// Reserved: additionally require `g` convex. Not implemented; setting it
    /// makes the solver return `Unsupported`.
    pub require_convex: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tolerance: 1e-8,
            max_newton_iters: 200,
            initial_t: 1.0,
            t_multiplier: 10.0,
            armijo: 0.01,
            backtrack: 0.5,
            activity_tol: 1e-6,
            initial_margin: 0.01,
            quadrature: None,
            require_convex: false,
        }
    }
}

impl SolverConfig {
    pub fn quadrature_for(&self, n: usize) -> QuadratureSpec {
        self.quadrature
            .unwrap_or_else(|| QuadratureSpec::for_dim(n))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::InvalidArgument("kkt_tolerance must be > 0".into()));
        }
        if !(self.t_multiplier > 1.0) {
            return Err(Error::InvalidArgument("t_multiplier must be > 1".into()));
        }
        if !(self.initial_t > 0.0) || !(self.initial_margin > 0.0) {
            return Err(Error::InvalidArgument(
                "initial_t and initial_margin must be > 0".into(),
            ));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
        {
            return Err(Error::InvalidArgument(
                "line-search constants out of range".into(),
            ));
        }
        if !(self.activity_tol > 0.0) || self.max_newton_iters == 0 {
            return Err(Error::InvalidArgument(
                "activity_tol and max_newton_iters must be positive".into(),
            ));
        }
        if self.require_convex {
            return Err(Error::Unsupported(
                "convexity constraint on g is not implemented".into(),
            ));
        }
        self.quadrature_for(n).validate(n)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub g_star: HomogeneousPoly,
    /// `∫ exp(-g*)`.
    pub objective: f64,
    /// `objective / Γ(1+n/d)`.
    pub volume: f64,
    /// Newton iterations over all barrier stages and the polish.
    pub iterations: usize,
    pub barrier_stages: usize,
    pub kkt_residual: f64,
    /// Multiplier per constraint point; zero off the contact set.
    pub dual_weights: Vec<f64>,
    /// Whether the active-set polish was accepted.
    pub polished: bool,
    pub sphere_min: f64,
    pub quadrature: QuadDiagnostics,
}

impl SolveReport {
    /// The quadrature rule the solve was carried out on.
    pub fn rule(&self) -> Result<SphereRule> {
        SphereRule::new(
            self.g_star.n(),
            self.quadrature.scheme,
            self.quadrature.resolution,
        )
    }

    /// Indices with a nonzero multiplier.
    pub fn contact_indices(&self) -> Vec<usize> {
        (0..self.dual_weights.len())
            .filter(|&i| self.dual_weights[i] > 0.0)
            .collect()
    }
}

/// `f`, gradient and Hessian of `h(g) = ∫exp(-g)` over the degree-`d` basis.
#[derive(Clone, Debug)]
pub struct ObjectiveDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub moments: MomentVector,
}

impl ObjectiveDerivatives {
    fn from_moments(mv: MomentVector) -> Self {
        let hessian = mv.hessian().expect("moments computed with the 2d slice");
        ObjectiveDerivatives {
            value: mv.y0,
            gradient: mv.moments_d.iter().map(|y| -y).collect(),
            hessian,
            moments: mv,
        }
    }
}

/// Derivatives on a given rule (an exact derivative of the discretized
/// objective).
pub fn objective_grad_hess_on(
    g: &HomogeneousPoly,
    rule: &SphereRule,
) -> Result<ObjectiveDerivatives> {
    Ok(ObjectiveDerivatives::from_moments(rule.moments(g, true)?))
}

/// Derivatives on a rule self-checked at `g`.
pub fn objective_grad_hess(
    g: &HomogeneousPoly,
    q: &QuadratureSpec,
) -> Result<ObjectiveDerivatives> {
    check_in_cone(g)?;
    let (rule, _) = resolve_rule(g, q)?;
    objective_grad_hess_on(g, &rule)
}

/// `Σᵢ xᵢ^d / M` with `M = (1+ε) maxᵢ Σ_k x_{ik}^d`: strictly feasible and in
/// the cone.
pub fn initial_point(cs: &ConstraintSet, d: u32, margin: f64) -> Result<HomogeneousPoly> {
    let g0 = HomogeneousPoly::power_sum(cs.n(), d)?;
    let max = cs
        .points()
        .iter()
        .map(|p| g0.eval_unchecked(p))
        .fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Degenerate(
            "all constraint points are at the origin".into(),
        ));
    }
    Ok(g0.scaled(1.0 / ((1.0 + margin) * max)))
}

/// Scaled KKT residual of `(g, λ)`: the largest of the stationarity error
/// `‖-y + Σ λᵢ v(xᵢ)‖∞ / y0`, complementary slackness `max λᵢ(1-g(xᵢ)) / y0`
/// and primal infeasibility `max (g(xᵢ)-1)₊`.
pub fn kkt_residual(
    g: &HomogeneousPoly,
    multipliers: &[f64],
    cs: &ConstraintSet,
    q: &QuadratureSpec,
) -> Result<f64> {
    check_in_cone(g)?;
    let (rule, _) = resolve_rule(g, q)?;
    let mv = rule.moments(g, false)?;
    kkt_residual_with(g, &mv, multipliers, cs)
}

pub(crate) fn kkt_residual_with(
    g: &HomogeneousPoly,
    mv: &MomentVector,
    multipliers: &[f64],
    cs: &ConstraintSet,
) -> Result<f64> {
    if multipliers.len() != cs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} multipliers for {} points",
            multipliers.len(),
            cs.len()
        )));
    }
    if multipliers.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument(
            "multipliers must be nonnegative".into(),
        ));
    }
    let basis = g.basis();
    let mut station: Vec<f64> = mv.moments_d.iter().map(|y| -y).collect();
    let mut slack_gap: f64 = 0.0;
    let mut infeas: f64 = 0.0;
    for (p, &lam) in cs.points().iter().zip(multipliers) {
        let s = g.eval_unchecked(p);
        infeas = infeas.max(s - 1.0);
        if lam > 0.0 {
            slack_gap = slack_gap.max(lam * (1.0 - s).abs());
            for (st, v) in station.iter_mut().zip(basis.monomials(p)) {
                *st += lam * v;
            }
        }
    }
    let station = station.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((station / mv.y0)
        .max(slack_gap / mv.y0)
        .max(infeas.max(0.0)))
}

/// Solve from [`initial_point`].
pub fn solve_p0(cs: &ConstraintSet, d: u32, cfg: &SolverConfig) -> Result<SolveReport> {
    validate_problem(cs, d, cfg)?;
    let start = initial_point(cs, d, cfg.initial_margin)?;
    solve_p0_from(cs, d, cfg, &start)
}

fn validate_problem(cs: &ConstraintSet, d: u32, cfg: &SolverConfig) -> Result<()> {
    validate_dims(cs.n(), d)?;
    cfg.validate(cs.n())?;
    if !spans_space(cs.points())? {
        return Err(Error::Degenerate(
            "constraint points lie in a proper linear subspace".into(),
        ));
    }
    Ok(())
}

/// Solve starting from a strictly feasible, in-cone `start`.
pub fn solve_p0_from(
    cs: &ConstraintSet,
    d: u32,
    cfg: &SolverConfig,
    start: &HomogeneousPoly,
) -> Result<SolveReport> {
    validate_problem(cs, d, cfg)?;
    if start.n() != cs.n() || start.degree() != d {
        return Err(Error::InvalidArgument(
            "start polynomial has the wrong shape".into(),
        ));
    }
    check_in_cone(start)?;
    let problem = Problem::new(cs, start.basis().as_ref().clone());
    if problem.values(start.coeffs()).iter().any(|&s| !(s < 1.0)) {
        return Err(Error::InvalidArgument(
            "start is not strictly feasible".into(),
        ));
    }

    let q = cfg.quadrature_for(cs.n());
    let canonical = initial_point(cs, d, cfg.initial_margin)?;
    let (mut rule, mut diag) = resolve_rule(start, &q)?;
    let mut current = start.clone();
    let mut iterations = 0;

    for _ in 0..MAX_QUADRATURE_PASSES {
        let run = problem.barrier_solve(&current, &canonical, &rule, cfg)?;
        iterations += run.iterations;
        let (g, lambdas, polished, polish_iters) = problem.polish(&run, &rule, cfg)?;
        iterations += polish_iters;

        let (check_rule, check_diag) = resolve_rule(&g, &q)?;
        if check_rule.len() > rule.len() {
            // the optimum needs a finer rule than the start did
            rule = check_rule;
            diag = check_diag;
            let smax = problem.values(g.coeffs()).into_iter().fold(0.0, f64::max);
            current = g.scaled(1.0 / (smax * (1.0 + cfg.initial_margin)));
            continue;
        }

        let mv = rule.moments(&g, false)?;
        let kkt = kkt_residual_with(&g, &mv, &lambdas, cs)?;
        let sphere_min = check_in_cone(&g)?;
        if kkt > cfg.kkt_tolerance {
            return Err(Error::NotConverged(format!(
                "KKT residual {kkt:.3e} exceeds tolerance {:.3e}",
                cfg.kkt_tolerance
            )));
        }
        let ratio = cs.n() as f64 / d as f64;
        return Ok(SolveReport {
            objective: mv.y0,
            volume: mv.y0 / gamma(1.0 + ratio),
            g_star: g,
            iterations,
            barrier_stages: run.stages,
            kkt_residual: kkt,
            dual_weights: lambdas,
            polished,
            sphere_min,
            quadrature: diag,
        });
    }
    Err(Error::NotConverged(
        "quadrature kept refining at the optimum".into(),
    ))
}

/// Result of the barrier phase.
struct BarrierRun {
    g: HomogeneousPoly,
    t: f64,
    stages: usize,
    iterations: usize,
}

/// Constraint data shared across Newton iterations.
struct Problem<'a> {
    cs: &'a ConstraintSet,
    /// Row `i` is `v_d(xᵢ)`.
    rows: Vec<Vec<f64>>,
    basis: Basis,
}

impl<'a> Problem<'a> {
    fn new(cs: &'a ConstraintSet, basis: Basis) -> Self {
        let rows = cs.points().iter().map(|p| basis.monomials(p)).collect();
        Problem { cs, rows, basis }
    }

    fn values(&self, coeffs: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(coeffs).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn barrier_value(&self, t: f64, y0: f64, values: &[f64]) -> f64 {
        t * y0 - values.iter().map(|s| (1.0 - s).ln()).sum::<f64>()
    }

    fn barrier_solve(
        &self,
        start: &HomogeneousPoly,
        canonical: &HomogeneousPoly,
        rule: &SphereRule,
        cfg: &SolverConfig,
    ) -> Result<BarrierRun> {
        let m = self.rows.len() as f64;
        let scale0 = canonical.max_abs_coeff();
        let mut t = cfg.initial_t * m / rule.integral_exp(canonical)?;
        let mut g = start.clone();
        let mut iterations = 0;
        for stage in 1..=MAX_BARRIER_STAGES {
            let (next, iters) = self.center(&g, t, rule, cfg, DIVERGENCE_RATIO * scale0)?;
            g = next;
            iterations += iters;
            let mv = rule.moments(&g, false)?;
            let pinned = mv.node_min() < FLOOR_PROXIMITY * POSITIVITY_FLOOR * g.max_abs_coeff();
            if pinned || g.max_abs_coeff() > DIVERGENCE_RATIO * scale0 {
                return Err(Error::Infeasible(
                    "barrier diverged: the objective is unbounded below on these points".into(),
                ));
            }
            let y0 = mv.y0;
            if m / t < cfg.kkt_tolerance * y0 {
                return Ok(BarrierRun {
                    g,
                    t,
                    stages: stage,
                    iterations,
                });
            }
            t *= cfg.t_multiplier;
        }
        Err(Error::Infeasible(format!(
            "barrier did not reach the duality-gap target after {MAX_BARRIER_STAGES} stages"
        )))
    }

    /// Damped Newton on `t·h(g) - Σ log(1 - g(xᵢ))`.
    fn center(
        &self,
        start: &HomogeneousPoly,
        t: f64,
        rule: &SphereRule,
        cfg: &SolverConfig,
        coeff_limit: f64,
    ) -> Result<(HomogeneousPoly, usize)> {
        let l = self.basis.len();
        let mut g = start.clone();
        let mut values = self.values(g.coeffs());
        let mut mv = rule.moments(&g, true)?;
        let mut phi = self.barrier_value(t, mv.y0, &values);
        let mut prev_dec = f64::INFINITY;
        let mut stalled = 0;

        for iter in 0..cfg.max_newton_iters {
            let mut grad = DVector::from_iterator(l, mv.moments_d.iter().map(|y| -t * y));
            let hess_h = mv.hessian().expect("2d moments requested");
            let mut hess = DMatrix::from_fn(l, l, |i, j| t * hess_h[i][j]);
            for (row, &s) in self.rows.iter().zip(&values) {
                let inv = 1.0 / (1.0 - s);
                let v = DVector::from_column_slice(row);
                grad.axpy(inv, &v, 1.0);
                hess.syger(inv * inv, &v, &v, 1.0);
            }
            let step = solve_spd(&hess, &(-&grad))?;
            let dec2 = -grad.dot(&step);
            if dec2 / 2.0 <= 1e-12 || (iter > 2 && dec2 >= prev_dec && dec2 / 2.0 < 1e-6) {
                return Ok((g, iter));
            }
            prev_dec = dec2;

            let slope = grad.dot(&step);
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..80 {
                let coeffs: Vec<f64> = g
                    .coeffs()
                    .iter()
                    .zip(step.iter())
                    .map(|(c, d)| c + s * d)
                    .collect();
                let cand_vals = self.values(&coeffs);
                if cand_vals.iter().all(|&v| v < 1.0) {
                    let cand = g.with_coeffs(coeffs)?;
                    match rule.integral_exp(&cand) {
                        Ok(y0) => {
                            let val = self.barrier_value(t, y0, &cand_vals);
                            let slack = 1e-13 * phi.abs().max(1.0);
                            if val <= phi + cfg.armijo * s * slope + slack {
                                accepted = Some((cand, cand_vals, val));
                                break;
                            }
                        }
                        Err(Error::NotInCone { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                s *= cfg.backtrack;
            }
            let Some((cand, cand_vals, val)) = accepted else {
                // no progress possible at this precision
                return Ok((g, iter));
            };
            stalled = if phi - val <= 1e-15 * phi.abs().max(1.0) {
                stalled + 1
            } else {
                0
            };
            g = cand;
            values = cand_vals;
            phi = val;
            if stalled >= 3 {
                return Ok((g, iter + 1));
            }
            if g.max_abs_coeff() > coeff_limit {
                return Ok((g, iter + 1));
            }
            mv = rule.moments(&g, true)?;
        }
        Ok((g, cfg.max_newton_iters))
    }

    /// Equality-constrained Newton over the contact set identified at the
    /// last central point, then multiplier recovery. Falls back to the
    /// barrier point and its multipliers if the polish does not validate.
    fn polish(
        &self,
        run: &BarrierRun,
        rule: &SphereRule,
        cfg: &SolverConfig,
    ) -> Result<(HomogeneousPoly, Vec<f64>, bool, usize)> {
        let values = self.values(run.g.coeffs());
        let barrier_lambda: Vec<f64> = values.iter().map(|s| 1.0 / (run.t * (1.0 - s))).collect();

        if let Some((g, iters)) = self.equality_newton(run, &values, rule, cfg)? {
            let vals = self.values(g.coeffs());
            let mv = rule.moments(&g, false)?;
            if vals.iter().all(|&s| s <= 1.0 + 1e-9) && check_in_cone(&g).is_ok() {
                if let Some(lam) = self.recover_multipliers(&mv, &vals, &barrier_lambda, cfg) {
                    let kkt = kkt_residual_with(&g, &mv, &lam, self.cs)?;
                    if kkt <= cfg.kkt_tolerance {
                        return Ok((g, lam, true, iters));
                    }
                }
            }
        }

        let mv = rule.moments(&run.g, false)?;
        let lam = self
            .recover_multipliers(&mv, &values, &barrier_lambda, cfg)
            .unwrap_or_else(|| {
                values
                    .iter()
                    .zip(&barrier_lambda)
                    .map(|(&s, &l)| if s >= 1.0 - cfg.activity_tol { l } else { 0.0 })
                    .collect()
            });
        Ok((run.g.clone(), lam, false, 0))
    }

    fn active_set(&self, values: &[f64], cfg: &SolverConfig) -> Vec<usize> {
        (0..values.len())
            .filter(|&i| values[i] >= 1.0 - cfg.activity_tol)
            .collect()
    }

    fn equality_newton(
        &self,
        run: &BarrierRun,
        values: &[f64],
        rule: &SphereRule,
        cfg: &SolverConfig,
    ) -> Result<Option<(HomogeneousPoly, usize)>> {
        let l = self.basis.len();
        let active = self.active_set(values, cfg);
        if active.is_empty() {
            return Ok(None);
        }
        let mv = rule.moments(&run.g, false)?;
        let va = DMatrix::from_fn(l, active.len(), |r, c| self.rows[active[c]][r]);
        let y = DVector::from_column_slice(&mv.moments_d);
        let lam = nnls(&va, &y);
        let mut support: Vec<usize> = (0..active.len()).filter(|&k| lam[k] > 0.0).collect();
        support.sort_by(|&a, &b| lam[b].total_cmp(&lam[a]));
        let support_rows: Vec<usize> = support.iter().map(|&k| active[k]).collect();
        let eq = independent_rows(&self.rows, &support_rows, 1e-9);
        if eq.is_empty() {
            return Ok(None);
        }

        let k = eq.len();
        let mut g = run.g.clone();
        let mut iters = 0;
        for _ in 0..30 {
            iters += 1;
            let mv = match rule.moments(&g, true) {
                Ok(mv) => mv,
                Err(Error::NotInCone { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let h = mv.hessian().expect("2d moments requested");
            let mut kkt = DMatrix::zeros(l + k, l + k);
            let mut rhs = DVector::zeros(l + k);
            for i in 0..l {
                for j in 0..l {
                    kkt[(i, j)] = h[i][j];
                }
                rhs[i] = mv.moments_d[i];
            }
            for (c, &p) in eq.iter().enumerate() {
                let mut s = 0.0;
                for i in 0..l {
                    kkt[(i, l + c)] = self.rows[p][i];
                    kkt[(l + c, i)] = self.rows[p][i];
                    s += self.rows[p][i] * g.coeffs()[i];
                }
                rhs[l + c] = 1.0 - s;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                return Ok(None);
            };
            let step: Vec<f64> = sol.rows(0, l).iter().copied().collect();
            let step_norm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let coeffs: Vec<f64> = g.coeffs().iter().zip(&step).map(|(c, d)| c + d).collect();
            let next = g.with_coeffs(coeffs)?;
            if rule.integral_exp(&next).is_err() {
                return Ok(None);
            }
            g = next;
            if step_norm <= 1e-14 * g.max_abs_coeff() {
                break;
            }
        }
        Ok(Some((g, iters)))
    }

    /// Multipliers on the contact set `{g(xᵢ) ≥ 1 - activity_tol}`: the
    /// barrier estimates plus the minimum-norm correction that makes
    /// stationarity exact, or the NNLS fit when that correction turns a
    /// weight negative.
    fn recover_multipliers(
        &self,
        mv: &MomentVector,
        values: &[f64],
        barrier_lambda: &[f64],
        cfg: &SolverConfig,
    ) -> Option<Vec<f64>> {
        let l = self.basis.len();
        let active = self.active_set(values, cfg);
        if active.is_empty() {
            return None;
        }
        let va = DMatrix::from_fn(l, active.len(), |r, c| self.rows[active[c]][r]);
        let y = DVector::from_column_slice(&mv.moments_d);
        let lam0 = DVector::from_iterator(active.len(), active.iter().map(|&i| barrier_lambda[i]));
        let resid = &y - &va * &lam0;
        let svd = va.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let corrected = svd.solve(&resid, eps).ok().map(|delta| lam0 + delta);

        let tol = cfg.kkt_tolerance * mv.y0;
        let candidate = match corrected {
            Some(lam) if lam.iter().all(|&v| v >= 0.0) && (&va * &lam - &y).amax() <= tol => lam,
            _ => nnls(&va, &y),
        };
        let mut out = vec![0.0; values.len()];
        for (k, &i) in active.iter().enumerate() {
            out[i] = candidate[k].max(0.0);
        }
        Some(out)
    }
}

/// Solve `H x = b` for symmetric positive (semi)definite `H`, adding `μI`
/// with `μ = 1e-12·tr(H)/ℓ` (growing tenfold) when Cholesky fails.
fn solve_spd(h: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let l = h.nrows();
    let mut mu = 1e-12 * h.trace().abs().max(f64::MIN_POSITIVE) / l as f64;
    for _ in 0..20 {
        let reg = h + DMatrix::identity(l, l) * mu;
        if let Some(ch) = reg.cholesky() {
            return Ok(ch.solve(b));
        }
        mu *= 10.0;
    }
    Err(Error::NotConverged(
        "Newton system is not positive definite".into(),
    ))
}
