//! Integrals of `x^α exp(-g(x))` over `ℝⁿ` for homogeneous `g`.
//!
//! By homogeneity the radial part is a Gamma function:
//!
//! ```text
//! ∫ x^α exp(-g) dx = Γ((n+|α|)/d) / d · ∫_{S^{n-1}} θ^α g(θ)^{-(n+|α|)/d} dσ(θ)
//! ```
//!
//! so only a smooth integrand on the unit sphere is left for quadrature.
//! All sums run sequentially over the nodes in a fixed order, so results are
//! bit-stable for a given rule.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::oracle;
use crate::polycore::{min_on_sphere, Basis, HomogeneousPoly, MultiIndex, PowerTable};

/// Hard cap on the number of sphere nodes reached by refinement.
pub const MAX_NODES: usize = 1 << 20;

/// Sphere minima at or below `POSITIVITY_FLOOR · max|g_α|` are rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

/// Directions probed by the cone-membership gate of the public integrals.
const CONE_CHECK_BUDGET: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereScheme {
    /// `S⁰ = {-1, +1}`.
    Antipodal,
    /// `M` equispaced angles on the circle.
    CircleUniform,
    /// Fibonacci lattice on `S²` with equal weights.
    FibonacciSphere,
    /// Gauss-Legendre in the polar variable times uniform azimuths
    /// (`S²`: `z` and one azimuth; `S³`: `sin²η` and two azimuths).
    ProductGauss,
}

impl SphereScheme {
    pub fn default_for(n: usize) -> Self {
        match n {
            1 => SphereScheme::Antipodal,
            2 => SphereScheme::CircleUniform,
            _ => SphereScheme::ProductGauss,
        }
    }

    fn supports(self, n: usize) -> bool {
        match self {
            SphereScheme::Antipodal => n == 1,
            SphereScheme::CircleUniform => n == 2,
            SphereScheme::FibonacciSphere => n == 3,
            SphereScheme::ProductGauss => n == 3 || n == 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Initial resolution; refinement doubles it.
    pub angular_points: usize,
    pub scheme: SphereScheme,
    /// Target for the self-check between successive refinements, relative
    /// to `y0`.
    pub tolerance: f64,
}

impl QuadratureSpec {
    pub fn for_dim(n: usize) -> Self {
        QuadratureSpec {
            angular_points: match n {
                2 => 64,
                _ => 16,
            },
            scheme: SphereScheme::default_for(n),
            tolerance: 1e-12,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.angular_points < 16 {
            return Err(Error::InvalidArgument(format!(
                "angular_points must be >= 16, got {}",
                self.angular_points
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature tolerance must be > 0".into(),
            ));
        }
        if !self.scheme.supports(n) {
            return Err(Error::Unsupported(format!(
                "scheme {:?} does not support dimension {n}",
                self.scheme
            )));
        }
        Ok(())
    }
}

/// How a rule was selected and how well it agreed with its refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadDiagnostics {
    pub scheme: SphereScheme,
    pub resolution: usize,
    pub nodes: usize,
    /// Largest change of `y0` or any degree-`d` moment, relative to `y0`,
    /// between the last two resolutions.
    pub self_check_delta: f64,
    pub converged: bool,
}

/// Nodes and weights on `S^{n-1}`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    n: usize,
    scheme: SphereScheme,
    resolution: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n: usize, scheme: SphereScheme, resolution: usize) -> Result<Self> {
        if !scheme.supports(n) {
            return Err(Error::Unsupported(format!(
                "scheme {scheme:?} does not support dimension {n}"
            )));
        }
        let m = resolution.max(4);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match scheme {
            SphereScheme::Antipodal => {
                nodes.extend([1.0, -1.0]);
                weights.extend([1.0, 1.0]);
            }
            SphereScheme::CircleUniform => {
                let w = 2.0 * PI / m as f64;
                for k in 0..m {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    nodes.extend([t.cos(), t.sin()]);
                    weights.push(w);
                }
            }
            SphereScheme::FibonacciSphere => {
                let w = 4.0 * PI / m as f64;
                for p in crate::polycore::fibonacci_sphere(m) {
                    nodes.extend(p);
                    weights.push(w);
                }
            }
            SphereScheme::ProductGauss if n == 3 => {
                let (zs, zw) = gauss_legendre(m / 2, -1.0, 1.0);
                let wa = 2.0 * PI / m as f64;
                for (z, w) in zs.iter().zip(&zw) {
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    for k in 0..m {
                        let phi = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                        nodes.extend([r * phi.cos(), r * phi.sin(), *z]);
                        weights.push(w * wa);
                    }
                }
            }
            SphereScheme::ProductGauss => {
                // S³ in Hopf coordinates with u = sin²η: dσ = ½ du dξ₁ dξ₂.
                let (us, uw) = gauss_legendre((m / 4).max(2), 0.0, 1.0);
                let ma = (m / 2).max(2);
                let wa = 2.0 * PI / ma as f64;
                for (u, w) in us.iter().zip(&uw) {
                    let (c, s) = ((1.0 - u).sqrt(), u.sqrt());
                    for i in 0..ma {
                        let a = 2.0 * PI * (i as f64 + 0.5) / ma as f64;
                        for j in 0..ma {
                            let b = 2.0 * PI * (j as f64 + 0.25) / ma as f64;
                            nodes.extend([c * a.cos(), c * a.sin(), s * b.cos(), s * b.sin()]);
                            weights.push(0.5 * w * wa * wa);
                        }
                    }
                }
            }
        }
        Ok(SphereRule {
            n,
            scheme,
            resolution: m,
            nodes,
            weights,
        })
    }

    pub fn from_spec(n: usize, q: &QuadratureSpec) -> Result<Self> {
        q.validate(n)?;
        SphereRule::new(n, q.scheme, q.angular_points)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn scheme(&self) -> SphereScheme {
        self.scheme
    }

    pub fn refined(&self) -> Result<Self> {
        SphereRule::new(self.n, self.scheme, self.resolution * 2)
    }

    fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.n..(k + 1) * self.n]
    }

    fn check_dim(&self, g: &HomogeneousPoly) -> Result<()> {
        if g.n() != self.n {
            return Err(Error::InvalidArgument(format!(
                "rule is for n={}, polynomial has n={}",
                self.n,
                g.n()
            )));
        }
        Ok(())
    }

    /// `y0 = ∫exp(-g)`, the degree-`d` moments and optionally the degree-`2d`
    /// moments, all on this rule.
    pub fn moments(&self, g: &HomogeneousPoly, with_hessian: bool) -> Result<MomentVector> {
        self.check_dim(g)?;
        let n = self.n as f64;
        let d = g.degree();
        let df = d as f64;
        let basis_d = g.basis().clone();
        let basis_2d = with_hessian.then(|| Arc::new(Basis::homogeneous(self.n, 2 * d)));
        let floor = POSITIVITY_FLOOR * g.max_abs_coeff();
        let max_deg = if with_hessian { 2 * d } else { d };

        let mut acc0 = 0.0;
        let mut acc_d = vec![0.0; basis_d.len()];
        let mut acc_2d = vec![0.0; basis_2d.as_ref().map_or(0, |b| b.len())];
        let mut node_min = f64::INFINITY;
        for k in 0..self.len() {
            let table = PowerTable::new(self.node(k), max_deg);
            let gv = g.eval_with(&table);
            node_min = node_min.min(gv);
            if !(gv > floor) {
                return Err(Error::NotInCone {
                    sphere_min: gv,
                    floor,
                });
            }
            let w = self.weights[k];
            let p0 = w * gv.powf(-n / df);
            let pd = p0 / gv;
            acc0 += p0;
            for (a, alpha) in acc_d.iter_mut().zip(basis_d.indices()) {
                *a += pd * table.monomial(alpha);
            }
            if let Some(b2) = &basis_2d {
                let p2 = pd / gv;
                for (a, beta) in acc_2d.iter_mut().zip(b2.indices()) {
                    *a += p2 * table.monomial(beta);
                }
            }
        }
        let y0 = radial_factor(n, 0.0, df) * acc0;
        let cd = radial_factor(n, df, df);
        let moments_d = acc_d.into_iter().map(|a| cd * a).collect();
        let moments_2d = basis_2d.as_ref().map(|_| {
            let c2 = radial_factor(n, 2.0 * df, df);
            acc_2d.into_iter().map(|a| c2 * a).collect()
        });
        Ok(MomentVector {
            n: self.n,
            d,
            y0,
            moments_d,
            moments_2d,
            basis_d,
            basis_2d,
            node_min,
        })
    }

    /// `∫ x^α exp(-g)` for an arbitrary multi-index on this rule.
    pub fn moment(&self, g: &HomogeneousPoly, alpha: &MultiIndex) -> Result<f64> {
        self.check_dim(g)?;
        if alpha.dim() != self.n {
            return Err(Error::InvalidArgument(
                "multi-index dimension mismatch".into(),
            ));
        }
        let n = self.n as f64;
        let df = g.degree() as f64;
        let k = alpha.degree() as f64;
        let floor = POSITIVITY_FLOOR * g.max_abs_coeff();
        let max_deg = g.degree().max(alpha.degree());
        let mut acc = 0.0;
        for j in 0..self.len() {
            let table = PowerTable::new(self.node(j), max_deg);
            let gv = g.eval_with(&table);
            if !(gv > floor) {
                return Err(Error::NotInCone {
                    sphere_min: gv,
                    floor,
                });
            }
            acc += self.weights[j] * table.monomial(alpha) * gv.powf(-(n + k) / df);
        }
        Ok(radial_factor(n, k, df) * acc)
    }

    /// `∫ exp(-g)` on this rule.
    pub fn integral_exp(&self, g: &HomogeneousPoly) -> Result<f64> {
        self.moment(g, &MultiIndex::zero(self.n))
    }
}

/// `Γ((n+k)/d) / d`.
fn radial_factor(n: f64, k: f64, d: f64) -> f64 {
    gamma((n + k) / d) / d
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let m = count.max(1);
    let mut xs = vec![0.0; m];
    let mut ws = vec![0.0; m];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = mid - half * x;
        xs[m - 1 - i] = mid + half * x;
        ws[i] = half * w;
        ws[m - 1 - i] = half * w;
    }
    (xs, ws)
}

/// Moments `y_α = ∫ x^α exp(-g) dx` of the density `exp(-g)`.
#[derive(Clone, Debug)]
pub struct MomentVector {
    pub n: usize,
    pub d: u32,
    pub y0: f64,
    /// Over the degree-`d` basis.
    pub moments_d: Vec<f64>,
    /// Over the degree-`2d` basis, when requested.
    pub moments_2d: Option<Vec<f64>>,
    basis_d: Arc<Basis>,
    basis_2d: Option<Arc<Basis>>,
    node_min: f64,
}

impl MomentVector {
    pub fn basis_d(&self) -> &Arc<Basis> {
        &self.basis_d
    }

    pub fn basis_2d(&self) -> Option<&Arc<Basis>> {
        self.basis_2d.as_ref()
    }

    /// Smallest value of `g` over the quadrature nodes.
    pub fn node_min(&self) -> f64 {
        self.node_min
    }

    pub fn moment_d(&self, alpha: &MultiIndex) -> Option<f64> {
        self.basis_d.index_of(alpha).map(|i| self.moments_d[i])
    }

    /// `∫ x^{α+β} exp(-g)` for basis positions `i`, `j`; needs the `2d` slice.
    pub fn hessian_entry(&self, i: usize, j: usize) -> Option<f64> {
        let b2 = self.basis_2d.as_ref()?;
        let m2 = self.moments_2d.as_ref()?;
        let sum = self.basis_d.at(i).add(self.basis_d.at(j));
        b2.index_of(&sum).map(|k| m2[k])
    }

    /// Dense `ℓ × ℓ` Hessian of `∫exp(-g)`.
    pub fn hessian(&self) -> Option<Vec<Vec<f64>>> {
        let l = self.basis_d.len();
        (0..l)
            .map(|i| (0..l).map(|j| self.hessian_entry(i, j)).collect())
            .collect()
    }

    /// `Σ g_α y_α`, equal to `(n/d)·y0` for the generating `g`.
    pub fn euler_sum(&self, g: &HomogeneousPoly) -> f64 {
        g.coeffs()
            .iter()
            .zip(&self.moments_d)
            .map(|(c, y)| c * y)
            .sum()
    }
}

fn relative_delta(a: &MomentVector, b: &MomentVector) -> f64 {
    let scale = b.y0.abs().max(f64::MIN_POSITIVE);
    let mut delta = (a.y0 - b.y0).abs();
    for (x, y) in a.moments_d.iter().zip(&b.moments_d) {
        delta = delta.max((x - y).abs());
    }
    delta / scale
}

/// Refine the rule by doubling until `y0` and the degree-`d` moments agree to
/// `q.tolerance` (relative to `y0`) between successive resolutions. Returns
/// the finer of the last two rules.
pub fn resolve_rule(
    g: &HomogeneousPoly,
    q: &QuadratureSpec,
) -> Result<(SphereRule, QuadDiagnostics)> {
    let mut rule = SphereRule::from_spec(g.n(), q)?;
    let mut prev = rule.moments(g, false)?;
    loop {
        let finer = rule.refined()?;
        if finer.len() > MAX_NODES || finer.len() == rule.len() {
            let diag = QuadDiagnostics {
                scheme: rule.scheme,
                resolution: rule.resolution,
                nodes: rule.len(),
                self_check_delta: if finer.len() == rule.len() {
                    0.0
                } else {
                    f64::NAN
                },
                converged: finer.len() == rule.len(),
            };
            return Ok((rule, diag));
        }
        let next = finer.moments(g, false)?;
        let delta = relative_delta(&prev, &next);
        if delta <= q.tolerance {
            let diag = QuadDiagnostics {
                scheme: finer.scheme,
                resolution: finer.resolution,
                nodes: finer.len(),
                self_check_delta: delta,
                converged: true,
            };
            return Ok((finer, diag));
        }
        rule = finer;
        prev = next;
    }
}

/// Reject `g` whose sphere minimum is at or below the positivity floor.
pub fn check_in_cone(g: &HomogeneousPoly) -> Result<f64> {
    let floor = POSITIVITY_FLOOR * g.max_abs_coeff();
    let (min, _) = min_on_sphere(g, CONE_CHECK_BUDGET);
    if !(min > floor) {
        return Err(Error::NotInCone {
            sphere_min: min,
            floor,
        });
    }
    Ok(min)
}

/// `∫_{ℝⁿ} exp(-g(x)) dx`.
pub fn integral_exp(g: &HomogeneousPoly, q: &QuadratureSpec) -> Result<f64> {
    check_in_cone(g)?;
    let (rule, _) = resolve_rule(g, q)?;
    rule.integral_exp(g)
}

/// Volume of `{x : g(x) ≤ y}`, `y^{n/d} / Γ(1+n/d) · ∫exp(-g)`.
pub fn volume_sublevel(g: &HomogeneousPoly, y: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "level must be >= 0, got {y}"
        )));
    }
    let ratio = g.n() as f64 / g.degree() as f64;
    let f = integral_exp(g, q)?;
    Ok(y.powf(ratio) / gamma(1.0 + ratio) * f)
}

/// `∫ x^α exp(-g) dx` for any `α`, refined until it and `y0` settle.
pub fn moment(g: &HomogeneousPoly, alpha: &MultiIndex, q: &QuadratureSpec) -> Result<f64> {
    check_in_cone(g)?;
    let (mut rule, _) = resolve_rule(g, q)?;
    let mut value = rule.moment(g, alpha)?;
    let scale = rule.integral_exp(g)?;
    loop {
        let finer = rule.refined()?;
        if finer.len() > MAX_NODES || finer.len() == rule.len() {
            return Ok(value);
        }
        let next = finer.moment(g, alpha)?;
        if (next - value).abs() <= q.tolerance * scale.max(next.abs()) {
            return Ok(next);
        }
        rule = finer;
        value = next;
    }
}

/// `y0`, all degree-`d` moments and, when `with_hessian`, all degree-`2d`
/// moments on a self-checked rule.
pub fn moment_vector(
    g: &HomogeneousPoly,
    q: &QuadratureSpec,
    with_hessian: bool,
) -> Result<(MomentVector, QuadDiagnostics)> {
    check_in_cone(g)?;
    let (rule, diag) = resolve_rule(g, q)?;
    Ok((rule.moments(g, with_hessian)?, diag))
}

/// Both sides of `∫ x^α exp(-g) = Γ(1+(n+|α|)/d) ∫_{G₁} x^α dx`, the right
/// one by Monte-Carlo over the sublevel set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSetCrosscheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `rhs`.
    pub std_error: f64,
    pub agree: bool,
}

pub fn crosscheck_levelset_moment(
    g: &HomogeneousPoly,
    alpha: &MultiIndex,
    q: &QuadratureSpec,
    mc_budget: usize,
    seed: u64,
) -> Result<LevelSetCrosscheck> {
    let lhs = moment(g, alpha, q)?;
    let center = vec![0.0; g.n()];
    let (est, se) =
        oracle::mc_sublevel_integral(g, &center, 1.0, mc_budget, seed, |x| alpha.eval(x))?;
    let factor = gamma(1.0 + (g.n() as f64 + alpha.degree() as f64) / g.degree() as f64);
    let (rhs, std_error) = (factor * est, factor * se);
    let diff = (lhs - rhs).abs();
    let agree = if std_error > 0.0 {
        diff <= 4.0 * std_error
    } else {
        diff <= 1e-12 * lhs.abs().max(1.0)
    };
    Ok(LevelSetCrosscheck {
        lhs,
        rhs,
        std_error,
        agree,
    })
}
