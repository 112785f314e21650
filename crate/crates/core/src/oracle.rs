//! Ground truth that does not go through the solver: the origin-centered
//! minimum-volume enclosing ellipsoid (the `d = 2` case) and Monte-Carlo
//! estimates over sublevel sets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gaussint::check_in_cone;
use crate::polycore::{HomogeneousPoly, MultiIndex};

pub const MVEE_TOLERANCE: f64 = 1e-9;
pub const MVEE_MAX_ITERS: usize = 100_000;

/// Ellipsoid `{x : xᵀ Q x ≤ 1}`.
#[derive(Clone, Debug, Serialize)]
pub struct EllipsoidOracleResult {
    pub shape: Vec<Vec<f64>>,
    pub volume: f64,
    pub support: Vec<Vec<f64>>,
    /// Weights of the support points in the final design.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// `max_i xᵢᵀQxᵢ - 1` at termination.
    pub gap: f64,
}

impl EllipsoidOracleResult {
    /// The quadratic form `xᵀQx` as a degree-2 homogeneous polynomial.
    pub fn as_poly(&self) -> HomogeneousPoly {
        let n = self.shape.len();
        let mut g = HomogeneousPoly::zeros(n, 2).expect("n >= 1");
        let mut coeffs = vec![0.0; g.coeffs().len()];
        for i in 0..n {
            for j in i..n {
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                let k = g
                    .basis()
                    .index_of(&MultiIndex::new(e))
                    .expect("degree-2 index");
                coeffs[k] = if i == j {
                    self.shape[i][i]
                } else {
                    2.0 * self.shape[i][j]
                };
            }
        }
        g = g.with_coeffs(coeffs).expect("finite");
        g
    }
}

/// Volume of the Euclidean unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma(1.0 + n as f64 / 2.0)
}

fn points_matrix(points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::EmptySet("no points".into()))?;
    if n == 0 || points.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidArgument(
            "points must share a positive dimension".into(),
        ));
    }
    Ok(DMatrix::from_fn(n, points.len(), |i, j| points[j][i]))
}

/// Numerical rank test: the points span `ℝⁿ`.
pub fn spans_space(points: &[Vec<f64>]) -> Result<bool> {
    let p = points_matrix(points)?;
    let n = p.nrows();
    if points.len() < n {
        return Ok(false);
    }
    let sv = p.svd(false, false).singular_values;
    let max = sv.max();
    Ok(max > 0.0 && sv.min() > 1e-10 * max)
}

/// Origin-centered minimum-volume ellipsoid containing `±xᵢ`, by the
/// Khachiyan multiplicative-weights iteration with Wolfe-Atwood away steps.
/// Stops once `max_i xᵢᵀQxᵢ ≤ 1 + tol`.
pub fn mvee_symmetric(points: &[Vec<f64>], tol: f64) -> Result<EllipsoidOracleResult> {
    if !spans_space(points)? {
        return Err(Error::Degenerate("points do not span the space".into()));
    }
    let n = points[0].len();
    let nf = n as f64;
    let m = points.len();
    let xs: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_column_slice(p))
        .collect();
    let mut u = vec![1.0 / m as f64; m];

    let design = |u: &[f64]| {
        let mut x = DMatrix::zeros(n, n);
        for (ui, xi) in u.iter().zip(&xs) {
            if *ui > 0.0 {
                x += *ui * xi * xi.transpose();
            }
        }
        x
    };

    let mut iterations = 0;
    let (mut xinv, mut lev);
    loop {
        xinv = design(&u)
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular design matrix".into()))?;
        lev = xs
            .iter()
            .map(|x| (x.transpose() * &xinv * x)[(0, 0)])
            .collect::<Vec<f64>>();
        let (jp, mp) =
            lev.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |a, (i, &v)| if v > a.1 { (i, v) } else { a },
            );
        let (jm, mm) = lev.iter().enumerate().filter(|(i, _)| u[*i] > 0.0).fold(
            (0, f64::INFINITY),
            |a, (i, &v)| if v < a.1 { (i, v) } else { a },
        );
        let eps_plus = mp / nf - 1.0;
        let eps_minus = 1.0 - mm / nf;
        if eps_plus <= tol || iterations >= MVEE_MAX_ITERS {
            break;
        }
        iterations += 1;
        let (j, mj) = if eps_plus > eps_minus {
            (jp, mp)
        } else {
            (jm, mm)
        };
        let tau_min = if u[j] < 1.0 {
            -u[j] / (1.0 - u[j])
        } else {
            0.0
        };
        let tau = if mj <= 1.0 {
            tau_min
        } else {
            ((mj - nf) / (nf * (mj - 1.0))).max(tau_min)
        };
        for ui in u.iter_mut() {
            *ui *= 1.0 - tau;
        }
        if tau == tau_min && tau < 0.0 {
            u[j] = 0.0;
        } else {
            u[j] += tau;
        }
    }

    let q = &xinv / nf;
    let gap = lev.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v / nf)) - 1.0;
    let det = q.determinant();
    if !(det > 0.0) {
        return Err(Error::Degenerate("non-positive-definite shape".into()));
    }
    let volume = unit_ball_volume(n) / det.sqrt();
    let (support, weights) = points
        .iter()
        .zip(&u)
        .zip(&lev)
        .filter(|((_, &w), &l)| w > 0.0 && l >= nf * (1.0 - 1e-6))
        .map(|((p, &w), _)| (p.clone(), w))
        .unzip();
    Ok(EllipsoidOracleResult {
        shape: (0..n)
            .map(|i| (0..n).map(|j| q[(i, j)]).collect())
            .collect(),
        volume,
        support,
        weights,
        iterations,
        gap,
    })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub seed: u64,
    pub budget: usize,
}

/// `∫_{g(x-a) ≤ y} f(x - a) dx` by uniform sampling of the box
/// `a + [-r, r]ⁿ` with `r = (y / min_{S} g)^{1/d}` (padded by 1%).
pub(crate) fn mc_sublevel_integral<F>(
    g: &HomogeneousPoly,
    a: &[f64],
    y: f64,
    budget: usize,
    seed: u64,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    if a.len() != g.n() {
        return Err(Error::InvalidArgument("center dimension mismatch".into()));
    }
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "level must be >= 0, got {y}"
        )));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument(
            "Monte-Carlo budget must be >= 1".into(),
        ));
    }
    let sphere_min = check_in_cone(g)?;
    if y == 0.0 {
        return Ok((0.0, 0.0));
    }
    let n = g.n();
    let r = 1.01 * (y / sphere_min).powf(1.0 / g.degree() as f64);
    let box_volume = (2.0 * r).powi(n as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..budget {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-r..r);
        }
        if g.eval_unchecked(&x) <= y {
            let v = f(&x);
            sum += v;
            sum2 += v * v;
        }
    }
    let nb = budget as f64;
    let mean = sum / nb;
    let var = (sum2 / nb - mean * mean).max(0.0);
    Ok((box_volume * mean, box_volume * (var / nb).sqrt()))
}

/// Rejection-sampling estimate of `vol{x : g(x-a) ≤ y}` with its binomial
/// standard error.
pub fn mc_volume(
    g: &HomogeneousPoly,
    a: &[f64],
    y: f64,
    budget: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (estimate, std_error) = mc_sublevel_integral(g, a, y, budget, seed, |_| 1.0)?;
    Ok(McEstimate {
        estimate,
        std_error,
        seed,
        budget,
    })
}
