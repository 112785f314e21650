//! Multi-indices, the monomial basis of homogeneous forms, and evaluation of
//! homogeneous polynomials.
//!
//! Multi-indices of a fixed total degree are ordered graded-lexicographically
//! with the first exponent most significant and larger exponents first, so for
//! `n = 2, d = 2` the basis is `x^2, xy, y^2`. Every serialized coefficient
//! vector uses this order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `α ∈ ℕⁿ`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MultiIndex {
    exponents: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        let degree = exponents.iter().sum();
        MultiIndex { exponents, degree }
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex::new(vec![0; n])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Componentwise sum `α + β`.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim(), "multi-index dimension mismatch");
        MultiIndex::new(
            self.exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// True when every exponent is even.
    pub fn is_even(&self) -> bool {
        self.exponents.iter().all(|e| e % 2 == 0)
    }

    /// `x^α`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exponents.cmp(&self.exponents))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let exponents = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidArgument(format!("bad multi-index key {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if exponents.is_empty() {
            return Err(Error::InvalidArgument("empty multi-index key".into()));
        }
        Ok(MultiIndex::new(exponents))
    }
}

impl TryFrom<String> for MultiIndex {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MultiIndex> for String {
    fn from(m: MultiIndex) -> String {
        m.to_string()
    }
}

/// All multi-indices of `n` variables with total degree exactly `degree`, in
/// canonical order.
#[derive(Clone, Debug)]
pub struct Basis {
    n: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.degree == other.degree
    }
}

impl Basis {
    /// Basis of the degree-`degree` slice, any degree (odd allowed).
    pub fn homogeneous(n: usize, degree: u32) -> Self {
        let mut indices = Vec::with_capacity(binomial(n + degree as usize - 1, degree as usize));
        let mut current = vec![0u32; n];
        fill(&mut indices, &mut current, 0, degree);
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Basis {
            n,
            degree,
            indices,
            lookup,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn at(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn index_of(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// `v(x) = (x^α)` over the basis.
    pub fn monomials(&self, x: &[f64]) -> Vec<f64> {
        let table = PowerTable::new(x, self.degree);
        self.indices.iter().map(|a| table.monomial(a)).collect()
    }

    pub fn keys(&self) -> Vec<String> {
        self.indices.iter().map(|m| m.to_string()).collect()
    }
}

fn fill(out: &mut Vec<MultiIndex>, current: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex::new(current.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill(out, current, pos + 1, remaining - e);
    }
}

/// Binomial coefficient.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Enumerate the basis of homogeneous forms of even degree `d ≥ 2` in `n ≥ 1`
/// variables.
pub fn enumerate_basis(n: usize, d: u32) -> Result<Basis> {
    validate_dims(n, d)?;
    Ok(Basis::homogeneous(n, d))
}

pub(crate) fn validate_dims(n: usize, d: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "degree must be even and >= 2, got {d}"
        )));
    }
    Ok(())
}

/// Per-coordinate powers `x_i^k` for `k ≤ max_degree`, so monomials cost `n`
/// multiplications each.
pub(crate) struct PowerTable {
    n: usize,
    stride: usize,
    pows: Vec<f64>,
}

impl PowerTable {
    pub(crate) fn new(x: &[f64], max_degree: u32) -> Self {
        let stride = max_degree as usize + 1;
        let mut pows = vec![1.0; x.len() * stride];
        for (i, &xi) in x.iter().enumerate() {
            for k in 1..stride {
                pows[i * stride + k] = pows[i * stride + k - 1] * xi;
            }
        }
        PowerTable {
            n: x.len(),
            stride,
            pows,
        }
    }

    #[inline]
    pub(crate) fn monomial(&self, alpha: &MultiIndex) -> f64 {
        let mut v = 1.0;
        for i in 0..self.n {
            v *= self.pows[i * self.stride + alpha.exponents[i] as usize];
        }
        v
    }
}

/// Homogeneous polynomial `g(x) = Σ_{|α|=d} g_α x^α` with even `d`, stored
/// densely over the canonical basis.
#[derive(Clone, Debug)]
pub struct HomogeneousPoly {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for HomogeneousPoly {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.coeffs == other.coeffs
    }
}

impl HomogeneousPoly {
    pub fn new(basis: Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        validate_dims(basis.n(), basis.degree())?;
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(HomogeneousPoly { basis, coeffs })
    }

    pub fn zeros(n: usize, d: u32) -> Result<Self> {
        let basis = Arc::new(enumerate_basis(n, d)?);
        let len = basis.len();
        Ok(HomogeneousPoly {
            basis,
            coeffs: vec![0.0; len],
        })
    }

    /// Build from `(exponents, coefficient)` terms; repeated terms add up.
    pub fn from_terms(n: usize, d: u32, terms: &[(&[u32], f64)]) -> Result<Self> {
        let mut g = HomogeneousPoly::zeros(n, d)?;
        for (exps, c) in terms {
            let alpha = MultiIndex::new(exps.to_vec());
            let i = g.basis.index_of(&alpha).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "term {alpha:?} is not of degree {d} in {n} variables"
                ))
            })?;
            g.coeffs[i] += c;
        }
        Ok(g)
    }

    /// Build from string-keyed coefficients (`"a1,...,an" -> value`); missing
    /// keys are zero.
    pub fn from_keyed<'a, I>(n: usize, d: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut g = HomogeneousPoly::zeros(n, d)?;
        for (key, c) in entries {
            let alpha: MultiIndex = key.parse()?;
            let i = g.basis.index_of(&alpha).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "key {key:?} is not a degree-{d} index in {n} variables"
                ))
            })?;
            g.coeffs[i] = c;
        }
        if g.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(g)
    }

    /// `Σ_i x_i^d`.
    pub fn power_sum(n: usize, d: u32) -> Result<Self> {
        let mut g = HomogeneousPoly::zeros(n, d)?;
        for i in 0..n {
            let mut e = vec![0u32; n];
            e[i] = d;
            let k = g
                .basis
                .index_of(&MultiIndex::new(e))
                .expect("pure power in basis");
            g.coeffs[k] = 1.0;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Option<f64> {
        self.basis.index_of(alpha).map(|i| self.coeffs[i])
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Same basis, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        HomogeneousPoly::new(self.basis.clone(), coeffs)
    }

    pub fn scaled(&self, s: f64) -> Self {
        HomogeneousPoly {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `λ·self + (1-λ)·other`.
    pub fn convex_combination(&self, other: &HomogeneousPoly, lambda: f64) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(HomogeneousPoly {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        })
    }

    pub(crate) fn check_same_space(&self, other: &HomogeneousPoly) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::InvalidArgument(format!(
                "polynomials live in different spaces (n={}, d={}) vs (n={}, d={})",
                self.n(),
                self.degree(),
                other.n(),
                other.degree()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "point has dimension {}, polynomial has {}",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let table = PowerTable::new(x, self.degree());
        self.eval_with(&table)
    }

    #[inline]
    pub(crate) fn eval_with(&self, table: &PowerTable) -> f64 {
        self.basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| c * table.monomial(a))
            .sum()
    }

    /// `g(x - a)`.
    pub fn eval_shifted(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(a)?;
        let y: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - ai).collect();
        Ok(self.eval_unchecked(&y))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let table = PowerTable::new(x, self.degree());
        let mut grad = vec![0.0; n];
        for (alpha, &c) in self.basis.indices().iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let e = alpha.exponents();
            for (i, gi) in grad.iter_mut().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut term = c * e[i] as f64;
                for (j, &ej) in e.iter().enumerate() {
                    let p = if j == i { ej - 1 } else { ej };
                    term *= table.pows[j * table.stride + p as usize];
                }
                *gi += term;
            }
        }
        grad
    }

    /// Coefficients keyed by the string form of each multi-index.
    pub fn keyed_coeffs(&self) -> Vec<(String, f64)> {
        self.basis
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(a, &c)| (a.to_string(), c))
            .collect()
    }
}

/// Deterministic sample of directions on `S^{n-1}`, roughly `budget` points:
/// a uniform angle grid for `n = 2`, a Fibonacci lattice for `n = 3` and a
/// product grid in hyperspherical angles for `n = 4`.
pub fn sphere_sample(n: usize, budget: usize) -> Vec<Vec<f64>> {
    let budget = budget.max(1);
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..budget)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / budget as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => fibonacci_sphere(budget),
        4 => {
            let m = (budget as f64).cbrt().ceil().max(2.0) as usize;
            let mut out = Vec::with_capacity(m * m * 2 * m);
            for i in 0..m {
                let psi = PI * (i as f64 + 0.5) / m as f64;
                for j in 0..m {
                    let theta = PI * (j as f64 + 0.5) / m as f64;
                    for k in 0..2 * m {
                        let phi = PI * k as f64 / m as f64;
                        out.push(vec![
                            psi.cos(),
                            psi.sin() * theta.cos(),
                            psi.sin() * theta.sin() * phi.cos(),
                            psi.sin() * theta.sin() * phi.sin(),
                        ]);
                    }
                }
            }
            out
        }
        _ => halton_sphere(n, budget),
    }
}

/// Fibonacci lattice on `S^2` with `count` points.
pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn halton_sphere(n: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let radical = |mut i: u64, b: u64| {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    };
    (1..=count as u64)
        .map(|k| {
            // Box-Muller pairs from Halton coordinates, then normalize.
            let mut v: Vec<f64> = (0..n)
                .map(|i| {
                    let u1 = radical(k, PRIMES[(2 * i) % 16]).max(1e-12);
                    let u2 = radical(k, PRIMES[(2 * i + 1) % 16]);
                    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect()
}

/// Approximate `min_{|θ|=1} g(θ)` by sampling `angular_budget` directions and
/// running projected gradient descent from the best sample.
///
/// The returned value never exceeds the minimum over the sample grid.
pub fn min_on_sphere(g: &HomogeneousPoly, angular_budget: usize) -> (f64, Vec<f64>) {
    let samples = sphere_sample(g.n(), angular_budget);
    let (mut best_val, mut best) = samples.into_iter().map(|s| (g.eval_unchecked(&s), s)).fold(
        (f64::INFINITY, Vec::new()),
        |acc, (v, s)| {
            if v < acc.0 {
                (v, s)
            } else {
                acc
            }
        },
    );
    if g.n() == 1 {
        return (best_val, best);
    }

    let mut step = 0.1;
    for _ in 0..500 {
        let grad = g.gradient_unchecked(&best);
        let radial: f64 = grad.iter().zip(&best).map(|(a, b)| a * b).sum();
        let tangent: Vec<f64> = grad
            .iter()
            .zip(&best)
            .map(|(gi, xi)| gi - radial * xi)
            .collect();
        let tnorm2: f64 = tangent.iter().map(|t| t * t).sum();
        if tnorm2.sqrt() <= 1e-14 * (1.0 + g.max_abs_coeff()) {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<f64> = best
                .iter()
                .zip(&tangent)
                .map(|(x, t)| x - step * t)
                .collect();
            let norm = cand.iter().map(|c| c * c).sum::<f64>().sqrt();
            cand.iter_mut().for_each(|c| *c /= norm);
            let val = g.eval_unchecked(&cand);
            if val <= best_val - 1e-4 * step * tnorm2 {
                best_val = val;
                best = cand;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (best_val, best)
}
