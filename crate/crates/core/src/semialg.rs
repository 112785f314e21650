//! Descriptions of the set `K` and their discretization into a finite list of
//! constraint points `g(xᵢ) ≤ 1`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::{HomogeneousPoly, MultiIndex};

/// Bisection steps used to pull each sample onto `∂K`.
pub const BOUNDARY_BISECTION_STEPS: usize = 48;

/// Points closer than this (Euclidean) are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

/// Rejection sampling gives up after `budget × MAX_ATTEMPT_FACTOR` draws.
pub const MAX_ATTEMPT_FACTOR: usize = 100;

/// Seed offset used by [`inclusion_check`] so the audit never reuses the
/// constraint sample.
const AUDIT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// General polynomial `Σ c_α x^α` (any degrees), used for the inequalities
/// `w_j(x) ≥ 0` describing `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: Vec<(MultiIndex, f64)>,
}

impl Polynomial {
    pub fn new(n: usize, terms: Vec<(MultiIndex, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be at least 1".into(),
            ));
        }
        let mut merged: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (alpha, c) in terms {
            if alpha.dim() != n {
                return Err(Error::InvalidArgument(format!(
                    "term {alpha:?} has dimension {}, expected {n}",
                    alpha.dim()
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
            *merged.entry(alpha).or_insert(0.0) += c;
        }
        Ok(Polynomial {
            n,
            terms: merged.into_iter().collect(),
        })
    }

    /// From `"a1,...,an" -> coefficient` entries.
    pub fn from_keyed<'a, I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let terms = entries
            .into_iter()
            .map(|(k, c)| Ok((k.parse::<MultiIndex>()?, c)))
            .collect::<Result<Vec<_>>>()?;
        Polynomial::new(n, terms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(MultiIndex, f64)] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.eval(x)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.n];
        for (alpha, c) in &self.terms {
            let e = alpha.exponents();
            for (i, gi) in grad.iter_mut().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut term = c * e[i] as f64;
                for (j, &ej) in e.iter().enumerate() {
                    let p = if j == i { ej - 1 } else { ej };
                    term *= x[j].powi(p as i32);
                }
                *gi += term;
            }
        }
        grad
    }
}

/// The compact set `K`, either as points or as `{x ∈ box : w_j(x) ≥ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub enum KDescription {
    Points(Vec<Vec<f64>>),
    Semialgebraic {
        inequalities: Vec<Polynomial>,
        bbox: Vec<(f64, f64)>,
    },
}

impl KDescription {
    pub fn n(&self) -> usize {
        match self {
            KDescription::Points(p) => p.first().map_or(0, Vec::len),
            KDescription::Semialgebraic { bbox, .. } => bbox.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KDescription::Points(pts) => {
                let n = self.n();
                if pts.is_empty() || n == 0 {
                    return Err(Error::EmptySet("point list is empty".into()));
                }
                if pts.iter().any(|p| p.len() != n) {
                    return Err(Error::InvalidArgument(
                        "points have mixed dimensions".into(),
                    ));
                }
                if pts.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite coordinate".into()));
                }
            }
            KDescription::Semialgebraic { inequalities, bbox } => {
                if bbox.is_empty() {
                    return Err(Error::InvalidArgument("bounding box has no extents".into()));
                }
                for &(lo, hi) in bbox {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::InvalidArgument(format!(
                            "bad box extent [{lo}, {hi}]"
                        )));
                    }
                }
                if inequalities.iter().any(|w| w.n() != bbox.len()) {
                    return Err(Error::InvalidArgument(
                        "inequality dimension differs from box".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// All `w_j(x) ≥ 0` and `x` inside the box (always true for point lists).
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            KDescription::Points(_) => true,
            KDescription::Semialgebraic { inequalities, bbox } => {
                bbox.iter().zip(x).all(|(&(lo, hi), &v)| lo <= v && v <= hi)
                    && inequalities.iter().all(|w| w.eval(x) >= 0.0)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Native,
    Sampled,
}

/// Finite point list standing in for `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    points: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl ConstraintSet {
    /// Validates and deduplicates (within [`DEDUP_TOLERANCE`]), keeping the
    /// first occurrence of each point in input order.
    pub fn new(points: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        KDescription::Points(points.clone()).validate()?;
        Ok(ConstraintSet {
            points: dedup(points),
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `{xᵢ - a}`.
    pub fn translated(&self, a: &[f64]) -> ConstraintSet {
        ConstraintSet {
            points: self
                .points
                .iter()
                .map(|p| p.iter().zip(a).map(|(x, s)| x - s).collect())
                .collect(),
            provenance: self.provenance,
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n()];
        for p in &self.points {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi;
            }
        }
        c.iter_mut().for_each(|ci| *ci /= self.len() as f64);
        c
    }
}

fn dedup(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i][0].total_cmp(&points[j][0]).then(i.cmp(&j)));
    let mut drop = vec![false; points.len()];
    for (pos, &i) in order.iter().enumerate() {
        if drop[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if points[j][0] - points[i][0] > DEDUP_TOLERANCE {
                break;
            }
            if drop[j] {
                continue;
            }
            let dist2: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist2.sqrt() <= DEDUP_TOLERANCE {
                // keep whichever came first in the input
                drop[i.max(j)] = true;
            }
        }
    }
    points
        .into_iter()
        .zip(drop)
        .filter_map(|(p, d)| (!d).then_some(p))
        .collect()
}

/// Turn `K` into constraint points. Point lists pass through; a
/// semialgebraic `K` is rejection-sampled in its box (seeded), and each kept
/// sample additionally contributes a copy pulled onto the zero set of its
/// most binding inequality.
pub fn to_constraints(k: &KDescription, budget: usize, seed: u64) -> Result<ConstraintSet> {
    k.validate()?;
    if budget == 0 {
        return Err(Error::InvalidArgument(
            "sampling budget must be >= 1".into(),
        ));
    }
    let (inequalities, bbox) = match k {
        KDescription::Points(pts) => return ConstraintSet::new(pts.clone(), Provenance::Native),
        KDescription::Semialgebraic { inequalities, bbox } => (inequalities, bbox),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bbox.len();
    let mut kept = Vec::with_capacity(budget);
    let mut x = vec![0.0; n];
    for _ in 0..budget * MAX_ATTEMPT_FACTOR {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bbox) {
            *xi = rng.random_range(lo..=hi);
        }
        if inequalities.iter().all(|w| w.eval(&x) >= 0.0) {
            kept.push(x.clone());
            if kept.len() == budget {
                break;
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptySet(format!(
            "no sample satisfied the inequalities after {} attempts",
            budget * MAX_ATTEMPT_FACTOR
        )));
    }

    let refined: Vec<Vec<f64>> = kept
        .iter()
        .filter_map(|p| project_to_boundary(k, inequalities, p, BOUNDARY_BISECTION_STEPS))
        .collect();
    kept.extend(refined);
    ConstraintSet::new(kept, Provenance::Sampled)
}

/// Move from `x` along the descent direction of the most binding `w_j` and
/// bisect between the last feasible and first infeasible point.
fn project_to_boundary(
    k: &KDescription,
    ws: &[Polynomial],
    x: &[f64],
    steps: usize,
) -> Option<Vec<f64>> {
    if ws.is_empty() {
        return None;
    }
    let (w, grad) = ws
        .iter()
        .map(|w| (w.eval(x), w.gradient(x)))
        .min_by(|a, b| a.0.total_cmp(&b.0))?;
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if gnorm == 0.0 || w <= 0.0 {
        return None;
    }
    let dir: Vec<f64> = grad.iter().map(|g| -g / gnorm).collect();
    let at = |s: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(xi, di)| xi + s * di).collect() };

    let mut hi = (w / gnorm).max(1e-12);
    let mut found = false;
    for _ in 0..60 {
        if !k.contains(&at(hi)) {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return None;
    }
    let mut lo = 0.0;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if k.contains(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0).then(|| at(lo))
}

/// Largest `g(x - a) - 1` over an audit sample of `K`, and where it occurs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionAudit {
    pub max_violation: f64,
    pub witness: Vec<f64>,
    pub sample_size: usize,
}

/// Audit `K ⊂ {g(x - a) ≤ 1}`. Point lists are checked exhaustively;
/// semialgebraic sets are resampled with `audit_budget` points from a seed
/// derived from (and distinct from) `seed`.
pub fn inclusion_check(
    g: &HomogeneousPoly,
    a: &[f64],
    k: &KDescription,
    audit_budget: usize,
    seed: u64,
) -> Result<InclusionAudit> {
    if a.len() != g.n() || k.n() != g.n() {
        return Err(Error::InvalidArgument(
            "dimension mismatch between g, a and K".into(),
        ));
    }
    let sample = to_constraints(k, audit_budget, seed.wrapping_add(AUDIT_SEED_OFFSET))?;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for p in sample.points() {
        let v = g.eval_shifted(p, a)? - 1.0;
        if v > best.0 {
            best = (v, p.clone());
        }
    }
    Ok(InclusionAudit {
        max_violation: best.0,
        witness: best.1,
        sample_size: sample.len(),
    })
}
