//! Contact-point certificates for a solved problem.
//!
//! At the optimum the multipliers define an atomic measure on the contact
//! points `{xᵢ : g*(xᵢ) = 1}` whose degree-`d` moments equal those of
//! `exp(-g*)`. Carathéodory's theorem bounds the number of atoms needed by
//! the dimension `C(n+d-1, d)` of the moment space.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gaussint::MomentVector;
use crate::linalg::null_vector;
use crate::polycore::{binomial, Basis, HomogeneousPoly, MultiIndex};
use crate::semialg::ConstraintSet;
use crate::solver::{solve_p0, SolveReport, SolverConfig};

/// Relative tolerance of the moment match and mass identity.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contact {
    /// Index into the constraint set.
    pub index: usize,
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KktCertificate {
    /// Reduced contact measure, at most `atom_bound` atoms.
    pub contacts: Vec<Contact>,
    /// All points carrying a positive multiplier.
    pub unreduced: Vec<Contact>,
    /// `‖Σ λᵢ v(xᵢ) - y‖∞ / y0` for the reduced measure.
    pub moment_residual: f64,
    pub mass: f64,
    /// `(n/d)·y0`.
    pub mass_expected: f64,
    pub atom_bound: usize,
    /// `max |g*(x) - 1|` over the contacts.
    pub level_residual: f64,
}

impl KktCertificate {
    /// Whether the moment match, mass identity and level condition all hold
    /// within [`CERTIFICATE_TOLERANCE`].
    pub fn is_valid(&self, y0: f64) -> bool {
        self.moment_residual <= CERTIFICATE_TOLERANCE
            && (self.mass - self.mass_expected).abs() <= CERTIFICATE_TOLERANCE * y0
            && self.level_residual <= CERTIFICATE_TOLERANCE
            && self.contacts.len() <= self.atom_bound
    }
}

/// Weighted monomial sums `Σ wⱼ v(xⱼ)` over `basis`.
pub fn weighted_power_sums(contacts: &[Contact], basis: &Basis) -> Vec<f64> {
    let mut out = vec![0.0; basis.len()];
    for c in contacts {
        for (o, v) in out.iter_mut().zip(basis.monomials(&c.point)) {
            *o += c.weight * v;
        }
    }
    out
}

fn moment_gap(contacts: &[Contact], target: &MomentVector) -> f64 {
    weighted_power_sums(contacts, target.basis_d())
        .iter()
        .zip(&target.moments_d)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

/// Certificate for a converged solve: contacts from the solver multipliers,
/// then reduced to at most `C(n+d-1, d)` atoms.
pub fn build_certificate(report: &SolveReport, cs: &ConstraintSet) -> Result<KktCertificate> {
    if report.dual_weights.len() != cs.len() {
        return Err(Error::InvalidArgument(
            "report does not belong to this constraint set".into(),
        ));
    }
    let g = &report.g_star;
    let unreduced: Vec<Contact> = report
        .dual_weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(index, &weight)| Contact {
            index,
            point: cs.points()[index].clone(),
            weight,
        })
        .collect();
    if unreduced.is_empty() {
        return Err(Error::CertificateFailure("no active contact points".into()));
    }
    let target = report.rule()?.moments(g, false)?;
    let contacts = caratheodory_reduce(&unreduced, &target)?;
    let y0 = target.y0;
    let level_residual = contacts
        .iter()
        .map(|c| (g.eval_unchecked(&c.point) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(KktCertificate {
        moment_residual: moment_gap(&contacts, &target) / y0,
        mass: contacts.iter().map(|c| c.weight).sum(),
        mass_expected: g.n() as f64 / g.degree() as f64 * y0,
        atom_bound: target.basis_d().len(),
        level_residual,
        contacts,
        unreduced,
    })
}

/// Reduce a nonnegative atomic measure to at most `C(n+d-1, d)` atoms with
/// the same degree-`d` moments, by repeatedly moving along a null vector of
/// the monomial matrix until a weight hits zero.
pub fn caratheodory_reduce(contacts: &[Contact], target: &MomentVector) -> Result<Vec<Contact>> {
    let basis = target.basis_d();
    let bound = binomial(
        basis.n() + basis.degree() as usize - 1,
        basis.degree() as usize,
    );
    if contacts.iter().any(|c| !(c.weight >= 0.0)) {
        return Err(Error::InvalidArgument(
            "contact weights must be nonnegative".into(),
        ));
    }
    let input_gap = moment_gap(contacts, target);
    let mut atoms: Vec<Contact> = contacts
        .iter()
        .filter(|c| c.weight > 0.0)
        .cloned()
        .collect();

    // Pivot within a window of bound+1 atoms, which always has a null vector.
    while atoms.len() > bound {
        let window = bound + 1;
        let cols: Vec<Vec<f64>> = atoms[..window]
            .iter()
            .map(|c| basis.monomials(&c.point))
            .collect();
        let m = DMatrix::from_fn(basis.len(), window, |r, c| cols[c][r]);
        let (mut z, sigma) =
            null_vector(&m).ok_or_else(|| Error::ReductionFailure("no null vector".into()))?;
        if sigma > 1e-9 * m.amax().max(1.0) {
            return Err(Error::ReductionFailure(format!(
                "monomial matrix has no null vector (smallest singular value {sigma:.3e})"
            )));
        }
        if z.iter().all(|&v| v <= 0.0) {
            z = -z;
        }
        let mut pivot = None;
        let mut ratio = f64::INFINITY;
        for (j, a) in atoms[..window].iter().enumerate() {
            if z[j] > 0.0 {
                let r = a.weight / z[j];
                if r < ratio {
                    ratio = r;
                    pivot = Some(j);
                }
            }
        }
        let pivot = pivot
            .ok_or_else(|| Error::ReductionFailure("null vector has no positive entry".into()))?;
        for (a, zj) in atoms[..window].iter_mut().zip(z.iter()) {
            a.weight = (a.weight - ratio * zj).max(0.0);
        }
        atoms.remove(pivot);
        atoms.retain(|a| a.weight > 0.0);
    }

    let gap = moment_gap(&atoms, target);
    let allowance = 10.0 * input_gap + 1e-12 * target.y0;
    if gap > allowance {
        return Err(Error::ReductionFailure(format!(
            "reduced measure drifted: moment gap {gap:.3e} exceeds {allowance:.3e}"
        )));
    }
    Ok(atoms)
}

/// `∫_ℝ t^k exp(-t^d) dt`: `2Γ((k+1)/d)/d` for even `k`, zero for odd.
pub fn one_dim_moment(k: u32, d: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        2.0 * gamma((k as f64 + 1.0) / d as f64) / d as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DballTerm {
    pub alpha: MultiIndex,
    pub power_sum: f64,
    pub target: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DballReport {
    pub terms: Vec<DballTerm>,
    pub max_residual: f64,
    pub certificate: KktCertificate,
}

/// For point sets whose optimum is the unit `d`-ball `Σ xᵢ^d`, compare the
/// certificate's weighted power sums with the product integrals
/// `Π ∫ t^{αᵢ} exp(-t^d) dt` for every `|α| = d`.
pub fn dball_contact_check(cs: &ConstraintSet, d: u32, cfg: &SolverConfig) -> Result<DballReport> {
    let report = solve_p0(cs, d, cfg)?;
    let ball = HomogeneousPoly::power_sum(cs.n(), d)?;
    let scale = ball.max_abs_coeff();
    let off = report
        .g_star
        .coeffs()
        .iter()
        .zip(ball.coeffs())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if off > CERTIFICATE_TOLERANCE * scale {
        return Err(Error::NotApplicable(format!(
            "optimum differs from the unit {d}-ball by {off:.3e}"
        )));
    }
    let certificate = build_certificate(&report, cs)?;
    let basis = report.g_star.basis();
    let sums = weighted_power_sums(&certificate.contacts, basis);
    let terms: Vec<DballTerm> = basis
        .indices()
        .iter()
        .zip(sums)
        .map(|(alpha, power_sum)| {
            let target: f64 = alpha
                .exponents()
                .iter()
                .map(|&k| one_dim_moment(k, d))
                .product();
            DballTerm {
                alpha: alpha.clone(),
                power_sum,
                target,
                residual: (power_sum - target).abs(),
            }
        })
        .collect();
    let max_residual = terms.iter().map(|t| t.residual).fold(0.0, f64::max);
    Ok(DballReport {
        terms,
        max_residual,
        certificate,
    })
}

/// Moment matrix `Σ wⱼ v(xⱼ) v(xⱼ)ᵀ` of a contact measure in the degree-`d`
/// basis; positive semidefinite with rank at most the number of atoms.
pub fn contact_gram(contacts: &[Contact], basis: &Basis) -> DMatrix<f64> {
    let l = basis.len();
    let mut out = DMatrix::zeros(l, l);
    for c in contacts {
        let v = DVector::from_vec(basis.monomials(&c.point));
        out.syger(c.weight, &v, &v, 1.0);
    }
    out
}
