use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{Certificate, Claim};
use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::operators::SpectralDecomposition;
use crate::quadrature::{simpson, Quadrature, SimpsonOptions};
use crate::rng::{random_unit_coefficients, trial_rng};
use crate::scalar::Real;

/// Relative slack granted to the weak-observability comparison.
pub const WEAK_OBSERVABILITY_REL_TOL: f64 = 1e-7;

/// One initial state `φ = Σ a_j φ_j` and its free evolution under `H + shift`.
pub(crate) struct Trajectory<'a, T: Real> {
    dec: &'a SpectralDecomposition<T>,
    coeffs: Vec<T>,
    shift: T,
}

impl<'a, T: Real> Trajectory<'a, T> {
    pub fn new(dec: &'a SpectralDecomposition<T>, coeffs: Vec<T>, shift: T) -> Self {
        Self { dec, coeffs, shift }
    }

    fn evolved(&self, t: T) -> Vec<T> {
        self.coeffs
            .iter()
            .zip(self.dec.eigenvalues())
            .map(|(&a, &lam)| a * (-t * (lam + self.shift)).exp())
            .collect()
    }

    /// `‖e^{-t(H+shift)}φ‖²`.
    pub fn energy(&self, t: T) -> T {
        self.evolved(t).iter().map(|&v| v * v).sum()
    }

    /// `‖e^{-t(H+shift)}φ‖²_{L²(E)}`.
    pub fn observed_energy(&self, t: T, set: &SetIndicator<T>) -> T {
        let f = self.dec.synthesize(&self.evolved(t)).expect("coefficient length");
        let r = f.restrict_norm(set).expect("same domain");
        r * r
    }

    /// `∫_a^b ‖e^{-t(H+shift)}φ‖²_{L²(E)} dt`.
    pub fn observed_integral(&self, a: T, b: T, set: &SetIndicator<T>, opts: &SimpsonOptions) -> Quadrature<T> {
        simpson(|t| self.observed_energy(t, set), a, b, opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TauResult<T> {
    pub tau: T,
    /// `k(τ)`.
    pub frequency: T,
    pub g_tau: T,
    pub g_half_tau: T,
    /// Largest `LHS - RHS` over trials.
    pub max_violation: T,
    pub worst_trial: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RecurrenceReport<T> {
    pub trials: usize,
    pub seed: u64,
    pub per_tau: Vec<TauResult<T>>,
    pub max_violation: T,
    pub violations: usize,
    pub max_quadrature_error: T,
}

impl<T: Real> RecurrenceReport<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks, for random unit `φ` and each `τ`,
/// `g(τ)‖e^{-τH̃}φ‖² - g(τ/2)‖φ‖² ≤ ∫_{τ/2}^{τ}‖e^{-tH̃}φ‖²_{L²(E)}dt + α0 τ‖φ‖²`.
pub fn recurrence_check<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    cert: &Certificate<T>,
    tau_samples: &[T],
    trials: usize,
    seed: u64,
) -> Result<RecurrenceReport<T>> {
    dec.domain().check_same(set.domain())?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    for &tau in tau_samples {
        if !(tau > T::zero() && tau < cert.tau0) {
            return Err(Error::TauOutOfRange { tau: tau.as_f64(), tau0: cert.tau0.as_f64() });
        }
    }
    let longest = tau_samples.iter().fold(T::zero(), |m, &t| m.max(t)) / T::lit(2.0);
    let opts = SimpsonOptions { min_subintervals: 64, ..SimpsonOptions::default() }
        .graded_for(stiffest_rate(dec, cert.constants.delta0).as_f64(), longest.as_f64());
    let shift = cert.constants.delta0;
    let alpha0 = cert.alpha0;
    let per_trial: Vec<Vec<(T, T)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let coeffs = random_unit_coefficients::<T>(dec.len(), &mut trial_rng(seed, trial as u64));
            let traj = Trajectory::new(dec, coeffs, shift);
            tau_samples
                .iter()
                .map(|&tau| {
                    let half = tau / T::lit(2.0);
                    let lhs = cert.g(tau) * traj.energy(tau) - cert.g(half);
                    let q = traj.observed_integral(half, tau, set, &opts);
                    let rhs = q.value + alpha0 * tau;
                    (lhs - rhs, q.error_estimate)
                })
                .collect()
        })
        .collect();

    let mut per_tau = Vec::with_capacity(tau_samples.len());
    let mut max_err = T::zero();
    for (i, &tau) in tau_samples.iter().enumerate() {
        let half = tau / T::lit(2.0);
        let mut worst = (-T::infinity(), 0usize);
        let mut violations = 0;
        for (trial, row) in per_trial.iter().enumerate() {
            let (v, err) = row[i];
            max_err = max_err.max(err);
            let tol = err + T::lit(1e-12) * (cert.g(half) + cert.g(tau));
            if v > tol {
                violations += 1;
            }
            if v > worst.0 {
                worst = (v, trial);
            }
        }
        per_tau.push(TauResult {
            tau,
            frequency: cert.frequency(tau),
            g_tau: cert.g(tau),
            g_half_tau: cert.g(half),
            max_violation: worst.0,
            worst_trial: worst.1,
            violations,
        });
    }
    let max_violation = per_tau.iter().map(|r| r.max_violation).fold(-T::infinity(), T::max);
    let violations = per_tau.iter().map(|r| r.violations).sum();
    Ok(RecurrenceReport { trials, seed, per_tau, max_violation, violations, max_quadrature_error: max_err })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WeakObservabilityReport<T> {
    pub claim: Claim<T>,
    pub trials: usize,
    pub seed: u64,
    /// Smallest `RHS - LHS` over trials (`+∞` when every right side overflows).
    #[serde(with = "crate::serde_ext::real")]
    pub min_margin: T,
    pub worst_trial: usize,
    pub violations: usize,
    pub max_quadrature_error: T,
    pub min_nodes: usize,
}

impl<T: Real> WeakObservabilityReport<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Outcome of one weak-observability comparison.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Comparison<T> {
    pub lhs: T,
    pub observation: Quadrature<T>,
    pub margin: T,
    pub violated: bool,
}

/// Compares `‖e^{-TH}φ‖` with `C(∫₀ᵀ‖e^{-tH}φ‖²_E)^{1/2} + α‖φ‖`.
pub(crate) fn compare<T: Real>(traj: &Trajectory<'_, T>, set: &SetIndicator<T>, claim: &Claim<T>, opts: &SimpsonOptions) -> Comparison<T> {
    let norm0 = traj.energy(T::zero()).sqrt();
    let lhs = traj.energy(claim.t).sqrt();
    let q = traj.observed_integral(T::zero(), claim.t, set, opts);
    let integral = q.value.max(T::zero());
    let ln_obs = claim.ln_c + integral.ln() / T::lit(2.0);
    let observed = if ln_obs > T::lit(600.0) { T::infinity() } else { ln_obs.exp() };
    let rhs = observed + claim.alpha * norm0;
    let margin = rhs - lhs;
    let quad_slack = if integral > T::zero() && observed.is_finite() {
        observed * q.error_estimate / (T::lit(2.0) * integral)
    } else {
        T::zero()
    };
    let tol = T::lit(WEAK_OBSERVABILITY_REL_TOL) * lhs.max(claim.alpha * norm0) + quad_slack;
    Comparison { lhs, observation: q, margin, violated: margin < -tol }
}

/// Largest decay rate `2|λ + shift|` appearing in an observed energy.
pub(crate) fn stiffest_rate<T: Real>(dec: &SpectralDecomposition<T>, shift: T) -> T {
    dec.eigenvalues().iter().fold(T::zero(), |m, &l| m.max(T::lit(2.0) * (l + shift).abs()))
}

/// Random-state check of the weak observability inequality for `claim`.
pub fn weak_observability_check<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    claim: &Claim<T>,
    trials: usize,
    seed: u64,
) -> Result<WeakObservabilityReport<T>> {
    dec.domain().check_same(set.domain())?;
    claim.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let opts = SimpsonOptions::default().graded_for(stiffest_rate(dec, T::zero()).as_f64(), claim.t.as_f64());
    let results: Vec<Comparison<T>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let coeffs = random_unit_coefficients::<T>(dec.len(), &mut trial_rng(seed, trial as u64));
            compare(&Trajectory::new(dec, coeffs, T::zero()), set, claim, &opts)
        })
        .collect();
    let mut report = WeakObservabilityReport {
        claim: *claim,
        trials,
        seed,
        min_margin: T::infinity(),
        worst_trial: 0,
        violations: 0,
        max_quadrature_error: T::zero(),
        min_nodes: usize::MAX,
    };
    for (trial, r) in results.iter().enumerate() {
        if r.margin < report.min_margin {
            report.min_margin = r.margin;
            report.worst_trial = trial;
        }
        report.violations += usize::from(r.violated);
        report.max_quadrature_error = report.max_quadrature_error.max(r.observation.error_estimate);
        report.min_nodes = report.min_nodes.min(r.observation.nodes);
    }
    Ok(report)
}
