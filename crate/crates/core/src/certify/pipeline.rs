use serde::{Deserialize, Serialize};

use super::checks::{recurrence_check, weak_observability_check, RecurrenceReport, WeakObservabilityReport};
use super::constants::{build_certificate, Certificate, CriterionConstants};
use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::operators::{DissipativeReport, OperatorSpec, SpectralDecomposition};
use crate::scalar::Real;
use crate::specineq::{constant_curve, fit_growth, verify_spectral_hypothesis, GrowthFit, GrowthModel, HypothesisReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Multiplier applied to the fitted `c1`.
    pub safety_factor: f64,
    pub recurrence_trials: usize,
    pub tau_count: usize,
    pub weak_trials: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { safety_factor: 1.1, recurrence_trials: 500, tau_count: 8, weak_trials: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EndToEnd<T> {
    pub constants: CriterionConstants<T>,
    pub certificate: Certificate<T>,
    pub fit: GrowthFit<T>,
    /// Largest `ln C(k) / k^a` over the tested thresholds.
    pub envelope_c1: T,
    pub hypothesis: HypothesisReport<T>,
    pub dissipative: DissipativeReport<T>,
    pub recurrence: RecurrenceReport<T>,
    pub weak_observability: WeakObservabilityReport<T>,
    pub options: PipelineOptions,
}

impl<T: Real> EndToEnd<T> {
    pub fn passed(&self) -> bool {
        self.hypothesis.holds && self.recurrence.passed() && self.weak_observability.passed()
    }
}

/// Exponent `a` used for the spectral hypothesis of each operator family:
/// `1/s` for the fractional Laplacian, `2` for the Hermite and Schrödinger
/// kinds (dominating their `k ln k` growth).
pub fn spectral_exponent<T: Real>(spec: &OperatorSpec<T>) -> T {
    match spec {
        OperatorSpec::FractionalLaplacian { s, .. } => s.recip(),
        _ => T::lit(2.0),
    }
}

/// `τ` values in `(max(A/(k_max+1), τ0/16), τ0)`, geometrically spaced, so that
/// `k(τ) ≤ k_max` stays inside the verified range.
pub fn tau_samples<T: Real>(cert: &Certificate<T>, k_max: usize, count: usize) -> Vec<T> {
    let b = cert.constants.b;
    let floor_tau = cert.a_big / T::from_count(k_max + 1).powf(b);
    let lo = floor_tau.max(cert.tau0 / T::lit(16.0));
    let hi = cert.tau0;
    if count == 0 || !(lo < hi) {
        return vec![];
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| {
            let u = (T::from_count(i) + T::lit(0.5)) / T::from_count(count);
            lo * (ratio * u).exp()
        })
        .collect()
}

/// Fits the spectral hypothesis on `set`, builds the certificate and checks it.
pub fn certify_end_to_end<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    k_max: usize,
    options: &PipelineOptions,
) -> Result<EndToEnd<T>> {
    if k_max < 4 {
        return Err(Error::InvalidArgument("k_max must be at least 4 to fit a growth law".into()));
    }
    let a = spectral_exponent(dec.spec());
    let ks: Vec<T> = (1..=k_max).map(T::from_count).collect();
    let curve = constant_curve(dec, set, &ks)?;
    if let Some(i) = curve.constants.iter().position(|c| !c.is_finite()) {
        return Err(Error::HypothesisUnverifiable(format!(
            "spectral constant is infinite at k = {} (degenerate Gram matrix on E)",
            i + 1
        )));
    }
    let fit = fit_growth(&curve, GrowthModel::ExpPower { a })?;
    let envelope_c1 = ks
        .iter()
        .zip(&curve.constants)
        .map(|(&k, &c)| c.ln() / k.powf(a))
        .fold(T::zero(), T::max);
    let fitted = match fit.model {
        crate::specineq::FittedModel::ExpPower { c1, .. } => c1,
        crate::specineq::FittedModel::KLogK { .. } => unreachable!("exp-power model requested"),
    };
    let c1 = (T::lit(options.safety_factor) * fitted.max(envelope_c1)).max(T::lit(1e-3));
    let hypothesis = verify_spectral_hypothesis(dec, set, k_max, c1, a)?;
    if !hypothesis.holds {
        return Err(Error::HypothesisUnverifiable(format!(
            "fitted c1 = {c1} fails at k = {}",
            hypothesis.worst_k
        )));
    }

    let delta0 = T::zero().max(-dec.eigenvalues()[0]);
    let one = T::one();
    let constants = CriterionConstants::new(c1, a, one, one, one, delta0)?;
    let dissipative = dissipative_sweep(dec, k_max, options.seed)?;
    let certificate = build_certificate(&constants)?;

    let taus = tau_samples(&certificate, k_max, options.tau_count);
    let recurrence = recurrence_check(dec, set, &certificate, &taus, options.recurrence_trials, options.seed)?;
    let weak_observability =
        weak_observability_check(dec, set, &certificate.claim(), options.weak_trials, options.seed)?;
    Ok(EndToEnd {
        constants,
        certificate,
        fit: GrowthFit { ..fit },
        envelope_c1,
        hypothesis,
        dissipative,
        recurrence,
        weak_observability,
        options: *options,
    })
}

/// Worst dissipative ratio over `k ∈ [1, k_max]` and `t ∈ {0.1, 0.5, 1}`.
fn dissipative_sweep<T: Real>(dec: &SpectralDecomposition<T>, k_max: usize, seed: u64) -> Result<DissipativeReport<T>> {
    let ts = [T::lit(0.1), T::lit(0.5), T::one()];
    let mut worst: Option<DissipativeReport<T>> = None;
    for k in 1..=k_max {
        let r = dec.dissipative_margin(T::from_count(k), &ts, 100, seed)?;
        if worst.as_ref().is_none_or(|w| r.max_ratio > w.max_ratio) {
            worst = Some(r);
        }
    }
    Ok(worst.expect("k_max >= 1"))
}
