use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hypothesis constants: spectral inequality `‖π_k φ‖ ≤ e^{c1 k^a}‖π_k φ‖_{L²(E)}`
/// and dissipative bound `‖(1-π_k)e^{-tH̃}φ‖ ≤ M e^{-c2 t k^b}‖φ‖` for
/// `H̃ = H + δ0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CriterionConstants<T> {
    pub c1: T,
    pub a: T,
    pub c2: T,
    pub b: T,
    #[serde(rename = "M")]
    pub m: T,
    pub delta0: T,
}

impl<T: Real> CriterionConstants<T> {
    pub fn new(c1: T, a: T, c2: T, b: T, m: T, delta0: T) -> Result<Self> {
        let k = Self { c1, a, c2, b, m, delta0 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !(positive(self.c1) && positive(self.a) && positive(self.c2) && positive(self.b)) {
            return Err(Error::InvalidConstants("c1, a, c2, b must be positive and finite".into()));
        }
        if !(self.m >= T::one() && self.m.is_finite()) {
            return Err(Error::InvalidConstants(format!("M = {} must be at least 1", self.m)));
        }
        if !(self.delta0 >= T::zero() && self.delta0.is_finite()) {
            return Err(Error::InvalidConstants(format!("delta0 = {} must be nonnegative", self.delta0)));
        }
        Ok(())
    }
}

/// All constants of the construction. Quantities that can leave the
/// floating-point range are carried as logarithms; the linear value next to
/// each is `exp` of it and may have under- or overflowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Certificate<T> {
    pub constants: CriterionConstants<T>,
    pub gamma: T,
    #[serde(rename = "N")]
    pub n_big: T,
    #[serde(rename = "CMgamma")]
    pub c_m_gamma: T,
    pub ln_c_m_gamma: T,
    #[serde(rename = "DMN")]
    pub d_m_n: T,
    pub ln_d_m_n: T,
    #[serde(rename = "A")]
    pub a_big: T,
    pub tau0: T,
    pub alpha0: T,
    pub ln_alpha0: T,
    #[serde(rename = "B")]
    pub b_big: T,
    pub ln_b: T,
    pub beta: T,
    pub ln_beta: T,
    #[serde(rename = "T")]
    pub t: T,
    pub alpha: T,
    #[serde(rename = "C", with = "crate::serde_ext::real")]
    pub c: T,
    pub ln_c: T,
}

/// `ln(e^x + e^y)`.
fn log_add_exp<T: Real>(x: T, y: T) -> T {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 + e^x)`.
fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<T: Real> Certificate<T> {
    /// `k(τ) = [(A/τ)^{1/b}]` for a given ratio `A/τ`.
    pub fn frequency_at_ratio(&self, ratio: T) -> T {
        ratio.powf(self.constants.b.recip()).floor()
    }

    /// `k(τ)`.
    pub fn frequency(&self, tau: T) -> T {
        self.frequency_at_ratio(self.a_big / tau)
    }

    /// `ln g` for `τ = A/ratio`: `ln τ - ln 4M² - 2 c1 [ratio^{1/b}]^a`.
    pub fn ln_g_at_ratio(&self, ratio: T) -> T {
        let k = &self.constants;
        let tau = self.a_big / ratio;
        tau.ln() - (T::lit(4.0) * k.m * k.m).ln() - T::lit(2.0) * k.c1 * self.frequency_at_ratio(ratio).powf(k.a)
    }

    /// `ln g(τ)`.
    pub fn ln_g(&self, tau: T) -> T {
        self.ln_g_at_ratio(self.a_big / tau)
    }

    pub fn g(&self, tau: T) -> T {
        self.ln_g(tau).exp()
    }

    /// `g(τ0/2)`, evaluated at the exact ratio `4N/3`.
    pub fn g_half_tau0(&self) -> T {
        self.ln_g_at_ratio(T::lit(4.0) * self.n_big / T::lit(3.0)).exp()
    }

    /// The certified triple `(T, α, C)`.
    pub fn claim(&self) -> Claim<T> {
        Claim { t: self.t, alpha: self.alpha, c: self.c, ln_c: self.ln_c }
    }
}

/// Runs the explicit constant chain and returns the certificate.
pub fn build_certificate<T: Real>(k: &CriterionConstants<T>) -> Result<Certificate<T>> {
    k.validate()?;
    let (c1, a, c2, b, m, delta0) = (k.c1, k.a, k.c2, k.b, k.m, k.delta0);
    let two = T::lit(2.0);
    let ln2 = two.ln();

    let gamma = ((a / b + a) * ln2).exp();
    let n_big = two.max(two.powf(b + two) * delta0 / c2);

    let ln_m2 = two * m.ln();
    let ratio_exp = gamma / (gamma - T::one());
    let ln_second = (gamma - T::one()).ln() - (T::lit(8.0).ln() + ln_m2)
        + ratio_exp * (T::lit(4.0).ln() + two * ln_m2 - gamma.ln());
    let ln_c_m_gamma = log_add_exp(ln_m2, ln_second);

    let growth = two * c1 * (two * n_big).powf(a / b);
    let ln_d_m_n = -growth - (T::lit(8.0).ln() + ln_m2 + n_big.ln());

    let a_big = two.powf(b + T::one()) / c2 * softplus(T::lit(25.0).ln() + ln_c_m_gamma - ln_d_m_n);
    let tau0 = T::lit(3.0) * a_big / (two * n_big);
    let ln_alpha0 = ln_d_m_n - c2 * two.powf(-(b + T::one())) * a_big - T::lit(50.0).ln();
    let ln_b = -c2 * two.powf(-b) * a_big - ln2;
    let shift = two * a_big * delta0 / n_big;
    let ln_beta = (T::lit(8.0) * n_big).ln() + ln_m2 + ln_alpha0 + tau0.ln() - a_big.ln() + growth + shift;
    if !(ln_beta < T::zero()) || !ln_beta.is_finite() {
        return Err(Error::BetaOutOfRange { ln_beta: ln_beta.as_f64() });
    }

    let mut cert = Certificate {
        constants: *k,
        gamma,
        n_big,
        c_m_gamma: ln_c_m_gamma.exp(),
        ln_c_m_gamma,
        d_m_n: ln_d_m_n.exp(),
        ln_d_m_n,
        a_big,
        tau0,
        alpha0: ln_alpha0.exp(),
        ln_alpha0,
        b_big: ln_b.exp(),
        ln_b,
        beta: ln_beta.exp(),
        ln_beta,
        t: a_big / n_big,
        alpha: (ln_beta / two).exp(),
        c: T::zero(),
        ln_c: T::zero(),
    };
    let ln_g_final = cert.ln_g_at_ratio(two * n_big);
    cert.ln_c = (shift - ln_g_final) / two;
    cert.c = cert.ln_c.exp();
    let k_final = cert.frequency_at_ratio(two * n_big);
    debug_assert!(k_final >= T::one());
    Ok(cert)
}

/// A weak-observability claim `‖e^{-TH}φ‖ ≤ C (∫₀ᵀ‖e^{-tH}φ‖²_{L²(E)})^{1/2} + α‖φ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Claim<T> {
    #[serde(rename = "T")]
    pub t: T,
    pub alpha: T,
    #[serde(rename = "C", with = "crate::serde_ext::real")]
    pub c: T,
    /// `ln C`; kept separately so astronomically large constants stay usable.
    pub ln_c: T,
}

impl<T: Real> Claim<T> {
    pub fn new(c: T, t: T, alpha: T) -> Result<Self> {
        let claim = Self { t, alpha, c, ln_c: c.ln() };
        claim.validate()?;
        Ok(claim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > T::zero() && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("claim T = {} must be positive", self.t)));
        }
        if !(self.alpha >= T::zero() && self.alpha < T::one()) {
            return Err(Error::InvalidArgument(format!("claim alpha = {} must lie in [0, 1)", self.alpha)));
        }
        if !(self.ln_c.is_finite() || self.ln_c == T::infinity()) {
            return Err(Error::InvalidArgument("claim C must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> CriterionConstants<f64> {
        CriterionConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn simple_closed_forms() {
        let c = build_certificate(&unit()).unwrap();
        assert_eq!(c.gamma, 4.0);
        assert_eq!(c.n_big, 2.0);
        assert!((c.c_m_gamma - 1.375).abs() < 1e-15);
        assert!((c.tau0 - 1.5 * c.a_big / 2.0).abs() < 1e-12);
        assert!(c.t < c.tau0);
        assert!(c.beta > 0.0 && c.beta < 1.0);
        assert!((c.alpha * c.alpha - c.beta).abs() < 1e-15);
    }

    #[test]
    fn log_space_matches_linear_when_representable() {
        let k = unit();
        let c = build_certificate(&k).unwrap();
        let linear = 8.0 * c.n_big * c.alpha0 * c.tau0 / c.a_big * (2.0 * k.c1 * (2.0 * c.n_big)).exp();
        assert!((linear - c.beta).abs() <= 1e-12 * c.beta);
    }

    #[test]
    fn g_is_below_its_prefactor() {
        let c = build_certificate(&unit()).unwrap();
        for i in 1..50 {
            let tau = c.tau0 * i as f64 / 50.0;
            assert!(c.g(tau) <= tau / 4.0);
            assert!(c.frequency(tau) >= 1.0);
        }
    }

    #[test]
    fn monotone_in_hypotheses() {
        let base = build_certificate(&unit()).unwrap();
        let bigger_c1 = build_certificate(&CriterionConstants { c1: 1.5, ..unit() }).unwrap();
        let smaller_c2 = build_certificate(&CriterionConstants { c2: 0.5, ..unit() }).unwrap();
        assert!(bigger_c1.a_big > base.a_big && bigger_c1.t > base.t);
        assert!(smaller_c2.a_big > base.a_big && smaller_c2.t > base.t);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(CriterionConstants::new(0.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(CriterionConstants::new(1.0, 1.0, 1.0, 1.0, 0.5, 0.0).is_err());
        assert!(CriterionConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn huge_constants_stay_finite_in_log_space() {
        let k = CriterionConstants::<f64>::new(400.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let c = build_certificate(&k).unwrap();
        assert!(c.ln_c.is_finite() && c.ln_alpha0.is_finite());
        assert!(c.t.is_finite() && c.ln_beta.is_finite() && c.ln_beta < 0.0);
        assert!(c.alpha >= 0.0 && c.alpha < 1.0);
    }
}
