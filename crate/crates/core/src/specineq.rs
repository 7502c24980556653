//! Best constants in the spectral inequality `‖π_k φ‖ ≤ C(k,E) ‖π_k φ‖_{L²(E)}`
//! and fits of their growth in `k`.
//!
//! With `v_1..v_m` an orthonormal basis of `range(π_k)`, the best constant is
//! `1/√μ_min(G_E)` where `G_E[i][j] = ⟨v_i, v_j⟩_{L²(E)}`. This is exact for
//! the discretized problem.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::operators::{restricted_gram_of, SpectralDecomposition};
use crate::scalar::Real;

/// `μ_min` at or below this is treated as a degenerate Gram matrix.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BestConstant<T> {
    pub k: T,
    /// `dim range(π_k)`.
    pub dimension: usize,
    #[serde(with = "crate::serde_ext::real")]
    pub constant: T,
    pub min_gram_eigenvalue: T,
    /// Eigenbasis coefficients of a minimizing function (empty if `dimension = 0`).
    pub witness: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", bound = "T: Real")]
pub enum GrowthModel<T> {
    /// `ln C = c1 k^a` with `a` fixed.
    ExpPower { a: T },
    /// `ln C = (n/2) k ln k + linear k` with the `k ln k` slope fixed.
    KLogK { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", bound = "T: Real")]
pub enum FittedModel<T> {
    ExpPower { c1: T, a: T },
    KLogK { coeff: T, linear: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GrowthFit<T> {
    pub model: FittedModel<T>,
    /// Root-mean-square residual in `ln C`.
    pub residual: T,
    pub points: usize,
}

impl<T: Real> FittedModel<T> {
    /// Model value of `ln C(k)`.
    pub fn ln_constant(&self, k: T) -> T {
        match *self {
            Self::ExpPower { c1, a } => c1 * k.powf(a),
            Self::KLogK { coeff, linear } => {
                let klogk = if k > T::zero() { k * k.ln() } else { T::zero() };
                coeff * klogk + linear * k
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectralConstantCurve<T> {
    pub thresholds: Vec<T>,
    pub dimensions: Vec<usize>,
    #[serde(with = "crate::serde_ext::real_vec")]
    pub constants: Vec<T>,
    pub fit: Option<GrowthFit<T>>,
}

impl<T: Real> SpectralConstantCurve<T> {
    pub fn finite_points(&self) -> usize {
        self.constants.iter().filter(|c| c.is_finite()).count()
    }

    /// `k,C,lnC` rows with full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,C,lnC\n");
        for (k, c) in self.thresholds.iter().zip(&self.constants) {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", k.as_f64(), c.as_f64(), c.as_f64().ln()));
        }
        out
    }
}

/// Best constant from a restricted Gram matrix.
fn constant_from_gram<T: Real>(k: T, gram: DMatrix<T>) -> Result<BestConstant<T>> {
    let m = gram.nrows();
    if m == 0 {
        return Ok(BestConstant { k, dimension: 0, constant: T::one(), min_gram_eigenvalue: T::one(), witness: vec![] });
    }
    let eig = SymmetricEigen::try_new(gram, T::EPS, 0)
        .ok_or_else(|| Error::Decomposition("Gram eigen-solve did not converge".into()))?;
    let (imin, &mu) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty");
    let witness = eig.eigenvectors.column(imin).iter().copied().collect();
    let constant = if mu <= T::lit(DEGENERACY_TOLERANCE) { T::infinity() } else { mu.sqrt().recip() };
    Ok(BestConstant { k, dimension: m, constant, min_gram_eigenvalue: mu, witness })
}

/// Gram matrix of the first `count` eigenfunctions over `set`, assembled on
/// the smaller of `E` and its complement.
fn gram_over<T: Real>(dec: &SpectralDecomposition<T>, count: usize, set: &SetIndicator<T>) -> Result<DMatrix<T>> {
    dec.domain().check_same(set.domain())?;
    let cells = set.domain().cells();
    if set.is_full() {
        return Ok(DMatrix::identity(count, count));
    }
    let b = dec.basis_matrix(count);
    if set.count() * 2 <= cells {
        Ok(restricted_gram_of(&b, set))
    } else {
        let outside = restricted_gram_of(&b, &set.complement());
        Ok(DMatrix::identity(count, count) - outside)
    }
}

fn check_resolution<T: Real>(dec: &SpectralDecomposition<T>, m: usize) -> Result<()> {
    let cells = dec.domain().cells();
    if 2 * m > cells {
        return Err(Error::UnderResolved { dimension: m, cells });
    }
    Ok(())
}

/// `C(k, E)`; `1` for an empty projection range, `+∞` for a degenerate Gram matrix.
pub fn best_constant<T: Real>(dec: &SpectralDecomposition<T>, k: T, set: &SetIndicator<T>) -> Result<BestConstant<T>> {
    let m = dec.range_dimension(k);
    check_resolution(dec, m)?;
    constant_from_gram(k, gram_over(dec, m, set)?)
}

/// `C(k, E)` for every threshold, sharing one Gram matrix across thresholds.
pub fn constant_curve<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    thresholds: &[T],
) -> Result<SpectralConstantCurve<T>> {
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("thresholds must be strictly ascending".into()));
    }
    let dims: Vec<usize> = thresholds.iter().map(|&k| dec.range_dimension(k)).collect();
    let m_max = dims.iter().copied().max().unwrap_or(0);
    check_resolution(dec, m_max)?;
    let gram = gram_over(dec, m_max, set)?;
    let constants = thresholds
        .par_iter()
        .zip(&dims)
        .map(|(&k, &m)| constant_from_gram(k, gram.view((0, 0), (m, m)).into_owned()).map(|b| b.constant))
        .collect::<Result<Vec<T>>>()?;
    Ok(SpectralConstantCurve { thresholds: thresholds.to_vec(), dimensions: dims, constants, fit: None })
}

/// Least-squares fit of `ln C(k)` over the finite points of `curve`.
pub fn fit_growth<T: Real>(curve: &SpectralConstantCurve<T>, model: GrowthModel<T>) -> Result<GrowthFit<T>> {
    let pts: Vec<(T, T)> = curve
        .thresholds
        .iter()
        .zip(&curve.constants)
        .filter(|(_, c)| c.is_finite())
        .map(|(&k, &c)| (k, c.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let through_origin = |xs: &[(T, T)]| {
        let sxy: T = xs.iter().map(|&(x, y)| x * y).sum();
        let sxx: T = xs.iter().map(|&(x, _)| x * x).sum();
        if sxx > T::zero() {
            sxy / sxx
        } else {
            T::zero()
        }
    };
    let fitted = match model {
        GrowthModel::ExpPower { a } => {
            if !(a > T::zero()) {
                return Err(Error::InvalidArgument("exponent a must be positive".into()));
            }
            let xs: Vec<(T, T)> = pts.iter().map(|&(k, y)| (k.powf(a), y)).collect();
            FittedModel::ExpPower { c1: through_origin(&xs), a }
        }
        GrowthModel::KLogK { n } => {
            let coeff = T::from_count(n) / T::lit(2.0);
            let probe = FittedModel::KLogK { coeff, linear: T::zero() };
            let xs: Vec<(T, T)> = pts.iter().map(|&(k, y)| (k, y - probe.ln_constant(k))).collect();
            FittedModel::KLogK { coeff, linear: through_origin(&xs) }
        }
    };
    let sq: T = pts.iter().map(|&(k, y)| (y - fitted.ln_constant(k)) * (y - fitted.ln_constant(k))).sum();
    let residual = (sq / T::from_count(pts.len())).sqrt();
    Ok(GrowthFit { model: fitted, residual, points: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HypothesisReport<T> {
    pub holds: bool,
    pub c1: T,
    pub a: T,
    pub k_max: usize,
    /// `ln C(k) - c1 k^a` at the worst tested `k`.
    #[serde(with = "crate::serde_ext::real")]
    pub worst_log_ratio: T,
    pub worst_k: usize,
    pub curve: SpectralConstantCurve<T>,
}

/// Checks `C(k, E) ≤ e^{c1 k^a}` for every integer `k ∈ [1, k_max]`.
pub fn verify_spectral_hypothesis<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    k_max: usize,
    c1: T,
    a: T,
) -> Result<HypothesisReport<T>> {
    if !(c1 > T::zero() && a > T::zero()) {
        return Err(Error::InvalidConstants("c1 and a must be positive".into()));
    }
    let ks: Vec<T> = (1..=k_max).map(T::from_count).collect();
    let curve = constant_curve(dec, set, &ks)?;
    let mut worst = (-T::infinity(), 1usize);
    for (i, (&k, &c)) in ks.iter().zip(&curve.constants).enumerate() {
        let r = c.ln() - c1 * k.powf(a);
        if r > worst.0 || worst.0.is_nan_value() {
            worst = (r, i + 1);
        }
    }
    let holds = k_max == 0 || worst.0 <= T::zero();
    Ok(HypothesisReport { holds, c1, a, k_max, worst_log_ratio: worst.0, worst_k: worst.1, curve })
}
