//! Stabilizing feedback laws and closed-loop simulation.
//!
//! Two stabilizers are provided. Damping adds `χ_E` to the generator, so the
//! closed loop `y' = -(H + χ_E)y` is time independent and is solved exactly
//! in the eigenbasis of the perturbed matrix. The finite-rank law
//! `Kψ = ρ Σ_j (𝔸⁻¹p)_j φ_j`, `p_i = ⟨ψ, φ_i⟩`, `ρ = λ₁ - 1`, acts on the `N`
//! nonpositive modes through the Gram matrix `𝔸_ij = ⟨φ_i, φ_j⟩_{L²(E)}`;
//! on those modes the closed loop reduces to `p' = -(λ - ρ)p`.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::GridFunction;
use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::operators::dense::sorted_eigen;
use crate::operators::SpectralDecomposition;
use crate::scalar::Real;
use crate::specineq::constant_curve;

/// Largest admissible Gram condition number.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Decay rate `ω = min{(1-δ)N² - 2, ½e^{-2 c1 N}}` maximized over `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DampingBound<T> {
    pub omega: T,
    #[serde(rename = "N")]
    pub chosen_n: usize,
    pub delta: T,
    pub c1: T,
    /// `(N, ω(N))` for every `N` in the sweep.
    pub sweep: Vec<(usize, T)>,
}

/// `ω(N) = min{(1-δ)N² - 2, ½e^{-2 c1 N}}`.
pub fn damping_rate<T: Real>(delta: T, c1: T, n: usize) -> T {
    let n = T::from_count(n);
    let dissipative = (T::one() - delta) * n * n - T::lit(2.0);
    let observed = T::lit(0.5) * (-T::lit(2.0) * c1 * n).exp();
    dissipative.min(observed)
}

/// Sweeps `N` over `n_range` and keeps the largest positive `ω(N)`.
pub fn damping_decay_bound<T: Real>(delta: T, c1: T, n_range: RangeInclusive<usize>) -> Result<DampingBound<T>> {
    if !(delta >= T::zero() && delta < T::one()) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in [0, 1)")));
    }
    if !(c1 >= T::zero() && c1.is_finite()) {
        return Err(Error::InvalidArgument(format!("c1 = {c1} must be nonnegative and finite")));
    }
    let sweep: Vec<(usize, T)> = n_range.filter(|&n| n > 0).map(|n| (n, damping_rate(delta, c1, n))).collect();
    let best = sweep
        .iter()
        .copied()
        .filter(|(_, w)| *w > T::zero())
        .fold(None, |acc: Option<(usize, T)>, x| match acc {
            Some(a) if a.1 >= x.1 => Some(a),
            _ => Some(x),
        });
    let (chosen_n, omega) = best.ok_or(Error::NoDecayRate)?;
    Ok(DampingBound { omega, chosen_n, delta, c1, sweep })
}

/// Smallest `c1` with `‖π_N φ‖ ≤ e^{c1 N}‖π_N φ‖_{L²(E)}` for every `N ≤ n_max`,
/// where `dec` splits frequencies by `|ξ| ≤ N`.
pub fn linear_spectral_c1<T: Real>(dec: &SpectralDecomposition<T>, set: &SetIndicator<T>, n_max: usize) -> Result<T> {
    let ks: Vec<T> = (1..=n_max).map(T::from_count).collect();
    let curve = constant_curve(dec, set, &ks)?;
    let mut c1 = T::zero();
    for (&k, &c) in ks.iter().zip(&curve.constants) {
        if !c.is_finite() {
            return Err(Error::HypothesisUnverifiable(format!("spectral constant is infinite at N = {k}")));
        }
        c1 = c1.max(c.ln() / k);
    }
    Ok(c1)
}

/// `H + χ_E` on cell values.
fn damped_matrix<T: Real>(dec: &SpectralDecomposition<T>, set: &SetIndicator<T>) -> Result<DMatrix<T>> {
    dec.domain().check_same(set.domain())?;
    let mut h = dec.dense_matrix()?;
    for (i, &inside) in set.cells().iter().enumerate() {
        if inside {
            h[(i, i)] += T::one();
        }
    }
    Ok(h)
}

/// `λ_min(H + χ_E)` by dense diagonalization.
pub fn damping_lambda_min<T: Real>(dec: &SpectralDecomposition<T>, set: &SetIndicator<T>) -> Result<T> {
    let h = damped_matrix(dec, set)?;
    let values = h.symmetric_eigenvalues();
    Ok(values.iter().copied().fold(T::infinity(), T::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", rename_all = "snake_case", tag = "kind")]
pub enum FeedbackOperator<T> {
    /// `Ky = -y`, so that `χ_E K` adds `χ_E` to the generator.
    Damping { e: SetIndicator<T> },
    FiniteRank {
        rho: T,
        #[serde(rename = "N")]
        unstable_count: usize,
        eigenfunctions: Vec<GridFunction<T>>,
        gram: DMatrix<T>,
        gram_inverse: DMatrix<T>,
        /// `‖𝔸‖₂ ‖𝔸⁻¹‖₂`.
        condition: T,
    },
}

impl<T: Real> FeedbackOperator<T> {
    /// `Kψ`.
    pub fn apply(&self, psi: &GridFunction<T>) -> Result<GridFunction<T>> {
        match self {
            FeedbackOperator::Damping { e } => {
                e.domain().check_same(psi.domain())?;
                Ok(psi.scaled(-T::one()))
            }
            FeedbackOperator::FiniteRank { rho, eigenfunctions, gram_inverse, .. } => {
                let p: Vec<T> = eigenfunctions.iter().map(|phi| psi.inner_product(phi)).collect::<Result<_>>()?;
                let k = gram_inverse * DVector::from_vec(p) * *rho;
                let mut out = GridFunction::zeros(psi.domain());
                for (phi, &kj) in eigenfunctions.iter().zip(k.iter()) {
                    out = out.axpy(kj, phi)?;
                }
                Ok(out)
            }
        }
    }

    /// `|ρ| ‖𝔸⁻¹‖₂`, an upper bound for `‖K‖`.
    pub fn norm_bound(&self) -> T {
        match self {
            FeedbackOperator::Damping { .. } => T::one(),
            FeedbackOperator::FiniteRank { rho, gram_inverse, .. } => {
                let inv_norm = gram_inverse.clone().symmetric_eigenvalues().iter().fold(T::zero(), |m, v| m.max(v.abs()));
                rho.abs() * inv_norm
            }
        }
    }

    /// Largest step with `dt ‖K‖ ≤ 0.1`.
    pub fn suggested_dt(&self) -> T {
        let bound = self.norm_bound();
        if bound > T::zero() {
            T::lit(0.1) / bound
        } else {
            T::infinity()
        }
    }
}

/// Builds `K` from the nonpositive modes of `dec` and their Gram matrix on `set`.
pub fn build_finite_rank_feedback<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
) -> Result<FeedbackOperator<T>> {
    dec.domain().check_same(set.domain())?;
    if set.is_empty() {
        return Err(Error::InvalidSet("feedback set has zero measure".into()));
    }
    let n = dec.range_dimension(T::zero());
    if n == 0 {
        return Err(Error::AlreadyStable);
    }
    let gram = dec.restricted_gram(n, set)?;
    let eig = SymmetricEigen::new(gram.clone());
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 0..n {
        if eig.eigenvalues[i] < eig.eigenvalues[lo] {
            lo = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[hi] {
            hi = i;
        }
    }
    let (mu_min, mu_max) = (eig.eigenvalues[lo], eig.eigenvalues[hi]);
    let condition = if mu_min > T::zero() { mu_max / mu_min } else { T::infinity() };
    if !(condition <= T::lit(GRAM_CONDITION_LIMIT)) {
        return Err(Error::SingularGram {
            condition: condition.as_f64(),
            offending: eig.eigenvectors.column(lo).iter().map(|v| v.as_f64()).collect(),
        });
    }
    let inv_values = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.recip()));
    let gram_inverse = &eig.eigenvectors * inv_values * eig.eigenvectors.transpose();
    let gram_inverse = (&gram_inverse + gram_inverse.transpose()) * T::lit(0.5);
    Ok(FeedbackOperator::FiniteRank {
        rho: dec.eigenvalues()[0] - T::one(),
        unstable_count: n,
        eigenfunctions: (0..n).map(|j| dec.basis_function(j)).collect(),
        gram,
        gram_inverse,
        condition,
    })
}

enum Flow<T: Real> {
    /// Coefficients in the eigenbasis of `H`; the feedback enters through
    /// `coupling = ρ M 𝔸⁻¹` with `M_ij = ⟨χ_E φ_j, φ_i⟩`.
    Modal { rates: Vec<T>, coupling: DMatrix<T>, rank: usize },
    /// Coefficients in the eigenbasis of `H + χ_E`.
    Exact { rates: Vec<T>, vectors: DMatrix<T> },
}

/// Precomputed closed loop `y' = -Hy + χ_E K y`.
pub struct ClosedLoop<'a, T: Real> {
    dec: &'a SpectralDecomposition<T>,
    flow: Flow<T>,
}

impl<'a, T: Real> ClosedLoop<'a, T> {
    pub fn new(dec: &'a SpectralDecomposition<T>, fb: &FeedbackOperator<T>, set: &SetIndicator<T>) -> Result<Self> {
        dec.domain().check_same(set.domain())?;
        let flow = match fb {
            FeedbackOperator::Damping { e } => {
                if e != set {
                    return Err(Error::InvalidSet("damping set differs from the closed-loop set".into()));
                }
                let (rates, vectors) = sorted_eigen(damped_matrix(dec, set)?)?;
                Flow::Exact { rates, vectors }
            }
            FeedbackOperator::FiniteRank { rho, unstable_count, eigenfunctions, gram_inverse, .. } => {
                let rank = *unstable_count;
                let mut m = DMatrix::zeros(dec.len(), rank);
                for (j, phi) in eigenfunctions.iter().enumerate() {
                    let column = dec.coefficients(&phi.restrict(set)?)?;
                    m.set_column(j, &DVector::from_vec(column));
                }
                Flow::Modal { rates: dec.eigenvalues().to_vec(), coupling: m * gram_inverse * *rho, rank }
            }
        };
        Ok(Self { dec, flow })
    }

    fn root(&self) -> T {
        self.dec.domain().cell_volume().sqrt()
    }

    /// Internal state of `y`; its Euclidean norm is `‖y‖`.
    pub fn state(&self, y: &GridFunction<T>) -> Result<Vec<T>> {
        match &self.flow {
            Flow::Modal { .. } => self.dec.coefficients(y),
            Flow::Exact { vectors, .. } => {
                self.dec.domain().check_same(y.domain())?;
                let v = DVector::from_column_slice(y.values());
                Ok((vectors.tr_mul(&v) * self.root()).iter().copied().collect())
            }
        }
    }

    pub fn function(&self, state: &[T]) -> Result<GridFunction<T>> {
        match &self.flow {
            Flow::Modal { .. } => self.dec.synthesize(state),
            Flow::Exact { vectors, .. } => {
                let v = vectors * DVector::from_column_slice(state) / self.root();
                GridFunction::new(*self.dec.domain(), v.iter().copied().collect())
            }
        }
    }

    /// One step of length `dt`: `y ← e^{-dtH}(y + dt χ_E K y)`, or the exact
    /// flow of `H + χ_E` for damping.
    pub fn step(&self, state: &mut [T], dt: T) {
        match &self.flow {
            Flow::Modal { rates, coupling, rank } => {
                if *rank > 0 {
                    let low = DVector::from_column_slice(&state[..*rank]);
                    let push = coupling * low;
                    for (s, p) in state.iter_mut().zip(push.iter()) {
                        *s += dt * *p;
                    }
                }
                for (s, &lam) in state.iter_mut().zip(rates) {
                    *s *= (-dt * lam).exp();
                }
            }
            Flow::Exact { rates, .. } => {
                for (s, &mu) in state.iter_mut().zip(rates) {
                    *s *= (-dt * mu).exp();
                }
            }
        }
    }
}

/// One closed-loop step from `y`.
pub fn closed_loop_step<T: Real>(
    dec: &SpectralDecomposition<T>,
    fb: &FeedbackOperator<T>,
    set: &SetIndicator<T>,
    y: &GridFunction<T>,
    dt: T,
) -> Result<GridFunction<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let flow = ClosedLoop::new(dec, fb, set)?;
    let mut state = flow.state(y)?;
    flow.step(&mut state, dt);
    flow.function(&state)
}

/// Sampled closed-loop norms with a log-linear fit of the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DecayReport<T> {
    pub dt: T,
    pub t_end: T,
    pub times: Vec<T>,
    pub norms: Vec<T>,
    /// `-slope` of `ln‖y(t)‖` over the second half of the samples.
    pub fitted_omega: T,
    pub fitted_prefactor: T,
    /// RMS residual of the log-linear fit.
    pub residual: T,
}

impl<T: Real> DecayReport<T> {
    /// `t,norm,ln_norm` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm,ln_norm\n");
        for (t, n) in self.times.iter().zip(&self.norms) {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", t.as_f64(), n.as_f64(), n.as_f64().ln()));
        }
        out
    }

    /// Whether the sampled norms never increase over the second half, up to
    /// a relative slack.
    pub fn monotone_tail(&self, rel_slack: T) -> bool {
        let start = self.norms.len() / 2;
        self.norms[start..].windows(2).all(|w| w[1] <= w[0] * (T::one() + rel_slack))
    }
}

/// `(slope, intercept, rms residual)` of the least-squares line through `(x, y)`.
fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    let intercept = my - slope * mx;
    let ss: T = x.iter().zip(y).map(|(&a, &b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (ss / n).sqrt())
}

fn run<T: Real>(flow: &ClosedLoop<'_, T>, y0: &GridFunction<T>, t_end: T, dt: T) -> Result<DecayReport<T>> {
    let steps = (t_end / dt).round().to_usize().unwrap_or(0).max(1);
    let stride = (t_end / (T::lit(100.0) * dt)).floor().to_usize().unwrap_or(1).max(1);
    let mut state = flow.state(y0)?;
    let norm = |s: &[T]| s.iter().map(|&v| v * v).sum::<T>().sqrt();
    let initial = norm(&state);
    let limit = T::lit(10.0) * initial;
    let mut times = vec![T::zero()];
    let mut norms = vec![initial];
    for step in 1..=steps {
        flow.step(&mut state, dt);
        let current = norm(&state);
        let t = dt * T::from_count(step);
        if !(current <= limit) {
            return Err(Error::Instability { time: t.as_f64(), norm: current.as_f64(), initial: initial.as_f64() });
        }
        if step % stride == 0 || step == steps {
            times.push(t);
            norms.push(current);
        }
    }
    let start = norms.len() / 2;
    let (x, y): (Vec<T>, Vec<T>) = times[start..]
        .iter()
        .zip(&norms[start..])
        .filter(|(_, &n)| n > T::zero())
        .map(|(&t, &n)| (t, n.ln()))
        .unzip();
    let (slope, intercept, residual) = if x.len() >= 2 { linear_fit(&x, &y) } else { (T::zero(), T::zero(), T::zero()) };
    Ok(DecayReport {
        dt,
        t_end,
        times,
        norms,
        fitted_omega: -slope,
        fitted_prefactor: intercept.exp(),
        residual,
    })
}

fn check_times<T: Real>(t_end: T, dt: T) -> Result<()> {
    if !(t_end > T::zero() && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must be positive")));
    }
    if !(dt > T::zero() && dt <= t_end / T::lit(100.0) * (T::one() + T::lit(1e-9))) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must lie in (0, t_end/100]")));
    }
    Ok(())
}

/// Integrates the closed loop from `y0` to `t_end`, sampling about 100 norms.
pub fn simulate_decay<T: Real>(
    dec: &SpectralDecomposition<T>,
    fb: &FeedbackOperator<T>,
    set: &SetIndicator<T>,
    y0: &GridFunction<T>,
    t_end: T,
    dt: T,
) -> Result<DecayReport<T>> {
    check_times(t_end, dt)?;
    let flow = ClosedLoop::new(dec, fb, set)?;
    run(&flow, y0, t_end, dt)
}

/// [`simulate_decay`] for several initial states in parallel, sharing one
/// precomputed closed loop.
pub fn simulate_many<T: Real>(
    dec: &SpectralDecomposition<T>,
    fb: &FeedbackOperator<T>,
    set: &SetIndicator<T>,
    initial: &[GridFunction<T>],
    t_end: T,
    dt: T,
) -> Result<Vec<DecayReport<T>>> {
    check_times(t_end, dt)?;
    let flow = ClosedLoop::new(dec, fb, set)?;
    initial.par_iter().map(|y0| run(&flow, y0, t_end, dt)).collect()
}
