//! The three operator families, their spectral decompositions, semigroups
//! and spectral projections.
//!
//! Every decomposition stores an orthonormal eigenbasis. Coefficients are
//! taken in the discrete inner product, so `‖f‖² = Σ a_j²` and
//! `e^{-tH}`, `π_k` and any other spectral function act diagonally on them.
//!
//! The ground state of the Hermite operator is `π^{-n/4} e^{-|x|²/2}`. Some
//! printed sources write the prefactor as `π^{n/4}`, which is not normalized.

mod cache;
pub(crate) mod dense;
mod fourier;
pub mod hermite;
mod spec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, GridFunction};
use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::rng::{random_unit_coefficients, trial_rng};
use crate::scalar::Real;

pub use cache::{cache_dir_from_env, cache_key, diagonalize_cached, CACHE_DIR_ENV};
pub use hermite::{ground_state, hermite_functions, hermite_polynomial, HermiteBasis};
pub use spec::{Discretization, OperatorSpec, PotentialCondition};

use fourier::FourierBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Fourier,
    Dense,
}

#[derive(Debug, Clone)]
enum Basis<T: Real> {
    Fourier(FourierBasis<T>),
    /// Columns orthonormal in the Euclidean inner product; `φ_j = q_j / h^{n/2}`.
    Dense(DMatrix<T>),
}

/// Eigenvalues (ascending) and an orthonormal eigenbasis of a discretized `H`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T: Real> {
    spec: OperatorSpec<T>,
    domain: GridDomain<T>,
    discretization: Discretization,
    eigenvalues: Vec<T>,
    basis: Basis<T>,
}

/// Cell values of the potential used by the finite-difference kinds.
pub(crate) fn potential_values<T: Real>(spec: &OperatorSpec<T>, domain: &GridDomain<T>) -> Option<Vec<T>> {
    match spec {
        OperatorSpec::FractionalLaplacian { .. } => None,
        OperatorSpec::ShiftedHermite { c } => {
            let f = GridFunction::from_fn(domain, |x| x[0] * x[0] + x[1] * x[1] - *c);
            Some(f.into_values())
        }
        OperatorSpec::Schrodinger { potential, .. } => Some(potential.values().to_vec()),
    }
}

/// Diagonalizes `spec` on `domain` with the default discretization.
pub fn diagonalize<T: Real>(spec: &OperatorSpec<T>, domain: &GridDomain<T>) -> Result<SpectralDecomposition<T>> {
    SpectralDecomposition::new(spec, domain, Discretization::default())
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn new(spec: &OperatorSpec<T>, domain: &GridDomain<T>, discretization: Discretization) -> Result<Self> {
        spec.validate(domain)?;
        match spec {
            OperatorSpec::FractionalLaplacian { s, c } => {
                let (s, c) = (*s, *c);
                let basis = FourierBasis::new(domain, |xi| {
                    if xi == T::zero() {
                        -c
                    } else {
                        xi.powf(s) - c
                    }
                });
                Ok(Self {
                    spec: spec.clone(),
                    domain: *domain,
                    discretization,
                    eigenvalues: basis.eigenvalues(),
                    basis: Basis::Fourier(basis),
                })
            }
            _ => {
                let potential = potential_values(spec, domain).expect("finite-difference kind");
                let p = discretization.stencil_half_width;
                let matrix = dense::schrodinger_matrix(domain, &potential, p)?;
                let scale = matrix.amax();
                let (eigenvalues, q) = dense::sorted_eigen(matrix)?;
                let dec = Self { spec: spec.clone(), domain: *domain, discretization, eigenvalues, basis: Basis::Dense(q) };
                dec.check_residuals(&potential, scale)?;
                Ok(dec)
            }
        }
    }

    /// Rebuilds a dense decomposition from stored parts (cache path).
    pub(crate) fn from_parts(
        spec: OperatorSpec<T>,
        domain: GridDomain<T>,
        discretization: Discretization,
        eigenvalues: Vec<T>,
        q: DMatrix<T>,
    ) -> Self {
        Self { spec, domain, discretization, eigenvalues, basis: Basis::Dense(q) }
    }

    pub(crate) fn dense_basis(&self) -> Option<&DMatrix<T>> {
        match &self.basis {
            Basis::Dense(q) => Some(q),
            Basis::Fourier(_) => None,
        }
    }

    fn check_residuals(&self, potential: &[T], matrix_scale: T) -> Result<()> {
        let q = self.dense_basis().expect("dense");
        let p = self.discretization.stencil_half_width;
        let floor = T::lit(1e-8).max(T::EPS * T::lit(1e3) * matrix_scale);
        let worst = (0..q.ncols())
            .into_par_iter()
            .map(|j| {
                let col: Vec<T> = q.column(j).iter().copied().collect();
                let hv = dense::apply_stencil(&self.domain, potential, p, &col);
                let lam = self.eigenvalues[j];
                let r = hv.iter().zip(&col).map(|(&a, &b)| (a - lam * b) * (a - lam * b)).sum::<T>().sqrt();
                (j, r / (floor * T::one().max(lam.abs())))
            })
            .reduce(|| (0, T::zero()), |a, b| if b.1 > a.1 { b } else { a });
        if worst.1 > T::one() {
            return Err(Error::Decomposition(format!(
                "eigenpair {} residual exceeds tolerance by factor {}",
                worst.0, worst.1
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> &OperatorSpec<T> {
        &self.spec
    }

    pub fn domain(&self) -> &GridDomain<T> {
        &self.domain
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn basis_kind(&self) -> BasisKind {
        match self.basis {
            Basis::Fourier(_) => BasisKind::Fourier,
            Basis::Dense(_) => BasisKind::Dense,
        }
    }

    fn half_volume_root(&self) -> T {
        self.domain.cell_volume().sqrt()
    }

    /// Spectral coefficients `a_j = ⟨f, φ_j⟩`.
    pub fn coefficients(&self, f: &GridFunction<T>) -> Result<Vec<T>> {
        self.domain.check_same(f.domain())?;
        Ok(match &self.basis {
            Basis::Fourier(b) => b.coefficients(f.values()),
            Basis::Dense(q) => {
                let v = DVector::from_column_slice(f.values());
                let a = q.tr_mul(&v) * self.half_volume_root();
                a.iter().copied().collect()
            }
        })
    }

    /// `Σ a_j φ_j`.
    pub fn synthesize(&self, coeffs: &[T]) -> Result<GridFunction<T>> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: coeffs.len() });
        }
        let values = match &self.basis {
            Basis::Fourier(b) => b.synthesize(coeffs),
            Basis::Dense(q) => {
                let a = DVector::from_column_slice(coeffs);
                let v = q * a / self.half_volume_root();
                v.iter().copied().collect()
            }
        };
        GridFunction::new(self.domain, values)
    }

    /// The `j`-th eigenfunction `φ_j` (0-based).
    pub fn basis_function(&self, j: usize) -> GridFunction<T> {
        match &self.basis {
            Basis::Fourier(b) => b.mode_values(j),
            Basis::Dense(q) => {
                let scale = self.half_volume_root().recip();
                let values = q.column(j).iter().map(|&v| v * scale).collect();
                GridFunction::new(self.domain, values).expect("column length")
            }
        }
    }

    /// The first `count` eigenvectors as Euclidean-orthonormal columns
    /// (`φ_j h^{n/2}`), cells × count.
    pub fn basis_matrix(&self, count: usize) -> DMatrix<T> {
        let count = count.min(self.len());
        match &self.basis {
            Basis::Dense(q) => q.columns(0, count).into_owned(),
            Basis::Fourier(_) => {
                let root = self.half_volume_root();
                let mut out = DMatrix::zeros(self.domain.cells(), count);
                for j in 0..count {
                    let f = self.basis_function(j);
                    for (i, &v) in f.values().iter().enumerate() {
                        out[(i, j)] = v * root;
                    }
                }
                out
            }
        }
    }

    /// The matrix of `H` acting on cell values.
    pub fn dense_matrix(&self) -> Result<DMatrix<T>> {
        match &self.basis {
            Basis::Dense(_) => {
                let potential = potential_values(&self.spec, &self.domain).expect("finite-difference kind");
                dense::schrodinger_matrix(&self.domain, &potential, self.discretization.stencil_half_width)
            }
            Basis::Fourier(_) => {
                let b = self.basis_matrix(self.len());
                let mut scaled = b.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= self.eigenvalues[j];
                }
                Ok(&scaled * b.transpose())
            }
        }
    }

    /// Applies `w(λ)` spectrally: `Σ w(λ_j) a_j φ_j`.
    pub fn apply_spectral(&self, f: &GridFunction<T>, weight: impl Fn(T) -> T) -> Result<GridFunction<T>> {
        self.domain.check_same(f.domain())?;
        match &self.basis {
            Basis::Fourier(b) => GridFunction::new(self.domain, b.apply(f.values(), weight)),
            Basis::Dense(_) => {
                let mut a = self.coefficients(f)?;
                for (aj, &lam) in a.iter_mut().zip(&self.eigenvalues) {
                    *aj *= weight(lam);
                }
                self.synthesize(&a)
            }
        }
    }

    /// `e^{-tH} f`.
    pub fn semigroup_apply(&self, t: T, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        if t < T::zero() || !t.is_finite() {
            return Err(Error::NegativeTime(t.as_f64()));
        }
        if t == T::zero() {
            self.domain.check_same(f.domain())?;
            return Ok(f.clone());
        }
        self.apply_spectral(f, |lam| (-t * lam).exp())
    }

    /// Number of eigenvalues `≤ k`.
    pub fn range_dimension(&self, k: T) -> usize {
        self.eigenvalues.partition_point(|&lam| lam <= k)
    }

    pub fn projection(&self, k: T) -> Projection<'_, T> {
        Projection { decomposition: self, threshold: k }
    }

    /// `π_k f`: the component of `f` in the span of eigenvectors with `λ ≤ k`.
    /// Zero when no eigenvalue qualifies.
    pub fn project(&self, k: T, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.projection(k).apply(f)
    }

    /// `G_E[i][j] = ⟨φ_i, φ_j⟩_{L²(E)}` over the first `count` eigenfunctions.
    pub fn restricted_gram(&self, count: usize, set: &SetIndicator<T>) -> Result<DMatrix<T>> {
        self.domain.check_same(set.domain())?;
        let b = self.basis_matrix(count);
        Ok(restricted_gram_of(&b, set))
    }

    /// Random unit-norm coefficient vectors pushed through `(1-π_k)e^{-tH}`.
    pub fn dissipative_margin(
        &self,
        k: T,
        t_samples: &[T],
        trials: usize,
        seed: u64,
    ) -> Result<DissipativeReport<T>> {
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if let Some(t) = t_samples.iter().find(|t| !(**t >= T::zero())) {
            return Err(Error::NegativeTime(t.as_f64()));
        }
        let first_high = self.range_dimension(k);
        let per_trial: Vec<(T, T)> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(seed, trial as u64);
                let a = random_unit_coefficients::<T>(self.len(), &mut rng);
                let mut worst = (T::zero(), T::zero());
                for &t in t_samples {
                    let tail: T = a[first_high..]
                        .iter()
                        .zip(&self.eigenvalues[first_high..])
                        .map(|(&aj, &lam)| aj * aj * (-T::lit(2.0) * t * (lam - k)).exp())
                        .sum();
                    let ratio = tail.sqrt();
                    if ratio > worst.0 {
                        worst = (ratio, t);
                    }
                }
                worst
            })
            .collect();
        let (max_ratio, worst_t) =
            per_trial.into_iter().fold((T::zero(), T::zero()), |acc, x| if x.0 > acc.0 { x } else { acc });
        Ok(DissipativeReport { k, t_samples: t_samples.to_vec(), trials, seed, max_ratio, worst_t })
    }

    /// Sanity hook used by tests: draws a random unit function in coefficient space.
    pub fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> GridFunction<T> {
        let a = random_unit_coefficients::<T>(self.len(), rng);
        self.synthesize(&a).expect("coefficient length")
    }
}

pub(crate) fn restricted_gram_of<T: Real>(b: &DMatrix<T>, set: &SetIndicator<T>) -> DMatrix<T> {
    let rows: Vec<usize> = set.cells().iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect();
    let sub = b.select_rows(rows.iter());
    sub.tr_mul(&sub)
}

/// Spectral projection onto `{λ ≤ threshold}`.
#[derive(Debug, Clone, Copy)]
pub struct Projection<'a, T: Real> {
    pub decomposition: &'a SpectralDecomposition<T>,
    pub threshold: T,
}

impl<T: Real> Projection<'_, T> {
    pub fn rank(&self) -> usize {
        self.decomposition.range_dimension(self.threshold)
    }

    pub fn apply(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        let k = self.threshold;
        self.decomposition.apply_spectral(f, |lam| if lam <= k { T::one() } else { T::zero() })
    }

    /// `(1 - π_k) f`.
    pub fn apply_complement(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        let k = self.threshold;
        self.decomposition.apply_spectral(f, |lam| if lam <= k { T::zero() } else { T::one() })
    }
}

/// Worst observed `‖(1-π_k)e^{-tH}φ‖ e^{tk}` over random unit `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DissipativeReport<T> {
    pub k: T,
    pub t_samples: Vec<T>,
    pub trials: usize,
    pub seed: u64,
    pub max_ratio: T,
    pub worst_t: T,
}

impl<T: Real> DissipativeReport<T> {
    pub fn holds(&self, tolerance: T) -> bool {
        self.max_ratio <= T::one() + tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn periodic(m: usize) -> GridDomain<f64> {
        GridDomain::<f64>::new(1, 10.0, m, true).unwrap()
    }

    #[test]
    fn fourier_basis_is_orthonormal_and_matches_fft_coefficients() {
        let d = GridDomain::<f64>::new(2, 3.0, 8, true).unwrap();
        let dec = diagonalize(&OperatorSpec::fractional(1.5, 0.3), &d).unwrap();
        let b = dec.basis_matrix(dec.len());
        let gram = b.tr_mul(&b);
        assert!((gram - DMatrix::identity(64, 64)).amax() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = dec.random_unit(&mut rng);
        let a = dec.coefficients(&f).unwrap();
        for j in [0, 5, 17, 63] {
            let direct = f.inner_product(&dec.basis_function(j)).unwrap();
            assert!((a[j] - direct).abs() < 1e-12);
        }
        let back = dec.synthesize(&a).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn fourier_symbol_is_exact() {
        let d = periodic(64);
        let dec = diagonalize(&OperatorSpec::fractional(2.0, 0.0), &d).unwrap();
        assert_eq!(dec.eigenvalues()[0], 0.0);
        let step = std::f64::consts::PI / 10.0;
        assert_eq!(dec.eigenvalues()[1], step * step);
        assert!(dec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn semigroup_rejects_negative_time() {
        let d = periodic(16);
        let dec = diagonalize(&OperatorSpec::fractional(1.0, 0.0), &d).unwrap();
        let f = GridFunction::constant(&d, 1.0);
        assert!(matches!(dec.semigroup_apply(-1.0, &f), Err(Error::NegativeTime(_))));
        assert_eq!(dec.semigroup_apply(0.0, &f).unwrap(), f);
    }

    #[test]
    fn zero_branch_of_projection() {
        let d = periodic(64);
        let dec = diagonalize(&OperatorSpec::fractional(1.0, -5.0), &d).unwrap();
        let f = GridFunction::from_fn(&d, |x| (-x[0] * x[0]).exp());
        assert_eq!(dec.range_dimension(1.0), 0);
        assert_eq!(dec.project(1.0, &f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dense_path_hermite_ground_state() {
        let d = GridDomain::<f64>::new(1, 10.0, 128, false).unwrap();
        let dec = diagonalize(&OperatorSpec::hermite(0.0), &d).unwrap();
        assert_eq!(dec.basis_kind(), BasisKind::Dense);
        assert!((dec.eigenvalues()[0] - 1.0).abs() < 1e-5);
        let phi = dec.basis_function(0);
        let exact = ground_state(&d);
        assert!(phi.sub(&exact).unwrap().max_abs() < 1e-4);
        let m = dec.dense_matrix().unwrap();
        assert!((&m - m.transpose()).amax() < 1e-9);
    }

    #[test]
    fn fourier_dense_matrix_is_the_multiplier() {
        let d = periodic(16);
        let dec = diagonalize(&OperatorSpec::fractional(2.0, 1.0), &d).unwrap();
        let m = dec.dense_matrix().unwrap();
        let f = GridFunction::from_fn(&d, |x| (0.3 * x[0]).sin() + 0.1 * x[0]);
        let via_matrix = &m * DVector::from_column_slice(f.values());
        let via_fft = dec.apply_spectral(&f, |l| l).unwrap();
        for (a, b) in via_matrix.iter().zip(via_fft.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
