//! Finite-difference matrices for `-Δ + V` with Dirichlet walls.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Central second-difference weights `c_0..c_p` of order `2p` (unit spacing).
pub(crate) fn second_difference_weights<T: Real>(p: usize) -> Vec<T> {
    let mut w = vec![T::zero(); p + 1];
    let lnfact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    for (k, slot) in w.iter_mut().enumerate().skip(1) {
        let sign = if k % 2 == 1 { 2.0 } else { -2.0 };
        let mag = (2.0 * lnfact(p) - lnfact(p - k) - lnfact(p + k)).exp() / (k * k) as f64;
        *slot = T::lit(sign * mag);
    }
    w[0] = T::lit(-2.0 * (1..=p).map(|k| 1.0 / (k * k) as f64).sum::<f64>());
    w
}

/// Dense matrix of `-Δ_h + diag(potential)` on the cell-centred grid.
pub(crate) fn schrodinger_matrix<T: Real>(
    domain: &GridDomain<T>,
    potential: &[T],
    stencil_half_width: usize,
) -> Result<DMatrix<T>> {
    let p = stencil_half_width;
    let m = domain.points_per_axis();
    if p == 0 || p >= m {
        return Err(Error::InvalidOperator(format!("stencil half width {p} not in [1, {m})")));
    }
    let w = second_difference_weights::<T>(p);
    let inv_h2 = (domain.step() * domain.step()).recip();
    let n = domain.cells();
    let mut a = DMatrix::<T>::zeros(n, n);
    for cell in 0..n {
        let idx = domain.unravel(cell);
        a[(cell, cell)] += potential[cell];
        for axis in 0..domain.dim() {
            for (k, &wk) in w.iter().enumerate() {
                let coeff = -wk * inv_h2;
                if k == 0 {
                    a[(cell, cell)] += coeff;
                    continue;
                }
                for dir in [-1i64, 1] {
                    let j = idx[axis] as i64 + dir * k as i64;
                    if j < 0 || j >= m as i64 {
                        continue;
                    }
                    let mut nb = idx;
                    nb[axis] = j as usize;
                    a[(cell, domain.ravel(nb))] += coeff;
                }
            }
        }
    }
    Ok(a)
}

/// Applies the same stencil as [`schrodinger_matrix`] without forming it.
pub(crate) fn apply_stencil<T: Real>(
    domain: &GridDomain<T>,
    potential: &[T],
    stencil_half_width: usize,
    values: &[T],
) -> Vec<T> {
    let w = second_difference_weights::<T>(stencil_half_width);
    let inv_h2 = (domain.step() * domain.step()).recip();
    let m = domain.points_per_axis() as i64;
    (0..domain.cells())
        .map(|cell| {
            let idx = domain.unravel(cell);
            let mut acc = potential[cell] * values[cell];
            for axis in 0..domain.dim() {
                acc -= w[0] * inv_h2 * values[cell];
                for (k, &wk) in w.iter().enumerate().skip(1) {
                    for dir in [-1i64, 1] {
                        let j = idx[axis] as i64 + dir * k as i64;
                        if (0..m).contains(&j) {
                            let mut nb = idx;
                            nb[axis] = j as usize;
                            acc -= wk * inv_h2 * values[domain.ravel(nb)];
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

/// Ascending eigenpairs with a deterministic sign convention: the outermost
/// significant entry of every eigenvector (largest cell index) is positive.
pub(crate) fn sorted_eigen<T: Real>(matrix: DMatrix<T>) -> Result<(Vec<T>, DMatrix<T>)> {
    let n = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix, T::EPS, 0)
        .ok_or_else(|| Error::Decomposition("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Decomposition("non-finite eigenvalue".into()));
    }
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let peak = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let cutoff = peak * T::lit(1e-3);
        let anchor = v.iter().rposition(|x| x.abs() >= cutoff).unwrap_or(0);
        let sign = if v[anchor] < T::zero() { -T::one() } else { T::one() };
        vectors.set_column(col, &(v * sign));
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_match_known_stencils() {
        let w2 = second_difference_weights::<f64>(1);
        assert_eq!(w2, vec![-2.0, 1.0]);
        let w4 = second_difference_weights::<f64>(2);
        let expect = [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w4.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        // Any order annihilates constants and differentiates x² exactly.
        for p in 1..6 {
            let w = second_difference_weights::<f64>(p);
            let sum: f64 = w[0] + 2.0 * w[1..].iter().sum::<f64>();
            assert!(sum.abs() < 1e-12);
            let second: f64 = 2.0 * w.iter().enumerate().map(|(k, c)| c * (k * k) as f64).sum::<f64>();
            assert!((second - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_is_symmetric() {
        let d = GridDomain::<f64>::new(2, 2.0, 8, false).unwrap();
        let v: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
        let a = schrodinger_matrix(&d, &v, 3).unwrap();
        assert!((&a - a.transpose()).amax() < 1e-12);
    }
}
