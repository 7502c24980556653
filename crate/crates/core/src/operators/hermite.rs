//! Analytic Hermite functions, used for validation and for the ground-state probe.

use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, GridFunction};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest degree accepted before the recurrence is considered unsafe.
pub const MAX_DEGREE: usize = 200;

/// Physicists' Hermite polynomial `H_k(x)` via `H_{k+1} = 2x H_k - 2k H_{k-1}`.
pub fn hermite_polynomial<T: Real>(k: usize, x: T) -> T {
    let two = T::lit(2.0);
    let (mut prev, mut cur) = (T::one(), two * x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = two * x * cur - two * T::from_count(j) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized Hermite functions `φ_0..=φ_K` at one point, by the stable
/// recurrence `φ_{k+1} = √(2/(k+1)) x φ_k - √(k/(k+1)) φ_{k-1}`.
pub fn hermite_functions<T: Real>(max_degree: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(max_degree + 1);
    let phi0 = T::pi().powf(T::lit(-0.25)) * (-x * x / T::lit(2.0)).exp();
    out.push(phi0);
    if max_degree == 0 {
        return out;
    }
    out.push(T::lit(2.0).sqrt() * x * phi0);
    for k in 1..max_degree {
        let kf = T::from_count(k);
        let a = (T::lit(2.0) / (kf + T::one())).sqrt();
        let b = (kf / (kf + T::one())).sqrt();
        let next = a * x * out[k] - b * out[k - 1];
        out.push(next);
    }
    out
}

/// Normalized ground state `π^{-n/4} e^{-|x|²/2}` of `-Δ + |x|²`.
pub fn ground_state<T: Real>(domain: &GridDomain<T>) -> GridFunction<T> {
    let n = T::from_count(domain.dim());
    let norm = T::pi().powf(-n / T::lit(4.0));
    GridFunction::from_fn(domain, |x| norm * (-(x[0] * x[0] + x[1] * x[1]) / T::lit(2.0)).exp())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HermiteBasis<T> {
    pub dim: usize,
    pub max_degree: usize,
    /// Multi-indices `α` with `|α| ≤ K`, ordered by total degree.
    pub indices: Vec<[usize; 2]>,
    pub functions: Vec<GridFunction<T>>,
}

impl<T: Real> HermiteBasis<T> {
    /// Tensor-product basis `Φ_α(x) = Π φ_{α_i}(x_i)` on a non-periodic grid.
    pub fn new(domain: &GridDomain<T>, max_degree: usize) -> Result<Self> {
        if max_degree > MAX_DEGREE {
            return Err(Error::DegreeTooLarge(max_degree));
        }
        if domain.periodic() {
            return Err(Error::InvalidGrid("Hermite functions need a non-periodic grid".into()));
        }
        let m = domain.points_per_axis();
        let table: Vec<Vec<T>> =
            (0..m).map(|i| hermite_functions(max_degree, domain.coordinate(i))).collect();
        let mut indices = Vec::new();
        for total in 0..=max_degree {
            if domain.dim() == 1 {
                indices.push([total, 0]);
            } else {
                for a0 in (0..=total).rev() {
                    indices.push([a0, total - a0]);
                }
            }
        }
        let functions = indices
            .iter()
            .map(|alpha| {
                let values = (0..domain.cells())
                    .map(|c| {
                        let idx = domain.unravel(c);
                        (0..domain.dim()).map(|a| table[idx[a]][alpha[a]]).fold(T::one(), |p, v| p * v)
                    })
                    .collect();
                GridFunction::new(*domain, values).expect("cell count matches")
            })
            .collect();
        Ok(Self { dim: domain.dim(), max_degree, indices, functions })
    }

    pub fn get(&self, alpha: [usize; 2]) -> Option<&GridFunction<T>> {
        self.indices.iter().position(|a| *a == alpha).map(|i| &self.functions[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|j| j as f64).product()
    }

    #[test]
    fn low_degree_polynomials() {
        assert_eq!(hermite_polynomial(0, 0.7), 1.0);
        assert_eq!(hermite_polynomial(1, 0.7), 1.4);
        // H_2 = 4x² - 2, H_3 = 8x³ - 12x
        assert!((hermite_polynomial(2, 0.7f64) - (4.0 * 0.49 - 2.0)).abs() < 1e-14);
        assert!((hermite_polynomial(3, 0.7f64) - (8.0 * 0.343 - 12.0 * 0.7)).abs() < 1e-13);
    }

    #[test]
    fn ground_value_at_origin() {
        let v = hermite_functions::<f64>(0, 0.0);
        assert_eq!(v[0], std::f64::consts::PI.powf(-0.25));
    }

    #[test]
    fn recurrence_matches_closed_form() {
        for &x in &[-3.0, -0.4, 0.0, 1.3, 4.5] {
            let phi = hermite_functions::<f64>(12, x);
            for (k, &v) in phi.iter().enumerate() {
                let closed = (2f64.powi(k as i32) * factorial(k) * std::f64::consts::PI.sqrt()).powf(-0.5)
                    * hermite_polynomial(k, x)
                    * (-x * x / 2.0).exp();
                assert!((v - closed).abs() < 1e-9 * closed.abs().max(1e-3), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn recurrence_identity_on_inner_box() {
        let d = GridDomain::<f64>::new(1, 10.0, 256, false).unwrap();
        for i in 0..d.points_per_axis() {
            let x = d.coordinate(i);
            if x.abs() > 5.0 {
                continue;
            }
            let phi = hermite_functions::<f64>(60, x);
            for k in 1..60 {
                let kf = k as f64;
                let rhs = (2.0 / (kf + 1.0)).sqrt() * x * phi[k] - (kf / (kf + 1.0)).sqrt() * phi[k - 1];
                assert!((phi[k + 1] - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_dimensional_orthonormality() {
        let d = GridDomain::<f64>::new(2, 10.0, 96, false).unwrap();
        let basis = HermiteBasis::new(&d, 4).unwrap();
        assert_eq!(basis.functions.len(), 15);
        let a = basis.get([1, 0]).unwrap();
        let b = basis.get([0, 1]).unwrap();
        assert!(a.inner_product(b).unwrap().abs() < 1e-8);
        for (i, f) in basis.functions.iter().enumerate() {
            for (j, g) in basis.functions.iter().enumerate() {
                let ip = f.inner_product(g).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "{i} {j} {ip}");
            }
        }
    }

    #[test]
    fn guards() {
        let d = GridDomain::<f64>::new(1, 10.0, 64, false).unwrap();
        assert!(matches!(HermiteBasis::<f64>::new(&d, 201), Err(Error::DegreeTooLarge(201))));
        let p = GridDomain::<f64>::new(1, 10.0, 64, true).unwrap();
        assert!(HermiteBasis::<f64>::new(&p, 3).is_err());
    }
}
