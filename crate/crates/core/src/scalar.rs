//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All grid, operator and certificate code is written against [`Real`], which
//! is implemented for `f32` and `f64`. The trait deliberately builds on
//! nalgebra's `RealField` (for the dense eigen-solvers) and only borrows the
//! pieces of `num-traits` that do not shadow `RealField` method names.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::sync::Arc;

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, ToPrimitive};
use rustfft::FftPlanner;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A one-dimensional in-place FFT of fixed length.
pub trait Transform<T>: Send + Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn process(&self, buffer: &mut [Complex<T>]);
}

struct RustFft<T: rustfft::FftNum>(Arc<dyn rustfft::Fft<T>>);

impl<T: rustfft::FftNum> Transform<T> for RustFft<T> {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn process(&self, buffer: &mut [Complex<T>]) {
        self.0.process(buffer);
    }
}

/// Real scalar type usable throughout the crate.
pub trait Real:
    RealField
    + Copy
    + FloatConst
    + ToPrimitive
    + Display
    + LowerExp
    + Debug
    + Sum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Short tag used in cache keys and result documents.
    const NAME: &'static str;

    /// Machine epsilon.
    const EPS: Self;

    fn lit(value: f64) -> Self;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(value: usize) -> Self {
        Self::lit(value as f64)
    }

    fn infinity() -> Self;

    fn is_nan_value(self) -> bool {
        self.partial_cmp(&self).is_none()
    }

    /// Unnormalized FFT plan; `inverse` selects the `e^{+2πi jk/m}` kernel.
    fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Transform<Self>>;
}

macro_rules! impl_real {
    ($t:ty, $name:literal) => {
        impl Real for $t {
            const NAME: &'static str = $name;
            const EPS: Self = <$t>::EPSILON;

            #[inline]
            fn lit(value: f64) -> Self {
                value as $t
            }

            #[inline]
            fn infinity() -> Self {
                <$t>::INFINITY
            }

            fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Transform<Self>> {
                let mut planner = FftPlanner::<$t>::new();
                let plan = if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                };
                Arc::new(RustFft(plan))
            }
        }
    };
}

impl_real!(f32, "f32");
impl_real!(f64, "f64");

/// Multi-dimensional FFT over a row-major hypercube of side `len`.
#[derive(Clone)]
pub struct CubeFft<T: Real> {
    dim: usize,
    len: usize,
    forward: Arc<dyn Transform<T>>,
    inverse: Arc<dyn Transform<T>>,
}

impl<T: Real> CubeFft<T> {
    pub fn new(dim: usize, len: usize) -> Self {
        Self {
            dim,
            len,
            forward: T::fft_plan(len, false),
            inverse: T::fft_plan(len, true),
        }
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, &*self.forward);
    }

    /// Inverse transform including the `1/len^dim` normalization.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, &*self.inverse);
        let scale = T::one() / T::from_count(data.len());
        for z in data.iter_mut() {
            *z = z.scale(scale);
        }
    }

    fn run(&self, data: &mut [Complex<T>], plan: &dyn Transform<T>) {
        let m = self.len;
        debug_assert_eq!(data.len(), m.pow(self.dim as u32));
        match self.dim {
            1 => plan.process(data),
            2 => {
                for row in data.chunks_exact_mut(m) {
                    plan.process(row);
                }
                let mut column = vec![Complex::new(T::zero(), T::zero()); m];
                for j in 0..m {
                    for i in 0..m {
                        column[i] = data[i * m + j];
                    }
                    plan.process(&mut column);
                    for i in 0..m {
                        data[i * m + j] = column[i];
                    }
                }
            }
            d => unreachable!("unsupported dimension {d}"),
        }
    }
}

impl<T: Real> std::fmt::Debug for CubeFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CubeFft")
            .field("dim", &self.dim)
            .field("len", &self.len)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let fft = CubeFft::<f64>::new(2, 8);
        let orig: Vec<Complex<f64>> = (0..64)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in orig.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_has_single_zero_mode() {
        let fft = CubeFft::<f32>::new(1, 16);
        let mut data = vec![Complex::new(1.0f32, 0.0); 16];
        fft.forward(&mut data);
        assert!((data[0].re - 16.0).abs() < 1e-5);
        assert!(data[1..].iter().all(|z| z.norm() < 1e-5));
    }
}
