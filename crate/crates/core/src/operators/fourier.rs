//! Real trigonometric eigenbasis of a Fourier multiplier on a periodic grid.
//!
//! Lattice frequencies `ξ_ν = (π/R) ν` come in conjugate pairs `±ν`; each pair
//! contributes a `√2 cos(ξ·x)` and a `√2 sin(ξ·x)` mode, self-conjugate bins
//! (the origin and the Nyquist corners) a single real mode. All modes carry
//! the factor `(2R)^{-n/2}` so the family is orthonormal in the discrete
//! inner product.

use std::cmp::Ordering;

use num_complex::Complex;

use crate::domain::{GridDomain, GridFunction};
use crate::scalar::{CubeFft, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Part {
    Real,
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Mode {
    pub bin: usize,
    pub partner: usize,
    pub part: Part,
}

#[derive(Debug, Clone)]
pub(crate) struct FourierBasis<T: Real> {
    pub domain: GridDomain<T>,
    /// Multiplier value per FFT bin.
    pub symbol: Vec<T>,
    /// Modes in ascending eigenvalue order.
    pub modes: Vec<Mode>,
    fft: CubeFft<T>,
}

impl<T: Real> FourierBasis<T> {
    pub fn new(domain: &GridDomain<T>, symbol_of: impl Fn(T) -> T) -> Self {
        let cells = domain.cells();
        let symbol: Vec<T> = (0..cells).map(|b| symbol_of(domain.frequency_norm(b))).collect();
        let m = domain.points_per_axis();
        let partner_of = |b: usize| {
            let idx = domain.unravel(b);
            let mut p = [0usize; 2];
            for axis in 0..domain.dim() {
                p[axis] = (m - idx[axis]) % m;
            }
            domain.ravel(p)
        };
        let mut modes = Vec::with_capacity(cells);
        for bin in 0..cells {
            let partner = partner_of(bin);
            match bin.cmp(&partner) {
                Ordering::Equal => modes.push(Mode { bin, partner, part: Part::Real }),
                Ordering::Less => {
                    modes.push(Mode { bin, partner, part: Part::Cos });
                    modes.push(Mode { bin, partner, part: Part::Sin });
                }
                Ordering::Greater => {}
            }
        }
        modes.sort_by(|a, b| {
            symbol[a.bin]
                .partial_cmp(&symbol[b.bin])
                .unwrap_or(Ordering::Equal)
                .then(a.bin.cmp(&b.bin))
                .then((a.part as u8).cmp(&(b.part as u8)))
        });
        let fft = CubeFft::new(domain.dim(), m);
        Self { domain: *domain, symbol, modes, fft }
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.modes.iter().map(|m| self.symbol[m.bin]).collect()
    }

    /// `(-1)^{Σν}`: phase between the FFT kernel and `e^{-iξ·x}` at nodes `-R + ih`.
    fn parity(&self, bin: usize) -> T {
        let idx = self.domain.unravel(bin);
        let s: usize = idx.iter().take(self.domain.dim()).sum();
        if s.is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        }
    }

    /// `⟨f, e_ν⟩` for every bin, with `e_ν = e^{iξ·x}/(2R)^{n/2}`.
    fn exponential_coefficients(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.forward(&mut data);
        let scale = (self.domain.cell_volume() / T::from_count(self.domain.cells())).sqrt();
        for (b, z) in data.iter_mut().enumerate() {
            *z = z.scale(scale * self.parity(b));
        }
        data
    }

    fn values_from_exponential(&self, mut data: Vec<Complex<T>>) -> Vec<T> {
        let scale = (T::from_count(self.domain.cells()) / self.domain.cell_volume()).sqrt();
        for (b, z) in data.iter_mut().enumerate() {
            *z = z.scale(scale * self.parity(b));
        }
        self.fft.inverse(&mut data);
        data.into_iter().map(|z| z.re).collect()
    }

    pub fn coefficients(&self, values: &[T]) -> Vec<T> {
        let z = self.exponential_coefficients(values);
        let sqrt2 = T::lit(2.0).sqrt();
        self.modes
            .iter()
            .map(|m| match m.part {
                Part::Real => z[m.bin].re,
                Part::Cos => sqrt2 * z[m.bin].re,
                Part::Sin => -sqrt2 * z[m.bin].im,
            })
            .collect()
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let mut z = vec![zero; self.domain.cells()];
        let inv_sqrt2 = T::one() / T::lit(2.0).sqrt();
        for (m, &a) in self.modes.iter().zip(coeffs) {
            match m.part {
                Part::Real => z[m.bin].re += a,
                Part::Cos => {
                    z[m.bin].re += a * inv_sqrt2;
                    z[m.partner].re += a * inv_sqrt2;
                }
                Part::Sin => {
                    z[m.bin].im -= a * inv_sqrt2;
                    z[m.partner].im += a * inv_sqrt2;
                }
            }
        }
        self.values_from_exponential(z)
    }

    /// Multiplies every bin by `weight(symbol)` via one FFT round trip.
    pub fn apply(&self, values: &[T], weight: impl Fn(T) -> T) -> Vec<T> {
        let mut data: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.forward(&mut data);
        for (z, &lam) in data.iter_mut().zip(&self.symbol) {
            *z = z.scale(weight(lam));
        }
        self.fft.inverse(&mut data);
        data.into_iter().map(|z| z.re).collect()
    }

    /// Values of the `j`-th basis function, evaluated directly.
    pub fn mode_values(&self, j: usize) -> GridFunction<T> {
        let mode = self.modes[j];
        let xi = self.domain.frequency(mode.bin);
        let norm = self.domain.volume().sqrt().recip();
        let sqrt2 = T::lit(2.0).sqrt();
        GridFunction::from_fn(&self.domain, |x| {
            let phase = xi[0] * x[0] + xi[1] * x[1];
            match mode.part {
                Part::Real => phase.cos() * norm,
                Part::Cos => sqrt2 * phase.cos() * norm,
                Part::Sin => sqrt2 * phase.sin() * norm,
            }
        })
    }
}
