//! Truncated computational domains and the grid functions living on them.
//!
//! A [`GridDomain`] is the box `[-R, R]^n` (`n ∈ {1, 2}`) cut into
//! `m^n` cells of side `h = 2R/m`. Periodic grids sample at the nodes
//! `-R + i h` (the standard FFT lattice, which contains the origin);
//! non-periodic grids sample at cell centers `-R + (i + 1/2) h`, with
//! Dirichlet walls just outside the first and last sample.
//!
//! The discrete inner product is the midpoint rule
//! `⟨f, g⟩ = h^n Σ f_i g_i`, which makes the unitary DFT an exact isometry.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::scalar::{CubeFft, Real};

/// Serialized header shared by grid functions, sets and cached decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridHeader<T> {
    pub dim: usize,
    pub half_width: T,
    pub points_per_axis: usize,
    pub periodic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "GridHeader<T>", into = "GridHeader<T>")]
pub struct GridDomain<T> {
    dim: usize,
    half_width: T,
    points_per_axis: usize,
    periodic: bool,
}

impl<T: Real> TryFrom<GridHeader<T>> for GridDomain<T> {
    type Error = Error;

    fn try_from(h: GridHeader<T>) -> Result<Self> {
        GridDomain::new(h.dim, h.half_width, h.points_per_axis, h.periodic)
    }
}

impl<T: Real> From<GridDomain<T>> for GridHeader<T> {
    fn from(d: GridDomain<T>) -> Self {
        GridHeader {
            dim: d.dim,
            half_width: d.half_width,
            points_per_axis: d.points_per_axis,
            periodic: d.periodic,
        }
    }
}

impl<T: Real> GridDomain<T> {
    /// Validated constructor (`make_grid`).
    pub fn new(dim: usize, half_width: T, points_per_axis: usize, periodic: bool) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("odd resolution {points_per_axis}")));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidGrid(format!("resolution {points_per_axis} below 8")));
        }
        Ok(Self { dim, half_width, points_per_axis, periodic })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn header(&self) -> GridHeader<T> {
        (*self).into()
    }

    /// Total number of cells, `m^n`.
    pub fn cells(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Grid step `h = 2R / m`.
    pub fn step(&self) -> T {
        T::lit(2.0) * self.half_width / T::from_count(self.points_per_axis)
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> T {
        self.step().powi(self.dim as i32)
    }

    /// Volume of the whole box, `(2R)^n`.
    pub fn volume(&self) -> T {
        (T::lit(2.0) * self.half_width).powi(self.dim as i32)
    }

    /// Coordinate of sample `i` along any axis.
    pub fn coordinate(&self, i: usize) -> T {
        let offset = if self.periodic { T::zero() } else { T::lit(0.5) };
        -self.half_width + (T::from_count(i) + offset) * self.step()
    }

    /// Per-axis indices of a row-major cell index (axis 0 varies slowest).
    pub fn unravel(&self, cell: usize) -> [usize; 2] {
        let m = self.points_per_axis;
        match self.dim {
            1 => [cell, 0],
            _ => [cell / m, cell % m],
        }
    }

    pub fn ravel(&self, index: [usize; 2]) -> usize {
        match self.dim {
            1 => index[0],
            _ => index[0] * self.points_per_axis + index[1],
        }
    }

    /// Sample point of a cell; unused trailing coordinates are zero.
    pub fn point(&self, cell: usize) -> [T; 2] {
        let idx = self.unravel(cell);
        let mut p = [T::zero(); 2];
        for (axis, slot) in p.iter_mut().enumerate().take(self.dim) {
            *slot = self.coordinate(idx[axis]);
        }
        p
    }

    /// Signed lattice frequency index `ν ∈ {-m/2, …, m/2 - 1}` of FFT bin `i`.
    pub fn frequency_index(&self, i: usize) -> i64 {
        let m = self.points_per_axis as i64;
        let i = i as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// Lattice spacing `π / R` of the periodic frequency lattice.
    pub fn frequency_step(&self) -> T {
        T::pi() / self.half_width
    }

    /// Frequency vector of a row-major FFT bin.
    pub fn frequency(&self, bin: usize) -> [T; 2] {
        let idx = self.unravel(bin);
        let dxi = self.frequency_step();
        let mut xi = [T::zero(); 2];
        for (axis, slot) in xi.iter_mut().enumerate().take(self.dim) {
            *slot = dxi * T::lit(self.frequency_index(idx[axis]) as f64);
        }
        xi
    }

    pub fn frequency_norm(&self, bin: usize) -> T {
        let xi = self.frequency(bin);
        (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
    }

    /// Displacement `x - y` reduced to the minimal periodic image on periodic grids.
    pub fn displacement(&self, x: [T; 2], y: [T; 2]) -> [T; 2] {
        let mut d = [x[0] - y[0], x[1] - y[1]];
        if self.periodic {
            let period = T::lit(2.0) * self.half_width;
            for v in d.iter_mut().take(self.dim) {
                *v -= period * (*v / period).round();
            }
        }
        d
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }
}

/// A real scalar per grid cell, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "GridFunctionDoc<T>")]
pub struct GridFunction<T> {
    #[serde(rename = "header")]
    domain: GridDomain<T>,
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct GridFunctionDoc<T> {
    header: GridDomain<T>,
    values: Vec<T>,
}

impl<T: Real> TryFrom<GridFunctionDoc<T>> for GridFunction<T> {
    type Error = Error;

    fn try_from(doc: GridFunctionDoc<T>) -> Result<Self> {
        GridFunction::new(doc.header, doc.values)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"SCGF";

impl<T: Real> GridFunction<T> {
    pub fn new(domain: GridDomain<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != domain.cells() {
            return Err(Error::LengthMismatch { expected: domain.cells(), got: values.len() });
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: &GridDomain<T>) -> Self {
        Self { domain: *domain, values: vec![T::zero(); domain.cells()] }
    }

    pub fn constant(domain: &GridDomain<T>, value: T) -> Self {
        Self { domain: *domain, values: vec![value; domain.cells()] }
    }

    /// Samples `f` at every cell's sample point.
    pub fn from_fn(domain: &GridDomain<T>, f: impl Fn([T; 2]) -> T) -> Self {
        let values = (0..domain.cells()).map(|c| f(domain.point(c))).collect();
        Self { domain: *domain, values }
    }

    pub fn domain(&self) -> &GridDomain<T> {
        &self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Discrete `L²` inner product `h^n Σ f g`.
    pub fn inner_product(&self, other: &Self) -> Result<T> {
        self.domain.check_same(&other.domain)?;
        let sum: T = self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum();
        Ok(sum * self.domain.cell_volume())
    }

    pub fn norm_squared(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>() * self.domain.cell_volume()
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// `‖f‖_{L²(E)}`: the discrete norm over the cells of `set`.
    pub fn restrict_norm(&self, set: &SetIndicator<T>) -> Result<T> {
        self.domain.check_same(set.domain())?;
        let sum: T = self
            .values
            .iter()
            .zip(set.cells())
            .filter(|(_, &inside)| inside)
            .map(|(&v, _)| v * v)
            .sum();
        Ok((sum * self.domain.cell_volume()).sqrt())
    }

    /// Pointwise product with the indicator of `set`.
    pub fn restrict(&self, set: &SetIndicator<T>) -> Result<Self> {
        self.domain.check_same(set.domain())?;
        let values = self
            .values
            .iter()
            .zip(set.cells())
            .map(|(&v, &inside)| if inside { v } else { T::zero() })
            .collect();
        Ok(Self { domain: self.domain, values })
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { domain: self.domain, values: self.values.iter().map(|&v| v * factor).collect() }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: T, other: &Self) -> Result<Self> {
        self.domain.check_same(&other.domain)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + factor * b).collect();
        Ok(Self { domain: self.domain, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Unitary Fourier coefficients on a periodic grid, in FFT bin order.
    ///
    /// Normalized so that `Σ |c|² = ‖f‖²` (Parseval).
    pub fn fourier_coefficients(&self) -> Result<Vec<Complex<T>>> {
        if !self.domain.periodic {
            return Err(Error::InvalidGrid("Fourier coefficients need a periodic grid".into()));
        }
        let fft = CubeFft::new(self.domain.dim, self.domain.points_per_axis);
        let mut data: Vec<Complex<T>> =
            self.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        fft.forward(&mut data);
        let scale = (self.domain.cell_volume() / T::from_count(self.domain.cells())).sqrt();
        for z in data.iter_mut() {
            *z = z.scale(scale);
        }
        Ok(data)
    }

    /// Binary encoding: magic, little-endian u32 header length, JSON header,
    /// then the values as little-endian f64 in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.domain.header()).expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + 8 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("grid function bytes: {why}"));
        if bytes.len() < 8 || &bytes[..4] != BINARY_MAGIC {
            return Err(bad("missing magic"));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header_end = 8 + header_len;
        if bytes.len() < header_end {
            return Err(bad("truncated header"));
        }
        let domain: GridDomain<T> = serde_json::from_slice(&bytes[8..header_end])?;
        let payload = &bytes[header_end..];
        if payload.len() != 8 * domain.cells() {
            return Err(bad("payload length does not match the header"));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Self::new(domain, values)
    }
}
