//! Measurable sets on the grid and the thick / weakly-thick classifiers.
//!
//! A set is a per-cell indicator rasterized by sample-point membership.
//! Thickness asks that every cube `Q_L(x)` meets `E` in measure at least
//! `γ L^n`; on a periodic grid every wrapped, grid-aligned cube is tested, on
//! a non-periodic grid only the cubes that fit inside the box (reported as a
//! truncation caveat).

use serde::{Deserialize, Serialize};

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fixture menu for [`SetIndicator::from_shape`].
///
/// Axes are zero-based: `HalfSpace { axis: 0, .. }` is `{x₁ > offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum Shape<T> {
    Full,
    Empty,
    HalfSpace { axis: usize, offset: T },
    /// `{x : |x - center| ≥ radius}`.
    BallComplement { center: Vec<T>, radius: T },
    /// `{x : |x - center| < radius}`.
    Ball { center: Vec<T>, radius: T },
    /// Slabs `[j p, j p + fill p)` along the first axis, all `j ∈ ℤ`.
    PeriodicSlabs { period: T, fill_fraction: T },
    /// Axis-aligned box `lower ≤ x < upper`.
    Box { lower: Vec<T>, upper: Vec<T> },
    /// Explicit row-major cell indices.
    Custom { cells: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetIndicator<T> {
    domain: GridDomain<T>,
    cells: Vec<bool>,
}

impl<T: Real> SetIndicator<T> {
    pub fn new(domain: &GridDomain<T>, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != domain.cells() {
            return Err(Error::LengthMismatch { expected: domain.cells(), got: cells.len() });
        }
        Ok(Self { domain: *domain, cells })
    }

    pub fn full(domain: &GridDomain<T>) -> Self {
        Self { domain: *domain, cells: vec![true; domain.cells()] }
    }

    pub fn empty(domain: &GridDomain<T>) -> Self {
        Self { domain: *domain, cells: vec![false; domain.cells()] }
    }

    pub fn from_predicate(domain: &GridDomain<T>, inside: impl Fn([T; 2]) -> bool) -> Self {
        let cells = (0..domain.cells()).map(|c| inside(domain.point(c))).collect();
        Self { domain: *domain, cells }
    }

    /// `make_set`: rasterize a fixture shape.
    pub fn from_shape(domain: &GridDomain<T>, shape: &Shape<T>) -> Result<Self> {
        let n = domain.dim();
        let check_point = |p: &[T], what: &str| -> Result<()> {
            if p.len() != n {
                return Err(Error::InvalidSet(format!("{what} has {} coordinates, need {n}", p.len())));
            }
            Ok(())
        };
        let dist2 = |x: [T; 2], c: &[T]| -> T {
            (0..n).map(|i| (x[i] - c[i]) * (x[i] - c[i])).sum::<T>()
        };
        match shape {
            Shape::Full => Ok(Self::full(domain)),
            Shape::Empty => Ok(Self::empty(domain)),
            Shape::HalfSpace { axis, offset } => {
                if *axis >= n {
                    return Err(Error::InvalidSet(format!("axis {axis} out of range")));
                }
                let (axis, offset) = (*axis, *offset);
                Ok(Self::from_predicate(domain, |x| x[axis] > offset))
            }
            Shape::BallComplement { center, radius } | Shape::Ball { center, radius } => {
                check_point(center, "center")?;
                if !(*radius > T::zero()) {
                    return Err(Error::InvalidSet(format!("radius {radius} must be positive")));
                }
                let r2 = *radius * *radius;
                let outside = matches!(shape, Shape::BallComplement { .. });
                Ok(Self::from_predicate(domain, |x| (dist2(x, center) >= r2) == outside))
            }
            Shape::PeriodicSlabs { period, fill_fraction } => {
                if !(*period > T::zero()) {
                    return Err(Error::InvalidSet(format!("period {period} must be positive")));
                }
                if !(*fill_fraction > T::zero() && *fill_fraction <= T::one()) {
                    return Err(Error::InvalidSet(format!(
                        "fill fraction {fill_fraction} outside (0, 1]"
                    )));
                }
                let (p, fill) = (*period, *fill_fraction);
                Ok(Self::from_predicate(domain, |x| {
                    let phase = x[0] / p - (x[0] / p).floor();
                    phase < fill
                }))
            }
            Shape::Box { lower, upper } => {
                check_point(lower, "lower corner")?;
                check_point(upper, "upper corner")?;
                if (0..n).any(|i| !(lower[i] < upper[i])) {
                    return Err(Error::InvalidSet("box with empty extent".into()));
                }
                Ok(Self::from_predicate(domain, |x| {
                    (0..n).all(|i| x[i] >= lower[i] && x[i] < upper[i])
                }))
            }
            Shape::Custom { cells } => {
                let mut bits = vec![false; domain.cells()];
                for &c in cells {
                    *bits.get_mut(c).ok_or_else(|| {
                        Error::InvalidSet(format!("cell {c} outside the grid"))
                    })? = true;
                }
                Ok(Self { domain: *domain, cells: bits })
            }
        }
    }

    pub fn domain(&self) -> &GridDomain<T> {
        &self.domain
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// `|E| = (number of cells) · h^n`.
    pub fn measure(&self) -> T {
        T::from_count(self.count()) * self.domain.cell_volume()
    }

    pub fn is_full(&self) -> bool {
        self.cells.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self { domain: self.domain, cells: self.cells.iter().map(|&b| !b).collect() }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.domain == other.domain && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Result<Self> {
        self.domain.check_same(&other.domain)?;
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self { domain: self.domain, cells })
    }

    /// Translate by a whole number of cells per axis (periodic wrap or clipping).
    pub fn shifted(&self, offset: [i64; 2]) -> Self {
        let m = self.domain.points_per_axis() as i64;
        let dim = self.domain.dim();
        let mut cells = vec![false; self.cells.len()];
        for (c, &inside) in self.cells.iter().enumerate() {
            if !inside {
                continue;
            }
            let idx = self.domain.unravel(c);
            let mut target = [0usize; 2];
            let mut keep = true;
            for axis in 0..dim {
                let mut j = idx[axis] as i64 + offset[axis];
                if self.domain.periodic() {
                    j = j.rem_euclid(m);
                } else if j < 0 || j >= m {
                    keep = false;
                }
                target[axis] = j as usize;
            }
            if keep {
                cells[self.domain.ravel(target)] = true;
            }
        }
        Self { domain: self.domain, cells }
    }

    /// Run lengths of alternating false/true cells, starting with a false run.
    pub fn run_lengths(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0usize;
        for &b in &self.cells {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_run_lengths(domain: &GridDomain<T>, runs: &[usize]) -> Result<Self> {
        let mut cells = Vec::with_capacity(domain.cells());
        let mut value = false;
        for &r in runs {
            cells.extend(std::iter::repeat_n(value, r));
            value = !value;
        }
        Self::new(domain, cells)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct SetDoc<T> {
    header: GridDomain<T>,
    runs: Vec<usize>,
}

impl<T: Real> Serialize for SetIndicator<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SetDoc { header: self.domain, runs: self.run_lengths() }.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for SetIndicator<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SetDoc::<T>::deserialize(d)?;
        SetIndicator::from_run_lengths(&doc.header, &doc.runs).map_err(serde::de::Error::custom)
    }
}

/// `γ(L)` for one side length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SideDensity<T> {
    pub side_length: T,
    pub gamma: T,
    pub worst_cube_center: [T; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ThicknessReport<T> {
    pub is_thick: bool,
    pub gamma: Option<T>,
    pub side_length: Option<T>,
    pub worst_cube_center: [T; 2],
    pub per_side: Vec<SideDensity<T>>,
    /// Set when only in-box cubes were tested (non-periodic grid).
    pub truncated: bool,
}

/// Sliding window sums of width `w` over one line; periodic lines wrap.
fn window_sums(line: &[u32], w: usize, periodic: bool) -> Vec<u32> {
    let m = line.len();
    let span = if periodic { m + w } else { m };
    let mut prefix = vec![0u32; span + 1];
    for i in 0..span {
        prefix[i + 1] = prefix[i] + line[i % m];
    }
    let starts = if periodic { m } else { m + 1 - w };
    (0..starts).map(|s| prefix[s + w] - prefix[s]).collect()
}

/// `check_thick`: minimum cube density for each candidate side length.
pub fn check_thick<T: Real>(set: &SetIndicator<T>, side_lengths: &[T]) -> Result<ThicknessReport<T>> {
    let domain = set.domain();
    let m = domain.points_per_axis();
    let h = domain.step();
    let periodic = domain.periodic();
    let dim = domain.dim();
    let mut per_side = Vec::with_capacity(side_lengths.len());

    for &side in side_lengths {
        let ratio = side / h;
        let w = ratio.round();
        let aligned = side > T::zero()
            && (ratio - w).abs() <= T::lit(1e-9) * ratio.max(T::one())
            && side <= T::lit(2.0) * domain.half_width() * (T::one() + T::lit(1e-12));
        if !aligned {
            return Err(Error::MisalignedSide(side.as_f64()));
        }
        let w = w.as_f64() as usize;

        // Window counts: first along the fastest axis, then along axis 0.
        let bits: Vec<u32> = set.cells().iter().map(|&b| b as u32).collect();
        let (counts, starts_per_axis) = if dim == 1 {
            let c = window_sums(&bits, w, periodic);
            let len = c.len();
            (c, [len, 1])
        } else {
            let rows: Vec<Vec<u32>> =
                bits.chunks_exact(m).map(|row| window_sums(row, w, periodic)).collect();
            let inner = rows[0].len();
            let mut column = vec![0u32; m];
            let mut outer_len = 0;
            let mut grid = Vec::new();
            for j in 0..inner {
                for (i, row) in rows.iter().enumerate() {
                    column[i] = row[j];
                }
                let sums = window_sums(&column, w, periodic);
                outer_len = sums.len();
                grid.push(sums);
            }
            // grid[j][i] -> row-major over (i, j)
            let mut counts = vec![0u32; outer_len * inner];
            for (j, sums) in grid.iter().enumerate() {
                for (i, &v) in sums.iter().enumerate() {
                    counts[i * inner + j] = v;
                }
            }
            (counts, [outer_len, inner])
        };

        let (argmin, &min_count) =
            counts.iter().enumerate().min_by_key(|(_, &c)| c).expect("at least one window");
        let start = if dim == 1 {
            [argmin, 0]
        } else {
            [argmin / starts_per_axis[1], argmin % starts_per_axis[1]]
        };
        let mut center = [T::zero(); 2];
        for axis in 0..dim {
            let mut c = domain.coordinate(start[axis]) + T::from_count(w - 1) * h / T::lit(2.0);
            if periodic && c >= domain.half_width() {
                c -= T::lit(2.0) * domain.half_width();
            }
            center[axis] = c;
        }
        let cube_cells = w.pow(dim as u32);
        per_side.push(SideDensity {
            side_length: side,
            gamma: T::from_count(min_count as usize) / T::from_count(cube_cells),
            worst_cube_center: center,
        });
    }

    let first_thick = per_side.iter().find(|s| s.gamma > T::zero());
    let worst = per_side.last().map(|s| s.worst_cube_center).unwrap_or([T::zero(); 2]);
    Ok(ThicknessReport {
        is_thick: first_thick.is_some(),
        gamma: first_thick.map(|s| s.gamma),
        side_length: first_thick.map(|s| s.side_length),
        worst_cube_center: first_thick.map(|s| s.worst_cube_center).unwrap_or(worst),
        per_side,
        truncated: !periodic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WeakThicknessReport<T> {
    pub radii: Vec<T>,
    pub densities: Vec<T>,
    /// Minimum density over the upper half of the tested radii.
    pub liminf_proxy: T,
    pub is_weakly_thick: bool,
    pub caveat: String,
}

/// `check_weakly_thick`: density `|E ∩ B(0,r)| / |B(0,r)|` per radius.
pub fn check_weakly_thick<T: Real>(set: &SetIndicator<T>, radii: &[T]) -> Result<WeakThicknessReport<T>> {
    let domain = set.domain();
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    if radii.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("radii must be ascending".into()));
    }
    let r_max = domain.half_width() * (T::one() + T::lit(1e-12));
    let mut densities = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > T::zero()) || r > r_max {
            return Err(Error::InvalidArgument(format!("radius {r} outside (0, R]")));
        }
        let r2 = r * r;
        let (mut in_ball, mut in_both) = (0usize, 0usize);
        for (c, &inside) in set.cells().iter().enumerate() {
            let p = domain.point(c);
            if p[0] * p[0] + p[1] * p[1] <= r2 {
                in_ball += 1;
                in_both += inside as usize;
            }
        }
        if in_ball == 0 {
            return Err(Error::InvalidArgument(format!("ball of radius {r} contains no cell")));
        }
        densities.push(T::from_count(in_both) / T::from_count(in_ball));
    }
    let tail = &densities[densities.len() / 2..];
    let liminf_proxy = tail.iter().fold(T::infinity(), |m, &d| m.min(d));
    Ok(WeakThicknessReport {
        radii: radii.to_vec(),
        densities,
        liminf_proxy,
        is_weakly_thick: liminf_proxy > T::zero(),
        caveat: format!(
            "liminf over r → ∞ approximated by the minimum density over radii ≥ {} inside a box of half width {}",
            tail_start(radii),
            domain.half_width()
        ),
    })
}

fn tail_start<T: Real>(radii: &[T]) -> T {
    radii[radii.len() / 2]
}
