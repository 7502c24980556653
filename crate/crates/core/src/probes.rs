//! Falsification probes for claimed weak-observability triples `(C, T, α)`.
//!
//! For the fractional kind the probe is the translated heat kernel
//! `u(t, x; l) = e^{ct}(t+l)^{-n/s} g((x - x0)/(t+l)^{1/s})` with
//! `g = F⁻¹e^{-|ξ|^s}`. Its norm decays like `(t+l)^{-n/(2s)}`, so for the
//! right `l` the left side of the inequality exceeds `α‖φ‖` by a fixed
//! fraction and the observation term must carry real mass near `x0`. For the
//! Hermite kind the probe is the ground state `π^{-n/4}e^{-|x|²/2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{compare, Claim, Trajectory};
use crate::domain::{GridDomain, GridFunction};
use crate::error::{Error, Result};
use crate::geometry::SetIndicator;
use crate::operators::{OperatorSpec, SpectralDecomposition};
use crate::quadrature::{simpson, SimpsonOptions};
use crate::scalar::{CubeFft, Real};

use num_complex::Complex;

/// Imaginary part tolerated when sampling a real kernel through the FFT.
pub const IMAGINARY_TOLERANCE: f64 = 1e-12;

/// `g = F⁻¹e^{-|ξ|^s}` sampled on a periodic grid (the periodization of the
/// whole-space kernel).
pub fn build_kernel<T: Real>(s: T, domain: &GridDomain<T>) -> Result<GridFunction<T>> {
    if !domain.periodic() {
        return Err(Error::InvalidGrid("the kernel needs a periodic grid".into()));
    }
    if !(s > T::zero() && s.is_finite()) {
        return Err(Error::InvalidOperator(format!("s = {s} must be positive")));
    }
    let m = domain.points_per_axis();
    let mut data: Vec<Complex<T>> = (0..domain.cells())
        .map(|b| {
            let idx = domain.unravel(b);
            let parity: usize = idx.iter().take(domain.dim()).sum();
            let sign = if parity.is_multiple_of(2) { T::one() } else { -T::one() };
            Complex::new(sign * (-domain.frequency_norm(b).powf(s)).exp(), T::zero())
        })
        .collect();
    CubeFft::new(domain.dim(), m).inverse(&mut data);
    let scale = domain.cell_volume().recip();
    let peak = data.iter().fold(T::zero(), |a, z| a.max(z.re.abs()));
    let residue = data.iter().fold(T::zero(), |a, z| a.max(z.im.abs()));
    if residue > T::lit(IMAGINARY_TOLERANCE) * peak {
        return Err(Error::ImaginaryResidue((residue / peak).as_f64()));
    }
    GridFunction::new(*domain, data.into_iter().map(|z| z.re * scale).collect())
}

/// Largest kernel-grid step; linear interpolation biases norms by about
/// `step²/48`.
pub const KERNEL_STEP: f64 = 0.005;

/// `l0 = T / ((2/(1+α))^{2s/n} - 1)`, which makes
/// `(T+l0)^{-n/(2s)} - α l0^{-n/(2s)} = (1-α)/2 · l0^{-n/(2s)}`.
pub fn choose_l0<T: Real>(t: T, alpha: T, s: T, n: usize) -> Result<T> {
    if !(t > T::zero() && alpha > T::zero() && alpha < T::one() && s > T::zero() && n > 0) {
        return Err(Error::InvalidArgument(format!("choose_l0 needs T > 0, alpha in (0, 1), s > 0 (T = {t}, alpha = {alpha})")));
    }
    let exponent = T::lit(2.0) * s / T::from_count(n);
    let base = T::lit(2.0) / (T::one() + alpha);
    Ok(t / (base.powf(exponent) - T::one()))
}

/// `l0` extended to `α = 0`, where the same formula applies.
fn probe_width<T: Real>(claim: &Claim<T>, s: T, n: usize) -> Result<T> {
    if claim.alpha == T::zero() {
        let exponent = T::lit(2.0) * s / T::from_count(n);
        return Ok(claim.t / (T::lit(2.0).powf(exponent) - T::one()));
    }
    choose_l0(claim.t, claim.alpha, s, n)
}

fn fractional_parts<T: Real>(spec: &OperatorSpec<T>) -> Result<(T, T)> {
    match spec {
        OperatorSpec::FractionalLaplacian { s, c } => Ok((*s, *c)),
        _ => Err(Error::InvalidOperator("kernel probes need the fractional kind".into())),
    }
}

/// Heat-kernel probe centred at `x0` with width parameter `l`, evaluated by
/// rescaling a kernel sampled once on its own grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KernelProbe<T> {
    pub s: T,
    pub c: T,
    pub center: [T; 2],
    pub l: T,
    /// Grid the probe is evaluated on.
    pub domain: GridDomain<T>,
    pub kernel: GridFunction<T>,
    /// `max |g(y)|(1+|y|²)^{(n+s)/2}` over the inner half of the kernel grid.
    pub c1: T,
    /// `‖u(0)‖ l^{n/(2s)}`.
    pub c2: T,
}

impl<T: Real> KernelProbe<T> {
    /// Samples the kernel on a grid fine enough for `t ≤ t_max` and wide
    /// enough for `t = 0`.
    pub fn new(s: T, c: T, center: [T; 2], l: T, domain: &GridDomain<T>, t_max: T) -> Result<Self> {
        if !(l > T::zero() && t_max >= T::zero()) {
            return Err(Error::InvalidArgument(format!("need l > 0 and t_max >= 0 (l = {l})")));
        }
        let n = domain.dim();
        let sigma_min = l.powf(s.recip());
        let sigma_max = (l + t_max).powf(s.recip());
        let half_width = T::lit(2.0) * domain.half_width() / sigma_min;
        let step = (domain.step() / sigma_max).min(T::lit(KERNEL_STEP));
        let cap = if n == 1 { 1 << 16 } else { 1 << 9 };
        let wanted = (T::lit(2.0) * half_width / step).ceil().to_usize().unwrap_or(cap);
        let m = (wanted + wanted % 2).clamp(64, cap);
        let kernel_domain = GridDomain::new(n, half_width, m, true)?;
        let kernel = build_kernel(s, &kernel_domain)?;

        let exponent = (T::from_count(n) + s) / T::lit(2.0);
        let inner = half_width / T::lit(2.0);
        let c1 = kernel
            .values()
            .iter()
            .enumerate()
            .filter_map(|(i, &g)| {
                let y = kernel_domain.point(i);
                let r2 = y[0] * y[0] + y[1] * y[1];
                (y[0].abs() <= inner && y[1].abs() <= inner).then(|| g.abs() * (T::one() + r2).powf(exponent))
            })
            .fold(T::zero(), T::max);
        let mut probe = Self { s, c, center, l, domain: *domain, kernel, c1, c2: T::zero() };
        let initial = probe.solution(T::zero())?;
        probe.c2 = initial.norm() * l.powf(T::from_count(n) / (T::lit(2.0) * s));
        Ok(probe)
    }

    /// Multilinear interpolation of the periodic kernel grid at `y`.
    fn kernel_at(&self, y: [T; 2]) -> T {
        let kd = self.kernel.domain();
        let m = kd.points_per_axis();
        let h = kd.step();
        let mut base = [0usize; 2];
        let mut frac = [T::zero(); 2];
        for axis in 0..kd.dim() {
            let f = (y[axis] + kd.half_width()) / h;
            let fl = f.floor();
            frac[axis] = f - fl;
            base[axis] = (fl.to_i64().unwrap_or(0)).rem_euclid(m as i64) as usize;
        }
        let values = self.kernel.values();
        match kd.dim() {
            1 => {
                let (a, b) = (values[base[0]], values[(base[0] + 1) % m]);
                a + (b - a) * frac[0]
            }
            _ => {
                let at = |i: usize, j: usize| values[kd.ravel([(base[0] + i) % m, (base[1] + j) % m])];
                let lo = at(0, 0) + (at(0, 1) - at(0, 0)) * frac[1];
                let hi = at(1, 0) + (at(1, 1) - at(1, 0)) * frac[1];
                lo + (hi - lo) * frac[0]
            }
        }
    }

    /// `u(t, ·; l)` on the probe grid. Fails once the rescaled kernel width
    /// `(t+l)^{1/s}` exceeds half the box half-width.
    pub fn solution(&self, t: T) -> Result<GridFunction<T>> {
        if t < T::zero() {
            return Err(Error::NegativeTime(t.as_f64()));
        }
        let n = self.domain.dim();
        let sigma = (t + self.l).powf(self.s.recip());
        if sigma > self.domain.half_width() / T::lit(2.0) {
            return Err(Error::ProbeOverflow(format!(
                "kernel width {sigma} exceeds half of R = {}; enlarge the domain",
                self.domain.half_width()
            )));
        }
        let amplitude = (self.c * t).exp() * sigma.powi(n as i32).recip();
        Ok(GridFunction::from_fn(&self.domain, |x| {
            let d = self.domain.displacement(x, self.center);
            amplitude * self.kernel_at([d[0] / sigma, d[1] / sigma])
        }))
    }

    /// `C₂(t+l)^{-n/(2s)}e^{ct}`.
    pub fn predicted_norm(&self, t: T) -> T {
        let n = T::from_count(self.domain.dim());
        self.c2 * (t + self.l).powf(-n / (T::lit(2.0) * self.s)) * (self.c * t).exp()
    }
}

/// `u(t, ·; l)` of `probe`.
pub fn kernel_probe_solution<T: Real>(probe: &KernelProbe<T>, t: T) -> Result<GridFunction<T>> {
    probe.solution(t)
}

/// Nearest cell to `x`, by periodic distance.
fn nearest_cell<T: Real>(domain: &GridDomain<T>, x: [T; 2]) -> usize {
    (0..domain.cells())
        .min_by(|&a, &b| {
            let da = domain.displacement(domain.point(a), x);
            let db = domain.displacement(domain.point(b), x);
            let na = da[0] * da[0] + da[1] * da[1];
            let nb = db[0] * db[0] + db[1] * db[1];
            na.partial_cmp(&nb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0)
}

/// `φ(·; l) = e^{-l(-Δ)^{s/2}} δ_{x0}` on the periodic grid, `x0` snapped to
/// the nearest cell. Returns the datum and the snapped centre.
pub fn probe_datum<T: Real>(dec: &SpectralDecomposition<T>, center: [T; 2], l: T) -> Result<(GridFunction<T>, [T; 2])> {
    let (_, c) = fractional_parts(dec.spec())?;
    let domain = dec.domain();
    let cell = nearest_cell(domain, center);
    let mut delta = GridFunction::zeros(domain);
    delta.values_mut()[cell] = domain.cell_volume().recip();
    let datum = dec.apply_spectral(&delta, |lam| (-l * (lam + c)).exp())?;
    Ok((datum, domain.point(cell)))
}

/// `∫_{|y| > ρ} (1+|y|²)^{-n-s} dy`.
fn tail_integral<T: Real>(rho: T, s: T, n: usize) -> T {
    let (rho, s) = (rho.as_f64(), s.as_f64());
    let value = match n {
        1 => {
            // y = tan θ turns the integrand into cos^{2s} θ.
            let opts = SimpsonOptions { grading_levels: 1, ..SimpsonOptions::default() };
            2.0 * simpson(|th: f64| th.cos().powf(2.0 * s), rho.atan(), std::f64::consts::FRAC_PI_2, &opts).value
        }
        _ => std::f64::consts::PI * (1.0 + rho * rho).powf(-1.0 - s) / (1.0 + s),
    };
    T::lit(value)
}

/// Per-centre outcome of [`falsify_weak_observability`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CenterResult<T> {
    pub center: [T; 2],
    /// `‖e^{-TH}φ‖ - α‖φ‖`.
    pub lhs: T,
    /// `C (∫₀ᵀ‖e^{-tH}φ‖²_{L²(E)} dt)^{1/2}`.
    #[serde(with = "crate::serde_ext::real")]
    pub observation: T,
    pub violated: bool,
    /// `|E ∩ B(x0, L0)|`.
    pub local_mass: T,
    pub quadrature_error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FalsificationReport<T> {
    pub claim: Claim<T>,
    pub s: T,
    pub c: T,
    pub l0: T,
    /// Fitted pointwise kernel constant.
    pub c1: T,
    /// Measured norm constant `‖φ‖ l0^{n/(2s)}`.
    pub c2: T,
    /// `C₂(1-α)l0^{-n/(2s)}/2`.
    pub c3: T,
    /// Radius outside which the observation term is at most `C₃²/2`.
    #[serde(rename = "L0", with = "crate::serde_ext::real")]
    pub big_l0: T,
    /// Lower bound on `|E ∩ B(x0, L0)|` implied by the claim.
    pub local_mass_bound: T,
    pub per_center: Vec<CenterResult<T>>,
    pub violations: usize,
}

/// Tests `claim` against heat-kernel probes centred at each of `centers`.
pub fn falsify_weak_observability<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    claim: &Claim<T>,
    centers: &[[T; 2]],
) -> Result<FalsificationReport<T>> {
    let (s, c) = fractional_parts(dec.spec())?;
    dec.domain().check_same(set.domain())?;
    claim.validate()?;
    let domain = dec.domain();
    let n = domain.dim();
    let l0 = probe_width(claim, s, n)?;
    let half_n_over_s = T::from_count(n) / (T::lit(2.0) * s);
    let kernel = KernelProbe::new(s, c, [T::zero(); 2], l0, domain, claim.t)?;
    let c1 = kernel.c1;

    let opts = SimpsonOptions::default().graded_for(
        dec.eigenvalues().iter().fold(0.0, |m, &l| m.max(2.0 * l.as_f64().abs())),
        claim.t.as_f64(),
    );
    let per_center: Vec<(CenterResult<T>, T)> = centers
        .par_iter()
        .map(|&x0| -> Result<(CenterResult<T>, T)> {
            let (datum, snapped) = probe_datum(dec, x0, l0)?;
            let norm0 = datum.norm();
            let traj = Trajectory::new(dec, dec.coefficients(&datum)?, T::zero());
            let cmp = compare(&traj, set, claim, &opts);
            let integral = cmp.observation.value.max(T::zero());
            let observation = (claim.ln_c + integral.ln() / T::lit(2.0)).exp();
            Ok((
                CenterResult {
                    center: snapped,
                    lhs: cmp.lhs - claim.alpha * norm0,
                    observation,
                    violated: cmp.violated,
                    local_mass: T::zero(),
                    quadrature_error: cmp.observation.error_estimate,
                },
                norm0,
            ))
        })
        .collect::<Result<_>>()?;

    let c2 = per_center.first().map_or(kernel.c2, |r| r.1 * l0.powf(half_n_over_s));
    let c3 = c2 * (T::one() - claim.alpha) * l0.powf(-half_n_over_s) / T::lit(2.0);
    // C²e^{2cT} T C₁² l0^{-2n/s} ∫_{|y|>L/(T+l0)^{1/s}} (1+|y|²)^{-n-s} ≤ C₃²/2.
    let ln_scale = T::lit(2.0) * claim.ln_c + T::lit(2.0) * c * claim.t + claim.t.ln() + T::lit(2.0) * c1.ln()
        - T::lit(4.0) * half_n_over_s * l0.ln();
    let ln_target = T::lit(2.0) * c3.ln() - T::lit(2.0).ln();
    let fits = |rho: T| ln_scale + tail_integral(rho, s, n).ln() <= ln_target;
    let big_l0 = if fits(T::zero()) {
        T::zero()
    } else {
        let mut hi = T::one();
        while !fits(hi) && hi < T::lit(1e12) {
            hi *= T::lit(2.0);
        }
        if fits(hi) {
            let mut lo = T::zero();
            for _ in 0..200 {
                let mid = (lo + hi) / T::lit(2.0);
                if fits(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi * (claim.t + l0).powf(s.recip())
        } else {
            T::infinity()
        }
    };
    let ln_bound = ln_target - (T::lit(2.0) * claim.ln_c + T::lit(2.0) * c * claim.t + claim.t.ln() + T::lit(2.0) * c1.ln()
        - T::lit(4.0) * half_n_over_s * l0.ln());
    let local_mass_bound = ln_bound.exp();

    let mut results: Vec<CenterResult<T>> = per_center.into_iter().map(|r| r.0).collect();
    for r in &mut results {
        r.local_mass = local_mass(set, r.center, big_l0);
    }
    let violations = results.iter().filter(|r| r.violated).count();
    Ok(FalsificationReport {
        claim: *claim,
        s,
        c,
        l0,
        c1,
        c2,
        c3,
        big_l0,
        local_mass_bound,
        per_center: results,
        violations,
    })
}

/// `|E ∩ B(x0, radius)|` with periodic distances.
fn local_mass<T: Real>(set: &SetIndicator<T>, x0: [T; 2], radius: T) -> T {
    let d = set.domain();
    let r2 = radius * radius;
    let count = set
        .cells()
        .iter()
        .enumerate()
        .filter(|(i, &inside)| {
            let v = d.displacement(d.point(*i), x0);
            inside && v[0] * v[0] + v[1] * v[1] < r2
        })
        .count();
    T::from_count(count) * d.cell_volume()
}

impl<T: Real> FalsificationReport<T> {
    /// `x0,lhs,observation,violated` rows; `x0` is written per axis.
    pub fn to_csv(&self, dim: usize) -> String {
        let axes: Vec<String> = (0..dim).map(|a| format!("x0_{a}")).collect();
        let mut out = format!("{},lhs,observation,violated\n", axes.join(","));
        for r in &self.per_center {
            let coords: Vec<String> = r.center[..dim].iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{}\n",
                coords.join(","),
                r.lhs.as_f64(),
                r.observation.as_f64(),
                r.violated
            ));
        }
        out
    }
}

/// Outcome of testing a claim against the Hermite ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HermiteProbeReport<T> {
    pub claim: Claim<T>,
    pub c: T,
    pub dimension: usize,
    /// `∫_E e^{-|x|²} dx` on the grid.
    pub gaussian_mass: T,
    /// `e^{(c-n)T} - α`.
    pub lhs: T,
    /// `C π^{-n/4} (∫₀ᵀe^{2(c-n)t}dt)^{1/2} (∫_E e^{-|x|²})^{1/2}`, the exact observation term.
    pub observation: T,
    /// `C π^{-n/4} T^{1/2} e^{(c-n)T} (∫_E e^{-|x|²})^{1/2}`.
    pub chain_bound: T,
    /// The exact comparison fails.
    pub violated: bool,
    /// `chain_bound < 1 - α`.
    pub chain_violated: bool,
    /// The same comparison on the discrete ground state of `dec`.
    pub grid_violated: bool,
    pub grid_lhs: T,
    #[serde(with = "crate::serde_ext::real")]
    pub grid_observation: T,
}

/// Tests `claim` against `Φ0 = π^{-n/4}e^{-|x|²/2}` for a shifted Hermite `dec`.
pub fn hermite_ground_state_probe<T: Real>(
    dec: &SpectralDecomposition<T>,
    set: &SetIndicator<T>,
    claim: &Claim<T>,
) -> Result<HermiteProbeReport<T>> {
    let c = match dec.spec() {
        OperatorSpec::ShiftedHermite { c } => *c,
        _ => return Err(Error::InvalidOperator("the ground-state probe needs the shifted Hermite kind".into())),
    };
    dec.domain().check_same(set.domain())?;
    claim.validate()?;
    let domain = dec.domain();
    let n = domain.dim();
    let gaussian_mass = set
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &inside)| inside)
        .map(|(i, _)| {
            let x = domain.point(i);
            (-(x[0] * x[0] + x[1] * x[1])).exp()
        })
        .sum::<T>()
        * domain.cell_volume();
    let kappa = c - T::from_count(n);
    let t = claim.t;
    let growth = (kappa * t).exp();
    let time_factor = if kappa.abs() < T::lit(1e-12) {
        t.sqrt()
    } else {
        (((T::lit(2.0) * kappa * t).exp() - T::one()) / (T::lit(2.0) * kappa)).sqrt()
    };
    let prefactor = (claim.ln_c - T::from_count(n) / T::lit(4.0) * T::pi().ln()).exp() * gaussian_mass.sqrt();
    let lhs = growth - claim.alpha;
    let observation = prefactor * time_factor;
    let chain_bound = prefactor * t.sqrt() * growth;

    let mut ground = vec![T::zero(); dec.len()];
    ground[0] = T::one();
    let traj = Trajectory::new(dec, ground, T::zero());
    let opts = SimpsonOptions::default();
    let cmp = compare(&traj, set, claim, &opts);
    let grid_integral = cmp.observation.value.max(T::zero());
    Ok(HermiteProbeReport {
        claim: *claim,
        c,
        dimension: n,
        gaussian_mass,
        lhs,
        observation,
        chain_bound,
        violated: observation < lhs,
        chain_violated: chain_bound < T::one() - claim.alpha,
        grid_violated: cmp.violated,
        grid_lhs: cmp.lhs - claim.alpha,
        grid_observation: (claim.ln_c + grid_integral.ln() / T::lit(2.0)).exp(),
    })
}
