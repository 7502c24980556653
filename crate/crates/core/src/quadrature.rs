//! Composite Simpson quadrature for semigroup time integrals.
//!
//! Integrands like `‖e^{-tH}φ‖²_{L²(E)}` carry terms `e^{-2λt}` with large
//! `λ`, which vary fastest near the left endpoint. The interval is split
//! into dyadically graded panels `[a, a + d 2^{-J}], …, [a + d/2, b]`, and
//! every panel is refined by node doubling until the total changes by less
//! than the relative tolerance.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpsonOptions {
    pub rel_tol: f64,
    /// Cap on the total number of function evaluations.
    pub max_nodes: usize,
    /// Lower bound on the number of subintervals over the whole interval.
    pub min_subintervals: usize,
    /// Number of dyadic refinement levels `J` toward the left endpoint.
    pub grading_levels: u32,
}

impl SimpsonOptions {
    /// Grading deep enough that the first panel resolves `e^{-rate t}` over an
    /// interval of `length`.
    pub fn graded_for(self, rate: f64, length: f64) -> Self {
        let stiffness = (2.0 * rate.abs() * length).max(1.0);
        let levels = (stiffness.log2().ceil() as u32).clamp(1, 40);
        Self { grading_levels: levels, ..self }
    }
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_nodes: 1 << 14, min_subintervals: 128, grading_levels: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Quadrature<T> {
    pub value: T,
    /// `|S_{2n} - S_n| / 15` at the last doubling.
    pub error_estimate: T,
    pub nodes: usize,
    pub converged: bool,
}

/// `∫_a^b f`.
pub fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, opts: &SimpsonOptions) -> Quadrature<T> {
    let zero = Quadrature { value: T::zero(), error_estimate: T::zero(), nodes: 0, converged: true };
    if !(b > a) {
        return zero;
    }
    let d = b - a;
    let levels = opts.grading_levels;
    let mut edges = vec![a];
    for j in (1..=levels).rev() {
        edges.push(a + d * T::lit(0.5f64.powi(j as i32)));
    }
    edges.push(b);
    let panels = edges.len() - 1;
    let per_panel_min = opts.min_subintervals.div_ceil(panels).max(2);
    let mut intervals = per_panel_min + per_panel_min % 2;

    // Values on the current uniform grid of every panel.
    let mut grids: Vec<Vec<T>> = edges
        .windows(2)
        .map(|w| (0..=intervals).map(|i| f(w[0] + (w[1] - w[0]) * T::from_count(i) / T::from_count(intervals))).collect())
        .collect();
    let mut nodes = grids.iter().map(Vec::len).sum::<usize>();
    let total = |grids: &[Vec<T>], n: usize| -> T {
        edges
            .windows(2)
            .zip(grids)
            .map(|(w, g)| simpson_sum(g, (w[1] - w[0]) / T::from_count(n)))
            .sum()
    };
    let mut current = total(&grids, intervals);
    loop {
        let next_nodes = nodes + panels * intervals;
        if next_nodes > opts.max_nodes {
            return Quadrature { value: current, error_estimate: T::infinity(), nodes, converged: false };
        }
        let refined = intervals * 2;
        for (w, g) in edges.windows(2).zip(grids.iter_mut()) {
            let step = (w[1] - w[0]) / T::from_count(refined);
            let mut out = Vec::with_capacity(refined + 1);
            for (i, &v) in g.iter().enumerate() {
                out.push(v);
                if i < intervals {
                    out.push(f(w[0] + step * T::from_count(2 * i + 1)));
                }
            }
            *g = out;
        }
        nodes = next_nodes;
        intervals = refined;
        let next = total(&grids, intervals);
        let diff = (next - current).abs();
        let err = diff / T::lit(15.0);
        if diff <= T::lit(opts.rel_tol) * next.abs() || diff <= T::lit(1e-300) {
            return Quadrature { value: next + (next - current) / T::lit(15.0), error_estimate: err, nodes, converged: true };
        }
        current = next;
    }
}

fn simpson_sum<T: Real>(values: &[T], h: T) -> T {
    let n = values.len() - 1;
    let mut s = values[0] + values[n];
    for (i, &v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { T::lit(4.0) * v } else { T::lit(2.0) * v };
    }
    s * h / T::lit(3.0)
}
