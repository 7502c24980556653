use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, GridFunction};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Class of a Schrödinger potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", bound = "T: Real")]
pub enum PotentialCondition<T> {
    /// Form-small negative part: `∫V₋|φ|² ≤ δ∫|∇φ|²` with `δ ∈ (0,1)`.
    #[serde(rename = "I")]
    FormSmall { delta: T },
    /// Confining: `V(x) → ∞` as `|x| → ∞`.
    #[serde(rename = "II")]
    Confining,
}

/// Which `H` generates the semigroup `e^{-tH}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum OperatorSpec<T> {
    /// `(-Δ)^{s/2} - c`, diagonal in Fourier on a periodic grid.
    FractionalLaplacian { s: T, c: T },
    /// `-Δ + |x|² - c`.
    ShiftedHermite { c: T },
    /// `-Δ + V` with a tabulated potential.
    Schrodinger { potential: GridFunction<T>, condition: PotentialCondition<T> },
}

/// Finite-difference parameters for the dense kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    /// Half-width `p` of the central second-difference stencil (order `2p`).
    pub stencil_half_width: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { stencil_half_width: 4 }
    }
}

impl<T: Real> OperatorSpec<T> {
    pub fn fractional(s: T, c: T) -> Self {
        Self::FractionalLaplacian { s, c }
    }

    pub fn hermite(c: T) -> Self {
        Self::ShiftedHermite { c }
    }

    /// Shift `c` for the kinds that have one.
    pub fn shift(&self) -> Option<T> {
        match self {
            Self::FractionalLaplacian { c, .. } | Self::ShiftedHermite { c } => Some(*c),
            Self::Schrodinger { .. } => None,
        }
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self, Self::FractionalLaplacian { .. })
    }

    /// Checks the type invariants against the grid the operator will live on.
    pub fn validate(&self, domain: &GridDomain<T>) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidOperator(msg));
        match self {
            Self::FractionalLaplacian { s, c } => {
                if !(*s > T::zero()) || !s.is_finite() {
                    return bad(format!("fractional order s = {s} must be positive"));
                }
                if !c.is_finite() {
                    return bad("shift must be finite".into());
                }
                if !domain.periodic() {
                    return bad("the fractional Laplacian needs a periodic grid".into());
                }
            }
            Self::ShiftedHermite { c } => {
                if !c.is_finite() {
                    return bad("shift must be finite".into());
                }
                if domain.periodic() {
                    return bad("finite-difference operators need a non-periodic grid".into());
                }
            }
            Self::Schrodinger { potential, condition } => {
                if domain.periodic() {
                    return bad("finite-difference operators need a non-periodic grid".into());
                }
                if potential.domain() != domain {
                    return Err(Error::DomainMismatch);
                }
                if potential.values().iter().any(|v| !v.is_finite()) {
                    return bad("potential must be finite on every cell".into());
                }
                match condition {
                    PotentialCondition::FormSmall { delta } => {
                        if !(*delta > T::zero() && *delta < T::one()) {
                            return bad(format!("condition I needs delta in (0, 1), got {delta}"));
                        }
                    }
                    PotentialCondition::Confining => check_confining(potential)?,
                }
            }
        }
        Ok(())
    }
}

/// Width (in cells) of the boundary shell used by the confinement check.
fn shell_width(m: usize) -> usize {
    (m / 16).max(1)
}

/// Condition II on a box: the minimum over the outer shell must exceed the
/// minimum over the interior.
fn check_confining<T: Real>(potential: &GridFunction<T>) -> Result<()> {
    let domain = potential.domain();
    let m = domain.points_per_axis();
    let w = shell_width(m);
    let mut shell_min = T::infinity();
    let mut interior_min = T::infinity();
    for (cell, &v) in potential.values().iter().enumerate() {
        let idx = domain.unravel(cell);
        let on_shell = (0..domain.dim()).any(|a| idx[a] < w || idx[a] >= m - w);
        if on_shell {
            shell_min = shell_min.min(v);
        } else {
            interior_min = interior_min.min(v);
        }
    }
    if shell_min > interior_min {
        Ok(())
    } else {
        Err(Error::InvalidOperator(format!(
            "condition II: boundary-shell minimum {shell_min} does not exceed interior minimum {interior_min}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants() {
        let periodic = GridDomain::<f64>::new(1, 10.0, 64, true).unwrap();
        let walls = GridDomain::<f64>::new(1, 10.0, 64, false).unwrap();
        assert!(OperatorSpec::fractional(0.0, 0.0).validate(&periodic).is_err());
        assert!(OperatorSpec::fractional(1.0, 0.0).validate(&walls).is_err());
        assert!(OperatorSpec::fractional(0.5, -3.0).validate(&periodic).is_ok());
        assert!(OperatorSpec::hermite(1.0).validate(&periodic).is_err());

        let bowl = GridFunction::from_fn(&walls, |x| x[0] * x[0]);
        let ok = OperatorSpec::Schrodinger { potential: bowl.clone(), condition: PotentialCondition::Confining };
        assert!(ok.validate(&walls).is_ok());
        let hill = bowl.scaled(-1.0);
        let bad = OperatorSpec::Schrodinger { potential: hill, condition: PotentialCondition::Confining };
        assert!(bad.validate(&walls).is_err());
        let delta = OperatorSpec::Schrodinger {
            potential: bowl,
            condition: PotentialCondition::FormSmall { delta: 1.0 },
        };
        assert!(delta.validate(&walls).is_err());
    }

    #[test]
    fn serde_tags() {
        let s = OperatorSpec::<f64>::fractional(1.0, 0.5);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"kind":"fractional_laplacian","s":1.0,"c":0.5}"#);
        let cond: PotentialCondition<f64> = serde_json::from_str(r#"{"condition":"I","delta":0.5}"#).unwrap();
        assert_eq!(cond, PotentialCondition::FormSmall { delta: 0.5 });
    }
}
