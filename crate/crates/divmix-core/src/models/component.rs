//! The parametric component of a semiparametric mixture, and observation
//! containers for univariate and bivariate data.

use super::family::{FamilyKind, ParametricFamily};
use super::template::{data_range, FamilyTemplate};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observations {
    Uni(Vec<f64>),
    Bi(Vec<[f64; 2]>),
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Observations::Uni(v) => v.len(),
            Observations::Bi(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_bivariate(&self) -> bool {
        matches!(self, Observations::Bi(_))
    }

    pub fn univariate(&self) -> Result<&[f64]> {
        match self {
            Observations::Uni(v) => Ok(v),
            Observations::Bi(_) => Err(Error::Unsupported("this estimator needs univariate data".into())),
        }
    }

    /// x^i y^j at observation k (y ≡ 0 for univariate data, so only j = 0 is meaningful).
    pub fn monomial(&self, k: usize, i: u32, j: u32) -> f64 {
        match self {
            Observations::Uni(v) => v[k].powi(i as i32) * if j == 0 { 1.0 } else { 0.0 },
            Observations::Bi(v) => v[k][0].powi(i as i32) * v[k][1].powi(j as i32),
        }
    }

    /// First coordinates, used for parameter boxes.
    pub fn first_coords(&self) -> Vec<f64> {
        match self {
            Observations::Uni(v) => v.clone(),
            Observations::Bi(v) => v.iter().map(|p| p[0]).collect(),
        }
    }
}

/// Parametric component P₁(·|θ) with its free coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Family(FamilyTemplate),
    /// Bivariate Gaussian centred at (μ, μ + offset), μ free.
    TiedBivariate { offset: f64, sigma: f64, rho: f64 },
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Family(t) => t.dim(),
            Component::TiedBivariate { .. } => 1,
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Component::Family(t) => t.names(),
            Component::TiedBivariate { .. } => vec!["mu".into()],
        }
    }

    pub fn family(&self, free: &[f64]) -> Result<ParametricFamily> {
        let f = match self {
            Component::Family(t) => t.family(free),
            Component::TiedBivariate { offset, sigma, rho } => {
                ParametricFamily::bivariate_gaussian(free[0], free[0] + offset, *sigma, *rho)
            }
        };
        f.validate()?;
        Ok(f)
    }

    pub fn is_bivariate(&self) -> bool {
        match self {
            Component::Family(t) => t.kind == FamilyKind::BivariateGaussian,
            Component::TiedBivariate { .. } => true,
        }
    }

    pub fn bounds(&self, obs: &Observations) -> Vec<(f64, f64)> {
        let (lo, hi, sd) = data_range(&obs.first_coords());
        match self {
            Component::Family(t) => t.bounds(lo, hi, sd),
            Component::TiedBivariate { .. } => vec![(lo - 5.0 * sd, hi + 5.0 * sd)],
        }
    }

    /// A narrower box inside `bounds` to draw random starting points from.
    pub fn start_box(&self, obs: &Observations) -> Vec<(f64, f64)> {
        let (lo, hi, _) = data_range(&obs.first_coords());
        match self {
            Component::Family(t) => template_start_box(t, lo, hi),
            Component::TiedBivariate { .. } => vec![(lo, hi)],
        }
    }

    /// E[x^i y^j] under the component.
    pub fn moment(&self, f: &ParametricFamily, i: u32, j: u32) -> Option<f64> {
        if f.is_bivariate() {
            f.moment2(i, j)
        } else if j == 0 {
            f.moment(i)
        } else {
            None
        }
    }

    /// ln p₁ at an observation.
    pub fn ln_pdf_at(&self, f: &ParametricFamily, obs: &Observations, k: usize) -> f64 {
        match obs {
            Observations::Uni(v) => f.ln_pdf(v[k]),
            Observations::Bi(v) => f.ln_pdf2(v[k][0], v[k][1]),
        }
    }
}

pub fn template_start_box(t: &FamilyTemplate, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let full = t.bounds(lo, hi, 0.0);
    t.free
        .iter()
        .zip(full)
        .map(|(&i, b)| {
            if t.kind.is_location(i) {
                if t.kind == FamilyKind::Lognormal {
                    (lo.max(1e-3).ln(), hi.max(1e-3).ln())
                } else {
                    (lo, hi)
                }
            } else if t.kind == FamilyKind::BivariateGaussian && i == 3 {
                (-0.5, 0.5)
            } else {
                (b.0.max(0.2), b.1.min(5.0))
            }
        })
        .collect()
}
