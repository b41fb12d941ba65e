//! Parameterised models: which family coordinates are free, and how an
//! estimator's flat parameter vector maps onto them.

use super::family::{FamilyKind, ParametricFamily};
use super::mixture::MixtureSpec;
use crate::divergence::Density;
use crate::numerics::{integrate_quantile, QuadratureSpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A family with some coordinates held at `base` and the others free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTemplate {
    pub kind: FamilyKind,
    pub base: Vec<f64>,
    pub free: Vec<usize>,
}

impl FamilyTemplate {
    pub fn new(kind: FamilyKind, base: Vec<f64>, free: Vec<usize>) -> Result<Self> {
        if base.len() != kind.n_params() || free.iter().any(|&i| i >= base.len()) {
            return Err(Error::Config(format!("bad template for {kind:?}: base {base:?}, free {free:?}")));
        }
        Ok(FamilyTemplate { kind, base, free })
    }

    pub fn fixed(f: &ParametricFamily) -> Self {
        FamilyTemplate { kind: f.kind, base: f.theta.clone(), free: vec![] }
    }

    pub fn all_free(f: &ParametricFamily) -> Self {
        FamilyTemplate { kind: f.kind, base: f.theta.clone(), free: (0..f.theta.len()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn family(&self, free_values: &[f64]) -> ParametricFamily {
        let mut theta = self.base.clone();
        for (&i, &v) in self.free.iter().zip(free_values) {
            theta[i] = v;
        }
        ParametricFamily { kind: self.kind, theta }
    }

    pub fn free_values(&self, f: &ParametricFamily) -> Vec<f64> {
        self.free.iter().map(|&i| f.theta[i]).collect()
    }

    pub fn names(&self) -> Vec<String> {
        let n = self.kind.param_names();
        self.free.iter().map(|&i| n[i].to_string()).collect()
    }

    /// Box for the free coordinates: locations within the data range ± 5 sd,
    /// scales and shapes in [1e-3, 50], correlations in (−0.99, 0.99).
    pub fn bounds(&self, data_lo: f64, data_hi: f64, data_sd: f64) -> Vec<(f64, f64)> {
        self.free
            .iter()
            .map(|&i| {
                if self.kind.is_location(i) {
                    if self.kind == FamilyKind::Lognormal {
                        let (lo, hi) = (data_lo.max(1e-300).ln(), data_hi.max(1e-300).ln());
                        let sd = (hi - lo).max(1.0);
                        (lo - 5.0 * sd, hi + 5.0 * sd)
                    } else {
                        (data_lo - 5.0 * data_sd, data_hi + 5.0 * data_sd)
                    }
                } else if self.kind == FamilyKind::BivariateGaussian && i == 3 {
                    (-0.99, 0.99)
                } else {
                    (1e-3, 50.0)
                }
            })
            .collect()
    }
}

/// Either one family or a two-component mixture. The estimator parameter
/// vector is `[free θ]` or `[λ, free θ₁, free θ₀]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Single(FamilyTemplate),
    Mixture { component1: FamilyTemplate, component0: FamilyTemplate },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelDensity {
    Single(ParametricFamily),
    Mixture(MixtureSpec),
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Single(t) => t.dim(),
            ModelSpec::Mixture { component1, component0 } => 1 + component1.dim() + component0.dim(),
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            ModelSpec::Single(t) => t.names(),
            ModelSpec::Mixture { component1, component0 } => {
                let mut v = vec!["lambda".to_string()];
                v.extend(component1.names().into_iter().map(|s| format!("{s}1")));
                v.extend(component0.names().into_iter().map(|s| format!("{s}0")));
                v
            }
        }
    }

    /// The density at `phi`, or a parameter error outside the family domain.
    pub fn density(&self, phi: &[f64]) -> Result<ModelDensity> {
        if phi.len() != self.dim() {
            return Err(Error::Parameter(format!("expected {} parameters, got {}", self.dim(), phi.len())));
        }
        match self {
            ModelSpec::Single(t) => {
                let f = t.family(phi);
                f.validate()?;
                Ok(ModelDensity::Single(f))
            }
            ModelSpec::Mixture { component1, component0 } => {
                let d1 = component1.dim();
                let f1 = component1.family(&phi[1..1 + d1]);
                let f0 = component0.family(&phi[1 + d1..]);
                Ok(ModelDensity::Mixture(MixtureSpec::new(phi[0], f1, f0)?))
            }
        }
    }

    pub fn phi_of(&self, m: &ModelDensity) -> Vec<f64> {
        match (self, m) {
            (ModelSpec::Single(t), ModelDensity::Single(f)) => t.free_values(f),
            (ModelSpec::Mixture { component1, component0 }, ModelDensity::Mixture(m)) => {
                let mut v = vec![m.lambda];
                v.extend(component1.free_values(&m.component1));
                v.extend(component0.free_values(&m.component0));
                v
            }
            _ => panic!("model shape mismatch"),
        }
    }

    pub fn bounds(&self, data: &[f64]) -> Vec<(f64, f64)> {
        let (lo, hi, sd) = data_range(data);
        match self {
            ModelSpec::Single(t) => t.bounds(lo, hi, sd),
            ModelSpec::Mixture { component1, component0 } => {
                let mut b = vec![(0.01, 0.99)];
                b.extend(component1.bounds(lo, hi, sd));
                b.extend(component0.bounds(lo, hi, sd));
                b
            }
        }
    }
}

pub fn data_range(data: &[f64]) -> (f64, f64, f64) {
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = data.len() as f64;
    let m = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    (lo, hi, sd)
}

impl ModelDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            ModelDensity::Single(f) => f.pdf(x),
            ModelDensity::Mixture(m) => m.pdf(x),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            ModelDensity::Single(f) => f.ln_pdf(x),
            ModelDensity::Mixture(m) => m.ln_pdf(x),
        }
    }

    /// E[g(X)] under the model, via the quantile change of variable.
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G, spec: &QuadratureSpec) -> Result<f64> {
        match self {
            ModelDensity::Single(f) => integrate_quantile(&mut g, |u| f.quantile(u), spec),
            ModelDensity::Mixture(m) => m.expect(g, spec),
        }
    }

    pub fn as_mixture(&self) -> Option<&MixtureSpec> {
        match self {
            ModelDensity::Mixture(m) => Some(m),
            _ => None,
        }
    }
}

impl Density for ModelDensity {
    fn pdf(&self, x: f64) -> f64 {
        ModelDensity::pdf(self, x)
    }
    fn ln_pdf(&self, x: f64) -> f64 {
        ModelDensity::ln_pdf(self, x)
    }
    fn support(&self) -> (f64, f64) {
        match self {
            ModelDensity::Single(f) => f.support(),
            ModelDensity::Mixture(m) => Density::support(m),
        }
    }
    fn scale_hint(&self) -> (f64, f64) {
        match self {
            ModelDensity::Single(f) => f.location_scale(),
            ModelDensity::Mixture(m) => m.scale_hint(),
        }
    }
}
