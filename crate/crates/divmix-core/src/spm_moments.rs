//! Semiparametric two-component mixtures whose unknown component is known
//! only through moment constraints E₀[g] = m(α).

use crate::divergence::PhiGenerator;
use crate::models::{Component, FamilyTemplate, Observations, ParametricFamily};
use crate::numerics::{integrate_quantile, multistart, newton_polish, rng, solve_spd, OptimizerSpec, QuadratureSpec};
use crate::report::{EstimateReport, Status};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

/// Objective value assigned outside Φₙ⁺.
pub const INFEASIBLE_PENALTY: f64 = 100.0;

/// How m(α) is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MomentTarget {
    /// Moments of a parametric family P₀(·|α).
    Family(FamilyTemplate),
    /// Bivariate targets E x = E y = α and E xy = α² + cov.
    DiagonalCenter { cov: f64 },
}

impl MomentTarget {
    pub fn dim(&self) -> usize {
        match self {
            MomentTarget::Family(t) => t.dim(),
            MomentTarget::DiagonalCenter { .. } => 1,
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            MomentTarget::Family(t) => t.names().into_iter().map(|s| format!("{s}0")).collect(),
            MomentTarget::DiagonalCenter { .. } => vec!["theta".into()],
        }
    }

    pub fn value(&self, alpha: &[f64], i: u32, j: u32) -> Option<f64> {
        match self {
            MomentTarget::Family(t) => {
                let f = t.family(alpha);
                if !f.is_valid() {
                    return None;
                }
                if f.is_bivariate() {
                    f.moment2(i, j)
                } else if j == 0 {
                    f.moment(i)
                } else {
                    None
                }
            }
            MomentTarget::DiagonalCenter { cov } => {
                let a = alpha[0];
                match (i, j) {
                    (0, 0) => Some(1.0),
                    (1, 0) | (0, 1) => Some(a),
                    (1, 1) => Some(a * a + cov),
                    _ => None,
                }
            }
        }
    }

    fn bounds(&self, obs: &Observations) -> Vec<(f64, f64)> {
        match self {
            MomentTarget::Family(t) => Component::Family(t.clone()).bounds(obs),
            MomentTarget::DiagonalCenter { .. } => {
                let (lo, hi, sd) = crate::models::data_range(&obs.first_coords());
                vec![(lo - 5.0 * sd, hi + 5.0 * sd)]
            }
        }
    }

    fn start_box(&self, obs: &Observations) -> Vec<(f64, f64)> {
        match self {
            MomentTarget::Family(t) => Component::Family(t.clone()).start_box(obs),
            MomentTarget::DiagonalCenter { .. } => {
                let (lo, hi, _) = crate::models::data_range(&obs.first_coords());
                vec![(lo, hi)]
            }
        }
    }
}

/// g = (1, g₁, …, g_ℓ) with monomials gₖ(x, y) = x^i y^j; g₀ ≡ 1 is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraintSet {
    pub exponents: Vec<(u32, u32)>,
    pub target: MomentTarget,
}

impl MomentConstraintSet {
    /// g = (1, x, …, x^ℓ).
    pub fn univariate(l: u32, target: FamilyTemplate) -> Self {
        MomentConstraintSet { exponents: (1..=l).map(|i| (i, 0)).collect(), target: MomentTarget::Family(target) }
    }

    /// g = (1, x, y), targets (1, θ, θ).
    pub fn bivariate_m1(cov: f64) -> Self {
        MomentConstraintSet { exponents: vec![(1, 0), (0, 1)], target: MomentTarget::DiagonalCenter { cov } }
    }

    /// g = (1, x, y, xy), targets (1, θ, θ, θ² + cov).
    pub fn bivariate_m2(cov: f64) -> Self {
        MomentConstraintSet { exponents: vec![(1, 0), (0, 1), (1, 1)], target: MomentTarget::DiagonalCenter { cov } }
    }

    pub fn full(&self) -> Vec<(u32, u32)> {
        let mut v = vec![(0, 0)];
        v.extend(self.exponents.iter().copied());
        v
    }

    /// Every exponent pair needed by Ω.
    pub fn needed(&self) -> Vec<(u32, u32)> {
        let f = self.full();
        let mut set = std::collections::BTreeSet::new();
        for a in &f {
            for b in &f {
                set.insert((a.0 + b.0, a.1 + b.1));
            }
        }
        set.into_iter().collect()
    }
}

/// Moments of the data (or of any known law) indexed by exponent pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    map: BTreeMap<(u32, u32), f64>,
}

impl MomentTable {
    pub fn empirical(obs: &Observations, needed: &[(u32, u32)]) -> Self {
        let n = obs.len() as f64;
        let map = needed
            .iter()
            .map(|&(i, j)| {
                let s: f64 = (0..obs.len()).map(|k| obs.monomial(k, i, j)).sum();
                ((i, j), s / n)
            })
            .collect();
        MomentTable { map }
    }

    pub fn from_fn<F: Fn(u32, u32) -> Option<f64>>(needed: &[(u32, u32)], f: F) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(i, j) in needed {
            let v = f(i, j).ok_or_else(|| Error::Unsupported(format!("moment ({i}, {j}) unavailable")))?;
            map.insert((i, j), v);
        }
        Ok(MomentTable { map })
    }

    pub fn get(&self, i: u32, j: u32) -> f64 {
        self.map[&(i, j)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmMomentModel {
    pub component1: Component,
    pub constraints: MomentConstraintSet,
}

impl SpmMomentModel {
    pub fn dim(&self) -> usize {
        1 + self.component1.dim() + self.constraints.target.dim()
    }

    pub fn names(&self) -> Vec<String> {
        let mut v = vec!["lambda".to_string()];
        v.extend(self.component1.names());
        v.extend(self.constraints.target.names());
        v
    }

    /// (λ, θ, α) from the flat parameter vector.
    pub fn split<'a>(&self, phi: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        let d = self.component1.dim();
        (phi[0], &phi[1..1 + d], &phi[1 + d..])
    }

    pub fn bounds(&self, obs: &Observations) -> Vec<(f64, f64)> {
        let mut b = vec![(0.01, 0.99)];
        b.extend(self.component1.bounds(obs));
        b.extend(self.constraints.target.bounds(obs));
        b
    }

    pub fn start_box(&self, obs: &Observations) -> Vec<(f64, f64)> {
        let mut b = vec![(0.05, 0.95)];
        b.extend(self.component1.start_box(obs));
        b.extend(self.constraints.target.start_box(obs));
        b
    }

    /// The parameter count rule ℓ ≥ d + s + 1 is read as: the number of
    /// non-trivial constraints is at least the number of free parameters.
    pub fn validate(&self) -> Result<()> {
        if self.constraints.exponents.len() < self.dim() {
            return Err(Error::Config(format!(
                "{} moment constraints cannot identify {} parameters",
                self.constraints.exponents.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Ω, the residual r = m(α) − ∫g dQ, and ξ = Ω⁻¹ r when Ω is s.p.d.
#[derive(Debug, Clone)]
pub struct OmegaXi {
    pub omega: DMatrix<f64>,
    pub residual: DVector<f64>,
    /// `None` outside Φ⁺ (Ω not s.p.d. or ill-conditioned).
    pub xi: Option<DVector<f64>>,
    pub diagnostic: Option<String>,
}

impl OmegaXi {
    /// sup_ξ H = ½ rᵀ Ω⁻¹ r, or `None` outside Φ⁺.
    pub fn value(&self) -> Option<f64> {
        self.xi.as_ref().map(|x| 0.5 * x.dot(&self.residual))
    }
}

/// Moment quantities under the signed measure Q = (1/(1−λ))P − (λ/(1−λ))P₁,
/// with P given by `data_moments`.
pub fn omega_and_xi(model: &SpmMomentModel, phi: &[f64], data_moments: &MomentTable) -> Result<OmegaXi> {
    let (lambda, theta, alpha) = model.split(phi);
    if !(lambda >= 0.0 && lambda < 1.0) {
        return Err(Error::Parameter(format!("proportion {lambda} outside [0, 1)")));
    }
    let f1 = model.component1.family(theta)?;
    let full = model.constraints.full();
    let k = full.len();
    let (a, b) = (1.0 / (1.0 - lambda), lambda / (1.0 - lambda));
    let q = |i: u32, j: u32| -> Result<f64> {
        let m1 = if lambda == 0.0 {
            0.0
        } else {
            model
                .component1
                .moment(&f1, i, j)
                .ok_or_else(|| Error::Unsupported(format!("parametric moment ({i}, {j}) unavailable")))?
        };
        Ok(a * data_moments.get(i, j) - b * m1)
    };
    let mut omega = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in 0..=r {
            let v = q(full[r].0 + full[c].0, full[r].1 + full[c].1)?;
            omega[(r, c)] = v;
            omega[(c, r)] = v;
        }
    }
    let mut residual = DVector::zeros(k);
    for r in 0..k {
        let m = model
            .constraints
            .target
            .value(alpha, full[r].0, full[r].1)
            .ok_or_else(|| Error::Parameter(format!("target moment ({}, {}) unavailable at {alpha:?}", full[r].0, full[r].1)))?;
        residual[r] = m - q(full[r].0, full[r].1)?;
    }
    if !omega.iter().chain(residual.iter()).all(|v| v.is_finite()) {
        return Ok(OmegaXi { omega, residual, xi: None, diagnostic: Some("non-finite moments".into()) });
    }
    match solve_spd(&omega, &residual) {
        Ok(xi) => Ok(OmegaXi { omega, residual, xi: Some(xi), diagnostic: None }),
        Err(e) => Ok(OmegaXi { omega, residual, xi: None, diagnostic: Some(e.to_string()) }),
    }
}

/// φ ↦ sup_ξ Hₙ(φ, ξ) for the χ² generator, with the infeasibility penalty.
pub fn chi2_objective(model: &SpmMomentModel, phi: &[f64], data_moments: &MomentTable) -> f64 {
    match omega_and_xi(model, phi, data_moments) {
        Ok(o) => o.value().filter(|v| v.is_finite()).unwrap_or(INFEASIBLE_PENALTY),
        Err(_) => INFEASIBLE_PENALTY,
    }
}

/// Hₙ(φ, ξ) = ξᵀm(α) − (1/((1−λ)n)) Σ ψ(ξᵀg(Xᵢ)) + (λ/(1−λ)) ∫ψ(ξᵀg) dP₁,
/// evaluated directly from the observations. The P₁ integral uses moments
/// for χ² and quantile quadrature otherwise.
pub fn h_empirical(
    gen: &PhiGenerator,
    model: &SpmMomentModel,
    phi: &[f64],
    xi: &[f64],
    obs: &Observations,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let (lambda, theta, alpha) = model.split(phi);
    let full = model.constraints.full();
    if xi.len() != full.len() {
        return Err(Error::Parameter("xi has the wrong length".into()));
    }
    let f1 = model.component1.family(theta)?;
    let mut lin = 0.0;
    for (k, &(i, j)) in full.iter().enumerate() {
        let m = model.constraints.target.value(alpha, i, j).ok_or_else(|| Error::Parameter("target moment unavailable".into()))?;
        lin += xi[k] * m;
    }
    let xg = |k: usize| -> f64 { full.iter().zip(xi).map(|(&(i, j), x)| x * obs.monomial(k, i, j)).sum() };
    let n = obs.len();
    let sum: f64 = (0..n).map(|k| gen.psi_or_inf(xg(k))).sum::<f64>() / n as f64;
    let int1 = if lambda == 0.0 {
        0.0
    } else if gen.gamma == 2.0 {
        // ψ(t) = t²/2 + t, so ∫ψ(ξᵀg)dP₁ = ½ ξᵀM ξ + ξᵀ∫g dP₁
        let mut s = 0.0;
        for (a, &(i, j)) in full.iter().enumerate() {
            let m = model.component1.moment(&f1, i, j).ok_or_else(|| Error::Unsupported("moment".into()))?;
            s += xi[a] * m;
            for (b, &(k, l)) in full.iter().enumerate() {
                let mm = model.component1.moment(&f1, i + k, j + l).ok_or_else(|| Error::Unsupported("moment".into()))?;
                s += 0.5 * xi[a] * xi[b] * mm;
            }
        }
        s
    } else {
        if f1.is_bivariate() {
            return Err(Error::Unsupported("non-χ² generators with bivariate components".into()));
        }
        integrate_quantile(
            |x| gen.psi_or_inf(full.iter().zip(xi).map(|(&(i, _), v)| v * x.powi(i as i32)).sum()),
            |u| f1.quantile(u),
            quad,
        )?
    };
    Ok(lin - sum / (1.0 - lambda) + lambda / (1.0 - lambda) * int1)
}

/// sup over ξ of [`h_empirical`] by Nelder–Mead from ξ = 0, in coordinates
/// scaled by diag(Ω)^{-1/2} when Ω is available.
pub fn numeric_sup_xi(
    gen: &PhiGenerator,
    model: &SpmMomentModel,
    phi: &[f64],
    obs: &Observations,
    scale: Option<&[f64]>,
    quad: &QuadratureSpec,
) -> (f64, Vec<f64>) {
    let k = model.constraints.full().len();
    let s: Vec<f64> = scale.map(|v| v.to_vec()).unwrap_or_else(|| vec![1.0; k]);
    let to_xi = |eta: &[f64]| eta.iter().zip(&s).map(|(e, c)| e * c).collect::<Vec<_>>();
    let f = |eta: &[f64]| match h_empirical(gen, model, phi, &to_xi(eta), obs, quad) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    };
    let spec = OptimizerSpec::nelder_mead(vec![]).with_tol(1e-12, 1e-15).with_restarts(6);
    let r = multistart(f, &[vec![0.0; k]], &spec);
    let p = newton_polish(f, &r.x, &[], 20);
    let best = if p.f <= r.f { p } else { r };
    (-best.f, to_xi(&best.x))
}

fn default_restarts() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmMomentsConfig {
    pub model: SpmMomentModel,
    #[serde(default = "crate::divergence::PhiGenerator::chi2")]
    pub gen: PhiGenerator,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub start_box: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub optimizer: Option<OptimizerSpec>,
}

impl SpmMomentsConfig {
    pub fn new(model: SpmMomentModel) -> Self {
        SpmMomentsConfig { model, gen: PhiGenerator::chi2(), restarts: 10, seed: 0, bounds: None, start_box: None, optimizer: None }
    }
}

/// Draws `count` points of `start_box` with finite objective below the
/// penalty; a configuration error after 1000 draws without one.
pub fn feasible_starts<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start_box: &[(f64, f64)],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut r = rng(seed ^ 0xFEA5_1B1E);
    let mut out = vec![];
    let mut draws = 0;
    while out.len() < count && draws < 1000 + 100 * count {
        draws += 1;
        let p: Vec<f64> = start_box.iter().map(|&(lo, hi)| lo + (hi - lo) * r.random::<f64>()).collect();
        let v = f(&p);
        if v.is_finite() && v < INFEASIBLE_PENALTY {
            out.push(p);
        }
        if out.is_empty() && draws >= 1000 {
            return Err(Error::Config("no feasible starting point found in 1000 draws".into()));
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no feasible starting point found in 1000 draws".into()));
    }
    Ok(out)
}

/// Multi-start Nelder–Mead. Returns the best report and flags a spread above
/// 0.1 among the three best restarts.
pub fn multistart_report<F: FnMut(&[f64]) -> f64>(
    name: &str,
    names: Vec<String>,
    mut f: F,
    starts: &[Vec<f64>],
    spec: &OptimizerSpec,
) -> EstimateReport {
    let mut results: Vec<_> = starts.iter().map(|s| crate::numerics::nelder_mead(&mut f, s, spec)).collect();
    results.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = &results[0];
    let status = if best.f >= INFEASIBLE_PENALTY || !best.f.is_finite() {
        Status::Degenerate
    } else if best.converged {
        Status::Converged
    } else {
        Status::MaxIter
    };
    let trace: Vec<f64> = results.iter().map(|r| r.f).collect();
    let mut rep = EstimateReport::new(name, names, best.x.clone(), status).with_trace(trace);
    let top: Vec<_> = results.iter().take(3).collect();
    if top.len() > 1 {
        let spread = top
            .iter()
            .flat_map(|r| r.x.iter().zip(&best.x).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread > 0.1 {
            rep = rep.with_diagnostic(format!("top restarts disagree by {spread:.3}"));
        }
    }
    rep
}

/// (λ̂, θ̂, α̂) = arginf_φ sup_ξ Hₙ(φ, ξ).
pub fn estimate_spm_moments(cfg: &SpmMomentsConfig, obs: &Observations) -> Result<EstimateReport> {
    let t0 = Instant::now();
    cfg.model.validate()?;
    if cfg.model.component1.is_bivariate() != obs.is_bivariate() {
        return Err(Error::Config("data dimension does not match the model".into()));
    }
    let bounds = cfg.bounds.clone().unwrap_or_else(|| cfg.model.bounds(obs));
    let sbox = cfg.start_box.clone().unwrap_or_else(|| cfg.model.start_box(obs));
    let spec = cfg.optimizer.clone().map(|s| OptimizerSpec { bounds: bounds.clone(), ..s }).unwrap_or_else(|| OptimizerSpec::nelder_mead(bounds.clone()));
    spec.validate()?;
    let table = MomentTable::empirical(obs, &cfg.model.constraints.needed());
    let rep = if cfg.gen.gamma == 2.0 {
        let f = |p: &[f64]| chi2_objective(&cfg.model, p, &table);
        let starts = feasible_starts(f, &sbox, cfg.restarts.max(1), cfg.seed)?;
        multistart_report("spm_moments", cfg.model.names(), f, &starts, &spec)
    } else {
        let quad = QuadratureSpec::gauss_legendre(16);
        let f = |p: &[f64]| {
            let scale = omega_and_xi(&cfg.model, p, &table).ok().and_then(|o| {
                (0..o.omega.nrows()).map(|i| o.omega[(i, i)]).map(|d| if d > 0.0 { Some(1.0 / d.sqrt()) } else { None }).collect::<Option<Vec<f64>>>()
            });
            let v = numeric_sup_xi(&cfg.gen, &cfg.model, p, obs, scale.as_deref(), &quad).0;
            if v.is_finite() && v < INFEASIBLE_PENALTY { v } else { INFEASIBLE_PENALTY }
        };
        let starts = feasible_starts(|p| chi2_objective(&cfg.model, p, &table), &sbox, cfg.restarts.max(1), cfg.seed)?;
        multistart_report("spm_moments", cfg.model.names(), f, &starts, &spec)
    };
    let xi = omega_and_xi(&cfg.model, &rep.phi_hat, &table).ok().and_then(|o| o.xi).map(|x| x.iter().copied().collect());
    let rep = match xi {
        Some(x) => rep.with_inner(x),
        None => rep,
    };
    Ok(rep.timed(t0))
}

/// Moments of a univariate or bivariate two-component mixture.
pub fn mixture_moment(lambda: f64, f1: &ParametricFamily, f0: &ParametricFamily, i: u32, j: u32) -> Option<f64> {
    let m = |f: &ParametricFamily| if f.is_bivariate() { f.moment2(i, j) } else if j == 0 { f.moment(i) } else { None };
    Some(lambda * m(f1)? + (1.0 - lambda) * m(f0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FamilyKind;

    fn gauss_model() -> SpmMomentModel {
        SpmMomentModel {
            component1: Component::Family(FamilyTemplate::fixed(&ParametricFamily::gaussian(5.0, 1.0))),
            constraints: MomentConstraintSet::univariate(1, FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 1.0], vec![0]).unwrap()),
        }
    }

    #[test]
    fn omega_identity_at_standard_normal() {
        let m = gauss_model();
        let truth = ParametricFamily::gaussian(0.0, 1.0);
        let t = MomentTable::from_fn(&m.constraints.needed(), |i, _| truth.moment(i)).unwrap();
        let o = omega_and_xi(&m, &[0.0, 0.0], &t).unwrap();
        assert_eq!(o.omega, DMatrix::identity(2, 2));
        assert!(o.xi.unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn h_zero_at_zero_xi() {
        let m = gauss_model();
        let obs = Observations::Uni(vec![0.1, -0.3, 2.0]);
        let v = h_empirical(&PhiGenerator::chi2(), &m, &[0.2, 0.0], &[0.0, 0.0], &obs, &QuadratureSpec::default()).unwrap();
        assert_eq!(v, 0.0);
    }
}
