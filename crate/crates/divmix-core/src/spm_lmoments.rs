//! Shifted Legendre polynomials, L-moments and the L-moment-constrained
//! semiparametric mixture estimator.

use crate::divergence::PhiGenerator;
use crate::models::component::template_start_box;
use crate::models::{data_range, FamilyKind, FamilyTemplate, MixtureSpec, ParametricFamily};
use crate::numerics::{nelder_mead, newton_polish, solve_spd, GaussLegendre, OptimizerSpec};
use crate::report::EstimateReport;
use crate::spm_moments::{feasible_starts, multistart_report};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Power-basis coefficients of the shifted Legendre polynomial L_r on [0, 1].
pub fn shifted_legendre_coeffs(r: usize) -> Vec<f64> {
    (0..=r)
        .map(|k| {
            let s = if (r - k) % 2 == 0 { 1.0 } else { -1.0 };
            s * binom(r, k) * binom(r + k, k)
        })
        .collect()
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

pub fn shifted_legendre(r: usize, u: f64) -> f64 {
    horner(&shifted_legendre_coeffs(r), u)
}

/// Coefficients of K_r(t) = ∫₀ᵗ L_{r−1}(u) du, obtained by integrating
/// L_{r−1} term by term.
pub fn legendre_k_coeffs(r: usize) -> Vec<f64> {
    assert!(r >= 1);
    let l = shifted_legendre_coeffs(r - 1);
    let mut c = vec![0.0; l.len() + 1];
    for (k, a) in l.iter().enumerate() {
        c[k + 1] = a / (k + 1) as f64;
    }
    c
}

pub fn legendre_k(r: usize, t: f64) -> f64 {
    horner(&legendre_k_coeffs(r), t)
}

/// K_r(t) for each requested order.
pub fn k_vector(orders: &[usize], t: f64) -> Vec<f64> {
    KBasis::new(orders).eval(t)
}

/// Precomputed coefficients of K_r for a fixed set of orders.
#[derive(Debug, Clone)]
pub struct KBasis {
    coeffs: Vec<Vec<f64>>,
}

impl KBasis {
    pub fn new(orders: &[usize]) -> Self {
        KBasis { coeffs: orders.iter().map(|&r| legendre_k_coeffs(r)).collect() }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| horner(c, t)).collect()
    }
}

/// Order-statistics plug-in λ̂_r = −Σ_{i=1}^{n−1} K_r(i/n)(X_{(i+1)} − X_{(i)}),
/// i.e. the L-moments of the empirical law. Order 1 is the sample mean.
pub fn empirical_lmoments(sample: &[f64], orders: &[usize]) -> Vec<f64> {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    orders
        .iter()
        .map(|&r| {
            if r == 1 {
                return x.iter().sum::<f64>() / n as f64;
            }
            let c = legendre_k_coeffs(r);
            -(1..n).map(|i| horner(&c, i as f64 / n as f64) * (x[i] - x[i - 1])).sum::<f64>()
        })
        .collect()
}

/// Unbiased sample L-moments from probability-weighted moments
/// b_k = n⁻¹ Σ C(i−1, k)/C(n−1, k) X_{(i)}, λ_{r} = Σ_k c_{r−1,k} b_k.
pub fn unbiased_lmoments(sample: &[f64], orders: &[usize]) -> Result<Vec<f64>> {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    orders
        .iter()
        .map(|&r| {
            if r == 0 || r > n {
                return Err(Error::Parameter(format!("L-moment of order {r} from {n} observations")));
            }
            let c = shifted_legendre_coeffs(r - 1);
            Ok(c.iter()
                .enumerate()
                .map(|(k, ck)| {
                    let bk = (0..n).map(|i| if i >= k { binom(i, k) / binom(n - 1, k) * x[i] } else { 0.0 }).sum::<f64>();
                    ck * bk / n as f64
                })
                .sum())
        })
        .collect()
}

/// Constraints ∫₀¹ K(u) dF₀⁻¹(u) = m(α), stored as m_r = −λ_r(α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMomentConstraintSet {
    pub orders: Vec<usize>,
    pub target: FamilyTemplate,
}

impl LMomentConstraintSet {
    /// Orders 2..=ℓ.
    pub fn up_to(l: usize, target: FamilyTemplate) -> Self {
        LMomentConstraintSet { orders: (2..=l).collect(), target }
    }

    pub fn m(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let f = self.target.family(alpha);
        f.validate()?;
        self.orders.iter().map(|&r| f.lmoment(r).map(|v| -v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmLMomentModel {
    pub component1: FamilyTemplate,
    pub constraints: LMomentConstraintSet,
}

impl SpmLMomentModel {
    pub fn dim(&self) -> usize {
        1 + self.component1.dim() + self.constraints.target.dim()
    }

    pub fn names(&self) -> Vec<String> {
        let mut v = vec!["lambda".to_string()];
        v.extend(self.component1.names());
        v.extend(self.constraints.target.names().into_iter().map(|s| format!("{s}0")));
        v
    }

    pub fn split<'a>(&self, phi: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        let d = self.component1.dim();
        (phi[0], &phi[1..1 + d], &phi[1 + d..])
    }

    pub fn bounds(&self, data: &[f64]) -> Vec<(f64, f64)> {
        let (lo, hi, sd) = data_range(data);
        let mut b = vec![(0.01, 0.99)];
        b.extend(self.component1.bounds(lo, hi, sd));
        b.extend(self.constraints.target.bounds(lo, hi, sd));
        b
    }

    pub fn start_box(&self, data: &[f64]) -> Vec<(f64, f64)> {
        let (lo, hi, _) = data_range(data);
        let mut b = vec![(0.05, 0.95)];
        b.extend(template_start_box(&self.component1, lo, hi));
        b.extend(template_start_box(&self.constraints.target, lo, hi));
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.orders.iter().any(|&r| r < 2) {
            return Err(Error::Config("L-moment constraints start at order 2".into()));
        }
        let k = self.constraints.orders.len();
        if k < self.dim() {
            return Err(Error::Config(format!("{k} L-moment constraints cannot identify {} parameters", self.dim())));
        }
        if self.component1.kind == FamilyKind::BivariateGaussian || self.constraints.target.kind == FamilyKind::BivariateGaussian {
            return Err(Error::Unsupported("L-moment constraints for bivariate data".into()));
        }
        Ok(())
    }
}

/// The cdf mixed against F₁ in F̂₀: the empirical cdf of a sample or the
/// cdf of a known mixture.
#[derive(Debug, Clone)]
pub enum CdfBase {
    Empirical(Vec<f64>),
    Population(MixtureSpec),
}

impl CdfBase {
    pub fn empirical(sample: &[f64]) -> Self {
        let mut x = sample.to_vec();
        x.sort_by(f64::total_cmp);
        CdfBase::Empirical(x)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            CdfBase::Empirical(x) => x.partition_point(|v| *v <= y) as f64 / x.len() as f64,
            CdfBase::Population(m) => m.cdf(y),
        }
    }

    /// Breakpoints for the y-integrals and a spread used for tail placement.
    fn breaks_and_spread(&self) -> (Vec<f64>, f64) {
        match self {
            CdfBase::Empirical(x) => {
                let (_, _, sd) = data_range(x);
                let mut b = x.clone();
                b.dedup();
                (b, sd.max(1e-6))
            }
            CdfBase::Population(m) => {
                let q = |u: f64| mixture_quantile(m, u);
                let b: Vec<f64> = (1..64).map(|i| q(i as f64 / 64.0)).collect();
                let sd = ((q(0.84) - q(0.16)) / 2.0).max(1e-6);
                let mut b2 = b;
                b2.dedup();
                (b2, sd)
            }
        }
    }
}

fn mixture_quantile(m: &MixtureSpec, u: f64) -> f64 {
    let (mut lo, mut hi) = (
        m.component1.quantile(u).min(m.component0.quantile(u)),
        m.component1.quantile(u).max(m.component0.quantile(u)),
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// F̂₀(y|φ) = (1/(1−λ)) F(y) − (λ/(1−λ)) F₁(y|θ). Not monotone in general.
#[derive(Debug, Clone)]
pub struct SignedCdf<'a> {
    pub base: &'a CdfBase,
    pub lambda: f64,
    pub f1: ParametricFamily,
}

impl SignedCdf<'_> {
    pub fn eval(&self, y: f64) -> f64 {
        let l = self.lambda;
        (self.base.cdf(y) - l * self.f1.cdf(y)) / (1.0 - l)
    }

    /// Quadrature nodes (y, w) for ∫ · dy. Panels run between consecutive
    /// breakpoints of the base cdf, are split to at most half the smaller
    /// of the two scales, and the range is extended until |K(F̂₀)| < 1e-10
    /// at both ends.
    pub fn nodes(&self, orders: &[usize], gl: &GaussLegendre) -> Vec<(f64, f64)> {
        let (breaks, sd) = self.base.breaks_and_spread();
        let (s_lo, s_hi) = self.f1.support();
        let (d_lo, d_hi) = (breaks[0], *breaks.last().unwrap());
        let (clip_lo, clip_hi) = (s_lo.min(d_lo), s_hi.max(d_hi));
        let kb = KBasis::new(orders);
        let small = |y: f64| kb.eval(self.eval(y)).iter().all(|k| k.abs() < 1e-10);
        let mut lo = (d_lo - 5.0 * sd).max(clip_lo);
        let mut hi = (d_hi + 5.0 * sd).min(clip_hi);
        for _ in 0..100 {
            if lo <= clip_lo || small(lo) {
                break;
            }
            lo = (lo - 5.0 * sd).max(clip_lo);
        }
        for _ in 0..100 {
            if hi >= clip_hi || small(hi) {
                break;
            }
            hi = (hi + 5.0 * sd).min(clip_hi);
        }
        let h = 0.5 * self.f1.location_scale().1.min(sd);
        let mut pts = vec![lo];
        pts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        pts.push(hi);
        let mut out = Vec::with_capacity(pts.len() * gl.nodes.len());
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let pieces = ((b - a) / h).ceil().clamp(1.0, 1000.0) as usize;
            let step = (b - a) / pieces as f64;
            for p in 0..pieces {
                let (pa, pb) = (a + p as f64 * step, a + (p + 1) as f64 * step);
                let (c, r) = (0.5 * (pa + pb), 0.5 * (pb - pa));
                for (z, wt) in gl.nodes.iter().zip(&gl.weights) {
                    out.push((c + r * z, r * wt));
                }
            }
        }
        out
    }
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// K(F̂₀(y)) at every node, with the node weight.
fn k_at_nodes(orders: &[usize], cdf: &SignedCdf) -> Vec<(Vec<f64>, f64)> {
    let kb = KBasis::new(orders);
    cdf.nodes(orders, panel_rule())
        .into_iter()
        .map(|(y, w)| (kb.eval(cdf.eval(y)), w))
        .collect()
}

fn signed_cdf<'a>(model: &SpmLMomentModel, phi: &[f64], base: &'a CdfBase) -> Result<SignedCdf<'a>> {
    let (lambda, theta, _) = model.split(phi);
    if !(lambda >= 0.0 && lambda < 1.0) {
        return Err(Error::Parameter(format!("proportion {lambda} outside [0, 1)")));
    }
    let f1 = model.component1.family(theta);
    f1.validate()?;
    Ok(SignedCdf { base, lambda, f1 })
}

/// Ω = ∫K(F̂₀)K(F̂₀)ᵀ dy, r = m(α) − ∫K(F̂₀) dy, and ξ = Ω⁻¹r.
#[derive(Debug, Clone)]
pub struct LOmegaXi {
    pub omega: DMatrix<f64>,
    pub residual: DVector<f64>,
    pub xi: DVector<f64>,
}

impl LOmegaXi {
    /// sup_ξ H = ½ rᵀΩ⁻¹r for the χ² generator.
    pub fn value(&self) -> f64 {
        0.5 * self.xi.dot(&self.residual)
    }
}

pub fn lomega_and_xi(model: &SpmLMomentModel, phi: &[f64], base: &CdfBase) -> Result<LOmegaXi> {
    let cdf = signed_cdf(model, phi, base)?;
    let (_, _, alpha) = model.split(phi);
    let m = model.constraints.m(alpha)?;
    let orders = &model.constraints.orders;
    let k = orders.len();
    let mut omega = DMatrix::zeros(k, k);
    let mut ik = DVector::zeros(k);
    for (kv, w) in k_at_nodes(orders, &cdf) {
        for r in 0..k {
            ik[r] += w * kv[r];
            for c in 0..=r {
                omega[(r, c)] += w * kv[r] * kv[c];
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            omega[(c, r)] = omega[(r, c)];
        }
    }
    let residual = DVector::from_vec(m) - ik;
    if !omega.iter().chain(residual.iter()).all(|v| v.is_finite()) {
        return Err(Error::Integration { at: f64::NAN, msg: "non-finite L-moment integrals".into() });
    }
    let xi = solve_spd(&omega, &residual)?;
    Ok(LOmegaXi { omega, residual, xi })
}

/// H(φ, ξ) = ξᵀm(α) − ∫ψ(ξᵀK(F̂₀(y|φ))) dy.
pub fn h_lmoments(gen: &PhiGenerator, model: &SpmLMomentModel, phi: &[f64], xi: &[f64], base: &CdfBase) -> Result<f64> {
    let cdf = signed_cdf(model, phi, base)?;
    let (_, _, alpha) = model.split(phi);
    let m = model.constraints.m(alpha)?;
    let nodes = k_at_nodes(&model.constraints.orders, &cdf);
    Ok(h_from_nodes(gen, &m, xi, &nodes))
}

fn h_from_nodes(gen: &PhiGenerator, m: &[f64], xi: &[f64], nodes: &[(Vec<f64>, f64)]) -> f64 {
    let lin: f64 = xi.iter().zip(m).map(|(a, b)| a * b).sum();
    let mut s = 0.0;
    for (kv, w) in nodes {
        let t: f64 = xi.iter().zip(kv).map(|(a, b)| a * b).sum();
        if t == 0.0 {
            continue;
        }
        let p = gen.psi_or_inf(t);
        if !p.is_finite() {
            return f64::NEG_INFINITY;
        }
        s += w * p;
    }
    lin - s
}

/// sup_ξ H(φ, ξ) by Nelder–Mead from ξ = 0 followed by a Newton polish.
/// Returns (value, ξ).
pub fn numeric_sup_xi_l(gen: &PhiGenerator, model: &SpmLMomentModel, phi: &[f64], base: &CdfBase) -> Result<(f64, Vec<f64>)> {
    let cdf = signed_cdf(model, phi, base)?;
    let (_, _, alpha) = model.split(phi);
    let m = model.constraints.m(alpha)?;
    let nodes = k_at_nodes(&model.constraints.orders, &cdf);
    let k = m.len();
    let bounds = vec![(-1e4, 1e4); k];
    let spec = OptimizerSpec::nelder_mead(bounds.clone()).with_tol(1e-12, 1e-15).with_restarts(6).with_max_evals(20_000 * k);
    let neg = |x: &[f64]| -h_from_nodes(gen, &m, x, &nodes);
    let mut x0 = vec![0.0; k];
    // a unit simplex around the origin regardless of the wide box
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let r = nelder_mead(neg, &x0, &OptimizerSpec { bounds: x0.iter().map(|v| (v - 10.0, v + 10.0)).collect(), ..spec.clone() });
        x0 = r.x;
        if (best - r.f).abs() < 1e-15 {
            break;
        }
        best = r.f;
    }
    let p = newton_polish(neg, &x0, &bounds, 30);
    Ok((-p.f, p.x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmLMomentsConfig {
    pub model: SpmLMomentModel,
    pub gen: PhiGenerator,
    /// Fixed initial points. Random draws from the start box are used when
    /// empty.
    pub starts: Vec<Vec<f64>>,
    pub restarts: usize,
    pub seed: u64,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub optimizer: Option<OptimizerSpec>,
}

impl SpmLMomentsConfig {
    pub fn new(model: SpmLMomentModel) -> Self {
        SpmLMomentsConfig { model, gen: PhiGenerator::chi2(), starts: vec![], restarts: 10, seed: 0, bounds: None, optimizer: None }
    }

    pub fn with_starts(mut self, starts: Vec<Vec<f64>>) -> Self {
        self.starts = starts;
        self
    }
}

/// φ ↦ sup_ξ H(φ, ξ), +∞ where it cannot be evaluated.
pub fn lmoment_objective(gen: &PhiGenerator, model: &SpmLMomentModel, phi: &[f64], base: &CdfBase) -> f64 {
    let v = if gen.gamma == 2.0 {
        lomega_and_xi(model, phi, base).map(|o| o.value())
    } else {
        numeric_sup_xi_l(gen, model, phi, base).map(|r| r.0)
    };
    v.ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
}

/// φ̂ = arginf_φ sup_ξ H(φ, ξ) with the empirical cdf, over all of Φ.
pub fn estimate_spm_lmoments(cfg: &SpmLMomentsConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    cfg.model.validate()?;
    if data.len() < 2 {
        return Err(Error::Config("L-moment estimation needs at least two observations".into()));
    }
    let bounds = cfg.bounds.clone().unwrap_or_else(|| cfg.model.bounds(data));
    let spec = cfg
        .optimizer
        .clone()
        .map(|s| OptimizerSpec { bounds: bounds.clone(), ..s })
        .unwrap_or_else(|| OptimizerSpec::nelder_mead(bounds.clone()));
    spec.validate()?;
    let base = CdfBase::empirical(data);
    let f = |p: &[f64]| lmoment_objective(&cfg.gen, &cfg.model, p, &base);
    let starts = if cfg.starts.is_empty() {
        feasible_starts(f, &cfg.model.start_box(data), cfg.restarts.max(1), cfg.seed)?
    } else {
        if let Some(s) = cfg.starts.iter().find(|s| s.len() != cfg.model.dim()) {
            return Err(Error::Config(format!("initial point {s:?} has the wrong length")));
        }
        cfg.starts.clone()
    };
    let rep = multistart_report("spm_lmoments", cfg.model.names(), f, &starts, &spec);
    let rep = match lomega_and_xi(&cfg.model, &rep.phi_hat, &base) {
        Ok(o) if cfg.gen.gamma == 2.0 => rep.with_inner(o.xi.iter().copied().collect()),
        _ => rep,
    };
    Ok(rep.timed(t0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_polynomials_match_explicit_forms() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let s = t - 1.0;
            assert!((legendre_k(2, t) - t * s).abs() < 1e-14);
            assert!((legendre_k(3, t) - t * s * (2.0 * t - 1.0)).abs() < 1e-14);
            assert!((legendre_k(4, t) - t * s * (1.0 + 5.0 * s + 5.0 * s * s)).abs() < 1e-13);
        }
        assert_eq!(legendre_k(2, 0.5), -0.25);
    }

    #[test]
    fn two_point_sample() {
        assert!((empirical_lmoments(&[0.0, 1.0], &[2])[0] - 0.25).abs() < 1e-15);
        assert!((unbiased_lmoments(&[1.0, 0.0], &[2]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!(empirical_lmoments(&[3.0; 10], &[2, 3, 4]).iter().all(|v| *v == 0.0));
    }
}
