//! Dual-formula φ-divergence estimators and the competing minimum-distance
//! estimators of the parametric chapter.

use crate::divergence::PhiGenerator;
use crate::kde::{smooth_model, KdeConfig, KernelDensityEstimate, KernelKind};
use crate::mle::{default_start, mle};
use crate::models::{FamilyKind, ModelDensity, ModelSpec, ParametricFamily};
use crate::numerics::{brent, integrate_breaks, integrate_scaled, multistart, newton_polish, rng, OptMethod, OptResult, OptimizerSpec, QuadratureSpec};
use crate::report::{EstimateReport, Status};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

fn default_starts() -> usize {
    10
}

/// Quadrature used inside objectives: 16-point Gauss–Legendre on fixed
/// panels in quantile space, so that objectives are smooth in φ.
pub fn objective_quad() -> QuadratureSpec {
    QuadratureSpec::gauss_legendre(16)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub gen: PhiGenerator,
    pub model: ModelSpec,
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Option<OptimizerSpec>,
    #[serde(default = "objective_quad")]
    pub quad: QuadratureSpec,
}

impl DualConfig {
    pub fn new(gen: PhiGenerator, model: ModelSpec) -> Self {
        DualConfig { gen, model, init: None, bounds: None, starts: 10, seed: 0, optimizer: None, quad: objective_quad() }
    }

    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_starts(mut self, s: usize) -> Self {
        self.starts = s.max(1);
        self
    }

    pub fn with_bounds(mut self, b: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(b);
        self
    }

    pub fn resolve(&self, data: &[f64]) -> Result<(Vec<f64>, Vec<(f64, f64)>, OptimizerSpec)> {
        let bounds = self.bounds.clone().unwrap_or_else(|| self.model.bounds(data));
        let init = match (&self.init, &self.model) {
            (Some(v), _) => v.clone(),
            (None, ModelSpec::Single(t)) => mle(t, data).unwrap_or_else(|_| default_start(t, data)),
            (None, ModelSpec::Mixture { .. }) => {
                return Err(Error::Config("mixture estimators need an explicit init".into()))
            }
        };
        if init.len() != self.model.dim() || bounds.len() != init.len() {
            return Err(Error::Config(format!(
                "init/bounds length does not match the {} model parameters",
                self.model.dim()
            )));
        }
        let init: Vec<f64> = init.iter().zip(&bounds).map(|(v, b)| v.clamp(b.0, b.1)).collect();
        let spec = match &self.optimizer {
            Some(s) => OptimizerSpec { bounds: bounds.clone(), ..s.clone() },
            None if init.len() == 1 => OptimizerSpec::brent(bounds[0].0, bounds[0].1),
            None => OptimizerSpec::nelder_mead(bounds.clone()),
        };
        spec.validate()?;
        Ok((init, bounds, spec))
    }
}

/// Scalar minimisation over [lo, hi]: a coarse grid locates the basin, then
/// Brent refines inside the neighbouring grid cells.
pub fn scalar_minimize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let k = 24;
    let grid: Vec<f64> = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let (ib, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let a = grid[ib.saturating_sub(1)];
    let b = grid[(ib + 1).min(k)];
    let r = brent(&mut f, a, b, tol, 300);
    if r.f <= vals[ib] {
        (r.x[0], r.f)
    } else {
        (grid[ib], vals[ib])
    }
}

/// `count` starts: `init` followed by multiplicative/additive jitters of it.
pub fn jittered_starts(init: &[f64], bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed ^ 0x5EED_0123_4567);
    let mut out = vec![init.to_vec()];
    for _ in 1..count.max(1) {
        let v: Vec<f64> = init
            .iter()
            .zip(bounds)
            .map(|(&x, &(lo, hi))| {
                let width = if (hi - lo).is_finite() { hi - lo } else { 10.0 };
                let s = (0.1 * (x.abs() + 0.1)).min(0.1 * width);
                (x + s * (2.0 * r.random::<f64>() - 1.0) * 2.0).clamp(lo, hi)
            })
            .collect();
        out.push(v);
    }
    out
}

fn minimize_outer<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: &[f64],
    bounds: &[(f64, f64)],
    spec: &OptimizerSpec,
    starts: usize,
    seed: u64,
) -> OptResult {
    if spec.method == OptMethod::Brent && init.len() == 1 {
        let (x, fx) = scalar_minimize(|x| f(&[x]), bounds[0].0, bounds[0].1, spec.tol_x);
        let f0 = f(init);
        if f0 < fx {
            return OptResult { x: init.to_vec(), f: f0, evals: 0, converged: true };
        }
        return OptResult { x: vec![x], f: fx, evals: 0, converged: true };
    }
    multistart(f, &jittered_starts(init, bounds, starts, seed), spec)
}

fn status_of(r: &OptResult) -> Status {
    if !r.f.is_finite() {
        Status::Degenerate
    } else if r.converged {
        Status::Converged
    } else {
        Status::MaxIter
    }
}

fn gauss_params(d: &ModelDensity) -> Option<(f64, f64)> {
    match d {
        ModelDensity::Single(f) if f.kind == FamilyKind::Gaussian => Some((f.theta[0], f.theta[1])),
        _ => None,
    }
}

/// ∫ p^γ q^{1−γ}. Closed form for two Gaussians, quantile quadrature under p
/// otherwise. +∞ when the integral diverges.
pub fn power_integral(gamma: f64, p: &ModelDensity, q: &ModelDensity, quad: &QuadratureSpec) -> f64 {
    if let (Some((m1, s1)), Some((m2, s2))) = (gauss_params(p), gauss_params(q)) {
        let den = gamma * s2 * s2 + (1.0 - gamma) * s1 * s1;
        if !(den > 0.0) {
            return f64::INFINITY;
        }
        let d = m1 - m2;
        return s1.powf(1.0 - gamma) * s2.powf(gamma) / den.sqrt()
            * (-gamma * (1.0 - gamma) * d * d / (2.0 * den)).exp();
    }
    p.expect(|x| ((1.0 - gamma) * (q.ln_pdf(x) - p.ln_pdf(x))).exp(), quad)
        .unwrap_or(f64::INFINITY)
}

/// ∫ φ′(p/q) p.
pub fn phi_prime_integral(gen: &PhiGenerator, p: &ModelDensity, q: &ModelDensity, quad: &QuadratureSpec) -> f64 {
    let g = gen.gamma;
    if g == 1.0 {
        if let (Some((m1, s1)), Some((m2, s2))) = (gauss_params(p), gauss_params(q)) {
            return (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5;
        }
        return p.expect(|x| p.ln_pdf(x) - q.ln_pdf(x), quad).unwrap_or(f64::INFINITY);
    }
    (power_integral(g, p, q, quad) - 1.0) / (g - 1.0)
}

/// T(φ, α) = ∫ φ′(p_φ/p_α) p_φ − (1/n) Σ φ#(p_φ/p_α)(yᵢ).
pub fn classical_dual_value(
    gen: &PhiGenerator,
    model: &ModelSpec,
    phi: &[f64],
    alpha: &[f64],
    data: &[f64],
    quad: &QuadratureSpec,
) -> f64 {
    let (p, a) = match (model.density(phi), model.density(alpha)) {
        (Ok(p), Ok(a)) => (p, a),
        _ => return f64::NAN,
    };
    let int = phi_prime_integral(gen, &p, &a, quad);
    let s = data.iter().map(|&y| gen.phi_sharp_or_inf((p.ln_pdf(y) - a.ln_pdf(y)).exp())).sum::<f64>()
        / data.len() as f64;
    int - s
}

/// sup_α T(φ, α), returning (value, α̂).
pub fn classical_sup(
    gen: &PhiGenerator,
    model: &ModelSpec,
    phi: &[f64],
    data: &[f64],
    bounds: &[(f64, f64)],
    alpha_starts: &[Vec<f64>],
    quad: &QuadratureSpec,
) -> (f64, Vec<f64>) {
    let neg = |a: &[f64]| {
        let v = classical_dual_value(gen, model, phi, a, data, quad);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    if phi.len() == 1 {
        let (x, f) = scalar_minimize(|a| neg(&[a]), bounds[0].0, bounds[0].1, 1e-11);
        return (-f, vec![x]);
    }
    // A Newton step from a nearby maximiser is far cheaper than a fresh
    // simplex search; fall back to Nelder–Mead when it does not settle.
    let polished = alpha_starts
        .iter()
        .map(|s| newton_polish(&neg, s, bounds, 12))
        .filter(|r| r.converged && r.f.is_finite() && r.f <= 0.0)
        .min_by(|a, b| a.f.total_cmp(&b.f));
    if let Some(r) = polished {
        return (-r.f, r.x);
    }
    let spec = OptimizerSpec::nelder_mead(bounds.to_vec()).with_tol(1e-10, 1e-12).with_restarts(1);
    let mut starts = vec![phi.to_vec()];
    starts.extend(alpha_starts.iter().cloned());
    let r = multistart(neg, &starts, &spec);
    (-r.f, r.x)
}

/// Classical MDφDE: inf_φ sup_α T(φ, α).
pub fn classical_mdphide(cfg: &DualConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let (init, bounds, spec) = cfg.resolve(data)?;
    // The inner sup is warm-started from the last maximiser found.
    let mut warm = vec![init.clone()];
    let mut trace = vec![];
    let r = minimize_outer(
        |phi| {
            if cfg.model.density(phi).is_err() {
                return f64::INFINITY;
            }
            let (v, a) = classical_sup(&cfg.gen, &cfg.model, phi, data, &bounds, &warm, &cfg.quad);
            if v.is_finite() {
                warm[0] = a;
            }
            if v < trace.last().copied().unwrap_or(f64::INFINITY) {
                trace.push(v);
            }
            v
        },
        &init,
        &bounds,
        &spec,
        cfg.starts,
        cfg.seed,
    );
    let (_, alpha) = classical_sup(&cfg.gen, &cfg.model, &r.x, data, &bounds, &warm, &cfg.quad);
    let mut rep = EstimateReport::new("classical_mdphide", cfg.model.names(), r.x.clone(), status_of(&r))
        .with_inner(alpha)
        .with_trace(trace);
    if rep.status == Status::Degenerate {
        rep = rep.with_diagnostic(format!("inner supremum diverged near phi = {:?}", r.x));
    }
    Ok(rep.timed(t0))
}

/// The kernel-based dual objective
/// φ ↦ ∫ φ′(p_φ/K) p_φ − (1/n) Σ φ#(p_φ/K)(yᵢ).
pub struct KernelDual<'a> {
    pub gen: PhiGenerator,
    pub model: &'a ModelSpec,
    pub kde: &'a KernelDensityEstimate,
    pub data: &'a [f64],
    ln_k: Vec<f64>,
    pub quad: QuadratureSpec,
}

impl<'a> KernelDual<'a> {
    pub fn new(
        gen: PhiGenerator,
        model: &'a ModelSpec,
        kde: &'a KernelDensityEstimate,
        data: &'a [f64],
        quad: QuadratureSpec,
    ) -> Self {
        let ln_k = data.iter().map(|&y| kde.ln_evaluate(y)).collect();
        KernelDual { gen, model, kde, data, ln_k, quad }
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        let p = match self.model.density(phi) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        self.value_at(&p)
    }

    pub fn value_at(&self, p: &ModelDensity) -> f64 {
        let gen = &self.gen;
        // for γ = 0 the integral equals ∫p − ∫K, which does not depend on φ
        let int = if gen.gamma == 0.0 {
            0.0
        } else {
            match p.expect(|x| gen.phi_prime_or_inf((p.ln_pdf(x) - self.kde.ln_evaluate(x)).exp()), &self.quad) {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            }
        };
        let s = self
            .data
            .iter()
            .zip(&self.ln_k)
            .map(|(&y, &lk)| gen.phi_sharp_or_inf((p.ln_pdf(y) - lk).exp()))
            .sum::<f64>()
            / self.data.len() as f64;
        let v = int - s;
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn kernel_compatible(kde: &KernelDensityEstimate, model: &ModelSpec, gen: &PhiGenerator) -> Result<()> {
    let pos_model = match model {
        ModelSpec::Single(t) => t.kind.support().0 >= 0.0,
        ModelSpec::Mixture { component1, component0 } => {
            component1.kind.support().0 >= 0.0 && component0.kind.support().0 >= 0.0
        }
    };
    if pos_model && !kde.kernel.is_asymmetric() && gen.gamma < 0.0 {
        return Err(Error::Config(
            "a symmetric kernel puts mass below 0 where the model has none; use gamma >= 0 or an asymmetric kernel"
                .into(),
        ));
    }
    Ok(())
}

/// Kernel-based MDφDE: inf_φ of the [`KernelDual`] objective.
pub fn kernel_mdphide(cfg: &DualConfig, kde_cfg: &KdeConfig, data: &[f64]) -> Result<EstimateReport> {
    let kde = KernelDensityEstimate::fit(kde_cfg.kernel, kde_cfg.rule, data)?;
    kernel_mdphide_with(cfg, &kde, data)
}

pub fn kernel_mdphide_with(cfg: &DualConfig, kde: &KernelDensityEstimate, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let (init, bounds, spec) = cfg.resolve(data)?;
    if let Err(e) = kernel_compatible(kde, &cfg.model, &cfg.gen) {
        return Ok(EstimateReport::new("kernel_mdphide", cfg.model.names(), init, Status::Degenerate)
            .with_diagnostic(e.to_string())
            .timed(t0));
    }
    let obj = KernelDual::new(cfg.gen, &cfg.model, kde, data, cfg.quad);
    let r = minimize_outer(|phi| obj.value(phi), &init, &bounds, &spec, cfg.starts, cfg.seed);
    Ok(EstimateReport::new("kernel_mdphide", cfg.model.names(), r.x.clone(), status_of(&r))
        .with_inner(vec![kde.bandwidth])
        .with_trace(vec![r.f])
        .timed(t0))
}

/// DφDE: argsup_α T(escort, α).
pub fn dphide(cfg: &DualConfig, data: &[f64], escort: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let (init, bounds, _) = cfg.resolve(data)?;
    if cfg.model.density(escort).is_err() {
        return Err(Error::Parameter(format!("escort {escort:?} outside the model domain")));
    }
    let starts = vec![init];
    let (v, alpha) = classical_sup(&cfg.gen, &cfg.model, escort, data, &bounds, &starts, &cfg.quad);
    let status = if v.is_finite() { Status::Converged } else { Status::Degenerate };
    Ok(EstimateReport::new("dphide", cfg.model.names(), alpha, status)
        .with_inner(escort.to_vec())
        .with_trace(vec![v])
        .timed(t0))
}

/// ∫ p_α^{1+a}/p_θ^a − ((1+a)/a)(1/n) Σ (p_α/p_θ)^a(yᵢ).
pub fn penalized_mdpd_value(
    a: f64,
    model: &ModelSpec,
    alpha: &[f64],
    theta: &[f64],
    data: &[f64],
    quad: &QuadratureSpec,
) -> f64 {
    let (pa, pt) = match (model.density(alpha), model.density(theta)) {
        (Ok(x), Ok(y)) => (x, y),
        _ => return f64::INFINITY,
    };
    let int = power_integral(1.0 + a, &pa, &pt, quad);
    let s = data.iter().map(|&y| (a * (pa.ln_pdf(y) - pt.ln_pdf(y))).exp()).sum::<f64>() / data.len() as f64;
    int - (1.0 + a) / a * s
}

/// ∫ f(x) dx over the union of a KDE's range and the model's bulk.
fn integrate_against_kde<F: Fn(f64) -> f64>(
    f: F,
    kde: &KernelDensityEstimate,
    p: &ModelDensity,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let (klo, khi) = kde.support();
    let (plo, phi) = crate::divergence::Density::support(p);
    let (lo, hi) = (klo.min(plo), khi.max(phi));
    let mut br: Vec<f64> = kde.breakpoints();
    let (c, s) = crate::divergence::Density::scale_hint(p);
    br.extend([c - 8.0 * s, c - 3.0 * s, c, c + 3.0 * s, c + 8.0 * s]);
    br.retain(|v| *v >= lo && *v <= hi && v.is_finite());
    if lo.is_finite() {
        br.push(lo);
    }
    br.sort_by(f64::total_cmp);
    br.dedup();
    let (a, b) = (br[0], br[br.len() - 1]);
    let mid = integrate_breaks(&f, &br, quad)?;
    let left = if a > lo { integrate_scaled(&f, lo, a, a, s, quad)? } else { 0.0 };
    let right = if b < hi { integrate_scaled(&f, b, hi, b, s, quad)? } else { 0.0 };
    Ok(left + mid + right)
}

/// Beran: inf_φ ∫ φ(p_φ/K) K.
pub fn beran(cfg: &DualConfig, kde_cfg: &KdeConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let kde = KernelDensityEstimate::fit(kde_cfg.kernel, kde_cfg.rule, data)?;
    let (init, bounds, spec) = cfg.resolve(data)?;
    let quad = QuadratureSpec::default().with_tol(1e-9, 1e-7);
    let obj = |phi: &[f64]| {
        let p = match cfg.model.density(phi) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        integrate_against_kde(|x| cfg.gen.perspective(p.ln_pdf(x), kde.ln_evaluate(x)), &kde, &p, &quad)
            .unwrap_or(f64::INFINITY)
    };
    let r = minimize_outer(obj, &init, &bounds, &spec, cfg.starts, cfg.seed);
    Ok(EstimateReport::new("beran", cfg.model.names(), r.x.clone(), status_of(&r))
        .with_inner(vec![kde.bandwidth])
        .with_trace(vec![r.f])
        .timed(t0))
}

/// A smoothed model density p*_φ for single families or mixtures.
pub struct SmoothedDensity {
    parts: Vec<(f64, crate::kde::SmoothedModel)>,
}

impl SmoothedDensity {
    pub fn new(p: &ModelDensity, kernel: KernelKind, w: f64) -> Result<Self> {
        let parts = match p {
            ModelDensity::Single(f) => vec![(1.0, smooth_model(f, kernel, w)?)],
            ModelDensity::Mixture(m) => vec![
                (m.lambda, smooth_model(&m.component1, kernel, w)?),
                (1.0 - m.lambda, smooth_model(&m.component0, kernel, w)?),
            ],
        };
        Ok(SmoothedDensity { parts })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.parts.iter().map(|(c, s)| c * s.pdf(x)).sum()
    }
}

/// Basu–Lindsay: inf_φ ∫ φ(p*_φ/K) K with the model smoothed by the same kernel.
pub fn basu_lindsay(cfg: &DualConfig, kde_cfg: &KdeConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    if matches!(kde_cfg.kernel, KernelKind::GammaAsym | KernelKind::RIGAsym) {
        return Err(Error::Unsupported("Basu-Lindsay with asymmetric kernels".into()));
    }
    let kde = KernelDensityEstimate::fit(kde_cfg.kernel, kde_cfg.rule, data)?;
    let (init, bounds, spec) = cfg.resolve(data)?;
    let quad = QuadratureSpec::default().with_tol(1e-9, 1e-7);
    let obj = |phi: &[f64]| {
        let p = match cfg.model.density(phi) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let sm = match SmoothedDensity::new(&p, kde.kernel, kde.bandwidth) {
            Ok(s) => s,
            Err(_) => return f64::INFINITY,
        };
        integrate_against_kde(|x| cfg.gen.perspective(sm.pdf(x).ln(), kde.ln_evaluate(x)), &kde, &p, &quad)
            .unwrap_or(f64::INFINITY)
    };
    let r = minimize_outer(obj, &init, &bounds, &spec, cfg.starts, cfg.seed);
    Ok(EstimateReport::new("basu_lindsay", cfg.model.names(), r.x.clone(), status_of(&r))
        .with_inner(vec![kde.bandwidth])
        .with_trace(vec![r.f])
        .timed(t0))
}

/// ∫ p^{1+a}; closed form (2π)^{−a/2} σ^{−a} / √(1+a) for a Gaussian.
pub fn power_mass(p: &ModelDensity, a: f64, quad: &QuadratureSpec) -> f64 {
    if let Some((_, s)) = gauss_params(p) {
        return (2.0 * std::f64::consts::PI).powf(-a / 2.0) * s.powf(-a) / (1.0 + a).sqrt();
    }
    p.expect(|x| (a * p.ln_pdf(x)).exp(), quad).unwrap_or(f64::INFINITY)
}

pub fn mdpd_value(model: &ModelSpec, a: f64, phi: &[f64], data: &[f64], quad: &QuadratureSpec) -> f64 {
    let p = match model.density(phi) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    let s = data.iter().map(|&y| (a * p.ln_pdf(y)).exp()).sum::<f64>() / data.len() as f64;
    power_mass(&p, a, quad) - (1.0 + a) / a * s
}

/// Minimum density power divergence estimator with trade-off a.
pub fn mdpd(cfg: &DualConfig, a: f64, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    if !(a > 0.0) {
        return Err(Error::Config(format!("MDPD trade-off must be positive, got {a}")));
    }
    let (init, bounds, spec) = cfg.resolve(data)?;
    let r = minimize_outer(|phi| mdpd_value(&cfg.model, a, phi, data, &cfg.quad), &init, &bounds, &spec, cfg.starts, cfg.seed);
    Ok(EstimateReport::new("mdpd", cfg.model.names(), r.x.clone(), status_of(&r))
        .with_trace(vec![r.f])
        .timed(t0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurveAnchor {
    /// sup over α of the classical dual estimate.
    Classical,
    /// Kernel estimate in place of p_α.
    Kernel(KdeConfig),
}

/// Dual estimate of D(p_φ, p_T) along a grid of a scalar parameter.
pub fn dual_curve(
    gen: &PhiGenerator,
    model: &ModelSpec,
    data: &[f64],
    anchor: &CurveAnchor,
    grid: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>> {
    if model.dim() != 1 {
        return Err(Error::Config("dual curves need a scalar parameter".into()));
    }
    match anchor {
        CurveAnchor::Classical => {
            let bounds = model.bounds(data);
            let starts: Vec<Vec<f64>> = vec![];
            Ok(grid
                .iter()
                .map(|&m| (m, classical_sup(gen, model, &[m], data, &bounds, &starts, quad).0))
                .collect())
        }
        CurveAnchor::Kernel(kc) => {
            let kde = KernelDensityEstimate::fit(kc.kernel, kc.rule, data)?;
            let obj = KernelDual::new(*gen, model, &kde, data, *quad);
            Ok(grid.iter().map(|&m| (m, obj.value(&[m]))).collect())
        }
    }
}

/// Gaussian location model N(μ, σ) with σ fixed.
pub fn gaussian_location(sigma: f64) -> ModelSpec {
    ModelSpec::Single(crate::models::FamilyTemplate {
        kind: FamilyKind::Gaussian,
        base: vec![0.0, sigma],
        free: vec![0],
    })
}

/// Gaussian model with both μ and σ free.
pub fn gaussian_full() -> ModelSpec {
    ModelSpec::Single(crate::models::FamilyTemplate::all_free(&ParametricFamily::gaussian(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::divergence;

    #[test]
    fn gaussian_power_integral_matches_quadrature() {
        let p = ModelDensity::Single(ParametricFamily::gaussian(0.3, 1.2));
        let q = ModelDensity::Single(ParametricFamily::gaussian(-0.5, 0.8));
        assert!(power_integral(2.0, &p, &q, &objective_quad()).is_infinite());
        for g in [-1.0, 0.5, 1.5] {
            let closed = power_integral(g, &p, &q, &objective_quad());
            let ModelDensity::Single(pf) = &p else { unreachable!() };
            let ModelDensity::Single(qf) = &q else { unreachable!() };
            let num = crate::numerics::integrate(
                |x| (g * pf.ln_pdf(x) + (1.0 - g) * qf.ln_pdf(x)).exp(),
                f64::NEG_INFINITY,
                f64::INFINITY,
                &QuadratureSpec::tight(),
            )
            .unwrap();
            assert!((closed - num).abs() < 1e-9 * num.max(1.0), "gamma={g}: {closed} vs {num}");
        }
    }

    #[test]
    fn hellinger_gauss_divergence() {
        let q = ParametricFamily::gaussian(2.0, 1.0);
        let p = ParametricFamily::gaussian(0.0, 1.0);
        let d = divergence(&PhiGenerator::hellinger(), &q, &p, &QuadratureSpec::default()).unwrap();
        assert!((d - 4.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn two_point_symmetry() {
        let cfg = DualConfig::new(PhiGenerator::hellinger(), gaussian_location(1.0));
        let r = classical_mdphide(&cfg, &[-1.0, 1.0]).unwrap();
        assert!(r.phi_hat[0].abs() < 1e-6, "{:?}", r.phi_hat);
    }

    #[test]
    fn mdpd_gaussian_mass() {
        let p = ModelDensity::Single(ParametricFamily::gaussian(0.0, 1.7));
        let ModelDensity::Single(f) = &p else { unreachable!() };
        let a = 0.5;
        let num = crate::numerics::integrate(|x| f.pdf(x).powf(1.0 + a), f64::NEG_INFINITY, f64::INFINITY, &QuadratureSpec::tight())
            .unwrap();
        assert!((power_mass(&p, a, &objective_quad()) - num).abs() < 1e-8);
    }
}
