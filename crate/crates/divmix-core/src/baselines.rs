//! Competing estimators for the semiparametric mixture λf₁(·|θ) + (1−λ)f₀:
//! the symmetry method, EM-type weight recurrences, π-maximization and
//! the stochastic EM.

use crate::dual::scalar_minimize;
use crate::kde::{KdeConfig, KernelDensityEstimate, KernelKind};
use crate::mle::weighted_mle;
use crate::models::component::template_start_box;
use crate::models::{data_range, FamilyTemplate};
use crate::numerics::{rng, OptimizerSpec};
use crate::report::{EstimateReport, Status};
use crate::spm_moments::multistart_report;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;
use std::time::Instant;

/// Stopping rule shared by the weight recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterControl {
    /// Stop when ‖wᵏ⁺¹ − wᵏ‖∞ falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterControl {
    fn default() -> Self {
        IterControl { tol: 1e-6, max_iter: 1000 }
    }
}

fn names(t1: &FamilyTemplate) -> Vec<String> {
    let mut v = vec!["lambda".to_string()];
    v.extend(t1.names());
    v
}

fn check_init(t1: &FamilyTemplate, init: &[f64]) -> Result<()> {
    if init.len() != 1 + t1.dim() {
        return Err(Error::Config(format!("initial point needs {} values, got {}", 1 + t1.dim(), init.len())));
    }
    if !(init[0] > 0.0 && init[0] < 1.0) {
        return Err(Error::Config(format!("initial proportion {} outside (0, 1)", init[0])));
    }
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn near_boundary(l: f64) -> bool {
    !(l >= 1e-3 && l <= 1.0 - 1e-3)
}

/* ---------- symmetry method ---------- */

/// Estimate of the mixture cdf used inside H₁ and H₂.
#[derive(Debug, Clone)]
enum CdfHat {
    Empirical(Vec<f64>),
    Gaussian { sorted: Vec<f64>, h: f64 },
}

impl CdfHat {
    fn eval(&self, x: f64) -> f64 {
        match self {
            CdfHat::Empirical(s) => s.partition_point(|v| *v <= x) as f64 / s.len() as f64,
            CdfHat::Gaussian { sorted, h } => {
                // kernels more than 9h away contribute 0 or 1
                let a = sorted.partition_point(|v| *v < x - 9.0 * h);
                let b = sorted.partition_point(|v| *v <= x + 9.0 * h);
                let inner: f64 = sorted[a..b].iter().map(|y| 0.5 * erfc(-(x - y) / (h * SQRT_2))).sum();
                (a as f64 + inner) / sorted.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BordesConfig {
    pub component1: FamilyTemplate,
    /// Smoothed cdf (Gaussian kernel only); the empirical cdf when `None`.
    pub kde: Option<KdeConfig>,
    pub restarts: usize,
    pub seed: u64,
    /// The proportion is confined to (η, 1−η).
    pub eta: f64,
}

impl BordesConfig {
    pub fn new(component1: FamilyTemplate) -> Self {
        BordesConfig { component1, kde: None, restarts: 10, seed: 0, eta: 0.1 }
    }
}

/// Mean of [H₁(xᵢ) − H₂(xᵢ)]² over the sample, φ = (λ, θ, μ₀).
fn bordes_objective(t1: &FamilyTemplate, cdf: &CdfHat, data: &[f64], phi: &[f64]) -> f64 {
    let l = phi[0];
    let d = t1.dim();
    let f1 = t1.family(&phi[1..1 + d]);
    if !f1.is_valid() || !(l > 0.0 && l < 1.0) {
        return f64::INFINITY;
    }
    let mu0 = phi[1 + d];
    let f0 = |y: f64| (cdf.eval(y) - l * f1.cdf(y)) / (1.0 - l);
    data.iter()
        .map(|&x| {
            let h1 = f0(x + mu0);
            let h2 = 1.0 - f0(mu0 - x);
            (h1 - h2).powi(2)
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Least-squares symmetry estimator of (λ, θ, μ₀), with f₀ symmetric about μ₀.
pub fn bordes_symmetry(cfg: &BordesConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let t1 = &cfg.component1;
    if t1.kind.support().0.is_finite() {
        return Err(Error::Unsupported(format!("the symmetry method needs full-line support, {:?} lives on a half-line", t1.kind)));
    }
    if data.len() < 2 {
        return Err(Error::Config("the symmetry method needs at least two observations".into()));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cdf = match cfg.kde {
        None => CdfHat::Empirical(sorted),
        Some(k) if k.kernel == KernelKind::Gaussian => {
            let h = KernelDensityEstimate::fit(k.kernel, k.rule, data)?.bandwidth;
            CdfHat::Gaussian { sorted, h }
        }
        Some(k) => return Err(Error::Unsupported(format!("smoothed cdf for the {:?} kernel", k.kernel))),
    };
    let (lo, hi, sd) = data_range(data);
    let mut bounds = vec![(cfg.eta, 1.0 - cfg.eta)];
    bounds.extend(t1.bounds(lo, hi, sd));
    bounds.push((lo, hi));
    let mut sbox = vec![(cfg.eta, 1.0 - cfg.eta)];
    sbox.extend(template_start_box(t1, lo, hi));
    sbox.push((lo, hi));
    let mut r = rng(cfg.seed ^ 0xB0_4D_E5);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
        .map(|_| sbox.iter().map(|&(a, b)| a + (b - a) * r.random::<f64>()).collect())
        .collect();
    let mut nm = names(t1);
    nm.push("mu0".into());
    let spec = OptimizerSpec::nelder_mead(bounds);
    let rep = multistart_report("bordes_symmetry", nm, |p| bordes_objective(t1, &cdf, data, p), &starts, &spec);
    Ok(rep.timed(t0))
}

/* ---------- EM-type recurrences ---------- */

/// Per-observation parametric densities f₁(xᵢ|θ).
fn f1_at(t1: &FamilyTemplate, theta: &[f64], data: &[f64]) -> Result<Vec<f64>> {
    let f = t1.family(theta);
    f.validate()?;
    Ok(data.iter().map(|&x| f.pdf(x)).collect())
}

fn weight_report(
    name: &str,
    t1: &FamilyTemplate,
    phi: Vec<f64>,
    status: Status,
    trace: Vec<f64>,
    w: Vec<f64>,
    diag: Option<String>,
    t0: Instant,
) -> EstimateReport {
    let mut r = EstimateReport::new(name, names(t1), phi, status).with_trace(trace).with_inner(w);
    if let Some(d) = diag {
        r = r.with_diagnostic(d);
    }
    r.timed(t0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinConfig {
    pub component1: FamilyTemplate,
    pub kde: KdeConfig,
    /// (λ⁰, θ⁰).
    pub init: Vec<f64>,
    /// w⁰; the posterior weights at (λ⁰, θ⁰) with the unweighted kernel
    /// estimate standing in for f₀ when `None`.
    pub weights: Option<Vec<f64>>,
    pub control: IterControl,
}

/// Largest kernel cache (in f64 entries, 8 bytes each) Robin's recurrence
/// builds before falling back to direct evaluation.
const KERNEL_CACHE_ENTRIES: usize = 80_000_000;

/// One pass of the adapted weight recurrence: λ = mean(w), θ by weighted
/// likelihood, f̂₀ from the weights 1 − w, and the new posterior weights.
/// Returns (λ, θ, w').

pub fn robin_step(
    t1: &FamilyTemplate,
    kde: &KernelDensityEstimate,
    data: &[f64],
    theta_prev: &[f64],
    w: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    robin_step_with(t1, data, theta_prev, w, |g| kde.weighted_at(data, g))
}

fn robin_step_with(
    t1: &FamilyTemplate,
    data: &[f64],
    theta_prev: &[f64],
    w: &[f64],
    weighted_kde: impl FnOnce(&[f64]) -> Result<Vec<f64>>,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let lambda = w.iter().sum::<f64>() / w.len() as f64;
    let theta = weighted_mle(t1, data, w, Some(theta_prev))?;
    let g: Vec<f64> = w.iter().map(|v| 1.0 - v).collect();
    let p0 = weighted_kde(&g)?;
    let p1 = f1_at(t1, &theta, data)?;
    let next = p1
        .iter()
        .zip(&p0)
        .map(|(a, b)| {
            let num = lambda * a;
            let den = num + (1.0 - lambda) * b;
            if den > 0.0 {
                num / den
            } else {
                lambda
            }
        })
        .collect();
    Ok((lambda, theta, next))
}

pub fn robin_em(cfg: &RobinConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let t1 = &cfg.component1;
    check_init(t1, &cfg.init)?;
    if cfg.kde.kernel == KernelKind::Epanechnikov {
        return Err(Error::Config("the weight recurrence needs a kernel that is positive everywhere".into()));
    }
    let kde = KernelDensityEstimate::fit(cfg.kde.kernel, cfg.kde.rule, data)?;
    let mut w = match &cfg.weights {
        Some(w) => w.clone(),
        None => {
            // posterior weights at (λ⁰, θ⁰) with the unweighted estimate as f₀
            let l0 = cfg.init[0];
            let p1 = f1_at(t1, &cfg.init[1..], data)?;
            p1.iter()
                .zip(data)
                .map(|(a, &x)| {
                    let num = l0 * a;
                    let den = num + (1.0 - l0) * kde.evaluate(x);
                    if den > 0.0 {
                        num / den
                    } else {
                        l0
                    }
                })
                .collect()
        }
    };
    if w.len() != data.len() || w.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config("initial weights must be n values in [0, 1]".into()));
    }
    // Every step evaluates the weighted estimate at the data, so the kernel
    // values are computed once.
    let cached = kde.kernel_matrix(data, KERNEL_CACHE_ENTRIES);
    let mut theta = cfg.init[1..].to_vec();
    let mut lambda = cfg.init[0];
    let mut trace = vec![];
    let mut status = Status::MaxIter;
    let mut diag = None;
    for _ in 0..cfg.control.max_iter {
        let step = match &cached {
            Some(m) => robin_step_with(t1, data, &theta, &w, |g| m.weighted(g)),
            None => robin_step(t1, &kde, data, &theta, &w),
        };
        let (l, th, next) = match step {
            Ok(v) => v,
            Err(e) => {
                status = Status::Degenerate;
                diag = Some(e.to_string());
                break;
            }
        };
        lambda = l;
        theta = th;
        trace.push(lambda);
        let dw = max_abs_diff(&w, &next);
        w = next;
        if near_boundary(lambda) {
            status = Status::Degenerate;
            diag = Some("proportion reached the boundary".into());
            break;
        }
        if dw < cfg.control.tol {
            status = Status::Converged;
            lambda = w.iter().sum::<f64>() / w.len() as f64;
            break;
        }
    }
    let mut phi = vec![lambda];
    phi.extend(theta);
    Ok(weight_report("robin_em", t1, phi, status, trace, w, diag, t0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SongVariant {
    /// wᵢ = min(1, λf₁/f̂).
    Plain,
    /// wᵢ = min(1, 2λf₁/(λf₁ + f̂)).
    Stabilized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongConfig {
    pub component1: FamilyTemplate,
    pub kde: KdeConfig,
    pub variant: SongVariant,
    pub init: Vec<f64>,
    pub control: IterControl,
}

/// Song weights from the parametric part λf₁ and the mixture estimate f̂.
pub fn song_weights(variant: SongVariant, lambda: f64, p1: &[f64], fhat: &[f64]) -> Vec<f64> {
    p1.iter()
        .zip(fhat)
        .map(|(a, f)| {
            let num = lambda * a;
            let v = match variant {
                SongVariant::Plain => num / f,
                SongVariant::Stabilized => 2.0 * num / (num + f),
            };
            if v.is_nan() {
                0.0
            } else {
                v.min(1.0)
            }
        })
        .collect()
}

pub fn song_em(cfg: &SongConfig, data: &[f64]) -> Result<EstimateReport> {
    let kde = KernelDensityEstimate::fit(cfg.kde.kernel, cfg.kde.rule, data)?;
    song_em_with(cfg, &kde, data)
}

/// As [`song_em`] with an already fitted mixture estimate.
pub fn song_em_with(cfg: &SongConfig, kde: &KernelDensityEstimate, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let t1 = &cfg.component1;
    check_init(t1, &cfg.init)?;
    let fhat: Vec<f64> = data.iter().map(|&x| kde.evaluate(x)).collect();
    let mut lambda = cfg.init[0];
    let mut theta = cfg.init[1..].to_vec();
    let mut w: Vec<f64> = vec![];
    let mut trace = vec![];
    let mut status = Status::MaxIter;
    let mut diag = None;
    for _ in 0..cfg.control.max_iter {
        let p1 = match f1_at(t1, &theta, data) {
            Ok(v) => v,
            Err(e) => {
                status = Status::Degenerate;
                diag = Some(e.to_string());
                break;
            }
        };
        let next = song_weights(cfg.variant, lambda, &p1, &fhat);
        let dw = if trace.is_empty() { f64::INFINITY } else { max_abs_diff(&w, &next) };
        w = next;
        lambda = w.iter().sum::<f64>() / w.len() as f64;
        trace.push(lambda);
        if near_boundary(lambda) {
            status = Status::Degenerate;
            diag = Some("proportion reached the boundary".into());
            break;
        }
        match weighted_mle(t1, data, &w, Some(&theta)) {
            Ok(t) => theta = t,
            Err(e) => {
                status = Status::Degenerate;
                diag = Some(e.to_string());
                break;
            }
        }
        if dw < cfg.control.tol {
            status = Status::Converged;
            break;
        }
    }
    let mut phi = vec![lambda];
    phi.extend(theta);
    Ok(weight_report("song_em", t1, phi, status, trace, w, diag, t0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiMaxConfig {
    pub component1: FamilyTemplate,
    pub kde: KdeConfig,
    /// Search box for θ; the start box over the data when `None`. The sup
    /// is global over this box, so on a two-bump mixture it locks onto the
    /// larger bump unless the box excludes it.
    #[serde(default)]
    pub bracket: Option<Vec<(f64, f64)>>,
    pub restarts: usize,
    pub seed: u64,
}

/// θ ↦ minᵢ f̂(xᵢ)/f₁(xᵢ|θ). Observations with f₁ = 0 impose no bound.
pub fn pi_ratio(t1: &FamilyTemplate, theta: &[f64], data: &[f64], fhat: &[f64]) -> f64 {
    let f = t1.family(theta);
    if !f.is_valid() {
        return f64::NEG_INFINITY;
    }
    data.iter()
        .zip(fhat)
        .filter_map(|(&x, fh)| {
            let p = f.pdf(x);
            if p > 0.0 {
                Some(fh / p)
            } else {
                None
            }
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn song_pi_max(cfg: &PiMaxConfig, data: &[f64]) -> Result<EstimateReport> {
    let kde = KernelDensityEstimate::fit(cfg.kde.kernel, cfg.kde.rule, data)?;
    let fhat: Vec<f64> = data.iter().map(|&x| kde.evaluate(x)).collect();
    song_pi_max_with(cfg, &fhat, data)
}

/// π-maximization from precomputed f̂(xᵢ).
pub fn song_pi_max_with(cfg: &PiMaxConfig, fhat: &[f64], data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let t1 = &cfg.component1;
    let (lo, hi, sd) = data_range(data);
    let bounds = t1.bounds(lo, hi, sd);
    let neg = |th: &[f64]| {
        let v = pi_ratio(t1, th, data, fhat);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let sbox = cfg.bracket.clone().unwrap_or_else(|| template_start_box(t1, lo, hi));
    if sbox.len() != t1.dim() {
        return Err(Error::Config(format!("θ bracket needs {} intervals", t1.dim())));
    }
    let (theta, best) = match t1.dim() {
        0 => (vec![], neg(&[])),
        1 => {
            let (b_lo, b_hi) = sbox[0];
            let (x, f) = scalar_minimize(|t| neg(&[t]), b_lo.max(bounds[0].0), b_hi.min(bounds[0].1), 1e-10);
            (vec![x], f)
        }
        _ => {
            let mut r = rng(cfg.seed ^ 0x91_3A_C5);
            let starts: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
                .map(|_| sbox.iter().map(|&(a, b)| a + (b - a) * r.random::<f64>()).collect())
                .collect();
            let res = crate::numerics::multistart(&neg, &starts, &OptimizerSpec::nelder_mead(sbox.clone()));
            (res.x, res.f)
        }
    };
    let lambda = -best;
    let mut phi = vec![lambda];
    phi.extend(theta);
    let (status, diag) = if !lambda.is_finite() {
        (Status::Degenerate, Some("every density ratio is unbounded".to_string()))
    } else if lambda > 1.0 {
        (Status::Converged, Some(format!("proportion estimate {lambda:.4} exceeds 1")))
    } else {
        (Status::Converged, None)
    };
    let mut r = EstimateReport::new("song_pi_max", names(t1), phi, status).with_trace(vec![best]);
    if let Some(d) = diag {
        r = r.with_diagnostic(d);
    }
    Ok(r.timed(t0))
}

/* ---------- stochastic EM ---------- */

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemConfig {
    pub component1: FamilyTemplate,
    pub kde: KdeConfig,
    pub init: Vec<f64>,
    pub iters: usize,
    pub burn: usize,
    pub seed: u64,
}

impl SemConfig {
    pub fn new(component1: FamilyTemplate, kde: KdeConfig, init: Vec<f64>, seed: u64) -> Self {
        SemConfig { component1, kde, init, iters: 5000, burn: 1000, seed }
    }
}

fn draw_labels(w: &[f64], r: &mut crate::numerics::DivRng) -> Vec<f64> {
    w.iter().map(|&p| if r.random::<f64>() < p { 1.0 } else { 0.0 }).collect()
}

/// Labels with both classes present, drawing at most twice.
fn labels_nonempty(w: &[f64], r: &mut crate::numerics::DivRng) -> Option<Vec<f64>> {
    for _ in 0..2 {
        let z = draw_labels(w, r);
        let s: f64 = z.iter().sum();
        if s > 0.0 && s < z.len() as f64 {
            return Some(z);
        }
    }
    None
}

pub fn stochastic_em(cfg: &SemConfig, data: &[f64]) -> Result<EstimateReport> {
    let t0 = Instant::now();
    let t1 = &cfg.component1;
    if cfg.init.len() != 1 + t1.dim() {
        return Err(Error::Config(format!("initial point needs {} values", 1 + t1.dim())));
    }
    if data.len() < 10 {
        return Err(Error::Config("the stochastic EM needs at least 10 observations".into()));
    }
    if cfg.burn >= cfg.iters {
        return Err(Error::Config("burn-in must be shorter than the chain".into()));
    }
    let kde = KernelDensityEstimate::fit(cfg.kde.kernel, cfg.kde.rule, data)?;
    let mut r = rng(cfg.seed);
    let n = data.len();
    let degenerate = |trace: Vec<f64>, phi: Vec<f64>, msg: &str| {
        Ok(EstimateReport::new("stochastic_em", names(t1), phi, Status::Degenerate)
            .with_trace(trace)
            .with_diagnostic(msg)
            .timed(t0))
    };
    let lambda0 = cfg.init[0].clamp(0.0, 1.0);
    let Some(mut z) = labels_nonempty(&vec![lambda0; n], &mut r) else {
        return degenerate(vec![], cfg.init.clone(), "empty class in the initial labels");
    };
    let mut lambda = z.iter().sum::<f64>() / n as f64;
    let mut theta = cfg.init[1..].to_vec();
    let mut trace = Vec::with_capacity(cfg.iters);
    let mut acc = vec![0.0; 1 + t1.dim()];
    for it in 0..cfg.iters {
        let g: Vec<f64> = z.iter().map(|v| 1.0 - v).collect();
        let p0 = kde.weighted_at(data, &g)?;
        let p1 = f1_at(t1, &theta, data)?;
        let w: Vec<f64> = p1
            .iter()
            .zip(&p0)
            .map(|(a, b)| {
                let num = lambda * a;
                let den = num + (1.0 - lambda) * b;
                if den > 0.0 {
                    num / den
                } else {
                    lambda
                }
            })
            .collect();
        let Some(next) = labels_nonempty(&w, &mut r) else {
            let mut phi = vec![lambda];
            phi.extend(theta);
            return degenerate(trace, phi, &format!("empty class twice in a row at iteration {it}"));
        };
        z = next;
        lambda = z.iter().sum::<f64>() / n as f64;
        theta = weighted_mle(t1, data, &z, Some(&theta))?;
        trace.push(lambda);
        if it >= cfg.burn {
            acc[0] += lambda;
            for (a, t) in acc[1..].iter_mut().zip(&theta) {
                *a += t;
            }
        }
    }
    let m = (cfg.iters - cfg.burn) as f64;
    let phi: Vec<f64> = acc.iter().map(|a| a / m).collect();
    Ok(EstimateReport::new("stochastic_em", names(t1), phi, Status::Converged).with_trace(trace).timed(t0))
}
