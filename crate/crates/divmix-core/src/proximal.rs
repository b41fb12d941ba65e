//! Proximal-point minimisation of divergence objectives over two-component
//! mixtures, with the label-posterior proximal term.

use crate::dual::KernelDual;
use crate::models::{MixtureSpec, ModelSpec};
use crate::numerics::{nelder_mead, newton_polish, OptimizerSpec};
use crate::report::Status;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A D̂(p_φ) to be minimised.
pub trait ProxObjective {
    fn value(&self, phi: &[f64]) -> f64;
}

impl ProxObjective for KernelDual<'_> {
    fn value(&self, phi: &[f64]) -> f64 {
        KernelDual::value(self, phi)
    }
}

/// −(1/n) Σ log p_φ(yᵢ).
pub struct NegLogLikelihood<'a> {
    pub model: &'a ModelSpec,
    pub data: &'a [f64],
}

impl ProxObjective for NegLogLikelihood<'_> {
    fn value(&self, phi: &[f64]) -> f64 {
        match self.model.density(phi) {
            Ok(p) => -self.data.iter().map(|&y| p.ln_pdf(y)).sum::<f64>() / self.data.len() as f64,
            Err(_) => f64::INFINITY,
        }
    }
}

impl<F: Fn(&[f64]) -> f64> ProxObjective for F {
    fn value(&self, phi: &[f64]) -> f64 {
        self(phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiKind {
    /// ψ(t) = ½(√t − 1)²
    HalfHellinger,
    /// ψ(t) = −log t + t − 1, which turns the recurrence into EM.
    Kullback,
}

impl PsiKind {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            PsiKind::HalfHellinger => 0.5 * (t.sqrt() - 1.0).powi(2),
            PsiKind::Kullback => -t.ln() + t - 1.0,
        }
    }
}

/// Posterior label probabilities (h_i(1), h_i(0)) in log space.
pub fn label_posteriors(m: &MixtureSpec, data: &[f64]) -> Vec<[f64; 2]> {
    data.iter()
        .map(|&x| {
            let a = m.lambda.ln() + m.component1.ln_pdf(x);
            let b = (1.0 - m.lambda).ln() + m.component0.ln_pdf(x);
            let mx = a.max(b);
            if mx == f64::NEG_INFINITY {
                return [0.0, 0.0];
            }
            let l = mx + ((a - mx).exp() + (b - mx).exp()).ln();
            [(a - l).exp(), (b - l).exp()]
        })
        .collect()
}

fn posteriors_at(model: &ModelSpec, phi: &[f64], data: &[f64]) -> Result<Vec<[f64; 2]>> {
    let d = model.density(phi)?;
    let m = d
        .as_mixture()
        .ok_or_else(|| Error::Config("the proximal term needs a mixture model".into()))?;
    Ok(label_posteriors(m, data))
}

/// D_ψ(φ, φ′) = (1/n) Σᵢ Σⱼ ψ(hᵢ(j|φ)/hᵢ(j|φ′)) hᵢ(j|φ′).
pub fn dpsi(psi: PsiKind, model: &ModelSpec, phi: &[f64], phi_prev: &[f64], data: &[f64]) -> Result<f64> {
    let prev = posteriors_at(model, phi_prev, data)?;
    dpsi_cached(psi, model, phi, &prev, data)
}

fn dpsi_cached(psi: PsiKind, model: &ModelSpec, phi: &[f64], prev: &[[f64; 2]], data: &[f64]) -> Result<f64> {
    let cur = posteriors_at(model, phi, data)?;
    let mut s = 0.0;
    for (i, (c, p)) in cur.iter().zip(prev).enumerate() {
        for j in 0..2 {
            if p[j] <= 0.0 {
                return Err(Error::Domain(format!(
                    "zero conditional density at observation {i}, label {}",
                    1 - j
                )));
            }
            s += psi.eval(c[j] / p[j]) * p[j];
        }
    }
    Ok(s / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProximalMode {
    OneStep,
    /// λ-step with θ fixed, then θ-step with the new λ.
    TwoStep,
    /// One-step with the proximal term weighted by βₖ. The last β is reused
    /// once the sequence runs out.
    Relaxed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalConfig {
    pub psi: PsiKind,
    pub mode: ProximalMode,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Refine each inner Nelder–Mead result with Newton steps.
    #[serde(default = "yes")]
    pub polish: bool,
}

fn yes() -> bool {
    true
}

impl Default for ProximalConfig {
    fn default() -> Self {
        ProximalConfig {
            psi: PsiKind::HalfHellinger,
            mode: ProximalMode::OneStep,
            tol: 1e-8,
            max_iter: 500,
            bounds: None,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalRun {
    pub mode: ProximalMode,
    pub iterates: Vec<Vec<f64>>,
    pub objective_values: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub betas: Vec<f64>,
    pub status: Status,
    pub diagnostic: Option<String>,
}

impl ProximalRun {
    pub fn last(&self) -> &[f64] {
        self.iterates.last().unwrap()
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_values.last().unwrap()
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.objective_values.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// CSV with columns iter, objective, step_norm, then one per parameter.
    pub fn trace_csv(&self, names: &[String]) -> String {
        let mut s = String::from("iter,objective,step_norm");
        for n in names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (k, (phi, v)) in self.iterates.iter().zip(&self.objective_values).enumerate() {
            let step = if k == 0 { 0.0 } else { self.step_norms[k - 1] };
            s.push_str(&format!("{k},{},{}", crate::harness::fmt6(*v), crate::harness::fmt6(step)));
            for p in phi {
                s.push(',');
                s.push_str(&crate::harness::fmt6(*p));
            }
            s.push('\n');
        }
        s
    }
}

/// Minimises `pen` over the coordinates in `idx`, starting and anchored at
/// `base`. Never returns a point worse than `base`.
fn block_minimize<F: Fn(&[f64]) -> f64>(
    pen: &F,
    base: &[f64],
    idx: &[usize],
    bounds: &[(f64, f64)],
    polish: bool,
) -> (Vec<f64>, f64) {
    let embed = |sub: &[f64]| {
        let mut x = base.to_vec();
        for (k, &i) in idx.iter().enumerate() {
            x[i] = sub[k];
        }
        x
    };
    let sub_f = |sub: &[f64]| pen(&embed(sub));
    let x0: Vec<f64> = idx.iter().map(|&i| base[i]).collect();
    let b: Vec<(f64, f64)> = idx.iter().map(|&i| bounds[i]).collect();
    let spec = OptimizerSpec::nelder_mead(b.clone()).with_tol(1e-11, 1e-15).with_restarts(4);
    let mut r = nelder_mead(sub_f, &x0, &spec);
    if polish && r.f.is_finite() {
        let p = newton_polish(sub_f, &r.x, &b, 30);
        if p.f <= r.f {
            r = p;
        }
    }
    (embed(&r.x), r.f)
}

/// Runs the proximal recurrence φᵏ⁺¹ = arginf D̂(φ) + βₖ D_ψ(φ, φᵏ).
pub fn proximal_minimize<O: ProxObjective + ?Sized>(
    obj: &O,
    model: &ModelSpec,
    data: &[f64],
    init: &[f64],
    cfg: &ProximalConfig,
) -> Result<ProximalRun> {
    if !matches!(model, ModelSpec::Mixture { .. }) {
        return Err(Error::Config("proximal algorithms need a two-component mixture model".into()));
    }
    if let ProximalMode::Relaxed(b) = &cfg.mode {
        if b.is_empty() || b.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("relaxation sequence must be non-empty and nonnegative".into()));
        }
    }
    let bounds = cfg.bounds.clone().unwrap_or_else(|| model.bounds(data));
    if bounds.len() != init.len() {
        return Err(Error::Config("bounds/init length mismatch".into()));
    }
    let mut phi = init.to_vec();
    let mut f = obj.value(&phi);
    if !f.is_finite() {
        return Err(Error::Parameter(format!("objective is not finite at the initial point {init:?}")));
    }
    let mut run = ProximalRun {
        mode: cfg.mode.clone(),
        iterates: vec![phi.clone()],
        objective_values: vec![f],
        step_norms: vec![],
        betas: vec![],
        status: Status::MaxIter,
        diagnostic: None,
    };
    let d = init.len();
    let all: Vec<usize> = (0..d).collect();
    let theta_idx: Vec<usize> = (1..d).collect();
    for k in 0..cfg.max_iter {
        let beta = match &cfg.mode {
            ProximalMode::Relaxed(b) => b[k.min(b.len() - 1)],
            _ => 1.0,
        };
        let prev = match posteriors_at(model, &phi, data) {
            Ok(p) => p,
            Err(e) => {
                run.status = Status::Degenerate;
                run.diagnostic = Some(e.to_string());
                break;
            }
        };
        let pen = |x: &[f64]| {
            let v = obj.value(x);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            if beta == 0.0 {
                return v;
            }
            match dpsi_cached(cfg.psi, model, x, &prev, data) {
                Ok(p) => v + beta * p,
                Err(_) => f64::INFINITY,
            }
        };
        let (next, jn) = match cfg.mode {
            ProximalMode::TwoStep => {
                let (a, _) = block_minimize(&pen, &phi, &[0], &bounds, cfg.polish);
                block_minimize(&pen, &a, &theta_idx, &bounds, cfg.polish)
            }
            _ => block_minimize(&pen, &phi, &all, &bounds, cfg.polish),
        };
        // pen(φᵏ) = D̂(φᵏ) since D_ψ(φᵏ, φᵏ) = 0
        if !(jn <= f) {
            run.status = Status::Degenerate;
            run.diagnostic = Some(format!("inner step increased the penalised objective at iteration {k}"));
            break;
        }
        let fn_ = obj.value(&next);
        let step = next.iter().zip(&phi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let df = (f - fn_).abs();
        phi = next;
        f = fn_;
        run.iterates.push(phi.clone());
        run.objective_values.push(f);
        run.step_norms.push(step);
        run.betas.push(beta);
        if phi[0] < 1e-3 || phi[0] > 1.0 - 1e-3 {
            run.status = Status::Degenerate;
            run.diagnostic = Some("proportion reached the boundary".into());
            break;
        }
        if df < cfg.tol || step < cfg.tol {
            run.status = Status::Converged;
            break;
        }
    }
    Ok(run)
}

/// Two-step variant; same as [`proximal_minimize`] with `TwoStep` mode.
pub fn proximal_two_step<O: ProxObjective + ?Sized>(
    obj: &O,
    model: &ModelSpec,
    data: &[f64],
    init: &[f64],
    cfg: &ProximalConfig,
) -> Result<ProximalRun> {
    let cfg = ProximalConfig { mode: ProximalMode::TwoStep, ..cfg.clone() };
    proximal_minimize(obj, model, data, init, &cfg)
}

pub fn proximal_relaxed<O: ProxObjective + ?Sized>(
    obj: &O,
    model: &ModelSpec,
    data: &[f64],
    init: &[f64],
    betas: Vec<f64>,
    cfg: &ProximalConfig,
) -> Result<ProximalRun> {
    let cfg = ProximalConfig { mode: ProximalMode::Relaxed(betas), ..cfg.clone() };
    proximal_minimize(obj, model, data, init, &cfg)
}
