//! Maximum likelihood for single families (closed form where it exists),
//! weighted likelihood steps, and EM for two-component mixtures.

use crate::models::{FamilyKind, FamilyTemplate, MixtureSpec, ModelSpec};
use crate::numerics::{nelder_mead, OptimizerSpec};
use crate::report::{EstimateReport, Status};
use crate::{Error, Result};
use std::time::Instant;

/// Weighted MLE of the free coordinates of `template`. Gaussian, lognormal
/// and exponential families are solved in closed form; others by
/// Nelder–Mead on the weighted log-likelihood starting from `start`.
pub fn weighted_mle(template: &FamilyTemplate, data: &[f64], w: &[f64], start: Option<&[f64]>) -> Result<Vec<f64>> {
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::Parameter("all weights are zero".into()));
    }
    let free = |i: usize| template.free.iter().position(|&j| j == i);
    let mut out = start.map(|s| s.to_vec()).unwrap_or_else(|| template.free_values(&template.family(&[])));
    match template.kind {
        FamilyKind::Gaussian | FamilyKind::Lognormal => {
            let tr = |x: f64| if template.kind == FamilyKind::Lognormal { x.ln() } else { x };
            let mu = match free(0) {
                Some(k) => {
                    let m = data.iter().zip(w).map(|(x, wi)| wi * tr(*x)).sum::<f64>() / sw;
                    out[k] = m;
                    m
                }
                None => template.base[0],
            };
            if let Some(k) = free(1) {
                let v = data.iter().zip(w).map(|(x, wi)| wi * (tr(*x) - mu).powi(2)).sum::<f64>() / sw;
                out[k] = v.sqrt();
            }
            Ok(out)
        }
        FamilyKind::Exponential => {
            if let Some(k) = free(0) {
                out[k] = sw / data.iter().zip(w).map(|(x, wi)| wi * x).sum::<f64>();
            }
            Ok(out)
        }
        _ => {
            if template.free.is_empty() {
                return Ok(out);
            }
            let (lo, hi, sd) = crate::models::template::data_range(data);
            let bounds = template.bounds(lo, hi, sd);
            let spec = OptimizerSpec::nelder_mead(bounds).with_tol(1e-11, 1e-13).with_restarts(4);
            let nll = |t: &[f64]| {
                let f = template.family(t);
                if !f.is_valid() {
                    return f64::INFINITY;
                }
                -data.iter().zip(w).map(|(x, wi)| if *wi == 0.0 { 0.0 } else { wi * f.ln_pdf(*x) }).sum::<f64>() / sw
            };
            let r = nelder_mead(nll, &out, &spec);
            Ok(r.x)
        }
    }
}

/// Unweighted MLE of the free coordinates.
pub fn mle(template: &FamilyTemplate, data: &[f64]) -> Result<Vec<f64>> {
    let w = vec![1.0; data.len()];
    let start = default_start(template, data);
    weighted_mle(template, data, &w, Some(&start))
}

/// Moment-type starting values for the free coordinates.
pub fn default_start(template: &FamilyTemplate, data: &[f64]) -> Vec<f64> {
    let n = data.len() as f64;
    let m = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt().max(1e-3);
    let mut theta = template.base.clone();
    match template.kind {
        FamilyKind::Weibull | FamilyKind::Gpd => {
            theta[0] = 1.0;
            theta[1] = m.abs().max(1e-3);
        }
        FamilyKind::TwoSidedWeibull => {
            theta[0] = 2.0;
            theta[1] = (data.iter().map(|x| x * x).sum::<f64>() / n).sqrt().max(1e-3);
        }
        FamilyKind::Gaussian => {
            theta[0] = m;
            theta[1] = sd;
        }
        _ => {}
    }
    template.free.iter().map(|&i| theta[i]).collect()
}

/// MLE of a single family as a report. Zero-spread samples give a
/// degenerate report.
pub fn mle_report(template: &FamilyTemplate, data: &[f64]) -> EstimateReport {
    let t0 = Instant::now();
    let names = template.names();
    match mle(template, data) {
        Ok(v) => {
            let fam = template.family(&v);
            let status = if fam.is_valid() { Status::Converged } else { Status::Degenerate };
            let nll = if fam.is_valid() {
                -data.iter().map(|&x| fam.ln_pdf(x)).sum::<f64>() / data.len() as f64
            } else {
                f64::INFINITY
            };
            let mut r = EstimateReport::new("mle", names, v, status).with_trace(vec![nll]);
            if status == Status::Degenerate {
                r = r.with_diagnostic("fitted parameters outside the family domain (zero spread?)");
            }
            r.timed(t0)
        }
        Err(e) => EstimateReport::new("mle", names, vec![f64::NAN; template.dim()], Status::Degenerate)
            .with_diagnostic(e.to_string())
            .timed(t0),
    }
}

/// Posterior probabilities h_i = λf₁(yᵢ) / p(yᵢ) of the first component.
pub fn posterior(m: &MixtureSpec, data: &[f64]) -> Vec<f64> {
    data.iter()
        .map(|&x| {
            let a = m.lambda.ln() + m.component1.ln_pdf(x);
            let b = (1.0 - m.lambda).ln() + m.component0.ln_pdf(x);
            let mx = a.max(b);
            if mx == f64::NEG_INFINITY {
                return m.lambda;
            }
            let (ea, eb) = ((a - mx).exp(), (b - mx).exp());
            ea / (ea + eb)
        })
        .collect()
}

pub fn mean_log_likelihood(m: &MixtureSpec, data: &[f64]) -> f64 {
    data.iter().map(|&x| m.ln_pdf(x)).sum::<f64>() / data.len() as f64
}

fn split_templates(model: &ModelSpec) -> Result<(&FamilyTemplate, &FamilyTemplate)> {
    match model {
        ModelSpec::Mixture { component1, component0 } => Ok((component1, component0)),
        _ => Err(Error::Config("EM needs a two-component mixture model".into())),
    }
}

/// One EM update from `phi` = [λ, θ₁, θ₀].
pub fn em_step(model: &ModelSpec, data: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
    let (t1, t0) = split_templates(model)?;
    let m = model.density(phi)?;
    let m = m.as_mixture().unwrap();
    let h = posterior(m, data);
    let g: Vec<f64> = h.iter().map(|v| 1.0 - v).collect();
    let d1 = t1.dim();
    let lambda = h.iter().sum::<f64>() / data.len() as f64;
    let th1 = weighted_mle(t1, data, &h, Some(&phi[1..1 + d1]))?;
    let th0 = weighted_mle(t0, data, &g, Some(&phi[1 + d1..]))?;
    let mut out = vec![lambda];
    out.extend(th1);
    out.extend(th0);
    Ok(out)
}

/// EM iterations. The trace holds the mean log-likelihood per iterate.
pub fn mle_em(model: &ModelSpec, data: &[f64], init: &[f64], tol: f64, max_iter: usize) -> EstimateReport {
    let t0 = Instant::now();
    let names = model.names();
    let mut phi = init.to_vec();
    let mut trace = vec![];
    let ll = |p: &[f64]| {
        model
            .density(p)
            .ok()
            .and_then(|d| d.as_mixture().map(|m| mean_log_likelihood(m, data)))
            .unwrap_or(f64::NEG_INFINITY)
    };
    trace.push(ll(&phi));
    let mut status = Status::MaxIter;
    for _ in 0..max_iter {
        let next = match em_step(model, data, &phi) {
            Ok(v) => v,
            Err(e) => {
                return EstimateReport::new("mle_em", names, phi, Status::Degenerate)
                    .with_trace(trace)
                    .with_diagnostic(e.to_string())
                    .timed(t0)
            }
        };
        phi = next;
        if phi[0] < 1e-3 || phi[0] > 1.0 - 1e-3 {
            status = Status::Degenerate;
            trace.push(ll(&phi));
            break;
        }
        let v = ll(&phi);
        let prev = *trace.last().unwrap();
        trace.push(v);
        if (v - prev).abs() < tol {
            status = Status::Converged;
            break;
        }
    }
    let mut r = EstimateReport::new("mle_em", names, phi, status).with_trace(trace);
    if status == Status::Degenerate {
        r = r.with_diagnostic("proportion reached the boundary");
    }
    r.timed(t0)
}
