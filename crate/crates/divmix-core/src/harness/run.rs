//! Running estimators and Monte-Carlo experiments.

use super::config::{ExperimentConfig, Method, ProxObjectiveSpec};
use super::csv::{csv_field, fmt6};
use crate::baselines::{bordes_symmetry, robin_em, song_em, song_pi_max, stochastic_em};
use crate::dual::{basu_lindsay, beran, classical_mdphide, dphide, kernel_mdphide, mdpd, objective_quad, KernelDual};
use crate::kde::KernelDensityEstimate;
use crate::mle::{mle_em, mle_report};
use crate::models::{contaminate, ModelSpec, Observations};
use crate::numerics::split;
use crate::proximal::{proximal_minimize, NegLogLikelihood, ProximalRun};
use crate::report::{EstimateReport, Status};
use crate::spm_lmoments::estimate_spm_lmoments;
use crate::spm_moments::estimate_spm_moments;
use crate::{Error, Result};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// An estimator result plus, for proximal runs, the iteration trace.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: EstimateReport,
    pub proximal: Option<ProximalRun>,
}

impl Outcome {
    fn plain(report: EstimateReport) -> Self {
        Outcome { report, proximal: None }
    }

    /// Trace CSV for proximal runs.
    pub fn trace_csv(&self) -> Option<String> {
        self.proximal.as_ref().map(|r| r.trace_csv(&self.report.param_names))
    }
}

fn proximal_report(model: &ModelSpec, run: &ProximalRun, t0: Instant) -> EstimateReport {
    let mut r = EstimateReport::new("proximal", model.names(), run.last().to_vec(), run.status)
        .with_trace(run.objective_values.clone());
    if let Some(d) = &run.diagnostic {
        r = r.with_diagnostic(d.clone());
    }
    r.timed(t0)
}

/// Runs one configured estimator on a sample.
pub fn run_method(method: &Method, obs: &Observations) -> Result<Outcome> {
    if let Method::SpmMoments(c) = method {
        return estimate_spm_moments(c, obs).map(Outcome::plain);
    }
    let data = obs.univariate()?;
    let report = match method {
        Method::Mle { model, init, tol, max_iter } => match model {
            ModelSpec::Single(t) => mle_report(t, data),
            ModelSpec::Mixture { .. } => {
                let init = init.as_ref().ok_or_else(|| Error::Config("EM needs a starting point".into()))?;
                mle_em(model, data, init, *tol, *max_iter)
            }
        },
        Method::Classical { dual } => classical_mdphide(dual, data)?,
        Method::Kernel { dual, kde } => kernel_mdphide(dual, kde, data)?,
        Method::Dphide { dual, escort_kde } => {
            let escort = kernel_mdphide(dual, escort_kde, data)?;
            if escort.is_degenerate() {
                return Ok(Outcome::plain(
                    EstimateReport::new("dphide", dual.model.names(), escort.phi_hat, Status::Degenerate)
                        .with_diagnostic("escort estimate is degenerate"),
                ));
            }
            dphide(dual, data, &escort.phi_hat)?
        }
        Method::Beran { dual, kde } => beran(dual, kde, data)?,
        Method::BasuLindsay { dual, kde } => basu_lindsay(dual, kde, data)?,
        Method::Mdpd { dual, a } => mdpd(dual, *a, data)?,
        Method::Proximal { model, objective, config, init } => {
            let t0 = Instant::now();
            let init = init.as_ref().ok_or_else(|| Error::Config("proximal runs need a starting point".into()))?;
            let run = match objective {
                ProxObjectiveSpec::KernelDual { gen, kde } => {
                    let k = KernelDensityEstimate::fit(kde.kernel, kde.rule, data)?;
                    let obj = KernelDual::new(*gen, model, &k, data, objective_quad());
                    proximal_minimize(&obj, model, data, init, config)?
                }
                ProxObjectiveSpec::NegLogLikelihood => {
                    let obj = NegLogLikelihood { model, data };
                    proximal_minimize(&obj, model, data, init, config)?
                }
            };
            let report = proximal_report(model, &run, t0);
            return Ok(Outcome { report, proximal: Some(run) });
        }
        Method::SpmMoments(_) => unreachable!(),
        Method::SpmLmoments(c) => estimate_spm_lmoments(c, data)?,
        Method::Bordes(c) => bordes_symmetry(c, data)?,
        Method::Robin(c) => robin_em(c, data)?,
        Method::Song(c) => song_em(c, data)?,
        Method::PiMax(c) => song_pi_max(c, data)?,
        Method::Sem(c) => stochastic_em(c, data)?,
    };
    Ok(Outcome::plain(report))
}

/// One estimator on one replication, as kept on disk with --keep-reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub estimator: String,
    pub init: Option<Vec<f64>>,
    pub report: Option<EstimateReport>,
    pub error: Option<String>,
    pub tvd: f64,
    pub sqrt_chi2: f64,
}

impl ReplicationRecord {
    fn usable(&self) -> bool {
        self.report.as_ref().is_some_and(|r| !r.is_degenerate())
    }
}

/// Mean, sd (n − 1 divisor) and median over the usable runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub used: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, sd: f64::NAN, median: f64::NAN, used: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        Summary { mean, sd, median, used: n }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub param_names: Vec<String>,
    pub params: Vec<Summary>,
    pub tvd: Summary,
    pub sqrt_chi2: Summary,
    /// Degenerate or failed replications, excluded from the summaries.
    pub degenerate: usize,
}

impl ResultRow {
    /// The summary of a parameter name, "tvd" or "sqrt_chi2".
    pub fn quantity(&self, name: &str) -> Option<&Summary> {
        match name {
            "tvd" => Some(&self.tvd),
            "sqrt_chi2" => Some(&self.sqrt_chi2),
            _ => self.param_names.iter().position(|p| p == name).map(|i| &self.params[i]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultTable {
    pub scenario: String,
    pub replications: usize,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, estimator: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }
}

/// A paper value to print next to a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub scenario: String,
    pub estimator: String,
    pub quantity: String,
    pub mean: f64,
    pub sd: f64,
}

impl Reference {
    /// mean ± 4·sd/√reps.
    pub fn band(&self, reps: usize) -> (f64, f64) {
        let w = 4.0 * self.sd / (reps as f64).sqrt();
        (self.mean - w, self.mean + w)
    }
}

pub const CSV_HEADER: &str =
    "scenario,estimator,quantity,mean,sd,median,used,degenerate,paper_mean,paper_sd,band_lo,band_hi,in_band";

/// Long-format CSV: one line per (scenario, estimator, quantity).
pub fn tables_csv(tables: &[ResultTable], refs: &[Reference]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for t in tables {
        for row in &t.rows {
            let mut quantities: Vec<(&str, &Summary)> =
                row.param_names.iter().map(|p| p.as_str()).zip(&row.params).collect();
            quantities.push(("tvd", &row.tvd));
            quantities.push(("sqrt_chi2", &row.sqrt_chi2));
            for (q, sum) in quantities {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}",
                    csv_field(&t.scenario),
                    csv_field(&row.estimator),
                    csv_field(q),
                    fmt6(sum.mean),
                    fmt6(sum.sd),
                    fmt6(sum.median),
                    sum.used,
                    row.degenerate
                ));
                match refs.iter().find(|r| r.scenario == t.scenario && r.estimator == row.estimator && r.quantity == q) {
                    Some(r) => {
                        let (lo, hi) = r.band(t.replications);
                        let inside = sum.mean >= lo && sum.mean <= hi;
                        s.push_str(&format!(",{},{},{},{},{}", fmt6(r.mean), fmt6(r.sd), fmt6(lo), fmt6(hi), inside));
                    }
                    None => s.push_str(",,,,,"),
                }
                s.push('\n');
            }
        }
    }
    s
}

/// Size of the worker pool; DIVMIX_THREADS caps it.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DIVMIX_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("DIVMIX_THREADS must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start the worker pool: {e}")))
}

fn replicate(cfg: &ExperimentConfig, i: usize) -> Result<Vec<ReplicationRecord>> {
    let mut r = split(cfg.seed, i as u64);
    let mut obs = cfg.truth.sample(cfg.n, &mut r);
    if let (Some(c), Observations::Uni(v)) = (&cfg.contamination, &obs) {
        obs = Observations::Uni(contaminate(v, c, &mut r)?);
    }
    let mut out = Vec::with_capacity(cfg.estimators.len());
    for (j, e) in cfg.estimators.iter().enumerate() {
        // each estimator has its own stream, so adding one leaves the others alone
        let mut er = split(cfg.seed.wrapping_add(1 + j as u64), i as u64);
        let mut method = e.method.clone();
        method.set_seed(er.next_u64());
        let init = e.init.draw(&mut er);
        if let Some(v) = &init {
            method.set_init(v.clone());
        }
        let (report, error) = match run_method(&method, &obs) {
            Ok(o) => (Some(o.report), None),
            Err(err) if err.is_config() => return Err(err),
            Err(err) => (None, Some(err.to_string())),
        };
        let (mut tvd, mut chi) = (f64::NAN, f64::NAN);
        if let (Some(rep), Some(model)) = (&report, method.fitted_model()) {
            if !rep.is_degenerate() {
                if let Ok(p) = model.density(&rep.phi_hat) {
                    if let Ok((t, c)) = cfg.truth.criteria(&p) {
                        tvd = t;
                        chi = c;
                    }
                }
            }
        }
        out.push(ReplicationRecord { replication: i, estimator: e.label(), init, report, error, tvd, sqrt_chi2: chi });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    /// records[i][j]: replication i, estimator j.
    pub records: Vec<Vec<ReplicationRecord>>,
}

/// Validates, then runs every replication on the worker pool. The result
/// depends only on the config and its seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = worker_pool()?;
    let records: Vec<Vec<ReplicationRecord>> =
        pool.install(|| (0..cfg.replications).into_par_iter().map(|i| replicate(cfg, i)).collect::<Result<_>>())?;
    let rows = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let recs: Vec<&ReplicationRecord> = records.iter().map(|r| &r[j]).collect();
            let good: Vec<&ReplicationRecord> = recs.iter().copied().filter(|r| r.usable()).collect();
            let param_names = recs
                .iter()
                .find_map(|r| r.report.as_ref().map(|rep| rep.param_names.clone()))
                .unwrap_or_default();
            let params = (0..param_names.len())
                .map(|k| Summary::of(&good.iter().map(|r| r.report.as_ref().unwrap().phi_hat[k]).collect::<Vec<_>>()))
                .collect();
            let finite = |f: fn(&ReplicationRecord) -> f64| -> Vec<f64> {
                good.iter().map(|r| f(r)).filter(|v| !v.is_nan()).collect()
            };
            ResultRow {
                estimator: e.label(),
                param_names,
                params,
                tvd: Summary::of(&finite(|r| r.tvd)),
                sqrt_chi2: Summary::of(&finite(|r| r.sqrt_chi2)),
                degenerate: recs.len() - good.len(),
            }
        })
        .collect();
    Ok(ExperimentOutput {
        table: ResultTable { scenario: cfg.name.clone(), replications: cfg.replications, rows },
        records,
    })
}

impl ExperimentOutput {
    /// Writes one JSON file per estimator holding its per-replication records.
    pub fn write_reports(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let n_est = self.records.first().map_or(0, |r| r.len());
        for j in 0..n_est {
            let col: Vec<&ReplicationRecord> = self.records.iter().map(|r| &r[j]).collect();
            let name = format!("{}__{}.json", file_stem(&self.table.scenario), file_stem(&col[0].estimator));
            let text = serde_json::to_string_pretty(&col).map_err(|e| Error::Io(e.to_string()))?;
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}
