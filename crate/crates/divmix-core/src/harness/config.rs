//! Experiment and estimator configuration files.

use crate::baselines::{BordesConfig, PiMaxConfig, RobinConfig, SemConfig, SongConfig};
use crate::divergence::{error_criteria, Density, PhiGenerator};
use crate::dual::DualConfig;
use crate::kde::{KdeConfig, KernelKind};
use crate::models::{
    error_criteria_vs_mixture, ContaminationSpec, MixtureSpec, ModelSpec, Observations, ParametricFamily,
};
use crate::numerics::{DivRng, QuadratureSpec};
use crate::proximal::ProximalConfig;
use crate::spm_lmoments::SpmLMomentsConfig;
use crate::spm_moments::SpmMomentsConfig;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// The law the samples are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Family(ParametricFamily),
    Mixture(MixtureSpec),
}

impl Truth {
    pub fn validate(&self) -> Result<()> {
        match self {
            Truth::Family(f) => f.validate(),
            Truth::Mixture(m) => m.validate(),
        }
    }

    pub fn is_bivariate(&self) -> bool {
        match self {
            Truth::Family(f) => f.is_bivariate(),
            Truth::Mixture(m) => m.is_bivariate(),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut DivRng) -> Observations {
        match self {
            Truth::Family(f) => Observations::Uni(f.sample(n, rng)),
            Truth::Mixture(m) if m.is_bivariate() => Observations::Bi(m.sample2(n, rng)),
            Truth::Mixture(m) => Observations::Uni(m.sample(n, rng)),
        }
    }

    /// (TVD, √χ²) of a fitted density against the truth.
    pub fn criteria(&self, p_hat: &dyn Density) -> Result<(f64, f64)> {
        let quad = QuadratureSpec::default();
        match self {
            Truth::Family(f) => error_criteria(p_hat, f, &quad),
            Truth::Mixture(m) => error_criteria_vs_mixture(p_hat, m, &quad),
        }
    }
}

/// Starting point of iterative estimators, drawn per replication.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// Whatever the method config carries.
    #[default]
    Config,
    Fixed(Vec<f64>),
    /// Uniform on [cᵢ − wᵢ, cᵢ + wᵢ]; the centre is usually the truth.
    Jitter { center: Vec<f64>, width: Vec<f64> },
}

impl InitSpec {
    pub fn draw(&self, rng: &mut DivRng) -> Option<Vec<f64>> {
        match self {
            InitSpec::Config => None,
            InitSpec::Fixed(v) => Some(v.clone()),
            InitSpec::Jitter { center, width } => Some(
                center.iter().zip(width).map(|(c, w)| c + w * (2.0 * rng.random::<f64>() - 1.0)).collect(),
            ),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            InitSpec::Config => None,
            InitSpec::Fixed(v) => Some(v.len()),
            InitSpec::Jitter { center, .. } => Some(center.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxObjectiveSpec {
    /// Kernel-based dual divergence estimate.
    KernelDual { gen: PhiGenerator, kde: KdeConfig },
    /// −mean log-likelihood; with the Kullback ψ this is EM.
    NegLogLikelihood,
}

fn em_tol() -> f64 {
    1e-10
}

fn em_max_iter() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Closed-form MLE for one family, EM for a mixture.
    Mle {
        model: ModelSpec,
        #[serde(default)]
        init: Option<Vec<f64>>,
        #[serde(default = "em_tol")]
        tol: f64,
        #[serde(default = "em_max_iter")]
        max_iter: usize,
    },
    Classical { dual: DualConfig },
    Kernel { dual: DualConfig, kde: KdeConfig },
    /// DφDE with the kernel MDφDE as escort.
    Dphide { dual: DualConfig, escort_kde: KdeConfig },
    Beran { dual: DualConfig, kde: KdeConfig },
    BasuLindsay { dual: DualConfig, kde: KdeConfig },
    Mdpd { dual: DualConfig, a: f64 },
    Proximal {
        model: ModelSpec,
        objective: ProxObjectiveSpec,
        #[serde(default)]
        config: ProximalConfig,
        #[serde(default)]
        init: Option<Vec<f64>>,
    },
    SpmMoments(SpmMomentsConfig),
    SpmLmoments(SpmLMomentsConfig),
    Bordes(BordesConfig),
    Robin(RobinConfig),
    Song(SongConfig),
    PiMax(PiMaxConfig),
    Sem(SemConfig),
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Method {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Method::Mle { .. } => "mle",
            Method::Classical { .. } => "classical",
            Method::Kernel { .. } => "kernel",
            Method::Dphide { .. } => "dphide",
            Method::Beran { .. } => "beran",
            Method::BasuLindsay { .. } => "basu_lindsay",
            Method::Mdpd { .. } => "mdpd",
            Method::Proximal { .. } => "proximal",
            Method::SpmMoments(_) => "spm_moments",
            Method::SpmLmoments(_) => "spm_lmoments",
            Method::Bordes(_) => "bordes",
            Method::Robin(_) => "robin",
            Method::Song(_) => "song",
            Method::PiMax(_) => "pi_max",
            Method::Sem(_) => "sem",
        }
    }

    fn dual(&self) -> Option<&DualConfig> {
        match self {
            Method::Classical { dual }
            | Method::Kernel { dual, .. }
            | Method::Dphide { dual, .. }
            | Method::Beran { dual, .. }
            | Method::BasuLindsay { dual, .. }
            | Method::Mdpd { dual, .. } => Some(dual),
            _ => None,
        }
    }

    fn dual_mut(&mut self) -> Option<&mut DualConfig> {
        match self {
            Method::Classical { dual }
            | Method::Kernel { dual, .. }
            | Method::Dphide { dual, .. }
            | Method::Beran { dual, .. }
            | Method::BasuLindsay { dual, .. }
            | Method::Mdpd { dual, .. } => Some(dual),
            _ => None,
        }
    }

    /// The parametric model whose density is compared with the truth, or
    /// `None` for semiparametric fits where f₀ is not estimated.
    pub fn fitted_model(&self) -> Option<&ModelSpec> {
        match self {
            Method::Mle { model, .. } | Method::Proximal { model, .. } => Some(model),
            _ => self.dual().map(|d| &d.model),
        }
    }

    /// Length of the starting point the method accepts, `None` if it takes none.
    pub fn init_dim(&self) -> Option<usize> {
        match self {
            Method::Mle { model, .. } | Method::Proximal { model, .. } => Some(model.dim()),
            Method::SpmMoments(_) | Method::Bordes(_) | Method::PiMax(_) => None,
            Method::SpmLmoments(c) => Some(c.model.dim()),
            Method::Robin(c) => Some(1 + c.component1.dim()),
            Method::Song(c) => Some(1 + c.component1.dim()),
            Method::Sem(c) => Some(1 + c.component1.dim()),
            _ => self.dual().map(|d| d.model.dim()),
        }
    }

    fn current_init(&self) -> Option<&[f64]> {
        match self {
            Method::Mle { init, .. } | Method::Proximal { init, .. } => init.as_deref(),
            Method::SpmLmoments(c) => c.starts.first().map(|v| v.as_slice()),
            Method::Robin(c) => Some(&c.init),
            Method::Song(c) => Some(&c.init),
            Method::Sem(c) => Some(&c.init),
            _ => self.dual().and_then(|d| d.init.as_deref()),
        }
    }

    pub fn set_init(&mut self, v: Vec<f64>) {
        match self {
            Method::Mle { init, .. } | Method::Proximal { init, .. } => *init = Some(v),
            Method::SpmLmoments(c) => c.starts = vec![v],
            Method::Robin(c) => c.init = v,
            Method::Song(c) => c.init = v,
            Method::Sem(c) => c.init = v,
            Method::SpmMoments(_) | Method::Bordes(_) | Method::PiMax(_) => {}
            _ => {
                if let Some(d) = self.dual_mut() {
                    d.init = Some(v);
                }
            }
        }
    }

    /// Seeds the method's own random starts or label draws.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Method::SpmMoments(c) => c.seed = seed,
            Method::SpmLmoments(c) => c.seed = seed,
            Method::Bordes(c) => c.seed = seed,
            Method::PiMax(c) => c.seed = seed,
            Method::Sem(c) => c.seed = seed,
            _ => {
                if let Some(d) = self.dual_mut() {
                    d.seed = seed;
                }
            }
        }
    }

    pub fn needs_bivariate(&self) -> bool {
        matches!(self, Method::SpmMoments(c) if c.model.component1.is_bivariate())
    }

    /// Config checks that can be made before any data exists. `init` is the
    /// length of the per-replication starting point, if one will be supplied.
    pub fn validate(&self, init: Option<usize>) -> Result<()> {
        let name = self.kind_name();
        if let (Some(k), dim) = (init, self.init_dim()) {
            match dim {
                None => return Err(config_err(format!("{name} takes no starting point"))),
                Some(d) if d != k => {
                    return Err(config_err(format!("{name}: starting point has {k} values, the model has {d}")))
                }
                _ => {}
            }
        }
        let has_init = init.is_some() || self.current_init().is_some_and(|v| !v.is_empty());
        if let Some(d) = self.current_init() {
            if !d.is_empty() && Some(d.len()) != self.init_dim() {
                return Err(config_err(format!("{name}: configured starting point has the wrong length")));
            }
        }
        let on_mixture = self.fitted_model().is_some_and(|m| matches!(m, ModelSpec::Mixture { .. }));
        let iterative = matches!(self, Method::Robin(_) | Method::Song(_) | Method::Sem(_));
        if (on_mixture || iterative) && !has_init {
            return Err(config_err(format!("{name} needs a starting point")));
        }
        if let Some(d) = self.dual() {
            if let Some(b) = &d.bounds {
                if b.len() != d.model.dim() || b.iter().any(|(lo, hi)| !(lo < hi)) {
                    return Err(config_err(format!("{name}: bad parameter bounds")));
                }
            }
        }
        match self {
            Method::Mle { tol, max_iter, .. } if !(*tol > 0.0) || *max_iter == 0 => {
                Err(config_err("mle: tol must be positive and max_iter at least 1"))
            }
            Method::Mdpd { a, .. } if !(*a > 0.0) => Err(config_err(format!("mdpd trade-off must be positive, got {a}"))),
            Method::Proximal { model, config, .. } => {
                if !matches!(model, ModelSpec::Mixture { .. }) {
                    return Err(config_err("proximal algorithms need a two-component mixture model"));
                }
                if !(config.tol > 0.0) || config.max_iter == 0 {
                    return Err(config_err("proximal: tol must be positive and max_iter at least 1"));
                }
                Ok(())
            }
            Method::SpmMoments(c) => c.model.validate(),
            Method::SpmLmoments(c) => {
                c.model.validate()?;
                if c.starts.iter().any(|s| s.len() != c.model.dim()) {
                    return Err(config_err("spm_lmoments: starting points have the wrong length"));
                }
                Ok(())
            }
            Method::Bordes(c) => {
                let (lo, _) = c.component1.kind.support();
                if lo > f64::NEG_INFINITY {
                    return Err(config_err("the symmetry method needs a component on the whole line"));
                }
                if !(c.eta > 0.0 && c.eta < 0.5) {
                    return Err(config_err("bordes: eta must lie in (0, 0.5)"));
                }
                Ok(())
            }
            Method::Robin(c) if c.kde.kernel == KernelKind::Epanechnikov => {
                Err(config_err("robin: compact kernels leave f0 = 0 at observations"))
            }
            Method::Sem(c) if c.iters <= c.burn => Err(config_err("sem: iters must exceed burn")),
            _ => Ok(()),
        }
    }
}

/// One estimator of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    /// Row name in the result table; the method kind when absent.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub init: InitSpec,
    pub method: Method,
}

impl EstimatorEntry {
    pub fn new(label: &str, method: Method) -> Self {
        EstimatorEntry { label: Some(label.to_string()), init: InitSpec::Config, method }
    }

    pub fn with_init(mut self, init: InitSpec) -> Self {
        self.init = init;
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.kind_name().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if let InitSpec::Jitter { center, width } = &self.init {
            if center.len() != width.len() || width.iter().any(|w| !(*w >= 0.0)) {
                return Err(config_err(format!("{}: jitter centre and widths do not match", self.label())));
            }
        }
        self.method.validate(self.init.len()).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("estimator '{}': {m}", self.label())),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    /// Result table CSV.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Directory for per-replication JSON reports.
    #[serde(default)]
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub truth: Truth,
    #[serde(default)]
    pub contamination: Option<ContaminationSpec>,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub estimators: Vec<EstimatorEntry>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Io => Error::Io(e.to_string()),
            _ => Error::Parse { line: e.line(), msg: e.to_string() },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        if self.n < 2 {
            return Err(config_err("sample size must be at least 2"));
        }
        if self.estimators.is_empty() {
            return Err(config_err("no estimators configured"));
        }
        self.truth.validate().map_err(|e| config_err(format!("truth: {e}")))?;
        if let Some(c) = &self.contamination {
            if self.truth.is_bivariate() {
                return Err(config_err("contamination schemes are univariate"));
            }
            c.validate(self.n)?;
        }
        let mut labels = std::collections::HashSet::new();
        for e in &self.estimators {
            if !labels.insert(e.label()) {
                return Err(config_err(format!("duplicate estimator label '{}'", e.label())));
            }
            e.validate()?;
            if self.truth.is_bivariate() != e.method.needs_bivariate() {
                return Err(config_err(format!("estimator '{}' does not match the data dimension", e.label())));
            }
        }
        Ok(())
    }
}
