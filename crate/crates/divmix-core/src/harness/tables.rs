//! Built-in table setups with their published reference values.

use super::config::{EstimatorEntry, ExperimentConfig, InitSpec, Method, Outputs, Truth};
use super::run::{run_experiment, tables_csv, Reference, ResultTable};
use crate::baselines::{BordesConfig, IterControl, PiMaxConfig, RobinConfig, SemConfig, SongConfig, SongVariant};
use crate::divergence::PhiGenerator;
use crate::dual::{gaussian_full, DualConfig};
use crate::kde::{BandwidthRule, KdeConfig, KernelKind};
use crate::models::{Component, ContaminationSpec, FamilyKind, FamilyTemplate, MixtureSpec, ModelSpec, ParametricFamily};
use crate::spm_lmoments::{LMomentConstraintSet, SpmLMomentModel, SpmLMomentsConfig};
use crate::spm_moments::{MomentConstraintSet, MomentTarget, SpmMomentModel, SpmMomentsConfig};
use crate::{Error, Result};

pub const TABLE_IDS: &[&str] = &[
    "gaussian",
    "gaussian-mixture",
    "weibull-mixture-moments-0.3",
    "weibull-mixture-moments-0.7",
    "weibull-lognormal-moments-mix1",
    "weibull-lognormal-lmoments-mix1",
    "tsw-gauss-moments-mix1",
    "tsw-gauss-lmoments-mix1",
];

#[derive(Debug, Clone)]
pub struct TableSpec {
    pub id: String,
    pub title: String,
    /// Replications behind the published numbers.
    pub paper_reps: usize,
    /// One experiment per column group of the published table.
    pub scenarios: Vec<ExperimentConfig>,
    pub references: Vec<Reference>,
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub spec: TableSpec,
    pub tables: Vec<ResultTable>,
}

impl Reproduction {
    pub fn csv(&self) -> String {
        tables_csv(&self.tables, &self.spec.references)
    }
}

fn template(kind: FamilyKind, base: [f64; 2], free: &[usize]) -> FamilyTemplate {
    FamilyTemplate::new(kind, base.to_vec(), free.to_vec()).expect("built-in template")
}

fn mixture(lambda: f64, f1: ParametricFamily, f0: ParametricFamily) -> MixtureSpec {
    MixtureSpec::new(lambda, f1, f0).expect("built-in mixture")
}

fn add_refs(out: &mut Vec<Reference>, scenario: &str, estimator: &str, values: &[(&str, f64, f64)]) {
    for &(q, mean, sd) in values {
        out.push(Reference {
            scenario: scenario.into(),
            estimator: estimator.into(),
            quantity: q.into(),
            mean,
            sd,
        });
    }
}

fn experiment(name: &str, truth: Truth, n: usize, estimators: Vec<EstimatorEntry>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        truth,
        contamination: None,
        n,
        replications: 100,
        seed: 0,
        estimators,
        outputs: Outputs::default(),
    }
}

fn silverman() -> KdeConfig {
    KdeConfig::gaussian_silverman()
}

fn dual_estimators(model: &ModelSpec, init: InitSpec) -> Vec<EstimatorEntry> {
    let d = DualConfig::new(PhiGenerator::hellinger(), model.clone());
    let sj = KdeConfig::new(KernelKind::Gaussian, BandwidthRule::SheatherJones);
    let e = |label: &str, m: Method| EstimatorEntry::new(label, m).with_init(init.clone());
    vec![
        e("classical", Method::Classical { dual: d.clone() }),
        e("kernel-silverman", Method::Kernel { dual: d.clone(), kde: silverman() }),
        e("kernel-sj", Method::Kernel { dual: d.clone(), kde: sj }),
        e("basu-lindsay-silverman", Method::BasuLindsay { dual: d.clone(), kde: silverman() }),
        e("beran-silverman", Method::Beran { dual: d.clone(), kde: silverman() }),
        e("dphide", Method::Dphide { dual: d.clone(), escort_kde: silverman() }),
        e("mdpd-0.25", Method::Mdpd { dual: d.clone(), a: 0.25 }),
        e("mdpd-0.5", Method::Mdpd { dual: d, a: 0.5 }),
        e("mle", Method::Mle { model: model.clone(), init: None, tol: 1e-10, max_iter: 1000 }),
    ]
}

fn gaussian() -> TableSpec {
    let truth = Truth::Family(ParametricFamily::gaussian(0.0, 1.0));
    let est = dual_estimators(&gaussian_full(), InitSpec::Config);
    let clean = experiment("no-outliers", truth.clone(), 100, est.clone());
    let mut dirty = experiment("outliers", truth, 100, est);
    dirty.contamination = Some(ContaminationSpec::ReplaceLargestByValue { count: 10, value: 10.0 });
    let mut r = vec![];
    // (mu, sd, sigma, sd, sqrt_chi2, sd, tvd, sd)
    let rows: [(&str, [f64; 8], [f64; 8]); 9] = [
        ("classical", [0.005, 0.111, 0.983, 0.082, 0.104, 0.052, 0.054, 0.026], [0.833, 0.103, 3.157, 0.039, 8.503, 0.113, 0.516, 0.002]),
        ("kernel-silverman", [0.005, 0.113, 0.967, 0.081, 0.106, 0.052, 0.056, 0.028], [-0.187, 0.114, 0.810, 0.069, 0.230, 0.063, 0.136, 0.041]),
        ("kernel-sj", [0.005, 0.113, 0.973, 0.082, 0.105, 0.052, 0.055, 0.027], [-0.191, 0.114, 0.800, 0.068, 0.239, 0.062, 0.141, 0.041]),
        ("basu-lindsay-silverman", [0.005, 0.114, 0.968, 0.081, 0.105, 0.052, 0.055, 0.028], [-0.191, 0.114, 0.805, 0.068, 0.235, 0.062, 0.139, 0.040]),
        ("beran-silverman", [0.005, 0.113, 1.024, 0.087, 0.114, 0.063, 0.054, 0.025], [-0.191, 0.114, 0.878, 0.075, 0.191, 0.067, 0.110, 0.042]),
        ("dphide", [0.005, 0.112, 0.982, 0.082, 0.104, 0.052, 0.054, 0.026], [-0.164, 0.114, 0.873, 0.080, 0.183, 0.068, 0.105, 0.042]),
        ("mdpd-0.25", [0.006, 0.112, 0.983, 0.083, 0.105, 0.052, 0.054, 0.026], [-0.145, 0.114, 0.854, 0.074, 0.185, 0.066, 0.107, 0.042]),
        ("mdpd-0.5", [0.008, 0.117, 0.979, 0.087, 0.110, 0.054, 0.057, 0.028], [-0.115, 0.116, 0.875, 0.081, 0.165, 0.068, 0.094, 0.042]),
        ("mle", [0.005, 0.111, 0.988, 0.082, 0.104, 0.052, 0.053, 0.025], [0.833, 0.103, 3.172, 0.039, 8.522, 0.111, 0.518, 0.002]),
    ];
    for (name, c, o) in rows {
        for (scen, v) in [("no-outliers", c), ("outliers", o)] {
            add_refs(
                &mut r,
                scen,
                name,
                &[("mu", v[0], v[1]), ("sigma", v[2], v[3]), ("sqrt_chi2", v[4], v[5]), ("tvd", v[6], v[7])],
            );
        }
    }
    TableSpec {
        id: "gaussian".into(),
        title: "Standard Gaussian model, n = 100, Hellinger: estimates and errors, with and without 10 outliers at 10"
            .into(),
        paper_reps: 100,
        scenarios: vec![clean, dirty],
        references: r,
    }
}

fn gaussian_mixture() -> TableSpec {
    let t = template(FamilyKind::Gaussian, [0.0, 1.0], &[0]);
    let model = ModelSpec::Mixture { component1: t.clone(), component0: t };
    let truth = Truth::Mixture(mixture(0.35, ParametricFamily::gaussian(-2.0, 1.0), ParametricFamily::gaussian(1.5, 1.0)));
    let init = InitSpec::Jitter { center: vec![0.35, -2.0, 1.5], width: vec![0.1, 0.5, 0.5] };
    let mut est = dual_estimators(&model, init);
    est.retain(|e| e.label() != "kernel-sj");
    let clean = experiment("no-outliers", truth.clone(), 100, est.clone());
    let mut dirty = experiment("outliers", truth, 100, est);
    dirty.contamination = Some(ContaminationSpec::AddUniformToExtremes {
        low_count: 5,
        low: (-5.0, -2.0),
        high_count: 5,
        high: (2.0, 5.0),
    });
    let mut r = vec![];
    // (lambda, sd, mu1, sd, mu0, sd, sqrt_chi2, sd, tvd, sd)
    let rows: [(&str, [f64; 10], [f64; 10]); 8] = [
        ("classical", [0.360, 0.054, -1.989, 0.204, 1.493, 0.136, 0.113, 0.044, 0.064, 0.025], [0.342, 0.064, -2.617, 0.288, 1.713, 0.172, 0.335, 0.102, 0.150, 0.034]),
        ("kernel-silverman", [0.360, 0.054, -1.993, 0.208, 1.499, 0.133, 0.113, 0.045, 0.064, 0.025], [0.349, 0.058, -1.767, 0.226, 1.377, 0.135, 0.155, 0.059, 0.087, 0.033]),
        ("basu-lindsay-silverman", [0.361, 0.055, -1.979, 0.207, 1.490, 0.139, 0.115, 0.043, 0.065, 0.024], [0.339, 0.062, -1.927, 0.305, 1.377, 0.158, 0.155, 0.073, 0.085, 0.033]),
        ("beran-silverman", [0.371, 0.050, -1.985, 0.203, 1.546, 0.132, 0.113, 0.046, 0.064, 0.025], [0.369, 0.053, -1.788, 0.218, 1.477, 0.134, 0.132, 0.050, 0.073, 0.027]),
        ("dphide", [0.361, 0.054, -1.988, 0.203, 1.492, 0.136, 0.112, 0.044, 0.064, 0.025], [0.355, 0.056, -2.132, 0.224, 1.605, 0.137, 0.142, 0.061, 0.076, 0.031]),
        ("mdpd-0.25", [0.360, 0.053, -1.994, 0.213, 1.492, 0.133, 0.114, 0.045, 0.064, 0.025], [0.351, 0.057, -1.832, 0.223, 1.394, 0.134, 0.140, 0.054, 0.079, 0.030]),
        ("mdpd-0.5", [0.360, 0.053, -1.997, 0.226, 1.489, 0.136, 0.117, 0.047, 0.065, 0.025], [0.353, 0.056, -1.819, 0.218, 1.404, 0.132, 0.138, 0.053, 0.078, 0.030]),
        ("mle", [0.360, 0.054, -1.989, 0.204, 1.493, 0.136, 0.113, 0.044, 0.064, 0.025], [0.342, 0.064, -2.617, 0.288, 1.713, 0.172, 0.335, 0.102, 0.150, 0.034]),
    ];
    for (name, c, o) in rows {
        for (scen, v) in [("no-outliers", c), ("outliers", o)] {
            add_refs(
                &mut r,
                scen,
                name,
                &[
                    ("lambda", v[0], v[1]),
                    ("mu1", v[2], v[3]),
                    ("mu0", v[4], v[5]),
                    ("sqrt_chi2", v[6], v[7]),
                    ("tvd", v[8], v[9]),
                ],
            );
        }
    }
    TableSpec {
        id: "gaussian-mixture".into(),
        title: "Two-component Gaussian mixture (0.35, -2, 1.5), unit variances known, n = 100, Hellinger".into(),
        paper_reps: 100,
        scenarios: vec![clean, dirty],
        references: r,
    }
}

fn weibull_mixture(lambda: f64) -> TableSpec {
    let w1 = template(FamilyKind::Weibull, [2.0, 0.5], &[0]);
    let w0 = template(FamilyKind::Weibull, [1.0, 1.0], &[0]);
    let truth = Truth::Mixture(mixture(lambda, ParametricFamily::weibull(2.0, 0.5), ParametricFamily::weibull(1.0, 1.0)));
    let spm = |l: u32| {
        Method::SpmMoments(SpmMomentsConfig::new(SpmMomentModel {
            component1: Component::Family(w1.clone()),
            constraints: MomentConstraintSet::univariate(l, w0.clone()),
        }))
    };
    let kde = KdeConfig::new(KernelKind::RIGAsym, BandwidthRule::Fixed(0.01));
    let init = InitSpec::Jitter { center: vec![lambda, 2.0], width: vec![0.05, 0.2] };
    let est = vec![
        EstimatorEntry::new("chi2-3-moments", spm(3)),
        EstimatorEntry::new("chi2-4-moments", spm(4)),
        EstimatorEntry::new(
            "robin",
            Method::Robin(RobinConfig { component1: w1.clone(), kde, init: vec![], weights: None, control: IterControl::default() }),
        )
        .with_init(init.clone()),
        EstimatorEntry::new(
            "song-em",
            Method::Song(SongConfig {
                component1: w1.clone(),
                kde,
                variant: SongVariant::Stabilized,
                init: vec![],
                control: IterControl::default(),
            }),
        )
        .with_init(init),
        EstimatorEntry::new(
            "song-pi-max",
            Method::PiMax(PiMaxConfig { component1: w1, kde, bracket: None, restarts: 10, seed: 0 }),
        ),
    ];
    let name = format!("lambda-{lambda}");
    let mut r = vec![];
    let rows: Vec<(&str, Vec<(&str, f64, f64)>)> = if lambda < 0.5 {
        vec![
            ("chi2-3-moments", vec![("lambda", 0.304, 0.016), ("nu", 2.191, 0.887), ("nu0", 0.998, 0.013)]),
            ("chi2-4-moments", vec![("lambda", 0.303, 0.016), ("nu", 2.120, 0.285), ("nu0", 1.001, 0.013)]),
            ("robin", vec![("lambda", 0.604, 0.029), ("nu", 1.256, 0.037)]),
            ("song-em", vec![("lambda", 0.806, 0.005), ("nu", 1.185, 0.018)]),
            ("song-pi-max", vec![("lambda", 0.624, 0.007), ("nu", 1.312, 0.013)]),
        ]
    } else {
        vec![
            ("chi2-3-moments", vec![("lambda", 0.700, 0.010), ("nu", 2.006, 0.217), ("nu0", 1.005, 0.024)]),
            ("chi2-4-moments", vec![("lambda", 0.701, 0.010), ("nu", 2.014, 0.086), ("nu0", 1.013, 0.024)]),
            ("robin", vec![("lambda", 0.654, 0.101), ("nu", 1.591, 0.085)]),
            ("song-em", vec![("lambda", 0.907, 0.004), ("nu", 1.675, 0.020)]),
            ("song-pi-max", vec![("lambda", 0.782, 0.006), ("nu", 1.443, 0.012)]),
        ]
    };
    for (e, v) in rows {
        add_refs(&mut r, &name, e, &v);
    }
    TableSpec {
        id: format!("weibull-mixture-moments-{lambda}"),
        title: format!(
            "Weibull mixture {lambda}·W(2, 0.5) + {:.1}·W(1, 1), shapes free, n = 10^4: moment estimator vs baselines",
            1.0 - lambda
        ),
        paper_reps: 100,
        scenarios: vec![experiment(&name, truth, 10_000, est)],
        references: r,
    }
}

fn wl_truth() -> Truth {
    Truth::Mixture(mixture(0.3, ParametricFamily::weibull(1.5, 1.0), ParametricFamily::lognormal(3.0, 0.5)))
}

fn wl_moments() -> Method {
    Method::SpmMoments(SpmMomentsConfig::new(SpmMomentModel {
        component1: Component::Family(template(FamilyKind::Weibull, [1.5, 1.0], &[0])),
        constraints: MomentConstraintSet::univariate(3, template(FamilyKind::Lognormal, [3.0, 0.5], &[0])),
    }))
}

const WL_MOMENTS_REF: [(&str, f64, f64); 3] = [("lambda", 0.308, 0.017), ("nu", 1.484, 0.624), ("mu0", 3.002, 0.026)];

fn weibull_lognormal_moments() -> TableSpec {
    let w1 = template(FamilyKind::Weibull, [1.5, 1.0], &[0]);
    let kde = silverman();
    let init = InitSpec::Jitter { center: vec![0.3, 1.5], width: vec![0.05, 0.2] };
    let est = vec![
        EstimatorEntry::new("chi2-moments", wl_moments()),
        EstimatorEntry::new(
            "robin",
            Method::Robin(RobinConfig { component1: w1.clone(), kde, init: vec![], weights: None, control: IterControl::default() }),
        )
        .with_init(init.clone()),
        EstimatorEntry::new(
            "song-em",
            Method::Song(SongConfig {
                component1: w1.clone(),
                kde,
                variant: SongVariant::Stabilized,
                init: vec![],
                control: IterControl::default(),
            }),
        )
        .with_init(init.clone()),
        EstimatorEntry::new(
            "song-pi-max",
            Method::PiMax(PiMaxConfig { component1: w1.clone(), kde, bracket: None, restarts: 10, seed: 0 }),
        ),
        EstimatorEntry::new("sem", Method::Sem(SemConfig::new(w1, kde, vec![], 0))).with_init(init),
    ];
    let mut r = vec![];
    add_refs(&mut r, "mix1", "chi2-moments", &WL_MOMENTS_REF);
    add_refs(&mut r, "mix1", "robin", &[("lambda", 0.296, 0.015), ("nu", 1.557, 0.068)]);
    add_refs(&mut r, "mix1", "song-em", &[("lambda", 0.291, 0.015), ("nu", 1.614, 0.087)]);
    add_refs(&mut r, "mix1", "song-pi-max", &[("lambda", 0.230, 0.022), ("nu", 1.662, 0.251)]);
    add_refs(&mut r, "mix1", "sem", &[("lambda", 0.284, 0.041), ("nu", 1.570, 0.263)]);
    TableSpec {
        id: "weibull-lognormal-moments-mix1".into(),
        title: "0.3·W(1.5, 1) + 0.7·LN(3, 0.5), Weibull parametric, lognormal under 3 moments, n = 10^3".into(),
        paper_reps: 100,
        scenarios: vec![experiment("mix1", wl_truth(), 1000, est)],
        references: r,
    }
}

fn weibull_lognormal_lmoments() -> TableSpec {
    let lm = Method::SpmLmoments(SpmLMomentsConfig::new(SpmLMomentModel {
        component1: template(FamilyKind::Weibull, [1.5, 1.0], &[0]),
        constraints: LMomentConstraintSet::up_to(4, template(FamilyKind::Lognormal, [3.0, 0.5], &[0])),
    }));
    let est = vec![EstimatorEntry::new("chi2-lmoments", lm), EstimatorEntry::new("chi2-moments", wl_moments())];
    let mut r = vec![];
    add_refs(&mut r, "mix1", "chi2-lmoments", &[("lambda", 0.313, 0.019), ("nu", 1.027, 0.541), ("mu0", 2.992, 0.050)]);
    add_refs(&mut r, "mix1", "chi2-moments", &WL_MOMENTS_REF);
    TableSpec {
        id: "weibull-lognormal-lmoments-mix1".into(),
        title: "0.3·W(1.5, 1) + 0.7·LN(3, 0.5), lognormal under L-moments 2..4 vs 3 moments, n = 10^3".into(),
        paper_reps: 100,
        scenarios: vec![experiment("mix1", wl_truth(), 1000, est)],
        references: r,
    }
}

fn tsw_truth() -> Truth {
    Truth::Mixture(mixture(0.7, ParametricFamily::gaussian(0.0, 0.5), ParametricFamily::two_sided_weibull(3.0, 1.5)))
}

fn tsw_moments(exponents: &[u32]) -> Method {
    Method::SpmMoments(SpmMomentsConfig::new(SpmMomentModel {
        component1: Component::Family(template(FamilyKind::Gaussian, [0.0, 0.5], &[0])),
        constraints: MomentConstraintSet {
            exponents: exponents.iter().map(|&i| (i, 0)).collect(),
            target: MomentTarget::Family(template(FamilyKind::TwoSidedWeibull, [3.0, 1.5], &[0])),
        },
    }))
}

/// Fixed initial points (λ, μ, ν) used for the L-moment fits of this mixture.
pub const TSW_MIX1_STARTS: [[f64; 3]; 6] =
    [[0.8, 1.0, 1.0], [0.5, -1.0, 2.5], [0.8, 0.5, 2.0], [0.7, 0.0, 3.0], [0.7, 1.0, 4.0], [0.5, 2.0, 3.5]];

fn tsw_lmoments() -> Method {
    let model = SpmLMomentModel {
        component1: template(FamilyKind::Gaussian, [0.0, 0.5], &[0]),
        constraints: LMomentConstraintSet::up_to(4, template(FamilyKind::TwoSidedWeibull, [3.0, 1.5], &[0])),
    };
    Method::SpmLmoments(SpmLMomentsConfig::new(model).with_starts(TSW_MIX1_STARTS.iter().map(|s| s.to_vec()).collect()))
}

const TSW_M24_REF: [(&str, f64, f64); 3] = [("lambda", 0.764, 0.067), ("mu", -0.012, 0.342), ("nu0", 2.893, 0.731)];

fn tsw_gauss_moments() -> TableSpec {
    let g1 = template(FamilyKind::Gaussian, [0.0, 0.5], &[0]);
    let kde = silverman();
    let init = InitSpec::Jitter { center: vec![0.7, 0.0], width: vec![0.1, 0.2] };
    let mut bordes = BordesConfig::new(g1.clone());
    bordes.kde = Some(kde);
    let est = vec![
        EstimatorEntry::new("chi2-m1:3", tsw_moments(&[1, 2, 3])),
        EstimatorEntry::new("chi2-m2:4", tsw_moments(&[2, 3, 4])),
        EstimatorEntry::new("bordes-gaussian", Method::Bordes(bordes)),
        EstimatorEntry::new(
            "robin",
            Method::Robin(RobinConfig { component1: g1.clone(), kde, init: vec![], weights: None, control: IterControl::default() }),
        )
        .with_init(init.clone()),
        EstimatorEntry::new(
            "song-em",
            Method::Song(SongConfig {
                component1: g1.clone(),
                kde,
                variant: SongVariant::Stabilized,
                init: vec![],
                control: IterControl::default(),
            }),
        )
        .with_init(init.clone()),
        EstimatorEntry::new(
            "song-pi-max",
            Method::PiMax(PiMaxConfig { component1: g1.clone(), kde, bracket: None, restarts: 10, seed: 0 }),
        ),
        EstimatorEntry::new("sem", Method::Sem(SemConfig::new(g1, kde, vec![], 0))).with_init(init),
    ];
    let mut r = vec![];
    add_refs(&mut r, "mix1", "chi2-m1:3", &[("lambda", 0.713, 0.064), ("mu", -0.0003, 0.085), ("nu0", 4.315, 0.118)]);
    add_refs(&mut r, "mix1", "chi2-m2:4", &TSW_M24_REF);
    add_refs(&mut r, "mix1", "bordes-gaussian", &[("lambda", 0.211, 0.133), ("mu", 0.106, 0.533), ("mu0", -0.035, 0.203)]);
    add_refs(&mut r, "mix1", "robin", &[("lambda", 0.488, 0.137), ("mu", -0.005, 0.114)]);
    add_refs(&mut r, "mix1", "song-em", &[("lambda", 0.762, 0.040), ("mu", -0.005, 0.092)]);
    add_refs(&mut r, "mix1", "song-pi-max", &[("lambda", 0.717, 0.156), ("mu", -0.161, 2.301)]);
    add_refs(&mut r, "mix1", "sem", &[("lambda", 0.539, 0.083), ("mu", -0.005, 0.112)]);
    TableSpec {
        id: "tsw-gauss-moments-mix1".into(),
        title: "0.7·N(0, 0.5) + 0.3·TSW(3, 1.5), two-sided Weibull under moment constraints vs baselines, n = 100".into(),
        paper_reps: 100,
        scenarios: vec![experiment("mix1", tsw_truth(), 100, est)],
        references: r,
    }
}

fn tsw_gauss_lmoments() -> TableSpec {
    let est = vec![EstimatorEntry::new("chi2-lmoments", tsw_lmoments()), EstimatorEntry::new("chi2-m2:4", tsw_moments(&[2, 3, 4]))];
    let mut r = vec![];
    add_refs(&mut r, "mix1", "chi2-lmoments", &[("lambda", 0.758, 0.067), ("mu", -0.00228, 0.098), ("nu0", 3.040, 0.639)]);
    add_refs(&mut r, "mix1", "chi2-m2:4", &TSW_M24_REF);
    TableSpec {
        id: "tsw-gauss-lmoments-mix1".into(),
        title: "0.7·N(0, 0.5) + 0.3·TSW(3, 1.5), two-sided Weibull under L-moments 2..4, n = 100".into(),
        paper_reps: 100,
        scenarios: vec![experiment("mix1", tsw_truth(), 100, est)],
        references: r,
    }
}

pub fn table_spec(id: &str) -> Result<TableSpec> {
    Ok(match id {
        "gaussian" => gaussian(),
        "gaussian-mixture" => gaussian_mixture(),
        "weibull-mixture-moments-0.3" => weibull_mixture(0.3),
        "weibull-mixture-moments-0.7" => weibull_mixture(0.7),
        "weibull-lognormal-moments-mix1" => weibull_lognormal_moments(),
        "weibull-lognormal-lmoments-mix1" => weibull_lognormal_lmoments(),
        "tsw-gauss-moments-mix1" => tsw_gauss_moments(),
        "tsw-gauss-lmoments-mix1" => tsw_gauss_lmoments(),
        _ => {
            return Err(Error::Config(format!("unknown table '{id}'; known tables: {}", TABLE_IDS.join(", "))))
        }
    })
}

/// (id, title) of every built-in table.
pub fn list_tables() -> Vec<(String, String)> {
    TABLE_IDS.iter().map(|id| (id.to_string(), table_spec(id).expect("registered").title)).collect()
}

/// Replications at a given scale: the published count times `scale`, and
/// never fewer than 25.
pub fn scaled_reps(paper_reps: usize, scale: f64) -> usize {
    ((paper_reps as f64 * scale).round() as usize).max(25)
}

/// Reruns a built-in table at `scale` × the published replication count.
pub fn reproduce_table(id: &str, scale: f64, seed: u64) -> Result<Reproduction> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Config(format!("scale must lie in (0, 1], got {scale}")));
    }
    let mut spec = table_spec(id)?;
    let reps = scaled_reps(spec.paper_reps, scale);
    for s in &mut spec.scenarios {
        s.replications = reps;
        s.seed = seed;
        s.validate()?;
    }
    let tables = spec.scenarios.iter().map(|s| run_experiment(s).map(|o| o.table)).collect::<Result<Vec<_>>>()?;
    Ok(Reproduction { spec, tables })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_table_validates() {
        for id in TABLE_IDS {
            let spec = table_spec(id).unwrap();
            for s in &spec.scenarios {
                s.validate().unwrap_or_else(|e| panic!("{id}: {e}"));
                for e in &s.estimators {
                    let names = match &e.method {
                        Method::SpmMoments(c) => c.model.names(),
                        Method::SpmLmoments(c) => c.model.names(),
                        m => m.fitted_model().map(|m| m.names()).unwrap_or_default(),
                    };
                    for r in spec.references.iter().filter(|r| r.estimator == e.label()) {
                        if r.quantity != "tvd" && r.quantity != "sqrt_chi2" && !names.is_empty() {
                            assert!(names.contains(&r.quantity), "{id}/{}: {} not in {names:?}", e.label(), r.quantity);
                        }
                    }
                }
            }
            for r in &spec.references {
                assert!(spec.scenarios.iter().any(|s| s.name == r.scenario && s.estimators.iter().any(|e| e.label() == r.estimator)));
            }
        }
    }

    #[test]
    fn scale_rule() {
        assert_eq!(scaled_reps(100, 0.25), 25);
        assert_eq!(scaled_reps(100, 0.1), 25);
        assert_eq!(scaled_reps(100, 1.0), 100);
        assert!(reproduce_table("gaussian", 0.0, 1).is_err());
        assert!(matches!(reproduce_table("nope", 0.5, 1), Err(Error::Config(_))));
    }
}
