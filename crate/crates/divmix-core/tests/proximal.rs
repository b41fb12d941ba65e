use divmix_core::divergence::PhiGenerator;
use divmix_core::dual::{objective_quad, KernelDual};
use divmix_core::kde::{BandwidthRule, KernelDensityEstimate, KernelKind};
use divmix_core::models::{FamilyKind, FamilyTemplate, MixtureSpec, ModelSpec, ParametricFamily};
use divmix_core::numerics::split;
use divmix_core::proximal::*;

fn gmm() -> ModelSpec {
    let t = FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 1.0], vec![0]).unwrap();
    ModelSpec::Mixture { component1: t.clone(), component0: t }
}

fn sample(seed: u64, n: usize) -> Vec<f64> {
    let m = MixtureSpec::new(0.35, ParametricFamily::gaussian(-2.0, 1.0), ParametricFamily::gaussian(1.5, 1.0)).unwrap();
    m.sample(n, &mut split(seed, 0))
}

fn em_closed(phi: &[f64], y: &[f64]) -> Vec<f64> {
    let m = MixtureSpec::new(phi[0], ParametricFamily::gaussian(phi[1], 1.0), ParametricFamily::gaussian(phi[2], 1.0)).unwrap();
    let h = label_posteriors(&m, y);
    let s1: f64 = h.iter().map(|v| v[0]).sum();
    let s0: f64 = h.iter().map(|v| v[1]).sum();
    let m1 = h.iter().zip(y).map(|(v, x)| v[0] * x).sum::<f64>() / s1;
    let m0 = h.iter().zip(y).map(|(v, x)| v[1] * x).sum::<f64>() / s0;
    vec![s1 / y.len() as f64, m1, m0]
}

#[test]
fn em_equivalence_one_and_two_step() {
    let model = gmm();
    for seed in 0..2u64 {
        let y = sample(seed, 100);
        let kde = KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Silverman, &y).unwrap();
        let obj = KernelDual::new(PhiGenerator::kl_mod(), &model, &kde, &y, objective_quad());
        let init = vec![0.5, -1.0, 1.0];
        let cfg = ProximalConfig { psi: PsiKind::Kullback, tol: 0.0, max_iter: 50, ..Default::default() };
        for mode in [ProximalMode::OneStep, ProximalMode::TwoStep] {
            let cfg = ProximalConfig { mode: mode.clone(), ..cfg.clone() };
            let run = proximal_minimize(&obj, &model, &y, &init, &cfg).unwrap();
            let mut em = init.clone();
            let mut worst: f64 = 0.0;
            for it in &run.iterates[1..] {
                em = em_closed(&em, &y);
                for (a, b) in it.iter().zip(&em) {
                    worst = worst.max((a - b).abs());
                }
            }
            assert!(worst < 1e-6, "seed {seed} {mode:?}: {worst} after {} iterations", run.iterates.len() - 1);
            assert!(run.is_monotone(1e-10));
        }
    }
}

#[test]
fn hellinger_proximal_monotone_and_matches_direct() {
    use divmix_core::numerics::{multistart, OptimizerSpec};
    let model = gmm();
    let y = sample(7, 100);
    let kde = KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Silverman, &y).unwrap();
    let obj = KernelDual::new(PhiGenerator::hellinger(), &model, &kde, &y, objective_quad());
    let init = vec![0.5, -1.0, 1.0];
    let t = std::time::Instant::now();
    let run = proximal_minimize(&obj, &model, &y, &init, &ProximalConfig::default()).unwrap();
    eprintln!("prox {:?} iters {} in {:?}", run.last(), run.iterates.len(), t.elapsed());
    assert!(run.is_monotone(1e-10));
    let b = model.bounds(&y);
    let starts = vec![init.clone(), vec![0.35, -2.0, 1.5], vec![0.6, 1.5, -2.0]];
    let direct = multistart(|p| obj.value(p), &starts, &OptimizerSpec::nelder_mead(b));
    eprintln!("direct {:?} {} vs {}", direct.x, direct.f, run.final_objective());
    assert!((direct.f - run.final_objective()).abs() < 1e-3);
}
