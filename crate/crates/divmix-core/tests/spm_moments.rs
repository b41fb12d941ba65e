use divmix_core::divergence::PhiGenerator;
use divmix_core::models::{Component, FamilyKind, FamilyTemplate, MixtureSpec, Observations, ParametricFamily};
use divmix_core::numerics::{is_spd, split, QuadratureSpec};
use divmix_core::spm_moments::*;
use nalgebra::DMatrix;
use rand::Rng;

fn weibull_lognormal() -> SpmMomentModel {
    SpmMomentModel {
        component1: Component::Family(FamilyTemplate::new(FamilyKind::Weibull, vec![1.5, 1.0], vec![0]).unwrap()),
        constraints: MomentConstraintSet::univariate(3, FamilyTemplate::new(FamilyKind::Lognormal, vec![3.0, 0.5], vec![0]).unwrap()),
    }
}

fn wl_sample(seed: u64, n: usize) -> Vec<f64> {
    MixtureSpec::new(0.3, ParametricFamily::weibull(1.5, 1.0), ParametricFamily::lognormal(3.0, 0.5))
        .unwrap()
        .sample(n, &mut split(seed, 0))
}

#[test]
fn closed_form_matches_numeric_sup() {
    let model = weibull_lognormal();
    let obs = Observations::Uni(wl_sample(1, 1000));
    let table = MomentTable::empirical(&obs, &model.constraints.needed());
    let mut r = split(99, 0);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 50 {
        let phi = [0.15 + 0.3 * r.random::<f64>(), 0.8 + 1.5 * r.random::<f64>(), 2.8 + 0.4 * r.random::<f64>()];
        let o = omega_and_xi(&model, &phi, &table).unwrap();
        let Some(v) = o.value() else { continue };
        let scale: Vec<f64> = (0..4).map(|i| 1.0 / o.omega[(i, i)].sqrt()).collect();
        let (num, _) = numeric_sup_xi(&PhiGenerator::chi2(), &model, &phi, &obs, Some(&scale), &QuadratureSpec::default());
        worst = worst.max((num - v).abs());
        checked += 1;
    }
    assert!(worst < 1e-6, "worst gap {worst}");
}

#[test]
fn sylvester_agrees_with_eigenvalues() {
    let mut r = split(5, 0);
    for _ in 0..100 {
        let a = DMatrix::from_fn(4, 4, |_, _| 2.0 * r.random::<f64>() - 1.0);
        let shift = 1.5 * r.random::<f64>();
        let m = &a * a.transpose() - DMatrix::identity(4, 4) * shift;
        let eig = m.clone().symmetric_eigen().eigenvalues.min() > 0.0;
        assert_eq!(is_spd(&m), eig);
    }
}

#[test]
fn weibull_lognormal_desk_run() {
    let cfg = SpmMomentsConfig::new(weibull_lognormal());
    let t = std::time::Instant::now();
    for seed in 0..3 {
        let obs = Observations::Uni(wl_sample(seed, 1000));
        let rep = estimate_spm_moments(&SpmMomentsConfig { seed, ..cfg.clone() }, &obs).unwrap();
        eprintln!("{:?} {:?}", rep.phi_hat, rep.status);
    }
    eprintln!("{:?}", t.elapsed());
}
