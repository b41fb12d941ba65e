use divmix_core::divergence::PhiGenerator;
use divmix_core::models::{FamilyKind, FamilyTemplate, MixtureSpec, ParametricFamily};
use divmix_core::numerics::{rng, split, GaussLegendre};
use divmix_core::spm_lmoments::*;
use rand::Rng;

fn tsw_gauss_model() -> SpmLMomentModel {
    SpmLMomentModel {
        component1: FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 0.5], vec![0]).unwrap(),
        constraints: LMomentConstraintSet::up_to(4, FamilyTemplate::new(FamilyKind::TwoSidedWeibull, vec![3.0, 1.5], vec![0]).unwrap()),
    }
}

fn tsw_gauss_truth() -> MixtureSpec {
    MixtureSpec::new(0.7, ParametricFamily::gaussian(0.0, 0.5), ParametricFamily::two_sided_weibull(3.0, 1.5)).unwrap()
}

const MIX1_STARTS: [[f64; 3]; 6] = [[0.8, 1.0, 1.0], [0.5, -1.0, 2.5], [0.8, 0.5, 2.0], [0.7, 0.0, 3.0], [0.7, 1.0, 4.0], [0.5, 2.0, 3.5]];

#[test]
fn shifted_legendre_orthogonality() {
    let gl = GaussLegendre::new(20);
    for r in 0..6 {
        for s in 0..6 {
            let v = gl.integrate(&mut |u| shifted_legendre(r, u) * shifted_legendre(s, u), 0.0, 1.0).unwrap();
            let want = if r == s { 1.0 / (2 * r + 1) as f64 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "r={r} s={s} {v}");
        }
    }
    for r in 2..=5 {
        assert!(legendre_k(r, 0.0).abs() < 1e-14 && legendre_k(r, 1.0).abs() < 1e-12);
    }
}

#[test]
fn exponential_second_lmoment() {
    let x = ParametricFamily::exponential(1.0).sample(10_000, &mut rng(3));
    let l = empirical_lmoments(&x, &[2]);
    assert!((l[0] - 0.5).abs() < 0.05, "{l:?}");
}

#[test]
fn quantile_quadrature_agrees_with_order_statistics() {
    // batch means give the Monte Carlo standard error of the plug-in
    let f = ParametricFamily::weibull(1.5, 1.0);
    let x = f.sample(100_000, &mut rng(11));
    for r in 2..=4 {
        let exact = f.lmoment_numeric(r).unwrap();
        let all = empirical_lmoments(&x, &[r])[0];
        let batches: Vec<f64> = x.chunks(5000).map(|c| empirical_lmoments(c, &[r])[0]).collect();
        let m = batches.iter().sum::<f64>() / 20.0;
        let sd = (batches.iter().map(|b| (b - m).powi(2)).sum::<f64>() / 19.0).sqrt();
        let se = sd / 20f64.sqrt();
        assert!((all - exact).abs() < 3.0 * se, "r={r}: {all} vs {exact} (se {se})");
    }
}

#[test]
fn chi2_closed_form_matches_numeric_sup() {
    let model = tsw_gauss_model();
    let data = tsw_gauss_truth().sample(100, &mut split(5, 0));
    let base = CdfBase::empirical(&data);
    let mut r = rng(17);
    for _ in 0..20 {
        let phi = [r.random_range(0.2..0.9), r.random_range(-1.0..1.0), r.random_range(1.0..5.0)];
        let o = lomega_and_xi(&model, &phi, &base).unwrap();
        let eig = o.omega.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|e| *e > 0.0), "Ω not positive definite at {phi:?}");
        let (v, xi) = numeric_sup_xi_l(&PhiGenerator::chi2(), &model, &phi, &base).unwrap();
        assert!((v - o.value()).abs() < 1e-6, "{phi:?}: numeric {v} closed {}", o.value());
        let h = h_lmoments(&PhiGenerator::chi2(), &model, &phi, o.xi.as_slice(), &base).unwrap();
        assert!((h - o.value()).abs() < 1e-10);
        assert!(xi.iter().zip(o.xi.iter()).all(|(a, b)| (a - b).abs() < 1e-3 * (1.0 + b.abs())));
    }
}

#[test]
fn population_objective_vanishes_at_truth() {
    let model = tsw_gauss_model();
    let base = CdfBase::Population(tsw_gauss_truth());
    let phi = [0.7, 0.0, 3.0];
    let o = lomega_and_xi(&model, &phi, &base).unwrap();
    assert!(o.value().abs() < 1e-6, "{}", o.value());
    let (v, _) = numeric_sup_xi_l(&PhiGenerator::chi2(), &model, &phi, &base).unwrap();
    assert!(v.abs() < 1e-6);
    assert_eq!(h_lmoments(&PhiGenerator::chi2(), &model, &phi, &[0.0; 3], &base).unwrap(), 0.0);
    // finite-difference gradient of the objective at the truth
    let f = |p: &[f64]| lmoment_objective(&PhiGenerator::chi2(), &model, p, &base);
    for i in 0..3 {
        let mut a = phi;
        let mut b = phi;
        a[i] += 1e-4;
        b[i] -= 1e-4;
        let g = (f(&a) - f(&b)) / 2e-4;
        assert!(g.abs() < 1e-4, "gradient {i}: {g}");
        assert!(f(&a) >= -1e-9 && f(&b) >= -1e-9);
    }
}

#[test]
fn two_sided_weibull_gaussian_desk_run() {
    let model = tsw_gauss_model();
    let cfg = SpmLMomentsConfig::new(model).with_starts(MIX1_STARTS.iter().map(|s| s.to_vec()).collect());
    let t = std::time::Instant::now();
    let mut acc = [0.0; 3];
    let reps = 10;
    for i in 0..reps {
        let data = tsw_gauss_truth().sample(100, &mut split(2024, i));
        let rep = estimate_spm_lmoments(&cfg, &data).unwrap();
        for k in 0..3 {
            acc[k] += rep.phi_hat[k] / reps as f64;
        }
    }
    eprintln!("mean {acc:?} in {:?}", t.elapsed());
    assert!(acc[0] > 0.6 && acc[0] < 0.9 && acc[1].abs() < 0.2 && acc[2] > 2.3 && acc[2] < 3.8, "{acc:?}");
}
