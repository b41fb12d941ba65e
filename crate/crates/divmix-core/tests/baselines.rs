use divmix_core::baselines::*;
use divmix_core::kde::{BandwidthRule, KdeConfig, KernelDensityEstimate, KernelKind};
use divmix_core::models::{Component, FamilyKind, FamilyTemplate, MixtureSpec, Observations, ParametricFamily};
use divmix_core::numerics::split;
use divmix_core::report::Status;
use divmix_core::spm_moments::{estimate_spm_moments, MomentConstraintSet, SpmMomentModel, SpmMomentsConfig};

fn weibull_mix(lambda: f64) -> MixtureSpec {
    MixtureSpec::new(lambda, ParametricFamily::weibull(2.0, 0.5), ParametricFamily::weibull(1.0, 1.0)).unwrap()
}

fn weibull_t1() -> FamilyTemplate {
    FamilyTemplate::new(FamilyKind::Weibull, vec![2.0, 0.5], vec![0]).unwrap()
}

fn gauss_data(n: usize, seed: u64) -> Vec<f64> {
    MixtureSpec::new(0.35, ParametricFamily::gaussian(-2.0, 1.0), ParametricFamily::gaussian(1.5, 1.0))
        .unwrap()
        .sample(n, &mut split(seed, 0))
}

fn gauss_t1() -> FamilyTemplate {
    FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 1.0], vec![0]).unwrap()
}

fn robin_cfg(init: Vec<f64>) -> RobinConfig {
    RobinConfig { component1: gauss_t1(), kde: KdeConfig::gaussian_silverman(), init, weights: None, control: IterControl::default() }
}

#[test]
fn weibull_mixture_song_fails_while_moments_succeed() {
    let reps = 4;
    let (mut song, mut spm) = (0.0, 0.0);
    for i in 0..reps {
        let data = weibull_mix(0.3).sample(10_000, &mut split(77, i));
        let cfg = SongConfig {
            component1: weibull_t1(),
            kde: KdeConfig::new(KernelKind::RIGAsym, BandwidthRule::Fixed(0.01)),
            variant: SongVariant::Stabilized,
            init: vec![0.3, 2.0],
            control: IterControl::default(),
        };
        let r = song_em(&cfg, &data).unwrap();
        assert!(r.inner_variable.as_ref().unwrap().iter().all(|w| (0.0..=1.0).contains(w)));
        song += r.phi_hat[0] / reps as f64;
        let model = SpmMomentModel {
            component1: Component::Family(weibull_t1()),
            constraints: MomentConstraintSet::univariate(3, FamilyTemplate::new(FamilyKind::Weibull, vec![1.0, 1.0], vec![0]).unwrap()),
        };
        let mut c = SpmMomentsConfig::new(model);
        c.seed = i;
        spm += estimate_spm_moments(&c, &Observations::Uni(data)).unwrap().phi_hat[0] / reps as f64;
    }
    assert!((0.75..=0.86).contains(&song), "song mean {song}");
    assert!((0.27..=0.34).contains(&spm), "moment estimator mean {spm}");
}

#[test]
fn every_method_lands_in_the_easy_envelope() {
    let data = gauss_data(1000, 8);
    let mut got = vec![];
    got.push(("bordes", bordes_symmetry(&BordesConfig::new(gauss_t1()), &data).unwrap()));
    for v in [SongVariant::Plain, SongVariant::Stabilized] {
        let cfg = SongConfig { component1: gauss_t1(), kde: KdeConfig::gaussian_silverman(), variant: v, init: vec![0.4, -1.5], control: IterControl::default() };
        got.push(("song", song_em(&cfg, &data).unwrap()));
    }
    let pi = PiMaxConfig { component1: gauss_t1(), kde: KdeConfig::gaussian_silverman(), bracket: Some(vec![(-4.0, 0.0)]), restarts: 5, seed: 1 };
    got.push(("pi_max", song_pi_max(&pi, &data).unwrap()));
    for (name, r) in &got {
        assert!(r.phi_hat[0] > 0.2 && r.phi_hat[0] < 0.5, "{name}: {:?}", r.phi_hat);
        if let Some(w) = &r.inner_variable {
            assert!(w.iter().all(|v| (0.0..=1.0).contains(v)), "{name} weights");
        }
    }
}

#[test]
fn stochastic_em_drifts_towards_zero_on_the_easy_mixture() {
    let data = gauss_data(1000, 8);
    let mut sem = SemConfig::new(gauss_t1(), KdeConfig::gaussian_silverman(), vec![0.4, -1.5], 3);
    sem.iters = 400;
    sem.burn = 100;
    let r = stochastic_em(&sem, &data).unwrap();
    let tr = &r.objective_trace;
    assert!(tr[0] > 0.2 && tr[0] < 0.4, "{}", tr[0]);
    let tail = &tr[tr.len() - 50..];
    assert!(r.status == Status::Degenerate || tail.iter().sum::<f64>() / 50.0 < tr[0] - 0.05);
}

#[test]
fn robin_drifts_towards_zero_on_the_easy_mixture() {
    // the weight recurrence leaves f₀ free, so the proportion keeps leaking
    // into the kernel part; it starts near the truth and decreases
    let data = gauss_data(1000, 8);
    let cfg = RobinConfig { control: IterControl { tol: 1e-6, max_iter: 200 }, ..robin_cfg(vec![0.4, -1.5]) };
    let r = robin_em(&cfg, &data).unwrap();
    let tr = &r.objective_trace;
    assert!(tr[0] > 0.2 && tr[0] < 0.4, "{}", tr[0]);
    assert!(tr.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    assert!(*tr.last().unwrap() < tr[0] - 0.05);
    assert!((r.phi_hat[1] + 2.0).abs() < 0.2);
}

#[test]
fn smoothed_symmetry_method_on_the_two_sided_mixture() {
    let truth = MixtureSpec::new(0.7, ParametricFamily::gaussian(0.0, 0.5), ParametricFamily::two_sided_weibull(3.0, 1.5)).unwrap();
    let data = truth.sample(100, &mut split(12, 0));
    let mut b = BordesConfig::new(FamilyTemplate::new(FamilyKind::Gaussian, vec![0.0, 0.5], vec![0]).unwrap());
    b.kde = Some(KdeConfig::gaussian_silverman());
    let r = bordes_symmetry(&b, &data).unwrap();
    assert!(r.phi_hat[0] >= 0.1 && r.phi_hat[0] <= 0.9);
    assert_eq!(r.param_names, vec!["lambda", "mu", "mu0"]);
}

#[test]
fn robin_fixed_point_and_equal_densities() {
    let data = gauss_data(200, 2);
    let r = robin_em(&RobinConfig { control: IterControl { tol: 1e-13, max_iter: 20_000 }, weights: Some(vec![0.4; 200]), ..robin_cfg(vec![0.4, -1.5]) }, &data).unwrap();
    assert_eq!(r.status, Status::Converged);
    let w = r.inner_variable.clone().unwrap();
    let kde = KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Silverman, &data).unwrap();
    let (_, _, next) = robin_step(&gauss_t1(), &kde, &data, &r.phi_hat[1..], &w).unwrap();
    let d = w.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-12, "{d}");

    // parametric density equal to f̂₀ at λ = ½ gives w = ½
    let p1 = [0.3, 0.1, 0.7];
    let w = song_weights(SongVariant::Plain, 0.5, &p1, &p1.map(|v| v));
    assert!(w.iter().all(|v| (v - 0.5).abs() < 1e-15));
}

#[test]
fn robin_hits_the_boundary() {
    // a parametric component far from the data pushes every weight to 0
    let data = gauss_data(100, 4);
    let cfg = RobinConfig { component1: FamilyTemplate::fixed(&ParametricFamily::gaussian(30.0, 1.0)), ..robin_cfg(vec![0.5]) };
    let r = robin_em(&cfg, &data).unwrap();
    assert_eq!(r.status, Status::Degenerate);
}

#[test]
fn pi_max_scales_with_the_mixture_estimate() {
    let data = gauss_data(300, 6);
    let kde = KernelDensityEstimate::fit(KernelKind::Gaussian, BandwidthRule::Silverman, &data).unwrap();
    let fhat: Vec<f64> = data.iter().map(|&x| kde.evaluate(x)).collect();
    let cfg = PiMaxConfig { component1: gauss_t1(), kde: KdeConfig::gaussian_silverman(), bracket: None, restarts: 3, seed: 0 };
    let a = song_pi_max_with(&cfg, &fhat, &data).unwrap();
    let scaled: Vec<f64> = fhat.iter().map(|v| 0.5 * v).collect();
    let b = song_pi_max_with(&cfg, &scaled, &data).unwrap();
    assert!((b.phi_hat[0] - 0.5 * a.phi_hat[0]).abs() < 1e-9);
    assert!((b.phi_hat[1] - a.phi_hat[1]).abs() < 1e-6);
    // f̂ equal to f₁(·|θ₀) gives ratio 1 at θ₀
    let f1 = ParametricFamily::gaussian(-2.0, 1.0);
    let fh: Vec<f64> = data.iter().map(|&x| f1.pdf(x)).collect();
    assert!((pi_ratio(&gauss_t1(), &[-2.0], &data, &fh) - 1.0).abs() < 1e-12);
}

#[test]
fn stochastic_em_degenerate_and_deterministic() {
    let data = gauss_data(100, 9);
    let mut cfg = SemConfig::new(gauss_t1(), KdeConfig::gaussian_silverman(), vec![1.0, -2.0], 5);
    cfg.iters = 50;
    cfg.burn = 10;
    assert_eq!(stochastic_em(&cfg, &data).unwrap().status, Status::Degenerate);
    cfg.init = vec![0.4, -2.0];
    let a = stochastic_em(&cfg, &data).unwrap();
    let b = stochastic_em(&cfg, &data).unwrap();
    assert_eq!(a.phi_hat, b.phi_hat);
    assert_eq!(a.objective_trace, b.objective_trace);
}

#[test]
fn symmetry_method_is_deterministic() {
    let data = gauss_data(100, 3);
    let cfg = BordesConfig::new(gauss_t1());
    let a = bordes_symmetry(&cfg, &data).unwrap();
    let b = bordes_symmetry(&cfg, &data).unwrap();
    assert_eq!(a.phi_hat, b.phi_hat);
}
