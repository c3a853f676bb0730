//! The primary correctness gate for every h formula: the closed-form rate
//! must agree with the expectation of the brute-force per-observation KL
//! oracle, and rates must be non-negative up to numerical error.

use gplab_core::domain::{truth_catalog, CovariateSpace, TruthSpec};
use gplab_core::gp::{GpPathSampler, KernelSpec};
use gplab_core::kl::{kl_rate, per_obs_kl_oracle};
use gplab_core::model::{ObservationModel, Theta};
use gplab_core::quad::Integrator;
use gplab_core::rng::RngContract;
use rand_distr::Distribution;

fn all_models() -> Vec<ObservationModel> {
    vec![
        ObservationModel::default_binary(),
        ObservationModel::default_poisson(),
        ObservationModel::GaussianError,
        ObservationModel::LaplaceError,
    ]
}

fn random_theta(
    sampler: &GpPathSampler,
    model: &ObservationModel,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Theta {
    let eta = sampler.draw(rng);
    let sigma = model.requires_scale().then(|| {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        (0.4 * z).exp()
    });
    Theta::new(eta, sigma).unwrap()
}

fn truth_for(model: &ObservationModel) -> TruthSpec {
    let t = truth_catalog("smooth-sin").unwrap();
    if model.requires_scale() {
        t.with_sigma0(0.8)
    } else {
        t
    }
}

#[test]
fn closed_form_matches_oracle_for_random_thetas() {
    let space = CovariateSpace::new(1).unwrap();
    let integ = Integrator::tensor(space, 64);
    let sampler = GpPathSampler::new(&KernelSpec::default(), vec![65]).unwrap();
    for model in all_models() {
        let truth = truth_for(&model);
        let mut rng = RngContract::new(77, format!("oracle/{}", model.name())).rng();
        for trial in 0..20 {
            let theta = random_theta(&sampler, &model, &mut rng);
            let closed = kl_rate(&model, &theta, &truth, &integ).unwrap();
            let (oracle, oracle_err) = integ
                .expect(|x| per_obs_kl_oracle(&model, &theta, &truth, x).unwrap())
                .unwrap();
            // the oracle's own truncation/tolerance allowance
            let combined = closed.err + oracle_err + 1e-9;
            assert!(
                (closed.value - oracle).abs() <= 3.0 * combined,
                "{} trial {trial}: closed {} vs oracle {oracle} (allow {})",
                model.name(),
                closed.value,
                3.0 * combined
            );
        }
    }
}

#[test]
fn rates_are_nonnegative_for_random_thetas() {
    let space = CovariateSpace::new(1).unwrap();
    let integ = Integrator::tensor(space, 64);
    let sampler = GpPathSampler::new(&KernelSpec::default(), vec![65]).unwrap();
    for model in all_models() {
        let truth = truth_for(&model);
        let mut rng = RngContract::new(78, format!("nonneg/{}", model.name())).rng();
        for _ in 0..1000 {
            let theta = random_theta(&sampler, &model, &mut rng);
            let est = kl_rate(&model, &theta, &truth, &integ).unwrap();
            assert!(
                est.value >= -est.err,
                "{}: h = {} with err {}",
                model.name(),
                est.value,
                est.err
            );
        }
    }
}
