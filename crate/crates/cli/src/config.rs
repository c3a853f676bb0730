//! Experiment configuration: a single JSON file, preset-seedable, with CLI
//! flag overrides. Every field has a default so presets only pin what they
//! care about.

use gplab_core::domain::{truth_catalog, TruthSpec};
use gplab_core::gp::{ExponentForm, KernelSpec, PriorSpec, SieveSpec, SigmaPrior};
use gplab_core::model::{LinkBase, LinkSpec, ObservationModel};
use gplab_core::posterior::McmcConfig;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// binary | poisson | gaussian | laplace
    pub model: String,
    /// Truth catalog name.
    pub truth: String,
    /// Covariate scheme for simulated datasets: iid-from-q | fixed-grid.
    pub covariate_scheme: String,
    /// Truth noise scale for the gaussian/laplace models.
    pub sigma0: f64,
    pub master_seed: u64,
    /// Output directory; the --out flag overrides it.
    pub out_dir: Option<String>,
    pub replicates: usize,
    pub n_schedule: Vec<usize>,
    pub epsilon: EpsilonSchedule,
    pub link: LinkSection,
    pub prior: PriorSection,
    pub sieve: SieveSection,
    pub mcmc: McmcSection,
    /// Gauss-Legendre nodes per axis for expectations over Q.
    pub quadrature_nodes: usize,
    /// Grid resolution per axis for sampled prior paths.
    pub grid_nodes: usize,
    /// Prior draws for the sieve-mass study.
    pub sieve_draws: usize,
    /// Prior draws for h(Θ) and J(A) estimation.
    pub h_budget: usize,
    /// The monitored KL-bad set is A = {h ≥ set_threshold}.
    pub set_threshold: f64,
    /// Held-out covariates for the predictive study (d = 1).
    pub predictive_x: Vec<f64>,
    /// Random prior draws cross-checked against the oracle in the kl-rate
    /// study.
    pub kl_random_thetas: usize,
    /// Persist raw posterior draws as CSV.
    pub persist_draws: bool,
    pub bounds: BoundsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    /// ε_n = c · n^{−gamma}
    pub c: f64,
    pub gamma: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { c: 1.0, gamma: 0.8 }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(-self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    /// logistic-cdf | normal-cdf
    pub binary_base: String,
    pub kappa_b: f64,
    /// softplus | exp
    pub poisson_base: String,
    pub kappa_p: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            binary_base: "logistic-cdf".into(),
            kappa_b: 0.05,
            poisson_base: "softplus".into(),
            kappa_p: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub lengthscale: f64,
    pub amplitude: f64,
    pub jitter: f64,
    pub sigma_log_mean: f64,
    pub sigma_log_sd: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            lengthscale: 0.2,
            amplitude: 1.0,
            jitter: 1e-9,
            sigma_log_mean: 0.0,
            sigma_log_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SieveSection {
    pub beta: f64,
    /// quartic-root | square-root
    pub exponent_form: String,
    pub includes_sigma_band: bool,
}

impl Default for SieveSection {
    fn default() -> Self {
        Self {
            beta: 1.0,
            exponent_form: "quartic-root".into(),
            includes_sigma_band: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub sigma_step: f64,
}

impl Default for McmcSection {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 2_000,
            thin: 4,
            sigma_step: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub samples: usize,
    pub hoeffding_n: usize,
    pub hoeffding_range: f64,
    pub lambda: f64,
    pub lambda0: f64,
    pub hanson_wright_n: usize,
    pub bernstein_n: usize,
    /// Points per threshold grid.
    pub t_points: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            hoeffding_n: 100,
            hoeffding_range: 1.0,
            lambda: 2.0,
            lambda0: 1.0,
            hanson_wright_n: 100,
            bernstein_n: 100,
            t_points: 8,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: "binary".into(),
            truth: "smooth-sin".into(),
            covariate_scheme: "iid-from-q".into(),
            sigma0: 1.0,
            master_seed: 42,
            out_dir: None,
            replicates: 5,
            n_schedule: vec![50, 200, 800],
            epsilon: EpsilonSchedule::default(),
            link: LinkSection::default(),
            prior: PriorSection::default(),
            sieve: SieveSection::default(),
            mcmc: McmcSection::default(),
            quadrature_nodes: 64,
            grid_nodes: 401,
            sieve_draws: 10_000,
            h_budget: 10_000,
            set_threshold: 0.2,
            predictive_x: vec![0.25],
            kl_random_thetas: 20,
            persist_draws: false,
            bounds: BoundsSection::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.observation_model()?;
        self.truth_spec()?;
        if self.n_schedule.is_empty() {
            return Err(config_err("n_schedule must be nonempty"));
        }
        if !self.n_schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(config_err("n_schedule must be strictly increasing"));
        }
        if !(self.epsilon.gamma > 0.0 && self.epsilon.gamma < 1.0) {
            return Err(config_err(
                "epsilon.gamma must lie in (0,1) so that ε_n → 0 and n·ε_n → ∞",
            ));
        }
        if !(self.epsilon.c > 0.0) {
            return Err(config_err("epsilon.c must be positive"));
        }
        if self.replicates == 0 {
            return Err(config_err("replicates must be ≥ 1"));
        }
        if self.quadrature_nodes < 2 {
            return Err(config_err("quadrature_nodes must be ≥ 2"));
        }
        if self.grid_nodes < 2 {
            return Err(config_err("grid_nodes must be ≥ 2"));
        }
        if !(self.sigma0 > 0.0) {
            return Err(config_err("sigma0 must be positive"));
        }
        self.sampling_scheme()?;
        self.sieve_spec()?;
        self.mcmc_config()
            .validate()
            .map_err(|e| config_err(format!("mcmc: {e}")))?;
        self.prior_spec_for(&self.observation_model()?)
            .kernel
            .validate()
            .map_err(|e| config_err(format!("prior: {e}")))?;
        for x in &self.predictive_x {
            if !(0.0..=1.0).contains(x) {
                return Err(config_err(format!("predictive_x value {x} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn observation_model(&self) -> Result<ObservationModel, RunError> {
        let binary_base = match self.link.binary_base.as_str() {
            "logistic-cdf" => LinkBase::LogisticCdf,
            "normal-cdf" => LinkBase::NormalCdf,
            other => return Err(config_err(format!("link.binary_base: unknown base '{other}'"))),
        };
        let poisson_base = match self.link.poisson_base.as_str() {
            "softplus" => LinkBase::Softplus,
            "exp" => LinkBase::Exp,
            other => {
                return Err(config_err(format!("link.poisson_base: unknown base '{other}'")))
            }
        };
        match self.model.as_str() {
            "binary" => Ok(ObservationModel::Binary {
                link: LinkSpec::binary(binary_base, self.link.kappa_b)
                    .map_err(|e| config_err(format!("link.kappa_b: {e}")))?,
            }),
            "poisson" => Ok(ObservationModel::Poisson {
                link: LinkSpec::poisson(poisson_base, self.link.kappa_p)
                    .map_err(|e| config_err(format!("link.kappa_p: {e}")))?,
            }),
            "gaussian" => Ok(ObservationModel::GaussianError),
            "laplace" => Ok(ObservationModel::LaplaceError),
            other => Err(config_err(format!(
                "model: unknown model '{other}' (binary|poisson|gaussian|laplace)"
            ))),
        }
    }

    pub fn truth_spec(&self) -> Result<TruthSpec, RunError> {
        let t = truth_catalog(&self.truth).map_err(|e| config_err(format!("truth: {e}")))?;
        Ok(t.with_sigma0(self.sigma0))
    }

    pub fn sampling_scheme(&self) -> Result<gplab_core::domain::SamplingScheme, RunError> {
        match self.covariate_scheme.as_str() {
            "iid-from-q" => Ok(gplab_core::domain::SamplingScheme::IidFromQ),
            "fixed-grid" => Ok(gplab_core::domain::SamplingScheme::FixedGrid),
            other => Err(config_err(format!(
                "covariate_scheme: unknown scheme '{other}' (iid-from-q|fixed-grid)"
            ))),
        }
    }

    pub fn prior_spec_for(&self, model: &ObservationModel) -> PriorSpec {
        PriorSpec {
            kernel: KernelSpec {
                lengthscale: self.prior.lengthscale,
                amplitude: self.prior.amplitude,
                jitter: self.prior.jitter,
            },
            sigma_prior: model.requires_scale().then_some(SigmaPrior {
                log_mean: self.prior.sigma_log_mean,
                log_sd: self.prior.sigma_log_sd,
            }),
        }
    }

    pub fn sieve_spec(&self) -> Result<SieveSpec, RunError> {
        let form = match self.sieve.exponent_form.as_str() {
            "quartic-root" => ExponentForm::QuarticRoot,
            "square-root" => ExponentForm::SquareRoot,
            other => {
                return Err(config_err(format!(
                    "sieve.exponent_form: unknown form '{other}' (quartic-root|square-root)"
                )))
            }
        };
        SieveSpec::new(self.sieve.beta, form, self.sieve.includes_sigma_band)
            .map_err(|e| config_err(format!("sieve.beta: {e}")))
    }

    pub fn mcmc_config(&self) -> McmcConfig {
        McmcConfig {
            iterations: self.mcmc.iterations,
            burn_in: self.mcmc.burn_in,
            thin: self.mcmc.thin,
            sigma_step: self.mcmc.sigma_step,
        }
    }
}

/// Built-in presets, also shipped as files under configs/.
pub fn preset(name: &str) -> Result<ExperimentConfig, RunError> {
    let text = match name {
        "smoke" => include_str!("../../../configs/smoke.json"),
        "paper-desk" => include_str!("../../../configs/paper-desk.json"),
        other => {
            return Err(config_err(format!(
                "unknown preset '{other}' (smoke|paper-desk)"
            )))
        }
    };
    ExperimentConfig::from_json(text)
}
