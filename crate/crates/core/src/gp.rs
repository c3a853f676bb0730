//! Squared-exponential Gaussian-process prior: kernel matrices, Cholesky
//! path sampling with jitter escalation, sieve sets and empirical prior-mass
//! estimation for sieve complements.

use crate::domain::FieldFunction;
use crate::model::{ObservationModel, Theta};
use crate::rng::RngContract;
use crate::stats::wilson_interval;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Squared-exponential kernel k(x,y) = τ² exp(−‖x−y‖²/(2ℓ²)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub lengthscale: f64,
    pub amplitude: f64,
    pub jitter: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            lengthscale: 0.2,
            amplitude: 1.0,
            jitter: 1e-9,
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0) || !(self.amplitude > 0.0) {
            return Err(Error::InvalidArgument(
                "kernel lengthscale and amplitude must be positive".into(),
            ));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::InvalidArgument("jitter must be non-negative".into()));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.amplitude * self.amplitude
            * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// Kernel Gram matrix with jitter on the diagonal. Duplicate points are
/// allowed; the jitter keeps the factorization viable.
pub fn kernel_matrix(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    let m = points.len();
    let mut k = DMatrix::from_fn(m, m, |i, j| kernel.eval(&points[i], &points[j]));
    for i in 0..m {
        k[(i, i)] += kernel.jitter;
    }
    Ok(k)
}

/// Lower Cholesky factor of the kernel matrix, escalating the jitter ×10 up
/// to 3 times before giving up with a condition report.
pub fn cholesky_lower(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let base = kernel_matrix(kernel, points)?;
    let mut jitter = kernel.jitter.max(f64::MIN_POSITIVE);
    for attempt in 0..=3 {
        let mut k = base.clone();
        if attempt > 0 {
            for i in 0..k.nrows() {
                k[(i, i)] += jitter - kernel.jitter;
            }
        }
        if let Some(chol) = k.cholesky() {
            return Ok(chol.unpack());
        }
        jitter *= 10.0;
    }
    let max_diag = (0..base.nrows()).fold(0.0f64, |a, i| a.max(base[(i, i)]));
    Err(Error::CholeskyFailure {
        jitter,
        condition: max_diag / jitter,
    })
}

/// Lognormal prior for the noise scale σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPrior {
    pub log_mean: f64,
    pub log_sd: f64,
}

impl Default for SigmaPrior {
    fn default() -> Self {
        Self {
            log_mean: 0.0,
            log_sd: 1.0,
        }
    }
}

impl SigmaPrior {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (self.log_mean + self.log_sd * z).exp()
    }

    /// log density of log σ (the natural parametrization for random walks).
    pub fn log_density_of_log_sigma(&self, u: f64) -> f64 {
        let z = (u - self.log_mean) / self.log_sd;
        -0.5 * z * z - self.log_sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Process prior over θ: SE kernel for η plus an optional lognormal σ prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kernel: KernelSpec,
    pub sigma_prior: Option<SigmaPrior>,
}

impl PriorSpec {
    /// Kernel defaults, with a σ prior exactly when the model needs a scale.
    pub fn default_for(model: &ObservationModel) -> Self {
        Self {
            kernel: KernelSpec::default(),
            sigma_prior: model.requires_scale().then(SigmaPrior::default),
        }
    }

    pub fn check_for(&self, model: &ObservationModel) -> Result<()> {
        if model.requires_scale() != self.sigma_prior.is_some() {
            return Err(Error::InvalidArgument(format!(
                "sigma prior must be present iff the model has a scale (model {})",
                model.name()
            )));
        }
        Ok(())
    }
}

/// Reusable sampler of GP paths on a fixed tensor grid.
pub struct GpPathSampler {
    nodes_per_axis: Vec<usize>,
    chol: DMatrix<f64>,
}

impl GpPathSampler {
    pub fn new(kernel: &KernelSpec, nodes_per_axis: Vec<usize>) -> Result<Self> {
        let probe = FieldFunction::from_fn(nodes_per_axis.clone(), |_| 0.0)?;
        let chol = cholesky_lower(kernel, &probe.node_coordinates())?;
        Ok(Self {
            nodes_per_axis,
            chol,
        })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> FieldFunction {
        let m = self.chol.nrows();
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let vals = self.chol.clone() * z;
        FieldFunction::new(self.nodes_per_axis.clone(), vals.iter().copied().collect()).unwrap()
    }
}

/// Default path grid: 401 nodes for d=1, 51 per axis for d=2 and beyond.
pub fn default_path_grid(dim: usize) -> Vec<usize> {
    if dim == 1 {
        vec![401]
    } else {
        vec![51; dim]
    }
}

/// One GP path on the given grid, as a field function (mean zero, covariance
/// from the prior kernel).
pub fn sample_gp_path(
    prior: &PriorSpec,
    nodes_per_axis: Vec<usize>,
    rng: &RngContract,
) -> Result<FieldFunction> {
    let sampler = GpPathSampler::new(&prior.kernel, nodes_per_axis)?;
    Ok(sampler.draw(&mut rng.rng()))
}

/// Sup-norm and per-axis finite-difference derivative sup-norms of a field.
pub fn sup_and_grad_norms(f: &FieldFunction) -> (f64, Vec<f64>) {
    (f.sup_norm(), f.grad_sup_norms())
}

/// Growth law of the sieve thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentForm {
    /// exp((βn)^{1/4}) — the binary/Poisson sieve.
    QuarticRoot,
    /// exp(√(βn)) — the Gaussian/Laplace sieve.
    SquareRoot,
}

/// Sieve family G_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveSpec {
    pub beta: f64,
    pub exponent_form: ExponentForm,
    /// Also require σ ∈ [1/threshold(n), threshold(n)].
    pub includes_sigma_band: bool,
}

impl SieveSpec {
    pub fn new(beta: f64, exponent_form: ExponentForm, includes_sigma_band: bool) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument("beta must be positive".into()));
        }
        Ok(Self {
            beta,
            exponent_form,
            includes_sigma_band,
        })
    }

    pub fn threshold(&self, n: usize) -> f64 {
        let bn = self.beta * n as f64;
        match self.exponent_form {
            ExponentForm::QuarticRoot => bn.powf(0.25).exp(),
            ExponentForm::SquareRoot => bn.sqrt().exp(),
        }
    }
}

/// Is θ in G_n?
pub fn sieve_membership(theta: &Theta, n: usize, sieve: &SieveSpec) -> bool {
    let thr = sieve.threshold(n);
    let (sup, grads) = sup_and_grad_norms(&theta.eta);
    if sup > thr || grads.iter().any(|&g| g > thr) {
        return false;
    }
    if sieve.includes_sigma_band {
        if let Some(s) = theta.sigma {
            if !(1.0 / thr..=thr).contains(&s) {
                return false;
            }
        }
    }
    true
}

/// Monte-Carlo estimate of π(G_n^c) with a 95% Wilson interval.
pub fn estimate_sieve_complement_mass(
    prior: &PriorSpec,
    sieve: &SieveSpec,
    n: usize,
    draws: usize,
    nodes_per_axis: Vec<usize>,
    rng: &RngContract,
) -> Result<(f64, (f64, f64))> {
    if draws < 1000 {
        return Err(Error::InvalidArgument(
            "sieve mass estimation needs at least 1e3 draws".into(),
        ));
    }
    let sampler = GpPathSampler::new(&prior.kernel, nodes_per_axis)?;
    let mut r = rng.rng();
    let mut outside = 0usize;
    for _ in 0..draws {
        let eta = sampler.draw(&mut r);
        let sigma = if sieve.includes_sigma_band {
            prior.sigma_prior.map(|sp| sp.sample(&mut r))
        } else {
            None
        };
        let theta = Theta { eta, sigma };
        if !sieve_membership(&theta, n, sieve) {
            outside += 1;
        }
    }
    let p = outside as f64 / draws as f64;
    Ok((p, wilson_interval(outside, draws)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_single_point() {
        let k = KernelSpec::default();
        let m = kernel_matrix(&k, &[vec![0.3]]).unwrap();
        assert_relative_eq!(m[(0, 0)], 1.0 + 1e-9, epsilon = 1e-15);
    }

    #[test]
    fn kernel_identical_points_zero_jitter() {
        let k = KernelSpec {
            jitter: 0.0,
            ..KernelSpec::default()
        };
        let m = kernel_matrix(&k, &[vec![0.3], vec![0.3]]).unwrap();
        for v in [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn kernel_unit_distance_closed_form() {
        let k = KernelSpec {
            lengthscale: 1.0,
            amplitude: 1.0,
            jitter: 0.0,
        };
        let m = kernel_matrix(&k, &[vec![0.0], vec![1.0]]).unwrap();
        assert_relative_eq!(m[(0, 1)], 0.6065306597126334, epsilon = 1e-15);
    }

    #[test]
    fn invalid_kernel_rejected() {
        let bad = KernelSpec {
            lengthscale: -1.0,
            ..KernelSpec::default()
        };
        assert!(kernel_matrix(&bad, &[vec![0.0]]).is_err());
    }

    #[test]
    fn cholesky_succeeds_on_random_point_sets() {
        let k = KernelSpec::default();
        let mut rng = RngContract::new(10, "psd").rng();
        for _ in 0..100 {
            let m = rng.gen_range(2..40);
            let pts: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.gen::<f64>()]).collect();
            assert!(cholesky_lower(&k, &pts).is_ok());
        }
    }

    #[test]
    fn single_site_draw_variance_matches_kernel() {
        // scalar draws ~ N(0, τ² + jitter): sample variance within 2% over 1e5
        let k = KernelSpec::default();
        let chol = cholesky_lower(&k, &[vec![0.5]]).unwrap();
        let mut rng = RngContract::new(11, "var").rng();
        let mut sum = 0.0;
        let mut sq = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = chol[(0, 0)] * z;
            sum += v;
            sq += v * v;
        }
        let var = sq / n as f64 - (sum / n as f64).powi(2);
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn distant_sites_uncorrelated() {
        let k = KernelSpec::default(); // ℓ = 0.2, distance 1 ≫ ℓ
        let chol = cholesky_lower(&k, &[vec![0.0], vec![1.0]]).unwrap();
        let mut rng = RngContract::new(12, "corr").rng();
        let n = 100_000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = DVector::from_fn(2, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            });
            let v = &chol * z;
            sa += v[0];
            sb += v[1];
            sab += v[0] * v[1];
            saa += v[0] * v[0];
            sbb += v[1] * v[1];
        }
        let nf = n as f64;
        let cov = sab / nf - sa / nf * (sb / nf);
        let corr = cov / ((saa / nf - (sa / nf).powi(2)) * (sbb / nf - (sb / nf).powi(2))).sqrt();
        assert!(corr.abs() < 0.02, "corr = {corr}");
    }

    #[test]
    fn path_mean_within_three_se_at_nodes() {
        let prior = PriorSpec {
            kernel: KernelSpec::default(),
            sigma_prior: None,
        };
        let sampler = GpPathSampler::new(&prior.kernel, vec![21]).unwrap();
        let mut rng = RngContract::new(13, "mean").rng();
        let draws = 10_000;
        let mut sums = vec![0.0; 21];
        for _ in 0..draws {
            let f = sampler.draw(&mut rng);
            for (s, v) in sums.iter_mut().zip(f.values()) {
                *s += v;
            }
        }
        let se = (1.0f64 / draws as f64).sqrt();
        for s in sums {
            let mean = s / draws as f64;
            assert!(mean.abs() < 3.0 * se, "node mean {mean}");
        }
    }

    #[test]
    fn path_eval_at_node_returns_stored_value() {
        let prior = PriorSpec {
            kernel: KernelSpec::default(),
            sigma_prior: None,
        };
        let f = sample_gp_path(&prior, vec![33], &RngContract::new(14, "path")).unwrap();
        for (c, &v) in f.node_coordinates().iter().zip(f.values()) {
            assert_eq!(f.eval(c).unwrap(), v);
        }
    }

    #[test]
    fn norms_of_constant_and_linear_fields() {
        let c = FieldFunction::constant(1, -3.0);
        let (sup, grads) = sup_and_grad_norms(&c);
        assert_eq!(sup, 3.0);
        assert!(grads.iter().all(|&g| g == 0.0));

        let lin = FieldFunction::from_fn(vec![51], |x| 2.0 * x[0]).unwrap();
        let (sup, grads) = sup_and_grad_norms(&lin);
        assert_relative_eq!(sup, 2.0, epsilon = 1e-12);
        assert_relative_eq!(grads[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn norms_of_sine_field() {
        let f = FieldFunction::from_fn(vec![401], |x| (2.0 * std::f64::consts::PI * x[0]).sin())
            .unwrap();
        let (sup, grads) = sup_and_grad_norms(&f);
        assert!((sup - 1.0).abs() < 1e-3);
        assert!((grads[0] - 2.0 * std::f64::consts::PI).abs() < 1e-2);
    }

    #[test]
    fn sieve_membership_examples() {
        let sieve = SieveSpec::new(1.0, ExponentForm::QuarticRoot, true).unwrap();
        let zero = Theta {
            eta: FieldFunction::constant(1, 0.0),
            sigma: Some(1.0),
        };
        for n in 1..=20 {
            assert!(sieve_membership(&zero, n, &sieve));
        }
        // threshold(1) = e ≈ 2.718 < 3
        let three = Theta {
            eta: FieldFunction::constant(1, 3.0),
            sigma: Some(1.0),
        };
        assert!(!sieve_membership(&three, 1, &sieve));
        assert_relative_eq!(sieve.threshold(1), std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn sieve_membership_monotone_in_n() {
        let sieve = SieveSpec::new(1.0, ExponentForm::QuarticRoot, false).unwrap();
        let prior = PriorSpec {
            kernel: KernelSpec::default(),
            sigma_prior: None,
        };
        let sampler = GpPathSampler::new(&prior.kernel, vec![101]).unwrap();
        let mut rng = RngContract::new(15, "nest").rng();
        for _ in 0..100 {
            let theta = Theta::field_only(sampler.draw(&mut rng));
            let mut member_since = None;
            for n in 1..=40 {
                let m = sieve_membership(&theta, n, &sieve);
                if let Some(k) = member_since {
                    assert!(m, "membership lost at n={n} after joining at n={k}");
                } else if m {
                    member_since = Some(n);
                }
            }
        }
    }

    #[test]
    fn far_threshold_gives_zero_complement_mass() {
        // threshold ≥ 10·(τ + τ/ℓ) = 60 needs n ≥ 281 under the quartic form
        let prior = PriorSpec {
            kernel: KernelSpec::default(),
            sigma_prior: None,
        };
        let sieve = SieveSpec::new(1.0, ExponentForm::QuarticRoot, false).unwrap();
        let (p, (_, hi)) = estimate_sieve_complement_mass(
            &prior,
            &sieve,
            300,
            10_000,
            vec![101],
            &RngContract::new(16, "mass"),
        )
        .unwrap();
        assert_eq!(p, 0.0);
        assert!(hi < 1e-3, "upper CI {hi}");
    }
}
