//! Finite-n traces of the equipartition deviation n⁻¹ log Rₙ(θ) + h(θ),
//! pointwise in θ and uniformly over finite subsets of a sieve.

use crate::domain::{sample_covariates, SamplingScheme, TruthSpec};
use crate::kl::kl_rate;
use crate::model::{log_likelihood_ratio, simulate_responses, ObservationModel, Theta};
use crate::quad::Integrator;
use crate::rng::RngContract;
use crate::stats::{ls_slope, median};
use crate::Result;

/// Deviations n⁻¹ log Rₙ(θ) + h(θ), one row per (n, replicate).
#[derive(Debug, Clone)]
pub struct EquipartitionTrace {
    pub n_values: Vec<usize>,
    /// deviations[i][r] is the deviation at n_values[i], replicate r.
    pub deviations: Vec<Vec<f64>>,
    /// h(θ) used for the deviations.
    pub h: f64,
}

impl EquipartitionTrace {
    pub fn median_abs_deviation(&self, i: usize) -> f64 {
        let abs: Vec<f64> = self.deviations[i].iter().map(|d| d.abs()).collect();
        median(&abs)
    }

    /// Slope of log median |deviation| against log n.
    pub fn fitted_slope(&self) -> f64 {
        let xs: Vec<f64> = self.n_values.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = (0..self.n_values.len())
            .map(|i| self.median_abs_deviation(i).max(1e-300).ln())
            .collect();
        ls_slope(&xs, &ys)
    }
}

/// For each n and replicate: fresh covariates and responses under the truth,
/// then n⁻¹ log Rₙ(θ) + h(θ).
pub fn equipartition_trace(
    model: &ObservationModel,
    theta: &Theta,
    truth: &TruthSpec,
    n_values: &[usize],
    replicates: usize,
    integrator: &Integrator,
    rng: &RngContract,
) -> Result<EquipartitionTrace> {
    assert!(
        n_values.windows(2).all(|w| w[0] < w[1]),
        "n_values must be increasing"
    );
    assert!(replicates >= 1);
    let h = kl_rate(model, theta, truth, integrator)?.value;
    let space = integrator.space();
    let mut deviations = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut row = Vec::with_capacity(replicates);
        for rep in 0..replicates {
            let stream = rng.child(format!("n-{n}/rep-{rep}"));
            let xs = sample_covariates(n, SamplingScheme::IidFromQ, &space, &stream.child("x"))?;
            let data = simulate_responses(model, truth, &xs, &stream.child("y"))?;
            let lr = log_likelihood_ratio(model, theta, truth, &data)?;
            row.push(lr / n as f64 + h);
        }
        deviations.push(row);
    }
    Ok(EquipartitionTrace {
        n_values: n_values.to_vec(),
        deviations,
        h,
    })
}

/// Sup over a finite θ-set of |n⁻¹ log Rₙ(θ) + h(θ)| on a shared dataset,
/// one value per replicate.
pub fn uniform_convergence_check(
    model: &ObservationModel,
    thetas: &[Theta],
    truth: &TruthSpec,
    n: usize,
    replicates: usize,
    integrator: &Integrator,
    rng: &RngContract,
) -> Result<Vec<f64>> {
    let hs: Vec<f64> = thetas
        .iter()
        .map(|t| kl_rate(model, t, truth, integrator).map(|e| e.value))
        .collect::<Result<_>>()?;
    let space = integrator.space();
    let mut sups = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let stream = rng.child(format!("rep-{rep}"));
        let xs = sample_covariates(n, SamplingScheme::IidFromQ, &space, &stream.child("x"))?;
        let data = simulate_responses(model, truth, &xs, &stream.child("y"))?;
        let mut sup = 0.0f64;
        for (theta, h) in thetas.iter().zip(&hs) {
            let dev = log_likelihood_ratio(model, theta, truth, &data)? / n as f64 + h;
            sup = sup.max(dev.abs());
        }
        sups.push(sup);
    }
    Ok(sups)
}
