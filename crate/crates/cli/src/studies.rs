//! The experiment studies behind each subcommand. Every study writes CSV
//! artifacts (17-significant-digit numerics) plus a JSON summary, and records
//! itself in the run manifest.

use gplab_core::domain::{
    sample_covariates, truth_catalog, CovariateSpace, FieldFunction, SamplingScheme, TruthSpec,
};
use gplab_core::equipartition::equipartition_trace;
use gplab_core::gp::GpPathSampler;
use gplab_core::kl::{
    estimate_h_theta, j_rate, kl_rate, per_obs_kl_oracle, Certificate, SetSpec,
};
use gplab_core::model::{simulate_responses, LinkSpec, ObservationModel, Theta};
use gplab_core::posterior::{
    concentration_rate_diagnostic, hellinger_tv, posterior_predictive, posterior_set_probability,
    run_mcmc, true_predictive_at,
};
use gplab_core::quad::{Integrator, Method};
use gplab_core::rng::RngContract;
use gplab_core::stats::{fmt_g17, ls_slope, mean, median};
use gplab_core::{bounds, Error};
use serde_json::json;
use std::path::Path;
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::manifest::{write_atomic, ArtifactRecord, RunManifest};
use crate::RunError;

fn runtime(e: Error) -> RunError {
    RunError::Runtime(e.to_string())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::TensorQuadrature { .. } => "quadrature",
        Method::MonteCarlo { .. } => "monte-carlo",
    }
}

/// Invert a monotone link by bisection: find η with H(η) = target.
fn invert_link(link: &LinkSpec, target: f64) -> f64 {
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if link.eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The constant-field distortion pair used by the kl-rate anchor rows and
/// the equipartition study: a θ at a fixed offset from a constant truth with
/// a known closed-form h.
fn canonical_pair(
    model: &ObservationModel,
    sigma0: f64,
) -> Result<(Theta, TruthSpec, f64), RunError> {
    match model {
        ObservationModel::Binary { link } => {
            // p = 0.25 against p0 = 0.5
            let theta = Theta::field_only(FieldFunction::constant(1, invert_link(link, 0.25)));
            let truth = truth_catalog(&format!("constant({})", invert_link(link, 0.5)))
                .map_err(runtime)?;
            let h = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
            Ok((theta, truth, h))
        }
        ObservationModel::Poisson { link } => {
            // λ = 2 against λ0 = 1
            let theta = Theta::field_only(FieldFunction::constant(1, invert_link(link, 2.0)));
            let truth = truth_catalog(&format!("constant({})", invert_link(link, 1.0)))
                .map_err(runtime)?;
            let h = (2.0 - 1.0) + 1.0 * (1.0f64 / 2.0).ln();
            Ok((theta, truth, h))
        }
        ObservationModel::GaussianError => {
            // η = η0, σ = 2σ0
            let theta = Theta::new(FieldFunction::constant(1, 0.0), Some(2.0 * sigma0))
                .map_err(runtime)?;
            let truth = truth_catalog("constant(0)").map_err(runtime)?.with_sigma0(sigma0);
            let h = 2.0f64.ln() - 0.5 + 0.125;
            Ok((theta, truth, h))
        }
        ObservationModel::LaplaceError => {
            // |η − η0| = σ0, σ = σ0 (scale-free value e⁻¹)
            let theta = Theta::new(FieldFunction::constant(1, sigma0), Some(sigma0))
                .map_err(runtime)?;
            let truth = truth_catalog("constant(0)").map_err(runtime)?.with_sigma0(sigma0);
            Ok((theta, truth, (-1.0f64).exp()))
        }
    }
}

struct StudyOutput {
    artifacts: Vec<ArtifactRecord>,
    note: String,
}

pub fn run_study(study: &str, cfg: &ExperimentConfig, out: &Path) -> Result<(), RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let output = match study {
        "kl-rate" => kl_rate_study(cfg, out)?,
        "equipartition" => equipartition_study(cfg, out)?,
        "sieve-mass" => sieve_mass_study(cfg, out)?,
        "posterior" => posterior_study(cfg, out)?,
        "predictive" => predictive_study(cfg, out)?,
        "bounds" => bounds_study(cfg, out)?,
        other => return Err(RunError::Config(format!("unknown study '{other}'"))),
    };
    let mut manifest = RunManifest::load_or_default(out);
    manifest.record_study(study, cfg, output.artifacts, started.elapsed().as_millis());
    manifest.save(out)?;
    println!("{study}: {}", output.note);
    Ok(())
}

fn integrator(cfg: &ExperimentConfig) -> Integrator {
    Integrator::tensor(CovariateSpace::new(1).unwrap(), cfg.quadrature_nodes)
}

fn kl_rate_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyOutput, RunError> {
    let model = cfg.observation_model()?;
    let truth = cfg.truth_spec()?;
    let integ = integrator(cfg);
    let rng = RngContract::new(cfg.master_seed, "kl-rate");

    let mut csv = String::from("model,theta_id,h,err,method\n");
    let mut push_row = |theta_id: &str, h: f64, err: f64| {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            cfg.model,
            theta_id,
            fmt_g17(h),
            fmt_g17(err),
            method_name(integ.method())
        ));
    };

    // canonical constant-field anchor
    let (theta_a, truth_a, _) = canonical_pair(&model, cfg.sigma0)?;
    let anchor = kl_rate(&model, &theta_a, &truth_a, &integ).map_err(runtime)?;
    push_row("anchor-constant", anchor.value, anchor.err);

    // h at the configured truth itself, when representable
    if truth.representable_in_prior {
        let eta = match &truth.eta0 {
            gplab_core::domain::TruthField::Rule(r) => {
                FieldFunction::from_fn(vec![cfg.grid_nodes], |x| r.eval(x)).map_err(runtime)?
            }
            gplab_core::domain::TruthField::Grid(g) => g.clone(),
        };
        let sigma = model.requires_scale().then_some(cfg.sigma0);
        let theta0 = Theta::new(eta, sigma).map_err(runtime)?;
        let at_truth = kl_rate(&model, &theta0, &truth, &integ).map_err(runtime)?;
        push_row("truth-self", at_truth.value, at_truth.err);
    }

    // random prior draws, cross-checked against the per-observation oracle
    let prior = cfg.prior_spec_for(&model);
    let sampler =
        GpPathSampler::new(&prior.kernel, vec![cfg.grid_nodes]).map_err(runtime)?;
    let mut r = rng.child("draws").rng();
    let mut max_delta = 0.0f64;
    let mut max_allowed = 0.0f64;
    for k in 0..cfg.kl_random_thetas {
        let eta = sampler.draw(&mut r);
        let sigma = prior.sigma_prior.map(|sp| sp.sample(&mut r));
        let theta = Theta::new(eta, sigma).map_err(runtime)?;
        let est = kl_rate(&model, &theta, &truth, &integ).map_err(runtime)?;
        let mut oracle_failure = None;
        let (oracle, oracle_err) = integ
            .expect(|x| match per_obs_kl_oracle(&model, &theta, &truth, x) {
                Ok(v) => v,
                Err(e) => {
                    oracle_failure.get_or_insert(e);
                    f64::NAN
                }
            })
            .map_err(runtime)?;
        if let Some(e) = oracle_failure {
            return Err(runtime(e));
        }
        let allowed = 3.0 * (est.err + oracle_err + 1e-9);
        max_delta = max_delta.max((est.value - oracle).abs());
        max_allowed = max_allowed.max(allowed);
        push_row(&format!("prior-draw-{k}"), est.value, est.err);
    }

    let a1 = write_atomic(out, "kl_rate.csv", &csv)?;
    let summary = json!({
        "model": cfg.model,
        "truth": cfg.truth,
        "anchor_h": anchor.value,
        "oracle_check": {
            "thetas": cfg.kl_random_thetas,
            "max_abs_delta": max_delta,
            "max_allowance": max_allowed,
            "pass": max_delta <= max_allowed || cfg.kl_random_thetas == 0,
        },
    });
    let a2 = write_atomic(
        out,
        "kl_rate_summary.json",
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    Ok(StudyOutput {
        artifacts: vec![a1, a2],
        note: format!(
            "anchor h = {:.6}, oracle max |Δ| = {:.2e}",
            anchor.value, max_delta
        ),
    })
}

fn equipartition_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyOutput, RunError> {
    let model = cfg.observation_model()?;
    let integ = integrator(cfg);
    let (theta, truth, _) = canonical_pair(&model, cfg.sigma0)?;
    let rng = RngContract::new(cfg.master_seed, "equipartition");
    let trace = equipartition_trace(
        &model,
        &theta,
        &truth,
        &cfg.n_schedule,
        cfg.replicates,
        &integ,
        &rng,
    )
    .map_err(runtime)?;

    let mut csv = String::from("model,n,replicate,deviation\n");
    for (i, &n) in trace.n_values.iter().enumerate() {
        for (rep, &d) in trace.deviations[i].iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", cfg.model, n, rep, fmt_g17(d)));
        }
    }
    let a1 = write_atomic(out, "equipartition_trace.csv", &csv)?;

    let medians: Vec<f64> = (0..trace.n_values.len())
        .map(|i| trace.median_abs_deviation(i))
        .collect();
    let slope = if trace.n_values.len() >= 2 {
        Some(trace.fitted_slope())
    } else {
        None
    };
    let summary = json!({
        "model": cfg.model,
        "h": trace.h,
        "n": trace.n_values,
        "median_abs_deviation": medians,
        "log_log_slope": slope,
        "replicates": cfg.replicates,
    });
    let a2 = write_atomic(
        out,
        "equipartition_summary.json",
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    Ok(StudyOutput {
        artifacts: vec![a1, a2],
        note: format!(
            "h = {:.6}, median |dev| at n={} is {:.4}",
            trace.h,
            trace.n_values.last().unwrap(),
            medians.last().unwrap()
        ),
    })
}

fn sieve_mass_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyOutput, RunError> {
    let model = cfg.observation_model()?;
    let prior = cfg.prior_spec_for(&model);
    let sieve = cfg.sieve_spec()?;
    let rng = RngContract::new(cfg.master_seed, "sieve-mass");

    let mut csv = String::from("n,prob,ci_lo,ci_hi\n");
    let mut rows = Vec::new();
    for &n in &cfg.n_schedule {
        let (p, (lo, hi)) = gplab_core::gp::estimate_sieve_complement_mass(
            &prior,
            &sieve,
            n,
            cfg.sieve_draws,
            vec![cfg.grid_nodes],
            &rng.child(format!("n-{n}")),
        )
        .map_err(runtime)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            n,
            fmt_g17(p),
            fmt_g17(lo),
            fmt_g17(hi)
        ));
        rows.push((n, p, hi));
    }
    let a1 = write_atomic(out, "sieve_mass.csv", &csv)?;

    // decay slope over the informative range
    let informative: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, p, _)| *p > 1e-3 && *p < 0.5)
        .map(|(n, p, _)| (*n as f64, p.ln()))
        .collect();
    let slope = if informative.len() >= 2 {
        let xs: Vec<f64> = informative.iter().map(|r| r.0).collect();
        let ys: Vec<f64> = informative.iter().map(|r| r.1).collect();
        Some(ls_slope(&xs, &ys))
    } else {
        None
    };
    let first_tiny = rows.iter().find(|(_, _, hi)| *hi < 1e-3).map(|r| r.0);
    let summary = json!({
        "beta": sieve.beta,
        "exponent_form": cfg.sieve.exponent_form,
        "draws": cfg.sieve_draws,
        "informative_range_slope": slope,
        "slope_at_most_minus_beta": slope.map(|s| s <= -sieve.beta),
        "first_n_with_upper_ci_below_1e-3": first_tiny,
    });
    let a2 = write_atomic(
        out,
        "sieve_mass_summary.json",
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    Ok(StudyOutput {
        artifacts: vec![a1, a2],
        note: format!(
            "{} n values, informative slope {:?}",
            rows.len(),
            slope
        ),
    })
}

/// Shared by the posterior and predictive studies: simulate a dataset and run
/// the chain for one (n, replicate) cell.
fn chain_for(
    cfg: &ExperimentConfig,
    model: &ObservationModel,
    truth: &TruthSpec,
    integ: &Integrator,
    stream: &RngContract,
    n: usize,
) -> Result<gplab_core::posterior::PosteriorSamples, RunError> {
    let xs = sample_covariates(n, cfg.sampling_scheme()?, &integ.space(), &stream.child("x"))
        .map_err(runtime)?;
    let data = simulate_responses(model, truth, &xs, &stream.child("y")).map_err(runtime)?;
    run_mcmc(
        model,
        &data,
        &cfg.prior_spec_for(model),
        &cfg.mcmc_config(),
        integ,
        &stream.child("chain"),
    )
    .map_err(runtime)
}

fn persist_draws(
    out: &Path,
    n: usize,
    rep: usize,
    samples: &gplab_core::posterior::PosteriorSamples,
) -> Result<ArtifactRecord, RunError> {
    let mut csv = String::new();
    // header: latent-site coordinates, then sigma
    let coords: Vec<String> = samples
        .sites
        .iter()
        .map(|p| format!("eta@{}", p.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(":")))
        .collect();
    csv.push_str(&coords.join(","));
    csv.push_str(",sigma\n");
    for d in &samples.draws {
        let vals: Vec<String> = d.eta.iter().map(|v| fmt_g17(*v)).collect();
        csv.push_str(&vals.join(","));
        match d.sigma {
            Some(s) => csv.push_str(&format!(",{}\n", fmt_g17(s))),
            None => csv.push_str(",\n"),
        }
    }
    write_atomic(out, &format!("draws_n{n}_rep{rep}.csv"), &csv)
}

fn posterior_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyOutput, RunError> {
    let model = cfg.observation_model()?;
    let truth = cfg.truth_spec()?;
    let integ = integrator(cfg);
    let prior = cfg.prior_spec_for(&model);
    let rng = RngContract::new(cfg.master_seed, "posterior");

    let (h_theta, certificate) = estimate_h_theta(
        &model,
        &prior,
        &truth,
        &integ,
        cfg.h_budget,
        &rng.child("h-theta"),
    )
    .map_err(runtime)?;
    let set = SetSpec::HAbove {
        c: cfg.set_threshold,
    };
    let j_value = j_rate(
        &set,
        h_theta,
        &model,
        &prior,
        &truth,
        &integ,
        cfg.h_budget,
        &rng.child("j-rate"),
    )
    .map_err(runtime)?;

    let mut csv = String::from(
        "model,n,replicate,epsilon_n,prob_n_eps,mcse_n_eps,prob_a,mcse_a,mean_h,draws\n",
    );
    let mut artifacts = Vec::new();
    let mut mean_prob_a = Vec::new();
    let mut per_n = Vec::new();
    for &n in &cfg.n_schedule {
        let eps = cfg.epsilon.at(n);
        let n_eps = SetSpec::NEpsilon { epsilon: eps };
        let mut probs_eps = Vec::new();
        let mut probs_a = Vec::new();
        let mut mean_hs = Vec::new();
        for rep in 0..cfg.replicates {
            let stream = rng.child(format!("n-{n}/rep-{rep}"));
            let samples = chain_for(cfg, &model, &truth, &integ, &stream, n)?;
            let (p_eps, m_eps) =
                posterior_set_probability(&samples, &n_eps, h_theta, &model, &truth, &integ)
                    .map_err(runtime)?;
            let (p_a, m_a) =
                posterior_set_probability(&samples, &set, h_theta, &model, &truth, &integ)
                    .map_err(runtime)?;
            let hs = samples.h_per_draw(&model, &truth, &integ).map_err(runtime)?;
            let mh = mean(&hs);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                cfg.model,
                n,
                rep,
                fmt_g17(eps),
                fmt_g17(p_eps),
                fmt_g17(m_eps),
                fmt_g17(p_a),
                fmt_g17(m_a),
                fmt_g17(mh),
                samples.len()
            ));
            probs_eps.push(p_eps);
            probs_a.push(p_a);
            mean_hs.push(mh);
            if cfg.persist_draws {
                artifacts.push(persist_draws(out, n, rep, &samples)?);
            }
        }
        let n_draws = ((cfg.mcmc.iterations - cfg.mcmc.burn_in) + cfg.mcmc.thin - 1)
            / cfg.mcmc.thin;
        let pa = mean(&probs_a);
        mean_prob_a.push(pa);
        per_n.push(json!({
            "n": n,
            "epsilon_n": eps,
            "mean_prob_n_eps": mean(&probs_eps),
            "mean_prob_a": pa,
            // rare-event display honesty: never print a bare zero
            "prob_a_display": if pa == 0.0 { format!("< {:.3e}", 1.0 / n_draws as f64) } else { format!("{pa:.6}") },
            "mean_posterior_h": mean(&mean_hs),
        }));
    }

    let verdict = concentration_rate_diagnostic(&mean_prob_a, &cfg.n_schedule, j_value);
    let a1 = write_atomic(out, "posterior.csv", &csv)?;
    let summary = json!({
        "model": cfg.model,
        "truth": cfg.truth,
        "h_theta": h_theta,
        "h_theta_certificate": match certificate {
            Certificate::AnalyticZero => "analytic-zero",
            Certificate::EmpiricalMin => "empirical-min",
        },
        "set": set.describe(),
        "j_value": j_value,
        "rate_verdict": verdict,
        "per_n": per_n,
        "note": "N_eps thresholds use the certified h(Θ); under an empirical-min certificate ε is relative to that upper bound",
    });
    let a2 = write_atomic(
        out,
        "posterior_summary.json",
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    artifacts.extend([a1, a2]);
    Ok(StudyOutput {
        artifacts,
        note: format!("h(Θ) = {h_theta:.4}, J(A) = {j_value:.4}, verdict {verdict:?}"),
    })
}

fn predictive_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyOutput, RunError> {
    let model = cfg.observation_model()?;
    let truth = cfg.truth_spec()?;
    let integ = integrator(cfg);
    let rng = RngContract::new(cfg.master_seed, "predictive");

    let mut csv = String::from("model,n,replicate,x,rho_h2,rho_tv\n");
    let mut crosscheck_ok = true;
    let mut per_n = Vec::new();
    for &n in &cfg.n_schedule {
        let mut h2s = Vec::new();
        let mut tvs = Vec::new();
        for rep in 0..cfg.replicates {
            let stream = rng.child(format!("n-{n}/rep-{rep}"));
            let samples = chain_for(cfg, &model, &truth, &integ, &stream, n)?;
            for x in &cfg.predictive_x {
                let pred = posterior_predictive(&samples, &model, &[*x]).map_err(runtime)?;
                let best = true_predictive_at(&model, &truth, &[*x], &pred).map_err(runtime)?;
                let (h2, tv) = hellinger_tv(&pred, &best).map_err(runtime)?;
                crosscheck_ok &= h2 <= tv + 1e-10 && tv <= (2.0 * h2).sqrt() + 1e-10;
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    cfg.model,
                    n,
                    rep,
                    fmt_g17(*x),
                    fmt_g17(h2),
                    fmt_g17(tv)
                ));
                h2s.push(h2);
                tvs.push(tv);
            }
        }
        per_n.push(json!({
            "n": n,
            "mean_rho_h2": mean(&h2s),
            "mean_rho_tv": mean(&tvs),
            "median_rho_h2": median(&h2s),
        }));
    }
    let a1 = write_atomic(out, "predictive.csv", &csv)?;
    let summary = json!({
        "model": cfg.model,
        "truth": cfg.truth,
        "x": cfg.predictive_x,
        "per_n": per_n,
        "hellinger_tv_crosscheck_ok": crosscheck_ok,
        "note": "distances evaluated at fixed held-out covariates (the covariate-conditional analog of one-step-ahead prediction)",
    });
    let a2 = write_atomic(
        out,
        "predictive_summary.json",
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    Ok(StudyOutput {
        artifacts: vec![a1, a2],
        note: format!("crosscheck_ok = {crosscheck_ok}"),
    })
}

fn bounds_study(cfg: &ExperimentConfig, out: &Path) -> Result<StudyOutput, RunError> {
    let b = &cfg.bounds;
    let rng = RngContract::new(cfg.master_seed, "bounds");
    let reports = vec![
        bounds::check_hoeffding(
            b.hoeffding_range,
            b.hoeffding_n,
            &bounds::log_spaced(0.02, 0.12, b.t_points),
            b.samples,
            &rng.child("hoeffding"),
        )
        .map_err(runtime)?,
        bounds::check_poisson_subexponential(
            b.lambda,
            b.lambda0,
            &bounds::log_spaced(0.05, 1.4, b.t_points),
            b.samples,
            &rng.child("poisson-mgf"),
        )
        .map_err(runtime)?,
        bounds::check_hanson_wright(
            b.hanson_wright_n,
            &bounds::log_spaced(0.2, 1.0, b.t_points),
            b.samples,
            &rng.child("hanson-wright"),
        )
        .map_err(runtime)?,
        bounds::check_bernstein_laplace(
            cfg.sigma0,
            b.bernstein_n,
            &bounds::log_spaced(0.05, 0.3, b.t_points),
            b.samples,
            &rng.child("bernstein"),
        )
        .map_err(runtime)?,
    ];

    let mut csv = String::from("kind,t,empirical,ci_hi,bound,verdict\n");
    for rep in &reports {
        for row in &rep.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rep.kind,
                fmt_g17(row.t),
                fmt_g17(row.empirical),
                fmt_g17(row.ci_hi),
                fmt_g17(row.bound),
                if row.pass { "PASS" } else { "FAIL" }
            ));
        }
    }
    let a1 = write_atomic(out, "bounds.csv", &csv)?;
    let all_validation_pass = reports.iter().all(|r| r.validation_pass());
    let summary = json!({
        "reports": reports,
        "all_validation_pass": all_validation_pass,
    });
    let a2 = write_atomic(
        out,
        "bounds_report.json",
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    Ok(StudyOutput {
        artifacts: vec![a1, a2],
        note: format!("all_validation_pass = {all_validation_pass}"),
    })
}
