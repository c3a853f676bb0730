//! The four observation models: truncated links, log-densities, response
//! simulation and the log likelihood ratio log Rₙ(θ).
//!
//! Links are truncated so that binary success probabilities stay in
//! [κ_B, 1−κ_B] and Poisson intensities stay ≥ κ_P; this keeps every
//! likelihood ratio finite regardless of how far a sampled field strays.

use crate::domain::{CovariateSample, FieldFunction, TruthSpec};
use crate::rng::RngContract;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Base function G of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkBase {
    LogisticCdf,
    NormalCdf,
    Softplus,
    Exp,
}

impl LinkBase {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            LinkBase::LogisticCdf => {
                if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    let e = u.exp();
                    e / (1.0 + e)
                }
            }
            LinkBase::NormalCdf => 0.5 * erfc(-u / std::f64::consts::SQRT_2),
            LinkBase::Softplus => u.max(0.0) + (-u.abs()).exp().ln_1p(),
            LinkBase::Exp => u.exp(),
        }
    }

    fn is_cdf(&self) -> bool {
        matches!(self, LinkBase::LogisticCdf | LinkBase::NormalCdf)
    }
}

/// A truncated link H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub base: LinkBase,
    /// Binary truncation level κ_B ∈ (0, ½); unused for Poisson links.
    pub kappa_b: f64,
    /// Poisson floor κ_P > 0; unused for binary links.
    pub kappa_p: f64,
    binary: bool,
}

impl LinkSpec {
    pub fn binary(base: LinkBase, kappa_b: f64) -> Result<Self> {
        if !base.is_cdf() {
            return Err(Error::InvalidArgument(
                "binary link base must be a cdf (logistic-cdf or normal-cdf)".into(),
            ));
        }
        if !(0.0 < kappa_b && kappa_b < 0.5) {
            return Err(Error::InvalidArgument("kappa_B must lie in (0, 1/2)".into()));
        }
        Ok(Self {
            base,
            kappa_b,
            kappa_p: f64::NAN,
            binary: true,
        })
    }

    /// Degenerate binary link with the truncation disabled. Test hook only:
    /// likelihood ratios may be infinite under this link.
    pub fn binary_unclamped(base: LinkBase) -> Self {
        Self {
            base,
            kappa_b: 0.0,
            kappa_p: f64::NAN,
            binary: true,
        }
    }

    pub fn poisson(base: LinkBase, kappa_p: f64) -> Result<Self> {
        if base.is_cdf() {
            return Err(Error::InvalidArgument(
                "poisson link base must be non-negative (softplus or exp)".into(),
            ));
        }
        if kappa_p <= 0.0 {
            return Err(Error::InvalidArgument("kappa_P must be positive".into()));
        }
        Ok(Self {
            base,
            kappa_b: f64::NAN,
            kappa_p,
            binary: false,
        })
    }

    pub fn default_binary() -> Self {
        Self::binary(LinkBase::LogisticCdf, 0.05).unwrap()
    }

    pub fn default_poisson() -> Self {
        Self::poisson(LinkBase::Softplus, 0.1).unwrap()
    }

    /// H(u): the truncated link.
    pub fn eval(&self, u: f64) -> f64 {
        let g = self.base.eval(u);
        if self.binary {
            g.clamp(self.kappa_b, 1.0 - self.kappa_b)
        } else {
            g.max(self.kappa_p)
        }
    }
}

/// H(u) under the given link.
pub fn link_h(link: &LinkSpec, u: f64) -> f64 {
    link.eval(u)
}

/// Tagged choice of observation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ObservationModel {
    Binary { link: LinkSpec },
    Poisson { link: LinkSpec },
    GaussianError,
    LaplaceError,
}

impl ObservationModel {
    pub fn default_binary() -> Self {
        ObservationModel::Binary {
            link: LinkSpec::default_binary(),
        }
    }

    pub fn default_poisson() -> Self {
        ObservationModel::Poisson {
            link: LinkSpec::default_poisson(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObservationModel::Binary { .. } => "binary",
            ObservationModel::Poisson { .. } => "poisson",
            ObservationModel::GaussianError => "gaussian",
            ObservationModel::LaplaceError => "laplace",
        }
    }

    pub fn requires_scale(&self) -> bool {
        matches!(
            self,
            ObservationModel::GaussianError | ObservationModel::LaplaceError
        )
    }

    pub fn link(&self) -> Option<&LinkSpec> {
        match self {
            ObservationModel::Binary { link } | ObservationModel::Poisson { link } => Some(link),
            _ => None,
        }
    }
}

/// Model parameter θ = (η, σ).
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub eta: FieldFunction,
    pub sigma: Option<f64>,
}

impl Theta {
    pub fn new(eta: FieldFunction, sigma: Option<f64>) -> Result<Self> {
        if let Some(s) = sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument("sigma must be positive".into()));
            }
        }
        Ok(Self { eta, sigma })
    }

    pub fn field_only(eta: FieldFunction) -> Self {
        Self { eta, sigma: None }
    }

    pub fn check_for(&self, model: &ObservationModel) -> Result<()> {
        if model.requires_scale() && self.sigma.is_none() {
            return Err(Error::InvalidArgument(format!(
                "model {} requires a scale parameter",
                model.name()
            )));
        }
        Ok(())
    }

    pub fn sigma_or_one(&self) -> f64 {
        self.sigma.unwrap_or(1.0)
    }
}

/// A single response value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    Binary(u8),
    Count(u64),
    Real(f64),
}

/// Column of responses, typed to the model family.
#[derive(Debug, Clone, PartialEq)]
pub enum Responses {
    Binary(Vec<u8>),
    Count(Vec<u64>),
    Real(Vec<f64>),
}

impl Responses {
    pub fn len(&self) -> usize {
        match self {
            Responses::Binary(v) => v.len(),
            Responses::Count(v) => v.len(),
            Responses::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Response {
        match self {
            Responses::Binary(v) => Response::Binary(v[i]),
            Responses::Count(v) => Response::Count(v[i]),
            Responses::Real(v) => Response::Real(v[i]),
        }
    }
}

/// Covariates plus matching responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: CovariateSample,
    pub responses: Responses,
}

impl Dataset {
    pub fn new(covariates: CovariateSample, responses: Responses) -> Result<Self> {
        if covariates.len() != responses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} covariates but {} responses",
                covariates.len(),
                responses.len()
            )));
        }
        Ok(Self {
            covariates,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CSV with x columns then a y column; integer responses round-trip
    /// bit-exactly, real responses through 17 significant digits.
    pub fn to_csv(&self) -> String {
        let d = self.covariates.points.first().map_or(1, |p| p.len());
        let mut out = String::new();
        for j in 1..=d {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("y\n");
        for (i, p) in self.covariates.points.iter().enumerate() {
            for v in p {
                out.push_str(&crate::stats::fmt_g17(*v));
                out.push(',');
            }
            match self.responses.get(i) {
                Response::Binary(b) => out.push_str(&b.to_string()),
                Response::Count(c) => out.push_str(&c.to_string()),
                Response::Real(r) => out.push_str(&crate::stats::fmt_g17(r)),
            }
            out.push('\n');
        }
        out
    }

    /// Parse CSV produced by [`Dataset::to_csv`]; the response column is typed
    /// by `model`.
    pub fn from_csv(text: &str, model: &ObservationModel) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty dataset CSV".into()))?;
        let d = header.split(',').count() - 1;
        let mut points = Vec::new();
        let mut bits = Vec::new();
        let mut counts = Vec::new();
        let mut reals = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    d + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 2)))
            };
            let mut p = Vec::with_capacity(d);
            for f in &fields[..d] {
                p.push(parse(f)?);
            }
            points.push(p);
            let ytxt = fields[d].trim();
            match model {
                ObservationModel::Binary { .. } => bits.push(
                    ytxt.parse::<u8>()
                        .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 2)))?,
                ),
                ObservationModel::Poisson { .. } => counts.push(
                    ytxt.parse::<u64>()
                        .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 2)))?,
                ),
                _ => reals.push(parse(ytxt)?),
            }
        }
        let responses = match model {
            ObservationModel::Binary { .. } => Responses::Binary(bits),
            ObservationModel::Poisson { .. } => Responses::Count(counts),
            _ => Responses::Real(reals),
        };
        Dataset::new(
            CovariateSample {
                points,
                scheme: crate::domain::SamplingScheme::IidFromQ,
                truncated: false,
            },
            responses,
        )
    }
}

/// Exact log-density of one observation.
pub fn log_density(model: &ObservationModel, theta: &Theta, x: &[f64], y: Response) -> Result<f64> {
    theta.check_for(model)?;
    let eta = theta.eta.eval(x)?;
    match (model, y) {
        (ObservationModel::Binary { link }, Response::Binary(b)) => {
            if b > 1 {
                return Err(Error::InvalidResponse(b.to_string(), "binary".into()));
            }
            let p = link.eval(eta);
            Ok(if b == 1 { p.ln() } else { (1.0 - p).ln() })
        }
        (ObservationModel::Poisson { link }, Response::Count(c)) => {
            let lambda = link.eval(eta);
            Ok(-lambda + c as f64 * lambda.ln() - ln_gamma(c as f64 + 1.0))
        }
        (ObservationModel::GaussianError, Response::Real(r)) => {
            let s = theta.sigma.unwrap();
            let z = (r - eta) / s;
            Ok(-0.5 * (2.0 * std::f64::consts::PI).ln() - s.ln() - 0.5 * z * z)
        }
        (ObservationModel::LaplaceError, Response::Real(r)) => {
            let s = theta.sigma.unwrap();
            Ok(-(2.0 * s).ln() - (r - eta).abs() / s)
        }
        (m, y) => Err(Error::InvalidResponse(format!("{y:?}"), m.name().into())),
    }
}

/// Simulate independent responses at the given covariates under the truth.
/// The truth may lie outside the prior's support.
pub fn simulate_responses(
    model: &ObservationModel,
    truth: &TruthSpec,
    xs: &CovariateSample,
    rng: &RngContract,
) -> Result<Dataset> {
    let mut r = rng.rng();
    let responses = match model {
        ObservationModel::Binary { link } => {
            let mut v = Vec::with_capacity(xs.len());
            for x in &xs.points {
                let p0 = link.eval(truth.eta0_at(x)?);
                v.push(u8::from(r.gen::<f64>() < p0));
            }
            Responses::Binary(v)
        }
        ObservationModel::Poisson { link } => {
            let mut v = Vec::with_capacity(xs.len());
            for x in &xs.points {
                let l0 = link.eval(truth.eta0_at(x)?);
                let draw: f64 = Poisson::new(l0)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .sample(&mut r);
                v.push(draw as u64);
            }
            Responses::Count(v)
        }
        ObservationModel::GaussianError => {
            let s0 = truth.sigma0.ok_or_else(|| {
                Error::InvalidArgument("gaussian model needs truth sigma0".into())
            })?;
            let mut v = Vec::with_capacity(xs.len());
            for x in &xs.points {
                let z: f64 = StandardNormal.sample(&mut r);
                v.push(truth.eta0_at(x)? + s0 * z);
            }
            Responses::Real(v)
        }
        ObservationModel::LaplaceError => {
            let s0 = truth.sigma0.ok_or_else(|| {
                Error::InvalidArgument("laplace model needs truth sigma0".into())
            })?;
            let mut v = Vec::with_capacity(xs.len());
            for x in &xs.points {
                // inverse-CDF draw
                let u: f64 = r.gen::<f64>() - 0.5;
                let e = -s0 * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                v.push(truth.eta0_at(x)? + e);
            }
            Responses::Real(v)
        }
    };
    Dataset::new(xs.clone(), responses)
}

/// log Rₙ(θ) = log f_θ(data) − log f_{θ₀}(data), via the per-observation
/// ratio form (the log y! terms of the Poisson model cancel exactly).
pub fn log_likelihood_ratio(
    model: &ObservationModel,
    theta: &Theta,
    truth: &TruthSpec,
    data: &Dataset,
) -> Result<f64> {
    theta.check_for(model)?;
    let mut total = 0.0;
    match (model, &data.responses) {
        (ObservationModel::Binary { link }, Responses::Binary(ys)) => {
            for (x, &y) in data.covariates.points.iter().zip(ys) {
                let p = link.eval(theta.eta.eval(x)?);
                let p0 = link.eval(truth.eta0_at(x)?);
                total += if y == 1 {
                    (p / p0).ln()
                } else {
                    ((1.0 - p) / (1.0 - p0)).ln()
                };
            }
        }
        (ObservationModel::Poisson { link }, Responses::Count(ys)) => {
            for (x, &y) in data.covariates.points.iter().zip(ys) {
                let l = link.eval(theta.eta.eval(x)?);
                let l0 = link.eval(truth.eta0_at(x)?);
                total += -(l - l0) + y as f64 * (l / l0).ln();
            }
        }
        (ObservationModel::GaussianError, Responses::Real(ys)) => {
            let s = theta.sigma.unwrap();
            let s0 = truth.sigma0.ok_or_else(|| {
                Error::InvalidArgument("gaussian model needs truth sigma0".into())
            })?;
            for (x, &y) in data.covariates.points.iter().zip(ys) {
                let e = theta.eta.eval(x)?;
                let e0 = truth.eta0_at(x)?;
                total += (s0 / s).ln() + (y - e0) * (y - e0) / (2.0 * s0 * s0)
                    - (y - e) * (y - e) / (2.0 * s * s);
            }
        }
        (ObservationModel::LaplaceError, Responses::Real(ys)) => {
            let s = theta.sigma.unwrap();
            let s0 = truth.sigma0.ok_or_else(|| {
                Error::InvalidArgument("laplace model needs truth sigma0".into())
            })?;
            for (x, &y) in data.covariates.points.iter().zip(ys) {
                let e = theta.eta.eval(x)?;
                let e0 = truth.eta0_at(x)?;
                total += (s0 / s).ln() + (y - e0).abs() / s0 - (y - e).abs() / s;
            }
        }
        (m, _) => {
            return Err(Error::InvalidResponse(
                "dataset response kind".into(),
                m.name().into(),
            ))
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample_covariates, truth_catalog, CovariateSpace, SamplingScheme};
    use approx::assert_relative_eq;

    #[test]
    fn logistic_link_inside_band() {
        let link = LinkSpec::default_binary();
        assert_eq!(link_h(&link, 0.0), 0.5);
    }

    #[test]
    fn logistic_link_truncates() {
        let link = LinkSpec::default_binary();
        assert_eq!(link_h(&link, -10.0), 0.05);
        assert_eq!(link_h(&link, 10.0), 0.95);
    }

    #[test]
    fn softplus_link_floors() {
        let link = LinkSpec::default_poisson();
        assert_eq!(link_h(&link, -10.0), 0.1);
        assert_relative_eq!(link_h(&link, 3.0), 3.0f64.exp().ln_1p(), epsilon = 1e-14);
    }

    #[test]
    fn link_ranges_fuzzed() {
        use rand::Rng;
        let b = LinkSpec::default_binary();
        let p = LinkSpec::default_poisson();
        let mut rng = crate::RngContract::new(11, "fuzz").rng();
        let mut us: Vec<f64> = (0..1_000_000).map(|_| rng.gen_range(-40.0..40.0)).collect();
        us.extend_from_slice(&[-1e8, 1e8, 0.0]);
        for &u in &us {
            let pb = b.eval(u);
            assert!((0.05..=0.95).contains(&pb), "u={u} p={pb}");
            assert!(p.eval(u) >= 0.1);
        }
    }

    #[test]
    fn invalid_link_parameters_rejected() {
        assert!(LinkSpec::binary(LinkBase::LogisticCdf, 0.0).is_err());
        assert!(LinkSpec::binary(LinkBase::LogisticCdf, 0.5).is_err());
        assert!(LinkSpec::binary(LinkBase::Softplus, 0.05).is_err());
        assert!(LinkSpec::poisson(LinkBase::Exp, 0.0).is_err());
        assert!(LinkSpec::poisson(LinkBase::LogisticCdf, 0.1).is_err());
    }

    fn const_theta(c: f64, sigma: Option<f64>) -> Theta {
        Theta::new(FieldFunction::constant(1, c), sigma).unwrap()
    }

    #[test]
    fn log_density_anchors() {
        // binary p = 0.5 at y = 1
        let m = ObservationModel::default_binary();
        let v = log_density(&m, &const_theta(0.0, None), &[0.3], Response::Binary(1)).unwrap();
        assert_relative_eq!(v, 0.5f64.ln(), epsilon = 1e-12);

        // poisson λ = 1 at y = 0: softplus(u) = 1 at u = ln(e − 1)
        let m = ObservationModel::default_poisson();
        let u = (1f64.exp() - 1.0).ln();
        let v = log_density(&m, &const_theta(u, None), &[0.3], Response::Count(0)).unwrap();
        assert_relative_eq!(v, -1.0, epsilon = 1e-12);

        // standard normal at its mode
        let m = ObservationModel::GaussianError;
        let v = log_density(&m, &const_theta(0.0, Some(1.0)), &[0.3], Response::Real(0.0)).unwrap();
        assert_relative_eq!(
            v,
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn invalid_responses_rejected() {
        let m = ObservationModel::default_binary();
        assert!(log_density(&m, &const_theta(0.0, None), &[0.1], Response::Binary(2)).is_err());
        assert!(log_density(&m, &const_theta(0.0, None), &[0.1], Response::Count(3)).is_err());
        let m = ObservationModel::default_poisson();
        assert!(log_density(&m, &const_theta(0.0, None), &[0.1], Response::Real(0.5)).is_err());
    }

    #[test]
    fn poisson_density_normalizes() {
        // Σ_{y≤Y*} exp(log_density) ≥ 1 − 1e−10 at Y* = λ + 20√λ + 20
        let m = ObservationModel::default_poisson();
        for &u in &[-5.0, 0.5, 2.0] {
            let theta = const_theta(u, None);
            let lambda = LinkSpec::default_poisson().eval(u);
            let ystar = (lambda + 20.0 * lambda.sqrt() + 20.0).ceil() as u64;
            let mass: f64 = (0..=ystar)
                .map(|y| {
                    log_density(&m, &theta, &[0.2], Response::Count(y))
                        .unwrap()
                        .exp()
                })
                .sum();
            assert!(mass >= 1.0 - 1e-10 && mass <= 1.0 + 1e-12, "λ={lambda}: {mass}");
        }
    }

    #[test]
    fn continuous_densities_normalize() {
        // 256-node quadrature per smooth piece; the Laplace density has a
        // kink at its center and a heavier tail, so its rule is applied on
        // each side of the kink with a ±40σ window (±12σ leaves e⁻¹² ≈ 6e−6
        // outside, the Gaussian window only ~1e−32)
        let gl = crate::quad::GaussLegendre::new(256);
        for (m, s, w) in [
            (ObservationModel::GaussianError, 0.7, 12.0),
            (ObservationModel::LaplaceError, 1.3, 40.0),
        ] {
            let theta = const_theta(0.4, Some(s));
            let f = |y: f64| {
                log_density(&m, &theta, &[0.2], Response::Real(y))
                    .unwrap()
                    .exp()
            };
            let mass = gl.integrate(0.4 - w * s, 0.4, f) + gl.integrate(0.4, 0.4 + w * s, f);
            assert!((mass - 1.0).abs() < 1e-8, "{}: {mass}", m.name());
        }
    }

    #[test]
    fn simulate_binary_mean_matches_truth() {
        let space = CovariateSpace::new(1).unwrap();
        let xs = sample_covariates(
            100_000,
            SamplingScheme::IidFromQ,
            &space,
            &RngContract::new(1, "x"),
        )
        .unwrap();
        let m = ObservationModel::default_binary();
        let truth = truth_catalog("constant(0)").unwrap(); // p0 = 0.5
        let d = simulate_responses(&m, &truth, &xs, &RngContract::new(1, "y")).unwrap();
        if let Responses::Binary(v) = &d.responses {
            let mean = v.iter().map(|&b| b as f64).sum::<f64>() / v.len() as f64;
            assert!((mean - 0.5).abs() < 3.0 * (0.25f64 / 1e5).sqrt(), "{mean}");
        } else {
            panic!("wrong response kind");
        }
    }

    #[test]
    fn simulate_poisson_mean_matches_truth() {
        let space = CovariateSpace::new(1).unwrap();
        let xs = sample_covariates(
            100_000,
            SamplingScheme::IidFromQ,
            &space,
            &RngContract::new(2, "x"),
        )
        .unwrap();
        let m = ObservationModel::default_poisson();
        // softplus(u) = 2 at u = ln(e² − 1)
        let u = (2f64.exp() - 1.0).ln();
        let truth = truth_catalog(&format!("constant({u})")).unwrap();
        let d = simulate_responses(&m, &truth, &xs, &RngContract::new(2, "y")).unwrap();
        if let Responses::Count(v) = &d.responses {
            let mean = v.iter().map(|&c| c as f64).sum::<f64>() / v.len() as f64;
            assert!((mean - 2.0).abs() < 3.0 * (2f64 / 1e5).sqrt(), "{mean}");
        } else {
            panic!("wrong response kind");
        }
    }

    #[test]
    fn degenerate_unclamped_link_gives_all_ones() {
        let link = LinkSpec::binary_unclamped(LinkBase::LogisticCdf);
        let m = ObservationModel::Binary { link };
        let truth = truth_catalog("constant(1e9)").unwrap();
        let space = CovariateSpace::new(1).unwrap();
        let xs = sample_covariates(
            100,
            SamplingScheme::IidFromQ,
            &space,
            &RngContract::new(3, "x"),
        )
        .unwrap();
        let d = simulate_responses(&m, &truth, &xs, &RngContract::new(3, "y")).unwrap();
        if let Responses::Binary(v) = &d.responses {
            assert!(v.iter().all(|&b| b == 1));
        } else {
            panic!("wrong response kind");
        }
    }

    #[test]
    fn likelihood_ratio_single_term_anchors() {
        // binary: y = 1, p = 0.5, p0 = 0.25 → log 2
        let link = LinkSpec::default_binary();
        let m = ObservationModel::Binary { link };
        let p_inv = |p: f64| (p / (1.0 - p)).ln(); // logistic inverse, inside the band
        let theta = const_theta(p_inv(0.5), None);
        let truth = truth_catalog(&format!("constant({})", p_inv(0.25))).unwrap();
        let xs = CovariateSample {
            points: vec![vec![0.5]],
            scheme: SamplingScheme::IidFromQ,
            truncated: false,
        };
        let data = Dataset::new(xs, Responses::Binary(vec![1])).unwrap();
        let lr = log_likelihood_ratio(&m, &theta, &truth, &data).unwrap();
        assert_relative_eq!(lr, 2f64.ln(), epsilon = 1e-12);

        // poisson: y = 2, λ = 2, λ0 = 1 → −1 + 2 log 2
        let m = ObservationModel::default_poisson();
        let sp_inv = |l: f64| (l.exp() - 1.0f64).ln();
        let theta = const_theta(sp_inv(2.0), None);
        let truth = truth_catalog(&format!("constant({})", sp_inv(1.0))).unwrap();
        let xs = CovariateSample {
            points: vec![vec![0.5]],
            scheme: SamplingScheme::IidFromQ,
            truncated: false,
        };
        let data = Dataset::new(xs, Responses::Count(vec![2])).unwrap();
        let lr = log_likelihood_ratio(&m, &theta, &truth, &data).unwrap();
        assert_relative_eq!(lr, -1.0 + 2.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn likelihood_ratio_zero_at_truth() {
        let space = CovariateSpace::new(1).unwrap();
        let xs = sample_covariates(
            50,
            SamplingScheme::IidFromQ,
            &space,
            &RngContract::new(4, "x"),
        )
        .unwrap();
        for model in [
            ObservationModel::default_binary(),
            ObservationModel::default_poisson(),
            ObservationModel::GaussianError,
            ObservationModel::LaplaceError,
        ] {
            let eta = FieldFunction::from_fn(vec![64], |x| (x[0] - 0.4).sin()).unwrap();
            let sigma = model.requires_scale().then_some(0.8);
            let theta = Theta::new(eta.clone(), sigma).unwrap();
            let truth = TruthSpec::from_field("self", eta, sigma);
            let data = simulate_responses(&model, &truth, &xs, &RngContract::new(4, "y")).unwrap();
            let lr = log_likelihood_ratio(&model, &theta, &truth, &data).unwrap();
            assert_eq!(lr, 0.0, "{}", model.name());
        }
    }

    #[test]
    fn likelihood_ratio_additive_and_antisymmetric() {
        let space = CovariateSpace::new(1).unwrap();
        let model = ObservationModel::GaussianError;
        let eta_a = FieldFunction::from_fn(vec![32], |x| x[0]).unwrap();
        let eta_b = FieldFunction::from_fn(vec![32], |x| 0.5 - x[0]).unwrap();
        let ta = Theta::new(eta_a.clone(), Some(1.0)).unwrap();
        let truth_a = TruthSpec::from_field("a", eta_a, Some(1.0));
        let truth_b = TruthSpec::from_field("b", eta_b.clone(), Some(1.0));
        let tb = Theta::new(eta_b, Some(1.0)).unwrap();

        let xs1 = sample_covariates(30, SamplingScheme::IidFromQ, &space, &RngContract::new(5, "x1"))
            .unwrap();
        let d1 = simulate_responses(&model, &truth_a, &xs1, &RngContract::new(5, "y1")).unwrap();
        let xs2 = sample_covariates(20, SamplingScheme::IidFromQ, &space, &RngContract::new(5, "x2"))
            .unwrap();
        let d2 = simulate_responses(&model, &truth_a, &xs2, &RngContract::new(5, "y2")).unwrap();

        // additivity over concatenation
        let mut points = d1.covariates.points.clone();
        points.extend(d2.covariates.points.clone());
        let (Responses::Real(r1), Responses::Real(r2)) = (&d1.responses, &d2.responses) else {
            panic!()
        };
        let mut ys = r1.clone();
        ys.extend(r2.clone());
        let joined = Dataset::new(
            CovariateSample {
                points,
                scheme: SamplingScheme::IidFromQ,
                truncated: false,
            },
            Responses::Real(ys),
        )
        .unwrap();
        let sum = log_likelihood_ratio(&model, &tb, &truth_a, &d1).unwrap()
            + log_likelihood_ratio(&model, &tb, &truth_a, &d2).unwrap();
        let whole = log_likelihood_ratio(&model, &tb, &truth_a, &joined).unwrap();
        assert_relative_eq!(sum, whole, epsilon = 1e-9);

        // antisymmetry on a shared dataset
        let fwd = log_likelihood_ratio(&model, &tb, &truth_a, &d1).unwrap();
        let back = log_likelihood_ratio(&model, &ta, &truth_b, &d1).unwrap();
        assert_relative_eq!(fwd, -back, epsilon = 1e-9);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let space = CovariateSpace::new(2).unwrap();
        let xs = sample_covariates(25, SamplingScheme::IidFromQ, &space, &RngContract::new(6, "x"))
            .unwrap();
        let model = ObservationModel::GaussianError;
        let truth = truth_catalog("smooth-sin").unwrap().with_sigma0(1.0);
        let d = simulate_responses(&model, &truth, &xs, &RngContract::new(6, "y")).unwrap();
        let text = d.to_csv();
        let back = Dataset::from_csv(&text, &model).unwrap();
        assert_eq!(d.responses, back.responses);
        assert_eq!(d.covariates.points, back.covariates.points);

        let m2 = ObservationModel::default_binary();
        let d2 = simulate_responses(&m2, &truth_catalog("constant(0)").unwrap(), &xs,
            &RngContract::new(6, "y2")).unwrap();
        let back2 = Dataset::from_csv(&d2.to_csv(), &m2).unwrap();
        assert_eq!(d2.responses, back2.responses);
    }
}
