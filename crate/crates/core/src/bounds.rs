//! Empirical validation of the concentration inequalities behind the
//! asymptotic arguments: Hoeffding for bounded summands, a sub-exponential
//! MGF check for Poisson summands, Hanson-Wright for Gaussian quadratic
//! forms and Bernstein for exponential-tailed summands.
//!
//! Hoeffding carries exact constants. The other three have existential
//! constants in their statements, so the checks calibrate the constant on a
//! training grid (odd-indexed points, using the empirical upper confidence
//! limit) and validate on the disjoint even-indexed grid.

use crate::rng::RngContract;
use crate::stats::wilson_interval;
use crate::{Error, Result};
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

/// One threshold's worth of evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub empirical: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: f64,
    /// Closed-form reference value when one exists (the exact MGF).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    /// Whether this row was used to calibrate the constant (train) or to
    /// validate it.
    pub train: bool,
    pub pass: bool,
}

/// Report of one inequality check across its threshold grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCheckReport {
    pub kind: String,
    pub params: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrated_constant: Option<f64>,
    pub rows: Vec<TailRow>,
}

impl TailCheckReport {
    /// All validation rows pass.
    pub fn validation_pass(&self) -> bool {
        self.rows.iter().filter(|r| !r.train).all(|r| r.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn empirical_tails_non_increasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[0].t >= w[1].t || w[0].empirical >= w[1].empirical)
    }
}

/// Log-spaced grid of `count` points in [lo, hi].
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    (0..count)
        .map(|i| {
            let f = i as f64 / (count as f64 - 1.0);
            (lo.ln() + f * (hi.ln() - lo.ln())).exp()
        })
        .collect()
}

/// Hoeffding: P(|mean − μ| > t) ≤ 2 exp(−2 n t² / range²) with summands
/// built from a mixture of two scaled Bernoulli components on [0, range].
pub fn check_hoeffding(
    range_width: f64,
    n: usize,
    t_grid: &[f64],
    samples: usize,
    rng: &RngContract,
) -> Result<TailCheckReport> {
    if samples < 10_000 {
        return Err(Error::InvalidArgument(
            "hoeffding check needs at least 1e4 samples".into(),
        ));
    }
    let (q1, q2) = (0.3, 0.7);
    let mu = range_width * 0.5 * (q1 + q2);
    let mut r = rng.rng();
    let b1 = Binomial::new(n as u64, q1).unwrap();
    let b2 = Binomial::new(n as u64, q2).unwrap();
    let mut devs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let s1 = b1.sample(&mut r) as f64;
        let s2 = b2.sample(&mut r) as f64;
        let mean = range_width * 0.5 * (s1 + s2) / n as f64;
        devs.push((mean - mu).abs());
    }
    let rows = t_grid
        .iter()
        .map(|&t| {
            let hits = devs.iter().filter(|&&d| d > t).count();
            let p = hits as f64 / samples as f64;
            let (lo, hi) = wilson_interval(hits, samples);
            let bound = 2.0 * (-2.0 * n as f64 * t * t / (range_width * range_width)).exp();
            TailRow {
                t,
                empirical: p,
                ci_lo: lo,
                ci_hi: hi,
                bound,
                exact: None,
                train: false,
                pass: hi <= bound,
            }
        })
        .collect();
    Ok(TailCheckReport {
        kind: "hoeffding".into(),
        params: format!("range={range_width}, n={n}, samples={samples}"),
        calibrated_constant: None,
        rows,
    })
}

/// Sub-exponential MGF check for centered Poisson summands
/// z = y·log(λ/λ₀) − λ₀·log(λ/λ₀), y ~ Poisson(λ₀).
///
/// The constant C in c_λ = C·|λ − λ₀| is calibrated against the exact MGF on
/// the training half of the grid; validation requires the empirical MGF's
/// upper confidence limit to stay below exp(c_λ² t²), and the exact MGF to
/// match the empirical one within 3 standard errors everywhere.
pub fn check_poisson_subexponential(
    lambda: f64,
    lambda0: f64,
    t_grid: &[f64],
    samples: usize,
    rng: &RngContract,
) -> Result<TailCheckReport> {
    if lambda <= 0.0 || lambda0 <= 0.0 {
        return Err(Error::InvalidArgument("intensities must be positive".into()));
    }
    let delta = (lambda / lambda0).ln();
    let exact_log_mgf =
        |t: f64| -t * lambda0 * delta + lambda0 * ((t * delta).exp() - 1.0);

    // calibrate C on the training half (odd indices, which include interior
    // and endpoint thresholds)
    let degenerate = (lambda - lambda0).abs() < 1e-12;
    let c_sq_needed = t_grid
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 1)
        .map(|(_, &t)| exact_log_mgf(t) / (t * t))
        .fold(0.0f64, f64::max);
    let c_lambda = if degenerate {
        0.0
    } else {
        c_sq_needed.max(0.0).sqrt()
    };
    let c_const = if degenerate {
        0.0
    } else {
        c_lambda / (lambda - lambda0).abs()
    };

    // the sub-exponential window |t| ≤ 1/c_λ
    if !degenerate {
        if let Some(&bad) = t_grid.iter().find(|&&t| t.abs() > 1.0 / c_lambda) {
            return Err(Error::InvalidArgument(format!(
                "t = {bad} outside the sub-exponential window |t| ≤ {:.4}",
                1.0 / c_lambda
            )));
        }
    }

    let mut r = rng.rng();
    let pois = Poisson::new(lambda0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let zs: Vec<f64> = (0..samples)
        .map(|_| {
            let y: f64 = pois.sample(&mut r);
            (y - lambda0) * delta
        })
        .collect();

    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for &z in &zs {
                let v = (t * z).exp();
                sum += v;
                sq += v * v;
            }
            let m = sum / samples as f64;
            let var = (sq / samples as f64 - m * m).max(0.0);
            let se = (var / samples as f64).sqrt();
            let bound = (c_lambda * c_lambda * t * t).exp();
            let exact = exact_log_mgf(t).exp();
            let train = i % 2 == 1;
            let pass = m - 1.96 * se <= bound && (m - exact).abs() <= 3.0 * se.max(1e-15);
            TailRow {
                t,
                empirical: m,
                ci_lo: m - 1.96 * se,
                ci_hi: m + 1.96 * se,
                bound,
                exact: Some(exact),
                train,
                pass,
            }
        })
        .collect();
    Ok(TailCheckReport {
        kind: "poisson-subexponential".into(),
        params: format!("lambda={lambda}, lambda0={lambda0}, samples={samples}"),
        calibrated_constant: Some(c_const),
        rows,
    })
}

/// Hanson-Wright for the Gaussian quadratic form zᵀz:
/// P(|zᵀz − n| > nκ/2) ≤ 2 exp(−n min(κ²/(16c₀), κ/(4c₀))).
pub fn check_hanson_wright(
    n: usize,
    kappa_grid: &[f64],
    samples: usize,
    rng: &RngContract,
) -> Result<TailCheckReport> {
    if samples < 10_000 {
        return Err(Error::InvalidArgument(
            "hanson-wright check needs at least 1e4 samples".into(),
        ));
    }
    let mut r = rng.rng();
    // zᵀz with z ~ N(0, I_n) is chi-square(n) = Gamma(n/2, scale 2)
    let chi2 = Gamma::new(n as f64 / 2.0, 2.0).unwrap();
    let devs: Vec<f64> = (0..samples)
        .map(|_| (chi2.sample(&mut r) - n as f64).abs())
        .collect();

    let tail = |kappa: f64| {
        let thr = n as f64 * kappa / 2.0;
        let hits = devs.iter().filter(|&&d| d > thr).count();
        (hits, wilson_interval(hits, samples))
    };
    let rate = |kappa: f64| (kappa * kappa / 16.0).min(kappa / 4.0);

    // calibrate c0 on odd-indexed κ against the empirical upper limit
    let mut c0 = 0.0f64;
    for (i, &k) in kappa_grid.iter().enumerate() {
        if i % 2 == 1 && k > 0.0 {
            let (_, (_, hi)) = tail(k);
            if hi < 2.0 && hi > 0.0 {
                c0 = c0.max(n as f64 * rate(k) / (2.0 / hi).ln());
            }
        }
    }
    if c0 == 0.0 {
        return Err(Error::InvalidArgument(
            "hanson-wright calibration grid produced no usable thresholds".into(),
        ));
    }

    let rows = kappa_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (hits, (lo, hi)) = tail(k);
            let p = hits as f64 / samples as f64;
            let bound = 2.0 * (-(n as f64) * rate(k) / c0).exp();
            TailRow {
                t: k,
                empirical: p,
                ci_lo: lo,
                ci_hi: hi,
                bound,
                exact: None,
                train: i % 2 == 1,
                pass: hi <= bound,
            }
        })
        .collect();
    Ok(TailCheckReport {
        kind: "hanson-wright".into(),
        params: format!("n={n}, samples={samples}"),
        calibrated_constant: Some(c0),
        rows,
    })
}

/// Bernstein for sub-exponential summands |ε|/σ₀ − 1 with ε ~ Laplace(σ₀):
/// P(|mean| > t) ≤ 2 exp(−(n/2) min(t²/(4s²), t/(2s))).
///
/// The standardized summand is Exp(1) − 1 regardless of σ₀, and the mean of
/// n of them is exactly Gamma(n,1)/n − 1, which is what gets simulated.
pub fn check_bernstein_laplace(
    sigma0: f64,
    n: usize,
    t_grid: &[f64],
    samples: usize,
    rng: &RngContract,
) -> Result<TailCheckReport> {
    if sigma0 <= 0.0 {
        return Err(Error::InvalidArgument("sigma0 must be positive".into()));
    }
    if samples < 10_000 {
        return Err(Error::InvalidArgument(
            "bernstein check needs at least 1e4 samples".into(),
        ));
    }
    let mut r = rng.rng();
    let gamma = Gamma::new(n as f64, 1.0).unwrap();
    let devs: Vec<f64> = (0..samples)
        .map(|_| (gamma.sample(&mut r) / n as f64 - 1.0).abs())
        .collect();

    let tail = |t: f64| {
        let hits = devs.iter().filter(|&&d| d > t).count();
        (hits, wilson_interval(hits, samples))
    };
    let bound_at = |t: f64, s: f64| {
        2.0 * (-(n as f64 / 2.0) * (t * t / (4.0 * s * s)).min(t / (2.0 * s))).exp()
    };

    // per-threshold minimal s by bisection (bound is increasing in s), then
    // take the max over the training half
    let mut s_star = 0.0f64;
    for (i, &t) in t_grid.iter().enumerate() {
        if i % 2 == 1 && t > 0.0 {
            let (_, (_, hi)) = tail(t);
            if hi >= 2.0 || hi <= 0.0 {
                continue;
            }
            let (mut lo_s, mut hi_s) = (1e-6f64, 1e6f64);
            for _ in 0..200 {
                let mid = (lo_s * hi_s).sqrt();
                if bound_at(t, mid) >= hi {
                    hi_s = mid;
                } else {
                    lo_s = mid;
                }
            }
            s_star = s_star.max(hi_s);
        }
    }
    if s_star == 0.0 {
        return Err(Error::InvalidArgument(
            "bernstein calibration grid produced no usable thresholds".into(),
        ));
    }

    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (hits, (lo, hi)) = tail(t);
            let p = hits as f64 / samples as f64;
            let bound = bound_at(t, s_star);
            TailRow {
                t,
                empirical: p,
                ci_lo: lo,
                ci_hi: hi,
                bound,
                exact: None,
                train: i % 2 == 1,
                pass: hi <= bound,
            }
        })
        .collect();
    Ok(TailCheckReport {
        kind: "bernstein-laplace".into(),
        params: format!("sigma0={sigma0}, n={n}, samples={samples}"),
        calibrated_constant: Some(s_star),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_anchor_and_trivial_thresholds() {
        let rep = check_hoeffding(
            1.0,
            100,
            &[0.0, 0.1, 1.5],
            100_000,
            &RngContract::new(40, "hoeffding"),
        )
        .unwrap();
        // t = 0: bound 2 ≥ anything
        assert_eq!(rep.rows[0].bound, 2.0);
        assert!(rep.rows[0].pass);
        // t = 0.1: bound 2e⁻² ≈ 0.2707, empirical far below it
        assert!((rep.rows[1].bound - 0.2706705664732254).abs() < 1e-12);
        assert!(rep.rows[1].empirical < rep.rows[1].bound);
        assert!(rep.rows[1].pass);
        // t > range: impossible deviation
        assert_eq!(rep.rows[2].empirical, 0.0);
        assert!(rep.empirical_tails_non_increasing());
    }

    #[test]
    fn poisson_mgf_trivial_points() {
        // λ = λ0: z ≡ 0 and the MGF is exactly 1 on both sides
        let rep = check_poisson_subexponential(
            1.0,
            1.0,
            &[0.0, 0.1, 0.2, 0.4],
            20_000,
            &RngContract::new(41, "pois"),
        )
        .unwrap();
        for row in &rep.rows {
            assert_eq!(row.empirical, 1.0);
            assert_eq!(row.exact, Some(1.0));
            assert!(row.pass);
        }
        // t = 0 exactly 1 for distinct intensities too
        let rep = check_poisson_subexponential(
            2.0,
            1.0,
            &[0.0, 0.1, 0.3, 0.5, 0.8, 1.1, 1.3, 1.4],
            50_000,
            &RngContract::new(41, "pois2"),
        )
        .unwrap();
        assert_eq!(rep.rows[0].empirical, 1.0);
        assert_eq!(rep.rows[0].exact, Some(1.0));
        // frozen oracle value: log MGF at t = 0.1 is 0.0024587444802986053
        let exact = rep.rows[1].exact.unwrap();
        assert!((exact.ln() - 0.0024587444802986053).abs() < 1e-15);
        assert!(rep.all_pass());
    }

    #[test]
    fn poisson_mgf_window_enforced() {
        let err = check_poisson_subexponential(
            2.0,
            1.0,
            &[0.5, 5.0],
            20_000,
            &RngContract::new(42, "pois"),
        );
        assert!(err.is_err());
    }

    #[test]
    fn hanson_wright_anchor() {
        let grid = log_spaced(0.2, 1.0, 8);
        let rep =
            check_hanson_wright(100, &grid, 1_000_000, &RngContract::new(43, "hw")).unwrap();
        assert!(rep.validation_pass(), "{rep:?}");
        assert!(rep.empirical_tails_non_increasing());
        // κ = 1 sits at the grid end: empirical tail near the exact
        // 9.109e−4 (chi-square tail at |χ²₁₀₀ − 100| > 50)
        let last = rep.rows.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        assert!(
            (last.empirical - 9.108853476016346e-4).abs() < 3e-4,
            "tail {}",
            last.empirical
        );
    }

    #[test]
    fn bernstein_anchor() {
        let grid = log_spaced(0.05, 0.3, 8);
        let rep = check_bernstein_laplace(
            1.0,
            100,
            &grid,
            1_000_000,
            &RngContract::new(44, "bern"),
        )
        .unwrap();
        assert!(rep.validation_pass(), "{rep:?}");
        // frozen oracle: P(|Gamma(100)/100 − 1| > 0.3) = 3.1808e−3
        let last = rep.rows.last().unwrap();
        assert!((last.t - 0.3).abs() < 1e-12);
        assert!(
            (last.empirical - 3.1807809622864123e-3).abs() < 5e-4,
            "tail {}",
            last.empirical
        );
    }

    #[test]
    fn undersampled_checks_rejected() {
        assert!(check_hoeffding(1.0, 10, &[0.1], 100, &RngContract::new(45, "x")).is_err());
        assert!(check_hanson_wright(10, &[0.5], 100, &RngContract::new(45, "y")).is_err());
        assert!(
            check_bernstein_laplace(1.0, 10, &[0.1], 100, &RngContract::new(45, "z")).is_err()
        );
    }
}
