//! Small statistical helpers shared across modules.

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Median of a slice (average of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Least-squares slope of y on x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Effective sample size of a (possibly autocorrelated) chain, by summing
/// sample autocorrelations until the first non-positive lag (Geyer's initial
/// positive sequence, collapsed to single lags).
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(chain);
    let c0: f64 = chain.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        // constant chain: every draw carries the same information
        return n as f64;
    }
    let mut rho_sum = 0.0;
    for lag in 1..n / 2 {
        let c: f64 = chain[..n - lag]
            .iter()
            .zip(&chain[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / n as f64;
        let rho = c / c0;
        if rho <= 0.0 {
            break;
        }
        rho_sum += rho;
    }
    (n as f64 / (1.0 + 2.0 * rho_sum)).min(n as f64)
}

/// Monte-Carlo standard error of the mean of `chain`, using the effective
/// sample size.
pub fn mc_standard_error(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 2 {
        return f64::NAN;
    }
    (variance(chain) / effective_sample_size(chain)).sqrt()
}

/// Format with 17 significant digits; round-trip exact for f64.
pub fn fmt_g17(x: f64) -> String {
    format!("{:.16e}", x)
}
