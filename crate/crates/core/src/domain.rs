//! Covariate space, gridded field functions and the truth catalog.
//!
//! The covariate space is always the unit cube `[0,1]^d`. Regression fields
//! `η` are stored on a tensor grid with multilinear interpolation; truths with
//! jump discontinuities are kept as closed-form rules so the jump is not
//! smeared by interpolation.

use crate::rng::RngContract;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The compact covariate space `[0,1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpace {
    dim: usize,
}

impl CovariateSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be ≥ 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|&v| (0.0..=1.0).contains(&v))
    }
}

/// How covariates are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    /// iid from the covariate measure Q (uniform on the cube).
    IidFromQ,
    /// Equispaced lattice of cell midpoints, one point per equal-volume cell.
    FixedGrid,
}

/// An ordered set of covariate points.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSample {
    pub points: Vec<Vec<f64>>,
    pub scheme: SamplingScheme,
    /// Fixed-grid only: true when n was not a d-th power, so the per-axis
    /// count was rounded up and the lattice truncated to n points.
    pub truncated: bool,
}

impl CovariateSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draw `n` covariates under the given scheme.
pub fn sample_covariates(
    n: usize,
    scheme: SamplingScheme,
    space: &CovariateSpace,
    rng: &RngContract,
) -> Result<CovariateSample> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "covariate sample size must be ≥ 1".into(),
        ));
    }
    let d = space.dim();
    match scheme {
        SamplingScheme::IidFromQ => {
            let mut r = rng.rng();
            let points = (0..n)
                .map(|_| (0..d).map(|_| r.gen::<f64>()).collect())
                .collect();
            Ok(CovariateSample {
                points,
                scheme,
                truncated: false,
            })
        }
        SamplingScheme::FixedGrid => {
            // k^d cells with k = ceil(n^{1/d}); keep the first n midpoints.
            let k = (n as f64).powf(1.0 / d as f64).ceil() as usize;
            let k = k.max(1);
            let truncated = k.pow(d as u32) != n;
            let mut points = Vec::with_capacity(n);
            let mut idx = vec![0usize; d];
            'outer: loop {
                points.push(idx.iter().map(|&i| (i as f64 + 0.5) / k as f64).collect());
                if points.len() == n {
                    break;
                }
                // odometer increment, last axis fastest
                for j in (0..d).rev() {
                    idx[j] += 1;
                    if idx[j] < k {
                        continue 'outer;
                    }
                    idx[j] = 0;
                }
                break;
            }
            Ok(CovariateSample {
                points,
                scheme,
                truncated,
            })
        }
    }
}

/// A real-valued function on the cube stored on a tensor grid with
/// multilinear interpolation. Exact at grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFunction {
    /// Nodes per axis (each ≥ 2). Node i along an axis with m nodes sits at
    /// i/(m−1).
    nodes_per_axis: Vec<usize>,
    /// Node values, row-major with the last axis fastest.
    values: Vec<f64>,
}

impl FieldFunction {
    pub fn new(nodes_per_axis: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if nodes_per_axis.is_empty() || nodes_per_axis.iter().any(|&m| m < 2) {
            return Err(Error::InvalidArgument(
                "each axis needs at least 2 grid nodes".into(),
            ));
        }
        let expect: usize = nodes_per_axis.iter().product();
        if values.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "expected {expect} node values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid values must be finite".into(),
            ));
        }
        Ok(Self {
            nodes_per_axis,
            values,
        })
    }

    /// Constant field on a minimal grid.
    pub fn constant(dim: usize, c: f64) -> Self {
        let nodes_per_axis = vec![2; dim.max(1)];
        let count = 1usize << dim.max(1);
        Self::new(nodes_per_axis, vec![c; count]).unwrap()
    }

    /// Tabulate a closed-form function on an equispaced grid.
    pub fn from_fn(nodes_per_axis: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = nodes_per_axis.len();
        let total: usize = nodes_per_axis.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let x: Vec<f64> = idx
                .iter()
                .zip(&nodes_per_axis)
                .map(|(&i, &m)| i as f64 / (m as f64 - 1.0))
                .collect();
            values.push(f(&x));
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < nodes_per_axis[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        Self::new(nodes_per_axis, values)
    }

    pub fn dim(&self) -> usize {
        self.nodes_per_axis.len()
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes_per_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Coordinates of all grid nodes, in storage order.
    pub fn node_coordinates(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let total = self.values.len();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            out.push(
                idx.iter()
                    .zip(&self.nodes_per_axis)
                    .map(|(&i, &m)| i as f64 / (m as f64 - 1.0))
                    .collect(),
            );
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.nodes_per_axis[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        out
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (j, &i) in idx.iter().enumerate() {
            flat = flat * self.nodes_per_axis[j] + i;
        }
        flat
    }

    /// Multilinear interpolation; exact at nodes. Errors outside the cube.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        // cell index and fractional offset per axis
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0f64; d];
        for j in 0..d {
            let m = self.nodes_per_axis[j];
            let t = x[j] * (m as f64 - 1.0);
            let mut i = t.floor() as usize;
            if i >= m - 1 {
                i = m - 2;
            }
            base[j] = i;
            frac[j] = t - i as f64;
        }
        let mut acc = 0.0;
        let corners = 1usize << d;
        let mut idx = vec![0usize; d];
        for c in 0..corners {
            let mut w = 1.0;
            for j in 0..d {
                let hi = (c >> j) & 1 == 1;
                idx[j] = base[j] + hi as usize;
                w *= if hi { frac[j] } else { 1.0 - frac[j] };
            }
            if w != 0.0 {
                acc += w * self.values[self.flat_index(&idx)];
            }
        }
        Ok(acc)
    }

    /// Sup-norm over grid nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Per-axis sup of finite-difference partials (central in the interior,
    /// one-sided at the edges).
    pub fn grad_sup_norms(&self) -> Vec<f64> {
        let d = self.dim();
        let mut sups = vec![0.0f64; d];
        let total = self.values.len();
        let mut idx = vec![0usize; d];
        for flat in 0..total {
            for j in 0..d {
                let m = self.nodes_per_axis[j];
                let h = 1.0 / (m as f64 - 1.0);
                let i = idx[j];
                let (lo, hi, span) = if i == 0 {
                    (flat, flat + self.stride(j), h)
                } else if i == m - 1 {
                    (flat - self.stride(j), flat, h)
                } else {
                    (flat - self.stride(j), flat + self.stride(j), 2.0 * h)
                };
                let g = (self.values[hi] - self.values[lo]) / span;
                if g.abs() > sups[j] {
                    sups[j] = g.abs();
                }
            }
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.nodes_per_axis[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        sups
    }

    fn stride(&self, axis: usize) -> usize {
        self.nodes_per_axis[axis + 1..].iter().product()
    }
}

/// Evaluate a field at a point (thin wrapper kept for symmetry with the other
/// operations).
pub fn eval_field(f: &FieldFunction, x: &[f64]) -> Result<f64> {
    f.eval(x)
}

/// Closed-form truth rules. Jump truths stay closed-form so interpolation
/// never smooths the jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthRule {
    Constant(f64),
    /// sin(2π x₁)
    SmoothSin,
    /// 1.5 exp(−50 |x − ½|²)
    SmoothBump,
    /// −1 for x₁ < ½, +1 for x₁ ≥ ½
    StepJump,
}

impl TruthRule {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TruthRule::Constant(c) => *c,
            TruthRule::SmoothSin => (2.0 * std::f64::consts::PI * x[0]).sin(),
            TruthRule::SmoothBump => {
                let r2: f64 = x.iter().map(|&v| (v - 0.5) * (v - 0.5)).sum();
                1.5 * (-50.0 * r2).exp()
            }
            TruthRule::StepJump => {
                if x[0] < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// The true regression field, either a closed-form rule or a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthField {
    Rule(TruthRule),
    Grid(FieldFunction),
}

/// A named data-generating truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub name: String,
    pub eta0: TruthField,
    /// Noise scale for the Gaussian/Laplace error models.
    pub sigma0: Option<f64>,
    pub representable_in_prior: bool,
    /// Declared bound with ‖η₀‖∞ < κ₀.
    pub kappa0: f64,
}

impl TruthSpec {
    pub fn eta0_at(&self, x: &[f64]) -> Result<f64> {
        match &self.eta0 {
            TruthField::Rule(r) => Ok(r.eval(x)),
            TruthField::Grid(f) => f.eval(x),
        }
    }

    pub fn with_sigma0(mut self, sigma0: f64) -> Self {
        self.sigma0 = Some(sigma0);
        self
    }

    /// Treat a representable parameter as the data-generating truth (used by
    /// the antisymmetry and equipartition checks).
    pub fn from_field(name: impl Into<String>, eta: FieldFunction, sigma0: Option<f64>) -> Self {
        let kappa0 = eta.sup_norm() + 1.0;
        Self {
            name: name.into(),
            eta0: TruthField::Grid(eta),
            sigma0,
            representable_in_prior: true,
            kappa0,
        }
    }
}

const VALID_TRUTHS: &str = "constant(c), smooth-sin, smooth-bump, step-jump";

/// Look up a truth by name. `constant(c)` takes a numeric level.
pub fn truth_catalog(name: &str) -> Result<TruthSpec> {
    let unknown = || Error::UnknownTruth {
        name: name.to_string(),
        valid: VALID_TRUTHS.to_string(),
    };
    if let Some(arg) = name
        .strip_prefix("constant(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let c: f64 = arg.trim().parse().map_err(|_| unknown())?;
        if !c.is_finite() {
            return Err(unknown());
        }
        return Ok(TruthSpec {
            name: name.to_string(),
            eta0: TruthField::Rule(TruthRule::Constant(c)),
            sigma0: None,
            representable_in_prior: true,
            kappa0: c.abs() + 1.0,
        });
    }
    let (rule, representable) = match name {
        "smooth-sin" => (TruthRule::SmoothSin, true),
        "smooth-bump" => (TruthRule::SmoothBump, true),
        "step-jump" => (TruthRule::StepJump, false),
        _ => return Err(unknown()),
    };
    Ok(TruthSpec {
        name: name.to_string(),
        eta0: TruthField::Rule(rule),
        sigma0: None,
        representable_in_prior: representable,
        kappa0: 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fixed_grid_single_cell_midpoint() {
        let space = CovariateSpace::new(1).unwrap();
        let s = sample_covariates(
            1,
            SamplingScheme::FixedGrid,
            &space,
            &RngContract::root(0),
        )
        .unwrap();
        assert_eq!(s.points, vec![vec![0.5]]);
        assert!(!s.truncated);
    }

    #[test]
    fn fixed_grid_equal_volume_midpoints() {
        let space = CovariateSpace::new(1).unwrap();
        let s = sample_covariates(
            4,
            SamplingScheme::FixedGrid,
            &space,
            &RngContract::root(0),
        )
        .unwrap();
        let got: Vec<f64> = s.points.iter().map(|p| p[0]).collect();
        assert_eq!(got, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn fixed_grid_truncation_reported() {
        let space = CovariateSpace::new(2).unwrap();
        let s = sample_covariates(
            5,
            SamplingScheme::FixedGrid,
            &space,
            &RngContract::root(0),
        )
        .unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.truncated);
        assert!(s.points.iter().all(|p| space.contains(p)));
    }

    #[test]
    fn zero_sample_rejected() {
        let space = CovariateSpace::new(1).unwrap();
        assert!(sample_covariates(
            0,
            SamplingScheme::IidFromQ,
            &space,
            &RngContract::root(0)
        )
        .is_err());
    }

    #[test]
    fn iid_sample_close_to_uniform() {
        // empirical CDF within Kolmogorov distance 0.02 of U(0,1) at n = 1e4
        let space = CovariateSpace::new(1).unwrap();
        let s = sample_covariates(
            10_000,
            SamplingScheme::IidFromQ,
            &space,
            &RngContract::new(42, "ks"),
        )
        .unwrap();
        let mut xs: Vec<f64> = s.points.iter().map(|p| p[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = (x - i as f64 / n).abs();
                let hi = ((i as f64 + 1.0) / n - x).abs();
                lo.max(hi)
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.02, "KS = {ks}");
    }

    #[test]
    fn interpolation_of_constants() {
        let f = FieldFunction::constant(1, 3.25);
        for &x in &[0.0, 0.3, 0.77, 1.0] {
            assert_eq!(f.eval(&[x]).unwrap(), 3.25);
        }
    }

    #[test]
    fn linear_interpolation_1d() {
        let f = FieldFunction::new(vec![2], vec![0.0, 2.0]).unwrap();
        assert_relative_eq!(f.eval(&[0.25]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_matches_sine_on_fine_grid() {
        let f = FieldFunction::from_fn(vec![401], |x| (2.0 * std::f64::consts::PI * x[0]).sin())
            .unwrap();
        let got = f.eval(&[0.3]).unwrap();
        assert!((got - 0.9510565162951536).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn eval_exact_at_nodes_and_bounded() {
        let f = FieldFunction::from_fn(vec![9, 9], |x| x[0] * x[0] - x[1]).unwrap();
        let coords = f.node_coordinates();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (c, &v) in coords.iter().zip(f.values()) {
            assert_eq!(f.eval(c).unwrap(), v);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for &p in &[[0.13, 0.82], [0.5, 0.5], [0.99, 0.01]] {
            let v = f.eval(&p).unwrap();
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn outside_cube_rejected() {
        let f = FieldFunction::constant(1, 0.0);
        assert!(f.eval(&[1.5]).is_err());
        assert!(f.eval(&[-0.1]).is_err());
    }

    #[test]
    fn catalog_entries() {
        let c = truth_catalog("constant(0)").unwrap();
        assert!(c.representable_in_prior);
        assert_eq!(c.eta0_at(&[0.3]).unwrap(), 0.0);

        let s = truth_catalog("step-jump").unwrap();
        assert!(!s.representable_in_prior);
        assert_eq!(s.eta0_at(&[0.25]).unwrap(), -1.0);
        assert_eq!(s.eta0_at(&[0.5]).unwrap(), 1.0);

        let sine = truth_catalog("smooth-sin").unwrap();
        assert_eq!(sine.kappa0, 2.0);
        assert_relative_eq!(sine.eta0_at(&[0.25]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_truth_lists_valid_names() {
        let err = truth_catalog("nope").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("smooth-sin") && msg.contains("step-jump"), "{msg}");
    }
}
