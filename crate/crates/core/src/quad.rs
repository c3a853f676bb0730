//! The expectation engine over the covariate measure Q (uniform on the cube):
//! tensor Gauss-Legendre quadrature for d ≤ 2 and Monte Carlo for any d,
//! plus a scalar adaptive Simpson rule used by the brute-force KL oracle.

use crate::domain::CovariateSpace;
use crate::rng::RngContract;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Gauss-Legendre nodes and weights on [0,1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Chebyshev-based initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            // map [-1,1] -> [0,1]
            nodes[i] = 0.5 * (1.0 - x); // reverse so nodes are increasing
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫_a^b f
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + scale * t))
            .sum::<f64>()
            * scale
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integration method for expectations over Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TensorQuadrature { nodes_per_axis: usize },
    MonteCarlo { samples: usize },
}

/// A reusable evaluator of E_X[g(X)] with an attached error estimate.
///
/// Tensor quadrature pairs the full rule with an embedded half-resolution
/// rule; the reported error is the difference between the two. Monte Carlo
/// reports the standard error of the sample mean.
#[derive(Debug, Clone)]
pub struct Integrator {
    space: CovariateSpace,
    method: Method,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    coarse_points: Vec<Vec<f64>>,
    coarse_weights: Vec<f64>,
}

fn tensor_rule(space: &CovariateSpace, nodes_per_axis: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = space.dim();
    let gl = GaussLegendre::new(nodes_per_axis);
    let mut points = vec![vec![]];
    let mut weights = vec![1.0f64];
    for _ in 0..d {
        let mut np = Vec::with_capacity(points.len() * nodes_per_axis);
        let mut nw = Vec::with_capacity(points.len() * nodes_per_axis);
        for (p, w) in points.iter().zip(&weights) {
            for (x, wx) in gl.nodes().iter().zip(gl.weights()) {
                let mut q = p.clone();
                q.push(*x);
                np.push(q);
                nw.push(w * wx);
            }
        }
        points = np;
        weights = nw;
    }
    (points, weights)
}

impl Integrator {
    pub fn tensor(space: CovariateSpace, nodes_per_axis: usize) -> Self {
        let (points, weights) = tensor_rule(&space, nodes_per_axis);
        let coarse_n = (nodes_per_axis / 2).max(1);
        let (coarse_points, coarse_weights) = tensor_rule(&space, coarse_n);
        Self {
            space,
            method: Method::TensorQuadrature { nodes_per_axis },
            points,
            weights,
            coarse_points,
            coarse_weights,
        }
    }

    /// Default resolution: 64 nodes per axis for d=1, 32 for d≥2.
    pub fn default_for(space: CovariateSpace) -> Self {
        let n = if space.dim() == 1 { 64 } else { 32 };
        Self::tensor(space, n)
    }

    pub fn monte_carlo(space: CovariateSpace, samples: usize, rng: &RngContract) -> Self {
        let mut r = rng.rng();
        let d = space.dim();
        let points: Vec<Vec<f64>> = (0..samples)
            .map(|_| (0..d).map(|_| r.gen::<f64>()).collect())
            .collect();
        let w = 1.0 / samples as f64;
        Self {
            space,
            method: Method::MonteCarlo { samples },
            weights: vec![w; points.len()],
            coarse_points: Vec::new(),
            coarse_weights: Vec::new(),
            points,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn space(&self) -> CovariateSpace {
        self.space
    }

    /// Evaluation points of the full rule (quadrature nodes or MC draws).
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E_X[g(X)] with an error estimate. Non-finite evaluations abort with
    /// the offending location.
    pub fn expect(&self, mut g: impl FnMut(&[f64]) -> f64) -> Result<(f64, f64)> {
        let mut full = 0.0;
        let mut sq = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let v = g(p);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand(p.clone()));
            }
            full += w * v;
            sq += w * v * v;
        }
        let err = match self.method {
            Method::TensorQuadrature { .. } => {
                let mut coarse = 0.0;
                for (p, w) in self.coarse_points.iter().zip(&self.coarse_weights) {
                    let v = g(p);
                    if !v.is_finite() {
                        return Err(Error::NonFiniteIntegrand(p.clone()));
                    }
                    coarse += w * v;
                }
                (full - coarse).abs().max(1e-14 * full.abs())
            }
            Method::MonteCarlo { samples } => {
                let var = (sq - full * full).max(0.0);
                (var / samples as f64).sqrt()
            }
        };
        Ok((full, err))
    }

    /// Weighted sum over the full rule's points given pre-tabulated values,
    /// in the order of [`Integrator::points`].
    pub fn expect_at_points(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.points.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// One-shot E_X[g(X)].
pub fn expect_over_q(
    g: impl FnMut(&[f64]) -> f64,
    space: CovariateSpace,
    method: Method,
    rng: &RngContract,
) -> Result<(f64, f64)> {
    let integrator = match method {
        Method::TensorQuadrature { nodes_per_axis } => Integrator::tensor(space, nodes_per_axis),
        Method::MonteCarlo { samples } => Integrator::monte_carlo(space, samples, rng),
    };
    integrator.expect(g)
}

/// Adaptive Simpson quadrature on [a,b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space1() -> CovariateSpace {
        CovariateSpace::new(1).unwrap()
    }

    #[test]
    fn normalization_of_q() {
        let integ = Integrator::tensor(space1(), 16);
        let (v, err) = integ.expect(|_| 1.0).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-14);
        assert!(err < 1e-13);
    }

    #[test]
    fn mean_of_uniform() {
        let integ = Integrator::tensor(space1(), 16);
        let (v, _) = integ.expect(|x| x[0]).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_for_x_squared() {
        let integ = Integrator::tensor(space1(), 64);
        let (v, _) = integ.expect(|x| x[0] * x[0]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_polynomial_exactness_2d() {
        let integ = Integrator::tensor(CovariateSpace::new(2).unwrap(), 8);
        // ∫∫ x³y² = (1/4)(1/3)
        let (v, _) = integ.expect(|x| x[0].powi(3) * x[1].powi(2)).unwrap();
        assert_relative_eq!(v, 1.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_integrand_reports_location() {
        let integ = Integrator::tensor(space1(), 8);
        let err = integ
            .expect(|x| if x[0] > 0.5 { f64::NAN } else { 1.0 })
            .unwrap_err();
        match err {
            Error::NonFiniteIntegrand(loc) => assert!(loc[0] > 0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn linearity_over_random_test_functions() {
        use rand::Rng;
        let integ = Integrator::tensor(space1(), 32);
        let mut rng = RngContract::new(3, "linearity").rng();
        for _ in 0..20 {
            let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let c: f64 = rng.gen_range(0.5..3.0);
            let g1 = |x: &[f64]| (c * x[0]).sin();
            let g2 = |x: &[f64]| (x[0] - 0.3).powi(2);
            let (v1, e1) = integ.expect(g1).unwrap();
            let (v2, e2) = integ.expect(g2).unwrap();
            let (vc, ec) = integ.expect(|x| a * g1(x) + b * g2(x)).unwrap();
            let tol = a.abs() * e1 + b.abs() * e2 + ec + 1e-12;
            assert!((vc - (a * v1 + b * v2)).abs() <= tol);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature_on_random_polynomials() {
        use rand::Rng;
        let quad = Integrator::tensor(space1(), 64);
        let mut coeff_rng = RngContract::new(9, "poly").rng();
        for trial in 0..20 {
            let coeffs: Vec<f64> = (0..4).map(|_| coeff_rng.gen_range(-1.0..1.0)).collect();
            let g = |x: &[f64]| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * x[0].powi(k as i32))
                    .sum::<f64>()
            };
            let (vq, eq) = quad.expect(g).unwrap();
            let mc = Integrator::monte_carlo(
                space1(),
                200_000,
                &RngContract::new(9, format!("mc/{trial}")),
            );
            let (vm, em) = mc.expect(g).unwrap();
            assert!(
                (vq - vm).abs() <= 3.0 * (eq + em),
                "trial {trial}: {vq} vs {vm} ± {em}"
            );
        }
    }

    #[test]
    fn fixed_grid_average_converges_for_lipschitz_g() {
        // |mean over grid − integral| ≤ Lip(g)·L/n in d=1 (L = 1)
        use crate::domain::{sample_covariates, SamplingScheme};
        let g = |x: f64| (3.0 * x).cos(); // Lipschitz constant 3
        let integ = Integrator::tensor(space1(), 64);
        let (target, _) = integ.expect(|x| g(x[0])).unwrap();
        for &n in &[16usize, 64, 256] {
            let s = sample_covariates(
                n,
                SamplingScheme::FixedGrid,
                &space1(),
                &RngContract::root(0),
            )
            .unwrap();
            let avg = s.points.iter().map(|p| g(p[0])).sum::<f64>() / n as f64;
            assert!(
                (avg - target).abs() <= 3.0 / n as f64,
                "n={n}: |{avg} − {target}|"
            );
        }
    }

    #[test]
    fn adaptive_simpson_standard_normal_mass() {
        let phi =
            |x: f64| (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = adaptive_simpson(&phi, -12.0, 12.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }
}
