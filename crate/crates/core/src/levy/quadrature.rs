//! Quadrature over the NIG Levy measure.
//!
//! The NIG Levy density is
//!
//! ```text
//! f(x) = (delta_bar alpha / pi) e^{beta x} K_1(alpha |x|) / |x|
//! ```
//!
//! which behaves like `delta_bar / (pi x^2)` at the origin. Each half-line
//! is cut into panels that are geometric near zero and unit-width further
//! out, and a Gauss-Legendre rule is applied on every panel with the
//! density folded into the weights. A small ball `[-eps, eps]` is handled
//! by the second-order Taylor term of the integrand against the limiting
//! small-jump density. A second rule with every panel halved and a longer
//! truncation radius provides the refinement check.

use std::f64::consts::PI;

use super::driver::LevyDriverSpec;
use super::QuadratureError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Radius of the ball around the origin treated by Taylor expansion.
    pub ball: f64,
    /// Truncation radius; `None` picks `460 / (alpha - |beta|)`.
    pub radius: Option<f64>,
    /// Gauss-Legendre points per panel.
    pub points_per_panel: usize,
    /// Relative tolerance for the refinement check.
    pub tolerance: f64,
    /// Absolute floor under which refinement differences are ignored.
    pub absolute_floor: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            ball: 1e-6,
            radius: None,
            points_per_panel: 20,
            tolerance: 1e-9,
            absolute_floor: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn apply<G: Fn(f64) -> f64>(&self, g: &G) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// Precomputed nodes and density-weighted weights over `R \ {0}`.
#[derive(Debug, Clone)]
pub struct LevyMeasureQuadrature {
    coarse: Rule,
    fine: Rule,
    ball: f64,
    ball_mass: f64,
    radius: f64,
    options: QuadratureOptions,
}

/// A quadrature value together with the coarse/fine discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureValue {
    pub value: f64,
    pub error_estimate: f64,
}

impl LevyMeasureQuadrature {
    pub fn new(spec: &LevyDriverSpec, options: QuadratureOptions) -> Self {
        let nig = spec.nig;
        let decay = nig.alpha - nig.beta.abs();
        let radius = options.radius.unwrap_or(460.0 / decay);
        let density = |x: f64| {
            let ax = nig.alpha * x.abs();
            nig.delta_bar * nig.alpha / PI * (nig.beta * x - ax).exp() * bessel_k1_scaled(ax) / x.abs()
        };
        let coarse = build_rule(&density, options.ball, radius, options.points_per_panel, 1);
        let fine = build_rule(&density, options.ball, radius * 1.5, options.points_per_panel, 2);
        Self {
            coarse,
            fine,
            ball: options.ball,
            ball_mass: nig.delta_bar / PI,
            radius,
            options,
        }
    }

    pub fn with_defaults(spec: &LevyDriverSpec) -> Self {
        Self::new(spec, QuadratureOptions::default())
    }

    pub fn node_count(&self) -> usize {
        self.coarse.nodes.len()
    }

    pub fn truncation_radius(&self) -> f64 {
        self.radius
    }

    /// Nodes and weights of the base rule (ball excluded).
    pub fn nodes_and_weights(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coarse.nodes.iter().copied().zip(self.coarse.weights.iter().copied())
    }

    fn ball_term<G: Fn(f64) -> f64>(&self, g: &G) -> f64 {
        // g(x) ~ g''(0) x^2 / 2 and x^2 f(x) -> delta_bar / pi on the ball
        (g(self.ball) + g(-self.ball)) * self.ball_mass / self.ball
    }

    /// `int g(x) F(dx)` for an integrand that is `O(x^2)` at the origin.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> Result<QuadratureValue, QuadratureError> {
        let ball = self.ball_term(&g);
        let coarse = self.coarse.apply(&g) + ball;
        let fine = self.fine.apply(&g) + ball;
        let error = (fine - coarse).abs();
        if !fine.is_finite() {
            return Err(QuadratureError::NonFinite);
        }
        let allowed = self.options.tolerance * fine.abs().max(self.options.absolute_floor / self.options.tolerance);
        if error > allowed {
            return Err(QuadratureError::NotConverged {
                coarse,
                fine,
                tolerance: allowed,
            });
        }
        Ok(QuadratureValue {
            value: fine,
            error_estimate: error,
        })
    }
}

fn build_rule<D: Fn(f64) -> f64>(density: &D, ball: f64, radius: f64, points: usize, split: usize) -> Rule {
    let mut edges = vec![ball];
    let mut x = ball;
    while x < 1.0 {
        x = (2.0 * x).min(1.0);
        edges.push(x);
    }
    while x < radius {
        x = (x + 1.0).min(radius);
        edges.push(x);
    }
    let (gl_nodes, gl_weights) = gauss_legendre(points);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in edges.windows(2) {
        for part in 0..split {
            let width = (pair[1] - pair[0]) / split as f64;
            let a = pair[0] + part as f64 * width;
            let half = 0.5 * width;
            let mid = a + half;
            for (t, w) in gl_nodes.iter().zip(&gl_weights) {
                let x = mid + half * t;
                for sx in [x, -x] {
                    nodes.push(sx);
                    weights.push(half * w * density(sx));
                }
            }
        }
    }
    Rule { nodes, weights }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `e^z K_1(z)` for `z > 0` from `K_1(z) = int_0^inf e^{-z cosh t} cosh t dt`
/// with the trapezoidal rule, which converges geometrically for this
/// entire integrand.
pub fn bessel_k1_scaled(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    let h = 0.1 * (3.0 / z.sqrt()).min(1.0);
    // stop once z (cosh t - 1) exceeds ~50 plus the log of the peak size
    let reach = (50.0 + (1.0 / z).ln().max(0.0)) / z;
    let t_max = (1.0 + reach).acosh();
    let steps = (t_max / h).ceil() as usize;
    let mut sum = 0.5;
    for k in 1..=steps {
        let t = k as f64 * h;
        let s = (0.5 * t).sinh();
        sum += (-2.0 * z * s * s).exp() * t.cosh();
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::NigParams;

    fn reference_driver() -> LevyDriverSpec {
        LevyDriverSpec::nig(NigParams::symmetric(12.0, 12.0).unwrap())
    }

    #[test]
    fn k1_reference_values() {
        // scipy.special.k1 / k1e
        let cases = [
            (1.0, 0.6019072301972346),
            (0.1, 9.853844780870606),
            (10.0, 1.8648773453825585e-05),
            (1e-5, 99999.9999393557),
        ];
        for (z, k1) in cases {
            let got = bessel_k1_scaled(z) * (-z as f64).exp();
            assert!((got / k1 - 1.0).abs() < 1e-13, "K1({z}) = {got}, want {k1}");
        }
        assert!((bessel_k1_scaled(300.0) / 0.0724504816672584 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m38: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((m38 - 2.0 / 39.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!(x1, vec![0.0]);
        assert!((w1[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_integrand() {
        let q = LevyMeasureQuadrature::with_defaults(&reference_driver());
        assert_eq!(q.integrate(|_| 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn reproduces_cumulant() {
        let d = reference_driver();
        let q = LevyMeasureQuadrature::with_defaults(&d);
        for z in [0.18, 0.36, -2.0, 5.0, 10.8, -10.8] {
            let got = q.integrate(|x: f64| (z * x).exp_m1() - z * x).unwrap().value;
            let want = d.jump_cumulant(z).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.abs(), "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn reproduces_skewed_cumulant() {
        let d = LevyDriverSpec::nig(NigParams::new(9.0, -2.5, 0.4, 1.7).unwrap());
        let q = LevyMeasureQuadrature::with_defaults(&d);
        for z in [0.5, -3.0, 5.0] {
            let got = q.integrate(|x: f64| (z * x).exp_m1() - z * x).unwrap().value;
            let want = d.jump_cumulant(z).unwrap();
            assert!((got - want).abs() <= 1e-8 * want.abs(), "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn second_moment_is_variance() {
        let d = reference_driver();
        let q = LevyMeasureQuadrature::with_defaults(&d);
        let m2 = q.integrate(|x| x * x).unwrap().value;
        assert!((m2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flags_integrands_beyond_the_moment_bound() {
        let d = reference_driver();
        let q = LevyMeasureQuadrature::with_defaults(&d);
        let r = q.integrate(|x: f64| (11.95 * x).exp_m1() - 11.95 * x);
        assert!(matches!(r, Err(QuadratureError::NotConverged { .. })), "{r:?}");
    }
}
