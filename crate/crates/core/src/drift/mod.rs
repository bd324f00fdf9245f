//! Terminal-measure drift of the log-LIBOR rates.
//!
//! For rate `i` with weights `w_l = delta_l L_l / (1 + delta_l L_l)` of the
//! later rates, the drift is
//!
//! ```text
//! b_i = -1/2 lambda_i^2 c - c lambda_i sum_l w_l lambda_l - A_i
//! A_i = int (e^{lambda_i x} - 1) prod_l (1 + w_l (e^{lambda_l x} - 1)) - lambda_i x  F(dx)
//! ```
//!
//! `A_i` is evaluated exactly from the jump cumulant, or through its first
//! and second order expansions in the weights.

mod plan;
mod symmetric;

pub use plan::{DriftKernel, DriftPlan, Expansion, TailState};
pub use symmetric::{elementary_symmetric, elementary_symmetric_all};

use std::ops::AddAssign;

use thiserror::Error;

use crate::levy::{Cumulant, DomainError};

/// Default largest tail `N - i` accepted by the exact expansion.
pub const DEFAULT_FULL_CAP: usize = 25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriftError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("exact drift over {tail} later rates exceeds the cap of {cap}")]
    SizeGuard { tail: usize, cap: usize },
    #[error("{weights} weights but {loadings} loadings")]
    Shape { weights: usize, loadings: usize },
    #[error("weight {value} at position {index} is outside [0, 1)")]
    Weight { index: usize, value: f64 },
    #[error("degree {k} exceeds the number of values {len}")]
    Degree { k: usize, len: usize },
    #[error("drift tables would hold {entries} entries (limit {limit}); use the direct kernel")]
    TableTooLarge { entries: usize, limit: usize },
}

/// Which drift is used when evolving the rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DriftMode {
    #[default]
    Full,
    FirstOrder,
    SecondOrder,
    /// The exact drift evaluated at the initial rates.
    Frozen,
}

impl DriftMode {
    pub const ALL: [DriftMode; 4] = [
        DriftMode::Full,
        DriftMode::FirstOrder,
        DriftMode::SecondOrder,
        DriftMode::Frozen,
    ];

    /// Expansion used for the jump part.
    pub fn expansion(self) -> Expansion {
        match self {
            DriftMode::Full | DriftMode::Frozen => Expansion::Full,
            DriftMode::FirstOrder => Expansion::FirstOrder,
            DriftMode::SecondOrder => Expansion::SecondOrder,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DriftMode::Full => "full",
            DriftMode::FirstOrder => "first",
            DriftMode::SecondOrder => "second",
            DriftMode::Frozen => "frozen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Some(DriftMode::Full),
            "first" | "firstorder" | "first_order" => Some(DriftMode::FirstOrder),
            "second" | "secondorder" | "second_order" => Some(DriftMode::SecondOrder),
            "frozen" => Some(DriftMode::Frozen),
            _ => None,
        }
    }
}

/// Operation counters for drift evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DriftCost {
    pub cumulant_evals: u64,
    pub multiply_adds: u64,
}

impl AddAssign for DriftCost {
    fn add_assign(&mut self, rhs: Self) {
        self.cumulant_evals += rhs.cumulant_evals;
        self.multiply_adds += rhs.multiply_adds;
    }
}

impl DriftCost {
    /// Cumulant evaluations of the exact expansion for a tail of `n` rates.
    pub fn full_evals(n: usize) -> u64 {
        (1u64 << (n + 1)) - 1
    }

    /// Cumulant evaluations of the subset inclusion-exclusion route,
    /// `sum_S (2^{|S|+1} - 1) = 2 3^n - 2^n`.
    pub fn inclusion_exclusion_evals(n: usize) -> u64 {
        2 * 3u64.pow(n as u32) - (1u64 << n)
    }

    pub fn first_order_evals(n: usize) -> u64 {
        1 + 2 * n as u64
    }

    pub fn second_order_evals(n: usize) -> u64 {
        let n = n as u64;
        n * n + n + 1
    }
}

/// A drift value with the work spent on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftValue {
    pub value: f64,
    pub cost: DriftCost,
}

/// Everything the drift of one rate depends on.
#[derive(Clone, Copy)]
pub struct DriftInputs<'a> {
    pub rate: usize,
    pub time: f64,
    /// `lambda(s, T_i)`.
    pub loading: f64,
    /// `w_l` for `l = i+1..N`.
    pub weights: &'a [f64],
    /// `lambda(s, T_l)` for `l = i+1..N`.
    pub loadings: &'a [f64],
    /// Brownian coefficient `c_s`.
    pub diffusion: f64,
    /// Jump cumulant `int (e^{zx} - 1 - zx) F(dx)`.
    pub cumulant: &'a dyn Cumulant,
}

impl DriftInputs<'_> {
    fn check(&self) -> Result<(), DriftError> {
        if self.weights.len() != self.loadings.len() {
            return Err(DriftError::Shape {
                weights: self.weights.len(),
                loadings: self.loadings.len(),
            });
        }
        for (index, &value) in self.weights.iter().enumerate() {
            if !(0.0..1.0).contains(&value) {
                return Err(DriftError::Weight { index, value });
            }
        }
        Ok(())
    }

    fn tail(&self) -> usize {
        self.weights.len()
    }
}

/// `w = delta L / (1 + delta L)` from the log-rate `z = log L`.
#[inline]
pub fn weight_from_log(z: f64, accrual: f64) -> f64 {
    let x = accrual * z.exp();
    x / (1.0 + x)
}

/// Exact jump drift `A_i` with the default size cap.
pub fn jump_drift_full(inputs: &DriftInputs) -> Result<DriftValue, DriftError> {
    jump_drift_full_capped(inputs, DEFAULT_FULL_CAP)
}

/// Exact jump drift `A_i`.
///
/// Expanding `prod_l ((1 - w_l) + w_l e^{lambda_l x})` over subsets `U` of
/// the later rates turns the integrand into a mixture, so that
/// `A_i = sum_U p_U (kappa(lambda_i + Lambda_U) - kappa(Lambda_U))` with
/// `p_U = prod_{l in U} w_l prod_{l not in U} (1 - w_l)` and
/// `Lambda_U = sum_{l in U} lambda_l`. This costs `2^{n+1} - 1` cumulant
/// evaluations for a tail of `n` rates.
pub fn jump_drift_full_capped(inputs: &DriftInputs, cap: usize) -> Result<DriftValue, DriftError> {
    inputs.check()?;
    let n = inputs.tail();
    if n > cap {
        return Err(DriftError::SizeGuard { tail: n, cap });
    }
    let mut cost = DriftCost::default();
    let value = mixture(inputs, 0, 0.0, 1.0, false, &mut cost)?;
    Ok(DriftValue { value, cost })
}

fn mixture(
    inputs: &DriftInputs,
    k: usize,
    lambda_sum: f64,
    prob: f64,
    any: bool,
    cost: &mut DriftCost,
) -> Result<f64, DriftError> {
    let kappa = inputs.cumulant;
    if k == inputs.tail() {
        let mut d = kappa.eval(inputs.loading + lambda_sum)?;
        cost.cumulant_evals += 1;
        if any {
            d -= kappa.eval(lambda_sum)?;
            cost.cumulant_evals += 1;
        }
        cost.multiply_adds += 1;
        return Ok(prob * d);
    }
    let w = inputs.weights[k];
    cost.multiply_adds += 2;
    let without = mixture(inputs, k + 1, lambda_sum, prob * (1.0 - w), any, cost)?;
    let with = mixture(inputs, k + 1, lambda_sum + inputs.loadings[k], prob * w, true, cost)?;
    Ok(without + with)
}

/// Exact jump drift through the weight expansion
/// `A_i = sum_S prod_{l in S} w_l J(S)` with
/// `J(S) = int (e^{lambda_i x} - 1) prod_{l in S} (e^{lambda_l x} - 1) F(dx)`,
/// each `J` written as an alternating sum of cumulants. Exponentially
/// more expensive than [`jump_drift_full`]; kept as an independent route.
pub fn jump_drift_inclusion_exclusion(inputs: &DriftInputs, cap: usize) -> Result<DriftValue, DriftError> {
    inputs.check()?;
    let n = inputs.tail();
    if n > cap {
        return Err(DriftError::SizeGuard { tail: n, cap });
    }
    let kappa = inputs.cumulant;
    let mut cost = DriftCost::default();
    let mut total = 0.0;
    for s in 0u64..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|l| s & (1 << l) != 0).collect();
        let weight: f64 = members.iter().map(|&l| inputs.weights[l]).product();
        let size = members.len();
        // V ranges over nonempty subsets of {i} u S; bit `size` marks i
        let mut j = 0.0;
        for v in 1u64..(1 << (size + 1)) {
            let mut arg = 0.0;
            for (b, &l) in members.iter().enumerate() {
                if v & (1 << b) != 0 {
                    arg += inputs.loadings[l];
                }
            }
            if v & (1 << size) != 0 {
                arg += inputs.loading;
            }
            let sign = if (size + 1 - v.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
            j += sign * kappa.eval(arg)?;
            cost.cumulant_evals += 1;
            cost.multiply_adds += 1;
        }
        total += weight * j;
        cost.multiply_adds += size as u64 + 1;
    }
    Ok(DriftValue { value: total, cost })
}

/// First-order expansion
/// `kappa(lambda_i) + sum_l w_l (kappa(lambda_i + lambda_l) - kappa(lambda_i) - kappa(lambda_l))`.
pub fn jump_drift_first_order(inputs: &DriftInputs) -> Result<DriftValue, DriftError> {
    inputs.check()?;
    let kappa = inputs.cumulant;
    let ki = kappa.eval(inputs.loading)?;
    let mut value = ki;
    for (&w, &lam) in inputs.weights.iter().zip(inputs.loadings) {
        let pair = kappa.eval(inputs.loading + lam)? - ki - kappa.eval(lam)?;
        value += w * pair;
    }
    let n = inputs.tail();
    Ok(DriftValue {
        value,
        cost: DriftCost {
            cumulant_evals: DriftCost::first_order_evals(n),
            multiply_adds: n as u64,
        },
    })
}

/// Second-order expansion: the first-order value plus
/// `sum_{k<l} w_k w_l` times the third-order cumulant combination.
pub fn jump_drift_second_order(inputs: &DriftInputs) -> Result<DriftValue, DriftError> {
    inputs.check()?;
    let kappa = inputs.cumulant;
    let n = inputs.tail();
    let li = inputs.loading;
    let ki = kappa.eval(li)?;
    let mut single = Vec::with_capacity(n);
    let mut with_i = Vec::with_capacity(n);
    for &lam in inputs.loadings {
        single.push(kappa.eval(lam)?);
        with_i.push(kappa.eval(li + lam)?);
    }
    let mut value = ki;
    for l in 0..n {
        value += inputs.weights[l] * (with_i[l] - ki - single[l]);
    }
    let mut madds = n as u64;
    for l in 0..n {
        for k in 0..l {
            let (lk, ll) = (inputs.loadings[k], inputs.loadings[l]);
            let triple = kappa.eval(li + ll + lk)? - with_i[l] - with_i[k] - kappa.eval(lk + ll)?
                + ki
                + single[l]
                + single[k];
            value += inputs.weights[k] * inputs.weights[l] * triple;
            madds += 2;
        }
    }
    Ok(DriftValue {
        value,
        cost: DriftCost {
            cumulant_evals: DriftCost::second_order_evals(n),
            multiply_adds: madds,
        },
    })
}

/// `-1/2 lambda_i^2 c - c lambda_i sum_l w_l lambda_l`.
pub fn brownian_drift(inputs: &DriftInputs) -> f64 {
    let c = inputs.diffusion;
    let cross: f64 = inputs.weights.iter().zip(inputs.loadings).map(|(w, l)| w * l).sum();
    -0.5 * inputs.loading * inputs.loading * c - c * inputs.loading * cross
}

/// Complete drift `b_i` in the requested mode. For [`DriftMode::Frozen`]
/// the caller supplies weights built from the initial curve and the exact
/// expansion is used.
pub fn total_drift(inputs: &DriftInputs, mode: DriftMode) -> Result<DriftValue, DriftError> {
    let jump = match mode.expansion() {
        Expansion::Full => jump_drift_full(inputs)?,
        Expansion::FirstOrder => jump_drift_first_order(inputs)?,
        Expansion::SecondOrder => jump_drift_second_order(inputs)?,
    };
    Ok(DriftValue {
        value: brownian_drift(inputs) - jump.value,
        cost: jump.cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyDriverSpec, LevyMeasureQuadrature, NigParams};

    fn reference_driver() -> LevyDriverSpec {
        LevyDriverSpec::nig(NigParams::symmetric(12.0, 12.0).unwrap())
    }

    fn flat_weights(n: usize) -> Vec<f64> {
        let l = 2.0 * (0.02f64.exp() - 1.0);
        vec![0.5 * l / (1.0 + 0.5 * l); n]
    }

    fn inputs<'a>(d: &'a LevyDriverSpec, w: &'a [f64], lam: &'a [f64], li: f64) -> DriftInputs<'a> {
        DriftInputs {
            rate: 1,
            time: 0.0,
            loading: li,
            weights: w,
            loadings: lam,
            diffusion: d.diffusion,
            cumulant: d,
        }
    }

    fn quadrature_drift(q: &LevyMeasureQuadrature, w: &[f64], lam: &[f64], li: f64) -> f64 {
        q.integrate(|x: f64| {
            let prod: f64 = w.iter().zip(lam).map(|(w, l)| 1.0 + w * (l * x).exp_m1()).product();
            (li * x).exp_m1() * prod - li * x
        })
        .unwrap()
        .value
    }

    #[test]
    fn last_rate_drift_is_cumulant() {
        let d = reference_driver();
        let x = inputs(&d, &[], &[], 0.18);
        let a = jump_drift_full(&x).unwrap();
        let expected = 12.0 * 0.0324 / (12.0 + (144.0f64 - 0.0324).sqrt());
        assert!((a.value - expected).abs() < 1e-17);
        assert!((a.value - 0.0162009).abs() < 5e-8);
        assert_eq!(a.cost.cumulant_evals, 1);
        for mode in DriftMode::ALL {
            assert_eq!(total_drift(&x, mode).unwrap().value, -a.value);
        }
    }

    #[test]
    fn zero_weights_leave_cumulant() {
        let d = reference_driver();
        let w = [0.0; 5];
        let lam = [0.18; 5];
        let x = inputs(&d, &w, &lam, 0.18);
        let k = d.jump_cumulant(0.18).unwrap();
        assert_eq!(jump_drift_full(&x).unwrap().value, k);
        assert_eq!(jump_drift_first_order(&x).unwrap().value, k);
        assert_eq!(jump_drift_second_order(&x).unwrap().value, k);
    }

    #[test]
    fn full_matches_quadrature() {
        let d = reference_driver();
        let q = LevyMeasureQuadrature::with_defaults(&d);
        for n in 1..=8 {
            let w = flat_weights(n);
            let lam = vec![0.18; n];
            let x = inputs(&d, &w, &lam, 0.18);
            let exact = jump_drift_full(&x).unwrap().value;
            let quad = quadrature_drift(&q, &w, &lam, 0.18);
            assert!((exact - quad).abs() < 1e-7, "n={n}: {exact} vs {quad}");
        }
    }

    #[test]
    fn full_matches_quadrature_for_uneven_inputs() {
        let d = LevyDriverSpec::nig(NigParams::new(10.0, -1.5, 0.2, 6.0).unwrap());
        let q = LevyMeasureQuadrature::with_defaults(&d);
        let w = [0.3, 0.01, 0.6, 0.12];
        let lam = [0.5, -0.7, 1.1, 0.25];
        let x = inputs(&d, &w, &lam, 0.9);
        let exact = jump_drift_full(&x).unwrap().value;
        let quad = quadrature_drift(&q, &w, &lam, 0.9);
        assert!((exact - quad).abs() < 1e-8 * exact.abs().max(1.0), "{exact} vs {quad}");
    }

    #[test]
    fn two_exact_routes_agree() {
        let d = LevyDriverSpec::nig(NigParams::new(9.0, 0.8, 0.0, 4.0).unwrap());
        let w = [0.2, 0.05, 0.4, 0.33, 0.01, 0.7];
        let lam = [0.3, 0.1, 0.25, 0.6, 0.45, 0.2];
        for n in 0..=w.len() {
            let x = inputs(&d, &w[..n], &lam[..n], 0.35);
            let a = jump_drift_full(&x).unwrap();
            let b = jump_drift_inclusion_exclusion(&x, 25).unwrap();
            assert!((a.value - b.value).abs() < 1e-13, "n={n}");
            assert_eq!(a.cost.cumulant_evals, DriftCost::full_evals(n));
            assert_eq!(b.cost.cumulant_evals, DriftCost::inclusion_exclusion_evals(n));
        }
    }

    #[test]
    fn expansion_ordering_on_realistic_weights() {
        let d = reference_driver();
        let mut seed = 17u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let k = |m: f64| d.jump_cumulant(m * 0.18).unwrap();
        // integrals of (e^{lambda x} - 1)^3 and (e^{lambda x} - 1)^4
        let j2 = (k(3.0) - 3.0 * k(2.0) + 3.0 * k(1.0)).abs();
        let j3 = (k(4.0) - 4.0 * k(3.0) + 6.0 * k(2.0) - 4.0 * k(1.0)).abs();
        for n in 3..=8 {
            for _ in 0..20 {
                let w: Vec<f64> = (0..n).map(|_| 0.05 * next()).collect();
                let lam = vec![0.18; n];
                let x = inputs(&d, &w, &lam, 0.18);
                let full = jump_drift_full(&x).unwrap().value;
                let e1 = (jump_drift_first_order(&x).unwrap().value - full).abs();
                let e2 = (jump_drift_second_order(&x).unwrap().value - full).abs();
                assert!(e2 <= e1, "n={n}: {e2} > {e1}");
                let wmax = w.iter().copied().fold(0.0, f64::max);
                let nf = n as f64;
                assert!(e1 <= nf * nf * wmax * wmax * j2, "n={n}: {e1}");
                assert!(e2 <= nf * nf * nf * wmax.powi(3) * j3.max(j2), "n={n}: {e2}");
            }
        }
    }

    #[test]
    fn degree_exactness() {
        let d = reference_driver();
        let w = [0.3, 0.6];
        let lam = [0.18, 0.25];
        let x1 = inputs(&d, &w[..1], &lam[..1], 0.2);
        assert!((jump_drift_first_order(&x1).unwrap().value - jump_drift_full(&x1).unwrap().value).abs() < 1e-12);
        let x2 = inputs(&d, &w, &lam, 0.2);
        assert!((jump_drift_second_order(&x2).unwrap().value - jump_drift_full(&x2).unwrap().value).abs() < 1e-12);
        assert!((jump_drift_first_order(&x2).unwrap().value - jump_drift_full(&x2).unwrap().value).abs() > 1e-6);
    }

    #[test]
    fn first_order_single_unit_weight() {
        let d = reference_driver();
        let k = |z| d.jump_cumulant(z).unwrap();
        // w = 1 is outside [0, 1); evaluate the formula by linearity in w
        let at0 = jump_drift_first_order(&inputs(&d, &[0.0], &[0.18], 0.18)).unwrap().value;
        let xh = inputs(&d, &[0.5], &[0.18], 0.18);
        let at_half = jump_drift_first_order(&xh).unwrap().value;
        let at1 = 2.0 * at_half - at0;
        assert!((at1 - (k(0.36) - k(0.18))).abs() < 1e-15);
    }

    #[test]
    fn desk_scale_second_order_close_to_full() {
        let d = reference_driver();
        let w = flat_weights(8);
        let lam = vec![0.18; 8];
        let x = inputs(&d, &w, &lam, 0.18);
        let full = jump_drift_full(&x).unwrap().value;
        let second = jump_drift_second_order(&x).unwrap().value;
        assert!((full - second).abs() < 1e-6);
    }

    #[test]
    fn cost_counts() {
        let d = reference_driver();
        for n in 0..=10 {
            let w = flat_weights(n);
            let lam = vec![0.18; n];
            let x = inputs(&d, &w, &lam, 0.18);
            let full = jump_drift_full(&x).unwrap().cost.cumulant_evals;
            assert_eq!(full, (1u64 << (n + 1)) - 1);
            assert!(full >= 1 << n);
            assert_eq!(jump_drift_first_order(&x).unwrap().cost.cumulant_evals, 1 + 2 * n as u64);
            let second = jump_drift_second_order(&x).unwrap().cost.cumulant_evals;
            assert_eq!(second, (n * n + n + 1) as u64);
        }
    }

    #[test]
    fn size_guard_and_input_checks() {
        let d = reference_driver();
        let w = vec![0.01; 26];
        let lam = vec![0.01; 26];
        let x = inputs(&d, &w, &lam, 0.01);
        assert_eq!(
            jump_drift_full(&x).unwrap_err(),
            DriftError::SizeGuard { tail: 26, cap: 25 }
        );
        assert!(jump_drift_full_capped(&x, 2).is_err());
        assert!(jump_drift_first_order(&inputs(&d, &[0.1], &[], 0.1)).is_err());
        assert!(jump_drift_first_order(&inputs(&d, &[1.0], &[0.1], 0.1)).is_err());
        let big = inputs(&d, &[0.1, 0.1], &[6.0, 6.0], 1.0);
        assert!(matches!(jump_drift_full(&big), Err(DriftError::Domain(_))));
    }

    #[test]
    fn brownian_part() {
        let d = reference_driver().with_diffusion(1.0).unwrap();
        assert!((brownian_drift(&inputs(&d, &[], &[], 0.2)) + 0.02).abs() < 1e-16);
        assert!((brownian_drift(&inputs(&d, &[0.5], &[0.2], 0.2)) + 0.04).abs() < 1e-16);
        assert_eq!(brownian_drift(&inputs(&reference_driver(), &[0.5], &[0.2], 0.2)), 0.0);
    }

    #[test]
    fn frozen_inputs_give_time_invariant_drift() {
        let d = reference_driver();
        let w = flat_weights(4);
        let lam = [0.18; 4];
        let at = |t| {
            let x = DriftInputs {
                time: t,
                ..inputs(&d, &w, &lam, 0.18)
            };
            total_drift(&x, DriftMode::Frozen).unwrap().value
        };
        assert_eq!(at(0.0), at(1.0));
    }
}
