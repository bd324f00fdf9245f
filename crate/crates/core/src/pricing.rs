//! Payoffs under the terminal measure and Black-76 reporting.

use std::fmt;

use statrs::function::erf::erfc;
use thiserror::Error;

use crate::market::{InitialCurve, TenorStructure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("{product}: index {index} outside 1..={n_rates}")]
    Index {
        product: &'static str,
        index: usize,
        n_rates: usize,
    },
    #[error("swaption needs start < end, got {start} and {end}")]
    SwaptionRange { start: usize, end: usize },
    #[error("{product}: strike must be positive, got {strike}")]
    Strike { product: &'static str, strike: f64 },
    #[error("rates observed at T_{got}, product needs T_{expected}")]
    Observation { expected: usize, got: usize },
    #[error("price {price} outside the attainable range ({lower}, {upper})")]
    NoSolution { price: f64, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Product {
    Caplet { strike: f64, expiry: usize },
    /// Payer swaption exercised at `T_start` into a swap paying fixed at
    /// `T_{start+1}, ..., T_end`.
    Swaption { strike: f64, start: usize, end: usize },
    Fra { strike: f64, expiry: usize },
}

impl Product {
    pub fn kind(&self) -> &'static str {
        match self {
            Product::Caplet { .. } => "caplet",
            Product::Swaption { .. } => "swaption",
            Product::Fra { .. } => "fra",
        }
    }

    pub fn strike(&self) -> f64 {
        match *self {
            Product::Caplet { strike, .. } | Product::Swaption { strike, .. } | Product::Fra { strike, .. } => strike,
        }
    }

    /// Tenor index of the date at which the payoff is fixed.
    pub fn expiry(&self) -> usize {
        match *self {
            Product::Caplet { expiry, .. } | Product::Fra { expiry, .. } => expiry,
            Product::Swaption { start, .. } => start,
        }
    }

    /// Last tenor index the payoff refers to.
    pub fn end(&self) -> usize {
        match *self {
            Product::Caplet { expiry, .. } | Product::Fra { expiry, .. } => expiry,
            Product::Swaption { end, .. } => end,
        }
    }

    pub fn validate(&self, n_rates: usize) -> Result<(), PricingError> {
        let kind = self.kind();
        let check = |index: usize| {
            if (1..=n_rates).contains(&index) {
                Ok(())
            } else {
                Err(PricingError::Index {
                    product: kind,
                    index,
                    n_rates,
                })
            }
        };
        match *self {
            Product::Caplet { strike, expiry } => {
                check(expiry)?;
                if !(strike > 0.0) {
                    return Err(PricingError::Strike { product: kind, strike });
                }
            }
            Product::Swaption { strike, start, end } => {
                check(start)?;
                check(end)?;
                if start >= end {
                    return Err(PricingError::SwaptionRange { start, end });
                }
                if !(strike > 0.0) {
                    return Err(PricingError::Strike { product: kind, strike });
                }
            }
            Product::Fra { strike, expiry } => {
                check(expiry)?;
                if !strike.is_finite() {
                    return Err(PricingError::Strike { product: kind, strike });
                }
            }
        }
        Ok(())
    }

    /// Discounted payoff on one path, given the rates fixed at the expiry.
    pub fn payoff(&self, view: &TerminalRates) -> Result<f64, PricingError> {
        match *self {
            Product::Caplet { strike, expiry } => caplet_payoff(view, strike, expiry),
            Product::Swaption { strike, start, end } => swaption_payoff(view, strike, start, end),
            Product::Fra { strike, expiry } => fra_payoff(view, strike, expiry),
        }
    }

    /// Time-zero value when every rate stays at its initial level.
    pub fn deterministic_price(&self, tenor: &TenorStructure, curve: &InitialCurve) -> f64 {
        match *self {
            Product::Caplet { strike, expiry } => {
                tenor.accrual(expiry) * curve.discount(expiry + 1) * (curve.forward(expiry) - strike).max(0.0)
            }
            Product::Fra { strike, expiry } => {
                tenor.accrual(expiry) * curve.discount(expiry + 1) * (strike - curve.forward(expiry))
            }
            Product::Swaption { strike, start, end } => {
                let fixed: f64 = (start + 1..=end)
                    .map(|k| tenor.accrual(k - 1) * strike * curve.discount(k))
                    .sum();
                (curve.discount(start) - curve.discount(end) - fixed).max(0.0)
            }
        }
    }

    /// Black-76 inputs: forward, expiry and annuity.
    pub fn black_reference(&self, tenor: &TenorStructure, curve: &InitialCurve) -> Option<BlackReference> {
        match *self {
            Product::Caplet { expiry, .. } => Some(BlackReference {
                forward: curve.forward(expiry),
                expiry: tenor.date(expiry),
                annuity: tenor.accrual(expiry) * curve.discount(expiry + 1),
            }),
            Product::Swaption { start, end, .. } => {
                let annuity: f64 = (start + 1..=end).map(|k| tenor.accrual(k - 1) * curve.discount(k)).sum();
                Some(BlackReference {
                    forward: (curve.discount(start) - curve.discount(end)) / annuity,
                    expiry: tenor.date(start),
                    annuity,
                })
            }
            Product::Fra { .. } => None,
        }
    }

    pub fn implied_vol(&self, price: f64, tenor: &TenorStructure, curve: &InitialCurve) -> Option<Result<f64, PricingError>> {
        self.black_reference(tenor, curve)
            .map(|r| implied_vol(price, r.forward, self.strike(), r.expiry, r.annuity))
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Product::Caplet { strike, expiry } => write!(f, "caplet(T{expiry},K={strike})"),
            Product::Swaption { strike, start, end } => write!(f, "swaption(T{start}-T{end},K={strike})"),
            Product::Fra { strike, expiry } => write!(f, "fra(T{expiry},K={strike})"),
        }
    }
}

/// Rates `L(T_e, T_l)` fixed at `T_e`, for `l = e..N` (entries below `e`
/// are ignored), with the accruals and `B(0, T_*)`.
#[derive(Debug, Clone, Copy)]
pub struct TerminalRates<'a> {
    pub expiry: usize,
    pub rates: &'a [f64],
    pub accruals: &'a [f64],
    pub terminal_discount: f64,
}

impl TerminalRates<'_> {
    fn require(&self, expiry: usize) -> Result<(), PricingError> {
        if self.expiry == expiry {
            Ok(())
        } else {
            Err(PricingError::Observation {
                expected: expiry,
                got: self.expiry,
            })
        }
    }

    fn n_rates(&self) -> usize {
        self.rates.len() - 1
    }

    /// `prod_{l=from}^{N} (1 + delta_l L(T_e, T_l))`, i.e.
    /// `B(T_e, T_from) / B(T_e, T_*)`.
    pub fn growth_from(&self, from: usize) -> f64 {
        (from..=self.n_rates())
            .map(|l| 1.0 + self.accruals[l] * self.rates[l])
            .product()
    }
}

pub fn caplet_payoff(view: &TerminalRates, strike: f64, expiry: usize) -> Result<f64, PricingError> {
    view.require(expiry)?;
    let intrinsic = (view.rates[expiry] - strike).max(0.0);
    if intrinsic == 0.0 {
        return Ok(0.0);
    }
    Ok(view.accruals[expiry] * view.terminal_discount * view.growth_from(expiry + 1) * intrinsic)
}

pub fn fra_payoff(view: &TerminalRates, strike: f64, expiry: usize) -> Result<f64, PricingError> {
    view.require(expiry)?;
    Ok(view.accruals[expiry] * view.terminal_discount * view.growth_from(expiry + 1) * (strike - view.rates[expiry]))
}

/// `B(0,T_*) (-sum_{k=i}^{m} c_k prod_{l=k}^{N} (1 + delta_l L_l))^+` with
/// `c_i = -1`, `c_k = delta_{k-1} K` and `c_m = 1 + delta_{m-1} K`.
pub fn swaption_payoff(view: &TerminalRates, strike: f64, start: usize, end: usize) -> Result<f64, PricingError> {
    view.require(start)?;
    let n = view.n_rates();
    let mut growth = view.growth_from(end);
    let mut value = -(1.0 + view.accruals[end - 1] * strike) * growth;
    for k in (start + 1..end).rev() {
        growth *= 1.0 + view.accruals[k] * view.rates[k];
        value -= view.accruals[k - 1] * strike * growth;
    }
    growth *= 1.0 + view.accruals[start] * view.rates[start];
    value += growth;
    debug_assert!(end <= n);
    Ok(view.terminal_discount * value.max(0.0))
}

/// Time-`T_i` value `(1 - sum_{k=i+1}^{m} c_k B(T_i, T_k))^+` of the payer
/// swaption in bond form.
pub fn swaption_bond_value(view: &TerminalRates, strike: f64, start: usize, end: usize) -> Result<f64, PricingError> {
    view.require(start)?;
    let mut bond = 1.0;
    let mut coupons = 0.0;
    for k in start + 1..=end {
        bond /= 1.0 + view.accruals[k - 1] * view.rates[k - 1];
        let c = view.accruals[k - 1] * strike + if k == end { 1.0 } else { 0.0 };
        coupons += c * bond;
    }
    Ok((1.0 - coupons).max(0.0))
}

/// Monte Carlo price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    /// Simulated paths, counting both members of antithetic pairs.
    pub n_paths: u64,
    /// Independent units behind the standard error.
    pub n_units: u64,
}

impl McEstimate {
    /// Half-width of the 95% confidence interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.std_error
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.price - target).abs() <= n_se * self.std_error
    }
}

/// Mean and standard error of a per-unit difference between two methods
/// evaluated on the same increments.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairedEstimate {
    pub diff: f64,
    pub std_error: f64,
    pub n_units: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackReference {
    pub forward: f64,
    pub expiry: f64,
    pub annuity: f64,
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black-76 call: `annuity (F N(d1) - K N(d2))`.
pub fn black76_price(forward: f64, strike: f64, vol: f64, expiry: f64, annuity: f64) -> f64 {
    let sd = vol * expiry.sqrt();
    if !(sd > 0.0) {
        return annuity * (forward - strike).max(0.0);
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    annuity * (forward * norm_cdf(d1) - strike * norm_cdf(d2))
}

pub fn black76_vega(forward: f64, strike: f64, vol: f64, expiry: f64, annuity: f64) -> f64 {
    let sd = vol * expiry.sqrt();
    if !(sd > 0.0) {
        return 0.0;
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    annuity * forward * norm_pdf(d1) * expiry.sqrt()
}

const VOL_LOW: f64 = 1e-8;
const VOL_HIGH: f64 = 5.0;

/// Inverts [`black76_price`] on `[1e-8, 5]` by Newton steps safeguarded
/// with bisection. Prices at or below the lower bracket value return the
/// lower bracket.
pub fn implied_vol(price: f64, forward: f64, strike: f64, expiry: f64, annuity: f64) -> Result<f64, PricingError> {
    let intrinsic = annuity * (forward - strike).max(0.0);
    let upper = annuity * forward;
    if !(price >= intrinsic - 1e-15 * annuity && price < upper) {
        return Err(PricingError::NoSolution {
            price,
            lower: intrinsic,
            upper,
        });
    }
    let f = |v: f64| black76_price(forward, strike, v, expiry, annuity) - price;
    let (mut lo, mut hi) = (VOL_LOW, VOL_HIGH);
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    if f(hi) < 0.0 {
        return Err(PricingError::NoSolution {
            price,
            lower: intrinsic,
            upper: black76_price(forward, strike, hi, expiry, annuity),
        });
    }
    let mut v = 0.5 * (lo + hi).min(1.0);
    for _ in 0..200 {
        let fv = f(v);
        if fv == 0.0 {
            return Ok(v);
        }
        if fv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let vega = black76_vega(forward, strike, v, expiry, annuity);
        let newton = v - fv / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - v).abs() <= 1e-15 * v.max(1e-3) || hi - lo <= 1e-15 {
            return Ok(next);
        }
        v = next;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::initial_forward_rates;

    fn setup(n: usize) -> (TenorStructure, InitialCurve) {
        let tenor = TenorStructure::uniform(n, 0.5).unwrap();
        let discounts: Vec<f64> = tenor.dates()[1..].iter().map(|t| (-0.04 * t).exp()).collect();
        let curve = initial_forward_rates(&tenor, &discounts).unwrap();
        (tenor, curve)
    }

    fn view<'a>(e: usize, rates: &'a [f64], curve: &InitialCurve, acc: &'a [f64]) -> TerminalRates<'a> {
        TerminalRates {
            expiry: e,
            rates,
            accruals: acc,
            terminal_discount: curve.terminal_discount(),
        }
    }

    #[test]
    fn deterministic_payoffs_match_closed_forms() {
        let (tenor, curve) = setup(8);
        let acc = tenor.accruals();
        let rates = curve.forwards().to_vec();
        let l0 = curve.forward(3);
        for e in 1..=8 {
            let v = view(e, &rates, &curve, &acc);
            for p in [
                Product::Caplet { strike: 0.03, expiry: e },
                Product::Fra { strike: 0.05, expiry: e },
                Product::Fra { strike: curve.forward(e), expiry: e },
            ] {
                let got = p.payoff(&v).unwrap();
                let want = p.deterministic_price(&tenor, &curve);
                assert!((got - want).abs() < 1e-12, "{p}: {got} vs {want}");
            }
        }
        for (s, m) in [(1, 2), (2, 6), (3, 8)] {
            let v = view(s, &rates, &curve, &acc);
            for k in [0.01, 0.03, l0] {
                let p = Product::Swaption { strike: k, start: s, end: m };
                let got = p.payoff(&v).unwrap();
                assert!((got - p.deterministic_price(&tenor, &curve)).abs() < 1e-12);
            }
        }
        let atm = Product::Fra { strike: l0, expiry: 3 };
        assert_eq!(atm.deterministic_price(&tenor, &curve), 0.0);
    }

    #[test]
    fn payoff_edge_cases() {
        let (tenor, curve) = setup(4);
        let acc = tenor.accruals();
        let rates = vec![0.0, 0.03, 0.05, 0.02, 0.07];
        let v = view(4, &rates, &curve, &acc);
        assert_eq!(caplet_payoff(&v, 0.08, 4).unwrap(), 0.0);
        let last = caplet_payoff(&v, 0.05, 4).unwrap();
        assert!((last - 0.5 * curve.terminal_discount() * 0.02).abs() < 1e-16);
        assert!(matches!(caplet_payoff(&v, 0.05, 3), Err(PricingError::Observation { .. })));
    }

    #[test]
    fn single_period_swaption_is_caplet() {
        let (tenor, curve) = setup(6);
        let acc = tenor.accruals();
        let mut state = 12345u64;
        for _ in 0..200 {
            let rates: Vec<f64> = (0..=6)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    0.08 * ((state >> 11) as f64 / (1u64 << 53) as f64)
                })
                .collect();
            for i in 1..6 {
                let v = view(i, &rates, &curve, &acc);
                let c = caplet_payoff(&v, 0.04, i).unwrap();
                let s = swaption_payoff(&v, 0.04, i, i + 1).unwrap();
                // the product form subtracts two O(1) growth factors
                assert!((c - s).abs() <= 1e-14, "{c} vs {s}");
            }
        }
    }

    #[test]
    fn product_and_bond_forms_agree() {
        let (tenor, curve) = setup(7);
        let acc = tenor.accruals();
        let rates = vec![0.0, 0.031, 0.052, 0.024, 0.061, 0.043, 0.038, 0.05];
        for (s, m) in [(1, 3), (2, 7), (4, 5)] {
            let v = view(s, &rates, &curve, &acc);
            for k in [0.0001, 0.02, 0.04, 0.08] {
                let product = swaption_payoff(&v, k, s, m).unwrap();
                let bond = swaption_bond_value(&v, k, s, m).unwrap();
                let converted = curve.terminal_discount() * v.growth_from(s) * bond;
                assert!((product - converted).abs() < 1e-14, "{s}-{m} K={k}");
            }
            assert!(swaption_payoff(&v, 1e-12, s, m).unwrap() > 0.0);
        }
    }

    #[test]
    fn caplet_monotone_in_strike() {
        let (tenor, curve) = setup(3);
        let acc = tenor.accruals();
        let rates = vec![0.0, 0.045, 0.03, 0.05];
        let v = view(1, &rates, &curve, &acc);
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let p = caplet_payoff(&v, 0.001 * k as f64, 1).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn validation() {
        assert!(Product::Caplet { strike: 0.04, expiry: 0 }.validate(5).is_err());
        assert!(Product::Caplet { strike: 0.04, expiry: 6 }.validate(5).is_err());
        assert!(Product::Caplet { strike: 0.0, expiry: 2 }.validate(5).is_err());
        assert!(Product::Swaption { strike: 0.04, start: 3, end: 3 }.validate(5).is_err());
        assert!(Product::Swaption { strike: 0.04, start: 3, end: 5 }.validate(5).is_ok());
        assert!(Product::Fra { strike: -0.01, expiry: 5 }.validate(5).is_ok());
    }

    #[test]
    fn black_against_reference_value() {
        // F = K = 0.04, sigma = 0.2, T = 1: A F (2 N(0.1) - 1)
        let p = black76_price(0.04, 0.04, 0.2, 1.0, 1.0);
        let expected = 0.04 * (2.0 * 0.539827837277029 - 1.0);
        assert!((p - expected).abs() < 1e-15);
        assert!((black76_price(0.05, 0.04, 0.0, 1.0, 2.0) - 0.02).abs() < 1e-17);
    }

    #[test]
    fn implied_vol_roundtrip() {
        let p = black76_price(0.0404, 0.0404, 0.18, 5.0, 0.4);
        assert!((implied_vol(p, 0.0404, 0.0404, 5.0, 0.4).unwrap() - 0.18).abs() < 1e-10);
        for &(f, k, v, t) in &[(0.04, 0.02, 0.3, 0.5), (0.04, 0.08, 0.12, 9.5), (0.03, 0.031, 1.7, 2.0)] {
            let p = black76_price(f, k, v, t, 0.9);
            assert!((implied_vol(p, f, k, t, 0.9).unwrap() - v).abs() < 1e-10);
        }
    }

    #[test]
    fn implied_vol_bounds() {
        let intrinsic = 0.5 * (0.05 - 0.04);
        assert!(implied_vol(intrinsic, 0.05, 0.04, 1.0, 0.5).unwrap() < 1e-7);
        assert!(matches!(
            implied_vol(0.5 * 0.05, 0.05, 0.04, 1.0, 0.5),
            Err(PricingError::NoSolution { .. })
        ));
        assert!(implied_vol(0.001, 0.05, 0.04, 1.0, 0.5).is_err());
    }

    #[test]
    fn swaption_black_reference_uses_swap_rate() {
        let (tenor, curve) = setup(10);
        let p = Product::Swaption { strike: 0.04, start: 2, end: 6 };
        let r = p.black_reference(&tenor, &curve).unwrap();
        assert!((r.forward - curve.forward(3)).abs() < 1e-12);
        let zero_vol = black76_price(r.forward, 0.03, 1e-12, r.expiry, r.annuity);
        let det = Product::Swaption { strike: 0.03, start: 2, end: 6 }.deterministic_price(&tenor, &curve);
        assert!((zero_vol - det).abs() < 1e-14);
    }
}
