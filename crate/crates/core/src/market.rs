//! Tenor structure, initial curve, volatility structure and the model
//! conditions that make the terminal-measure dynamics well defined.

use std::fmt;

use thiserror::Error;

use crate::levy::DriverSchedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("tenor dates must start at 0 and be strictly increasing (problem at index {index})")]
    TenorDates { index: usize },
    #[error("tenor needs at least T_0 and T_1")]
    TenorTooShort,
    #[error("expected {expected} discount factors B(0,T_1..T_(N+1)), got {got}")]
    CurveLength { expected: usize, got: usize },
    #[error("discount factor B(0,T_{index}) = {value} is not strictly positive")]
    CurveNotPositive { index: usize, value: f64 },
    #[error("discount factors must be strictly decreasing: B(0,T_{index}) = {value} >= B(0,T_{prev}) = {previous}", prev = .index - 1)]
    CurveNotDecreasing { index: usize, value: f64, previous: f64 },
    #[error("1 + delta L must be positive, got L = {rate} with accrual {accrual}")]
    WeightDomain { rate: f64, accrual: f64 },
    #[error("volatility structure covers {got} rates, tenor has {expected}")]
    VolatilityShape { expected: usize, got: usize },
    #[error("volatility loading for rate {rate} in period {period} is not finite")]
    VolatilityValue { rate: usize, period: usize },
}

/// `0 = T_0 < T_1 < ... < T_{N+1}` in year fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct TenorStructure {
    dates: Vec<f64>,
}

impl TenorStructure {
    pub fn new(dates: Vec<f64>) -> Result<Self, ModelError> {
        if dates.len() < 2 {
            return Err(ModelError::TenorTooShort);
        }
        if dates[0] != 0.0 {
            return Err(ModelError::TenorDates { index: 0 });
        }
        for i in 1..dates.len() {
            if !(dates[i] > dates[i - 1]) || !dates[i].is_finite() {
                return Err(ModelError::TenorDates { index: i });
            }
        }
        Ok(Self { dates })
    }

    /// `N` rates with constant accrual: dates `0, delta, ..., (N+1) delta`.
    pub fn uniform(n_rates: usize, accrual: f64) -> Result<Self, ModelError> {
        Self::new((0..=n_rates + 1).map(|k| k as f64 * accrual).collect())
    }

    /// Number of LIBOR rates `N`.
    pub fn n_rates(&self) -> usize {
        self.dates.len() - 2
    }

    pub fn date(&self, i: usize) -> f64 {
        self.dates[i]
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    /// `delta_i = T_{i+1} - T_i` for `i = 0..=N`.
    pub fn accrual(&self, i: usize) -> f64 {
        self.dates[i + 1] - self.dates[i]
    }

    pub fn accruals(&self) -> Vec<f64> {
        self.dates.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn terminal(&self) -> f64 {
        self.dates[self.dates.len() - 1]
    }

    /// Index `j` of the period `[T_j, T_{j+1})` containing `t`.
    pub fn period_of(&self, t: f64) -> usize {
        match self.dates.iter().rposition(|&d| d <= t) {
            Some(j) => j.min(self.dates.len() - 2),
            None => 0,
        }
    }
}

/// Discount factors `B(0,T_i)` for `i = 0..=N+1` and forward LIBORs
/// `L(0,T_i)` for `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCurve {
    discounts: Vec<f64>,
    forwards: Vec<f64>,
}

impl InitialCurve {
    pub fn discount(&self, i: usize) -> f64 {
        self.discounts[i]
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    pub fn forward(&self, i: usize) -> f64 {
        self.forwards[i]
    }

    pub fn forwards(&self) -> &[f64] {
        &self.forwards
    }

    /// `B(0, T_*)` with `T_* = T_{N+1}`.
    pub fn terminal_discount(&self) -> f64 {
        self.discounts[self.discounts.len() - 1]
    }
}

/// Builds the initial curve from `B(0,T_1), ..., B(0,T_{N+1})`, which must
/// be strictly positive and strictly decreasing.
pub fn initial_forward_rates(tenor: &TenorStructure, discounts: &[f64]) -> Result<InitialCurve, ModelError> {
    let expected = tenor.n_rates() + 1;
    if discounts.len() != expected {
        return Err(ModelError::CurveLength {
            expected,
            got: discounts.len(),
        });
    }
    let mut all = Vec::with_capacity(expected + 1);
    all.push(1.0);
    all.extend_from_slice(discounts);
    for i in 1..all.len() {
        if !(all[i] > 0.0) || !all[i].is_finite() {
            return Err(ModelError::CurveNotPositive { index: i, value: all[i] });
        }
        if i >= 2 && !(all[i] < all[i - 1]) {
            return Err(ModelError::CurveNotDecreasing {
                index: i,
                value: all[i],
                previous: all[i - 1],
            });
        }
    }
    let forwards = (0..=tenor.n_rates())
        .map(|i| (all[i] / all[i + 1] - 1.0) / tenor.accrual(i))
        .collect();
    Ok(InitialCurve {
        discounts: all,
        forwards,
    })
}

/// `delta L / (1 + delta L)`, the weight entering every measure-change
/// term.
pub fn libor_weight(rate: f64, accrual: f64) -> Result<f64, ModelError> {
    let denom = 1.0 + accrual * rate;
    if !(denom > 0.0) {
        return Err(ModelError::WeightDomain { rate, accrual });
    }
    Ok(accrual * rate / denom)
}

/// Piecewise-constant loadings `lambda(s, T_i)`: one value per tenor period
/// and rate. Entries for periods at or after a rate's expiry are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityStructure {
    // loadings[period][rate], rate index 0 unused
    loadings: Vec<Vec<f64>>,
}

impl VolatilityStructure {
    pub fn flat(tenor: &TenorStructure, value: f64) -> Result<Self, ModelError> {
        Self::from_fn(tenor, |_, _| value)
    }

    /// `f(period, rate)` is queried for `period < rate` only.
    pub fn from_fn<F: Fn(usize, usize) -> f64>(tenor: &TenorStructure, f: F) -> Result<Self, ModelError> {
        let n = tenor.n_rates();
        let periods = n + 1;
        let mut loadings = vec![vec![0.0; n + 1]; periods];
        for (period, row) in loadings.iter_mut().enumerate() {
            for rate in (period + 1)..=n {
                let v = f(period, rate);
                if !v.is_finite() {
                    return Err(ModelError::VolatilityValue { rate, period });
                }
                row[rate] = v;
            }
        }
        Ok(Self { loadings })
    }

    pub fn n_rates(&self) -> usize {
        self.loadings[0].len() - 1
    }

    /// Loading of rate `rate` during period `period`.
    pub fn loading(&self, period: usize, rate: usize) -> f64 {
        self.loadings
            .get(period)
            .and_then(|row| row.get(rate))
            .copied()
            .unwrap_or(0.0)
    }

    /// All loadings for a period, indexed by rate.
    pub fn period_loadings(&self, period: usize) -> &[f64] {
        &self.loadings[period.min(self.loadings.len() - 1)]
    }

    /// `lambda(s, T_i)`, zero for `s > T_i`.
    pub fn loading_at(&self, tenor: &TenorStructure, s: f64, rate: usize) -> f64 {
        if s > tenor.date(rate) {
            return 0.0;
        }
        self.loading(tenor.period_of(s), rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub tenor: TenorStructure,
    pub curve: InitialCurve,
    pub vols: VolatilityStructure,
    pub driver: DriverSchedule,
}

impl MarketModel {
    pub fn new(
        tenor: TenorStructure,
        curve: InitialCurve,
        vols: VolatilityStructure,
        driver: DriverSchedule,
    ) -> Result<Self, ModelError> {
        if curve.discounts.len() != tenor.n_rates() + 2 {
            return Err(ModelError::CurveLength {
                expected: tenor.n_rates() + 1,
                got: curve.discounts.len() - 1,
            });
        }
        if vols.n_rates() != tenor.n_rates() {
            return Err(ModelError::VolatilityShape {
                expected: tenor.n_rates(),
                got: vols.n_rates(),
            });
        }
        Ok(Self {
            tenor,
            curve,
            vols,
            driver,
        })
    }

    pub fn n_rates(&self) -> usize {
        self.tenor.n_rates()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_model(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionCode {
    EmptyTenor,
    /// Initial curve strictly positive and strictly decreasing.
    CurveMonotone,
    /// Sum of absolute loadings within the exponential-moment bound.
    VolatilityBound,
}

impl fmt::Display for ConditionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionCode::EmptyTenor => "empty-tenor",
            ConditionCode::CurveMonotone => "LR2-curve",
            ConditionCode::VolatilityBound => "LR1-volatility-bound",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub code: ConditionCode,
    pub passed: bool,
    pub slack: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, code: ConditionCode) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            match c.slack {
                Some(s) => writeln!(f, "{status} {:<22} slack {s:.6}  {}", c.code.to_string(), c.detail)?,
                None => writeln!(f, "{status} {:<22} {}", c.code.to_string(), c.detail)?,
            }
        }
        Ok(())
    }
}

pub fn validate_model(model: &MarketModel) -> ValidationReport {
    validate_inputs(&model.tenor, &model.curve.discounts[1..], &model.vols, &model.driver)
}

/// Condition checks on raw inputs, usable before the curve can be built.
/// `discounts` holds `B(0,T_1..T_{N+1})`.
pub fn validate_inputs(
    tenor: &TenorStructure,
    discounts: &[f64],
    vols: &VolatilityStructure,
    driver: &DriverSchedule,
) -> ValidationReport {
    let mut checks = Vec::new();
    let n = tenor.n_rates();
    checks.push(ConditionCheck {
        code: ConditionCode::EmptyTenor,
        passed: n > 0,
        slack: None,
        detail: format!("{n} rates"),
    });

    checks.push(match initial_forward_rates(tenor, discounts) {
        Ok(curve) => {
            let min_fwd = curve.forwards[1..].iter().copied().fold(f64::INFINITY, f64::min);
            ConditionCheck {
                code: ConditionCode::CurveMonotone,
                passed: true,
                slack: None,
                detail: if n > 0 {
                    format!("min L(0,T_i) = {min_fwd:.8}")
                } else {
                    "no forward rates".to_string()
                },
            }
        }
        Err(e) => ConditionCheck {
            code: ConditionCode::CurveMonotone,
            passed: false,
            slack: None,
            detail: e.to_string(),
        },
    });

    // loadings are piecewise constant per period, so tenor dates and
    // midpoints cover every value
    let mut worst: Option<(f64, f64, f64)> = None;
    if n > 0 && vols.n_rates() == n {
        for j in 0..n {
            let (a, b) = (tenor.date(j), tenor.date(j + 1));
            for s in [a, 0.5 * (a + b)] {
                let total: f64 = (1..=n).map(|i| vols.loading_at(tenor, s, i).abs()).sum();
                let bound = driver.spec(tenor.period_of(s)).em_bound;
                let slack = bound - total;
                if worst.map_or(true, |(w, _, _)| slack < w) {
                    worst = Some((slack, s, total));
                }
            }
        }
    }
    checks.push(match worst {
        Some((slack, s, total)) => ConditionCheck {
            code: ConditionCode::VolatilityBound,
            passed: slack >= 0.0,
            slack: Some(slack),
            detail: format!("max sum |lambda| = {total:.6} at s = {s}"),
        },
        None => ConditionCheck {
            code: ConditionCode::VolatilityBound,
            passed: n > 0 && vols.n_rates() == n,
            slack: None,
            detail: if vols.n_rates() != n {
                format!("volatility covers {} rates, tenor has {n}", vols.n_rates())
            } else {
                "no rates".to_string()
            },
        },
    });
    ValidationReport { checks }
}
