//! Per-period drift evaluation for the simulation.
//!
//! Loadings are constant on each tenor period, so every cumulant value the
//! drift can need during a period is known in advance. Later rates sharing
//! a loading are pooled: the exact drift only depends on how many rates of
//! each pool enter a mixture term, and the law of that count is a
//! Poisson-binomial distribution that can be updated one rate at a time.
//! Sweeping the rates from `N` downwards therefore gives every rate's drift
//! in time linear in the tail when the loadings are flat.

use super::{
    brownian_drift, jump_drift_first_order, jump_drift_full_capped, jump_drift_second_order, weight_from_log,
    DriftCost, DriftError, DriftInputs,
};
use crate::levy::{Cumulant, LevyDriverSpec};
use crate::market::MarketModel;

/// Upper limit on the number of tabulated exact-drift entries per period.
pub const TABLE_LIMIT: usize = 1 << 24;

/// How drifts are evaluated along paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftKernel {
    /// Cumulant tables per period with pooled sweeps.
    #[default]
    Tabulated,
    /// The reference formulas, evaluating the cumulant on every call.
    Direct,
}

impl DriftKernel {
    pub fn name(self) -> &'static str {
        match self {
            DriftKernel::Tabulated => "tabulated",
            DriftKernel::Direct => "direct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tabulated" => Some(DriftKernel::Tabulated),
            "direct" => Some(DriftKernel::Direct),
            _ => None,
        }
    }
}

/// Order of the jump-drift expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expansion {
    Full,
    FirstOrder,
    SecondOrder,
}

impl Expansion {
    pub const ALL: [Expansion; 3] = [Expansion::Full, Expansion::FirstOrder, Expansion::SecondOrder];

    fn index(self) -> usize {
        match self {
            Expansion::Full => 0,
            Expansion::FirstOrder => 1,
            Expansion::SecondOrder => 2,
        }
    }
}

/// Drift evaluation data for one tenor period `[T_j, T_{j+1})`.
#[derive(Debug, Clone)]
pub struct DriftPlan {
    period: usize,
    n_rates: usize,
    kernel: DriftKernel,
    cap: usize,
    driver: LevyDriverSpec,
    loadings: Vec<f64>,
    group_of: Vec<usize>,
    group_loading: Vec<f64>,
    kappa_rate: Vec<f64>,
    // [rate][group]
    first: Vec<Vec<f64>>,
    // [rate][g * groups + h]
    second: Vec<Vec<f64>>,
    // [rate][mixed-radix count vector, group 0 fastest]
    full: Vec<Vec<f64>>,
    frozen: [Vec<f64>; 3],
    build_cost: DriftCost,
}

impl DriftPlan {
    /// Builds the plan for `period`, tabulating what the requested
    /// expansions need and the frozen drifts at the initial curve.
    pub fn new(
        model: &MarketModel,
        period: usize,
        kernel: DriftKernel,
        expansions: &[Expansion],
        cap: usize,
    ) -> Result<Self, DriftError> {
        let n = model.n_rates();
        let driver = *model.driver.spec(period);
        let loadings: Vec<f64> = (0..=n).map(|l| model.vols.loading(period, l)).collect();
        let first_live = period + 1;

        let mut group_of = vec![usize::MAX; n + 1];
        let mut group_loading: Vec<f64> = Vec::new();
        for l in (first_live..=n).rev() {
            let g = match group_loading.iter().position(|v| v.to_bits() == loadings[l].to_bits()) {
                Some(g) => g,
                None => {
                    group_loading.push(loadings[l]);
                    group_loading.len() - 1
                }
            };
            group_of[l] = g;
        }
        let groups = group_loading.len();

        let mut plan = Self {
            period,
            n_rates: n,
            kernel,
            cap,
            driver,
            loadings,
            group_of,
            group_loading,
            kappa_rate: vec![0.0; n + 1],
            first: vec![Vec::new(); n + 1],
            second: vec![Vec::new(); n + 1],
            full: vec![Vec::new(); n + 1],
            frozen: [Vec::new(), Vec::new(), Vec::new()],
            build_cost: DriftCost::default(),
        };

        let wants = |e: Expansion| expansions.contains(&e);
        match kernel {
            DriftKernel::Direct => {
                let tail = n.saturating_sub(first_live);
                if wants(Expansion::Full) && tail > cap {
                    return Err(DriftError::SizeGuard { tail, cap });
                }
            }
            DriftKernel::Tabulated => {
                let mut cost = DriftCost::default();
                let mut kappa = |z: f64| -> Result<f64, DriftError> {
                    cost.cumulant_evals += 1;
                    Ok(driver.eval(z)?)
                };
                let kappa_group = plan
                    .group_loading
                    .iter()
                    .map(|&l| kappa(l))
                    .collect::<Result<Vec<_>, _>>()?;
                let need_first = wants(Expansion::FirstOrder) || wants(Expansion::SecondOrder);
                let mut entries = 0usize;
                for i in first_live..=n {
                    let li = plan.loadings[i];
                    let ki = kappa(li)?;
                    plan.kappa_rate[i] = ki;
                    if need_first {
                        let row = (0..groups)
                            .map(|g| Ok(kappa(li + plan.group_loading[g])? - ki - kappa_group[g]))
                            .collect::<Result<Vec<_>, DriftError>>()?;
                        plan.first[i] = row;
                    }
                    if wants(Expansion::SecondOrder) {
                        let mut row = vec![0.0; groups * groups];
                        for g in 0..groups {
                            for h in g..groups {
                                let (lg, lh) = (plan.group_loading[g], plan.group_loading[h]);
                                let v = kappa(li + lg + lh)? - kappa(li + lg)? - kappa(li + lh)? - kappa(lg + lh)?
                                    + ki
                                    + kappa_group[g]
                                    + kappa_group[h];
                                row[g * groups + h] = v;
                                row[h * groups + g] = v;
                            }
                        }
                        plan.second[i] = row;
                    }
                    if wants(Expansion::Full) {
                        let radix = plan.tail_counts(i);
                        let size = radix.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c + 1));
                        entries = size.and_then(|s| entries.checked_add(s)).unwrap_or(usize::MAX);
                        if entries > TABLE_LIMIT {
                            return Err(DriftError::TableTooLarge {
                                entries,
                                limit: TABLE_LIMIT,
                            });
                        }
                        let size = size.unwrap_or(usize::MAX);
                        let mut table = Vec::with_capacity(size);
                        let mut counts = vec![0usize; groups];
                        for idx in 0..size {
                            let lambda: f64 = counts
                                .iter()
                                .zip(&plan.group_loading)
                                .map(|(&c, &l)| c as f64 * l)
                                .sum();
                            let mut d = kappa(li + lambda)?;
                            if idx > 0 {
                                d -= kappa(lambda)?;
                            }
                            table.push(d);
                            advance(&mut counts, &radix);
                        }
                        plan.full[i] = table;
                    }
                }
                plan.build_cost = cost;
            }
        }

        let z0: Vec<f64> = (0..=n)
            .map(|l| if l == 0 { 0.0 } else { model.curve.forward(l).ln() })
            .collect();
        let accruals = model.tenor.accruals();
        let mut tail = TailState::new(n);
        let mut cost = DriftCost::default();
        for e in Expansion::ALL {
            if !wants(e) {
                continue;
            }
            let mut frozen = vec![0.0; n + 1];
            tail.reset(&plan, e);
            for i in (first_live..=n).rev() {
                frozen[i] = plan.drift(i, e, &mut tail, &mut cost)?;
                tail.push(&plan, i, weight_from_log(z0[i], accruals[i]));
            }
            plan.frozen[e.index()] = frozen;
        }
        plan.build_cost += cost;
        Ok(plan)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// First rate still alive during the period.
    pub fn first_live(&self) -> usize {
        self.period + 1
    }

    pub fn n_rates(&self) -> usize {
        self.n_rates
    }

    pub fn kernel(&self) -> DriftKernel {
        self.kernel
    }

    pub fn loading(&self, rate: usize) -> f64 {
        self.loadings[rate]
    }

    pub fn n_groups(&self) -> usize {
        self.group_loading.len()
    }

    /// Work spent building the tables and frozen drifts.
    pub fn build_cost(&self) -> DriftCost {
        self.build_cost
    }

    fn tail_counts(&self, rate: usize) -> Vec<usize> {
        let mut counts = vec![0; self.group_loading.len()];
        for l in rate + 1..=self.n_rates {
            counts[self.group_of[l]] += 1;
        }
        counts
    }

    /// Drift of the rate at the initial curve, evaluated with this plan.
    pub fn frozen(&self, expansion: Expansion, rate: usize) -> f64 {
        let table = &self.frozen[expansion.index()];
        assert!(!table.is_empty(), "frozen drift for {expansion:?} was not planned");
        table[rate]
    }

    /// Total drift `b_i` given the weights of rates `i+1..N` held in
    /// `tail`, which must have been reset with the same expansion.
    pub fn drift(
        &self,
        rate: usize,
        expansion: Expansion,
        tail: &mut TailState,
        cost: &mut DriftCost,
    ) -> Result<f64, DriftError> {
        debug_assert_eq!(tail.next, rate);
        match self.kernel {
            DriftKernel::Direct => {
                let inputs = DriftInputs {
                    rate,
                    time: 0.0,
                    loading: self.loadings[rate],
                    weights: &tail.weights[rate + 1..=self.n_rates],
                    loadings: &self.loadings[rate + 1..=self.n_rates],
                    diffusion: self.driver.diffusion,
                    cumulant: &self.driver,
                };
                let jump = match expansion {
                    Expansion::Full => jump_drift_full_capped(&inputs, self.cap)?,
                    Expansion::FirstOrder => jump_drift_first_order(&inputs)?,
                    Expansion::SecondOrder => jump_drift_second_order(&inputs)?,
                };
                *cost += jump.cost;
                Ok(brownian_drift(&inputs) - jump.value)
            }
            DriftKernel::Tabulated => {
                let jump = match expansion {
                    Expansion::Full => self.full_jump(rate, tail, cost),
                    Expansion::FirstOrder => self.first_jump(rate, tail, cost),
                    Expansion::SecondOrder => self.second_jump(rate, tail, cost),
                };
                let c = self.driver.diffusion;
                let li = self.loadings[rate];
                let brownian = if c > 0.0 {
                    -0.5 * li * li * c - c * li * tail.cross
                } else {
                    0.0
                };
                Ok(brownian - jump)
            }
        }
    }

    fn first_jump(&self, rate: usize, tail: &TailState, cost: &mut DriftCost) -> f64 {
        let row = &self.first[rate];
        let mut v = self.kappa_rate[rate];
        for (a, s) in row.iter().zip(&tail.s1) {
            v += a * s;
        }
        cost.multiply_adds += row.len() as u64;
        v
    }

    fn second_jump(&self, rate: usize, tail: &TailState, cost: &mut DriftCost) -> f64 {
        let groups = self.group_loading.len();
        let row = &self.second[rate];
        let mut v = self.first_jump(rate, tail, cost);
        for g in 0..groups {
            v += row[g * groups + g] * tail.e2[g];
            for h in g + 1..groups {
                v += row[g * groups + h] * tail.s1[g] * tail.s1[h];
            }
        }
        cost.multiply_adds += (groups * (groups + 1) / 2) as u64;
        v
    }

    fn full_jump(&self, rate: usize, tail: &mut TailState, cost: &mut DriftCost) -> f64 {
        let table = &self.full[rate];
        cost.multiply_adds += table.len() as u64;
        if tail.pb.len() == 1 {
            return tail.pb[0].iter().zip(table).map(|(p, d)| p * d).sum();
        }
        let TailState { pb, odometer, .. } = tail;
        let radix: Vec<usize> = pb.iter().map(|p| p.len() - 1).collect();
        odometer.clear();
        odometer.resize(pb.len(), 0);
        let mut total = 0.0;
        for d in table {
            let mut prob = 1.0;
            for (g, &c) in odometer.iter().enumerate() {
                prob *= pb[g][c];
            }
            total += prob * d;
            advance(odometer, &radix);
        }
        total
    }
}

fn advance(counts: &mut [usize], radix: &[usize]) {
    for (c, &r) in counts.iter_mut().zip(radix) {
        if *c < r {
            *c += 1;
            return;
        }
        *c = 0;
    }
}

/// Pooled statistics of the weights of the rates pushed so far, which
/// form the tail `i+1..N` of the next rate to be evaluated.
#[derive(Debug, Clone)]
pub struct TailState {
    weights: Vec<f64>,
    s1: Vec<f64>,
    e2: Vec<f64>,
    pb: Vec<Vec<f64>>,
    cross: f64,
    track_counts: bool,
    next: usize,
    odometer: Vec<usize>,
}

impl TailState {
    pub fn new(n_rates: usize) -> Self {
        Self {
            weights: vec![0.0; n_rates + 1],
            s1: Vec::new(),
            e2: Vec::new(),
            pb: Vec::new(),
            cross: 0.0,
            track_counts: false,
            next: n_rates,
            odometer: Vec::new(),
        }
    }

    /// Empties the tail for a new downward sweep starting at rate `N`.
    pub fn reset(&mut self, plan: &DriftPlan, expansion: Expansion) {
        let groups = plan.n_groups();
        self.s1.clear();
        self.s1.resize(groups, 0.0);
        self.e2.clear();
        self.e2.resize(groups, 0.0);
        self.track_counts = plan.kernel == DriftKernel::Tabulated && expansion == Expansion::Full;
        if self.track_counts {
            self.pb.resize_with(groups, Vec::new);
            self.pb.truncate(groups);
            for p in &mut self.pb {
                p.clear();
                p.push(1.0);
            }
        } else {
            self.pb.clear();
        }
        self.cross = 0.0;
        self.next = plan.n_rates;
    }

    /// Adds rate `rate` with weight `w`; rates must arrive in decreasing
    /// order.
    pub fn push(&mut self, plan: &DriftPlan, rate: usize, w: f64) {
        debug_assert_eq!(self.next, rate);
        self.next = rate.wrapping_sub(1);
        self.weights[rate] = w;
        if plan.kernel == DriftKernel::Direct {
            return;
        }
        let g = plan.group_of[rate];
        self.e2[g] += w * self.s1[g];
        self.s1[g] += w;
        self.cross += w * plan.loadings[rate];
        if self.track_counts {
            let p = &mut self.pb[g];
            let top = p[p.len() - 1] * w;
            for c in (1..p.len()).rev() {
                p[c] = p[c] * (1.0 - w) + p[c - 1] * w;
            }
            p[0] *= 1.0 - w;
            p.push(top);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{jump_drift_full, DriftInputs};
    use crate::levy::{DriverSchedule, NigParams};
    use crate::market::{initial_forward_rates, TenorStructure, VolatilityStructure};

    fn model(n: usize, vol: impl Fn(usize, usize) -> f64, diffusion: f64) -> MarketModel {
        let tenor = TenorStructure::uniform(n, 0.5).unwrap();
        let discounts: Vec<f64> = tenor.dates()[1..].iter().map(|t| (-0.04 * t).exp()).collect();
        let curve = initial_forward_rates(&tenor, &discounts).unwrap();
        let vols = VolatilityStructure::from_fn(&tenor, vol).unwrap();
        let spec = LevyDriverSpec::nig(NigParams::symmetric(12.0, 12.0).unwrap())
            .with_diffusion(diffusion)
            .unwrap();
        MarketModel::new(tenor, curve, vols, DriverSchedule::homogeneous(spec)).unwrap()
    }

    fn sweep(plan: &DriftPlan, e: Expansion, w: &[f64]) -> Vec<f64> {
        let n = plan.n_rates();
        let mut tail = TailState::new(n);
        let mut cost = DriftCost::default();
        let mut out = vec![0.0; n + 1];
        tail.reset(plan, e);
        for i in (plan.first_live()..=n).rev() {
            out[i] = plan.drift(i, e, &mut tail, &mut cost).unwrap();
            tail.push(plan, i, w[i]);
        }
        out
    }

    fn weights(n: usize) -> Vec<f64> {
        (0..=n).map(|l| 0.01 + 0.003 * ((l * 7) % 5) as f64).collect()
    }

    fn check_kernels_agree(m: &MarketModel, period: usize) {
        let n = m.n_rates();
        let w = weights(n);
        let tab = DriftPlan::new(m, period, DriftKernel::Tabulated, &Expansion::ALL, 25).unwrap();
        let direct = DriftPlan::new(m, period, DriftKernel::Direct, &Expansion::ALL, 25).unwrap();
        for e in Expansion::ALL {
            let a = sweep(&tab, e, &w);
            let b = sweep(&direct, e, &w);
            for i in period + 1..=n {
                assert!((a[i] - b[i]).abs() < 1e-14, "{e:?} rate {i}: {} vs {}", a[i], b[i]);
            }
        }
    }

    #[test]
    fn tabulated_matches_direct_for_flat_loadings() {
        let m = model(10, |_, _| 0.18, 0.0);
        check_kernels_agree(&m, 0);
        check_kernels_agree(&m, 4);
    }

    #[test]
    fn tabulated_matches_direct_for_pooled_loadings() {
        let m = model(9, |p, r| 0.05 + 0.04 * ((r + p) % 3) as f64, 0.02);
        let plan = DriftPlan::new(&m, 0, DriftKernel::Tabulated, &[Expansion::Full], 25).unwrap();
        assert_eq!(plan.n_groups(), 3);
        check_kernels_agree(&m, 0);
        check_kernels_agree(&m, 2);
    }

    #[test]
    fn tabulated_matches_direct_for_distinct_loadings() {
        let m = model(7, |_, r| 0.02 * r as f64, 0.0);
        check_kernels_agree(&m, 0);
    }

    #[test]
    fn frozen_equals_sweep_at_initial_weights() {
        let m = model(6, |_, _| 0.18, 0.0);
        let plan = DriftPlan::new(&m, 0, DriftKernel::Tabulated, &Expansion::ALL, 25).unwrap();
        let w: Vec<f64> = (0..=6)
            .map(|l| if l == 0 { 0.0 } else { weight_from_log(m.curve.forward(l).ln(), 0.5) })
            .collect();
        for e in Expansion::ALL {
            let s = sweep(&plan, e, &w);
            for i in 1..=6 {
                assert_eq!(s[i].to_bits(), plan.frozen(e, i).to_bits());
            }
        }
        let inputs = DriftInputs {
            rate: 2,
            time: 0.0,
            loading: 0.18,
            weights: &w[3..],
            loadings: &[0.18; 4],
            diffusion: 0.0,
            cumulant: m.driver.spec(0),
        };
        let reference = -jump_drift_full(&inputs).unwrap().value;
        assert!((plan.frozen(Expansion::Full, 2) - reference).abs() < 1e-15);
    }

    #[test]
    fn direct_kernel_respects_cap() {
        let m = model(8, |_, _| 0.18, 0.0);
        assert!(matches!(
            DriftPlan::new(&m, 0, DriftKernel::Direct, &[Expansion::Full], 5),
            Err(DriftError::SizeGuard { tail: 7, cap: 5 })
        ));
        assert!(DriftPlan::new(&m, 0, DriftKernel::Direct, &[Expansion::SecondOrder], 5).is_ok());
    }

    #[test]
    fn table_limit() {
        let m = model(30, |_, r| 0.001 * r as f64, 0.0);
        assert!(matches!(
            DriftPlan::new(&m, 0, DriftKernel::Tabulated, &[Expansion::Full], 25),
            Err(DriftError::TableTooLarge { .. })
        ));
    }
}
