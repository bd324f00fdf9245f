use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::stats::Moments;
use super::step::{evolve_step, PathState, StepContext, Workspace};
use super::{Scheme, SimulationError, SimulationGrid};
use crate::drift::{DriftCost, DriftKernel, DriftMode, DriftPlan, Expansion, DEFAULT_FULL_CAP};
use crate::levy::NigDraw;
use crate::market::{validate_model, MarketModel};
use crate::pricing::{McEstimate, PairedEstimate, Product, TerminalRates};

/// A discretization scheme together with a drift mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub scheme: Scheme,
    pub mode: DriftMode,
}

impl Method {
    pub fn new(scheme: Scheme, mode: DriftMode) -> Self {
        Self { scheme, mode }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.scheme.name(), self.mode.name())
    }

    fn expansions(&self) -> Vec<Expansion> {
        match self.mode {
            DriftMode::Frozen => vec![Expansion::Full],
            m => vec![m.expansion()],
        }
    }
}

/// Random streams: unit `u` draws from ChaCha8 seeded with the master seed
/// on stream `u`, so every unit's numbers are fixed independently of how
/// units are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPolicy {
    pub seed: u64,
    /// Pair each path with its mirror image, sharing the subordinator draws
    /// and flipping the Gaussian components.
    pub antithetic: bool,
}

impl RngPolicy {
    pub fn unit_rng(&self, unit: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(unit);
        rng
    }

    pub fn mirrors(&self) -> &'static [bool] {
        if self.antithetic {
            &[false, true]
        } else {
            &[false]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    /// Requested paths; rounded up to an even number with antithetics.
    pub n_paths: u64,
    pub rng: RngPolicy,
    pub kernel: DriftKernel,
    pub full_cap: usize,
    /// Units per work block. Part of the reduction order, so results
    /// depend on it but not on the thread count.
    pub block_units: usize,
    pub max_failure_fraction: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            n_paths: 50_000,
            rng: RngPolicy {
                seed: 1,
                antithetic: false,
            },
            kernel: DriftKernel::Tabulated,
            full_cap: DEFAULT_FULL_CAP,
            block_units: 512,
            max_failure_fraction: 1e-4,
        }
    }
}

impl SimulationOptions {
    pub fn n_units(&self) -> u64 {
        if self.rng.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub methods: Vec<Method>,
    pub products: Vec<Product>,
    /// `[method][product]`.
    pub estimates: Vec<Vec<McEstimate>>,
    /// `[method][product]`: method minus method 0 on the same units.
    pub differences: Vec<Vec<PairedEstimate>>,
    /// Drift work along the paths, per method.
    pub path_costs: Vec<DriftCost>,
    /// Work spent building the drift plans.
    pub plan_cost: DriftCost,
    /// Time spent in each method, summed over threads.
    pub method_seconds: Vec<f64>,
    pub wall_seconds: f64,
    pub n_units: u64,
    pub failures: u64,
}

impl SimulationResult {
    pub fn estimate(&self, method: usize, product: usize) -> &McEstimate {
        &self.estimates[method][product]
    }

    pub fn difference(&self, method: usize, product: usize) -> &PairedEstimate {
        &self.differences[method][product]
    }
}

/// `log L(0, T_i)` with an unused zero at index 0.
pub fn initial_log_rates(model: &MarketModel) -> Vec<f64> {
    (0..=model.n_rates())
        .map(|i| if i == 0 { 0.0 } else { model.curve.forward(i).ln() })
        .collect()
}

/// Driver draws of one unit, one per grid segment.
#[derive(Debug, Clone, Default)]
pub struct UnitDraws {
    pub nig: Vec<NigDraw>,
    pub brownian: Vec<f64>,
}

impl UnitDraws {
    pub fn generate(model: &MarketModel, grid: &SimulationGrid, rng: &mut ChaCha8Rng) -> Result<Self, SimulationError> {
        let mut out = Self::default();
        out.fill(model, grid, rng)?;
        Ok(out)
    }

    fn fill(&mut self, model: &MarketModel, grid: &SimulationGrid, rng: &mut ChaCha8Rng) -> Result<(), SimulationError> {
        self.nig.clear();
        self.brownian.clear();
        for seg in grid.segments() {
            let spec = model.driver.spec(seg.period);
            self.nig.push(spec.nig.draw(seg.dt, rng)?);
            let w = if spec.diffusion > 0.0 {
                StandardNormal.sample(rng)
            } else {
                0.0
            };
            self.brownian.push(w);
        }
        Ok(())
    }
}

/// `shocks[k * (N+1) + i] = sum over segments of step k of lambda(T_i) dH`.
pub fn unit_shocks(model: &MarketModel, grid: &SimulationGrid, draws: &UnitDraws, mirror: bool, shocks: &mut Vec<f64>) {
    let n = model.n_rates();
    shocks.clear();
    shocks.resize(grid.n_steps() * (n + 1), 0.0);
    let mut seg_index = 0;
    for (k, step) in grid.steps().iter().enumerate() {
        let row = &mut shocks[k * (n + 1)..(k + 1) * (n + 1)];
        for seg in grid.step_segments(step) {
            let spec = model.driver.spec(seg.period);
            let dh = spec.martingale_increment(seg.dt, draws.nig[seg_index], draws.brownian[seg_index], mirror);
            for (i, r) in row.iter_mut().enumerate().skip(step.first_live) {
                *r += model.vols.loading(seg.period, i) * dh;
            }
            seg_index += 1;
        }
    }
}

struct Failure {
    unit: u64,
    step: usize,
    rate: usize,
    reason: String,
}

struct BlockOutput {
    values: Vec<Moments>,
    diffs: Vec<Moments>,
    costs: Vec<DriftCost>,
    nanos: Vec<u64>,
    failures: u64,
    first_failure: Option<Failure>,
}

struct Shared<'a> {
    model: &'a MarketModel,
    /// Distinct grids; all share the segment list of the first.
    grids: Vec<&'a SimulationGrid>,
    /// Index into `grids` per method.
    grid_of: Vec<usize>,
    methods: &'a [Method],
    products: &'a [Product],
    by_expiry: Vec<Vec<usize>>,
    plans: Vec<DriftPlan>,
    accruals: Vec<f64>,
    z0: Vec<f64>,
    options: &'a SimulationOptions,
}

/// Runs every method on the same driver increments and returns per-method
/// estimates plus paired differences against the first method.
pub fn run_simulation(
    model: &MarketModel,
    grid: &SimulationGrid,
    methods: &[Method],
    products: &[Product],
    options: &SimulationOptions,
) -> Result<SimulationResult, SimulationError> {
    run_on_grids(model, vec![grid], vec![0; methods.len()], methods, products, options)
}

/// Like [`run_simulation`], but method 0 runs on `reference_grid` and the
/// others on `grid`. Both grids must be built from the same driver
/// segments (see [`SimulationGrid::per_tenor_refined`]), so the paired
/// differences measure each method against the reference path by path.
pub fn run_with_reference(
    model: &MarketModel,
    reference_grid: &SimulationGrid,
    grid: &SimulationGrid,
    methods: &[Method],
    products: &[Product],
    options: &SimulationOptions,
) -> Result<SimulationResult, SimulationError> {
    if reference_grid.segments() != grid.segments() {
        return Err(SimulationError::Grid(format!(
            "grids {} and {} are driven by different increments",
            reference_grid.describe(),
            grid.describe()
        )));
    }
    let grid_of = (0..methods.len()).map(|m| usize::from(m > 0)).collect();
    run_on_grids(model, vec![reference_grid, grid], grid_of, methods, products, options)
}

fn run_on_grids(
    model: &MarketModel,
    grids: Vec<&SimulationGrid>,
    grid_of: Vec<usize>,
    methods: &[Method],
    products: &[Product],
    options: &SimulationOptions,
) -> Result<SimulationResult, SimulationError> {
    let started = Instant::now();
    if methods.is_empty() {
        return Err(SimulationError::NoMethods);
    }
    let report = validate_model(model);
    if !report.passed() {
        return Err(SimulationError::InvalidModel(report.to_string()));
    }
    let n = model.n_rates();
    for grid in &grids {
        if grid.n_rates() != n {
            return Err(SimulationError::Grid(format!(
                "grid built for {} rates, model has {n}",
                grid.n_rates()
            )));
        }
    }
    let mut by_expiry = vec![Vec::new(); n + 1];
    for (p, product) in products.iter().enumerate() {
        product.validate(n)?;
        for grid in &grids {
            if !grid.observed_expiries().contains(&product.expiry()) {
                return Err(SimulationError::Unobserved {
                    product: product.to_string(),
                    expiry: product.expiry(),
                });
            }
        }
        by_expiry[product.expiry()].push(p);
    }

    let mut expansions: Vec<Expansion> = Vec::new();
    for m in methods {
        for e in m.expansions() {
            if !expansions.contains(&e) {
                expansions.push(e);
            }
        }
    }
    let periods = grids
        .iter()
        .flat_map(|g| g.steps().iter().map(|s| s.period))
        .max()
        .unwrap_or(0)
        + 1;
    let plans = (0..periods)
        .map(|j| DriftPlan::new(model, j, options.kernel, &expansions, options.full_cap))
        .collect::<Result<Vec<_>, _>>()?;
    let mut plan_cost = DriftCost::default();
    for p in &plans {
        plan_cost += p.build_cost();
    }

    let shared = Shared {
        model,
        grids,
        grid_of,
        methods,
        products,
        by_expiry,
        plans,
        accruals: model.tenor.accruals(),
        z0: initial_log_rates(model),
        options,
    };

    let units = options.n_units();
    let block = options.block_units.max(1) as u64;
    let n_blocks = units.div_ceil(block);
    let outputs: Vec<BlockOutput> = (0..n_blocks)
        .into_par_iter()
        .map(|b| run_block(&shared, b * block, ((b + 1) * block).min(units)))
        .collect();

    let (mm, pp) = (methods.len(), products.len());
    let mut values = vec![Moments::default(); mm * pp];
    let mut diffs = vec![Moments::default(); mm * pp];
    let mut costs = vec![DriftCost::default(); mm];
    let mut nanos = vec![0u64; mm];
    let mut failures = 0;
    let mut first_failure = None;
    for out in outputs {
        for (a, b) in values.iter_mut().zip(&out.values) {
            a.merge(b);
        }
        for (a, b) in diffs.iter_mut().zip(&out.diffs) {
            a.merge(b);
        }
        for (a, b) in costs.iter_mut().zip(out.costs) {
            *a += b;
        }
        for (a, b) in nanos.iter_mut().zip(out.nanos) {
            *a += b;
        }
        failures += out.failures;
        if first_failure.is_none() {
            first_failure = out.first_failure;
        }
    }
    if failures as f64 > options.max_failure_fraction * units as f64 {
        let f = first_failure.expect("failures recorded");
        return Err(SimulationError::TooManyFailures {
            failed: failures,
            units,
            first_unit: f.unit,
            step: f.step,
            rate: f.rate,
            reason: f.reason,
        });
    }

    let paths_per_unit = options.rng.mirrors().len() as u64;
    let good = units - failures;
    let estimates = (0..mm)
        .map(|m| {
            (0..pp)
                .map(|p| {
                    let v = &values[m * pp + p];
                    McEstimate {
                        price: v.mean,
                        std_error: v.std_error(),
                        n_paths: good * paths_per_unit,
                        n_units: good,
                    }
                })
                .collect()
        })
        .collect();
    let differences = (0..mm)
        .map(|m| {
            (0..pp)
                .map(|p| {
                    let d = &diffs[m * pp + p];
                    PairedEstimate {
                        diff: if m == 0 { 0.0 } else { d.mean },
                        std_error: if m == 0 { 0.0 } else { d.std_error() },
                        n_units: good,
                    }
                })
                .collect()
        })
        .collect();

    Ok(SimulationResult {
        methods: methods.to_vec(),
        products: products.to_vec(),
        estimates,
        differences,
        path_costs: costs,
        plan_cost,
        method_seconds: nanos.iter().map(|&n| n as f64 * 1e-9).collect(),
        wall_seconds: started.elapsed().as_secs_f64(),
        n_units: good,
        failures,
    })
}

/// Single-method convenience wrapper.
pub fn simulate(
    model: &MarketModel,
    method: Method,
    grid: &SimulationGrid,
    products: &[Product],
    options: &SimulationOptions,
) -> Result<(Vec<McEstimate>, DriftCost), SimulationError> {
    let r = run_simulation(model, grid, &[method], products, options)?;
    Ok((r.estimates.into_iter().next().unwrap_or_default(), r.path_costs[0]))
}

fn run_block(shared: &Shared, from: u64, to: u64) -> BlockOutput {
    let n = shared.model.n_rates();
    let (mm, pp) = (shared.methods.len(), shared.products.len());
    let mirrors = shared.options.rng.mirrors();
    let scale = 1.0 / mirrors.len() as f64;
    let mut out = BlockOutput {
        values: vec![Moments::default(); mm * pp],
        diffs: vec![Moments::default(); mm * pp],
        costs: vec![DriftCost::default(); mm],
        nanos: vec![0; mm],
        failures: 0,
        first_failure: None,
    };
    let mut draws = UnitDraws::default();
    let mut shocks = vec![Vec::new(); shared.grids.len()];
    let mut state = PathState::new(&shared.z0);
    let mut work = Workspace::new(n);
    let mut rates = vec![0.0; n + 1];
    let mut unit_values = vec![0.0; mm * pp];

    'units: for unit in from..to {
        let mut rng = shared.options.rng.unit_rng(unit);
        if let Err(e) = draws.fill(shared.model, shared.grids[0], &mut rng) {
            record_failure(&mut out, unit, 0, 0, e.to_string());
            continue;
        }
        unit_values.iter_mut().for_each(|v| *v = 0.0);
        for &mirror in mirrors {
            for (g, grid) in shared.grids.iter().enumerate() {
                unit_shocks(shared.model, grid, &draws, mirror, &mut shocks[g]);
            }
            for (m, method) in shared.methods.iter().enumerate() {
                let g = shared.grid_of[m];
                let t0 = Instant::now();
                let result = run_path(shared, shared.grids[g], *method, &shocks[g], &mut state, &mut work, &mut rates, &mut out.costs[m], |p, v| {
                    unit_values[m * pp + p] += scale * v;
                });
                out.nanos[m] += t0.elapsed().as_nanos() as u64;
                if let Err((step, rate, reason)) = result {
                    record_failure(&mut out, unit, step, rate, reason);
                    continue 'units;
                }
            }
        }
        for m in 0..mm {
            for p in 0..pp {
                let v = unit_values[m * pp + p];
                out.values[m * pp + p].push(v);
                if m > 0 {
                    out.diffs[m * pp + p].push(v - unit_values[p]);
                }
            }
        }
    }
    out
}

fn record_failure(out: &mut BlockOutput, unit: u64, step: usize, rate: usize, reason: String) {
    out.failures += 1;
    if out.first_failure.is_none() {
        out.first_failure = Some(Failure {
            unit,
            step,
            rate,
            reason,
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn run_path<F: FnMut(usize, f64)>(
    shared: &Shared,
    grid: &SimulationGrid,
    method: Method,
    shocks: &[f64],
    state: &mut PathState,
    work: &mut Workspace,
    rates: &mut [f64],
    cost: &mut DriftCost,
    mut emit: F,
) -> Result<(), (usize, usize, String)> {
    let n = shared.model.n_rates();
    state.reset(&shared.z0);
    for (k, step) in grid.steps().iter().enumerate() {
        let ctx = StepContext {
            plan: &shared.plans[step.period],
            dt: step.dt(),
            first_live: step.first_live,
            shock: &shocks[k * (n + 1)..(k + 1) * (n + 1)],
            accruals: &shared.accruals,
        };
        evolve_step(method.scheme, method.mode, &ctx, state, work, cost).map_err(|e| (k, 0, e.to_string()))?;
        if let Some(i) = (step.first_live..=n).find(|&i| !state.z[i].is_finite()) {
            return Err((k, i, format!("log-rate became {}", state.z[i])));
        }
        if let Some(e) = step.observe {
            for l in e..=n {
                rates[l] = state.z[l].exp();
            }
            let view = TerminalRates {
                expiry: e,
                rates,
                accruals: &shared.accruals,
                terminal_discount: shared.model.curve.terminal_discount(),
            };
            for &p in &shared.by_expiry[e] {
                let v = shared.products[p].payoff(&view).map_err(|err| (k, e, err.to_string()))?;
                emit(p, v);
            }
        }
    }
    Ok(())
}
