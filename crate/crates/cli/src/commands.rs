//! The four subcommands. Each returns its output files and bookkeeping;
//! writing them to disk is left to [`finish`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use levy_lmm::drift::{
    jump_drift_first_order, jump_drift_full_capped, jump_drift_second_order, weight_from_log, DriftCost,
    DriftError, DriftInputs, DriftKernel, DriftMode,
};
use levy_lmm::market::{validate_inputs, MarketModel};
use levy_lmm::pricing::{black76_vega, McEstimate, PairedEstimate, Product};
use levy_lmm::simulation::{
    run_simulation, run_with_reference, Method, SimulationError, SimulationGrid, SimulationResult,
};

use crate::config::{build_model, model_inputs, ExperimentConfig, GridKind};
use crate::output::{
    content_hash, write_files, NumberFormat, OutputFile, Table, BENCH_HEADER, COMPARE_HEADER, DRIFT_COST_HEADER,
    FITS_HEADER, PRICE_HEADER, SCHEMA_VERSION,
};

#[derive(Debug, Clone)]
pub struct CommandReport {
    pub command: &'static str,
    pub files: Vec<OutputFile>,
    /// Seconds per label, for the manifest.
    pub timings: Vec<(String, f64)>,
    pub costs: Vec<(String, DriftCost)>,
    /// Human-readable summary printed by the binary.
    pub summary: String,
}

impl CommandReport {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// A simulation over the configured grid, with the grid description.
pub struct Simulated {
    pub result: SimulationResult,
    pub grid: String,
}

/// Runs `methods` on the configured grid. Long-stepping runs one grid per
/// expiry. With `reference` set and `reference_substeps > 1`, method 0 runs
/// on the refined grid.
pub fn simulate_config(
    config: &ExperimentConfig,
    model: &MarketModel,
    methods: &[Method],
    products: &[Product],
    reference: bool,
) -> Result<Simulated> {
    let options = config.options()?;
    let sub = config.simulation.reference_substeps;
    match config.simulation.grid {
        GridKind::PerTenor => {
            let steps = config.simulation.steps_per_tenor;
            if reference && sub > 1 {
                let fine = SimulationGrid::per_tenor(&model.tenor, steps * sub)?;
                let coarse = SimulationGrid::per_tenor_refined(&model.tenor, steps, sub)?;
                let result = run_with_reference(model, &fine, &coarse, methods, products, &options)?;
                Ok(Simulated {
                    result,
                    grid: format!("{} vs {}", fine.describe(), coarse.describe()),
                })
            } else {
                let grid = config.grid(&model.tenor)?;
                let result = run_simulation(model, &grid, methods, products, &options)?;
                Ok(Simulated {
                    result,
                    grid: grid.describe(),
                })
            }
        }
        GridKind::LongStep => {
            if reference && sub > 1 {
                bail!("simulation.reference_substeps: a refined reference needs the per-tenor grid");
            }
            let started = Instant::now();
            let mut by_expiry: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (p, product) in products.iter().enumerate() {
                by_expiry.entry(product.expiry()).or_default().push(p);
            }
            let (mm, pp) = (methods.len(), products.len());
            let mut merged = SimulationResult {
                methods: methods.to_vec(),
                products: products.to_vec(),
                estimates: vec![vec![McEstimate::default(); pp]; mm],
                differences: vec![vec![PairedEstimate::default(); pp]; mm],
                path_costs: vec![DriftCost::default(); mm],
                plan_cost: DriftCost::default(),
                method_seconds: vec![0.0; mm],
                wall_seconds: 0.0,
                n_units: options.n_units(),
                failures: 0,
            };
            for (&e, indices) in &by_expiry {
                let grid = SimulationGrid::long_step(&model.tenor, e)?;
                let subset: Vec<Product> = indices.iter().map(|&p| products[p]).collect();
                let r = run_simulation(model, &grid, methods, &subset, &options)?;
                for m in 0..mm {
                    for (k, &p) in indices.iter().enumerate() {
                        merged.estimates[m][p] = r.estimates[m][k];
                        merged.differences[m][p] = r.differences[m][k];
                    }
                    merged.path_costs[m] += r.path_costs[m];
                    merged.method_seconds[m] += r.method_seconds[m];
                }
                merged.plan_cost += r.plan_cost;
                merged.n_units = merged.n_units.min(r.n_units);
                merged.failures += r.failures;
            }
            merged.wall_seconds = started.elapsed().as_secs_f64();
            Ok(Simulated {
                result: merged,
                grid: "long-step".into(),
            })
        }
    }
}

fn implied(product: &Product, price: f64, model: &MarketModel) -> Option<f64> {
    product
        .implied_vol(price, &model.tenor, &model.curve)
        .map(|r| r.unwrap_or(f64::NAN))
}

fn product_columns(product: &Product, fmt: NumberFormat) -> Vec<String> {
    vec![
        product.to_string(),
        product.kind().to_string(),
        product.expiry().to_string(),
        product.end().to_string(),
        fmt.f(product.strike()),
    ]
}

fn method_bookkeeping(result: &SimulationResult) -> (Vec<(String, f64)>, Vec<(String, DriftCost)>) {
    let mut timings = vec![("wall".to_string(), result.wall_seconds)];
    let mut costs = vec![("plan".to_string(), result.plan_cost)];
    for (m, method) in result.methods.iter().enumerate() {
        let label = format!("{m}:{}", method.label());
        timings.push((label.clone(), result.method_seconds[m]));
        costs.push((label, result.path_costs[m]));
    }
    (timings, costs)
}

/// One row per product per method: price, standard error, 95% half-width
/// and implied volatility.
pub fn price(config: &ExperimentConfig) -> Result<CommandReport> {
    let model = config.model()?;
    let methods = config.methods()?;
    let products = config.products(&model.tenor, &model.curve)?;
    let fmt = NumberFormat::new(config.output.significant_digits);
    let mut table = Table::new(&PRICE_HEADER);
    let mut summary = String::new();
    let (mut timings, mut costs) = (Vec::new(), Vec::new());
    if !products.is_empty() {
        let sim = simulate_config(config, &model, &methods, &products, false)?;
        let r = &sim.result;
        for (p, product) in products.iter().enumerate() {
            for (m, method) in methods.iter().enumerate() {
                let e = r.estimate(m, p);
                let mut row = product_columns(product, fmt);
                row.extend([
                    method.scheme.name().to_string(),
                    method.mode.name().to_string(),
                    fmt.f(e.price),
                    fmt.f(e.std_error),
                    fmt.f(e.ci95()),
                    fmt.opt(implied(product, e.price, &model)),
                    e.n_paths.to_string(),
                ]);
                table.push(row);
            }
        }
        (timings, costs) = method_bookkeeping(r);
        writeln!(
            summary,
            "priced {} products with {} methods on {} ({} units) in {:.2}s",
            products.len(),
            methods.len(),
            sim.grid,
            r.n_units,
            r.wall_seconds
        )?;
    } else {
        writeln!(summary, "no products configured")?;
    }
    Ok(CommandReport {
        command: "price",
        files: vec![OutputFile {
            name: "price.csv".into(),
            bytes: table.to_bytes(),
        }],
        timings,
        costs,
        summary,
    })
}

/// Paired differences of every method against the first one, in basis
/// points of price and of implied volatility.
pub fn compare(config: &ExperimentConfig) -> Result<CommandReport> {
    let model = config.model()?;
    let methods = config.methods()?;
    if methods.len() < 2 {
        bail!("simulation.schemes/modes: compare needs at least two scheme/mode combinations");
    }
    let products = config.products(&model.tenor, &model.curve)?;
    let fmt = NumberFormat::new(config.output.significant_digits);
    let mut table = Table::new(&COMPARE_HEADER);
    let mut summary = String::new();
    let (mut timings, mut costs) = (Vec::new(), Vec::new());
    if !products.is_empty() {
        let sim = simulate_config(config, &model, &methods, &products, true)?;
        let r = &sim.result;
        let reference = methods[0].label();
        let mut worst = vec![(0.0f64, 0.0f64); methods.len()];
        for (p, product) in products.iter().enumerate() {
            let base = r.estimate(0, p);
            let base_iv = implied(product, base.price, &model);
            let vega = match (product.black_reference(&model.tenor, &model.curve), base_iv) {
                (Some(b), Some(iv)) if iv.is_finite() => {
                    Some(black76_vega(b.forward, product.strike(), iv, b.expiry, b.annuity))
                }
                _ => None,
            };
            for (m, method) in methods.iter().enumerate() {
                let e = r.estimate(m, p);
                let d = r.difference(m, p);
                let iv = implied(product, e.price, &model);
                let diff_iv = match (base_iv, iv) {
                    (Some(a), Some(b)) => Some((b - a) * 1e4),
                    _ => None,
                };
                let se_iv = vega.map(|v| d.std_error / v * 1e4);
                let w = &mut worst[m];
                w.0 = w.0.max(d.diff.abs() * 1e4);
                if let Some(x) = diff_iv {
                    w.1 = w.1.max(x.abs());
                }
                let mut row = product_columns(product, fmt);
                row.extend([
                    reference.clone(),
                    method.label(),
                    fmt.f(base.price),
                    fmt.f(e.price),
                    fmt.f(d.diff * 1e4),
                    fmt.f(d.std_error * 1e4),
                    fmt.opt(base_iv),
                    fmt.opt(iv),
                    fmt.opt(diff_iv),
                    fmt.opt(se_iv),
                    d.n_units.to_string(),
                    sim.grid.clone(),
                ]);
                table.push(row);
            }
        }
        (timings, costs) = method_bookkeeping(r);
        writeln!(summary, "reference {reference} on {}", sim.grid)?;
        for (m, method) in methods.iter().enumerate().skip(1) {
            writeln!(
                summary,
                "  {:<24} max |diff| {:.6} bp price, {:.6} bp implied vol",
                method.label(),
                worst[m].0,
                worst[m].1
            )?;
        }
    } else {
        writeln!(summary, "no products configured")?;
    }
    Ok(CommandReport {
        command: "compare",
        files: vec![OutputFile {
            name: "compare.csv".into(),
            bytes: table.to_bytes(),
        }],
        timings,
        costs,
        summary,
    })
}

struct BenchPoint {
    n: usize,
    paths: u64,
    method: Method,
    wall: f64,
    evals_per_path: f64,
}

/// Wall time and drift-cost counters over a grid of rate counts and path
/// counts, a per-tail drift-cost table and fitted growth laws.
pub fn bench(config: &ExperimentConfig) -> Result<CommandReport> {
    let methods = config.methods()?;
    let fmt = NumberFormat::new(config.output.significant_digits);
    let b = &config.bench;
    if b.n_values.is_empty() || b.path_values.is_empty() {
        bail!("bench.n_values and bench.path_values must not be empty");
    }
    let mut options = config.options()?;
    options.kernel = DriftKernel::Direct;
    options.full_cap = b.full_cap;

    let mut table = Table::new(&BENCH_HEADER);
    let mut points = Vec::new();
    let mut summary = String::new();
    let mut timings = Vec::new();
    let mut costs = Vec::new();
    for &n in &b.n_values {
        let model = build_model(&config.model, n).with_context(|| format!("bench.n_values: N = {n}"))?;
        let grid = SimulationGrid::per_tenor(&model.tenor, config.simulation.steps_per_tenor)?;
        let products: Vec<Product> = (1..=n)
            .map(|i| Product::Caplet {
                strike: model.curve.forward(i),
                expiry: i,
            })
            .collect();
        for &paths in &b.path_values {
            options.n_paths = paths;
            for method in &methods {
                let needs_full = matches!(method.mode, DriftMode::Full | DriftMode::Frozen);
                let mut row = vec![
                    n.to_string(),
                    paths.to_string(),
                    method.scheme.name().to_string(),
                    method.mode.name().to_string(),
                ];
                if needs_full && n - 1 > b.full_cap {
                    row.push(format!("guard: tail {} exceeds cap {}", n - 1, b.full_cap));
                    row.extend(std::iter::repeat(String::new()).take(5));
                    table.push(row);
                    continue;
                }
                match run_simulation(&model, &grid, &[*method], &products, &options) {
                    Ok(r) => {
                        let c = r.path_costs[0];
                        let per_path = c.cumulant_evals as f64 / paths as f64;
                        row.extend([
                            "ok".to_string(),
                            fmt.f(r.wall_seconds),
                            fmt.f(r.wall_seconds / paths as f64),
                            c.cumulant_evals.to_string(),
                            c.multiply_adds.to_string(),
                            fmt.f(per_path),
                        ]);
                        let label = format!("N={n},paths={paths},{}", method.label());
                        timings.push((label.clone(), r.wall_seconds));
                        costs.push((label, c));
                        points.push(BenchPoint {
                            n,
                            paths,
                            method: *method,
                            wall: r.wall_seconds,
                            evals_per_path: per_path,
                        });
                    }
                    Err(SimulationError::Drift(e @ DriftError::SizeGuard { .. })) => {
                        row.push(format!("guard: {e}"));
                        row.extend(std::iter::repeat(String::new()).take(5));
                    }
                    Err(e) => return Err(e.into()),
                }
                table.push(row);
            }
        }
    }

    let (cost_table, cost_points) = drift_cost_table(config)?;
    let fits = fit_table(&methods, &points, &cost_points, fmt);
    writeln!(summary, "bench: {} timed runs", points.len())?;
    for row in &fits.rows {
        writeln!(summary, "  {}", row.join(" "))?;
    }
    Ok(CommandReport {
        command: "bench",
        files: vec![
            OutputFile {
                name: "bench.csv".into(),
                bytes: table.to_bytes(),
            },
            OutputFile {
                name: "bench_drift_cost.csv".into(),
                bytes: cost_table.to_bytes(),
            },
            OutputFile {
                name: "bench_fits.csv".into(),
                bytes: fits.to_bytes(),
            },
        ],
        timings,
        costs,
        summary,
    })
}

/// Cost of one drift evaluation per mode and tail length, from the
/// reference drift functions on the configured model.
fn drift_cost_table(config: &ExperimentConfig) -> Result<(Table, Vec<(DriftMode, usize, f64)>)> {
    let inputs = model_inputs(&config.model, 1)?;
    let spec = inputs.driver.spec(0);
    let lam = config.model.volatility;
    let accrual = config.model.accrual;
    let w0 = weight_from_log(((config.model.rate * accrual).exp_m1() / accrual).ln(), accrual);
    let cap = config.simulation.full_cap;
    let mut table = Table::new(&DRIFT_COST_HEADER);
    let mut points = Vec::new();
    for mode in [DriftMode::Full, DriftMode::FirstOrder, DriftMode::SecondOrder] {
        for tail in 0..=config.bench.max_tail {
            let weights = vec![w0; tail];
            let loadings = vec![lam; tail];
            let x = DriftInputs {
                rate: 1,
                time: 0.0,
                loading: lam,
                weights: &weights,
                loadings: &loadings,
                diffusion: spec.diffusion,
                cumulant: spec,
            };
            let value = match mode {
                DriftMode::Full => jump_drift_full_capped(&x, cap),
                DriftMode::FirstOrder => jump_drift_first_order(&x),
                _ => jump_drift_second_order(&x),
            };
            let mut row = vec![mode.name().to_string(), tail.to_string()];
            match value {
                Ok(v) => {
                    row.extend([
                        "ok".to_string(),
                        v.cost.cumulant_evals.to_string(),
                        v.cost.multiply_adds.to_string(),
                    ]);
                    points.push((mode, tail, v.cost.cumulant_evals as f64));
                }
                Err(e @ DriftError::SizeGuard { .. }) => {
                    row.extend([format!("guard: {e}"), String::new(), String::new()]);
                }
                Err(e) => return Err(e.into()),
            }
            table.push(row);
        }
    }
    Ok((table, points))
}

/// Least-squares line through `(x, y)`: slope, intercept and R^2.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, my - slope * mx, r2))
}

/// `y ~ c x^k` (law "power", parameter k) or `y ~ c b^x` (law
/// "exponential", parameter b).
fn fit_law(points: &[(f64, f64)], exponential: bool) -> Option<(f64, f64, usize)> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
    let xs: Vec<f64> = pts.iter().map(|p| if exponential { p.0 } else { p.0.ln() }).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, _, r2) = fit_line(&xs, &ys)?;
    Some((if exponential { slope.exp() } else { slope }, r2, pts.len()))
}

fn fit_table(
    methods: &[Method],
    points: &[BenchPoint],
    cost_points: &[(DriftMode, usize, f64)],
    fmt: NumberFormat,
) -> Table {
    let mut table = Table::new(&FITS_HEADER);
    let mut push = |quantity: &str, method: Option<&Method>, mode: DriftMode, fixed: String, pts: &[(f64, f64)], exp: bool| {
        if let Some((param, r2, k)) = fit_law(pts, exp) {
            table.push(vec![
                quantity.to_string(),
                method.map(|m| m.scheme.name().to_string()).unwrap_or_default(),
                mode.name().to_string(),
                fixed,
                if exp { "exponential" } else { "power" }.to_string(),
                fmt.f(param),
                fmt.f(r2),
                k.to_string(),
            ]);
        }
    };
    let mut seen = Vec::new();
    for method in methods {
        if seen.contains(method) {
            continue;
        }
        seen.push(*method);
        let mine: Vec<&BenchPoint> = points.iter().filter(|p| p.method == *method).collect();
        let mut ns: Vec<usize> = mine.iter().map(|p| p.n).collect();
        ns.dedup();
        for n in ns {
            let pts: Vec<(f64, f64)> = mine
                .iter()
                .filter(|p| p.n == n)
                .map(|p| (p.paths as f64, p.wall))
                .collect();
            push("wall_vs_paths", Some(method), method.mode, format!("n_rates={n}"), &pts, false);
        }
        let exponential = method.mode == DriftMode::Full;
        if let Some(top) = mine.iter().map(|p| p.paths).max() {
            let at_top: Vec<&&BenchPoint> = mine.iter().filter(|p| p.paths == top).collect();
            let evals: Vec<(f64, f64)> = at_top.iter().map(|p| (p.n as f64, p.evals_per_path)).collect();
            push("evals_vs_n", Some(method), method.mode, format!("paths={top}"), &evals, exponential);
            let wall: Vec<(f64, f64)> = at_top.iter().map(|p| (p.n as f64, p.wall)).collect();
            push("wall_vs_n", Some(method), method.mode, format!("paths={top}"), &wall, exponential);
        }
    }
    for mode in [DriftMode::Full, DriftMode::FirstOrder, DriftMode::SecondOrder] {
        let exponential = mode == DriftMode::Full;
        // the tiny tails are dominated by constant terms
        let from = if exponential { 1 } else { 4 };
        let pts: Vec<(f64, f64)> = cost_points
            .iter()
            .filter(|p| p.0 == mode && p.1 >= from)
            .map(|p| (p.1 as f64, p.2))
            .collect();
        push("drift_evals_vs_tail", None, mode, format!("tail>={from}"), &pts, exponential);
    }
    table
}

/// Condition checks as a text report.
pub fn validate(config: &ExperimentConfig) -> Result<(CommandReport, bool)> {
    let inputs = model_inputs(&config.model, config.model.n_rates)?;
    let report = validate_inputs(&inputs.tenor, &inputs.discounts, &inputs.vols, &inputs.driver);
    let mut text = String::new();
    let m = &config.model;
    writeln!(
        text,
        "model: N = {}, delta = {}, rate = {}, volatility = {}, NIG(alpha = {}, beta = {}, mu = {}, delta_bar = {})",
        m.n_rates, m.accrual, m.rate, m.volatility, m.alpha, m.beta, m.mu, m.delta_bar
    )?;
    write!(text, "{report}")?;
    writeln!(text, "{}", if report.passed() { "all conditions hold" } else { "conditions violated" })?;
    Ok((
        CommandReport {
            command: "validate",
            files: vec![OutputFile {
                name: "validate.txt".into(),
                bytes: text.clone().into_bytes(),
            }],
            timings: Vec::new(),
            costs: Vec::new(),
            summary: text,
        },
        report.passed(),
    ))
}

/// Writes the report's files and a manifest beside them.
pub fn finish(dir: &Path, config: &ExperimentConfig, report: &CommandReport, threads: usize) -> Result<PathBuf> {
    write_files(dir, &report.files).with_context(|| format!("writing outputs to {}", dir.display()))?;
    let mut doc = toml::Table::try_from(config).context("serializing config")?;
    let mut run = toml::Table::new();
    run.insert("command".into(), report.command.into());
    run.insert("schema_version".into(), i64::from(SCHEMA_VERSION).into());
    run.insert("threads".into(), (threads as i64).into());
    doc.insert("run".into(), run.into());
    let mut versions = toml::Table::new();
    versions.insert("levy-lmm".into(), levy_lmm::VERSION.into());
    versions.insert("levy-lmm-cli".into(), env!("CARGO_PKG_VERSION").into());
    doc.insert("versions".into(), versions.into());
    let mut timings = toml::Table::new();
    for (k, v) in &report.timings {
        timings.insert(k.clone(), (*v).into());
    }
    doc.insert("timings".into(), timings.into());
    let mut costs = toml::Table::new();
    for (k, c) in &report.costs {
        let mut t = toml::Table::new();
        t.insert("cumulant_evals".into(), (c.cumulant_evals as i64).into());
        t.insert("multiply_adds".into(), (c.multiply_adds as i64).into());
        costs.insert(k.clone(), t.into());
    }
    doc.insert("costs".into(), costs.into());
    let mut outputs = toml::Table::new();
    for f in &report.files {
        outputs.insert(f.name.clone(), content_hash(&f.bytes).into());
    }
    doc.insert("outputs".into(), outputs.into());
    let path = dir.join(format!("{}_manifest.toml", report.command));
    std::fs::write(&path, toml::to_string(&doc).context("serializing manifest")?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

