//! Experiment configuration. Every field defaults to the reference setup:
//! a flat 4% continuously compounded curve on a semi-annual tenor, flat
//! volatility 0.18, and a symmetric NIG driver with unit variance.

use std::fmt;
use std::path::Path;

use levy_lmm::drift::{DriftKernel, DriftMode, DEFAULT_FULL_CAP};
use levy_lmm::levy::{DriverSchedule, LevyDriverSpec, NigParams};
use levy_lmm::market::{initial_forward_rates, InitialCurve, MarketModel, TenorStructure, VolatilityStructure};
use levy_lmm::pricing::Product;
use levy_lmm::simulation::{Method, RngPolicy, Scheme, SimulationGrid, SimulationOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_error(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_rates: usize,
    pub accrual: f64,
    /// Continuously compounded zero rate: `B(0, T) = exp(-rate T)`.
    pub rate: f64,
    pub volatility: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub delta_bar: f64,
    pub diffusion: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_rates: 20,
            accrual: 0.5,
            rate: 0.04,
            volatility: 0.18,
            alpha: 12.0,
            beta: 0.0,
            mu: 0.0,
            delta_bar: 12.0,
            diffusion: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    PerTenor,
    /// One step from 0 to each product's expiry.
    LongStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub schemes: Vec<String>,
    pub modes: Vec<String>,
    pub grid: GridKind,
    pub steps_per_tenor: usize,
    /// With `compare`, run the first method on a grid this many times
    /// finer, driven by the same increments.
    pub reference_substeps: usize,
    pub paths: u64,
    pub seed: u64,
    pub antithetic: bool,
    pub kernel: String,
    pub full_cap: usize,
    pub block_units: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            schemes: vec!["euler".into()],
            modes: vec!["full".into()],
            grid: GridKind::PerTenor,
            steps_per_tenor: 5,
            reference_substeps: 1,
            paths: 50_000,
            seed: 1,
            antithetic: false,
            kernel: "tabulated".into(),
            full_cap: DEFAULT_FULL_CAP,
            block_units: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrikeSpec {
    Value(f64),
    Keyword(String),
}

impl StrikeSpec {
    fn atm() -> Self {
        StrikeSpec::Keyword("atm".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKind {
    Caplet,
    Swaption,
    Fra,
}

/// A strip of products: the cross product of expiries (swaption start
/// dates) and strikes, plus swap lengths for swaptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductStrip {
    pub kind: ProductKind,
    /// Tenor indices; empty means `1..=N` (caplets, FRAs) or every start
    /// that leaves room for the swap (swaptions).
    #[serde(default)]
    pub expiries: Vec<usize>,
    #[serde(default = "default_strikes")]
    pub strikes: Vec<StrikeSpec>,
    /// Swap lengths in tenor periods; swaptions only.
    #[serde(default)]
    pub lengths: Vec<usize>,
}

fn default_strikes() -> Vec<StrikeSpec> {
    vec![StrikeSpec::atm()]
}

impl Default for ProductStrip {
    fn default() -> Self {
        Self {
            kind: ProductKind::Caplet,
            expiries: Vec::new(),
            strikes: default_strikes(),
            lengths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub significant_digits: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            significant_digits: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n_values: Vec<usize>,
    pub path_values: Vec<u64>,
    /// Largest tail handled by the exponential Full drift in the bench.
    pub full_cap: usize,
    /// Tail sizes for the drift-cost table.
    pub max_tail: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_values: vec![2, 4, 6, 8, 10],
            path_values: vec![1000, 2000, 4000],
            full_cap: 12,
            max_tail: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default = "default_products")]
    pub products: Vec<ProductStrip>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    // Manifest sections, accepted so that a manifest can be fed back in.
    #[serde(default, skip_serializing)]
    run: Option<toml::Value>,
    #[serde(default, skip_serializing)]
    versions: Option<toml::Value>,
    #[serde(default, skip_serializing)]
    timings: Option<toml::Value>,
    #[serde(default, skip_serializing)]
    costs: Option<toml::Value>,
    #[serde(default, skip_serializing)]
    outputs: Option<toml::Value>,
}

fn default_products() -> Vec<ProductStrip> {
    vec![ProductStrip::default()]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            simulation: SimulationConfig::default(),
            products: default_products(),
            output: OutputConfig::default(),
            bench: BenchConfig::default(),
            run: None,
            versions: None,
            timings: None,
            costs: None,
            outputs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.check()?;
        config.run = None;
        config.versions = None;
        config.timings = None;
        config.costs = None;
        config.outputs = None;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field that can be checked without building the model.
    pub fn check(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.n_rates == 0 {
            return Err(field_error("model.n_rates", "must be at least 1"));
        }
        for (name, v) in [("model.accrual", m.accrual), ("model.alpha", m.alpha), ("model.delta_bar", m.delta_bar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_error(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("model.rate", m.rate),
            ("model.volatility", m.volatility),
            ("model.beta", m.beta),
            ("model.mu", m.mu),
            ("model.diffusion", m.diffusion),
        ] {
            if !v.is_finite() {
                return Err(field_error(name, format!("must be finite, got {v}")));
            }
        }
        self.methods()?;
        self.kernel()?;
        let s = &self.simulation;
        if s.steps_per_tenor == 0 {
            return Err(field_error("simulation.steps_per_tenor", "must be at least 1"));
        }
        if s.reference_substeps == 0 {
            return Err(field_error("simulation.reference_substeps", "must be at least 1"));
        }
        if s.paths == 0 {
            return Err(field_error("simulation.paths", "must be at least 1"));
        }
        if s.block_units == 0 {
            return Err(field_error("simulation.block_units", "must be at least 1"));
        }
        if !(4..=17).contains(&self.output.significant_digits) {
            return Err(field_error("output.significant_digits", "must lie in 4..=17"));
        }
        Ok(())
    }

    pub fn methods(&self) -> Result<Vec<Method>, ConfigError> {
        let s = &self.simulation;
        if s.schemes.is_empty() {
            return Err(field_error("simulation.schemes", "at least one scheme is required"));
        }
        if s.modes.is_empty() {
            return Err(field_error("simulation.modes", "at least one drift mode is required"));
        }
        let mut out = Vec::new();
        for (k, name) in s.schemes.iter().enumerate() {
            let scheme = Scheme::parse(name)
                .ok_or_else(|| field_error(format!("simulation.schemes[{k}]"), format!("unknown scheme '{name}'")))?;
            for (j, mode_name) in s.modes.iter().enumerate() {
                let mode = DriftMode::parse(mode_name).ok_or_else(|| {
                    field_error(format!("simulation.modes[{j}]"), format!("unknown drift mode '{mode_name}'"))
                })?;
                out.push(Method::new(scheme, mode));
            }
        }
        Ok(out)
    }

    pub fn kernel(&self) -> Result<DriftKernel, ConfigError> {
        DriftKernel::parse(&self.simulation.kernel).ok_or_else(|| {
            field_error(
                "simulation.kernel",
                format!("unknown kernel '{}' (tabulated or direct)", self.simulation.kernel),
            )
        })
    }

    pub fn model(&self) -> Result<MarketModel, ConfigError> {
        build_model(&self.model, self.model.n_rates)
    }

    pub fn options(&self) -> Result<SimulationOptions, ConfigError> {
        let s = &self.simulation;
        Ok(SimulationOptions {
            n_paths: s.paths,
            rng: RngPolicy {
                seed: s.seed,
                antithetic: s.antithetic,
            },
            kernel: self.kernel()?,
            full_cap: s.full_cap,
            block_units: s.block_units,
            ..SimulationOptions::default()
        })
    }

    pub fn grid(&self, tenor: &TenorStructure) -> Result<SimulationGrid, ConfigError> {
        SimulationGrid::per_tenor(tenor, self.simulation.steps_per_tenor)
            .map_err(|e| field_error("simulation.steps_per_tenor", e))
    }

    /// Expands the product strips against the model's curve.
    pub fn products(&self, tenor: &TenorStructure, curve: &InitialCurve) -> Result<Vec<Product>, ConfigError> {
        let n = tenor.n_rates();
        let mut out = Vec::new();
        for (s, strip) in self.products.iter().enumerate() {
            let field = |name: &str| format!("products[{s}].{name}");
            for (k, &e) in strip.expiries.iter().enumerate() {
                if !(1..=n).contains(&e) {
                    return Err(field_error(format!("{}[{k}]", field("expiries")), format!("{e} outside 1..={n}")));
                }
            }
            let lengths = match strip.kind {
                ProductKind::Swaption => {
                    if strip.lengths.is_empty() {
                        return Err(field_error(field("lengths"), "swaptions need at least one swap length"));
                    }
                    if let Some(k) = strip.lengths.iter().position(|&l| l == 0) {
                        return Err(field_error(format!("{}[{k}]", field("lengths")), "must be at least 1"));
                    }
                    strip.lengths.clone()
                }
                _ => {
                    if !strip.lengths.is_empty() {
                        return Err(field_error(field("lengths"), "only swaptions take swap lengths"));
                    }
                    vec![0]
                }
            };
            let expiries: Vec<usize> = if strip.expiries.is_empty() {
                (1..=n).collect()
            } else {
                strip.expiries.clone()
            };
            for &e in &expiries {
                for &len in &lengths {
                    if strip.kind == ProductKind::Swaption && e + len > n {
                        if strip.expiries.is_empty() {
                            continue;
                        }
                        return Err(field_error(
                            field("lengths"),
                            format!("swap T{e}-T{} runs past T{n}", e + len),
                        ));
                    }
                    for (k, strike) in strip.strikes.iter().enumerate() {
                        let strike_field = format!("{}[{k}]", field("strikes"));
                        let at_the_money = match strip.kind {
                            ProductKind::Swaption => {
                                let annuity: f64 =
                                    (e + 1..=e + len).map(|l| tenor.accrual(l - 1) * curve.discount(l)).sum();
                                (curve.discount(e) - curve.discount(e + len)) / annuity
                            }
                            _ => curve.forward(e),
                        };
                        let value = match strike {
                            StrikeSpec::Value(v) => *v,
                            StrikeSpec::Keyword(w) if w.eq_ignore_ascii_case("atm") => at_the_money,
                            StrikeSpec::Keyword(w) => {
                                return Err(field_error(strike_field, format!("expected a number or \"atm\", got '{w}'")))
                            }
                        };
                        let product = match strip.kind {
                            ProductKind::Caplet => Product::Caplet {
                                strike: value,
                                expiry: e,
                            },
                            ProductKind::Fra => Product::Fra {
                                strike: value,
                                expiry: e,
                            },
                            ProductKind::Swaption => Product::Swaption {
                                strike: value,
                                start: e,
                                end: e + len,
                            },
                        };
                        product.validate(n).map_err(|err| field_error(strike_field, err))?;
                        out.push(product);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Raw model inputs: tenor, `B(0,T_1..T_{N+1})`, volatilities and driver.
pub struct ModelInputs {
    pub tenor: TenorStructure,
    pub discounts: Vec<f64>,
    pub vols: VolatilityStructure,
    pub driver: DriverSchedule,
}

/// The configured inputs with `n_rates` replaced, as used by the bench.
pub fn model_inputs(m: &ModelConfig, n_rates: usize) -> Result<ModelInputs, ConfigError> {
    let tenor = TenorStructure::uniform(n_rates, m.accrual).map_err(|e| field_error("model.accrual", e))?;
    let discounts: Vec<f64> = tenor.dates()[1..].iter().map(|t| (-m.rate * t).exp()).collect();
    let vols = VolatilityStructure::flat(&tenor, m.volatility).map_err(|e| field_error("model.volatility", e))?;
    let nig = NigParams::new(m.alpha, m.beta, m.mu, m.delta_bar).map_err(|e| field_error("model.alpha", e))?;
    let spec = LevyDriverSpec::nig(nig)
        .with_diffusion(m.diffusion)
        .map_err(|e| field_error("model.diffusion", e))?;
    Ok(ModelInputs {
        tenor,
        discounts,
        vols,
        driver: DriverSchedule::homogeneous(spec),
    })
}

pub fn build_model(m: &ModelConfig, n_rates: usize) -> Result<MarketModel, ConfigError> {
    let inputs = model_inputs(m, n_rates)?;
    let curve = initial_forward_rates(&inputs.tenor, &inputs.discounts).map_err(|e| field_error("model.rate", e))?;
    MarketModel::new(inputs.tenor, curve, inputs.vols, inputs.driver).map_err(|e| field_error("model", e))
}
