//! Flat `key = value` experiment configuration with a canonical textual
//! form: serializing always emits every key in a fixed order, and parsing
//! the canonical text reproduces the configuration exactly.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use maxstable::estimators::{EstimatorTag, VarianceMethod};
use maxstable::{KernelSpec64, LatticeWindow, ModelSpec64, Site, VariogramSpec64};

use crate::CliError;

/// Model family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    BrownResnick,
    MovingMaximum,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::BrownResnick => "brown-resnick",
            ModelKind::MovingMaximum => "moving-maximum",
        }
    }
}

/// Kernel family selector for moving-maximum models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    TruncatedGaussian,
    IndicatorBox,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::TruncatedGaussian => "truncated-gaussian",
            KernelKind::IndicatorBox => "indicator-box",
        }
    }
}

/// Data-file format for per-replicate sample dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

pub(crate) fn estimator_as_str(tag: EstimatorTag) -> &'static str {
    match tag {
        EstimatorTag::Threshold => "threshold",
        EstimatorTag::MinInverse => "min-inverse",
        EstimatorTag::Madogram => "madogram",
    }
}

fn variance_method_as_str(method: VarianceMethod) -> &'static str {
    match method {
        VarianceMethod::AnalyticSeries => "analytic-series",
        VarianceMethod::PlugInEmpirical => "plug-in-empirical",
    }
}

/// Complete experiment configuration. Every field has a default; the flat
/// text format assigns fields by key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Model family.
    pub model: ModelKind,
    /// Lattice dimension (1–3).
    pub dim: usize,
    /// Variogram scale ρ (Brown–Resnick).
    pub variogram_scale: f64,
    /// Variogram exponent α ∈ (0, 2] (Brown–Resnick).
    pub variogram_exponent: f64,
    /// Kernel family (moving maximum).
    pub kernel_family: KernelKind,
    /// Kernel bandwidth σ (Gaussian profiles).
    pub kernel_bandwidth: f64,
    /// Kernel support radius R (compact kernels).
    pub kernel_radius: f64,
    /// Square observation window extent n (window = {0..n-1}^d).
    pub window_extent: i64,
    /// Lags h, as integer d-vectors.
    pub lags: Vec<Vec<i64>>,
    /// Thresholds y for the threshold estimator.
    pub thresholds: Vec<f64>,
    /// Estimators to run.
    pub estimators: Vec<EstimatorTag>,
    /// Replicate count M.
    pub replicates: usize,
    /// Root seed; all random streams derive from it.
    pub seed: u64,
    /// Worker threads for replicate parallelism.
    pub workers: usize,
    /// Output directory.
    pub out: String,
    /// Sample-dump format.
    pub format: OutputFormat,
    /// Confidence level for intervals.
    pub level: f64,
    /// Variance method for the threshold estimator.
    pub variance_method: VarianceMethod,
    /// Monte Carlo draws per four-site coefficient in the variance series.
    pub theta4_draws: usize,
    /// Tail-to-value stopping fraction of the variance series.
    pub tail_fraction: f64,
    /// Hard radius cap of the variance series.
    pub max_radius: i64,
    /// Relative tolerance of the optimal-threshold search.
    pub rel_tol: f64,
    /// Moment margin δ of the CLT condition.
    pub delta: f64,
    /// Lag ladder for decay-exponent fitting.
    pub fit_range: Vec<i64>,
    /// Separation distances for mixing-bound tables.
    pub m_values: Vec<i64>,
    /// Maximum admissible boundary-to-size ratio of the window.
    pub boundary_ratio_limit: f64,
    /// Reference sites for the coupling experiment (empty: derived from
    /// the window).
    pub coupling_sites: Vec<Vec<i64>>,
    /// Field draws behind the intensity-integral inner probability.
    pub inner_replicates: usize,
    /// Quadrature nodes per axis of the intensity integral.
    pub nodes_per_axis: usize,
    /// Estimator checked by `clt-verify`.
    pub clt_estimator: EstimatorTag,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::MovingMaximum,
            dim: 2,
            variogram_scale: 1.0,
            variogram_exponent: 1.0,
            kernel_family: KernelKind::IndicatorBox,
            kernel_bandwidth: 1.0,
            kernel_radius: 1.5,
            window_extent: 16,
            lags: vec![vec![1, 0]],
            thresholds: vec![1.0],
            estimators: vec![
                EstimatorTag::Threshold,
                EstimatorTag::MinInverse,
                EstimatorTag::Madogram,
            ],
            replicates: 100,
            seed: 17,
            workers: 1,
            out: "out".into(),
            format: OutputFormat::Csv,
            level: 0.95,
            variance_method: VarianceMethod::PlugInEmpirical,
            theta4_draws: 20_000,
            tail_fraction: 0.01,
            max_radius: 512,
            rel_tol: 1e-3,
            delta: 1.0,
            fit_range: vec![4, 8, 16, 32, 64],
            m_values: vec![1, 2, 3, 4, 6, 8],
            boundary_ratio_limit: 0.5,
            coupling_sites: Vec::new(),
            inner_replicates: 400,
            nodes_per_axis: 32,
            clt_estimator: EstimatorTag::Threshold,
        }
    }
}

fn fmt_tuple(coords: &[i64]) -> String {
    coords
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_tuples(tuples: &[Vec<i64>]) -> String {
    tuples.iter().map(|t| fmt_tuple(t)).collect::<Vec<_>>().join(" ")
}

fn fmt_ints(values: &[i64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn fmt_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn bad_value(key: &str, value: &str, expected: impl fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: cannot parse `{value}` ({expected})"))
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad_value(key, value, expected))
}

fn parse_tuples(key: &str, value: &str) -> Result<Vec<Vec<i64>>, CliError> {
    value
        .split_whitespace()
        .map(|tuple| {
            tuple
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<i64>()
                        .map_err(|_| bad_value(key, value, "integer tuples like `1,0 2,0`"))
                })
                .collect()
        })
        .collect()
}

fn parse_ints(key: &str, value: &str) -> Result<Vec<i64>, CliError> {
    value
        .split_whitespace()
        .map(|v| v.parse::<i64>().map_err(|_| bad_value(key, value, "integers")))
        .collect()
}

fn parse_floats(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|_| bad_value(key, value, "numbers")))
        .collect()
}

fn parse_estimator(key: &str, value: &str) -> Result<EstimatorTag, CliError> {
    match value {
        "threshold" => Ok(EstimatorTag::Threshold),
        "min-inverse" => Ok(EstimatorTag::MinInverse),
        "madogram" => Ok(EstimatorTag::Madogram),
        _ => Err(bad_value(key, value, "threshold | min-inverse | madogram")),
    }
}

impl ExperimentConfig {
    /// Serializes to the canonical flat text: every key once, fixed order.
    pub fn to_canonical_text(&self) -> String {
        let mut lines = Vec::new();
        let mut push = |key: &str, value: String| lines.push(format!("{key} = {value}"));
        push("model", self.model.as_str().into());
        push("dim", self.dim.to_string());
        push("variogram_scale", self.variogram_scale.to_string());
        push("variogram_exponent", self.variogram_exponent.to_string());
        push("kernel_family", self.kernel_family.as_str().into());
        push("kernel_bandwidth", self.kernel_bandwidth.to_string());
        push("kernel_radius", self.kernel_radius.to_string());
        push("window_extent", self.window_extent.to_string());
        push("lags", fmt_tuples(&self.lags));
        push("thresholds", fmt_floats(&self.thresholds));
        push(
            "estimators",
            self.estimators
                .iter()
                .map(|e| estimator_as_str(*e))
                .collect::<Vec<_>>()
                .join(" "),
        );
        push("replicates", self.replicates.to_string());
        push("seed", self.seed.to_string());
        push("workers", self.workers.to_string());
        push("out", self.out.clone());
        push("format", self.format.as_str().into());
        push("level", self.level.to_string());
        push(
            "variance_method",
            variance_method_as_str(self.variance_method).into(),
        );
        push("theta4_draws", self.theta4_draws.to_string());
        push("tail_fraction", self.tail_fraction.to_string());
        push("max_radius", self.max_radius.to_string());
        push("rel_tol", self.rel_tol.to_string());
        push("delta", self.delta.to_string());
        push("fit_range", fmt_ints(&self.fit_range));
        push("m_values", fmt_ints(&self.m_values));
        push(
            "boundary_ratio_limit",
            self.boundary_ratio_limit.to_string(),
        );
        push("coupling_sites", fmt_tuples(&self.coupling_sites));
        push("inner_replicates", self.inner_replicates.to_string());
        push("nodes_per_axis", self.nodes_per_axis.to_string());
        push("clt_estimator", estimator_as_str(self.clt_estimator).into());
        lines.join("\n") + "\n"
    }

    /// Parses the flat text format: `key = value` lines, `#` comments and
    /// blank lines ignored, unknown or repeated keys rejected.
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut config = ExperimentConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    line_no + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("key `{key}` set more than once")));
            }
            config.assign(key, value)?;
        }
        Ok(config)
    }

    /// Reads and parses a configuration file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }

    fn assign(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "model" => {
                self.model = match value {
                    "brown-resnick" => ModelKind::BrownResnick,
                    "moving-maximum" => ModelKind::MovingMaximum,
                    _ => return Err(bad_value(key, value, "brown-resnick | moving-maximum")),
                }
            }
            "dim" => self.dim = parse_scalar(key, value, "positive integer")?,
            "variogram_scale" => self.variogram_scale = parse_scalar(key, value, "number")?,
            "variogram_exponent" => self.variogram_exponent = parse_scalar(key, value, "number")?,
            "kernel_family" => {
                self.kernel_family = match value {
                    "gaussian" => KernelKind::Gaussian,
                    "truncated-gaussian" => KernelKind::TruncatedGaussian,
                    "indicator-box" => KernelKind::IndicatorBox,
                    _ => {
                        return Err(bad_value(
                            key,
                            value,
                            "gaussian | truncated-gaussian | indicator-box",
                        ))
                    }
                }
            }
            "kernel_bandwidth" => self.kernel_bandwidth = parse_scalar(key, value, "number")?,
            "kernel_radius" => self.kernel_radius = parse_scalar(key, value, "number")?,
            "window_extent" => self.window_extent = parse_scalar(key, value, "integer")?,
            "lags" => self.lags = parse_tuples(key, value)?,
            "thresholds" => self.thresholds = parse_floats(key, value)?,
            "estimators" => {
                self.estimators = value
                    .split_whitespace()
                    .map(|v| parse_estimator(key, v))
                    .collect::<Result<_, _>>()?
            }
            "replicates" => self.replicates = parse_scalar(key, value, "positive integer")?,
            "seed" => self.seed = parse_scalar(key, value, "unsigned integer")?,
            "workers" => self.workers = parse_scalar(key, value, "positive integer")?,
            "out" => self.out = value.to_string(),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(bad_value(key, value, "csv | json")),
                }
            }
            "level" => self.level = parse_scalar(key, value, "number in (0,1)")?,
            "variance_method" => {
                self.variance_method = match value {
                    "analytic-series" => VarianceMethod::AnalyticSeries,
                    "plug-in-empirical" => VarianceMethod::PlugInEmpirical,
                    _ => return Err(bad_value(key, value, "analytic-series | plug-in-empirical")),
                }
            }
            "theta4_draws" => self.theta4_draws = parse_scalar(key, value, "positive integer")?,
            "tail_fraction" => self.tail_fraction = parse_scalar(key, value, "number")?,
            "max_radius" => self.max_radius = parse_scalar(key, value, "integer")?,
            "rel_tol" => self.rel_tol = parse_scalar(key, value, "number")?,
            "delta" => self.delta = parse_scalar(key, value, "number")?,
            "fit_range" => self.fit_range = parse_ints(key, value)?,
            "m_values" => self.m_values = parse_ints(key, value)?,
            "boundary_ratio_limit" => {
                self.boundary_ratio_limit = parse_scalar(key, value, "number")?
            }
            "coupling_sites" => self.coupling_sites = parse_tuples(key, value)?,
            "inner_replicates" => {
                self.inner_replicates = parse_scalar(key, value, "positive integer")?
            }
            "nodes_per_axis" => self.nodes_per_axis = parse_scalar(key, value, "positive integer")?,
            "clt_estimator" => self.clt_estimator = parse_estimator(key, value)?,
            _ => return Err(CliError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Full validation, including model construction and window geometry.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=3).contains(&self.dim) {
            return Err(CliError::Config(format!(
                "dim must be 1, 2, or 3 (got {})",
                self.dim
            )));
        }
        if self.window_extent < 2 {
            return Err(CliError::Config(format!(
                "window_extent must be at least 2 (got {})",
                self.window_extent
            )));
        }
        if self.replicates == 0 || self.workers == 0 {
            return Err(CliError::Config(
                "replicates and workers must be positive".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!(
                "level must lie in (0,1) (got {})",
                self.level
            )));
        }
        if self.lags.is_empty() {
            return Err(CliError::Config("at least one lag is required".into()));
        }
        for lag in &self.lags {
            if lag.len() != self.dim {
                return Err(CliError::Config(format!(
                    "lag {lag:?} has {} coordinates, expected dim = {}",
                    lag.len(),
                    self.dim
                )));
            }
            if lag.iter().all(|&c| c == 0) {
                return Err(CliError::Config("lags must be nonzero vectors".into()));
            }
        }
        for site in &self.coupling_sites {
            if site.len() != self.dim {
                return Err(CliError::Config(format!(
                    "coupling site {site:?} has {} coordinates, expected dim = {}",
                    site.len(),
                    self.dim
                )));
            }
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|y| !(*y > 0.0) || !y.is_finite())
        {
            return Err(CliError::Config(
                "thresholds must be a nonempty list of positive numbers".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(CliError::Config("at least one estimator is required".into()));
        }
        if self.m_values.is_empty()
            || self.m_values[0] < 1
            || self.m_values.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(CliError::Config(
                "m_values must be strictly increasing distances starting at 1 or more".into(),
            ));
        }
        if !(self.boundary_ratio_limit > 0.0 && self.boundary_ratio_limit <= 1.0) {
            return Err(CliError::Config(format!(
                "boundary_ratio_limit must lie in (0,1] (got {})",
                self.boundary_ratio_limit
            )));
        }
        // Model parameters and window geometry via the library validators.
        self.build_spec()?;
        self.build_window()?;
        Ok(())
    }

    /// Builds the model specification from the selected family.
    pub fn build_spec(&self) -> Result<ModelSpec64, CliError> {
        match self.model {
            ModelKind::BrownResnick => {
                let vario =
                    VariogramSpec64::power_law(self.variogram_scale, self.variogram_exponent)?;
                Ok(ModelSpec64::brown_resnick(self.dim, vario)?)
            }
            ModelKind::MovingMaximum => {
                let kernel = match self.kernel_family {
                    KernelKind::Gaussian => KernelSpec64::gaussian(self.dim, self.kernel_bandwidth)?,
                    KernelKind::TruncatedGaussian => KernelSpec64::truncated_gaussian(
                        self.dim,
                        self.kernel_bandwidth,
                        self.kernel_radius,
                    )?,
                    KernelKind::IndicatorBox => {
                        KernelSpec64::indicator_box(self.dim, self.kernel_radius)?
                    }
                };
                Ok(ModelSpec64::moving_maximum(kernel))
            }
        }
    }

    /// Builds the square observation window and enforces the declared
    /// boundary-to-size limit (the operational form of the vanishing
    /// boundary condition behind the CLT).
    pub fn build_window(&self) -> Result<Arc<LatticeWindow>, CliError> {
        let extents = vec![self.window_extent; self.dim];
        let window = LatticeWindow::from_box(&extents)?;
        let ratio = window.boundary_count() as f64 / window.len() as f64;
        if ratio > self.boundary_ratio_limit {
            return Err(CliError::Config(format!(
                "window boundary ratio {ratio:.3} exceeds the declared limit {} \
                 (extent {} in dimension {}); enlarge the window",
                self.boundary_ratio_limit, self.window_extent, self.dim
            )));
        }
        Ok(Arc::new(window))
    }

    /// The lag at `index` as a lattice site.
    pub fn lag_site(&self, index: usize) -> Site {
        Site::new(self.lags[index].clone())
    }
}
