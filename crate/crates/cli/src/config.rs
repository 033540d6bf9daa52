//! TOML experiment configuration.
//!
//! Relative paths inside a config file resolve against the directory that
//! contains the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use brickwall::models::{splitting_method, splitting_methods_catalog, LatticeModel, ModelKind, LOCAL_DIM};
use brickwall::trustregion::TrustRegionConfig;
use serde::{Deserialize, Serialize};

/// Largest Hilbert-space dimension for which exact evolution is attempted.
pub const DEFAULT_MAX_DIMENSION: usize = 1 << 12;

fn default_coupling() -> f64 {
    1.0
}

/// Model family, parameters, lattice size and evolution time.
///
/// `size` is the chain length or the ladder column count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Ising1d {
        size: usize,
        time: f64,
        #[serde(default = "default_coupling")]
        j: f64,
        g: f64,
        #[serde(default)]
        h: f64,
    },
    Heisenberg1d {
        size: usize,
        time: f64,
        j: [f64; 3],
        h: [f64; 3],
    },
    IsingLadder {
        size: usize,
        time: f64,
        #[serde(default = "default_coupling")]
        j: f64,
        g: f64,
    },
}

impl ModelSpec {
    pub fn size(&self) -> usize {
        match *self {
            Self::Ising1d { size, .. } | Self::Heisenberg1d { size, .. } | Self::IsingLadder { size, .. } => size,
        }
    }

    pub fn with_size(&self, new: usize) -> Self {
        let mut out = *self;
        match &mut out {
            Self::Ising1d { size, .. } | Self::Heisenberg1d { size, .. } | Self::IsingLadder { size, .. } => {
                *size = new
            }
        }
        out
    }

    pub fn to_model(&self) -> Result<LatticeModel> {
        let (kind, size, time) = match *self {
            Self::Ising1d { size, time, j, g, h } => (ModelKind::Ising1d { j, g, h }, size, time),
            Self::Heisenberg1d { size, time, j, h } => (ModelKind::Heisenberg1d { j, h }, size, time),
            Self::IsingLadder { size, time, j, g } => (ModelKind::IsingLadder { j, g }, size, time),
        };
        Ok(LatticeModel::new(kind, size, time)?)
    }

    pub fn from_model(model: &LatticeModel) -> Self {
        let (size, time) = (model.size, model.time);
        match model.kind {
            ModelKind::Ising1d { j, g, h } => Self::Ising1d { size, time, j, g, h },
            ModelKind::Heisenberg1d { j, h } => Self::Heisenberg1d { size, time, j, h },
            ModelKind::IsingLadder { j, g } => Self::IsingLadder { size, time, j, g },
        }
    }
}

/// Starting gates for an optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WarmStart {
    /// `r` steps of a catalog splitting method.
    Splitting { method: String, r: usize },
    /// Gates from a gate file. A file with `layers − 2` gates is padded with
    /// identity layers on both ends; a file with `layers` gates is reused as is.
    Bootstrap { gatefile: PathBuf },
    /// All gates equal to the identity.
    Identity,
    /// Haar-random gates drawn from the experiment seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub layers: usize,
    pub warm_start: WarmStart,
}

/// Trust-region settings; omitted fields take the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustRegionSpec {
    pub delta0: Option<f64>,
    pub delta_max: Option<f64>,
    pub rho_prime: Option<f64>,
    pub max_iter: Option<usize>,
    pub tcg_kappa: Option<f64>,
    pub tcg_theta: Option<f64>,
    pub grad_tol: Option<f64>,
}

impl TrustRegionSpec {
    pub fn resolve(&self) -> TrustRegionConfig {
        let d = TrustRegionConfig::default();
        TrustRegionConfig {
            delta0: self.delta0.unwrap_or(d.delta0),
            delta_max: self.delta_max.unwrap_or(d.delta_max),
            rho_prime: self.rho_prime.unwrap_or(d.rho_prime),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            tcg_kappa: self.tcg_kappa.unwrap_or(d.tcg_kappa),
            tcg_theta: self.tcg_theta.unwrap_or(d.tcg_theta),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            record_spectral_error: true,
        }
    }
}

fn default_steps() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Catalog method names; empty selects every method compatible with the model.
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default = "default_steps")]
    pub steps: Vec<usize>,
    /// Optimized gate files to list alongside the splitting rows.
    #[serde(default)]
    pub gatefiles: Vec<PathBuf>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self { methods: Vec::new(), steps: default_steps(), gatefiles: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendSpec {
    /// Defaults to `gates.json` in the output directory.
    pub gatefile: Option<PathBuf>,
    #[serde(default)]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

fn default_max_dimension() -> usize {
    DEFAULT_MAX_DIMENSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub circuit: Option<CircuitSpec>,
    #[serde(default)]
    pub trust_region: TrustRegionSpec,
    #[serde(default)]
    pub benchmark: BenchmarkSpec,
    #[serde(default)]
    pub extend: ExtendSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    /// Cap on `d^L` for exact evolution.
    #[serde(default = "default_max_dimension")]
    pub max_dimension: usize,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            model,
            circuit: None,
            trust_region: TrustRegionSpec::default(),
            benchmark: BenchmarkSpec::default(),
            extend: ExtendSpec::default(),
            output: OutputSpec::default(),
            seed: 0,
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("malformed experiment config")?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(CircuitSpec { warm_start: WarmStart::Bootstrap { gatefile }, .. }) = &mut self.circuit {
            fix(gatefile);
        }
        self.benchmark.gatefiles.iter_mut().for_each(fix);
        if let Some(p) = &mut self.extend.gatefile {
            fix(p);
        }
        if let Some(p) = &mut self.output.dir {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.to_model()?;
        ensure!(self.max_dimension >= 1, "max_dimension must be positive");
        self.trust_region.resolve().validate()?;
        if let Some(c) = &self.circuit {
            ensure!(c.layers >= 1, "circuit.layers must be at least 1");
            if let WarmStart::Splitting { method, r } = &c.warm_start {
                let m = splitting_method(method)?;
                ensure!(*r >= 1, "warm start needs r >= 1");
                ensure!(
                    m.is_compatible(&model.geometry()),
                    "method {method} has {} partitions, model {} has {}",
                    m.partitions,
                    model.name(),
                    model.geometry().num_partitions()
                );
                ensure!(
                    m.layers(*r) == c.layers,
                    "warm start {method} with r = {r} has {} layers but circuit.layers = {}",
                    m.layers(*r),
                    c.layers
                );
            }
        }
        for name in &self.benchmark.methods {
            splitting_method(name)?;
        }
        ensure!(self.benchmark.steps.iter().all(|&r| r >= 1), "benchmark steps must be >= 1");
        for &size in &self.extend.sizes {
            ensure!(
                size >= self.model.size(),
                "extension size {size} is smaller than the model size {}",
                self.model.size()
            );
        }
        Ok(())
    }

    pub fn lattice_model(&self) -> Result<LatticeModel> {
        self.model.to_model()
    }

    /// Catalog methods to benchmark for this model.
    pub fn benchmark_methods(&self) -> Result<Vec<brickwall::models::SplittingMethod>> {
        let geometry = self.lattice_model()?.geometry();
        if self.benchmark.methods.is_empty() {
            return Ok(splitting_methods_catalog().into_iter().filter(|m| m.is_compatible(&geometry)).collect());
        }
        self.benchmark
            .methods
            .iter()
            .map(|name| {
                let m = splitting_method(name)?;
                if !m.is_compatible(&geometry) {
                    bail!("method {name} does not fit the {} partitions of the model", geometry.num_partitions());
                }
                Ok(m)
            })
            .collect()
    }
}

/// Fails when `d^sites` exceeds `cap`.
pub fn check_dimension(model: &LatticeModel, cap: usize) -> Result<()> {
    let sites = model.sites() as u32;
    match LOCAL_DIM.checked_pow(sites) {
        Some(d) if d <= cap => Ok(()),
        _ => bail!(
            "exact evolution of {} with {} sites needs a {}^{} dimensional matrix, above the cap of {cap}; \
             raise max_dimension if memory allows",
            model.name(),
            sites,
            LOCAL_DIM,
            sites
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        [model]
        kind = "ising1d"
        size = 6
        time = 1.0
        g = 0.75

        [circuit]
        layers = 5
        warm_start = { kind = "splitting", method = "strang", r = 2 }
    "#;

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.max_dimension, 4096);
        assert_eq!(c.model, ModelSpec::Ising1d { size: 6, time: 1.0, j: 1.0, g: 0.75, h: 0.0 });
        assert_eq!(c.benchmark.steps, vec![1, 2, 4, 8]);
        assert_eq!(c.trust_region.resolve().max_iter, 200);
    }

    #[test]
    fn rejects_inconsistent_layer_count() {
        let bad = BASIC.replace("layers = 5", "layers = 7");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(format!("{err:#}").contains("has 5 layers"));
    }

    #[test]
    fn rejects_incompatible_method() {
        let bad = BASIC.replace("\"strang\", r = 2", "\"strang3\", r = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_shrinking_extension() {
        let bad = format!("{BASIC}\n[extend]\nsizes = [4]\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let bad = BASIC.replace("g = 0.75", "g = 0.75\ngamma = 1.0");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn model_spec_round_trips() {
        let spec = ModelSpec::Heisenberg1d { size: 6, time: 0.25, j: [1.0, 1.0, -0.5], h: [0.75, 0.0, 0.0] };
        assert_eq!(ModelSpec::from_model(&spec.to_model().unwrap()), spec);
        assert_eq!(spec.with_size(8).size(), 8);
    }

    #[test]
    fn dimension_cap() {
        let m = ModelSpec::IsingLadder { size: 6, time: 0.25, j: 1.0, g: 3.0 }.to_model().unwrap();
        assert!(check_dimension(&m, 4096).is_ok());
        assert!(check_dimension(&m, 4095).is_err());
    }
}
