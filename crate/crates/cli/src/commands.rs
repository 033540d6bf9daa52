//! Subcommand implementations. Each `run_*` function computes its result
//! without touching the filesystem beyond reading inputs; the `cmd_*`
//! wrappers also write the artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use brickwall::circuit::{self, BrickwallCircuit, Geometry};
use brickwall::linalg::CMat;
use brickwall::manifold::UnitaryGate;
use brickwall::models::{exact_unitary, splitting_circuit, splitting_method, LatticeModel, LOCAL_DIM};
use brickwall::random;
use brickwall::trustregion::{bootstrap_pad, optimize, OptimizationTrace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{check_dimension, ExperimentConfig, ModelSpec, WarmStart};
use crate::gatefile::{GateFile, Metrics};

pub const GATES_FILE: &str = "gates.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BENCHMARK_FILE: &str = "benchmark.csv";
pub const EXTEND_FILE: &str = "extend.csv";

fn exact_target(model: &LatticeModel, cap: usize) -> Result<CMat> {
    check_dimension(model, cap)?;
    Ok(exact_unitary(model)?)
}

/// Starting circuit described by the config's `[circuit]` section.
pub fn warm_start(config: &ExperimentConfig) -> Result<BrickwallCircuit> {
    let Some(spec) = &config.circuit else {
        bail!("the config has no [circuit] section");
    };
    let model = config.lattice_model()?;
    let geometry = model.geometry();
    let n = spec.layers;
    let circuit = match &spec.warm_start {
        WarmStart::Splitting { method, r } => splitting_circuit(&splitting_method(method)?, &model, *r)?,
        WarmStart::Identity => BrickwallCircuit::identity(&geometry, LOCAL_DIM, n)?,
        WarmStart::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let m = LOCAL_DIM * LOCAL_DIM;
            let gates: Vec<UnitaryGate> = (0..n).map(|_| random::haar_unitary(m, &mut rng)).collect();
            BrickwallCircuit::identity(&geometry, LOCAL_DIM, n)?.with_gates(gates)?
        }
        WarmStart::Bootstrap { gatefile } => {
            let file = GateFile::read(gatefile)?;
            ensure!(
                file.model == config.model,
                "bootstrap gate file {} was optimized for {:?}, not {:?}",
                gatefile.display(),
                file.model,
                config.model
            );
            let stored = file.circuit()?;
            if stored.num_layers() + 2 == n {
                bootstrap_pad(&stored, &geometry)?
            } else if stored.num_layers() == n {
                stored
            } else {
                bail!(
                    "bootstrap gate file {} has {} layers; circuit.layers = {n} needs {} or {n}",
                    gatefile.display(),
                    stored.num_layers(),
                    n.saturating_sub(2)
                );
            }
        }
    };
    ensure!(
        circuit.num_layers() == n,
        "warm start has {} layers but circuit.layers = {n}",
        circuit.num_layers()
    );
    Ok(circuit)
}

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    /// `(f + d^L) / d^L`; zero at a perfect fit.
    pub rescaled_f: f64,
    pub spectral_error: Option<f64>,
    pub radius: f64,
    pub accepted: bool,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub rho: Option<f64>,
    pub tcg_exit: Option<&'static str>,
}

pub fn trace_rows(trace: &OptimizationTrace, dimension: usize) -> Vec<TraceRow> {
    let d = dimension as f64;
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            f: r.f,
            rescaled_f: (r.f + d) / d,
            spectral_error: r.spectral_error,
            radius: r.radius,
            accepted: r.accepted,
            grad_norm: r.grad_norm,
            step_norm: r.step_norm,
            rho: (!r.rho.is_nan()).then_some(r.rho),
            tcg_exit: r.exit.map(|e| e.as_str()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeSummary {
    pub model: ModelSpec,
    pub layers: usize,
    pub warm_start: WarmStart,
    pub warm_start_metrics: Metrics,
    pub final_metrics: Metrics,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub termination: String,
    pub causal_width: usize,
    pub seconds: f64,
}

pub struct OptimizeOutcome {
    pub start: BrickwallCircuit,
    pub circuit: BrickwallCircuit,
    pub trace: OptimizationTrace,
    pub gatefile: GateFile,
    pub summary: OptimizeSummary,
}

pub fn run_optimize(config: &ExperimentConfig) -> Result<OptimizeOutcome> {
    config.validate()?;
    let model = config.lattice_model()?;
    let u = exact_target(&model, config.max_dimension)?;
    let start = warm_start(config)?;
    let tr = config.trust_region.resolve();
    let clock = Instant::now();
    let (circuit, trace) = optimize(&start, &u, &tr)?;
    let seconds = clock.elapsed().as_secs_f64();
    let warm_start_metrics = Metrics::compute(&start, &u)?;
    let gatefile = GateFile::new(config.model, &circuit, &u)?;
    let summary = OptimizeSummary {
        model: config.model,
        layers: circuit.num_layers(),
        warm_start: config.circuit.as_ref().expect("checked by warm_start").warm_start.clone(),
        warm_start_metrics,
        final_metrics: gatefile.metrics,
        iterations: trace.records.len() - 1,
        accepted_steps: trace.accepted_steps(),
        termination: format!("{:?}", trace.termination),
        causal_width: unwrapped_causal_width(&circuit, &model)?,
        seconds,
    };
    Ok(OptimizeOutcome { start, circuit, trace, gatefile, summary })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))
}

pub fn cmd_optimize(config: &ExperimentConfig, out: &Path) -> Result<OptimizeOutcome> {
    prepare_dir(out)?;
    let outcome = run_optimize(config)?;
    let dimension = config.lattice_model()?.dimension();
    outcome.gatefile.write(&out.join(GATES_FILE))?;
    write_csv(&out.join(TRACE_FILE), &trace_rows(&outcome.trace, dimension))?;
    let mut summary = serde_json::to_string_pretty(&outcome.summary)?;
    summary.push('\n');
    std::fs::write(out.join(SUMMARY_FILE), summary)?;
    Ok(outcome)
}

/// One row of `benchmark.csv`; `r` and `s` are empty for optimized circuits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub r: Option<usize>,
    pub s: Option<usize>,
    pub n: usize,
    pub spectral: f64,
    pub frobenius: f64,
    pub source: String,
}

pub fn run_benchmark(config: &ExperimentConfig) -> Result<Vec<BenchmarkRow>> {
    config.validate()?;
    let model = config.lattice_model()?;
    let u = exact_target(&model, config.max_dimension)?;
    let mut rows = Vec::new();
    for method in config.benchmark_methods()? {
        for &r in &config.benchmark.steps {
            let c = splitting_circuit(&method, &model, r)?;
            let w = circuit::circuit_matrix(&c);
            rows.push(BenchmarkRow {
                method: method.name.clone(),
                r: Some(r),
                s: Some(method.s()),
                n: c.num_layers(),
                spectral: circuit::spectral_distance(&w, &u)?,
                frobenius: circuit::frobenius_distance(&w, &u)?,
                source: "splitting".into(),
            });
        }
    }
    for path in &config.benchmark.gatefiles {
        let file = GateFile::read(path)?;
        ensure!(
            file.model == config.model,
            "gate file {} was optimized for {:?}, not {:?}",
            path.display(),
            file.model,
            config.model
        );
        let c = file.circuit()?;
        let w = circuit::circuit_matrix(&c);
        rows.push(BenchmarkRow {
            method: "optimized".into(),
            r: None,
            s: None,
            n: c.num_layers(),
            spectral: circuit::spectral_distance(&w, &u)?,
            frobenius: circuit::frobenius_distance(&w, &u)?,
            source: path.display().to_string(),
        });
    }
    Ok(rows)
}

pub fn cmd_benchmark(config: &ExperimentConfig, out: &Path) -> Result<Vec<BenchmarkRow>> {
    prepare_dir(out)?;
    let rows = run_benchmark(config)?;
    write_csv(&out.join(BENCHMARK_FILE), &rows)?;
    Ok(rows)
}

/// Causal width of `circuit` on a lattice large enough that the light cone
/// does not wrap around.
pub fn unwrapped_causal_width(circuit: &BrickwallCircuit, model: &LatticeModel) -> Result<usize> {
    let n = circuit.num_layers();
    let mut size = model.size + 2 * n + 4;
    size += size % 2;
    let geometry = match model.geometry() {
        Geometry::Chain { .. } => Geometry::Chain { sites: size },
        Geometry::Ladder { .. } => Geometry::Ladder { columns: size },
    };
    Ok(circuit.extend(&geometry)?.causal_width())
}

/// One row of `extend.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendRow {
    pub size: usize,
    pub sites: usize,
    pub n: usize,
    pub causal_width: usize,
    pub light_cone_ok: bool,
    pub spectral: f64,
    pub frobenius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendReport {
    pub rows: Vec<ExtendRow>,
    /// Set when the light cone of the circuit exceeds the optimization lattice.
    pub warning: Option<String>,
}

/// Errors of the stored gates on each lattice size. The optimization size is
/// always included as the first row.
pub fn run_extend(file: &GateFile, sizes: &[usize], cap: usize) -> Result<ExtendReport> {
    let base = file.model.to_model()?;
    let original = file.circuit()?;
    let mut all = vec![base.size];
    for &s in sizes {
        ensure!(s >= base.size, "extension size {s} is smaller than the optimization size {}", base.size);
        if !all.contains(&s) {
            all.push(s);
        }
    }
    let models: Vec<LatticeModel> = all
        .iter()
        .map(|&s| Ok(file.model.with_size(s).to_model()?))
        .collect::<Result<_>>()?;
    for m in &models {
        check_dimension(m, cap)?;
    }
    let width = unwrapped_causal_width(&original, &base)?;
    let light_cone_ok = width <= base.sites();
    let warning = (!light_cone_ok).then(|| {
        format!(
            "light cone of the {}-layer circuit covers {width} sites, more than the {} sites it was optimized on; \
             errors on larger lattices are not guaranteed to stay close",
            original.num_layers(),
            base.sites()
        )
    });
    let mut rows = Vec::with_capacity(models.len());
    for m in &models {
        let c = original.extend(&m.geometry())?;
        let u = exact_unitary(m)?;
        let w = circuit::circuit_matrix(&c);
        rows.push(ExtendRow {
            size: m.size,
            sites: m.sites(),
            n: c.num_layers(),
            causal_width: width,
            light_cone_ok,
            spectral: circuit::spectral_distance(&w, &u)?,
            frobenius: circuit::frobenius_distance(&w, &u)?,
        });
    }
    Ok(ExtendReport { rows, warning })
}

pub fn cmd_extend(gatefile: &Path, sizes: &[usize], cap: usize, out: &Path) -> Result<ExtendReport> {
    prepare_dir(out)?;
    let file = GateFile::read(gatefile)?;
    let report = run_extend(&file, sizes, cap)?;
    write_csv(&out.join(EXTEND_FILE), &report.rows)?;
    Ok(report)
}

/// Gate file for `extend`: explicit path, then the config entry, then the
/// optimize output in `out`.
pub fn resolve_gatefile(explicit: Option<PathBuf>, config: Option<&ExperimentConfig>, out: &Path) -> PathBuf {
    explicit
        .or_else(|| config.and_then(|c| c.extend.gatefile.clone()))
        .unwrap_or_else(|| out.join(GATES_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CircuitSpec;

    fn config(layers: usize, warm: WarmStart) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ModelSpec::Ising1d { size: 4, time: 0.5, j: 1.0, g: 0.75, h: 0.0 });
        c.circuit = Some(CircuitSpec { layers, warm_start: warm });
        c.trust_region.max_iter = Some(10);
        c
    }

    #[test]
    fn warm_starts_have_requested_layers() {
        let c = config(5, WarmStart::Splitting { method: "strang".into(), r: 2 });
        assert_eq!(warm_start(&c).unwrap().num_layers(), 5);
        let c = config(4, WarmStart::Identity);
        assert_eq!(warm_start(&c).unwrap().num_layers(), 4);
        let c = config(3, WarmStart::Random);
        assert_eq!(warm_start(&c).unwrap(), warm_start(&c).unwrap());
    }

    #[test]
    fn optimize_does_not_lose_to_warm_start() {
        let c = config(5, WarmStart::Splitting { method: "strang".into(), r: 2 });
        let out = run_optimize(&c).unwrap();
        assert!(out.summary.final_metrics.spectral <= out.summary.warm_start_metrics.spectral);
        let rows = trace_rows(&out.trace, 16);
        assert_eq!(rows.len(), out.trace.records.len());
        assert!(rows[0].rho.is_none() && rows[0].spectral_error.is_some());
    }

    #[test]
    fn extend_at_original_size_matches_stored_metric() {
        let c = config(5, WarmStart::Splitting { method: "strang".into(), r: 2 });
        let out = run_optimize(&c).unwrap();
        let rep = run_extend(&out.gatefile, &[6], 1 << 12).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!((rep.rows[0].spectral - out.gatefile.metrics.spectral).abs() <= 1e-12);
        assert!(rep.warning.is_some());
        assert!(run_extend(&out.gatefile, &[6], 32).is_err());
    }
}
