//! Versioned JSON persistence of optimized gates.
//!
//! Numbers are written in shortest round-trip form, so reading a file and
//! writing it again reproduces the same bytes.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use brickwall::circuit::{self, BrickwallCircuit, TopologyLabel};
use brickwall::linalg::CMat;
use brickwall::manifold::UnitaryGate;
use brickwall::models::{exact_unitary, LOCAL_DIM};
use faer::c64;
use serde::{Deserialize, Serialize};

use crate::config::ModelSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub f: f64,
    pub frobenius: f64,
    pub spectral: f64,
}

impl Metrics {
    pub fn compute(circuit: &BrickwallCircuit, u: &CMat) -> Result<Self> {
        let w = circuit::circuit_matrix(circuit);
        Ok(Self {
            f: circuit::target_f(circuit, u)?,
            frobenius: circuit::frobenius_distance(&w, u)?,
            spectral: circuit::spectral_distance(&w, u)?,
        })
    }

    /// Largest absolute difference between corresponding entries.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        (self.f - other.f)
            .abs()
            .max((self.frobenius - other.frobenius).abs())
            .max((self.spectral - other.spectral).abs())
    }
}

/// One layer: topology label and the gate as row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateLayer {
    pub topology: String,
    pub gate: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateFile {
    pub format_version: u32,
    pub model: ModelSpec,
    pub local_dim: usize,
    pub layers: Vec<GateLayer>,
    pub metrics: Metrics,
}

fn encode(gate: &UnitaryGate) -> Vec<Vec<[f64; 2]>> {
    let a = gate.matrix();
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

fn decode(rows: &[Vec<[f64; 2]>], layer: usize) -> Result<UnitaryGate> {
    let m = rows.len();
    ensure!(m > 0, "layer {layer}: empty gate");
    ensure!(
        rows.iter().all(|r| r.len() == m),
        "layer {layer}: gate is not a square {m} x {m} array"
    );
    let a = CMat::from_fn(m, m, |i, j| c64::new(rows[i][j][0], rows[i][j][1]));
    UnitaryGate::new(a).with_context(|| format!("layer {layer}: stored gate is not unitary"))
}

impl GateFile {
    /// Captures `circuit` together with its metrics against `u`.
    pub fn new(model: ModelSpec, circuit: &BrickwallCircuit, u: &CMat) -> Result<Self> {
        let metrics = Metrics::compute(circuit, u)?;
        Self::with_metrics(model, circuit, metrics)
    }

    pub fn with_metrics(model: ModelSpec, circuit: &BrickwallCircuit, metrics: Metrics) -> Result<Self> {
        let layers = circuit
            .layers()
            .iter()
            .map(|l| {
                let label = l.topology.label();
                if label == TopologyLabel::Custom {
                    bail!("custom layer topologies cannot be stored in a gate file");
                }
                Ok(GateLayer { topology: label.as_str().to_string(), gate: encode(&l.gate) })
            })
            .collect::<Result<_>>()?;
        Ok(Self { format_version: FORMAT_VERSION, model, local_dim: circuit.local_dim(), layers, metrics })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `(label, gate)` pairs in application order.
    pub fn labeled_gates(&self) -> Result<Vec<(TopologyLabel, UnitaryGate)>> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| Ok((TopologyLabel::parse(&l.topology)?, decode(&l.gate, i)?)))
            .collect()
    }

    /// The stored circuit on the lattice it was optimized for.
    pub fn circuit(&self) -> Result<BrickwallCircuit> {
        let model = self.model.to_model()?;
        self.circuit_on(&model.geometry())
    }

    pub fn circuit_on(&self, geometry: &circuit::Geometry) -> Result<BrickwallCircuit> {
        Ok(circuit::extend_circuit(&self.labeled_gates()?, geometry, self.local_dim)?)
    }

    /// Recomputes the metrics from the stored gates.
    pub fn recompute_metrics(&self) -> Result<Metrics> {
        let model = self.model.to_model()?;
        let u = exact_unitary(&model)?;
        Metrics::compute(&self.circuit()?, &u)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.format_version == FORMAT_VERSION,
            "unsupported gate file version {} (expected {FORMAT_VERSION})",
            self.format_version
        );
        ensure!(self.local_dim == LOCAL_DIM, "local dimension {} is not supported", self.local_dim);
        ensure!(!self.layers.is_empty(), "gate file has no layers");
        self.circuit()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).context("malformed gate file")?;
        file.validate()?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read gate file {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use brickwall::models::{splitting_circuit, splitting_method};

    fn sample() -> GateFile {
        let spec = ModelSpec::Ising1d { size: 4, time: 0.7, j: 1.0, g: 0.75, h: 0.2 };
        let model = spec.to_model().unwrap();
        let c = splitting_circuit(&splitting_method("strang").unwrap(), &model, 2).unwrap();
        GateFile::new(spec, &c, &exact_unitary(&model).unwrap()).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact_and_byte_stable() {
        let file = sample();
        let text = file.to_json().unwrap();
        let back = GateFile::from_json(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json().unwrap(), text);
        let original = file.circuit().unwrap();
        let restored = back.circuit().unwrap();
        for (a, b) in original.gates().iter().zip(restored.gates()) {
            for i in 0..4 {
                for j in 0..4 {
                    let (x, y) = (a.matrix()[(i, j)], b.matrix()[(i, j)]);
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
    }

    #[test]
    fn metrics_are_recomputable() {
        let file = sample();
        assert!(file.recompute_metrics().unwrap().max_deviation(&file.metrics) <= 1e-10);
    }

    #[test]
    fn rejects_bad_files() {
        let file = sample();
        let mut v = file.clone();
        v.format_version = 2;
        assert!(GateFile::from_json(&v.to_json().unwrap()).is_err());
        let mut v = file.clone();
        v.layers[0].gate[0][0] = [2.0, 0.0];
        assert!(GateFile::from_json(&v.to_json().unwrap()).is_err());
        let mut v = file.clone();
        v.layers[1].topology = "diagonal".into();
        assert!(GateFile::from_json(&v.to_json().unwrap()).is_err());
        let mut v = file;
        v.layers[0].gate.pop();
        assert!(GateFile::from_json(&v.to_json().unwrap()).is_err());
    }
}
