//! Splitting methods for `e^{−i(H_a + H_b [+ H_c])t}` and their brick-wall
//! circuits.
//!
//! A method is a sequence of `(partition, coefficient)` substeps; one time
//! step `Δt` applies `e^{−i H_k c Δt}` for each substep in order. Every method
//! here is symmetric and starts and ends on partition `0`, so consecutive
//! steps merge one substep and `r` steps need `(s − 1) r + 1` layers.

use crate::circuit::{BrickwallCircuit, Geometry};
use crate::error::{Error, Result};

use super::{bond_gate, LatticeModel, LOCAL_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingMethod {
    pub name: String,
    pub nominal_order: u32,
    pub partitions: usize,
    pub substeps: Vec<(usize, f64)>,
}

impl SplittingMethod {
    /// Number of substeps `s`.
    pub fn s(&self) -> usize {
        self.substeps.len()
    }

    /// Layers needed for `r` steps.
    pub fn layers(&self, r: usize) -> usize {
        (self.s() - 1) * r + 1
    }

    /// Sum of coefficients of partition `k`.
    pub fn weight(&self, k: usize) -> f64 {
        self.substeps.iter().filter(|(p, _)| *p == k).map(|(_, c)| c).sum()
    }

    pub fn is_compatible(&self, geometry: &Geometry) -> bool {
        self.partitions == geometry.num_partitions()
    }

    /// The same method with `r` steps of size `1/r` concatenated and merged.
    pub fn repeated(&self, r: usize) -> Vec<(usize, f64)> {
        let scale = 1.0 / r as f64;
        let mut out = Vec::with_capacity(self.layers(r));
        for _ in 0..r {
            for &(p, c) in &self.substeps {
                push_merged(&mut out, p, c * scale);
            }
        }
        out
    }
}

fn push_merged(seq: &mut Vec<(usize, f64)>, partition: usize, coeff: f64) {
    match seq.last_mut() {
        Some((p, c)) if *p == partition => *c += coeff,
        _ => seq.push((partition, coeff)),
    }
}

/// Composition `S(w_1 Δt) ⋯ S(w_k Δt)` of a base scheme, merged.
fn compose(base: &[(usize, f64)], weights: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for &w in weights {
        for &(p, c) in base {
            push_merged(&mut out, p, c * w);
        }
    }
    out
}

fn method(name: &str, order: u32, partitions: usize, substeps: Vec<(usize, f64)>) -> SplittingMethod {
    SplittingMethod {
        name: name.to_string(),
        nominal_order: order,
        partitions,
        substeps,
    }
}

fn strang2() -> Vec<(usize, f64)> {
    vec![(0, 0.5), (1, 1.0), (0, 0.5)]
}

fn strang3() -> Vec<(usize, f64)> {
    vec![(0, 0.5), (1, 0.5), (2, 1.0), (1, 0.5), (0, 0.5)]
}

fn suzuki4_weights() -> Vec<f64> {
    let p = 1.0 / (4.0 - 4f64.cbrt());
    vec![p, p, 1.0 - 4.0 * p, p, p]
}

fn yoshida4_weights() -> Vec<f64> {
    let w1 = 1.0 / (2.0 - 2f64.cbrt());
    vec![w1, 1.0 - 2.0 * w1, w1]
}

fn yoshida6_weights() -> Vec<f64> {
    let w1 = -1.177_679_984_178_87;
    let w2 = 0.235_573_213_359_357;
    let w3 = 0.784_513_610_477_560;
    let w0 = 1.0 - 2.0 * (w1 + w2 + w3);
    vec![w3, w2, w1, w0, w1, w2, w3]
}

fn mclachlan4() -> Vec<(usize, f64)> {
    let r = 471f64.sqrt();
    let a1 = (642.0 + r) / 3924.0;
    let a2 = 121.0 * (12.0 - r) / 3924.0;
    let a3 = 1.0 - 2.0 * (a1 + a2);
    let b1 = 6.0 / 11.0;
    let b2 = 0.5 - b1;
    vec![(0, a1), (1, b1), (0, a2), (1, b2), (0, a3), (1, b2), (0, a2), (1, b1), (0, a1)]
}

fn blanes_moan_s6() -> Vec<(usize, f64)> {
    let a1 = 0.079_203_696_431_195_7;
    let a2 = 0.353_172_906_049_774;
    let a3 = -0.042_065_080_357_719_5;
    let a4 = 1.0 - 2.0 * (a1 + a2 + a3);
    let b1 = 0.209_515_106_613_362;
    let b2 = -0.143_851_773_179_818;
    let b3 = 0.5 - (b1 + b2);
    vec![
        (0, a1),
        (1, b1),
        (0, a2),
        (1, b2),
        (0, a3),
        (1, b3),
        (0, a4),
        (1, b3),
        (0, a3),
        (1, b2),
        (0, a2),
        (1, b1),
        (0, a1),
    ]
}

/// All methods: two-partition schemes followed by three-partition schemes.
pub fn splitting_methods_catalog() -> Vec<SplittingMethod> {
    vec![
        method("strang", 2, 2, strang2()),
        method("suzuki4", 4, 2, compose(&strang2(), &suzuki4_weights())),
        method("yoshida4", 4, 2, compose(&strang2(), &yoshida4_weights())),
        method("mclachlan4", 4, 2, mclachlan4()),
        method("blanes-moan-s6", 4, 2, blanes_moan_s6()),
        method("strang3", 2, 3, strang3()),
        method("suzuki4-3", 4, 3, compose(&strang3(), &suzuki4_weights())),
        method("yoshida4-3", 4, 3, compose(&strang3(), &yoshida4_weights())),
        method("yoshida6-3", 6, 3, compose(&strang3(), &yoshida6_weights())),
    ]
}

pub fn splitting_method(name: &str) -> Result<SplittingMethod> {
    splitting_methods_catalog()
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown splitting method `{name}`")))
}

/// Brick-wall circuit of `r` merged steps of `method` with `Δt = t / r`.
pub fn splitting_circuit(
    method: &SplittingMethod,
    model: &LatticeModel,
    r: usize,
) -> Result<BrickwallCircuit> {
    let geometry = model.geometry();
    if !method.is_compatible(&geometry) {
        return Err(Error::IncompatibleSplitting {
            method: method.name.clone(),
            method_partitions: method.partitions,
            geometry_partitions: geometry.num_partitions(),
        });
    }
    if r == 0 {
        return Err(Error::InvalidConfig("splitting needs at least one step".into()));
    }
    let layers = method
        .repeated(r)
        .into_iter()
        .map(|(p, c)| {
            let label = geometry.partition_label(p)?;
            Ok((label, bond_gate(model, label, c * model.time)?))
        })
        .collect::<Result<Vec<_>>>()?;
    BrickwallCircuit::from_labels(&geometry, LOCAL_DIM, layers)
}
