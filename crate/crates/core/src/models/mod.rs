//! Lattice Hamiltonians, exact time evolution and local bond gates.
//!
//! Single-site fields are distributed over the bonds touching each site so
//! that every partition Hamiltonian is a sum of identical commuting bond
//! operators: half per bond on a chain, a third per bond on the ladder (two
//! leg bonds and one rung per site).

mod splitting;

pub use splitting::{
    splitting_circuit, splitting_methods_catalog, splitting_method, SplittingMethod,
};

use faer::c64;

use crate::circuit::{Geometry, TopologyLabel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, PairLayout, ONE, ZERO};
use crate::manifold::UnitaryGate;

/// Local dimension of all models (qubits).
pub const LOCAL_DIM: usize = 2;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMat {
        let i = linalg::I;
        let entries = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -i, i, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        CMat::from_fn(2, 2, |r, c| entries[2 * r + c])
    }

    /// `(row, phase)` with `P|bit⟩ = phase·|row⟩`.
    fn action(self, bit: usize) -> (usize, c64) {
        match self {
            Pauli::I => (bit, ONE),
            Pauli::X => (bit ^ 1, ONE),
            Pauli::Y => (bit ^ 1, if bit == 0 { linalg::I } else { -linalg::I }),
            Pauli::Z => (bit, if bit == 0 { ONE } else { -ONE }),
        }
    }
}

/// `dst ← dst + coeff · ⊗_k P_k` on qubit sites, identity elsewhere.
pub fn add_pauli_string(dst: &mut CMat, sites: usize, coeff: f64, string: &[(usize, Pauli)]) {
    let dim = 1usize << sites;
    for col in 0..dim {
        let mut row = col;
        let mut phase = c64::new(coeff, 0.0);
        for &(site, p) in string {
            let shift = sites - 1 - site;
            let bit = (row >> shift) & 1;
            let (new_bit, ph) = p.action(bit);
            row = (row & !(1 << shift)) | (new_bit << shift);
            phase *= ph;
        }
        dst[(row, col)] += phase;
    }
}

/// Hamiltonian family and parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `Σ_j J Z_j Z_{j+1} + g X_j + h Z_j` on a ring.
    Ising1d { j: f64, g: f64, h: f64 },
    /// `Σ_j Σ_α J_α σ^α_j σ^α_{j+1} + h_α σ^α_j` on a ring.
    Heisenberg1d { j: [f64; 3], h: [f64; 3] },
    /// `Σ_⟨jk⟩ J Z_j Z_k + Σ_j g X_j` on a periodic two-leg ladder.
    IsingLadder { j: f64, g: f64 },
}

/// A lattice model with evolution time `t`; `size` is the chain length or
/// the ladder column count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeModel {
    pub kind: ModelKind,
    pub size: usize,
    pub time: f64,
}

impl LatticeModel {
    pub fn new(kind: ModelKind, size: usize, time: f64) -> Result<Self> {
        let model = Self { kind, size, time };
        model.geometry().validate()?;
        if !time.is_finite() {
            return Err(Error::InvalidConfig(format!("evolution time must be finite, got {time}")));
        }
        Ok(model)
    }

    pub fn geometry(&self) -> Geometry {
        match self.kind {
            ModelKind::Ising1d { .. } | ModelKind::Heisenberg1d { .. } => {
                Geometry::Chain { sites: self.size }
            }
            ModelKind::IsingLadder { .. } => Geometry::Ladder { columns: self.size },
        }
    }

    pub fn sites(&self) -> usize {
        self.geometry().sites()
    }

    pub fn dimension(&self) -> usize {
        LOCAL_DIM.pow(self.sites() as u32)
    }

    /// Same model on a different lattice size.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        Self::new(self.kind, size, self.time)
    }

    /// All nearest-neighbour bonds, each once.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let g = self.geometry();
        (0..g.num_partitions())
            .flat_map(|k| {
                let label = g.partition_label(k).expect("partition in range");
                g.topology(label).expect("valid geometry").pairs().to_vec()
            })
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Ising1d { .. } => "ising1d",
            ModelKind::Heisenberg1d { .. } => "heisenberg1d",
            ModelKind::IsingLadder { .. } => "ising_ladder",
        }
    }
}

/// Dense Hamiltonian assembled term by term from Pauli strings.
pub fn build_hamiltonian(model: &LatticeModel) -> Result<CMat> {
    model.geometry().validate()?;
    let sites = model.sites();
    let dim = model.dimension();
    let mut h = CMat::zeros(dim, dim);
    let bonds = model.bonds();
    match model.kind {
        ModelKind::Ising1d { j, g, h: hz } => {
            for &(p, q) in &bonds {
                add_pauli_string(&mut h, sites, j, &[(p, Pauli::Z), (q, Pauli::Z)]);
            }
            for s in 0..sites {
                add_pauli_string(&mut h, sites, g, &[(s, Pauli::X)]);
                add_pauli_string(&mut h, sites, hz, &[(s, Pauli::Z)]);
            }
        }
        ModelKind::Heisenberg1d { j, h: field } => {
            for &(p, q) in &bonds {
                for (a, &pauli) in Pauli::XYZ.iter().enumerate() {
                    add_pauli_string(&mut h, sites, j[a], &[(p, pauli), (q, pauli)]);
                }
            }
            for s in 0..sites {
                for (a, &pauli) in Pauli::XYZ.iter().enumerate() {
                    add_pauli_string(&mut h, sites, field[a], &[(s, pauli)]);
                }
            }
        }
        ModelKind::IsingLadder { j, g } => {
            for &(p, q) in &bonds {
                add_pauli_string(&mut h, sites, j, &[(p, Pauli::Z), (q, Pauli::Z)]);
            }
            for s in 0..sites {
                add_pauli_string(&mut h, sites, g, &[(s, Pauli::X)]);
            }
        }
    }
    Ok(h)
}

/// Two-site operator of one bond in the partition with topology `label`,
/// carrying its share of the single-site fields.
pub fn bond_operator(model: &LatticeModel, label: TopologyLabel) -> Result<CMat> {
    let g = model.geometry();
    let allowed = (0..g.num_partitions()).any(|k| g.partition_label(k).ok() == Some(label));
    if !allowed {
        return Err(Error::InvalidTopology(format!(
            "label `{label}` is not a partition of {}",
            model.name()
        )));
    }
    let mut op = CMat::zeros(4, 4);
    let mut two_site = |coeff: f64, a: Pauli, b: Pauli| add_pauli_string(&mut op, 2, coeff, &[(0, a), (1, b)]);
    match model.kind {
        ModelKind::Ising1d { j, g, h } => {
            two_site(j, Pauli::Z, Pauli::Z);
            two_site(0.5 * g, Pauli::X, Pauli::I);
            two_site(0.5 * g, Pauli::I, Pauli::X);
            two_site(0.5 * h, Pauli::Z, Pauli::I);
            two_site(0.5 * h, Pauli::I, Pauli::Z);
        }
        ModelKind::Heisenberg1d { j, h } => {
            for (a, &p) in Pauli::XYZ.iter().enumerate() {
                two_site(j[a], p, p);
                two_site(0.5 * h[a], p, Pauli::I);
                two_site(0.5 * h[a], Pauli::I, p);
            }
        }
        ModelKind::IsingLadder { j, g } => {
            // leg bonds and rungs share the same form; each site has three bonds
            two_site(j, Pauli::Z, Pauli::Z);
            two_site(g / 3.0, Pauli::X, Pauli::I);
            two_site(g / 3.0, Pauli::I, Pauli::X);
        }
    }
    Ok(op)
}

/// `e^{−i ĥ τ}` for the bond operator `ĥ` of partition `label`.
pub fn bond_gate(model: &LatticeModel, label: TopologyLabel, tau: f64) -> Result<UnitaryGate> {
    let op = bond_operator(model, label)?;
    UnitaryGate::new(linalg::hermitian_exp(&op, tau)?)
}

/// Sum of the bond operators over all pairs of partition `label`.
pub fn partition_hamiltonian(model: &LatticeModel, label: TopologyLabel) -> Result<CMat> {
    let op = bond_operator(model, label)?;
    let g = model.geometry();
    let topology = g.topology(label)?;
    let dim = model.dimension();
    let mut h = CMat::zeros(dim, dim);
    for &(p, q) in topology.pairs() {
        linalg::add_embedded_pair(&mut h, &op, &PairLayout::new(p, q, g.sites(), LOCAL_DIM));
    }
    Ok(h)
}

/// `e^{−iHt}` via Hermitian eigendecomposition; rejects `‖H − H†‖_max > 1e−10`.
pub fn exact_evolution(h: &CMat, t: f64) -> Result<CMat> {
    linalg::hermitian_exp(h, t)
}

/// `e^{−iHt}` for the model's own Hamiltonian and time.
pub fn exact_unitary(model: &LatticeModel) -> Result<CMat> {
    exact_evolution(&build_hamiltonian(model)?, model.time)
}
