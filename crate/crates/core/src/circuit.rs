//! Brick-wall circuits: construction, dense contraction, target function,
//! gradient environments and the Riemannian Hessian.
//!
//! Layer `0` is applied first, so `W = Λ_{n−1} ⋯ Λ_1 Λ_0` where `Λ_ℓ` applies
//! the layer gate `G_ℓ` to every pair of the layer topology. The target is
//! `f(G) = −Re Tr[U†W(G)]`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use faer::c64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, PairLayout, RMat, ZERO};
use crate::manifold::{self, ProductTangent, UnitaryGate};

/// Kind of a layer's pair set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyLabel {
    Even,
    Odd,
    Rung,
    Custom,
}

impl TopologyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Even => "even",
            Self::Odd => "odd",
            Self::Rung => "rung",
            Self::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Self::Even),
            "odd" => Ok(Self::Odd),
            "rung" => Ok(Self::Rung),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidTopology(format!("unknown label `{other}`"))),
        }
    }
}

impl fmt::Display for TopologyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Disjoint site pairs on which one layer acts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTopology {
    label: TopologyLabel,
    pairs: Vec<(usize, usize)>,
}

impl LayerTopology {
    /// Validates that every pair has two distinct sites below `sites` and that
    /// no site appears twice.
    pub fn new(label: TopologyLabel, pairs: Vec<(usize, usize)>, sites: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(p, q) in &pairs {
            if p >= sites || q >= sites {
                return Err(Error::InvalidTopology(format!(
                    "pair ({p}, {q}) out of range for {sites} sites"
                )));
            }
            if p == q {
                return Err(Error::InvalidTopology(format!("pair ({p}, {q}) repeats a site")));
            }
            if !seen.insert(p) || !seen.insert(q) {
                return Err(Error::InvalidTopology(format!(
                    "pair ({p}, {q}) overlaps another pair"
                )));
            }
        }
        Ok(Self { label, pairs })
    }

    pub fn custom(pairs: Vec<(usize, usize)>, sites: usize) -> Result<Self> {
        Self::new(TopologyLabel::Custom, pairs, sites)
    }

    pub fn label(&self) -> TopologyLabel {
        self.label
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn max_site(&self) -> Option<usize> {
        self.pairs.iter().map(|&(p, q)| p.max(q)).max()
    }

    fn layouts(&self, sites: usize, local_dim: usize) -> Vec<PairLayout> {
        self.pairs
            .iter()
            .map(|&(p, q)| PairLayout::new(p, q, sites, local_dim))
            .collect()
    }
}

/// Periodic lattice on which brick-wall topologies are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Ring of `sites` sites; even `sites ≥ 4`.
    Chain { sites: usize },
    /// Two-leg ladder of `columns` columns, periodic along the legs; site
    /// index `2x + y`. Even `columns ≥ 4`.
    Ladder { columns: usize },
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Chain { sites } => {
                if sites < 4 || sites % 2 != 0 {
                    return Err(Error::InvalidGeometry(format!(
                        "chain length must be even and at least 4, got {sites}"
                    )));
                }
            }
            Self::Ladder { columns } => {
                if columns < 4 || columns % 2 != 0 {
                    return Err(Error::InvalidGeometry(format!(
                        "ladder column count must be even and at least 4, got {columns}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        match *self {
            Self::Chain { sites } => sites,
            Self::Ladder { columns } => 2 * columns,
        }
    }

    /// Number of partitions of the Hamiltonian (2 on a chain, 3 on a ladder).
    pub fn num_partitions(&self) -> usize {
        match self {
            Self::Chain { .. } => 2,
            Self::Ladder { .. } => 3,
        }
    }

    /// Topology label of partition `k`.
    pub fn partition_label(&self, k: usize) -> Result<TopologyLabel> {
        const LABELS: [TopologyLabel; 3] =
            [TopologyLabel::Even, TopologyLabel::Odd, TopologyLabel::Rung];
        if k >= self.num_partitions() {
            return Err(Error::InvalidTopology(format!(
                "partition {k} does not exist on {self:?}"
            )));
        }
        Ok(LABELS[k])
    }

    /// Repeating label sequence of a plain brick wall on this geometry.
    pub fn label_cycle(&self) -> &'static [TopologyLabel] {
        use TopologyLabel::*;
        match self {
            Self::Chain { .. } => &[Even, Odd],
            Self::Ladder { .. } => &[Even, Odd, Rung, Odd],
        }
    }

    pub fn topology(&self, label: TopologyLabel) -> Result<LayerTopology> {
        self.validate()?;
        let pairs = match (*self, label) {
            (Self::Chain { sites }, TopologyLabel::Even) => {
                (0..sites).step_by(2).map(|j| (j, j + 1)).collect()
            }
            (Self::Chain { sites }, TopologyLabel::Odd) => {
                (1..sites).step_by(2).map(|j| (j, (j + 1) % sites)).collect()
            }
            (Self::Ladder { columns }, TopologyLabel::Even | TopologyLabel::Odd) => {
                let start = usize::from(label == TopologyLabel::Odd);
                (start..columns)
                    .step_by(2)
                    .flat_map(|x| (0..2).map(move |y| (2 * x + y, 2 * ((x + 1) % columns) + y)))
                    .collect()
            }
            (Self::Ladder { columns }, TopologyLabel::Rung) => {
                (0..columns).map(|x| (2 * x, 2 * x + 1)).collect()
            }
            (geometry, label) => {
                return Err(Error::InvalidTopology(format!(
                    "label `{label}` has no generated topology on {geometry:?}"
                )))
            }
        };
        LayerTopology::new(label, pairs, self.sites())
    }
}

/// One circuit layer: a topology and the gate shared by all its pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub topology: LayerTopology,
    pub gate: UnitaryGate,
}

/// Brick-wall circuit with one shared gate per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickwallCircuit {
    sites: usize,
    local_dim: usize,
    layers: Vec<Layer>,
}

impl BrickwallCircuit {
    pub fn new(sites: usize, local_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if local_dim < 2 {
            return Err(Error::InvalidGeometry(format!(
                "local dimension must be at least 2, got {local_dim}"
            )));
        }
        let m = local_dim * local_dim;
        for layer in &layers {
            if layer.gate.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: layer.gate.dim(),
                });
            }
            if let Some(max) = layer.topology.max_site() {
                if max >= sites {
                    return Err(Error::InvalidTopology(format!(
                        "site {max} out of range for {sites} sites"
                    )));
                }
            }
        }
        Ok(Self {
            sites,
            local_dim,
            layers,
        })
    }

    /// Circuit on `geometry` with one layer per `(label, gate)` entry.
    pub fn from_labels(
        geometry: &Geometry,
        local_dim: usize,
        layers: Vec<(TopologyLabel, UnitaryGate)>,
    ) -> Result<Self> {
        let mut cache: HashMap<TopologyLabel, LayerTopology> = HashMap::new();
        let mut out = Vec::with_capacity(layers.len());
        for (label, gate) in layers {
            let topology = match cache.get(&label) {
                Some(t) => t.clone(),
                None => {
                    let t = geometry.topology(label)?;
                    cache.insert(label, t.clone());
                    t
                }
            };
            out.push(Layer { topology, gate });
        }
        Self::new(geometry.sites(), local_dim, out)
    }

    /// `n` identity layers following the geometry's label cycle, starting
    /// with `even`.
    pub fn identity(geometry: &Geometry, local_dim: usize, n: usize) -> Result<Self> {
        let cycle = geometry.label_cycle();
        let m = local_dim * local_dim;
        let layers = (0..n)
            .map(|i| (cycle[i % cycle.len()], UnitaryGate::identity(m)))
            .collect();
        Self::from_labels(geometry, local_dim, layers)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// Gate dimension `m = d²`.
    pub fn gate_dim(&self) -> usize {
        self.local_dim * self.local_dim
    }

    /// Hilbert-space dimension `d^L`.
    pub fn dimension(&self) -> usize {
        self.local_dim.pow(self.sites as u32)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn gates(&self) -> Vec<UnitaryGate> {
        self.layers.iter().map(|l| l.gate.clone()).collect()
    }

    pub fn labels(&self) -> Vec<TopologyLabel> {
        self.layers.iter().map(|l| l.topology.label()).collect()
    }

    pub fn topologies(&self) -> Vec<LayerTopology> {
        self.layers.iter().map(|l| l.topology.clone()).collect()
    }

    /// Same topologies with new gates.
    pub fn with_gates(&self, gates: Vec<UnitaryGate>) -> Result<Self> {
        if gates.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                found: gates.len(),
            });
        }
        let layers = self
            .layers
            .iter()
            .zip(gates)
            .map(|(l, gate)| Layer {
                topology: l.topology.clone(),
                gate,
            })
            .collect();
        Self::new(self.sites, self.local_dim, layers)
    }

    /// Per-layer polar retraction of a real-coordinate step.
    pub fn retract(&self, step: &ProductTangent) -> Result<Self> {
        if step.num_blocks() != self.layers.len() || step.block_dim() != self.gate_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len() * self.gate_dim() * self.gate_dim(),
                found: step.as_slice().len(),
            });
        }
        let gates = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let xi = step.tangent_block(l, &layer.gate);
                manifold::retract_polar(&layer.gate, &xi)
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_gates(gates)
    }

    /// Same gates with topologies regenerated on a larger `geometry`.
    pub fn extend(&self, geometry: &Geometry) -> Result<Self> {
        if geometry.sites() < self.sites {
            return Err(Error::InvalidGeometry(format!(
                "cannot shrink a circuit from {} to {} sites",
                self.sites,
                geometry.sites()
            )));
        }
        let gates: Vec<_> = self
            .layers
            .iter()
            .map(|l| (l.topology.label(), l.gate.clone()))
            .collect();
        extend_circuit(&gates, geometry, self.local_dim)
    }

    /// Causal width of this circuit, see [`causal_width`].
    pub fn causal_width(&self) -> usize {
        causal_width(self.layers.len(), &self.topologies(), self.sites)
    }
}

/// Dense operator of one layer: `gate` on every pair, identity elsewhere.
pub fn layer_matrix(
    gate: &UnitaryGate,
    topology: &LayerTopology,
    sites: usize,
    local_dim: usize,
) -> Result<CMat> {
    if gate.dim() != local_dim * local_dim {
        return Err(Error::DimensionMismatch {
            expected: local_dim * local_dim,
            found: gate.dim(),
        });
    }
    if topology.max_site().is_some_and(|s| s >= sites) {
        return Err(Error::InvalidTopology(format!(
            "topology exceeds {sites} sites"
        )));
    }
    let mut out = linalg::identity(local_dim.pow(sites as u32));
    apply_layer(&mut out, gate.matrix(), &topology.layouts(sites, local_dim));
    Ok(out)
}

fn apply_layer(x: &mut CMat, gate: &CMat, layouts: &[PairLayout]) {
    for layout in layouts {
        linalg::apply_pair_left(x, gate, layout);
    }
}

/// `W = Λ_{n−1} ⋯ Λ_0`.
pub fn circuit_matrix(circuit: &BrickwallCircuit) -> CMat {
    let mut w = linalg::identity(circuit.dimension());
    for layer in &circuit.layers {
        let layouts = layer.topology.layouts(circuit.sites, circuit.local_dim);
        apply_layer(&mut w, layer.gate.matrix(), &layouts);
    }
    w
}

fn check_target(circuit: &BrickwallCircuit, u: &CMat) -> Result<()> {
    let dim = circuit.dimension();
    linalg::ensure_square(u)?;
    if u.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: u.nrows(),
        });
    }
    Ok(())
}

/// `f = −Re Tr[U†W]`.
pub fn target_f(circuit: &BrickwallCircuit, u: &CMat) -> Result<f64> {
    check_target(circuit, u)?;
    Ok(target_from_matrix(&circuit_matrix(circuit), u))
}

fn target_from_matrix(w: &CMat, u: &CMat) -> f64 {
    -linalg::inner_product(u, w).re
}

/// `env_ℓ[a, b] = ∂ Tr[U†W] / ∂ (G_ℓ)_{ab}`, one `m x m` matrix per layer.
pub type EnvironmentList = Vec<CMat>;

pub fn circuit_environments(circuit: &BrickwallCircuit, u: &CMat) -> Result<EnvironmentList> {
    check_target(circuit, u)?;
    Ok(Contraction::new(circuit, u).environments())
}

/// Euclidean gradient of `f` per layer: `Z_ℓ = −conj(env_ℓ)`.
pub fn euclidean_gradient(circuit: &BrickwallCircuit, u: &CMat) -> Result<Vec<CMat>> {
    let envs = circuit_environments(circuit, u)?;
    Ok(envs.iter().map(|e| linalg::scale(&linalg::conj(e), -linalg::ONE)).collect())
}

/// Riemannian gradient in flat real coordinates; block `ℓ` is
/// `−𝔰⁻¹(asym(G_ℓ† conj(env_ℓ)))`.
pub fn riemannian_gradient(circuit: &BrickwallCircuit, u: &CMat) -> Result<ProductTangent> {
    let envs = circuit_environments(circuit, u)?;
    Ok(gradient_from_envs(circuit, &envs))
}

fn gradient_from_envs(circuit: &BrickwallCircuit, envs: &[CMat]) -> ProductTangent {
    let m = circuit.gate_dim();
    let mut grad = ProductTangent::zeros(circuit.num_layers(), m);
    for (l, (layer, env)) in circuit.layers.iter().zip(envs).enumerate() {
        let z = linalg::scale(&linalg::conj(env), -linalg::ONE);
        let a = manifold::antihermitian_part(&(layer.gate.matrix().adjoint() * &z))
            .expect("gate is square");
        manifold::extract_flat(&a, grad.block_mut(l));
    }
    grad
}

/// Riemannian Hessian as a dense real `(n·m²) x (n·m²)` matrix in the
/// coordinates of [`riemannian_gradient`]. Symmetric up to round-off; not
/// explicitly symmetrized.
pub fn riemannian_hessian(circuit: &BrickwallCircuit, u: &CMat) -> Result<RMat> {
    check_target(circuit, u)?;
    let c = Contraction::new(circuit, u);
    let envs = c.environments();
    Ok(c.hessian(&envs))
}

/// Target value, gradient and optionally the Hessian from one contraction.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub environments: EnvironmentList,
    pub gradient: ProductTangent,
    pub hessian: Option<RMat>,
}

pub fn evaluate(circuit: &BrickwallCircuit, u: &CMat, with_hessian: bool) -> Result<Evaluation> {
    check_target(circuit, u)?;
    let c = Contraction::new(circuit, u);
    let f = target_from_matrix(c.prefix.last().expect("prefix includes W"), u);
    let environments = c.environments();
    let gradient = gradient_from_envs(circuit, &environments);
    let hessian = with_hessian.then(|| c.hessian(&environments));
    Ok(Evaluation {
        f,
        environments,
        gradient,
        hessian,
    })
}

/// Cached partial products for derivative evaluation.
///
/// `prefix[ℓ] = Λ_{ℓ−1} ⋯ Λ_0` (so `prefix[n] = W`) and
/// `suffix_t[ℓ] = (U† Λ_{n−1} ⋯ Λ_{ℓ+1})ᵀ`. Transposed suffixes let every
/// contraction apply gates from the left only.
struct Contraction<'a> {
    circuit: &'a BrickwallCircuit,
    layouts: Vec<Vec<PairLayout>>,
    gates_t: Vec<CMat>,
    prefix: Vec<CMat>,
    suffix_t: Vec<CMat>,
}

impl<'a> Contraction<'a> {
    fn new(circuit: &'a BrickwallCircuit, u: &CMat) -> Self {
        let n = circuit.num_layers();
        let layouts: Vec<Vec<PairLayout>> = circuit
            .layers
            .iter()
            .map(|l| l.topology.layouts(circuit.sites, circuit.local_dim))
            .collect();
        let gates_t: Vec<CMat> = circuit
            .layers
            .iter()
            .map(|l| linalg::transpose(l.gate.matrix()))
            .collect();

        let mut prefix = Vec::with_capacity(n + 1);
        let mut current = linalg::identity(circuit.dimension());
        for (layer, lay) in circuit.layers.iter().zip(&layouts) {
            let next = {
                let mut x = current.clone();
                apply_layer(&mut x, layer.gate.matrix(), lay);
                x
            };
            prefix.push(current);
            current = next;
        }
        prefix.push(current);

        let mut suffix_t = vec![CMat::zeros(0, 0); n];
        if n > 0 {
            let mut current = linalg::conj(u);
            for l in (0..n).rev() {
                if l + 1 < n {
                    apply_layer(&mut current, &gates_t[l + 1], &layouts[l + 1]);
                }
                suffix_t[l] = current.clone();
            }
        }
        Self {
            circuit,
            layouts,
            gates_t,
            prefix,
            suffix_t,
        }
    }

    fn m(&self) -> usize {
        self.circuit.gate_dim()
    }

    /// `suffix_t[ℓ]` with `G_ℓᵀ` applied on every pair outside `skip`.
    fn open_suffix(&self, l: usize, skip: &[usize]) -> CMat {
        let mut x = self.suffix_t[l].clone();
        for (k, layout) in self.layouts[l].iter().enumerate() {
            if !skip.contains(&k) {
                linalg::apply_pair_left(&mut x, &self.gates_t[l], layout);
            }
        }
        x
    }

    /// `prefix[ℓ]` with `G_ℓ` applied on every pair except `skip`.
    fn open_prefix(&self, l: usize, skip: usize) -> CMat {
        let mut x = self.prefix[l].clone();
        for (k, layout) in self.layouts[l].iter().enumerate() {
            if k != skip {
                linalg::apply_pair_left(&mut x, self.circuit.layers[l].gate.matrix(), layout);
            }
        }
        x
    }

    fn environments(&self) -> Vec<CMat> {
        let m = self.m();
        (0..self.circuit.num_layers())
            .into_par_iter()
            .map(|l| {
                let mut env = CMat::zeros(m, m);
                for (k, layout) in self.layouts[l].iter().enumerate() {
                    let yt = self.open_suffix(l, &[k]);
                    env += linalg::hole_contract(&self.prefix[l], &yt, layout);
                }
                env
            })
            .collect()
    }

    /// Holomorphic second-derivative blocks `T[ℓ][ℓ']` for `ℓ ≥ ℓ'`, with
    /// `T[ℓ][ℓ'][(a·m + b), (c·m + d)] = ∂² Tr[U†W] / ∂(G_ℓ)_{ab} ∂(G_ℓ')_{cd}`.
    fn second_derivative_blocks(&self) -> Vec<Vec<CMat>> {
        let n = self.circuit.num_layers();
        let m = self.m();
        let mm = m * m;
        let dim = self.circuit.dimension();

        let open_suffix: Vec<Vec<CMat>> = (0..n)
            .into_par_iter()
            .map(|l| (0..self.layouts[l].len()).map(|k| self.open_suffix(l, &[k])).collect())
            .collect();
        let open_prefix: Vec<Vec<CMat>> = (0..n)
            .into_par_iter()
            .map(|l| (0..self.layouts[l].len()).map(|k| self.open_prefix(l, k)).collect())
            .collect();
        let double_suffix: Vec<HashMap<(usize, usize), CMat>> = (0..n)
            .into_par_iter()
            .map(|l| {
                let p = self.layouts[l].len();
                let mut map = HashMap::new();
                for k in 0..p {
                    for kp in k + 1..p {
                        map.insert((k, kp), self.open_suffix(l, &[k, kp]));
                    }
                }
                map
            })
            .collect();

        let items: Vec<(usize, usize)> = (0..n).flat_map(|lp| (0..mm).map(move |cd| (lp, cd))).collect();
        // columns[item][ℓ - ℓ'] holds T[ℓ][ℓ'][:, cd]
        let columns: Vec<Vec<Vec<c64>>> = items
            .par_iter()
            .map(|&(lp, cd)| {
                let (c, d) = (cd / m, cd % m);
                let layouts = &self.layouts[lp];
                let mut out = Vec::with_capacity(n - lp);

                let mut same = CMat::zeros(m, m);
                for (kp, layout_kp) in layouts.iter().enumerate() {
                    let mut seeded = CMat::zeros(dim, dim);
                    linalg::add_unit_pair(&mut seeded, &self.prefix[lp], c, d, layout_kp);
                    for (k, layout_k) in layouts.iter().enumerate() {
                        if k == kp {
                            continue;
                        }
                        let key = (k.min(kp), k.max(kp));
                        same += linalg::hole_contract(&seeded, &double_suffix[lp][&key], layout_k);
                    }
                }
                out.push(flatten(&same));

                if lp + 1 < n {
                    let mut front = CMat::zeros(dim, dim);
                    for (kp, layout_kp) in layouts.iter().enumerate() {
                        linalg::add_unit_pair(&mut front, &open_prefix[lp][kp], c, d, layout_kp);
                    }
                    for l in lp + 1..n {
                        let mut col = CMat::zeros(m, m);
                        for (k, layout_k) in self.layouts[l].iter().enumerate() {
                            col += linalg::hole_contract(&front, &open_suffix[l][k], layout_k);
                        }
                        out.push(flatten(&col));
                        if l + 1 < n {
                            apply_layer(&mut front, self.circuit.layers[l].gate.matrix(), &self.layouts[l]);
                        }
                    }
                }
                out
            })
            .collect();

        let mut blocks: Vec<Vec<CMat>> = (0..n)
            .map(|l| (0..=l).map(|_| CMat::zeros(mm, mm)).collect())
            .collect();
        for (&(lp, cd), cols) in items.iter().zip(&columns) {
            for (offset, col) in cols.iter().enumerate() {
                let block = &mut blocks[lp + offset][lp];
                for (ab, v) in col.iter().enumerate() {
                    block[(ab, cd)] = *v;
                }
            }
        }
        blocks
    }

    fn hessian(&self, envs: &[CMat]) -> RMat {
        let n = self.circuit.num_layers();
        let m = self.m();
        let mm = m * m;
        let t = self.second_derivative_blocks();
        let gates: Vec<&CMat> = self.circuit.layers.iter().map(|l| l.gate.matrix()).collect();
        let z: Vec<CMat> = envs
            .iter()
            .map(|e| linalg::scale(&linalg::conj(e), -linalg::ONE))
            .collect();

        let total = n * mm;
        let mut h = RMat::zeros(total, total);
        let mut unit = vec![0.0; mm];
        let mut block = vec![0.0; mm];
        for lp in 0..n {
            for r in 0..mm {
                unit.iter_mut().for_each(|x| *x = 0.0);
                unit[r] = 1.0;
                let x = gates[lp] * manifold::embed_flat(&unit, m);
                let col = lp * mm + r;
                for l in 0..n {
                    let mut y = CMat::from_fn(m, m, |a, b| {
                        let ab = a * m + b;
                        let mut acc = ZERO;
                        for cc in 0..m {
                            for dd in 0..m {
                                let cd = cc * m + dd;
                                let entry = if l >= lp { t[l][lp][(ab, cd)] } else { t[lp][l][(cd, ab)] };
                                acc += entry * x[(cc, dd)];
                            }
                        }
                        -acc.conj()
                    });
                    if l == lp {
                        let zg = z[l].adjoint() * gates[l];
                        let zx = z[l].adjoint() * &x;
                        let corr = &x * &zg + gates[l] * &zx;
                        y -= linalg::scale(&corr, c64::new(0.5, 0.0));
                    }
                    let a = manifold::antihermitian_part(&(gates[l].adjoint() * &y))
                        .expect("square");
                    manifold::extract_flat(&a, &mut block);
                    for (i, v) in block.iter().enumerate() {
                        h[(l * mm + i, col)] = *v;
                    }
                }
            }
        }
        h
    }
}

fn flatten(a: &CMat) -> Vec<c64> {
    let m = a.nrows();
    (0..m * m).map(|ab| a[(ab / m, ab % m)]).collect()
}

/// Rebuilds a circuit from `(label, gate)` layers on `geometry`.
pub fn extend_circuit(
    gates: &[(TopologyLabel, UnitaryGate)],
    geometry: &Geometry,
    local_dim: usize,
) -> Result<BrickwallCircuit> {
    geometry.validate()?;
    if gates.iter().any(|(label, _)| *label == TopologyLabel::Custom) {
        return Err(Error::InvalidTopology(
            "custom topologies cannot be regenerated for a new size".into(),
        ));
    }
    BrickwallCircuit::from_labels(geometry, local_dim, gates.to_vec())
}

/// Largest number of sites reachable from a single site through `n_layers`
/// layers; layer `i` uses `topologies[i % topologies.len()]`.
pub fn causal_width(n_layers: usize, topologies: &[LayerTopology], sites: usize) -> usize {
    if topologies.is_empty() || sites == 0 {
        return 1.min(sites);
    }
    (0..sites)
        .map(|start| {
            let mut support = vec![false; sites];
            support[start] = true;
            for i in 0..n_layers {
                for &(p, q) in topologies[i % topologies.len()].pairs() {
                    if support[p] || support[q] {
                        support[p] = true;
                        support[q] = true;
                    }
                }
            }
            support.iter().filter(|&&s| s).count()
        })
        .max()
        .unwrap_or(0)
}

/// Largest singular value of `W − U`.
pub fn spectral_distance(w: &CMat, u: &CMat) -> Result<f64> {
    linalg::ensure_same_shape(w, u)?;
    linalg::spectral_norm(&(w - u))
}

/// `‖W − U‖_F`.
pub fn frobenius_distance(w: &CMat, u: &CMat) -> Result<f64> {
    linalg::ensure_same_shape(w, u)?;
    Ok(linalg::frobenius_norm(&(w - u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, kron};
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_circuit(geometry: &Geometry, n: usize, seed: u64) -> BrickwallCircuit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ident = BrickwallCircuit::identity(geometry, 2, n).unwrap();
        let gates = (0..n).map(|_| random::haar_unitary(4, &mut rng)).collect();
        ident.with_gates(gates).unwrap()
    }

    #[test]
    fn chain_topologies() {
        let g = Geometry::Chain { sites: 6 };
        assert_eq!(g.topology(TopologyLabel::Even).unwrap().pairs(), &[(0, 1), (2, 3), (4, 5)]);
        assert_eq!(g.topology(TopologyLabel::Odd).unwrap().pairs(), &[(1, 2), (3, 4), (5, 0)]);
        assert!(g.topology(TopologyLabel::Rung).is_err());
        assert!(Geometry::Chain { sites: 5 }.validate().is_err());
        assert!(Geometry::Chain { sites: 2 }.validate().is_err());
    }

    #[test]
    fn ladder_topologies() {
        let g = Geometry::Ladder { columns: 4 };
        assert_eq!(
            g.topology(TopologyLabel::Even).unwrap().pairs(),
            &[(0, 2), (1, 3), (4, 6), (5, 7)]
        );
        assert_eq!(
            g.topology(TopologyLabel::Odd).unwrap().pairs(),
            &[(2, 4), (3, 5), (6, 0), (7, 1)]
        );
        assert_eq!(
            g.topology(TopologyLabel::Rung).unwrap().pairs(),
            &[(0, 1), (2, 3), (4, 5), (6, 7)]
        );
        assert!(Geometry::Ladder { columns: 3 }.validate().is_err());
    }

    #[test]
    fn topology_validation() {
        assert!(LayerTopology::custom(vec![(0, 1), (1, 2)], 4).is_err());
        assert!(LayerTopology::custom(vec![(0, 4)], 4).is_err());
        assert!(LayerTopology::custom(vec![(2, 2)], 4).is_err());
        assert!(LayerTopology::custom(vec![(0, 1), (2, 3)], 4).is_ok());
    }

    #[test]
    fn layer_matrix_examples() {
        let g = Geometry::Chain { sites: 4 };
        let even = g.topology(TopologyLabel::Even).unwrap();
        let id = layer_matrix(&UnitaryGate::identity(4), &even, 4, 2).unwrap();
        assert!(frobenius_norm(&(&id - &linalg::identity(16))) == 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gate = random::haar_unitary(4, &mut rng);
        let single = LayerTopology::custom(vec![(0, 1)], 2).unwrap();
        let w = layer_matrix(&gate, &single, 2, 2).unwrap();
        assert!(frobenius_norm(&(&w - gate.matrix())) < 1e-15);

        let w = layer_matrix(&gate, &even, 4, 2).unwrap();
        let expected = kron(gate.matrix().as_ref(), gate.matrix().as_ref());
        assert!(frobenius_norm(&(&w - &expected)) < 1e-14);

        let too_big = LayerTopology::custom(vec![(0, 5)], 6).unwrap();
        assert!(layer_matrix(&gate, &too_big, 4, 2).is_err());
    }

    #[test]
    fn circuit_matrix_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let single = LayerTopology::custom(vec![(0, 1)], 2).unwrap();
        let a = random::haar_unitary(4, &mut rng);
        let b = random::haar_unitary(4, &mut rng);
        let c = BrickwallCircuit::new(
            2,
            2,
            vec![
                Layer { topology: single.clone(), gate: a.clone() },
                Layer { topology: single, gate: b.clone() },
            ],
        )
        .unwrap();
        let w = circuit_matrix(&c);
        let expected = b.matrix() * a.matrix();
        assert!(frobenius_norm(&(&w - &expected)) < 1e-14);
    }

    #[test]
    fn target_and_frobenius_identity() {
        let g = Geometry::Chain { sites: 6 };
        let c = random_circuit(&g, 3, 3);
        let w = circuit_matrix(&c);
        assert!(linalg::unitarity_defect(&w) < 1e-12);
        assert!((target_f(&c, &w).unwrap() + 64.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random::haar_unitary(64, &mut rng).into_matrix();
        let f = target_f(&c, &u).unwrap();
        let fro = frobenius_distance(&w, &u).unwrap();
        assert!((fro * fro - (128.0 + 2.0 * f)).abs() < 1e-10);
        assert!(target_f(&c, &linalg::identity(32)).is_err());
    }

    #[test]
    fn environments_identity_circuit() {
        let g = Geometry::Chain { sites: 4 };
        let c = BrickwallCircuit::identity(&g, 2, 2).unwrap();
        let envs = circuit_environments(&c, &linalg::identity(16)).unwrap();
        let expected = linalg::scale(&linalg::identity(4), c64::new(8.0, 0.0));
        for env in &envs {
            assert!(frobenius_norm(&(env - &expected)) < 1e-13);
        }
    }

    #[test]
    fn environments_directional_derivative() {
        let g = Geometry::Chain { sites: 4 };
        let c = random_circuit(&g, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random::haar_unitary(16, &mut rng).into_matrix();
        let envs = circuit_environments(&c, &u).unwrap();
        for l in 0..3 {
            let delta = random::ginibre(4, &mut rng);
            let predicted = (0..4)
                .flat_map(|a| (0..4).map(move |b| (a, b)))
                .fold(ZERO, |acc, (a, b)| acc + envs[l][(a, b)] * delta[(a, b)]);
            // Tr[U†W] is polynomial in the entries, so the perturbed gates need
            // not be unitary; build layer operators directly.
            let eps = 1e-6;
            let shifted = |s: f64| {
                let mut w = linalg::identity(16);
                for (i, layer) in c.layers().iter().enumerate() {
                    let gate = if i == l {
                        layer.gate.matrix() + &linalg::scale(&delta, c64::new(s, 0.0))
                    } else {
                        layer.gate.matrix().clone()
                    };
                    apply_layer(&mut w, &gate, &layer.topology.layouts(4, 2));
                }
                linalg::inner_product(&u, &w)
            };
            let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            assert!((fd - predicted).norm() <= 1e-6 * predicted.norm().max(1.0));
        }
    }

    #[test]
    fn gradient_vanishes_at_own_matrix() {
        let g = Geometry::Chain { sites: 6 };
        let c = random_circuit(&g, 4, 7);
        let w = circuit_matrix(&c);
        assert!(riemannian_gradient(&c, &w).unwrap().norm() < 1e-10);

        let single = LayerTopology::custom(vec![(0, 1)], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gate = random::haar_unitary(4, &mut rng);
        let c = BrickwallCircuit::new(2, 2, vec![Layer { topology: single, gate: gate.clone() }]).unwrap();
        assert!(riemannian_gradient(&c, gate.matrix()).unwrap().norm() < 1e-13);
    }

    #[test]
    fn hessian_is_symmetric() {
        let g = Geometry::Chain { sites: 4 };
        let c = random_circuit(&g, 3, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = random::haar_unitary(16, &mut rng).into_matrix();
        let h = riemannian_hessian(&c, &u).unwrap();
        let asym = RMat::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] - h[(j, i)]);
        assert!(asym.norm_max() < 1e-10);
    }

    #[test]
    fn causal_width_examples() {
        let g = Geometry::Chain { sites: 10 };
        let topo = [g.topology(TopologyLabel::Even).unwrap(), g.topology(TopologyLabel::Odd).unwrap()];
        assert_eq!(causal_width(1, &topo, 10), 2);
        assert_eq!(causal_width(3, &topo, 10), 6);
        assert_eq!(causal_width(20, &topo, 10), 10);
    }

    #[test]
    fn causal_width_matches_column_support() {
        let g = Geometry::Ladder { columns: 4 };
        let c = random_circuit(&g, 3, 11);
        let w = circuit_matrix(&c);
        // a site is in the support of column e_0 iff some nonzero row differs
        // from index 0 on that site
        let mut brute = 0;
        for start in 0..8 {
            let col = 1usize << (7 - start);
            let mut touched = vec![false; 8];
            for row in 0..256 {
                if w[(row, col)].norm() > 1e-12 {
                    for (s, t) in touched.iter_mut().enumerate() {
                        if (row ^ col) >> (7 - s) & 1 == 1 {
                            *t = true;
                        }
                    }
                }
            }
            touched[start] = true;
            brute = brute.max(touched.iter().filter(|&&t| t).count());
        }
        assert_eq!(c.causal_width(), brute);
    }

    #[test]
    fn spectral_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random::haar_unitary(16, &mut rng).into_matrix();
        assert!(spectral_distance(&u, &u).unwrap() < 1e-14);
        let phi = 0.7;
        let w = linalg::scale(&u, c64::from_polar(1.0, phi));
        let expected = (c64::from_polar(1.0, phi) - linalg::ONE).norm();
        assert!((spectral_distance(&w, &u).unwrap() - expected).abs() < 1e-13);
        assert!(spectral_distance(&w, &linalg::identity(4)).is_err());
    }

    #[test]
    fn extend_identity_and_same_size() {
        let g = Geometry::Chain { sites: 6 };
        let c = random_circuit(&g, 3, 13);
        assert_eq!(c.extend(&g).unwrap(), c);
        assert!(c.extend(&Geometry::Chain { sites: 4 }).is_err());
        let id = BrickwallCircuit::identity(&g, 2, 3).unwrap();
        let big = id.extend(&Geometry::Chain { sites: 8 }).unwrap();
        assert!(frobenius_norm(&(&circuit_matrix(&big) - &linalg::identity(256))) == 0.0);
        assert!(c.extend(&Geometry::Chain { sites: 7 }).is_err());
    }
}
