//! The `verify` oracle battery: quick, seeded self-checks of the numerics.

use anyhow::Result;
use brickwall::circuit::{BrickwallCircuit, Geometry};
use brickwall::linalg::RMat;
use brickwall::models::{exact_unitary, splitting_circuit, splitting_method, splitting_methods_catalog, LatticeModel, ModelKind};
use brickwall::random;
use brickwall::trustregion::{truncated_cg, QuadraticModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelSpec;
use crate::gatefile::GateFile;
use crate::oracles;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {:<24} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn ising() -> Result<LatticeModel> {
    Ok(LatticeModel::new(ModelKind::Ising1d { j: 1.0, g: 0.75, h: 0.6 }, 6, 1.0)?)
}

pub fn run_verify(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let m = oracles::manifold_invariants(1000, 4, seed)?;
    out.push(check(
        "manifold",
        m.retraction_unitarity <= 1e-12
            && m.projection_idempotence <= 1e-12
            && m.projection_self_adjointness <= 1e-12
            && m.embedding_isometry <= 1e-13,
        format!(
            "retraction {:.1e}, idempotence {:.1e}, self-adjointness {:.1e}, isometry {:.1e}",
            m.retraction_unitarity, m.projection_idempotence, m.projection_self_adjointness, m.embedding_isometry
        ),
    ));

    let model = ising()?;
    let u = exact_unitary(&model)?;
    let c = splitting_circuit(&splitting_method("strang")?, &model, 1)?;
    let g = oracles::gradient_fd_error(&c, &u, 5, seed)?;
    out.push(check("gradient", g <= 1e-6, format!("max relative deviation {g:.2e}")));

    let h = oracles::hessian_check(&c, &u, 3, seed)?;
    out.push(check(
        "hessian",
        h.asymmetry <= 1e-10 && h.fd_error <= 1e-4,
        format!("asymmetry {:.1e}, max relative deviation {:.2e}", h.asymmetry, h.fd_error),
    ));

    let s = oracles::strang_fidelity(&model)?;
    out.push(check("strang", s <= 1e-12, format!("max entry deviation {s:.1e}")));

    let chain = Geometry::Chain { sites: 4 };
    let chain_model = LatticeModel::new(ModelKind::Ising1d { j: 1.0, g: 0.75, h: 0.0 }, 4, 1.0)?;
    let ladder_model = LatticeModel::new(ModelKind::IsingLadder { j: 1.0, g: 3.0 }, 4, 0.25)?;
    let mut counts_ok = true;
    for method in splitting_methods_catalog() {
        let lattice = if method.is_compatible(&chain) { &chain_model } else { &ladder_model };
        for r in 1..=4 {
            counts_ok &= splitting_circuit(&method, lattice, r)?.num_layers() == (method.s() - 1) * r + 1;
        }
    }
    out.push(check("layer counts", counts_ok, "n = (s - 1) r + 1 for r = 1..4".into()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..100 {
        let dim = 1 + k % 12;
        let a = random::real_matrix(dim, &mut rng);
        let hess = RMat::from_fn(dim, dim, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let q = QuadraticModel::new(0.0, random::real_vector(dim, &mut rng), hess)?;
        let radius = 0.05 + (k as f64) * 0.03;
        let step = truncated_cg(&q, radius).step;
        worst = worst.max(q.value(&step) - q.value(&q.cauchy_point(radius)));
    }
    out.push(check("tcg vs cauchy", worst <= 1e-12, format!("worst excess over Cauchy value {worst:.1e}")));

    let spec = ModelSpec::from_model(&chain_model);
    let gates = (0..3).map(|_| random::haar_unitary(4, &mut rng)).collect();
    let circuit = BrickwallCircuit::identity(&chain, 2, 3)?.with_gates(gates)?;
    let file = GateFile::new(spec, &circuit, &exact_unitary(&chain_model)?)?;
    let text = file.to_json()?;
    let back = GateFile::from_json(&text)?;
    let metrics = back.recompute_metrics()?.max_deviation(&file.metrics);
    out.push(check(
        "gate file",
        back == file && back.to_json()? == text && back.circuit()? == circuit && metrics <= 1e-10,
        format!("round trip exact, metric deviation {metrics:.1e}"),
    ));
    Ok(out)
}

/// Recomputes the metrics stored in a gate file.
pub fn verify_gatefile(file: &GateFile) -> Result<Check> {
    let dev = file.recompute_metrics()?.max_deviation(&file.metrics);
    Ok(check("stored metrics", dev <= 1e-10, format!("max deviation {dev:.1e}")))
}
