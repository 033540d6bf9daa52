//! Independent numerical checks shared by `verify` and the acceptance run.

use anyhow::{bail, Result};
use brickwall::circuit::{self, BrickwallCircuit};
use brickwall::linalg::{self, frobenius_norm, CMat, RMat};
use brickwall::manifold::{self, ProductTangent};
use brickwall::models::{
    add_pauli_string, build_hamiltonian, exact_evolution, splitting_circuit, splitting_method,
    LatticeModel, ModelKind, Pauli,
};
use brickwall::random;
use faer::{c64, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Worst defects over random `(V, ξ)` pairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManifoldReport {
    pub retraction_unitarity: f64,
    pub projection_idempotence: f64,
    pub projection_self_adjointness: f64,
    pub embedding_isometry: f64,
}

pub fn manifold_invariants(pairs: usize, m: usize, seed: u64) -> Result<ManifoldReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ManifoldReport::default();
    for _ in 0..pairs {
        let v = random::haar_unitary(m, &mut rng);
        let xi = random::tangent(&v, &mut rng);
        let q = manifold::retract_polar(&v, &xi)?;
        rep.retraction_unitarity = rep.retraction_unitarity.max(linalg::unitarity_defect(q.matrix()));

        let x = random::ginibre(m, &mut rng);
        let y = random::ginibre(m, &mut rng);
        let px = manifold::project_tangent(&v, &x)?;
        let py = manifold::project_tangent(&v, &y)?;
        let ppx = manifold::project_tangent(&v, &px)?;
        rep.projection_idempotence = rep.projection_idempotence.max(frobenius_norm(&(&ppx - &px)));
        let sym = (manifold::inner(&px, &y)? - manifold::inner(&x, &py)?).abs();
        rep.projection_self_adjointness = rep.projection_self_adjointness.max(sym);

        let r1 = random::real_matrix(m, &mut rng);
        let r2 = random::real_matrix(m, &mut rng);
        let euclid: f64 = r1.col_iter().zip(r2.col_iter()).map(|(a, b)| a.iter().zip(b.iter()).map(|(p, q)| p * q).sum::<f64>()).sum();
        let embedded = linalg::inner_product(&manifold::real_embed(&r1)?, &manifold::real_embed(&r2)?).re;
        rep.embedding_isometry = rep.embedding_isometry.max((embedded - euclid).abs());
    }
    Ok(rep)
}

fn unit_direction(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v = random::real_vector(len, rng);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn retract_scaled(c: &BrickwallCircuit, v: &[f64], eps: f64) -> Result<BrickwallCircuit> {
    let step = ProductTangent::from_flat(v.iter().map(|x| x * eps).collect(), c.num_layers(), c.gate_dim())?;
    Ok(c.retract(&step)?)
}

/// Largest relative deviation between `⟨grad f, v⟩` and the central difference
/// of `f(R(±εv))` over unit directions `v`. The denominator is
/// `max(|⟨grad f, v⟩|, ‖grad f‖)`.
pub fn gradient_fd_error(c: &BrickwallCircuit, u: &CMat, directions: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grad = circuit::riemannian_gradient(c, u)?;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let v = unit_direction(grad.as_slice().len(), &mut rng);
        let predicted: f64 = grad.as_slice().iter().zip(&v).map(|(a, b)| a * b).sum();
        let fp = circuit::target_f(&retract_scaled(c, &v, eps)?, u)?;
        let fm = circuit::target_f(&retract_scaled(c, &v, -eps)?, u)?;
        let fd = (fp - fm) / (2.0 * eps);
        worst = worst.max((fd - predicted).abs() / predicted.abs().max(grad.norm()));
    }
    Ok(worst)
}

/// Riemannian gradient in real coordinates, assembled from the Euclidean
/// gradient by projection rather than through the library's own path.
fn projected_gradient(c: &BrickwallCircuit, u: &CMat, bases: &[manifold::UnitaryGate]) -> Result<Vec<CMat>> {
    let euclid = circuit::euclidean_gradient(c, u)?;
    euclid
        .iter()
        .zip(c.gates())
        .zip(bases)
        .map(|((z, g), base)| {
            let at_point = manifold::project_tangent(&g, z)?;
            // transport to the base point by projection
            Ok(manifold::project_tangent(base, &at_point)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct HessianReport {
    pub asymmetry: f64,
    pub fd_error: f64,
}

/// Symmetry of the Riemannian Hessian and agreement of Hessian-vector products
/// with central differences of the projected gradient along the retraction.
pub fn hessian_check(c: &BrickwallCircuit, u: &CMat, directions: usize, seed: u64) -> Result<HessianReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = circuit::riemannian_hessian(c, u)?;
    let n = h.nrows();
    let asymmetry = RMat::from_fn(n, n, |i, j| h[(i, j)] - h[(j, i)]).norm_max();
    let bases = c.gates();
    let m = c.gate_dim();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let v = unit_direction(n, &mut rng);
        let hv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[(i, j)] * v[j]).sum()).collect();
        let gp = projected_gradient(&retract_scaled(c, &v, eps)?, u, &bases)?;
        let gm = projected_gradient(&retract_scaled(c, &v, -eps)?, u, &bases)?;
        let mut fd = Vec::with_capacity(n);
        for (l, base) in bases.iter().enumerate() {
            let diff = linalg::scale(&(&gp[l] - &gm[l]), c64::new(0.5 / eps, 0.0));
            let coords = manifold::real_extract(&manifold::antihermitian_part(&(base.adjoint() * &diff))?)?;
            for i in 0..m {
                for j in 0..m {
                    fd.push(coords[(i, j)]);
                }
            }
        }
        let err = hv.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    Ok(HessianReport { asymmetry, fd_error: worst })
}

/// Smallest eigenvalue of the symmetrized Riemannian Hessian.
pub fn min_hessian_eigenvalue(c: &BrickwallCircuit, u: &CMat) -> Result<f64> {
    let h = circuit::riemannian_hessian(c, u)?;
    let n = h.nrows();
    let sym = RMat::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
    let ev = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| anyhow::anyhow!("eigenvalue solver failed: {e:?}"))?;
    Ok(ev[0])
}

/// Largest entry of `W_strang − e^{−iAt/2} e^{−iBt} e^{−iAt/2}` for an Ising
/// chain, with `A`, `B` assembled site by site (each field split evenly).
pub fn strang_fidelity(model: &LatticeModel) -> Result<f64> {
    let ModelKind::Ising1d { j, g, h } = model.kind else {
        bail!("the Strang oracle covers the Ising chain only");
    };
    let sites = model.sites();
    let dim = model.dimension();
    let mut a = CMat::zeros(dim, dim);
    let mut b = CMat::zeros(dim, dim);
    for s in 0..sites {
        let part = if s % 2 == 0 { &mut a } else { &mut b };
        add_pauli_string(part, sites, j, &[(s, Pauli::Z), ((s + 1) % sites, Pauli::Z)]);
        for dst in [&mut a, &mut b] {
            add_pauli_string(dst, sites, 0.5 * g, &[(s, Pauli::X)]);
            add_pauli_string(dst, sites, 0.5 * h, &[(s, Pauli::Z)]);
        }
    }
    let total = build_hamiltonian(model)?;
    if linalg::max_abs(&(&(&a + &b) - &total)) > 1e-12 {
        bail!("partition oracle does not sum to the Hamiltonian");
    }
    let t = model.time;
    let half = exact_evolution(&a, 0.5 * t)?;
    let full = exact_evolution(&b, t)?;
    let reference = &(&half * &full) * &half;
    let c = splitting_circuit(&splitting_method("strang")?, model, 1)?;
    Ok(linalg::max_abs(&(&circuit::circuit_matrix(&c) - &reference)))
}

/// Least-squares slope of `log(err)` against `log(1/r)`.
pub fn loglog_slope(steps: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|&r| (r as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Value at `x` of the piecewise log-log linear curve through `points`
/// (sorted by abscissa), extended linearly beyond the end segments.
pub fn loglog_interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    assert!(points.len() >= 2, "need two points");
    let k = points.windows(2).position(|w| x <= w[1].0).unwrap_or(points.len() - 2);
    let ((x0, y0), (x1, y1)) = (points[k], points[k + 1]);
    let slope = (y1.ln() - y0.ln()) / (x1.ln() - x0.ln());
    (y0.ln() + slope * (x.ln() - x0.ln())).exp()
}
