//! Riemannian trust-region optimization of the layer gates with a
//! Steihaug–Toint truncated conjugate-gradient subproblem solver.
//!
//! Steps live in the flat real coordinates of [`ProductTangent`]; the trust
//! region is the Euclidean ball there, which is the Riemannian ball because
//! the coordinate map is an isometry.

use crate::circuit::{self, BrickwallCircuit, Geometry, TopologyLabel};
use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};
use crate::manifold::{ProductTangent, UnitaryGate};
use crate::models::{splitting_circuit, LatticeModel, SplittingMethod};

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionConfig {
    /// Initial radius.
    pub delta0: f64,
    /// Radius cap.
    pub delta_max: f64,
    /// Steps with `ρ > rho_prime` are accepted.
    pub rho_prime: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Inner tolerance factor `κ`.
    pub tcg_kappa: f64,
    /// Inner superlinear exponent `θ`.
    pub tcg_theta: f64,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Record the spectral distance of every iterate in the trace.
    pub record_spectral_error: bool,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            delta0: 0.01,
            delta_max: 0.1,
            rho_prime: 0.125,
            max_iter: 200,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
            grad_tol: 1e-10,
            record_spectral_error: false,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_max) || !self.delta_max.is_finite() {
            return bad(format!(
                "need 0 < delta0 <= delta_max, got delta0 = {}, delta_max = {}",
                self.delta0, self.delta_max
            ));
        }
        if !(0.0..0.25).contains(&self.rho_prime) {
            return bad(format!("need 0 <= rho_prime < 1/4, got {}", self.rho_prime));
        }
        if !(self.tcg_kappa > 0.0 && self.tcg_kappa < 1.0) {
            return bad(format!("need 0 < tcg_kappa < 1, got {}", self.tcg_kappa));
        }
        if !(self.tcg_theta > 0.0) {
            return bad(format!("need tcg_theta > 0, got {}", self.tcg_theta));
        }
        if !(self.grad_tol >= 0.0) {
            return bad(format!("need grad_tol >= 0, got {}", self.grad_tol));
        }
        Ok(())
    }
}

/// `m̂(s) = f0 + ⟨grad, s⟩ + ½⟨s, hess·s⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub f0: f64,
    pub grad: Vec<f64>,
    pub hess: RMat,
}

impl QuadraticModel {
    pub fn new(f0: f64, grad: Vec<f64>, hess: RMat) -> Result<Self> {
        let n = grad.len();
        if hess.nrows() != n || hess.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: hess.nrows(),
            });
        }
        Ok(Self { f0, grad, hess })
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for (o, h) in out.iter_mut().zip(self.hess.col_as_slice(j)) {
                    *o += h * vj;
                }
            }
        }
        out
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        self.f0 + dot(&self.grad, s) + 0.5 * dot(s, &self.hess_vec(s))
    }

    /// Minimizer of `m̂` along `−grad` inside the ball.
    pub fn cauchy_point(&self, radius: f64) -> Vec<f64> {
        let gnorm = norm(&self.grad);
        if gnorm == 0.0 {
            return vec![0.0; self.dim()];
        }
        let curvature = dot(&self.grad, &self.hess_vec(&self.grad));
        let tau = if curvature <= 0.0 {
            1.0
        } else {
            (gnorm.powi(3) / (radius * curvature)).min(1.0)
        };
        self.grad.iter().map(|g| -tau * radius * g / gnorm).collect()
    }
}

/// Why [`truncated_cg`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcgExit {
    Interior,
    Boundary,
    NegativeCurvature,
    MaxInnerIter,
}

impl TcgExit {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Interior => "interior",
            Self::Boundary => "boundary",
            Self::NegativeCurvature => "negative-curvature",
            Self::MaxInnerIter => "max-inner-iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcgResult {
    pub step: Vec<f64>,
    pub exit: TcgExit,
    pub inner_iterations: usize,
}

/// Inner stopping rule `‖r‖ ≤ ‖r₀‖·min(‖r₀‖^θ, κ)` with `κ = 0.1`, `θ = 1`.
pub fn truncated_cg(model: &QuadraticModel, radius: f64) -> TcgResult {
    truncated_cg_with(model, radius, 0.1, 1.0)
}

pub fn truncated_cg_with(model: &QuadraticModel, radius: f64, kappa: f64, theta: f64) -> TcgResult {
    let n = model.dim();
    let mut eta = vec![0.0; n];
    let mut r = model.grad.clone();
    let r0 = norm(&r);
    if r0 == 0.0 {
        return TcgResult {
            step: eta,
            exit: TcgExit::Interior,
            inner_iterations: 0,
        };
    }
    let tol = r0 * r0.powf(theta).min(kappa);
    let mut delta: Vec<f64> = r.iter().map(|x| -x).collect();
    let mut rr = dot(&r, &r);
    for j in 0..n.max(1) {
        let hd = model.hess_vec(&delta);
        let curvature = dot(&delta, &hd);
        if curvature <= 0.0 {
            let tau = boundary_root(&eta, &delta, radius);
            axpy(&mut eta, tau, &delta);
            return TcgResult {
                step: eta,
                exit: TcgExit::NegativeCurvature,
                inner_iterations: j + 1,
            };
        }
        let alpha = rr / curvature;
        let trial: Vec<f64> = eta.iter().zip(&delta).map(|(e, d)| e + alpha * d).collect();
        if norm(&trial) >= radius {
            let tau = boundary_root(&eta, &delta, radius);
            axpy(&mut eta, tau, &delta);
            return TcgResult {
                step: eta,
                exit: TcgExit::Boundary,
                inner_iterations: j + 1,
            };
        }
        eta = trial;
        axpy(&mut r, alpha, &hd);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol {
            return TcgResult {
                step: eta,
                exit: TcgExit::Interior,
                inner_iterations: j + 1,
            };
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (d, ri) in delta.iter_mut().zip(&r) {
            *d = -ri + beta * *d;
        }
    }
    TcgResult {
        step: eta,
        exit: TcgExit::MaxInnerIter,
        inner_iterations: n.max(1),
    }
}

/// Positive `τ` with `‖η + τδ‖ = radius`.
fn boundary_root(eta: &[f64], delta: &[f64], radius: f64) -> f64 {
    let a = dot(delta, delta);
    let b = 2.0 * dot(eta, delta);
    let c = dot(eta, eta) - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // numerically stable form of (−b + √disc) / 2a
    if b >= 0.0 {
        -2.0 * c / (b + disc)
    } else {
        (-b + disc) / (2.0 * a)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One outer iteration. `f` is the objective at the iterate kept after the
/// iteration; `grad_norm` is taken at the iterate the step started from.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub radius: f64,
    pub accepted: bool,
    pub rho: f64,
    pub exit: Option<TcgExit>,
    pub spectral_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
}

/// Iteration history; `records[0]` describes the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl OptimizationTrace {
    pub fn initial_f(&self) -> f64 {
        self.records[0].f
    }

    pub fn final_f(&self) -> f64 {
        self.records.last().expect("trace has a starting record").f
    }

    pub fn accepted_steps(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    /// Objective values of the start and every accepted iterate.
    pub fn accepted_f(&self) -> Vec<f64> {
        self.records
            .iter()
            .enumerate()
            .filter(|(i, r)| *i == 0 || r.accepted)
            .map(|(_, r)| r.f)
            .collect()
    }
}

pub fn optimize(
    start: &BrickwallCircuit,
    u: &CMat,
    config: &TrustRegionConfig,
) -> Result<(BrickwallCircuit, OptimizationTrace)> {
    optimize_with_observer(start, u, config, |_, _| {})
}

/// [`optimize`], calling `observer` with every record and the iterate kept
/// after that iteration.
pub fn optimize_with_observer<F>(
    start: &BrickwallCircuit,
    u: &CMat,
    config: &TrustRegionConfig,
    mut observer: F,
) -> Result<(BrickwallCircuit, OptimizationTrace)>
where
    F: FnMut(&IterationRecord, &BrickwallCircuit),
{
    config.validate()?;
    let spectral = |c: &BrickwallCircuit| -> Result<Option<f64>> {
        if config.record_spectral_error {
            Ok(Some(circuit::spectral_distance(&circuit::circuit_matrix(c), u)?))
        } else {
            Ok(None)
        }
    };

    let mut current = start.clone();
    let mut eval = circuit::evaluate(&current, u, true)?;
    let mut radius = config.delta0;
    let mut records = vec![IterationRecord {
        iter: 0,
        f: eval.f,
        grad_norm: eval.gradient.norm(),
        step_norm: 0.0,
        radius,
        accepted: false,
        rho: f64::NAN,
        exit: None,
        spectral_error: spectral(&current)?,
    }];
    observer(&records[0], &current);
    let mut termination = Termination::MaxIterations;
    let mut current_spectral = records[0].spectral_error;

    for iter in 1..=config.max_iter {
        let grad_norm = eval.gradient.norm();
        if grad_norm < config.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let hess = symmetrized(eval.hessian.as_ref().expect("requested"));
        let model = QuadraticModel::new(eval.f, eval.gradient.as_slice().to_vec(), hess)?;
        let tcg = truncated_cg_with(&model, radius, config.tcg_kappa, config.tcg_theta);
        let step_norm = norm(&tcg.step);
        let predicted = model.f0 - model.value(&tcg.step);
        let on_boundary = step_norm >= radius * (1.0 - 1e-10);

        let radius_used = radius;
        let mut accepted = false;
        let mut rho = f64::NAN;
        let candidate = if predicted > 0.0 {
            let step = ProductTangent::from_flat(
                tcg.step.clone(),
                current.num_layers(),
                current.gate_dim(),
            )?;
            match current.retract(&step) {
                Ok(c) => Some(c),
                Err(Error::SingularRetraction { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };

        match candidate {
            Some(cand) => {
                let f_cand = circuit::target_f(&cand, u)?;
                rho = (eval.f - f_cand) / predicted;
                if rho < 0.25 {
                    radius *= 0.25;
                } else if rho > 0.75 && on_boundary {
                    radius = (2.0 * radius).min(config.delta_max);
                }
                if rho > config.rho_prime {
                    accepted = true;
                    current = cand;
                    eval = circuit::evaluate(&current, u, true)?;
                    current_spectral = spectral(&current)?;
                }
            }
            None => radius *= 0.25,
        }

        let record = IterationRecord {
            iter,
            f: eval.f,
            grad_norm,
            step_norm,
            radius: radius_used,
            accepted,
            rho,
            exit: Some(tcg.exit),
            spectral_error: current_spectral,
        };
        observer(&record, &current);
        records.push(record);
    }
    if config.max_iter == 0 && eval.gradient.norm() < config.grad_tol {
        termination = Termination::GradientTolerance;
    }
    Ok((current, OptimizationTrace { records, termination }))
}

fn symmetrized(h: &RMat) -> RMat {
    RMat::from_fn(h.nrows(), h.ncols(), |i, j| 0.5 * (h[(i, j)] + h[(j, i)]))
}

/// Adds an identity layer before the first and after the last layer,
/// continuing the geometry's label cycle in both directions.
pub fn bootstrap_pad(circuit: &BrickwallCircuit, geometry: &Geometry) -> Result<BrickwallCircuit> {
    if geometry.sites() != circuit.sites() {
        return Err(Error::DimensionMismatch {
            expected: circuit.sites(),
            found: geometry.sites(),
        });
    }
    let labels = circuit.labels();
    let cycle = geometry.label_cycle();
    let c = cycle.len();
    if labels.is_empty() {
        return BrickwallCircuit::identity(geometry, circuit.local_dim(), 2);
    }
    let phase = (0..c)
        .find(|&p| labels.iter().enumerate().all(|(i, l)| *l == cycle[(p + i) % c]))
        .ok_or_else(|| {
            Error::InvalidTopology(format!(
                "layer labels {:?} do not follow the cycle {:?}",
                labels, cycle
            ))
        })?;
    let first: TopologyLabel = cycle[(phase + c - 1) % c];
    let last: TopologyLabel = cycle[(phase + labels.len()) % c];
    let m = circuit.gate_dim();
    let mut layers = Vec::with_capacity(labels.len() + 2);
    layers.push((first, UnitaryGate::identity(m)));
    for layer in circuit.layers() {
        layers.push((layer.topology.label(), layer.gate.clone()));
    }
    layers.push((last, UnitaryGate::identity(m)));
    BrickwallCircuit::from_labels(geometry, circuit.local_dim(), layers)
}

/// Starting circuit made of `r` steps of a splitting method.
pub fn splitting_warm_start(
    method: &SplittingMethod,
    model: &LatticeModel,
    r: usize,
) -> Result<BrickwallCircuit> {
    splitting_circuit(method, model, r)
}
